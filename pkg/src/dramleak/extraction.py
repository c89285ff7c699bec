"""Recover (R_S, R_B) from flip measurements.

Two procedures:

* disturbance: find the hammer counts at which the victim flips under the
  111 and 010 patterns, then invert the two discharge laws in closed form;
* retention: find the earliest failing refresh pause and invert the RC decay,
  once with all-ones neighbours (baseline R_S) and once with a noisy
  neighbour pattern (R_S(N)).

Probes are anything answering flip queries. :class:`SimulationProbe` wraps
model cells; :class:`TraceProbe` replays recorded observations.
"""

from __future__ import annotations

import bisect
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

from dramleak.cell import DEFAULT_C_S, INFINITE, CellParams, DeviceConstants, Mechanism, Pattern
from dramleak.errors import InvalidParameterError, NotReachedError, WrongMechanismError
from dramleak.stress import (
    FlipObservation,
    StressSpec,
    flip_time,
    flipped_after,
    hc_for_time,
    refine_bracket,
)


class DisturbanceProbe(Protocol):
    def flips(self, pattern: Pattern, hc: int) -> int:
        """Number of distinct victim cells flipped after ``hc`` activations."""

    @property
    def population(self) -> int: ...


class RetentionProbe(Protocol):
    def flipped_after(self, pattern: Pattern, t: float) -> bool:
        """Whether the victim reads '0' after pausing refresh for ``t`` seconds."""


class SimulationProbe:
    """Probe backed by model cells stressed at ``f_rd``."""

    def __init__(self, cells: CellParams | Sequence[CellParams], dc: DeviceConstants,
                 f_rd: float | None = None):
        self.cells = [cells] if isinstance(cells, CellParams) else list(cells)
        self.dc = dc
        self.f_rd = f_rd
        self._hc_cache: dict[Pattern, list[float]] = {}

    @property
    def population(self) -> int:
        return len(self.cells)

    def _flip_hcs(self, pattern: Pattern) -> list[float]:
        if pattern not in self._hc_cache:
            if self.f_rd is None:
                raise WrongMechanismError("probe has no disturbance rate")
            hcs = []
            for c in self.cells:
                t = flip_time(c, pattern, self.dc)
                hcs.append(math.inf if t is None else hc_for_time(t, self.f_rd))
            self._hc_cache[pattern] = sorted(hcs)
        return self._hc_cache[pattern]

    def flips(self, pattern: Pattern, hc: int) -> int:
        return bisect.bisect_right(self._flip_hcs(pattern), hc)

    def flipped_after(self, pattern: Pattern, t: float) -> bool:
        if len(self.cells) != 1:
            raise InvalidParameterError("retention probing needs a single-cell probe")
        return flipped_after(self.cells[0], pattern, t, self.dc)


class TraceProbe:
    """Probe replaying recorded disturbance observations.

    A record with ``flip_hc = k`` answers "flipped" for every query ``hc >= k``;
    unflipped records never flip.
    """

    def __init__(self, observations: Iterable[FlipObservation]):
        by_pattern: dict[Pattern, list[float]] = defaultdict(list)
        ids = set()
        for o in observations:
            if not o.mechanism.is_disturbance:
                raise WrongMechanismError("TraceProbe replays disturbance records only")
            ids.add(o.cell_id)
            by_pattern[o.pattern].append(o.flip_hc if o.flipped else math.inf)
        self._hcs = {p: sorted(v) for p, v in by_pattern.items()}
        self._population = len(ids)

    @property
    def population(self) -> int:
        return self._population

    def flips(self, pattern: Pattern, hc: int) -> int:
        if pattern not in self._hcs:
            raise InvalidParameterError(f"trace has no {pattern.value} records")
        return bisect.bisect_right(self._hcs[pattern], hc)


def hc_at_target_flips(probe: DisturbanceProbe, pattern: Pattern, stress: StressSpec,
                       n_target: int = 1, hc_init: int = 1, growth: int = 2) -> int:
    """Smallest hammer count producing ``n_target`` flips.

    Grows HC geometrically from ``hc_init`` until the target is met, then
    bisects the last interval down to unit resolution. Raises
    :class:`NotReachedError` once the stress budget is exhausted.
    """
    if n_target < 1:
        raise InvalidParameterError("n_target must be >= 1")
    if hc_init < 1 or growth < 2:
        raise InvalidParameterError("need hc_init >= 1 and growth >= 2")
    budget = int(stress.budget)
    if n_target > probe.population:
        raise NotReachedError(f"target {n_target} exceeds probe population "
                              f"{probe.population}", last_hc=0)
    lo = 0  # largest HC known to fall short
    hc = min(hc_init, budget)
    while probe.flips(pattern, hc) < n_target:
        if hc >= budget:
            raise NotReachedError(f"{pattern.value}: fewer than {n_target} flips within "
                                  f"{budget} activations", last_hc=hc)
        lo = hc
        hc = min(hc * growth, budget)
    while hc - lo > 1:
        mid = (lo + hc) // 2
        if probe.flips(pattern, mid) >= n_target:
            hc = mid
        else:
            lo = mid
    return hc


@dataclass(frozen=True)
class ExtractionResult:
    r_s_est: float
    r_b_est: float
    a_est: float
    t_111: float
    t_010: float
    hc_111: int
    hc_010: int
    quantization_rel_err: float
    a_rel_err_bound: float = 0.0
    cell_id: int = 0

    @property
    def has_bitline_branch(self) -> bool:
        return self.a_est > 0


def rs_from_flip_time(t_flip: float, dc: DeviceConstants, c_s: float = DEFAULT_C_S) -> float:
    """Effective resistance of a plain RC discharge reaching ``v_flip`` at ``t_flip``."""
    return t_flip / (c_s * math.log(dc.vdd / dc.v_flip))


def subthreshold_from_times(t_111: float, t_010: float, dc: DeviceConstants,
                            c_s: float = DEFAULT_C_S) -> tuple[float, float]:
    """Closed-form ``(r_eff, a)`` from the 111 and 010 flip times.

    ``a`` is clamped to 0 when the 010 pattern is not faster than 111.
    """
    r_eff = rs_from_flip_time(t_111, dc, c_s)
    if t_010 >= t_111:
        return r_eff, 0.0
    e = (dc.vdd / dc.v_flip) ** (t_010 / t_111)
    return r_eff, (dc.vdd - e * dc.v_flip) / (e - 1) / r_eff


def _a_error_bound(hc_111: int, hc_010: int, f_rd: float, a_est: float,
                   dc: DeviceConstants, c_s: float) -> float:
    """Worst relative change of ``a`` over the HC ceiling intervals ``((hc-1)/f, hc/f]``."""
    if a_est <= 0:
        return 0.0
    worst = 0.0
    for h1 in (hc_111 - 1, hc_111):
        for h0 in (hc_010 - 1, hc_010):
            if h1 <= 0 or h0 <= 0:
                return math.inf
            _, a = subthreshold_from_times(h1 / f_rd, h0 / f_rd, dc, c_s)
            worst = max(worst, abs(a / a_est - 1))
    return worst


def extract_rs_rb_disturbance(probe: DisturbanceProbe, stress: StressSpec, dc: DeviceConstants,
                              n_target: int = 1, c_s: float = DEFAULT_C_S,
                              hc_init: int = 1, cell_id: int = 0) -> ExtractionResult:
    """Two-pattern disturbance extraction of ``(R_S, A, R_B)``."""
    if not stress.mechanism.is_disturbance:
        raise WrongMechanismError("disturbance extraction needs Rowhammer or Rowpress stress")
    hc_111 = hc_at_target_flips(probe, Pattern.P111, stress, n_target, hc_init)
    hc_010 = hc_at_target_flips(probe, Pattern.P010, stress, n_target, hc_init)
    t_111 = hc_111 / stress.f_rd
    t_010 = hc_010 / stress.f_rd
    r_eff, a = subthreshold_from_times(t_111, t_010, dc, c_s)
    r_b = dc.v_th / a if a > 0 else INFINITE
    return ExtractionResult(
        r_s_est=r_eff, r_b_est=r_b, a_est=a, t_111=t_111, t_010=t_010,
        hc_111=hc_111, hc_010=hc_010,
        quantization_rel_err=max(1 / hc_111, 1 / hc_010),
        a_rel_err_bound=_a_error_bound(hc_111, hc_010, stress.f_rd, a, dc, c_s),
        cell_id=cell_id)


@dataclass(frozen=True)
class RetentionResult:
    """Retention extraction. When ``censored`` the value is a lower bound."""

    r_s: float
    t_flip: float
    t_lo: float
    censored: bool
    pattern: Pattern
    cell_id: int = 0

    @property
    def bracket_rel_width(self) -> float:
        return (self.t_flip - self.t_lo) / self.t_flip


def extract_rs_retention(probe: RetentionProbe, neighbor_pattern: Pattern,
                         schedule: Sequence[float], dc: DeviceConstants,
                         c_s: float = DEFAULT_C_S, refine_rel: float | None = 1e-3,
                         cell_id: int = 0) -> RetentionResult:
    """Earliest-failing-pause measurement of ``R_S`` (all-ones) or ``R_S(N)``.

    The resistance is evaluated at the upper end of the failing bracket,
    optionally narrowed by bisection to ``refine_rel`` relative width.
    """
    if not Pattern(neighbor_pattern).is_retention:
        raise InvalidParameterError("retention extraction needs all1 or checker neighbours")
    if not schedule:
        raise InvalidParameterError("empty retention schedule")
    lo = 0.0
    for t in schedule:
        if t <= lo:
            raise InvalidParameterError("schedule must be positive and strictly increasing")
        if probe.flipped_after(neighbor_pattern, t):
            if refine_rel:
                lo, t = refine_bracket(lambda x: probe.flipped_after(neighbor_pattern, x),
                                       lo, t, refine_rel)
            return RetentionResult(rs_from_flip_time(t, dc, c_s), t, lo, False,
                                   neighbor_pattern, cell_id)
        lo = t
    return RetentionResult(rs_from_flip_time(lo, dc, c_s), lo, lo, True,
                           neighbor_pattern, cell_id)


def retention_from_observation(obs: FlipObservation, dc: DeviceConstants,
                               c_s: float = DEFAULT_C_S) -> RetentionResult:
    """Apply the retention formula to a recorded bracket (or censoring time)."""
    if obs.mechanism is not Mechanism.RETENTION:
        raise WrongMechanismError("not a retention observation")
    if obs.flipped:
        return RetentionResult(rs_from_flip_time(obs.t_hi, dc, c_s), obs.t_hi,
                               obs.t_lo or 0.0, False, obs.pattern, obs.cell_id)
    if obs.t_lo is None:
        raise InvalidParameterError(f"cell {obs.cell_id}: censored record lacks t_lo_s")
    return RetentionResult(rs_from_flip_time(obs.t_lo, dc, c_s), obs.t_lo, obs.t_lo, True,
                           obs.pattern, obs.cell_id)


def noise_ratio(noise: float, dc: DeviceConstants) -> float:
    """Ground-truth ``R_S(N) / R_S`` for pattern noise ``noise``."""
    return math.log(dc.vdd / (dc.v_flip - noise / dc.alpha)) / math.log(dc.vdd / dc.v_flip)
