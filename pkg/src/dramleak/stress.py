"""Flip generation under retention, Rowhammer and Rowpress stress.

Disturbance stress maps hammer counts to elapsed stress time through the
effective disturbance rate, ``T = HC / f_rd``; a cell flips at the first
integer HC whose stress time reaches its closed-form flip time.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from dramleak.cell import (
    CellParams,
    DeviceConstants,
    Mechanism,
    Pattern,
    _check_cell,
)
from dramleak.errors import InvalidParameterError, WrongMechanismError

# DDR4 timings used on the test platform, seconds.
T_RCD = 13.5e-9
T_RP = 13.5e-9
T_RAS = 35e-9
T_AGG_ON = 1000e-9

HC_BUDGET_ROWHAMMER = 15_000_000
HC_BUDGET_ROWPRESS = 1_500_000
RETENTION_MAX_S = 3600.0

MAX_ODE_STEPS = 10**8


def rowhammer_rate(t_ras: float = T_RAS, t_rp: float = T_RP) -> float:
    """One activation per ACT/PRE cycle."""
    return 1.0 / (t_ras + t_rp)


def rowpress_rate(t_agg_on: float = T_AGG_ON, t_rp: float = T_RP) -> float:
    return 1.0 / (t_agg_on + t_rp)


@dataclass(frozen=True)
class StressSpec:
    """One stress configuration.

    ``budget`` is in seconds for retention and in hammer counts otherwise.
    """

    mechanism: Mechanism
    pattern: Pattern
    budget: float
    f_rd: float | None = None
    t_agg_on: float | None = None

    def __post_init__(self):
        mech = Mechanism(self.mechanism)
        pat = Pattern(self.pattern)
        object.__setattr__(self, "mechanism", mech)
        object.__setattr__(self, "pattern", pat)
        if not (self.budget > 0):
            raise InvalidParameterError("budget must be positive")
        if mech.is_disturbance:
            if pat.is_retention:
                raise InvalidParameterError(f"pattern {pat.value} is a retention pattern")
            if self.f_rd is None or not self.f_rd > 0:
                raise InvalidParameterError("f_rd must be positive for disturbance stress")
            if mech is Mechanism.ROWPRESS and not (self.t_agg_on and self.t_agg_on > 0):
                raise InvalidParameterError("t_agg_on must be positive for Rowpress")
        elif not pat.is_retention:
            raise InvalidParameterError(f"pattern {pat.value} is not a retention pattern")

    @classmethod
    def rowhammer(cls, pattern: Pattern, budget: float = HC_BUDGET_ROWHAMMER,
                  f_rd: float | None = None) -> "StressSpec":
        return cls(Mechanism.ROWHAMMER, pattern, budget, f_rd or rowhammer_rate())

    @classmethod
    def rowpress(cls, pattern: Pattern, budget: float = HC_BUDGET_ROWPRESS,
                 t_agg_on: float = T_AGG_ON, f_rd: float | None = None) -> "StressSpec":
        return cls(Mechanism.ROWPRESS, pattern, budget, f_rd or rowpress_rate(t_agg_on),
                   t_agg_on)

    @classmethod
    def retention(cls, pattern: Pattern = Pattern.ALL_ONES,
                  budget: float = RETENTION_MAX_S) -> "StressSpec":
        return cls(Mechanism.RETENTION, pattern, budget)

    @classmethod
    def default(cls, mechanism: Mechanism, pattern: Pattern) -> "StressSpec":
        mechanism = Mechanism(mechanism)
        if mechanism is Mechanism.ROWHAMMER:
            return cls.rowhammer(pattern)
        if mechanism is Mechanism.ROWPRESS:
            return cls.rowpress(pattern)
        return cls.retention(pattern)

    def with_pattern(self, pattern: Pattern) -> "StressSpec":
        return StressSpec(self.mechanism, pattern, self.budget, self.f_rd, self.t_agg_on)


@dataclass(frozen=True)
class FlipObservation:
    """Outcome of stressing one cell under one pattern.

    Disturbance records carry ``flip_hc``; retention records carry the
    bracket ``(t_lo, t_hi]`` of the earliest failing read. Unflipped records
    carry neither (retention ones may keep ``t_lo`` as the censoring time).
    """

    cell_id: int
    mechanism: Mechanism
    pattern: Pattern
    flipped: bool
    flip_hc: int | None = None
    t_lo: float | None = None
    t_hi: float | None = None
    dimm: str = ""

    def __post_init__(self):
        object.__setattr__(self, "mechanism", Mechanism(self.mechanism))
        object.__setattr__(self, "pattern", Pattern(self.pattern))
        has_result = self.flip_hc is not None or self.t_hi is not None
        if self.flipped != has_result:
            raise InvalidParameterError(
                f"cell {self.cell_id}: flipped={self.flipped} inconsistent with recorded result")
        if self.t_hi is not None and self.t_lo is not None and not self.t_lo < self.t_hi:
            raise InvalidParameterError(f"cell {self.cell_id}: bracket lower must be < upper")


@dataclass
class FlipMap:
    rows: int
    cols: int
    observations: list[FlipObservation] = field(default_factory=list)

    def flip_fraction(self) -> float:
        if not self.observations:
            return 0.0
        return sum(o.flipped for o in self.observations) / len(self.observations)

    def grid(self, pattern: Pattern) -> np.ndarray:
        """Boolean ``rows x cols`` map of flipped cells for one pattern."""
        out = np.zeros((self.rows, self.cols), dtype=bool)
        for o in self.observations:
            if o.pattern == pattern and o.flipped:
                out[divmod(o.cell_id, self.cols)] = True
        return out


def effective_flip_threshold(cell: CellParams, pattern: Pattern, dc: DeviceConstants) -> float:
    """Storage voltage at which a read fails, shifted by pattern noise."""
    noise = cell.noise if pattern.bitline_enabled else 0.0
    return dc.v_flip - noise / dc.alpha


def flip_time(cell: CellParams, pattern: Pattern, dc: DeviceConstants) -> float | None:
    """Earliest time at which the storage voltage reaches the flip threshold.

    Returns ``None`` when the threshold is at or below zero volts, which a
    discharging node never crosses.
    """
    _check_cell(cell)
    v_eff = effective_flip_threshold(cell, pattern, dc)
    if v_eff >= dc.vdd:
        warnings.warn(f"cell {cell.cell_id}: flip threshold {v_eff:.4g} V >= vdd, "
                      "flips immediately", RuntimeWarning, stacklevel=2)
        return 0.0
    if v_eff <= 0:
        return None
    offset = cell.a * cell.r_s if pattern.bitline_enabled else 0.0
    # log1p keeps precision when offset >> vdd. np.log1p rather than math.log1p
    # so scalar and vectorised results agree bit for bit.
    return float(cell.r_s * cell.c_s * np.log1p((dc.vdd - v_eff) / (v_eff + offset)))


def flip_times(r_s: np.ndarray, a: np.ndarray, c_s: np.ndarray | float,
               noise: np.ndarray | float, pattern: Pattern,
               dc: DeviceConstants) -> np.ndarray:
    """Vectorised :func:`flip_time`; ``inf`` where the cell never flips, 0 for degenerate."""
    r_s = np.asarray(r_s, dtype=float)
    a = np.broadcast_to(np.asarray(a, dtype=float), r_s.shape)
    noise = np.broadcast_to(np.asarray(noise, dtype=float), r_s.shape)
    tau = r_s * np.asarray(c_s, dtype=float)
    v_eff = dc.v_flip - (noise / dc.alpha if pattern.bitline_enabled else 0.0)
    v_eff = np.broadcast_to(v_eff, r_s.shape)
    offset = a * r_s if pattern.bitline_enabled else np.zeros_like(r_s)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = tau * np.log1p((dc.vdd - v_eff) / (v_eff + offset))
    t = np.where(v_eff >= dc.vdd, 0.0, t)
    return np.where(v_eff <= 0, np.inf, t)


def _require_disturbance(stress: StressSpec) -> None:
    if not stress.mechanism.is_disturbance:
        raise WrongMechanismError(f"{stress.mechanism.value} stress has no hammer count")


def hc_for_time(t: float, f_rd: float) -> int:
    """Smallest integer hammer count whose stress time ``HC / f_rd`` reaches ``t``."""
    return math.ceil(t * f_rd)


def find_flip_hc(cell: CellParams, stress: StressSpec, dc: DeviceConstants) -> int | None:
    """Hammer count at which ``cell`` first flips, or ``None`` beyond the budget."""
    _require_disturbance(stress)
    t = flip_time(cell, stress.pattern, dc)
    if t is None:
        return None
    hc = hc_for_time(t, stress.f_rd)
    return hc if hc <= stress.budget else None


def simulate_disturbance(cell: CellParams, stress: StressSpec, hc: int,
                         dc: DeviceConstants) -> bool:
    """Whether ``cell`` has flipped after ``hc`` activations."""
    _require_disturbance(stress)
    if hc < 0:
        raise InvalidParameterError("hammer count must be >= 0")
    t = flip_time(cell, stress.pattern, dc)
    return t is not None and hc >= hc_for_time(t, stress.f_rd)


def default_retention_schedule(t0: float = 0.25, t_max: float = RETENTION_MAX_S) -> list[float]:
    """Geometric refresh-pause schedule ``t0 * 2**i``, closed with ``t_max``."""
    if t0 <= 0 or t_max < t0:
        raise InvalidParameterError("need 0 < t0 <= t_max")
    out = []
    t = t0
    while t < t_max:
        out.append(t)
        t *= 2
    out.append(t_max)
    return out


def _check_schedule(schedule: Sequence[float]) -> None:
    if len(schedule) == 0:
        raise InvalidParameterError("empty retention schedule")
    prev = 0.0
    for t in schedule:
        if not math.isfinite(t) or t <= prev:
            raise InvalidParameterError("schedule must be positive and strictly increasing")
        prev = t


def flipped_after(cell: CellParams, pattern: Pattern, t: float, dc: DeviceConstants) -> bool:
    """Read after pausing refresh for ``t`` seconds; True if the '1' was lost."""
    tf = flip_time(cell, pattern, dc)
    return tf is not None and t >= tf


def simulate_retention(cell: CellParams, schedule: Sequence[float], dc: DeviceConstants,
                       pattern: Pattern = Pattern.ALL_ONES) -> FlipObservation:
    """Walk the pause schedule and report the bracket of the first failing read."""
    _check_schedule(schedule)
    lo = 0.0
    for t in schedule:
        if flipped_after(cell, pattern, t, dc):
            return FlipObservation(cell.cell_id, Mechanism.RETENTION, pattern, True,
                                   t_lo=lo, t_hi=t)
        lo = t
    return FlipObservation(cell.cell_id, Mechanism.RETENTION, pattern, False, t_lo=lo)


def refine_bracket(flipped, lo: float, hi: float, rel_width: float = 1e-3) -> tuple[float, float]:
    """Bisect ``(lo, hi]`` until ``hi - lo <= rel_width * hi``.

    ``flipped(t)`` must be False at ``lo`` (or ``lo == 0``) and True at ``hi``.
    """
    while hi - lo > rel_width * hi:
        mid = 0.5 * (lo + hi)
        if flipped(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


def integrate_ode(cell: CellParams, pattern: Pattern, t_end: float, dt: float,
                  dc: DeviceConstants) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step RK4 trace of the storage-node voltage.

    Integrates ``dV/dt = -V/(r_s c_s) - [bitline] a/c_s`` from ``V(0) = vdd``;
    the node is held at zero once fully discharged. Returns ``(times, volts)``.
    """
    _check_cell(cell)
    if not (dt > 0) or not math.isfinite(dt):
        raise InvalidParameterError("dt must be positive")
    t, v = integrate_ode_batch(np.array([cell.r_s]), np.array([cell.a]), np.array([cell.c_s]),
                               pattern.bitline_enabled, np.array([t_end]), t_end / dt, dc.vdd)
    return t[:, 0], v[:, 0]


def integrate_ode_batch(r_s: np.ndarray, a: np.ndarray, c_s: np.ndarray, bitline: bool,
                        t_end: np.ndarray, n_steps: float,
                        vdd: float) -> tuple[np.ndarray, np.ndarray]:
    """RK4 for many cells at once, each with its own horizon and ``n_steps`` steps.

    Returns ``(times, volts)`` arrays of shape ``(steps + 1, cells)``.
    """
    t_end = np.asarray(t_end, dtype=float)
    if np.any(t_end < 0) or not np.all(np.isfinite(t_end)):
        raise InvalidParameterError("t_end must be finite and >= 0")
    steps = math.ceil(n_steps - 1e-9) if n_steps > 0 else 0
    if steps > MAX_ODE_STEPS:
        raise InvalidParameterError(f"{steps} steps exceeds the {MAX_ODE_STEPS} step guard")
    h = t_end / steps if steps else np.zeros_like(t_end)
    inv_tau = 1.0 / (np.asarray(r_s, dtype=float) * c_s)
    sink = np.asarray(a, dtype=float) / c_s if bitline else np.zeros_like(inv_tau)

    def rhs(v):
        return -v * inv_tau - sink

    volts = np.empty((steps + 1, t_end.size))
    v = np.full(t_end.size, float(vdd))
    volts[0] = v
    for i in range(1, steps + 1):
        k1 = rhs(v)
        k2 = rhs(v + 0.5 * h * k1)
        k3 = rhs(v + 0.5 * h * k2)
        k4 = rhs(v + h * k3)
        v = np.maximum(v + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), 0.0)
        volts[i] = v
    times = np.arange(steps + 1)[:, None] * h[None, :]
    return times, volts


def simulate_array(profile, stress: StressSpec, seed: int, dc: DeviceConstants,
                   n: int, cols: int = 64, schedule: Sequence[float] | None = None,
                   refine_rel: float | None = 1e-3, c_s: float | None = None) -> FlipMap:
    """Sample ``n`` cells from ``profile`` and stress every one of them.

    Cells are laid out row-major on a ``cols``-wide grid; the result is a
    pure function of the arguments.
    """
    from dramleak.profiles import sample_population

    if Mechanism(profile.mechanism) is not stress.mechanism:
        raise WrongMechanismError(
            f"profile {profile.dimm_id} is {profile.mechanism.value}, "
            f"stress is {stress.mechanism.value}")
    kwargs = {} if c_s is None else {"c_s": c_s}
    pop = sample_population(profile, n, seed, dc=dc, **kwargs)
    rows = math.ceil(n / cols) if n else 0
    return FlipMap(rows, cols, stress_cells(pop.cells, stress, dc, dimm=profile.dimm_id,
                                            schedule=schedule, refine_rel=refine_rel))


def stress_cells(cells: Sequence[CellParams], stress: StressSpec, dc: DeviceConstants,
                 dimm: str = "", schedule: Sequence[float] | None = None,
                 refine_rel: float | None = 1e-3) -> list[FlipObservation]:
    """One observation per cell, in input order."""
    out = []
    if stress.mechanism.is_disturbance:
        for cell in cells:
            hc = find_flip_hc(cell, stress, dc)
            out.append(FlipObservation(cell.cell_id, stress.mechanism, stress.pattern,
                                       hc is not None, flip_hc=hc, dimm=dimm))
        return out
    if schedule is None:
        schedule = default_retention_schedule(t_max=stress.budget)
    for cell in cells:
        obs = simulate_retention(cell, schedule, dc, stress.pattern)
        if obs.flipped and refine_rel:
            lo, hi = refine_bracket(lambda t: flipped_after(cell, stress.pattern, t, dc),
                                    obs.t_lo, obs.t_hi, refine_rel)
            obs = FlipObservation(cell.cell_id, obs.mechanism, obs.pattern, True,
                                  t_lo=lo, t_hi=hi)
        out.append(FlipObservation(obs.cell_id, obs.mechanism, obs.pattern, obs.flipped,
                                   t_lo=obs.t_lo, t_hi=obs.t_hi, dimm=dimm))
    return out
