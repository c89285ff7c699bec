"""Attack-quality metrics over (R_S, R_B) populations.

Conductances are in siemens. Throughout, the 111 pattern has no bitline
branch (``G_111 = 1/R_S``) and the 010 pattern adds ``1/R_B``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from dramleak.cell import INFINITE, CellParams, DeviceConstants, Pattern, time_constant
from dramleak.errors import InvalidParameterError
from dramleak.stress import StressSpec, flip_times


def total_conductance(r_s: float, r_b: float = INFINITE) -> float:
    if not r_s > 0:
        raise InvalidParameterError("r_s must be positive")
    return 1.0 / r_s + (0.0 if math.isinf(r_b) else 1.0 / r_b)


@dataclass(frozen=True)
class CellScore:
    cell_id: int
    r_s: float
    r_b: float
    g_111: float
    g_010: float
    delta_g: float
    delta_g_rel: float
    tau_111: float
    tau_010: float

    @property
    def g_tot(self) -> float:
        """Total conductance with the bitline branch enabled."""
        return self.g_010

    def as_row(self) -> dict:
        return asdict(self)


def pattern_scores(cell: CellParams, dc: DeviceConstants) -> CellScore:
    r_b = cell.r_b(dc)
    inv_rb = 0.0 if math.isinf(r_b) else 1.0 / r_b
    return CellScore(
        cell_id=cell.cell_id, r_s=cell.r_s, r_b=r_b,
        g_111=total_conductance(cell.r_s),
        g_010=total_conductance(cell.r_s, r_b),
        delta_g=inv_rb,
        delta_g_rel=0.0 if math.isinf(r_b) else cell.r_s / r_b,
        tau_111=time_constant(cell, Pattern.P111, dc),
        tau_010=time_constant(cell, Pattern.P010, dc),
    )


@dataclass(frozen=True)
class Window:
    """Open stress window ``(lo, hi)`` on the time-constant axis."""

    lo: float
    hi: float
    delta_r: float | None = None

    @property
    def delta_tau(self) -> float:
        return self.hi - self.lo


def selective_window(target: CellParams, bystander: CellParams,
                     dc: DeviceConstants) -> Window | None:
    """Stress window flipping ``target`` under 010 while ``bystander`` holds under 111."""
    tau_t = time_constant(target, Pattern.P010, dc)
    tau_b = time_constant(bystander, Pattern.P111, dc)
    if not tau_t < tau_b:
        return None
    return Window(tau_t, tau_b, delta_r=bystander.r_s - target.r_b(dc))


def inference_window(cell: CellParams, dc: DeviceConstants) -> Window | None:
    """Separable window for inferring the aggressor bit from one victim."""
    tau_010 = time_constant(cell, Pattern.P010, dc)
    tau_111 = time_constant(cell, Pattern.P111, dc)
    if not tau_010 < tau_111:
        return None
    return Window(tau_010, tau_111, delta_r=cell.r_s - cell.r_b(dc))


def inference_accuracy_theta(population: Sequence[CellScore], theta: float) -> float:
    """Equal-prior accuracy of "flip => 0" when cells with ``G >= theta`` flip."""
    if len(population) == 0:
        raise InvalidParameterError("empty population")
    g010 = np.array([s.g_010 for s in population])
    g111 = np.array([s.g_111 for s in population])
    p010 = np.count_nonzero(g010 >= theta) / len(population)
    p111 = np.count_nonzero(g111 >= theta) / len(population)
    return 0.5 * (p010 + (1.0 - p111))


def theta_for_hc(hc: float, f_rd: float, dc: DeviceConstants, c_s: float) -> float:
    """Conductance threshold matching a hammer budget (plain RC convention)."""
    return c_s * math.log(dc.vdd / dc.v_flip) / (hc / f_rd)


def _g010(cells: Sequence[CellParams], dc: DeviceConstants) -> np.ndarray:
    r_s = np.array([c.r_s for c in cells], dtype=float)
    a = np.array([c.a for c in cells], dtype=float)
    return 1.0 / r_s + a / dc.v_th


def rank_vulnerable(population: Sequence[CellParams], m: int, dc: DeviceConstants) -> list[int]:
    """Ids of the ``m`` cells with the largest 010 conductance (ties: lower id first)."""
    if not 0 <= m <= len(population):
        raise InvalidParameterError("m must lie in [0, population size]")
    if m == 0:
        return []
    g = _g010(population, dc)
    ids = np.array([c.cell_id for c in population])
    order = np.lexsort((ids, -g))
    return [int(i) for i in ids[order[:m]]]


@dataclass
class AttackReport:
    m_010: int
    m_111: int
    hc_budget: int | None
    acc: float | None
    feasible: bool
    m_requested: int
    selected: list[int] = field(default_factory=list)
    scores: list[CellScore] = field(default_factory=list)
    medians: dict = field(default_factory=dict)
    inference_windows: int = 0

    def summary(self) -> dict:
        return {"m_requested": self.m_requested, "m_010": self.m_010, "m_111": self.m_111,
                "hc_budget": self.hc_budget, "acc": self.acc, "feasible": self.feasible,
                "inference_windows": self.inference_windows, "medians": self.medians}


def accuracy(m_111: int, m_010: int) -> float:
    if m_010 <= 0:
        raise InvalidParameterError("m_010 must be positive")
    return 1.0 - 0.5 * m_111 / m_010


def population_medians(scores: Sequence[CellScore]) -> dict:
    if not scores:
        return {}
    cols = {
        "r_s": [s.r_s for s in scores],
        "r_b": [s.r_b for s in scores],
        "g_111": [s.g_111 for s in scores],
        "g_010": [s.g_010 for s in scores],
        "delta_g": [s.delta_g for s in scores],
        "delta_g_rel": [s.delta_g_rel for s in scores],
        "tau_111": [s.tau_111 for s in scores],
        "tau_010": [s.tau_010 for s in scores],
    }
    return {k: float(np.median(np.asarray(v, dtype=float))) for k, v in cols.items()}


def confidentiality_budget(population: Sequence[CellParams], stress: StressSpec, m_010: int,
                           dc: DeviceConstants) -> AttackReport:
    """Pattern-inference accuracy for the ``m_010`` most 010-vulnerable cells.

    The hammer budget is the smallest one flipping every selected cell under
    010; ``m_111`` counts the selected cells that also flip under 111 at that
    budget. When some selected cells cannot flip within the stress budget the
    report is marked infeasible and scored over the cells that do.
    """
    if not stress.mechanism.is_disturbance:
        raise InvalidParameterError("confidentiality analysis needs disturbance stress")
    if not 0 < m_010 <= len(population):
        raise InvalidParameterError("m_010 must lie in [1, population size]")
    by_id = {c.cell_id: c for c in population}
    selected = rank_vulnerable(population, m_010, dc)
    cells = [by_id[i] for i in selected]
    r_s = np.array([c.r_s for c in cells])
    a = np.array([c.a for c in cells])
    c_s = np.array([c.c_s for c in cells])
    noise = np.array([c.noise for c in cells])
    with np.errstate(over="ignore"):
        hc_010 = np.ceil(flip_times(r_s, a, c_s, noise, Pattern.P010, dc) * stress.f_rd)
        hc_111 = np.ceil(flip_times(r_s, a, c_s, noise, Pattern.P111, dc) * stress.f_rd)
    within = hc_010 <= stress.budget
    feasible = bool(within.all())
    scores = [pattern_scores(c, dc) for c in cells]
    report = AttackReport(m_010=int(within.sum()), m_111=0, hc_budget=None, acc=None,
                          feasible=feasible, m_requested=m_010, selected=selected,
                          scores=scores, medians=population_medians(scores),
                          inference_windows=sum(s.tau_010 < s.tau_111 for s in scores))
    if report.m_010 == 0:
        return report
    budget = int(hc_010[within].max())
    report.hc_budget = budget
    report.m_111 = int(np.count_nonzero(hc_111[within] <= budget))
    report.acc = accuracy(report.m_111, report.m_010)
    return report
