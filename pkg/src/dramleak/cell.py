"""Closed-form physics of a single 1T1C DRAM cell.

The storage node is modelled as a capacitor ``c_s`` discharging through two
paths: the p-well resistance ``r_s`` (always present) and a pattern-gated
bitline branch carrying a constant subthreshold current ``a`` whenever the
bitline is held low by the aggressors (010 / checkerboard). Under benign
patterns (111 / all-ones) the bitline branch is open.

All functions here are pure and scalar. Voltages are in volts, times in
seconds, resistances in ohms, currents in amperes.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, fields

from dramleak.errors import InvalidParameterError

#: Sentinel for an open (infinite-resistance) branch.
INFINITE = math.inf

#: Default storage capacitance, farads.
DEFAULT_C_S = 25e-15

# Largest exponent fed to math.exp before saturating.
_EXP_LIMIT = 700.0


class Pattern(str, enum.Enum):
    """Aggressor/victim data pattern (disturbance) or neighbour pattern (retention)."""

    P111 = "111"
    P010 = "010"
    ALL_ONES = "all1"
    CHECKERBOARD = "checker"

    @property
    def bitline_enabled(self) -> bool:
        return self in (Pattern.P010, Pattern.CHECKERBOARD)

    @property
    def is_retention(self) -> bool:
        return self in (Pattern.ALL_ONES, Pattern.CHECKERBOARD)


class Mechanism(str, enum.Enum):
    """Stress mechanism. ``RETENTION`` is the volatility (refresh-paused) case."""

    RETENTION = "retention"
    ROWHAMMER = "rowhammer"
    ROWPRESS = "rowpress"

    @property
    def is_disturbance(self) -> bool:
        return self is not Mechanism.RETENTION


class ReadOutcome(str, enum.Enum):
    CORRECT = "correct"
    FLIP = "flip"
    UNCERTAIN = "uncertain"


@dataclass(frozen=True)
class DeviceConstants:
    """Electrical environment shared by every cell of a device.

    Attributes
    ----------
    vdd : float
        Supply voltage, the initial storage-node level of a written '1'.
    v_flip : float
        Storage voltage at which a stored '1' is lost.
    v_sa : float
        Sense-amplifier decision margin.
    alpha : float
        Charge-sharing ratio ``C_S / (C_S + C_BL)``.
    v_th : float
        Thermal voltage kT/q.
    v_t : float
        Access-transistor threshold voltage.
    n : float
        Subthreshold swing coefficient.
    v_pp : float
        Boosted wordline voltage.
    k_couple : float
        Wordline coupling ratio ``C_C / (C_C + C_WL)``.
    k_prefactor : float
        Lumped subthreshold prefactor ``mu_n * C_d * v_th**2 * W/L`` in amperes.
    """

    vdd: float = 1.2
    v_flip: float = 0.5
    v_sa: float = 0.02
    alpha: float = 0.2
    v_th: float = 0.02585
    v_t: float = 0.5
    n: float = 1.5
    v_pp: float = 2.5
    k_couple: float = 0.05
    k_prefactor: float = 1e-6

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise InvalidParameterError(f"{f.name} must be a finite number, got {value!r}")
        if not 0 < self.v_flip < self.vdd:
            raise InvalidParameterError("require 0 < v_flip < vdd")
        if not 0 < self.alpha < 1:
            raise InvalidParameterError("require 0 < alpha < 1")
        if self.v_th <= 0:
            raise InvalidParameterError("v_th must be positive")
        if self.n < 1:
            raise InvalidParameterError("n must be >= 1")
        if not 0 <= self.k_couple <= 1:
            raise InvalidParameterError("k_couple must lie in [0, 1]")
        if self.k_prefactor <= 0:
            raise InvalidParameterError("k_prefactor must be positive")
        if self.v_sa < 0:
            raise InvalidParameterError("v_sa must be non-negative")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class CellParams:
    """Physical identity of one cell.

    ``a`` is the 010-pattern subthreshold factor; ``a == 0`` means the bitline
    branch never conducts. ``noise`` is the pattern-induced sensing noise seen
    under adverse neighbour patterns (zero or negative).
    """

    r_s: float
    a: float = 0.0
    c_s: float = DEFAULT_C_S
    noise: float = 0.0
    cell_id: int = field(default=0, compare=False)

    def __post_init__(self):
        _check_cell(self)

    def r_b(self, dc: DeviceConstants) -> float:
        """Bitline resistance ``v_th / a`` (infinite when ``a == 0``)."""
        return dc.v_th / self.a if self.a > 0 else INFINITE

    @classmethod
    def from_resistances(cls, r_s: float, r_b: float, dc: DeviceConstants,
                         c_s: float = DEFAULT_C_S, noise: float = 0.0,
                         cell_id: int = 0) -> "CellParams":
        a = 0.0 if math.isinf(r_b) else dc.v_th / r_b
        return cls(r_s=r_s, a=a, c_s=c_s, noise=noise, cell_id=cell_id)


def _check_cell(cell: CellParams) -> None:
    if not (math.isfinite(cell.r_s) and cell.r_s > 0):
        raise InvalidParameterError(f"r_s must be positive and finite, got {cell.r_s!r}")
    if not (math.isfinite(cell.c_s) and cell.c_s > 0):
        raise InvalidParameterError(f"c_s must be positive and finite, got {cell.c_s!r}")
    if not (math.isfinite(cell.a) and cell.a >= 0):
        raise InvalidParameterError(f"a must be finite and >= 0, got {cell.a!r}")
    if not math.isfinite(cell.noise):
        raise InvalidParameterError("noise must be finite")


def _check_time(t: float) -> None:
    if not math.isfinite(t) or t < 0:
        raise InvalidParameterError(f"time must be finite and >= 0, got {t!r}")


def storage_voltage(t: float, cell: CellParams, pattern: Pattern,
                    dc: DeviceConstants) -> float:
    """Storage-node voltage after ``t`` seconds without refresh.

    With the bitline branch enabled the node also sinks a constant current
    ``a``, giving ``(vdd + a*r_s) * exp(-t/tau) - a*r_s`` clamped at zero.
    """
    _check_time(t)
    _check_cell(cell)
    x = -t / (cell.r_s * cell.c_s)
    v = dc.vdd * math.exp(x)
    if not pattern.bitline_enabled or cell.a == 0:
        return v
    # same as (vdd + a r_s) e^x - a r_s, but never rounds above the 111 branch
    return max(v + cell.a * cell.r_s * math.expm1(x), 0.0)


def leakage_current_i1(t: float, cell: CellParams, dc: DeviceConstants) -> float:
    """P-well leakage current at time ``t``; discharge reported positive."""
    _check_time(t)
    _check_cell(cell)
    return dc.vdd / cell.r_s * math.exp(-t / (cell.r_s * cell.c_s))


def leakage_current_i1_count(hc: float, t_agg_on: float, cell: CellParams,
                             dc: DeviceConstants) -> float:
    """P-well leakage after ``hc`` activations of ``t_agg_on`` seconds each."""
    if not math.isfinite(hc) or hc < 0:
        raise InvalidParameterError(f"hammer count must be >= 0, got {hc!r}")
    if not math.isfinite(t_agg_on) or t_agg_on <= 0:
        raise InvalidParameterError("t_agg_on must be positive")
    return leakage_current_i1(hc * t_agg_on, cell, dc)


def bitline_swing(v_s: float, dc: DeviceConstants) -> float:
    """Charge-sharing swing; positive when a stored '1' still reads correctly."""
    if not (0 <= v_s <= dc.vdd):
        raise InvalidParameterError(f"v_s must lie in [0, vdd], got {v_s!r}")
    return dc.alpha * (v_s - dc.vdd / 2)


def readout(dv_bl: float, noise: float, dc: DeviceConstants) -> ReadOutcome:
    """Classify a sensed swing. Exact ties at ``+-v_sa`` are Uncertain."""
    signal = dv_bl + noise
    if signal > dc.v_sa:
        return ReadOutcome.CORRECT
    if signal < -dc.v_sa:
        return ReadOutcome.FLIP
    return ReadOutcome.UNCERTAIN


def victim_coupling(dc: DeviceConstants) -> float:
    """Voltage spike coupled onto the victim wordline by an aggressor ACT."""
    return dc.v_pp * dc.k_couple


def subthreshold_factor(v_b: float, dc: DeviceConstants) -> float:
    """Subthreshold factor ``A`` for a bitline held at ``v_b``."""
    exponent = (victim_coupling(dc) - v_b - dc.v_t) / (dc.n * dc.v_th)
    if exponent > _EXP_LIMIT:
        warnings.warn(f"subthreshold exponent {exponent:.1f} saturated", RuntimeWarning,
                      stacklevel=2)
        exponent = _EXP_LIMIT
    return dc.k_prefactor * math.exp(exponent)


def subthreshold_current(v_s: float, v_b: float, a: float, dc: DeviceConstants) -> float:
    """Access-transistor subthreshold current from storage node to bitline."""
    return a * -math.expm1(-(v_s - v_b) / dc.v_th)


def effective_rb(v_s: float, v_b: float, a: float, dc: DeviceConstants) -> float:
    """Bias-dependent bitline resistance; ``v_th / a`` in the zero-bias limit."""
    if a < 0:
        raise InvalidParameterError("a must be >= 0")
    if a == 0:
        return INFINITE
    x = (v_s - v_b) / dc.v_th
    if abs(x) < 1e-8:
        # series of x / (1 - e^-x) around 0
        return dc.v_th / a * (1 + x / 2)
    return (v_s - v_b) / (a * -math.expm1(-x))


def parallel(r1: float, r2: float) -> float:
    """Parallel combination; an infinite branch drops out."""
    if math.isinf(r1):
        return r2
    if math.isinf(r2):
        return r1
    return r1 / (1.0 + r1 / r2)


def time_constant(cell: CellParams, pattern: Pattern, dc: DeviceConstants) -> float:
    """``c_s * (r_s || r_b)`` with the bitline branch gated by ``pattern``."""
    _check_cell(cell)
    r_b = cell.r_b(dc) if pattern.bitline_enabled else INFINITE
    return cell.c_s * parallel(cell.r_s, r_b)
