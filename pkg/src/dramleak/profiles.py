"""Synthetic device populations calibrated to measured resistance ranges.

Each DIMM has three profiles: volatility (retention), Rowhammer and
Rowpress. A profile only records min/max bounds of the vulnerable-cell
population; :func:`sample_population` fills the ranges with seeded draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from dramleak.cell import DEFAULT_C_S, CellParams, DeviceConstants, Mechanism
from dramleak.errors import InvalidParameterError

Range = tuple[float, float]

DIMM_IDS = ("D1", "D2", "D3", "D4", "D5", "D6", "D7")

DIMM_METADATA = {
    "D1": {"vendor": "Micron", "type": "DDR4", "density": "16GB", "organization": "1Rx4",
           "speed": 2400, "year": 2021},
    "D2": {"vendor": "Micron", "type": "DDR4", "density": "16GB", "organization": "1Rx4",
           "speed": 2400, "year": 2021},
    "D3": {"vendor": "Micron", "type": "DDR4", "density": "16GB", "organization": "1Rx4",
           "speed": 2400, "year": 2021},
    "D4": {"vendor": "Lenovo", "type": "DDR4", "density": "8GB", "organization": "1Rx4",
           "speed": 2666, "year": 2018},
    "D5": {"vendor": "Lenovo", "type": "DDR4", "density": "8GB", "organization": "1Rx4",
           "speed": 2666, "year": 2018},
    "D6": {"vendor": "Innodisk", "type": "DDR4", "density": "8GB", "organization": "1Rx4",
           "speed": 2400, "year": 2019},
    "D7": {"vendor": "ADATA", "type": "DDR4", "density": "4GB", "organization": "1Rx4",
           "speed": 2400, "year": 2018},
}

# Measured ranges in the published column units:
# volatility R_S, R_S(N) in 1e13 ohm; disturbance R_S in 1e10 ohm, R_B in 1e8 ohm.
_TABLE = {
    #      vol R_S          vol R_S(N)       RH R_S           RH R_B          RP R_S             RP R_B
    "D1": ((10.6, 5530), (9.01, 5244), (4.78, 305), (57.9, 909), (36.1, 1050), (38.5, 362)),
    "D2": ((9.2, 4988), (7.7, 4620), (5.31, 306), (37.2, 905), (25.5, 2125), (25.7, 584)),
    "D3": ((13.2, 6720), (11.4, 5420), (5.31, 240), (76.7, 829), (55.3, 1830), (44.4, 258)),
    "D4": ((8.50, 8960), (7.2, 6980), (4.54, 31880), (29.5, 6470), (102, 638000), (24.3, 1170)),
    "D5": ((6.5, 7350), (5.5, 6321), (5.21, 46300), (36.2, 8410), (512, 826000), (15.6, 2230)),
    "D6": ((14.4, 5620), (10.8, 4770), (8.77, 442), (44.3, 486), (25.5, 1620), (9.45, 312)),
    "D7": ((15.6, 6820), (13.2, 5183), (4.31, 85.0), (37.8, 643), (31.9, 424), (26.7, 393)),
}
_VOL_UNIT = 1e13
_RS_UNIT = 1e10
_RB_UNIT = 1e8


def _scaled(r: Range, unit: float) -> Range:
    return (r[0] * unit, r[1] * unit)


@dataclass(frozen=True)
class DeviceProfile:
    dimm_id: str
    mechanism: Mechanism
    r_s_range: Range
    r_b_range: Range | None = None
    r_s_noise_range: Range | None = None
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "mechanism", Mechanism(self.mechanism))
        for name in ("r_s_range", "r_b_range", "r_s_noise_range"):
            r = getattr(self, name)
            if r is None:
                continue
            lo, hi = r
            if not (0 < lo <= hi and math.isfinite(hi)):
                raise InvalidParameterError(f"{self.dimm_id}: {name} must satisfy 0 < lo <= hi")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if self.mechanism is Mechanism.RETENTION:
            if self.r_b_range is not None:
                raise InvalidParameterError("volatility profiles carry no R_B range")
        elif self.r_b_range is None:
            raise InvalidParameterError("disturbance profiles need an R_B range")

    @property
    def key(self) -> str:
        return f"{self.dimm_id}-{self.mechanism.value}"


def builtin_profiles() -> list[DeviceProfile]:
    """All 21 DIMM x mechanism profiles, in DIMM order then retention/RH/RP."""
    out = []
    for dimm in DIMM_IDS:
        vol_rs, vol_rsn, rh_rs, rh_rb, rp_rs, rp_rb = _TABLE[dimm]
        meta = dict(DIMM_METADATA[dimm])
        out.append(DeviceProfile(dimm, Mechanism.RETENTION, _scaled(vol_rs, _VOL_UNIT),
                                 r_s_noise_range=_scaled(vol_rsn, _VOL_UNIT), metadata=meta))
        out.append(DeviceProfile(dimm, Mechanism.ROWHAMMER, _scaled(rh_rs, _RS_UNIT),
                                 _scaled(rh_rb, _RB_UNIT), metadata=meta))
        out.append(DeviceProfile(dimm, Mechanism.ROWPRESS, _scaled(rp_rs, _RS_UNIT),
                                 _scaled(rp_rb, _RB_UNIT), metadata=meta))
    return out


def get_profile(dimm_id: str, mechanism: Mechanism | str) -> DeviceProfile:
    mechanism = Mechanism(mechanism)
    for p in builtin_profiles():
        if p.dimm_id == dimm_id and p.mechanism is mechanism:
            return p
    raise KeyError(f"no builtin profile {dimm_id}/{mechanism.value}")


def noise_for_ratio(ratio: float, dc: DeviceConstants) -> float:
    """Pattern noise that scales the measured retention resistance by ``ratio``.

    Inverts ``R_S(N)/R_S = ln(vdd/(v_flip - N/alpha)) / ln(vdd/v_flip)``.
    """
    if not 0 < ratio:
        raise InvalidParameterError("ratio must be positive")
    v_eff = dc.vdd ** (1 - ratio) * dc.v_flip ** ratio
    return dc.alpha * (dc.v_flip - v_eff)


def noise_range(profile: DeviceProfile, dc: DeviceConstants) -> Range:
    """Noise interval implied by the ratio of the R_S(N) and R_S range endpoints."""
    if profile.r_s_noise_range is None:
        return (0.0, 0.0)
    n_lo = noise_for_ratio(profile.r_s_noise_range[0] / profile.r_s_range[0], dc)
    n_hi = noise_for_ratio(profile.r_s_noise_range[1] / profile.r_s_range[1], dc)
    return (min(n_lo, n_hi, 0.0), min(max(n_lo, n_hi), 0.0))


@dataclass
class SampledPopulation:
    profile: DeviceProfile
    seed: int
    cells: list[CellParams]

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def r_s(self) -> np.ndarray:
        return np.array([c.r_s for c in self.cells], dtype=float)

    @property
    def a(self) -> np.ndarray:
        return np.array([c.a for c in self.cells], dtype=float)

    @property
    def noise(self) -> np.ndarray:
        return np.array([c.noise for c in self.cells], dtype=float)

    def r_b(self, dc: DeviceConstants) -> np.ndarray:
        a = self.a
        with np.errstate(divide="ignore"):
            return np.where(a > 0, dc.v_th / a, np.inf)


def _log_draw(u: np.ndarray, r: Range) -> np.ndarray:
    lo, hi = math.log(r[0]), math.log(r[1])
    return np.clip(np.exp(lo + u * (hi - lo)), r[0], r[1])


def _uniforms(rng: np.random.Generator, n: int, distribution: str,
              rank_corr: float) -> tuple[np.ndarray, np.ndarray]:
    """Two columns of [0,1] scores for (R_S, R_B), optionally rank-correlated."""
    if distribution == "loguniform" and rank_corr == 0:
        return rng.random(n), rng.random(n)
    # Gaussian copula; Spearman rho -> Pearson r
    r = 2 * math.sin(math.pi * rank_corr / 6)
    z1 = rng.standard_normal(n)
    z2 = r * z1 + math.sqrt(max(1 - r * r, 0.0)) * rng.standard_normal(n)
    if distribution == "loguniform":
        return ndtr(z1), ndtr(z2)
    # clipped log-normal: +-3 sigma spans the range
    return np.clip(0.5 + z1 / 6, 0, 1), np.clip(0.5 + z2 / 6, 0, 1)


def sample_population(profile: DeviceProfile, n: int, seed: int,
                      dc: DeviceConstants | None = None, c_s: float = DEFAULT_C_S,
                      distribution: str = "loguniform", rank_corr: float = 0.0,
                      noise: Range | None = None) -> SampledPopulation:
    """Seeded draws of ``n`` cells inside the profile's ranges.

    R_S and R_B are drawn log-uniformly and independently by default. Retention
    cells get a pattern noise drawn uniformly from ``noise`` (by default the
    interval calibrated by :func:`noise_range`); disturbance cells get none.
    """
    if n < 0:
        raise InvalidParameterError("n must be >= 0")
    if distribution not in ("loguniform", "lognormal"):
        raise InvalidParameterError(f"unknown distribution {distribution!r}")
    if not -1 <= rank_corr <= 1:
        raise InvalidParameterError("rank_corr must lie in [-1, 1]")
    dc = dc or DeviceConstants()
    rng = np.random.default_rng(seed)
    u_s, u_b = _uniforms(rng, n, distribution, rank_corr)
    r_s = _log_draw(u_s, profile.r_s_range)
    if profile.r_b_range is not None:
        a = dc.v_th / _log_draw(u_b, profile.r_b_range)
        noise_vals = np.zeros(n)
    else:
        a = np.zeros(n)
        lo, hi = noise if noise is not None else noise_range(profile, dc)
        noise_vals = lo + rng.random(n) * (hi - lo)
    cells = [CellParams(r_s=float(r_s[i]), a=float(a[i]), c_s=c_s, noise=float(noise_vals[i]),
                        cell_id=i) for i in range(n)]
    return SampledPopulation(profile, seed, cells)


def profile_seed(seed: int, profile: DeviceProfile) -> int:
    """Independent per-profile seed derived from a run seed."""
    dimm_idx = DIMM_IDS.index(profile.dimm_id) if profile.dimm_id in DIMM_IDS else len(DIMM_IDS)
    mech_idx = list(Mechanism).index(profile.mechanism)
    ss = np.random.SeedSequence(seed, spawn_key=(dimm_idx, mech_idx))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
