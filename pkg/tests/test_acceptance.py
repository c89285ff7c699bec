"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the collected lines are
printed in the "acceptance criteria" terminal section.
"""

import math
import shutil
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from acceptance_log import record
from dramleak.attack import (
    confidentiality_budget,
    inference_accuracy_theta,
    pattern_scores,
    rank_vulnerable,
    selective_window,
)
from dramleak.cell import (
    CellParams,
    DeviceConstants,
    Mechanism,
    Pattern,
    storage_voltage,
    time_constant,
)
from dramleak.cli import main
from dramleak.extraction import (
    SimulationProbe,
    extract_rs_rb_disturbance,
    extract_rs_retention,
    noise_ratio,
    rs_from_flip_time,
)
from dramleak.observations import observations_to_csv, parse_observations
from dramleak.profiles import (
    DIMM_IDS,
    builtin_profiles,
    get_profile,
    profile_seed,
    sample_population,
)
from dramleak.stress import (
    FlipObservation,
    StressSpec,
    default_retention_schedule,
    flip_time,
    integrate_ode,
)
from oracles import brute_accuracy

pytestmark = pytest.mark.acceptance

DC = DeviceConstants()
C_S = 25e-15
N_CELLS = 1000
# Round-trip budget: large enough that every planted cell flips under 111, so
# the check measures the inversion rather than the default 15M/1.5M censoring.
ROUND_TRIP_BUDGET = 10**12
DISTURBANCE = [p for p in builtin_profiles() if p.mechanism.is_disturbance]
RETENTION = [p for p in builtin_profiles() if p.mechanism is Mechanism.RETENTION]


# -- criterion 1 ------------------------------------------------------------

@pytest.fixture(scope="module")
def round_trip():
    start = time.perf_counter()
    dist = []
    for prof in DISTURBANCE:
        pop = sample_population(prof, N_CELLS, profile_seed(1, prof), DC)
        base = StressSpec.default(prof.mechanism, Pattern.P111)
        stress = StressSpec(prof.mechanism, Pattern.P111, ROUND_TRIP_BUDGET, base.f_rd,
                            base.t_agg_on)
        for cell in pop.cells:
            res = extract_rs_rb_disturbance(SimulationProbe(cell, DC, stress.f_rd), stress, DC)
            dist.append((prof.key, cell, res))
    ret = []
    schedule = default_retention_schedule()
    for prof in RETENTION:
        pop = sample_population(prof, N_CELLS, profile_seed(1, prof), DC)
        for cell in pop.cells:
            probe = SimulationProbe(cell, DC)
            r1 = extract_rs_retention(probe, Pattern.ALL_ONES, schedule, DC)
            rn = extract_rs_retention(probe, Pattern.CHECKERBOARD, schedule, DC)
            ret.append((prof.key, cell, r1, rn))
    return dist, ret, time.perf_counter() - start


def _rel(est, true):
    return abs(est / true - 1)


def test_c1_disturbance_rs_round_trip(round_trip):
    dist, _, _ = round_trip
    bad = [k for k, c, r in dist if _rel(r.r_s_est, c.r_s) > 2 * r.quantization_rel_err]
    worst = max(_rel(r.r_s_est, c.r_s) / r.quantization_rel_err for _, c, r in dist)
    assert record("C1 disturbance R_S within 2x HC quantization",
                  not bad, f"{len(dist) - len(bad)}/{len(dist)} cells, "
                  f"worst err/quant = {worst:.3f}")


def test_c1_disturbance_a_round_trip(round_trip):
    dist, _, _ = round_trip
    per_profile = {}
    for key, c, r in dist:
        ok = _rel(r.a_est, c.a) <= 2 * r.quantization_rel_err
        n_ok, n = per_profile.get(key, (0, 0))
        per_profile[key] = (n_ok + ok, n + 1)
    fails = sum(n - k for k, n in per_profile.values())
    detail = ", ".join(f"{k} {n - ok}" for k, (ok, n) in per_profile.items() if ok < n)
    assert record("C1 disturbance A within 2x HC quantization", fails == 0,
                  f"{fails}/{len(dist)} cells outside ({detail or 'none'})")


def test_c1_disturbance_a_within_propagated_bound(round_trip):
    # Informative companion: error of A against the bound obtained by pushing
    # the HC ceiling intervals through the closed-form inversion.
    dist, _, _ = round_trip
    bad = [1 for _, c, r in dist if _rel(r.a_est, c.a) > r.a_rel_err_bound * (1 + 1e-9)]
    med = float(np.median([r.a_rel_err_bound / r.quantization_rel_err for _, _, r in dist]))
    assert record("C1 disturbance A within propagated HC bound (informative)", not bad,
                  f"{len(dist) - len(bad)}/{len(dist)} cells, "
                  f"median bound/quantization = {med:.1f}")


def test_c1_retention_round_trip(round_trip):
    _, ret, _ = round_trip
    bad = 0
    for _, cell, r1, rn in ret:
        for res, truth in ((r1, cell.r_s), (rn, cell.r_s * noise_ratio(cell.noise, DC))):
            lo = rs_from_flip_time(res.t_lo, DC, C_S)
            if res.censored or not lo < truth <= res.r_s * (1 + 1e-12):
                bad += 1
    assert record("C1 retention R_S and R_S(N) within final bracket", bad == 0,
                  f"{2 * len(ret) - bad}/{2 * len(ret)} extractions")


def test_c1_runtime(round_trip):
    dist, ret, elapsed = round_trip
    assert record("C1 runtime <= 60 s", elapsed <= 60,
                  f"{elapsed:.1f} s for {len(dist) + len(ret)} cells")


# -- criterion 2 ------------------------------------------------------------

def test_c2_closed_form_vs_integrator():
    rng = np.random.default_rng(2)
    worst = {Pattern.P111: 0.0, Pattern.P010: 0.0}
    for pattern in worst:
        for _ in range(100):
            prof = DISTURBANCE[rng.integers(len(DISTURBANCE))]
            cell = sample_population(prof, 1, int(rng.integers(2**32)), DC).cells[0]
            if pattern is Pattern.P111:
                cell = CellParams(cell.r_s)
            tau = cell.r_s * cell.c_s
            t, v = integrate_ode(cell, pattern, 5 * tau, tau / 2000, DC)
            closed = np.array([storage_voltage(x, cell, pattern, DC) for x in t])
            worst[pattern] = max(worst[pattern], float(np.max(np.abs(v - closed))))
    tol = 1e-6 * DC.vdd
    assert record("C2 closed form vs RK4 over [0, 5 tau]", max(worst.values()) <= tol,
                  f"max |dV| 111 = {worst[Pattern.P111]:.2e} V, "
                  f"010 = {worst[Pattern.P010]:.2e} V (tol {tol:.1e})")


# -- criterion 3 ------------------------------------------------------------

def test_c3_pattern_noise_law():
    schedule = default_retention_schedule()
    ok, total, worst = 0, 0, 0.0
    for r_s in np.geomspace(1.06e14, 5.53e16, 25):
        for n in (-0.02, -0.01, -0.005):
            cell = CellParams(float(r_s), noise=n)
            probe = SimulationProbe(cell, DC)
            base = extract_rs_retention(probe, Pattern.ALL_ONES, schedule, DC)
            noisy = extract_rs_retention(probe, Pattern.CHECKERBOARD, schedule, DC)
            ratio = (noisy.r_s / base.r_s) / noise_ratio(n, DC)
            # each estimate lies in [T, T * t_hi/t_lo) of its own flip time
            lo_bound = base.t_lo / base.t_flip
            hi_bound = noisy.t_flip / noisy.t_lo
            good = lo_bound <= ratio <= hi_bound and noisy.r_s <= base.r_s
            ok += good
            total += 1
            worst = max(worst, abs(ratio - 1))
    assert record("C3 R_S(N)/R_S law and R_S(N) <= R_S", ok == total,
                  f"{ok}/{total} (R_S, N) pairs, worst |ratio err| = {worst:.2e}")


# -- criterion 4 ------------------------------------------------------------

@pytest.mark.parametrize("seed", [0, 12345])
def test_c4_observations_1_and_2(seed):
    passed = []
    for dimm in DIMM_IDS:
        rh = sample_population(get_profile(dimm, Mechanism.ROWHAMMER), 100_000, seed, DC)
        rp = sample_population(get_profile(dimm, Mechanism.ROWPRESS), 100_000, seed + 1, DC)
        passed.append(np.median(rp.r_s) > np.median(rh.r_s)
                      and np.median(rp.r_b(DC)) < np.median(rh.r_b(DC)))
    assert record(f"C4 median R_S RP>RH and R_B RP<RH (seed {seed})", all(passed),
                  f"{sum(passed)}/7 DIMMs")


# -- criterion 5 ------------------------------------------------------------

def _medians(dimm, mech, n=20_000, seed=5):
    pop = sample_population(get_profile(dimm, mech), n, seed, DC)
    scores = [pattern_scores(c, DC) for c in pop.cells]
    return {k: float(np.median([getattr(s, k) for s in scores]))
            for k in ("g_111", "g_010", "delta_g_rel")}


def test_c5_conductance_orderings():
    rows = []
    for dimm in DIMM_IDS:
        rh = _medians(dimm, Mechanism.ROWHAMMER)
        rp = _medians(dimm, Mechanism.ROWPRESS)
        rows.append((rh["g_111"] > rp["g_111"], rp["g_010"] > rh["g_010"],
                     rp["delta_g_rel"] > rh["delta_g_rel"]))
    n_ok = sum(all(r) for r in rows)
    assert record("C5 G_tot(111) RH>RP, G_tot(010) RP>RH, dG_rel RP>RH", n_ok == 7,
                  f"{n_ok}/7 DIMMs")


# -- criterion 6 ------------------------------------------------------------

def test_c6_confidentiality_accuracy():
    m_010 = 5000
    acc = {}
    for dimm in DIMM_IDS:
        for mech in (Mechanism.ROWHAMMER, Mechanism.ROWPRESS):
            prof = get_profile(dimm, mech)
            pop = sample_population(prof, m_010, profile_seed(6, prof), DC)
            rep = confidentiality_budget(pop.cells, StressSpec.default(mech, Pattern.P010),
                                         m_010, DC)
            acc[dimm, mech] = rep.acc if rep.acc is not None else float("nan")
    ordered = [acc[d, Mechanism.ROWPRESS] >= acc[d, Mechanism.ROWHAMMER] for d in DIMM_IDS]
    values = ", ".join(f"{d} {acc[d, Mechanism.ROWHAMMER]:.3f}/{acc[d, Mechanism.ROWPRESS]:.3f}"
                       for d in DIMM_IDS)
    above = [d for d in DIMM_IDS if acc[d, Mechanism.ROWPRESS] > 0.9]
    record("C6 soft target: Acc(RP) > 0.9 on some DIMM", bool(above),
           f"DIMMs above 0.9: {', '.join(above) or 'none'}")
    assert record("C6 Acc(RP) >= Acc(RH) per DIMM", all(ordered),
                  f"{sum(ordered)}/7; RH/RP: {values}")


# -- criterion 7 ------------------------------------------------------------

_C7 = {"runs": 0}


@settings(max_examples=1000, deadline=None, suppress_health_check=list(HealthCheck))
@given(st.integers(0, 2**32 - 1), st.integers(1, 60), st.integers(-20, 20))
def _c7_population(seed, n, scale_exp):
    rng = np.random.default_rng(seed)
    prof = DISTURBANCE[rng.integers(len(DISTURBANCE))]
    cells = sample_population(prof, n, seed, DC).cells
    scores = [pattern_scores(c, DC) for c in cells]
    for s in scores:
        assert (s.g_010 - s.g_111) / s.g_111 == pytest.approx(s.r_s / s.r_b, rel=1e-12)
    g010 = [s.g_010 for s in scores]
    g111 = [s.g_111 for s in scores]
    for theta in 10 ** rng.uniform(-13, -8, 100):
        acc = inference_accuracy_theta(scores, theta)
        assert acc == brute_accuracy(g010, g111, theta)
        assert 0.5 <= acc <= 1.0
    m = int(rng.integers(1, n + 1))
    report = confidentiality_budget(cells, StressSpec.default(prof.mechanism, Pattern.P010),
                                    m, DC)
    if report.acc is not None:
        assert 0.5 <= report.acc <= 1.0
    k = 2.0 ** scale_exp
    scaled = [CellParams.from_resistances(c.r_s * k, c.r_b(DC) * k, DC, cell_id=c.cell_id)
              for c in cells]
    assert rank_vulnerable(scaled, m, DC) == rank_vulnerable(cells, m, DC)
    _C7["runs"] += 1


def test_c7_metric_identities():
    try:
        _c7_population()
        ok, detail = True, f"{_C7['runs']} random populations"
    except AssertionError as exc:
        ok, detail = False, f"counterexample: {exc}"
    assert record("C7 dG_rel identity, Acc(theta) brute force, Acc range, rank scaling",
                  ok and _C7["runs"] >= 1000, detail)


# -- criterion 8 ------------------------------------------------------------

def test_c8_window_soundness():
    rng = np.random.default_rng(8)
    n_pairs = 20_000
    far = [0, 0]
    near = [0, 0]
    very_far = [0, 0]
    first_bad = None
    for i in range(n_pairs):
        prof = DISTURBANCE[i % len(DISTURBANCE)]
        target, byst = sample_population(prof, 2, int(rng.integers(2**32)), DC).cells
        byst = CellParams(byst.r_s, cell_id=1)
        ratio = time_constant(byst, Pattern.P111, DC) / time_constant(target, Pattern.P010, DC)
        window = selective_window(target, byst, DC) is not None
        ordered = flip_time(target, Pattern.P010, DC) < flip_time(byst, Pattern.P111, DC)
        bucket = far if ratio >= 2 else near
        bucket[0] += window == ordered
        bucket[1] += 1
        if ratio >= 2 and window != ordered and first_bad is None:
            first_bad = (prof.key, target.r_s, target.r_b(DC), byst.r_s)
        if ratio >= (DC.vdd - DC.v_flip) / DC.v_th / math.log(DC.vdd / DC.v_flip):
            very_far[0] += window == ordered
            very_far[1] += 1
    record("C8 closer pairs (tau ratio < 2) agreement, reported", True,
           f"{near[0]}/{near[1]} = {near[0] / max(near[1], 1):.3f}")
    record("C8 pairs with tau ratio >= 30.9 agreement, reported", very_far[0] == very_far[1],
           f"{very_far[0]}/{very_far[1]}")
    assert record("C8 window vs exact flip ordering on tau ratio >= 2", far[0] == far[1],
                  f"{far[0]}/{far[1]} = {far[0] / max(far[1], 1):.4f}"
                  + (f"; first mismatch {first_bad}" if first_bad else "")) and far[1] >= 10_000


# -- criterion 9 ------------------------------------------------------------

def _run_all(out, cfg):
    codes = []
    sim = out / "sim"
    codes.append(main(["simulate", "--config", str(cfg), "--out", str(sim)]))
    codes.append(main(["extract", "--config", str(cfg), "--input",
                       str(sim / "observations.csv"), "--out", str(out / "ext")]))
    codes.append(main(["analyze", "--config", str(cfg), "--out", str(out / "ana")]))
    codes.append(main(["report", "--out", str(out / "ana")]))
    files = sorted(p for p in out.rglob("*") if p.is_file())
    return codes, {str(p.relative_to(out)): p.read_bytes() for p in files}


def test_c9_determinism_and_io(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('[run]\nprofile = "all"\nn = 200\nseed = 9\nm_010 = 200\n')
    # same paths both times: the manifest echoes the config, input path included
    codes_a, a = _run_all(tmp_path / "run", cfg)
    shutil.rmtree(tmp_path / "run")
    codes_b, b = _run_all(tmp_path / "run", cfg)
    capsys.readouterr()
    identical = codes_a == codes_b == [0, 0, 0, 0] and a == b and len(a) >= 10

    rng = np.random.default_rng(9)
    records = []
    for i in range(1000):
        kind = rng.integers(3)
        if kind == 0:
            hc = int(rng.integers(1, 10**7)) if rng.random() < 0.9 else None
            records.append(FlipObservation(i, Mechanism.ROWHAMMER, Pattern.P010, hc is not None,
                                           hc, dimm=str(rng.choice(DIMM_IDS))))
        elif kind == 1:
            lo = float(rng.uniform(0, 3600))
            records.append(FlipObservation(i, Mechanism.RETENTION, Pattern.CHECKERBOARD, True,
                                           t_lo=lo, t_hi=lo * (1 + rng.random()) + 1e-9))
        else:
            records.append(FlipObservation(i, Mechanism.RETENTION, Pattern.ALL_ONES, False,
                                           t_lo=3600.0, dimm="D7"))
    round_trip = parse_observations(observations_to_csv(records)) == records
    assert record("C9 byte-identical reruns and CSV round trip", identical and round_trip,
                  f"{len(a)} files identical: {a == b}; exit codes {codes_a}; "
                  f"1000-record round trip: {round_trip}")
