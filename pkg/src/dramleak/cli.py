"""Command-line front end: ``dramleak simulate | extract | analyze | report``.

Every command reads one TOML (or JSON) config document with a ``[run]``
section, an optional ``[constants]`` section mirroring :class:`DeviceConstants`
and an optional ``[profile]`` section for a custom device. Command-line flags
override the corresponding ``[run]`` keys. Outputs go to ``--out`` and are
fully determined by the config and seed.

Exit codes: 0 success, 2 config error, 3 input parse error, 4 infeasible analysis.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import platform
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from dramleak import __version__
from dramleak.attack import confidentiality_budget, pattern_scores, population_medians
from dramleak.cell import DEFAULT_C_S, CellParams, DeviceConstants, Mechanism, Pattern
from dramleak.errors import ConfigError, DramLeakError, NotReachedError, ObservationParseError
from dramleak.extraction import (
    SimulationProbe,
    TraceProbe,
    extract_rs_retention,
    extract_rs_rb_disturbance,
    retention_from_observation,
)
from dramleak.observations import format_float, load_observations, observations_to_csv, write_atomic
from dramleak.profiles import (
    DIMM_IDS,
    DeviceProfile,
    builtin_profiles,
    profile_seed,
    sample_population,
)
from dramleak.stress import (
    HC_BUDGET_ROWHAMMER,
    HC_BUDGET_ROWPRESS,
    RETENTION_MAX_S,
    T_AGG_ON,
    T_RAS,
    T_RP,
    StressSpec,
    default_retention_schedule,
    rowhammer_rate,
    rowpress_rate,
    stress_cells,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("dramleak")

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_INFEASIBLE = 0, 2, 3, 4

PATTERN_ALIASES = {"111": Pattern.P111, "010": Pattern.P010, "all1": Pattern.ALL_ONES,
                   "checker": Pattern.CHECKERBOARD}

RUN_DEFAULTS = {
    "profile": "D1",
    "mechanism": "rowhammer",
    "patterns": None,
    "mechanisms": None,
    "n": 1000,
    "seed": 0,
    "m_010": 5000,
    "cols": 64,
    "hc_budget": None,
    "retention_max_s": RETENTION_MAX_S,
    "retention_t0_s": 0.25,
    "refine_rel": 1e-3,
    "t_agg_on_s": T_AGG_ON,
    "t_ras_s": T_RAS,
    "t_rp_s": T_RP,
    "f_rd_hz": None,
    "c_s": DEFAULT_C_S,
    "distribution": "loguniform",
    "rank_corr": 0.0,
    "n_target": 1,
    "hc_init": 1,
    "input": None,
    "live": False,
}
PROFILE_KEYS = {"dimm_id", "mechanism", "r_s_range", "r_b_range", "r_s_noise_range"}


class Config:
    """Validated run configuration."""

    def __init__(self, run: dict, constants: DeviceConstants, profile: dict | None):
        self.run = run
        self.constants = constants
        self.custom_profile = profile

    def __getitem__(self, key):
        return self.run[key]

    def echo(self) -> dict:
        out = {"run": dict(self.run),
               "constants": {k: getattr(self.constants, k) for k in DeviceConstants.field_names()}}
        if self.custom_profile:
            out["profile"] = self.custom_profile
        return out

    # -- derived settings --------------------------------------------------

    @property
    def mechanism(self) -> Mechanism:
        return Mechanism(self.run["mechanism"])

    def mechanisms(self) -> list[Mechanism]:
        ms = self.run["mechanisms"]
        if ms is None:
            return [self.mechanism]
        return [Mechanism(m) for m in ms]

    def patterns(self, mechanism: Mechanism) -> list[Pattern]:
        pats = self.run["patterns"]
        if pats is None:
            if mechanism is Mechanism.RETENTION:
                return [Pattern.ALL_ONES, Pattern.CHECKERBOARD]
            return [Pattern.P111, Pattern.P010]
        return [PATTERN_ALIASES[p] for p in pats]

    def stress(self, mechanism: Mechanism, pattern: Pattern) -> StressSpec:
        r = self.run
        if mechanism is Mechanism.RETENTION:
            return StressSpec.retention(pattern, r["retention_max_s"])
        if mechanism is Mechanism.ROWHAMMER:
            f = r["f_rd_hz"] or rowhammer_rate(r["t_ras_s"], r["t_rp_s"])
            return StressSpec.rowhammer(pattern, r["hc_budget"] or HC_BUDGET_ROWHAMMER, f)
        f = r["f_rd_hz"] or rowpress_rate(r["t_agg_on_s"], r["t_rp_s"])
        return StressSpec.rowpress(pattern, r["hc_budget"] or HC_BUDGET_ROWPRESS,
                                   r["t_agg_on_s"], f)

    def profiles(self, mechanism: Mechanism) -> list[DeviceProfile]:
        sel = self.run["profile"]
        if sel == "custom":
            if not self.custom_profile:
                raise ConfigError("profile = 'custom' needs a [profile] section")
            p = dict(self.custom_profile)
            p.setdefault("dimm_id", "custom")
            p.setdefault("mechanism", mechanism.value)
            for k in ("r_s_range", "r_b_range", "r_s_noise_range"):
                if p.get(k) is not None:
                    p[k] = tuple(p[k])
            prof = DeviceProfile(**p)
            if prof.mechanism is not mechanism:
                raise ConfigError(f"custom profile is {prof.mechanism.value}, "
                                  f"run wants {mechanism.value}")
            return [prof]
        wanted = list(DIMM_IDS) if sel == "all" else ([sel] if isinstance(sel, str) else sel)
        out = [p for d in wanted for p in builtin_profiles()
               if p.dimm_id == d and p.mechanism is mechanism]
        return out

    def sample(self, profile: DeviceProfile):
        return sample_population(profile, self.run["n"], profile_seed(self.run["seed"], profile),
                                 dc=self.constants, c_s=self.run["c_s"],
                                 distribution=self.run["distribution"],
                                 rank_corr=self.run["rank_corr"])

    def schedule(self) -> list[float]:
        return default_retention_schedule(self.run["retention_t0_s"], self.run["retention_max_s"])


def _read_document(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        if path.suffix == ".json":
            return json.loads(text)
        return tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def build_config(doc: dict, overrides: dict) -> Config:
    """Validate a config document plus CLI overrides; unknown keys are rejected."""
    unknown = set(doc) - {"run", "constants", "profile"}
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    run = dict(RUN_DEFAULTS)
    given = doc.get("run", {})
    bad = set(given) - set(RUN_DEFAULTS)
    if bad:
        raise ConfigError(f"unknown [run] key(s): {', '.join(sorted(bad))}")
    run.update(given)
    run.update({k: v for k, v in overrides.items() if v is not None})
    consts = doc.get("constants", {})
    bad = set(consts) - set(DeviceConstants.field_names())
    if bad:
        raise ConfigError(f"unknown [constants] key(s): {', '.join(sorted(bad))}")
    profile = doc.get("profile")
    if profile is not None:
        bad = set(profile) - PROFILE_KEYS
        if bad:
            raise ConfigError(f"unknown [profile] key(s): {', '.join(sorted(bad))}")
    try:
        dc = DeviceConstants(**{k: float(v) for k, v in consts.items()})
    except (DramLeakError, TypeError, ValueError) as exc:
        raise ConfigError(f"[constants]: {exc}") from None
    _validate_run(run)
    return Config(run, dc, profile)


def _validate_run(run: dict) -> None:
    def check(cond, msg):
        if not cond:
            raise ConfigError(msg)

    check(run["mechanism"] in {m.value for m in Mechanism},
          f"unknown mechanism {run['mechanism']!r}")
    if run["mechanisms"] is not None:
        check(isinstance(run["mechanisms"], list)
              and all(m in {x.value for x in Mechanism} for m in run["mechanisms"]),
              "mechanisms must be a list of mechanism names")
    if run["patterns"] is not None:
        if isinstance(run["patterns"], str):
            run["patterns"] = [run["patterns"]]
        check(all(p in PATTERN_ALIASES for p in run["patterns"]),
              f"patterns must be drawn from {sorted(PATTERN_ALIASES)}")
    prof = run["profile"]
    valid = set(DIMM_IDS) | {"all", "custom"}
    if isinstance(prof, list):
        check(all(p in DIMM_IDS for p in prof), f"unknown profile in {prof}")
    else:
        check(prof in valid, f"profile must be one of {sorted(valid)}, got {prof!r}")
    for key in ("n", "seed", "m_010", "cols", "n_target", "hc_init"):
        check(isinstance(run[key], int) and not isinstance(run[key], bool),
              f"{key} must be an integer")
    check(run["n"] >= 0, "n must be >= 0")
    check(run["cols"] >= 1, "cols must be >= 1")
    check(run["m_010"] >= 1, "m_010 must be >= 1")
    check(run["n_target"] >= 1 and run["hc_init"] >= 1, "n_target and hc_init must be >= 1")
    check(run["hc_budget"] is None or (isinstance(run["hc_budget"], int) and run["hc_budget"] > 0),
          "hc_budget must be a positive integer")
    for key in ("retention_max_s", "retention_t0_s", "t_agg_on_s", "t_ras_s", "t_rp_s", "c_s"):
        check(isinstance(run[key], (int, float)) and run[key] > 0, f"{key} must be positive")
    check(run["f_rd_hz"] is None or run["f_rd_hz"] > 0, "f_rd_hz must be positive")
    check(run["refine_rel"] is None or 0 < run["refine_rel"] < 1, "refine_rel must be in (0, 1)")
    check(run["distribution"] in ("loguniform", "lognormal"),
          "distribution must be loguniform or lognormal")
    check(-1 <= run["rank_corr"] <= 1, "rank_corr must lie in [-1, 1]")
    check(isinstance(run["live"], bool), "live must be a boolean")


# -- output helpers ---------------------------------------------------------

class Outputs:
    """Tracks files written by one command so a failure can remove them."""

    def __init__(self, out_dir: Path):
        self.dir = out_dir
        self.written: list[Path] = []

    def write(self, name: str, text: str) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / name
        write_atomic(path, text)
        self.written.append(path)
        return path

    def write_json(self, name: str, data) -> Path:
        return self.write(name, json.dumps(data, indent=2, sort_keys=True, allow_nan=False,
                                           default=_json_default) + "\n")

    def write_csv(self, name: str, header, rows) -> Path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return self.write(name, buf.getvalue())

    def rollback(self) -> None:
        for p in self.written:
            p.unlink(missing_ok=True)


def _json_default(o):
    if isinstance(o, (Mechanism, Pattern)):
        return o.value
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not serialisable: {type(o)}")


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "inf" if math.isinf(x) else format_float(x)
    return str(x)


def _finite_or_none(x):
    return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else x


def _manifest(command: str, cfg: Config, outputs: list[str]) -> dict:
    return {
        "command": command,
        "config": cfg.echo(),
        "seed": cfg["seed"],
        "outputs": sorted(outputs),
        "versions": {"dramleak": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
    }


# -- commands ---------------------------------------------------------------

def cmd_simulate(cfg: Config, out: Outputs) -> int:
    """Stress sampled populations and write ``observations.csv``."""
    obs = []
    meta = []
    for mech in cfg.mechanisms():
        profiles = cfg.profiles(mech)
        if not profiles:
            raise ConfigError(f"no profile selected for {mech.value}")
        for prof in profiles:
            pop = cfg.sample(prof)
            for pat in cfg.patterns(mech):
                stress = cfg.stress(mech, pat)
                records = stress_cells(pop.cells, stress, cfg.constants, dimm=prof.dimm_id,
                                       schedule=cfg.schedule() if not mech.is_disturbance
                                       else None, refine_rel=cfg["refine_rel"])
                obs.extend(records)
                flipped = sum(o.flipped for o in records)
                meta.append({"dimm": prof.dimm_id, "mechanism": mech.value,
                             "pattern": pat.value, "cells": len(records), "flipped": flipped,
                             "censored": len(records) - flipped, "budget": stress.budget,
                             "f_rd_hz": stress.f_rd})
                log.info("%s %s %s: %d/%d flipped", prof.dimm_id, mech.value, pat.value,
                         flipped, len(records))
    out.write("observations.csv", observations_to_csv(obs))
    out.write_json("manifest.json", {**_manifest("simulate", cfg, ["observations.csv"]),
                                     "runs": meta})
    return EXIT_OK


EXTRACT_COLUMNS = ("dimm", "mechanism", "cell_id", "status", "r_s_ohm", "r_b_ohm", "a_amp",
                   "r_s_noise_ohm", "hc_111", "hc_010", "t_111_s", "t_010_s",
                   "quantization_rel_err")


def _extract_disturbance(cell_id, dimm, mech, probe, stress, cfg) -> dict:
    row = {"dimm": dimm, "mechanism": mech.value, "cell_id": cell_id}
    try:
        res = extract_rs_rb_disturbance(probe, stress, cfg.constants, cfg["n_target"],
                                        cfg["c_s"], cfg["hc_init"], cell_id)
    except NotReachedError as exc:
        row["status"] = "censored"
        row["hc_111"] = exc.last_hc
        return row
    row.update(status="ok", r_s_ohm=res.r_s_est, r_b_ohm=res.r_b_est, a_amp=res.a_est,
               hc_111=res.hc_111, hc_010=res.hc_010, t_111_s=res.t_111, t_010_s=res.t_010,
               quantization_rel_err=res.quantization_rel_err)
    return row


def _retention_row(cell_id, dimm, results) -> dict:
    row = {"dimm": dimm, "mechanism": Mechanism.RETENTION.value, "cell_id": cell_id}
    censored = False
    for r in results:
        censored |= r.censored
        if r.pattern is Pattern.ALL_ONES:
            row["r_s_ohm"] = r.r_s
        else:
            row["r_s_noise_ohm"] = r.r_s
    row["status"] = "censored" if censored else "ok"
    return row


def _summary(rows: list[dict]) -> dict:
    groups = defaultdict(list)
    for r in rows:
        groups[f"{r['dimm']}-{r['mechanism']}"].append(r)
    out = {}
    for key, rs in sorted(groups.items()):
        ok = [r for r in rs if r["status"] == "ok"]
        entry = {"cells": len(rs), "extracted": len(ok), "censored": len(rs) - len(ok)}
        for col in ("r_s_ohm", "r_b_ohm", "r_s_noise_ohm"):
            vals = [r[col] for r in ok if r.get(col) is not None and math.isfinite(r[col])]
            if vals:
                entry[col] = {"min": min(vals), "max": max(vals),
                              "median": float(np.median(vals))}
        out[key] = entry
    return out


def cmd_extract(cfg: Config, out: Outputs) -> int:
    """Per-cell parameter extraction from a trace file or a live simulation."""
    rows = []
    if cfg["input"]:
        records = _load_input(cfg["input"])
        mechs = {o.mechanism for o in records}
        if records and mechs != {cfg.mechanism}:
            raise ObservationParseError(
                f"observations hold {sorted(m.value for m in mechs)}, "
                f"config mechanism is {cfg.mechanism.value}")
        by_cell = defaultdict(list)
        for o in records:
            by_cell[(o.dimm, o.cell_id)].append(o)
        for (dimm, cid), group in sorted(by_cell.items()):
            if cfg.mechanism.is_disturbance:
                stress = cfg.stress(cfg.mechanism, Pattern.P111)
                rows.append(_extract_disturbance(cid, dimm, cfg.mechanism, TraceProbe(group),
                                                 stress, cfg))
            else:
                results = [retention_from_observation(o, cfg.constants, cfg["c_s"])
                           for o in group]
                rows.append(_retention_row(cid, dimm, results))
    elif cfg["live"]:
        mech = cfg.mechanism
        for prof in cfg.profiles(mech):
            pop = cfg.sample(prof)
            for cell in pop.cells:
                if mech.is_disturbance:
                    stress = cfg.stress(mech, Pattern.P111)
                    probe = SimulationProbe(cell, cfg.constants, stress.f_rd)
                    rows.append(_extract_disturbance(cell.cell_id, prof.dimm_id, mech, probe,
                                                     stress, cfg))
                else:
                    probe = SimulationProbe(cell, cfg.constants)
                    results = [extract_rs_retention(probe, p, cfg.schedule(), cfg.constants,
                                                    cfg["c_s"], cfg["refine_rel"], cell.cell_id)
                               for p in cfg.patterns(mech)]
                    rows.append(_retention_row(cell.cell_id, prof.dimm_id, results))
    else:
        raise ConfigError("extract needs run.input (observation CSV) or run.live = true")
    out.write_csv("extraction.csv", EXTRACT_COLUMNS,
                  [[_num(r.get(c)) for c in EXTRACT_COLUMNS] for r in rows])
    out.write_json("summary.json", _jsonable(_summary(rows)))
    out.write_json("manifest.json", _manifest("extract", cfg, ["extraction.csv", "summary.json"]))
    return EXIT_OK


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_jsonable(v) for v in obj]
    return _finite_or_none(obj)


def _load_input(path) -> list:
    try:
        return load_observations(path)
    except OSError as exc:
        raise ObservationParseError(f"cannot read {path}: {exc}") from None


def _load_extraction(path) -> dict:
    """Cells from an ``extraction.csv``, grouped by (dimm, mechanism)."""
    groups = defaultdict(list)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ObservationParseError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("dimm", "mechanism", "cell_id", "status", "r_s_ohm", "r_b_ohm")
                   if c not in (reader.fieldnames or [])]
        if missing:
            raise ObservationParseError(f"missing column(s): {', '.join(missing)}", 1, missing[0])
        for lineno, row in enumerate(reader, start=2):
            if row["status"] != "ok":
                continue
            try:
                r_s = float(row["r_s_ohm"])
                r_b = float(row["r_b_ohm"]) if row["r_b_ohm"] else math.inf
                cell_id = int(row["cell_id"])
                mech = Mechanism(row["mechanism"])
            except ValueError as exc:
                raise ObservationParseError(str(exc), lineno) from None
            if not (r_s > 0 and r_b > 0):
                raise ObservationParseError("resistances must be positive", lineno)
            groups[(row["dimm"], mech)].append((cell_id, r_s, r_b))
    return groups


SCORE_COLUMNS = ("dimm", "mechanism", "cell_id", "r_s", "r_b", "g_111", "g_010", "delta_g",
                 "delta_g_rel", "tau_111", "tau_010")
LONG_COLUMNS = ("dimm", "mechanism", "pattern", "metric", "value")


def cmd_analyze(cfg: Config, out: Outputs) -> int:
    """Attack metrics, medians and confidentiality accuracy per (DIMM, mechanism)."""
    dc = cfg.constants
    populations = []
    if cfg["input"]:
        for (dimm, mech), items in sorted(_load_extraction(cfg["input"]).items(),
                                          key=lambda kv: (kv[0][0], kv[0][1].value)):
            cells = [CellParams.from_resistances(r_s, r_b, dc, c_s=cfg["c_s"], cell_id=cid)
                     for cid, r_s, r_b in items]
            populations.append((dimm, mech, cells))
    else:
        mechs = cfg.mechanisms() if cfg["mechanisms"] else [Mechanism.ROWHAMMER,
                                                             Mechanism.ROWPRESS]
        for mech in mechs:
            if not mech.is_disturbance:
                raise ConfigError("analyze covers rowhammer/rowpress populations only")
            for prof in cfg.profiles(mech):
                populations.append((prof.dimm_id, mech, cfg.sample(prof).cells))
        populations.sort(key=lambda t: (t[0], t[1].value))
    score_rows, long_rows = [], []
    medians, accuracy = {}, {}
    infeasible = []
    for dimm, mech, cells in populations:
        if not mech.is_disturbance:
            raise ConfigError("analyze covers rowhammer/rowpress populations only")
        key = f"{dimm}-{mech.value}"
        scores = [pattern_scores(c, dc) for c in cells]
        for s in scores:
            score_rows.append([dimm, mech.value] + [_num(getattr(s, c))
                                                     for c in SCORE_COLUMNS[2:]])
        if not cells:
            continue
        med = population_medians(scores)
        medians[key] = {"dimm": dimm, "mechanism": mech.value, "cells": len(cells), **med}
        m = min(cfg["m_010"], len(cells))
        report = confidentiality_budget(cells, cfg.stress(mech, Pattern.P010), m, dc)
        summary = report.summary()
        summary.pop("medians")
        accuracy[key] = {"dimm": dimm, "mechanism": mech.value, **summary}
        if report.acc is None:
            infeasible.append(key)
        long_rows += [
            [dimm, mech.value, "111", "g_tot", _num(med["g_111"])],
            [dimm, mech.value, "010", "g_tot", _num(med["g_010"])],
            [dimm, mech.value, "", "delta_g_rel", _num(med["delta_g_rel"])],
            [dimm, mech.value, "", "r_s", _num(med["r_s"])],
            [dimm, mech.value, "", "r_b", _num(med["r_b"])],
            [dimm, mech.value, "", "acc", _num(report.acc)],
        ]
    out.write_csv("scores.csv", SCORE_COLUMNS, score_rows)
    out.write_csv("plot_long.csv", LONG_COLUMNS, long_rows)
    out.write_json("medians.json", _jsonable(medians))
    out.write_json("accuracy.json", _jsonable(accuracy))
    out.write_json("manifest.json", _manifest(
        "analyze", cfg, ["scores.csv", "plot_long.csv", "medians.json", "accuracy.json"]))
    if infeasible:
        log.error("no selected cell flips within the budget for: %s", ", ".join(infeasible))
        return EXIT_INFEASIBLE
    return EXIT_OK


REPORT_INPUTS = ("medians.json", "accuracy.json")


def _fmt(x, spec=".3g") -> str:
    return "-" if x is None else format(x, spec)


def render_report(medians: dict, accuracy: dict) -> str:
    """Markdown comparison of Rowhammer vs Rowpress per DIMM."""
    dimms = sorted({v["dimm"] for v in medians.values()})
    lines = [
        "# Rowhammer vs Rowpress summary",
        "",
        "| DIMM | R_S RH | R_S RP | R_S RP>RH | R_B RH | R_B RP | R_B RP<RH | dG_rel RH | dG_rel RP "
        "| Acc RH | Acc RP | windows RH | windows RP |",
        "|---|---|---|---|---|---|---|---|---|---|---|---|---|",
    ]
    n_obs1 = n_obs2 = 0
    for d in dimms:
        rh = medians.get(f"{d}-rowhammer")
        rp = medians.get(f"{d}-rowpress")
        arh = accuracy.get(f"{d}-rowhammer", {})
        arp = accuracy.get(f"{d}-rowpress", {})
        if rh and rp:
            obs1 = rp["r_s"] > rh["r_s"]
            obs2 = rp["r_b"] < rh["r_b"]
            n_obs1 += obs1
            n_obs2 += obs2
            o1, o2 = ("pass" if obs1 else "FAIL"), ("pass" if obs2 else "FAIL")
        else:
            o1 = o2 = "n/a"
        lines.append(
            f"| {d} | {_fmt((rh or {}).get('r_s'))} | {_fmt((rp or {}).get('r_s'))} | {o1} "
            f"| {_fmt((rh or {}).get('r_b'))} | {_fmt((rp or {}).get('r_b'))} | {o2} "
            f"| {_fmt((rh or {}).get('delta_g_rel'))} | {_fmt((rp or {}).get('delta_g_rel'))} "
            f"| {_fmt(arh.get('acc'), '.4f')} | {_fmt(arp.get('acc'), '.4f')} "
            f"| {arh.get('inference_windows', '-')} | {arp.get('inference_windows', '-')} |")
    lines += ["", f"median R_S higher under Rowpress: {n_obs1}/{len(dimms)} DIMMs",
              f"median R_B lower under Rowpress: {n_obs2}/{len(dimms)} DIMMs", ""]
    return "\n".join(lines)


def cmd_report(cfg: Config, out: Outputs) -> int:
    """Render ``report.md`` from a prior ``analyze`` output directory."""
    src = Path(cfg["input"]) if cfg["input"] else out.dir
    missing = [name for name in REPORT_INPUTS if not (src / name).is_file()]
    if missing:
        raise ObservationParseError(
            f"report needs {', '.join(REPORT_INPUTS)} in {src}; missing {', '.join(missing)}")
    try:
        medians = json.loads((src / "medians.json").read_text(encoding="utf-8"))
        accuracy = json.loads((src / "accuracy.json").read_text(encoding="utf-8"))
    except ValueError as exc:
        raise ObservationParseError(f"{src}: {exc}") from None
    text = render_report(medians, accuracy)
    out.write("report.md", text)
    print(text)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "extract": cmd_extract, "analyze": cmd_analyze,
            "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dramleak", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.split("\n")[0])
        p.add_argument("--config", type=Path, help="TOML or JSON run config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path, default=Path("out"))
        p.add_argument("--profile", help="D1..D7, all, or custom")
        p.add_argument("--mechanism", choices=[m.value for m in Mechanism])
        p.add_argument("--pattern", action="append", choices=sorted(PATTERN_ALIASES),
                       help="repeatable; defaults to both patterns of the mechanism")
        p.add_argument("--input", help="observation/extraction file or analyze directory")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    out = Outputs(args.out)
    try:
        doc = _read_document(args.config) if args.config else {}
        cfg = build_config(doc, {"seed": args.seed, "profile": args.profile,
                                 "mechanism": args.mechanism, "patterns": args.pattern,
                                 "input": args.input})
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        out.rollback()
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ObservationParseError as exc:
        out.rollback()
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DramLeakError as exc:
        out.rollback()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BaseException:
        out.rollback()
        raise


if __name__ == "__main__":
    sys.exit(main())
