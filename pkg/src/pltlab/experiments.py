"""Experiment runner: sharded sampling, reports, CSV dumps and merging.

A run produces sample sets (one per experiment id, flavor and radius) and
derives every statistic from them in ``finalize``.  Sample ``i`` always
draws the same random words whatever the shard layout, so concatenating
shard buffers in index order reproduces the single-run buffers exactly and
merging is just concatenation followed by the same ``finalize``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import conditions as C
from .approx import measure_decorrelation
from .config import (
    ConfigError,
    ExperimentConfig,
    build_simple_target,
    build_system,
    build_tau,
    family_target,
    parse_config,
)
from .returns import delayed_batch, kappa_schedule_from_visits, return_batch
from .rng import stream_for
from .stats import (
    MAX_CENSOR_RATE,
    EmpiricalLaw,
    NoVerdictError,
    ProcessLaw,
    counts_from_gaps,
    d_metric,
    empirical_cdf,
    horizons_for,
    ks_exponential,
    law_report,
    moment_cell_from_sums,
    moment_values,
)
from .systems import LabeledUnion, sample_in_target_batch, sample_points

SCHEMA_VERSION = 1
SAMPLE_COLUMNS = ("experiment_id", "flavor", "radius", "gap", "rescaled_gap", "censored")
CDF_COLUMNS = ("experiment_id", "flavor", "radius", "t", "empirical", "exponential")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CENSORING = 3


@dataclass(eq=False)
class SampleSet:
    """Gap vectors of one (experiment id, flavor, radius) cell; rows are sample indices."""

    experiment_id: str
    flavor: str
    radius: float
    measure: float
    gaps: np.ndarray
    censored: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def key(self) -> tuple:
        return (self.experiment_id, self.flavor, self.radius)

    @property
    def count(self) -> int:
        return self.gaps.shape[1]

    @property
    def n(self) -> int:
        return self.gaps.shape[0]

    @property
    def censor_rate(self) -> float:
        return float(self.censored.mean()) if self.censored.size else 0.0

    def first_law(self) -> EmpiricalLaw:
        cens = self.censored[:, 0]
        rate = float(cens.mean()) if cens.size else 0.0
        return EmpiricalLaw(self.measure * self.gaps[~cens, 0].astype(float), rate)

    def integer_stats(self) -> dict:
        cens = self.censored[:, 0]
        g = [int(v) for v in self.gaps[~cens, 0]]
        return {
            "n": self.n,
            "censored": int(cens.sum()),
            "gap_sum": sum(g),
            "gap_sq_sum": sum(v * v for v in g),
        }

    def describe(self) -> dict:
        return {"experiment_id": self.experiment_id, "flavor": self.flavor, "radius": self.radius,
                "measure": self.measure, "count": self.count, **self.meta, **self.integer_stats()}


def concat_sets(parts: list[SampleSet]) -> SampleSet:
    first = parts[0]
    return SampleSet(first.experiment_id, first.flavor, first.radius, first.measure,
                     np.concatenate([p.gaps for p in parts]), np.concatenate([p.censored for p in parts]),
                     dict(first.meta))


def shard_ranges(n: int, shards: int) -> list[tuple[int, int]]:
    """Contiguous sample-index ranges, sizes differing by at most one."""
    if shards < 1:
        raise ValueError("need at least one shard")
    base, extra = divmod(n, shards)
    out, lo = [], 0
    for i in range(shards):
        hi = lo + base + (i < extra)
        out.append((lo, hi))
        lo = hi
    return out


# ---------------------------------------------------------------------------
# sampling per kind


def _plain_sets(cfg: ExperimentConfig, lo: int, hi: int, hitting: bool) -> list[SampleSet]:
    out = []
    n = hi - lo
    for i, (r, t) in enumerate(zip(cfg.radii, cfg.targets)):
        cap = int(math.ceil(cfg.cap_factor / t.measure()))
        if hitting:
            pts = sample_points(cfg.system.dim, stream_for(cfg.seed, f"hit/{i}"), n, lo)
            b = return_batch(cfg.system, t, pts, cfg.count, cap)
            out.append(SampleSet(cfg.experiment_id, cfg.flavor, r, t.measure(), b.gaps, b.censored, {"cap": cap}))
        pts = sample_in_target_batch(t, stream_for(cfg.seed, f"ret/{i}"), n, lo)
        b = return_batch(cfg.system, t, pts, cfg.count, cap)
        out.append(SampleSet(cfg.experiment_id + ".return", cfg.flavor, r, t.measure(), b.gaps, b.censored,
                             {"cap": cap}))
    return out


def _delay_setup(cfg: ExperimentConfig, i: int):
    p = cfg.params
    base = build_system(p["base"])
    union = build_simple_target(p["base_target"])
    t = cfg.targets[i]
    windows = [float(w) for w in p.get("windows", [0, 1, 2])]
    horizons = horizons_for(windows, t.measure())
    y = p.get("y", [0.0] * base.dim)
    kappa, sched = kappa_schedule_from_visits(base, union, y, int(horizons[-1]), p.get("base_cap"))
    return windows, horizons, kappa, sched


def _delayed_sets(cfg: ExperimentConfig, lo: int, hi: int) -> list[SampleSet]:
    out = []
    for i, (r, t) in enumerate(zip(cfg.radii, cfg.targets)):
        windows, horizons, kappa, sched = _delay_setup(cfg, i)
        pts = sample_points(cfg.system.dim, stream_for(cfg.seed, f"delay/{i}"), hi - lo, lo)
        cap = int(horizons[-1])
        b = delayed_batch(cfg.system, t, sched, pts, cfg.count, cap, kappa=kappa)
        meta = {"cap": cap, "horizons": [int(h) for h in horizons], "windows": windows,
                "schedule_key": sched.key, "schedule_length": len(sched), "schedule_censored": sched.censored}
        out.append(SampleSet(cfg.experiment_id, "kappa", r, t.measure(), b.gaps, b.censored, meta))
    return out


def _shrunk(cfg: ExperimentConfig, radius: float, deleted: float):
    fam = cfg.raw["target"]
    d = len(fam["center"])
    return family_target(fam, radius * (1.0 - deleted) ** (1.0 / d))


def _dmetric_sets(cfg: ExperimentConfig, lo: int, hi: int) -> list[SampleSet]:
    out = []
    n = hi - lo
    for i, (r, t) in enumerate(zip(cfg.radii, cfg.targets)):
        cells = [(None, t)] + [(float(dm), _shrunk(cfg, r, float(dm))) for dm in cfg.params["deleted_masses"]]
        for k, (dm, q) in enumerate(cells):
            cap = int(math.ceil(cfg.cap_factor / q.measure()))
            pts = sample_in_target_batch(q, stream_for(cfg.seed, f"dmetric/{i}/{k}"), n, lo)
            b = return_batch(cfg.system, q, pts, cfg.count, cap)
            eid = cfg.experiment_id if dm is None else f"{cfg.experiment_id}.deleted-{dm!r}"
            out.append(SampleSet(eid, cfg.flavor, r, q.measure(), b.gaps, b.censored,
                                 {"cap": cap, "deleted_mass": dm}))
    return out


def sample_shard(cfg: ExperimentConfig, lo: int, hi: int) -> list[SampleSet]:
    if cfg.kind == "plt":
        return _plain_sets(cfg, lo, hi, hitting=True)
    if cfg.kind in ("short-return", "kac"):
        return _plain_sets(cfg, lo, hi, hitting=False)
    if cfg.kind == "delayed-moments":
        return _delayed_sets(cfg, lo, hi)
    if cfg.kind == "d-metric":
        return _dmetric_sets(cfg, lo, hi)
    return []


# ---------------------------------------------------------------------------
# statistics


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _law_summary(s: SampleSet, threshold: float | None) -> dict:
    law = s.first_law()
    try:
        return law_report(law, threshold).to_dict()
    except NoVerdictError as exc:
        return {"n": law.n, "censor_rate": law.censor_rate, "no_verdict": str(exc)}


def _short_threshold(spec, r: float) -> int:
    if spec in (None, "log2"):
        return int(math.ceil(math.log(1.0 / r) ** 2))
    return int(spec)


def _rows_plt(cfg, sets) -> list[dict]:
    thr = cfg.params.get("ks_threshold")
    by = {s.key: s for s in sets}
    rows = []
    for r in cfg.radii:
        hit = _law_summary(by[(cfg.experiment_id, cfg.flavor, r)], thr)
        ret = _law_summary(by[(cfg.experiment_id + ".return", cfg.flavor, r)], thr)
        ok = hit.get("verdicts", {}).get("exponential", False) and ret.get("verdicts", {}).get("exponential", False)
        rows.append({"radius": r, "hitting": hit, "return": ret, "plt": ok})
    return rows


def _rows_short(cfg, sets) -> list[dict]:
    rows = []
    floor = cfg.params.get("mass_floor")
    for s in sets:
        K = _short_threshold(cfg.params.get("K"), s.radius)
        short = (s.gaps[:, 0] <= K) & ~s.censored[:, 0]
        p = float(short.mean())
        sig = math.sqrt(p * (1.0 - p) / s.n)
        row = {"radius": s.radius, "K": K, "short_return_mass": p, "sigma": sig, "short_count": int(short.sum()),
               "return": _law_summary(s, cfg.params.get("ks_threshold"))}
        if floor is not None:
            row["mass_verdict"] = p >= float(floor) - 3.0 * sig
        rows.append(row)
    return rows


def _rows_kac(cfg, sets) -> list[dict]:
    rows = []
    for s in sets:
        law = s.first_law()
        x = law.samples
        mean = math.fsum(x) / x.size if x.size else math.nan
        sig = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.inf
        ok = law.censor_rate < MAX_CENSOR_RATE and abs(mean - 1.0) <= 3.0 * sig
        rows.append({"radius": s.radius, "measure": s.measure, "mean": mean, "sigma": sig,
                     "censor_rate": law.censor_rate, "verdict": ok})
    return rows


def _rows_delayed(cfg, sets) -> tuple[list[dict], bool]:
    cells = [tuple(int(m) for m in c) for c in cfg.params.get("cells", [[1, 0], [0, 1], [1, 1], [2, 0], [0, 2]])]
    rows = []
    saturated = False
    for s in sets:
        counts = counts_from_gaps(s.gaps, s.censored, s.meta["horizons"])
        sat = int(np.sum(counts[:, -1] >= s.count))
        saturated |= sat > 0
        for cell in cells:
            v = moment_values(counts, cell)
            total, squares = int(sum(v)), int(sum(x * x for x in v))
            mc = moment_cell_from_sums(total, squares, s.n, s.meta["windows"], cell)
            rows.append({"radius": s.radius, "orders": list(cell), "windows": s.meta["windows"],
                         "estimate": mc.estimate, "sigma": mc.sigma, "target": mc.target, "verdict": mc.passed,
                         "moment_sum": total, "moment_sq_sum": squares, "saturated_samples": sat})
    return rows, saturated


def _rows_dmetric(cfg, sets) -> list[dict]:
    rows = []
    full = {s.radius: s for s in sets if s.meta.get("deleted_mass") is None}
    for s in sets:
        dm = s.meta.get("deleted_mass")
        if dm is None:
            continue
        q = full[s.radius]
        res = d_metric(ProcessLaw.from_batch(q, q.measure), ProcessLaw.from_batch(s, s.measure))
        bound = 7.0 * dm
        rows.append({"radius": s.radius, "deleted_mass": dm, "J": s.count, "D": res.value, "band": res.band,
                     "bound": bound, "verdict": res.value <= bound + res.band})
    return rows


# ---------------------------------------------------------------------------
# condition checkers


def _grid(spec: dict, key: str = "n_range") -> np.ndarray:
    lo, hi = spec.get(key, [7, 15])
    return C.dyadic_grid(int(lo), int(hi))


def _in_range(row: C.CheckRow, spec: dict) -> C.CheckRow:
    if "expect" in spec:
        lo, hi = spec["expect"]
        row.verdict = bool(lo <= row.estimate <= hi)
        row.note = (row.note + f"; expected in [{lo}, {hi}]").lstrip("; ")
    return row


def run_checker(cfg: ExperimentConfig, index: int, spec: dict) -> list[C.CheckRow]:
    name = spec["name"]
    rng = stream_for(cfg.seed, f"checker/{index}/{name}")
    system = build_system(spec["system"]) if "system" in spec else cfg.system
    if name == "EE":
        fns = [build_tau(f) for f in spec["fns"]]
        fit = C.estimate_ee_exponent(system, fns, _grid(spec), int(spec.get("samples", 200)), rng)
        return [_in_range(fit.row("EE"), spec)]
    if name == "EE-pointwise":
        f = build_tau(spec["f"])
        ys = sample_points(system.dim, rng, int(spec.get("samples", 100)))
        dp = C.pointwise_exponent(float(spec.get("delta", 0.0)), float(spec.get("eps", 0.0)))
        rep = C.pointwise_ee_check(system, f, ys, _grid(spec), dp)
        return [rep.row(float(spec.get("min_fraction", 0.95)))]
    if name in ("LR", "SLR", "NSR", "D"):
        if "k_range" in spec:
            radii = [2.0**-k for k in range(spec["k_range"][0], spec["k_range"][1] + 1)]
        else:
            radii = [float(r) for r in spec["radii"]]
        return C.check_recurrence(system, spec.get("center", [0.0] * system.dim), radii, name,
                                  n_samples=int(spec.get("samples", 1000)), rng=rng, c=float(spec.get("c", 1.0)),
                                  from_center=bool(spec.get("from_center", False)), cap=spec.get("cap"),
                                  tol=float(spec.get("tol", 0.05)))
    if name == "BA":
        rep = C.check_ba(build_tau(spec["tau"]), system, _grid(spec), int(spec.get("samples", 1000)), rng)
        return [_in_range(rep.row(), spec)]
    if name == "UC":
        targets = [build_simple_target(t) for t in spec["targets"]]
        rep = C.check_uc(system, targets, spec.get("s_grid", [1, 2, 5, 10, 20, 50, 100]),
                         int(spec.get("samples", 100)), rng, spec.get("cap"))
        return rep.rows(float(spec.get("tol", 0.05)))
    if name == "MEM":
        targets = [build_simple_target(t) for t in spec["targets"]]
        rep = measure_decorrelation(system, targets, spec["times"], int(spec.get("samples", 10**6)), rng)
        return [C.CheckRow("MEM", float(rep.gap), rep.lhs, rep.mc_error, rep.lhs <= rep.mc_error,
                           "|joint - product| against its 3-sigma Monte Carlo radius")]
    if name == "census":
        pairs = [(build_simple_target(a), build_simple_target(b)) for a, b in spec["pairs"]]
        ys = sample_points(system.base.dim, rng, int(spec.get("samples", 20)))
        zeta = C.zero_threshold if spec.get("zeta") == "zero" else C.log2_threshold
        rows = C.bad_return_census(system, pairs, ys, float(spec.get("t", 1.0)), zeta)
        return [C.CheckRow("census", r.target_measure, r.bad_fraction, r.sigma, r.bad_fraction <= float(spec.get("max_fraction", 0.0)),
                           f"horizon {r.horizon}; censored y {r.censored}") for r in rows]
    if name == "dim":
        return [C.dimension_condition(int(spec["d"]), int(spec["d_base"]), float(spec["r_base"]),
                                      float(spec["delta1"]))]
    if name == "kappa":
        comps = [build_simple_target(t) for t in spec["components"]]
        union = LabeledUnion(tuple((t,) for t in comps))
        kap, _ = kappa_schedule_from_visits(system, union, spec.get("y", [0.0] * system.dim),
                                            int(spec.get("length", 10**4)))
        return C.check_kappa_frequencies(kap.labels, [t.measure() for t in comps])
    raise ConfigError(f"unknown checker {name!r}")


# ---------------------------------------------------------------------------
# finalize, run, merge


def finalize(cfg: ExperimentConfig, sets: list[SampleSet], shards: list[dict], seeds: list[int]) -> dict:
    """Report of one experiment from its complete sample sets."""
    flags = {"censoring_overflow": False, "mixed_seed": len(set(seeds)) > 1, "count_saturation": False}
    if cfg.kind in ("plt", "short-return", "kac", "d-metric"):
        flags["censoring_overflow"] = any(s.censored[:, 0].mean() >= MAX_CENSOR_RATE for s in sets if s.n)
    rows: list[dict] = []
    if cfg.kind == "plt":
        rows = _rows_plt(cfg, sets)
    elif cfg.kind == "short-return":
        rows = _rows_short(cfg, sets)
    elif cfg.kind == "kac":
        rows = _rows_kac(cfg, sets)
    elif cfg.kind == "delayed-moments":
        rows, flags["count_saturation"] = _rows_delayed(cfg, sets)
    elif cfg.kind == "d-metric":
        rows = _rows_dmetric(cfg, sets)
    checks = [row.to_dict() for i, spec in enumerate(cfg.checkers) for row in run_checker(cfg, i, spec)]
    return _clean({
        "experiment_id": cfg.experiment_id,
        "kind": cfg.kind,
        "seed": seeds[0] if len(set(seeds)) == 1 else None,
        "seeds": sorted(set(seeds)),
        "samples": sum(s["range"][1] - s["range"][0] for s in shards),
        "shards": shards,
        "config": cfg.raw,
        "sets": [s.describe() for s in sets],
        "rows": rows,
        "conditions": checks,
        "flags": flags,
    })


@dataclass
class RunResult:
    report: dict
    sets: list[SampleSet]

    @property
    def exit_code(self) -> int:
        return EXIT_CENSORING if self.report["flags"]["censoring_overflow"] else EXIT_OK


def _wrap(experiments: list[dict]) -> dict:
    flags = {k: any(e["flags"].get(k, False) for e in experiments)
             for k in ("censoring_overflow", "mixed_seed", "count_saturation")}
    return {"schema_version": SCHEMA_VERSION, "experiments": experiments, "flags": flags}


def run_experiment(cfg: ExperimentConfig, shard_index: int | None = None) -> RunResult:
    """Run every shard (or only ``shard_index``) and finalize."""
    ranges = shard_ranges(cfg.samples, cfg.shards)
    chosen = range(cfg.shards) if shard_index is None else [shard_index]
    if shard_index is not None and not 0 <= shard_index < cfg.shards:
        raise ConfigError(f"shard index {shard_index} outside 0..{cfg.shards - 1}")
    parts: dict[tuple, list[SampleSet]] = {}
    shards = []
    for i in chosen:
        lo, hi = ranges[i]
        shards.append({"seed": cfg.seed, "index": i, "of": cfg.shards, "range": [lo, hi]})
        for s in sample_shard(cfg, lo, hi):
            parts.setdefault(s.key, []).append(s)
    sets = [concat_sets(p) for p in parts.values()]
    rep = finalize(cfg, sets, shards, [cfg.seed])
    return RunResult(_wrap([rep]), sets)


def _fmt(x: float) -> str:
    return repr(float(x))


def samples_csv(sets: list[SampleSet]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SAMPLE_COLUMNS)
    for s in sets:
        r = _fmt(s.radius)
        for g_row, c_row in zip(s.gaps.tolist(), s.censored.tolist()):
            for g, c in zip(g_row, c_row):
                w.writerow((s.experiment_id, s.flavor, r, g, _fmt(s.measure * g), int(c)))
    return buf.getvalue()


def cdf_csv(sets: list[SampleSet]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CDF_COLUMNS)
    for s in sets:
        law = s.first_law()
        if law.n == 0:
            continue
        for t, fn, fe in empirical_cdf(law):
            w.writerow((s.experiment_id, s.flavor, _fmt(s.radius), _fmt(t), _fmt(fn), _fmt(fe)))
    return buf.getvalue()


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_outputs(result: RunResult, out: str | Path) -> Path:
    """report.json, samples.csv and cdf.csv; everything is rendered before any file is written."""
    texts = {"report.json": report_json(result.report), "samples.csv": samples_csv(result.sets),
             "cdf.csv": cdf_csv(result.sets)}
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in texts.items():
        (out / name).write_text(text)
    return out


# ---------------------------------------------------------------------------
# loading and merging


class MergeError(ValueError):
    """Reports cannot be merged (schema mismatch or conflicting configs)."""


def _report_dir(path) -> Path:
    p = Path(path)
    return p.parent if p.name == "report.json" else p


def load_run(path) -> RunResult:
    """Report and sample sets back from an output directory (or its report.json)."""
    d = _report_dir(path)
    try:
        report = json.loads((d / "report.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MergeError(f"cannot read report in {d}: {exc}") from None
    if report.get("schema_version") != SCHEMA_VERSION:
        raise MergeError(f"{d}: schema version {report.get('schema_version')!r}, expected {SCHEMA_VERSION}")
    rows: dict[tuple, list] = {}
    with open(d / "samples.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["experiment_id"], row["flavor"], float(row["radius"]))
            rows.setdefault(key, []).append((int(row["gap"]), row["censored"] == "1"))
    sets = []
    for exp in report["experiments"]:
        for desc in exp["sets"]:
            key = (desc["experiment_id"], desc["flavor"], float(desc["radius"]))
            data = np.array(rows.get(key, []), dtype=np.int64).reshape(-1, 2)
            count = int(desc["count"])
            meta = {k: v for k, v in desc.items()
                    if k not in ("experiment_id", "flavor", "radius", "measure", "count",
                                 "n", "censored", "gap_sum", "gap_sq_sum")}
            sets.append(SampleSet(key[0], key[1], key[2], float(desc["measure"]),
                                  data[:, 0].reshape(-1, count), data[:, 1].astype(bool).reshape(-1, count), meta))
    return RunResult(report, sets)


def _owner(set_id: str, ids: list[str]) -> str:
    return max((i for i in ids if set_id == i or set_id.startswith(i + ".")), key=len)


_RUN_FIELDS = ("seed", "samples", "shards", "out")


def _check_disjoint(eid: str, shards: list[dict]) -> None:
    spans = sorted((s["seed"], *s["range"]) for s in shards)
    for (s1, _, hi), (s2, lo, _) in zip(spans, spans[1:]):
        if s1 == s2 and lo < hi:
            raise MergeError(f"experiment {eid!r}: overlapping sample ranges for seed {s1}")


def merge_runs(runs: list[RunResult]) -> RunResult:
    """Concatenate shard buffers per experiment (ordered by seed, then sample range) and finalize."""
    if not runs:
        raise MergeError("nothing to merge")
    pieces: dict[str, list] = {}
    for run in runs:
        ids = [e["experiment_id"] for e in run.report["experiments"]]
        for exp in run.report["experiments"]:
            mine = [s for s in run.sets if _owner(s.experiment_id, ids) == exp["experiment_id"]]
            pieces.setdefault(exp["experiment_id"], []).append((exp, mine))
    merged_reports, merged_sets = [], []
    for eid in sorted(pieces):
        group = pieces[eid]
        raw = {k: v for k, v in group[0][0]["config"].items() if k not in _RUN_FIELDS}
        for exp, _ in group[1:]:
            if {k: v for k, v in exp["config"].items() if k not in _RUN_FIELDS} != raw:
                raise MergeError(f"experiment {eid!r}: configs differ beyond seed, samples and shard count")
        cfg = parse_config(group[0][0]["config"])
        shard_list = []
        parts: dict[tuple, list] = {}
        order = sorted(range(len(group)), key=lambda j: [(s["seed"], s["range"][0]) for s in group[j][0]["shards"]])
        for j in order:
            exp, sets = group[j]
            shard_list.extend(exp["shards"])
            for s in sets:
                parts.setdefault(s.key, []).append(s)
        _check_disjoint(eid, shard_list)
        sets = [concat_sets(p) for p in parts.values()]
        seeds = [s["seed"] for s in shard_list]
        merged_reports.append(finalize(cfg, sets, shard_list, seeds))
        merged_sets.extend(sets)
    return RunResult(_wrap(merged_reports), merged_sets)


def merge_reports(paths) -> RunResult:
    return merge_runs([load_run(p) for p in paths])


# ---------------------------------------------------------------------------
# two-sample comparison


def find_set(run: RunResult, experiment_id: str | None = None, radius: float | None = None) -> SampleSet:
    cands = [s for s in run.sets
             if (experiment_id is None or s.experiment_id == experiment_id)
             and (radius is None or s.radius == radius)]
    if not cands:
        raise MergeError("no sample set matches the selection")
    return cands[0]


def compare_sets(a: SampleSet, b: SampleSet) -> dict:
    """D on the first rescaled gap plus the two-sample KS statistic."""
    from scipy.stats import ks_2samp

    pa = ProcessLaw.from_batch(a, a.measure)
    pb = ProcessLaw.from_batch(b, b.measure)
    d = d_metric(ProcessLaw(pa.samples[:, :1], pa.censor_rate), ProcessLaw(pb.samples[:, :1], pb.censor_rate))
    la, lb = a.first_law(), b.first_law()
    ks = ks_2samp(la.samples, lb.samples)
    out = {"a": a.describe(), "b": b.describe(), "D": d.value, "D_band": d.band,
           "ks_two_sample": float(ks.statistic), "ks_pvalue": float(ks.pvalue)}
    for name, law in (("a", la), ("b", lb)):
        try:
            out[f"ks_exponential_{name}"] = ks_exponential(law)[0]
        except NoVerdictError:
            out[f"ks_exponential_{name}"] = None
    return _clean(out)


def default_out(cfg: ExperimentConfig) -> Path:
    return Path(cfg.out) if cfg.out else Path("runs") / cfg.experiment_id


__all__ = [
    "EXIT_CENSORING", "EXIT_INVALID", "EXIT_OK", "MergeError", "RunResult", "SampleSet", "compare_sets",
    "default_out", "find_set", "finalize", "load_run", "merge_reports", "merge_runs", "run_experiment",
    "sample_shard", "samples_csv", "shard_ranges", "write_outputs",
]
