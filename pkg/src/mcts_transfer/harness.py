"""Experiment runner, rank aggregation, SVG plots and the command line.

An experiment spec (JSON or TOML) looks like::

    name = "sphere2d"
    seeds = [0, 1, 2]
    budget = 100
    source_manifest = "sources.json"      # optional, relative to the spec file
    out = "results"                       # optional default output directory

    [[problems]]
    id = "sphere44"                       # optional, defaults to the name
    name = "sphere"
    x_star = [4.0, 4.0]
    sources = ["d55", "d5m5"]             # optional subset of manifest ids

    [[methods]]
    method = "mcts_transfer"
    label = "mcts"                        # optional, defaults to the method
    gamma = 0.99                          # any other optimizer setting

A source manifest lists ``{"id", "problem", "sampler", "seed", "n", "path"}``
entries under ``datasets``; ``gen-data`` writes the files it names.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .bench import SAMPLERS, build_problem, generate_source_data
from .core import DatasetError, load_dataset, write_dataset
from .optimizer import METHODS, OptimizerConfig, run_method

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger(__name__)

SUMMARY_FIELDS = ("method", "problem", "seed", "t", "incumbent", "regret", "status")
EXIT_OK, EXIT_INVALID, EXIT_PARTIAL = 0, 1, 2


class SpecError(ValueError):
    """The experiment spec or a file it references is unusable."""


def _read_structured(path: Path) -> dict:
    text = path.read_text()
    try:
        if path.suffix.lower() == ".toml":
            return tomllib.loads(text)
        return json.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise SpecError(f"{path}: {exc}") from exc


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    return str(v)


# --- spec ----------------------------------------------------------------------

@dataclass
class ExperimentSpec:
    problems: List[dict]
    methods: List[dict]
    seeds: List[int]
    budget: int
    source_manifest: Optional[str] = None
    out: Optional[str] = None
    name: str = "experiment"
    base_dir: str = "."

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "ExperimentSpec":
        unknown = set(d) - {"problems", "methods", "seeds", "budget", "source_manifest", "out", "name"}
        if unknown:
            raise SpecError(f"unknown spec keys: {sorted(unknown)}")
        try:
            return cls(problems=[dict(p) for p in d["problems"]], methods=[dict(m) for m in d["methods"]],
                       seeds=[int(s) for s in d["seeds"]], budget=int(d["budget"]),
                       source_manifest=d.get("source_manifest"), out=d.get("out"),
                       name=str(d.get("name", "experiment")), base_dir=str(base_dir))
        except KeyError as exc:
            raise SpecError(f"missing spec key {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise SpecError(f"malformed spec: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        path = Path(path)
        if not path.exists():
            raise SpecError(f"spec file {path} not found")
        return cls.from_dict(_read_structured(path), base_dir=path.parent)

    def to_dict(self) -> dict:
        d = {"name": self.name, "problems": self.problems, "methods": self.methods, "seeds": self.seeds,
             "budget": self.budget}
        if self.source_manifest:
            d["source_manifest"] = self.source_manifest
        return d

    def resolve(self, p: str) -> Path:
        p = Path(p)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def problem_id(self, p: dict) -> str:
        return str(p.get("id", p["name"]))

    def method_label(self, m: dict) -> str:
        return str(m.get("label", m.get("method", "mcts_transfer")))

    def optimizer_config(self, m: dict, seed: int) -> OptimizerConfig:
        kw = {k: v for k, v in m.items() if k != "label"}
        kw["eval_budget"] = self.budget
        kw["seed"] = seed
        return OptimizerConfig(**kw)


def load_manifest(path) -> List[dict]:
    path = Path(path)
    if not path.exists():
        raise SpecError(f"source manifest {path} not found")
    data = _read_structured(path)
    entries = data.get("datasets", data) if isinstance(data, dict) else data
    if not isinstance(entries, list):
        raise SpecError(f"{path}: expected a list of datasets")
    out = []
    for e in entries:
        if "id" not in e or "path" not in e:
            raise SpecError(f"{path}: every dataset needs 'id' and 'path'")
        e = dict(e)
        p = Path(e["path"])
        e["path"] = str(p if p.is_absolute() else path.parent / p)
        out.append(e)
    ids = [e["id"] for e in out]
    if len(set(ids)) != len(ids):
        raise SpecError(f"{path}: duplicate dataset ids")
    return out


def validate_spec(spec: ExperimentSpec, check_files: bool = True) -> List[str]:
    """All problems found in ``spec``; an empty list means it is runnable."""
    errors = []
    if not spec.problems:
        errors.append("no problems")
    if not spec.methods:
        errors.append("no methods")
    if not spec.seeds:
        errors.append("no seeds")
    if spec.budget < 1:
        errors.append("budget must be >= 1")
    for p in spec.problems:
        try:
            build_problem({k: v for k, v in p.items() if k not in ("id", "sources")})
        except (KeyError, ValueError, TypeError) as exc:
            errors.append(f"problem {p.get('name')!r}: {exc}")
    labels = [spec.method_label(m) for m in spec.methods]
    if len(set(labels)) != len(labels):
        errors.append("method labels must be unique")
    ids = [spec.problem_id(p) for p in spec.problems]
    if len(set(ids)) != len(ids):
        errors.append("problem ids must be unique")
    for m in spec.methods:
        try:
            spec.optimizer_config(m, 0)
        except (TypeError, ValueError) as exc:
            errors.append(f"method {spec.method_label(m)!r}: {exc}")
    needs_sources = any(m.get("method", "mcts_transfer") in ("mcts_transfer", "box_gp", "ellipsoid_gp")
                        for m in spec.methods)
    manifest = []
    if spec.source_manifest:
        try:
            manifest = load_manifest(spec.resolve(spec.source_manifest))
        except SpecError as exc:
            errors.append(str(exc))
    known = {e["id"] for e in manifest}
    for p in spec.problems:
        missing = set(p.get("sources", [])) - known
        if missing:
            errors.append(f"problem {spec.problem_id(p)!r} references unknown datasets {sorted(missing)}")
    if check_files:
        for e in manifest:
            if not Path(e["path"]).exists():
                errors.append(f"dataset {e['id']!r}: file {e['path']} missing")
    if needs_sources and not manifest:
        errors.append("transfer methods need a source_manifest with datasets")
    return errors


# --- running -------------------------------------------------------------------

def _problem_sources(spec: ExperimentSpec, p: dict, manifest: List[dict], domain):
    wanted = p.get("sources")
    entries = [e for e in manifest if wanted is None or e["id"] in wanted]
    out = []
    for e in entries:
        ds, dom, report = load_dataset(e["path"], domain)
        if not np.allclose(dom.lower, domain.lower) or not np.allclose(dom.upper, domain.upper):
            raise DatasetError(f"dataset {e['id']!r} was written for a different domain")
        ds.task_id = str(e["id"])
        out.append(ds)
    return out


def _run_job(job: dict) -> dict:
    """Worker entry point; returns everything the collector writes."""
    prob = build_problem(job["problem"])
    cfg = OptimizerConfig(**job["config"])
    sources = job["sources"]
    try:
        trace = run_method(prob.maximization_objective(), prob.domain, sources, cfg)
    except Exception as exc:  # noqa: BLE001 - one failed run must not stop the others
        log.exception("run %s failed", job["key"])
        return {"job": job, "trace": None, "error": f"{type(exc).__name__}: {exc}"}
    return {"job": job, "trace": trace, "error": trace.error, "f_opt": prob.f_opt, "sense": prob.sense}


def _trace_csv(trace, task_ids: Sequence[str]) -> str:
    dim = len(trace.records[0]["x"]) if trace.records else 0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"x_{i}" for i in range(dim)] + ["y", "incumbent", "time_evaluation",
               "time_backpropagation", "time_reconstruction", "leaf", "n_leaves"]
               + [f"w_{tid}" for tid in task_ids])
    for r in trace.records:
        tm = r["timings"]
        w.writerow([r["t"]] + [_fmt(float(v)) for v in r["x"]]
                   + [_fmt(r["y"]), _fmt(r["incumbent"]), _fmt(tm["evaluation"]),
                      _fmt(tm["backpropagation"]), _fmt(tm["reconstruction"]),
                      r.get("leaf", ""), r.get("n_leaves", "")]
                   + [_fmt(r["weights"][tid]) if tid in r.get("weights", {}) else "" for tid in task_ids])
    return buf.getvalue()


def _to_problem_sense(value: float, sense: str) -> float:
    return -value if sense == "min" else value


def run_experiment(spec: ExperimentSpec, out, workers: Optional[int] = None, seed_offset: int = 0) -> dict:
    """Run every (problem, method, seed) triple and write the result files.

    Layout of ``out``: ``traces/<problem>__<method>__seed<k>.csv`` with a
    JSON sidecar each, ``summary.csv``, ``weights.csv`` and ``manifest.json``.
    Returns the manifest; ``manifest["failed"]`` counts failed runs.
    """
    errors = validate_spec(spec)
    if errors:
        raise SpecError("; ".join(errors))
    out = Path(out)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    manifest = load_manifest(spec.resolve(spec.source_manifest)) if spec.source_manifest else []

    jobs = []
    for p in spec.problems:
        pdef = {k: v for k, v in p.items() if k not in ("id", "sources")}
        prob = build_problem(pdef)
        sources = _problem_sources(spec, p, manifest, prob.domain)
        for m in spec.methods:
            for seed in spec.seeds:
                s = seed + seed_offset
                cfg = spec.optimizer_config(m, s)
                key = f"{spec.problem_id(p)}__{spec.method_label(m)}__seed{s}"
                jobs.append({"key": key, "problem": pdef, "problem_id": spec.problem_id(p),
                             "label": spec.method_label(m), "seed": s, "config": cfg.to_dict(),
                             "sources": sources if cfg.method != "gp_ei" and cfg.method != "la_mcts" else []})

    workers = workers or os.cpu_count() or 1
    if workers <= 1 or len(jobs) <= 1:
        results = [_run_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_run_job, jobs))  # map keeps job order

    summary_rows, weight_rows, runs = [], [], []
    for res in results:
        job, trace = res["job"], res["trace"]
        status = "ok" if trace is not None and trace.status == "ok" else "failed"
        entry = {"key": job["key"], "problem": job["problem_id"], "method": job["label"], "seed": job["seed"],
                 "status": status, "error": res["error"]}
        if trace is not None:
            task_ids = list(trace.task_ids)
            (out / "traces" / f"{job['key']}.csv").write_text(_trace_csv(trace, task_ids))
            sidecar = {"key": job["key"], "problem": job["problem"], "config": job["config"], "status": status,
                       "error": res["error"], "task_ids": task_ids, "timing_totals": trace.timing_totals(),
                       "region": trace.region, "tree": trace.tree}
            (out / "traces" / f"{job['key']}.json").write_text(json.dumps(sidecar, indent=1, default=float))
            entry["trace"] = f"traces/{job['key']}.csv"
            for r in trace.records:
                inc = _to_problem_sense(r["incumbent"], res["sense"])
                regret = inc - res["f_opt"] if res["sense"] == "min" else res["f_opt"] - inc
                summary_rows.append([job["label"], job["problem_id"], job["seed"], r["t"], inc, regret, status])
                for tid in task_ids:
                    if tid in r.get("weights", {}):
                        weight_rows.append([job["label"], job["problem_id"], job["seed"], r["t"], tid,
                                            r["weights"][tid]])
        if trace is None or not trace.records:
            summary_rows.append([job["label"], job["problem_id"], job["seed"], 0, float("nan"), float("nan"),
                                 status])
        runs.append(entry)

    _write_csv(out / "summary.csv", SUMMARY_FIELDS, summary_rows)
    _write_csv(out / "weights.csv", ("method", "problem", "seed", "t", "task_id", "weight"), weight_rows)
    failed = sum(r["status"] != "ok" for r in runs)
    man = {"spec": spec.to_dict(), "seed_offset": seed_offset, "runs": runs, "failed": failed,
           "sources": manifest and [{k: e[k] for k in e if k != "path"} for e in manifest]}
    (out / "manifest.json").write_text(json.dumps(man, indent=1, sort_keys=True))
    return man


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def read_summary(path) -> List[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["seed"], r["t"] = int(r["seed"]), int(r["t"])
        r["incumbent"], r["regret"] = float(r["incumbent"]), float(r["regret"])
    return rows


# --- aggregation ---------------------------------------------------------------

def aggregate_ranks(summary: Sequence[dict], higher_is_better: bool = False) -> Dict[str, dict]:
    """Mean and std rank per method at every evaluation index.

    Methods are ranked within each (problem, seed, t) group by ``regret``
    (lower is better; 1 = best, ties share the average rank).  Returns
    ``{method: {"t": array, "mean": array, "std": array}}``.
    """
    groups: Dict[tuple, Dict[str, float]] = {}
    for r in summary:
        if r["t"] < 1 or r.get("status", "ok") != "ok":
            continue
        groups.setdefault((r["problem"], r["seed"], r["t"]), {})[r["method"]] = r["regret"]
    methods = sorted({m for g in groups.values() for m in g})
    if len(methods) < 2:
        raise ValueError("rank aggregation needs at least two methods")
    per: Dict[str, Dict[int, list]] = {m: {} for m in methods}
    for (_, _, t), vals in sorted(groups.items()):
        names = sorted(vals)
        scores = np.array([vals[m] for m in names])
        ranks = rankdata(-scores if higher_is_better else scores, method="average")
        for m, rk in zip(names, ranks):
            per[m].setdefault(t, []).append(float(rk))
    table = {}
    for m in methods:
        ts = sorted(per[m])
        table[m] = {"t": np.array(ts), "mean": np.array([np.mean(per[m][t]) for t in ts]),
                    "std": np.array([np.std(per[m][t]) for t in ts])}
    return table


def write_rank_table(table: Dict[str, dict], path) -> None:
    rows = [[m, int(t), float(mu), float(sd)] for m, v in table.items()
            for t, mu, sd in zip(v["t"], v["mean"], v["std"])]
    _write_csv(Path(path), ("method", "t", "mean_rank", "std_rank"), rows)


def _curves(summary: Sequence[dict], problem: str, value: str = "regret") -> Dict[str, dict]:
    per: Dict[str, Dict[int, list]] = {}
    for r in summary:
        if r["problem"] == problem and r["t"] >= 1 and r.get("status", "ok") == "ok":
            per.setdefault(r["method"], {}).setdefault(r["t"], []).append(r[value])
    return {m: {"t": np.array(sorted(d)), "mean": np.array([np.mean(d[t]) for t in sorted(d)]),
                "std": np.array([np.std(d[t]) for t in sorted(d)])} for m, d in sorted(per.items())}


# --- plotting ------------------------------------------------------------------

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
WIDTH, HEIGHT, MARGIN = 640, 400, 60


def _scale(lo, hi):
    if not math.isfinite(lo) or not math.isfinite(hi) or hi <= lo:
        lo, hi = (lo - 1.0, lo + 1.0) if math.isfinite(lo) else (0.0, 1.0)
    return lo, hi


def svg_line_chart(series: Dict[str, dict], title: str, ylabel: str) -> str:
    """Self-contained SVG with one polyline per series and a shaded +-1 std band.

    Each series is ``{"t": xs, "mean": ys, "std": sds}``.  Points are
    written with 4 decimals so the plotted values can be recovered.
    """
    xs = np.concatenate([np.asarray(s["t"], float) for s in series.values()])
    lo_y = np.concatenate([np.asarray(s["mean"]) - np.asarray(s["std"]) for s in series.values()])
    hi_y = np.concatenate([np.asarray(s["mean"]) + np.asarray(s["std"]) for s in series.values()])
    x0, x1 = _scale(float(xs.min()), float(xs.max()))
    y0, y1 = _scale(float(np.nanmin(lo_y)), float(np.nanmax(hi_y)))
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(x):
        return MARGIN + (x - x0) / (x1 - x0) * pw

    def py(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
             f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
             f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
             f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
             f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
             f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
             f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle">evaluation</text>',
             f'<text x="15" y="{HEIGHT / 2}" transform="rotate(-90 15 {HEIGHT / 2})" '
             f'text-anchor="middle">{ylabel}</text>']
    for v in (y0, (y0 + y1) / 2, y1):
        parts.append(f'<text x="{MARGIN - 5}" y="{py(v):.4f}" text-anchor="end">{v:.4g}</text>')
    for v in (x0, x1):
        parts.append(f'<text x="{px(v):.4f}" y="{HEIGHT - MARGIN + 15}" text-anchor="middle">{v:.4g}</text>')
    for i, (name, s) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        t, mu, sd = (np.asarray(s[k], float) for k in ("t", "mean", "std"))
        upper = [f"{px(a):.4f},{py(b):.4f}" for a, b in zip(t, mu + sd)]
        lower = [f"{px(a):.4f},{py(b):.4f}" for a, b in zip(t[::-1], (mu - sd)[::-1])]
        parts.append(f'<polygon class="band" data-series="{name}" points="{" ".join(upper + lower)}" '
                     f'fill="{color}" fill-opacity="0.2" stroke="none"/>')
        line = " ".join(f"{px(a):.4f},{py(b):.4f}" for a, b in zip(t, mu))
        parts.append(f'<polyline class="mean" data-series="{name}" points="{line}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{WIDTH - MARGIN + 5}" y="{MARGIN + 15 * i}" fill="{color}">{name}</text>')
    parts.append(f"<!-- axes: x [{x0!r}, {x1!r}] y [{y0!r}, {y1!r}] plot box {MARGIN} {MARGIN} {pw} {ph} -->")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _series_csv(series: Dict[str, dict], path: Path) -> None:
    rows = [[name, int(t), float(m), float(s)] for name, v in series.items()
            for t, m, s in zip(v["t"], v["mean"], v["std"])]
    _write_csv(path, ("series", "t", "mean", "std"), rows)


def _read_weights(path) -> List[dict]:
    if not Path(path).exists():
        return []
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["seed"], r["t"], r["weight"] = int(r["seed"]), int(r["t"]), float(r["weight"])
    return rows


def emit_plots(out, summary: Optional[Sequence[dict]] = None, ranks: Optional[Dict[str, dict]] = None,
               weights: Optional[Sequence[dict]] = None) -> List[str]:
    """Write SVG charts plus the CSV behind each one into ``out/plots``.

    Returns notices for charts that were skipped.
    """
    out = Path(out)
    plots = out / "plots"
    plots.mkdir(parents=True, exist_ok=True)
    summary = read_summary(out / "summary.csv") if summary is None else summary
    weights = _read_weights(out / "weights.csv") if weights is None else weights
    notices = []
    problems = sorted({r["problem"] for r in summary})
    for prob in problems:
        series = _curves(summary, prob)
        if series:
            (plots / f"regret_{prob}.svg").write_text(svg_line_chart(series, f"{prob}: simple regret", "regret"))
            _series_csv(series, plots / f"regret_{prob}.csv")
    if ranks is None:
        try:
            ranks = aggregate_ranks(summary)
        except ValueError:
            ranks = None
    if ranks:
        (plots / "ranks.svg").write_text(svg_line_chart(ranks, "mean rank", "rank"))
        _series_csv(ranks, plots / "ranks.csv")
    else:
        notices.append("rank plot skipped: fewer than two methods")
    wanted = sorted({(w["problem"], w["method"]) for w in weights})
    if not wanted:
        notices.append("weight plot skipped: no weight trajectories logged")
    for prob, method in wanted:
        per: Dict[str, Dict[int, list]] = {}
        for w in weights:
            if w["problem"] == prob and w["method"] == method:
                per.setdefault(w["task_id"], {}).setdefault(w["t"], []).append(w["weight"])
        series = {tid: {"t": np.array(sorted(d)), "mean": np.array([np.mean(d[t]) for t in sorted(d)]),
                        "std": np.array([np.std(d[t]) for t in sorted(d)])} for tid, d in sorted(per.items())}
        stem = f"weights_{prob}_{method}"
        (plots / f"{stem}.svg").write_text(svg_line_chart(series, f"{prob} / {method}: source weights", "weight"))
        _series_csv(series, plots / f"{stem}.csv")
    for n in notices:
        log.warning(n)
    return notices


# --- offline data --------------------------------------------------------------

def generate_from_manifest(path) -> List[str]:
    """Create every dataset listed in a manifest; returns the written paths."""
    entries = load_manifest(path)
    written = []
    for e in entries:
        for key in ("problem", "sampler", "seed", "n"):
            if key not in e:
                raise SpecError(f"dataset {e['id']!r}: missing {key!r}")
        if e["sampler"] not in SAMPLERS:
            raise SpecError(f"dataset {e['id']!r}: unknown sampler {e['sampler']!r}")
        prob = build_problem(e["problem"])
        ds = generate_source_data(prob, e["sampler"], int(e["n"]), int(e["seed"]), task_id=str(e["id"]))
        written.append(str(write_dataset(e["path"], ds, prob.domain)))
    return written


# --- command line --------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mcts-transfer", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment spec")
    r.add_argument("--spec", required=True)
    r.add_argument("--out")
    r.add_argument("--workers", type=int, default=None)
    r.add_argument("--seed-offset", type=int, default=0)
    a = sub.add_parser("aggregate", help="rank table from out/summary.csv")
    a.add_argument("--out", required=True)
    p = sub.add_parser("plot", help="SVG charts from an output directory")
    p.add_argument("--out", required=True)
    g = sub.add_parser("gen-data", help="generate the source datasets of a manifest")
    g.add_argument("--manifest", required=True)
    v = sub.add_parser("validate", help="check a spec without running it")
    v.add_argument("--spec", required=True)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            errors = validate_spec(ExperimentSpec.load(args.spec))
            for e in errors:
                print(f"error: {e}", file=sys.stderr)
            if errors:
                return EXIT_INVALID
            print("spec ok")
            return EXIT_OK
        if args.command == "run":
            spec = ExperimentSpec.load(args.spec)
            out = args.out or (spec.resolve(spec.out) if spec.out else None)
            if out is None:
                raise SpecError("no output directory (use --out)")
            man = run_experiment(spec, out, workers=args.workers, seed_offset=args.seed_offset)
            print(f"{len(man['runs'])} runs, {man['failed']} failed -> {out}")
            return EXIT_PARTIAL if man["failed"] else EXIT_OK
        if args.command == "aggregate":
            table = aggregate_ranks(read_summary(Path(args.out) / "summary.csv"))
            write_rank_table(table, Path(args.out) / "ranks.csv")
            for m, v in table.items():
                print(f"{m}: final mean rank {v['mean'][-1]:.3f} +- {v['std'][-1]:.3f}")
            return EXIT_OK
        if args.command == "plot":
            for n in emit_plots(args.out):
                print(f"notice: {n}")
            return EXIT_OK
        if args.command == "gen-data":
            for p in generate_from_manifest(args.manifest):
                print(p)
            return EXIT_OK
    except (SpecError, DatasetError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
