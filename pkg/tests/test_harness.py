import csv
import json
import re

import numpy as np
import pytest

from mcts_transfer import harness
from mcts_transfer.harness import (
    ExperimentSpec,
    SpecError,
    aggregate_ranks,
    emit_plots,
    generate_from_manifest,
    main,
    read_summary,
    run_experiment,
    validate_spec,
)


def write_manifest(tmp_path):
    m = {"datasets": [
        {"id": "near", "problem": {"name": "sphere", "x_star": [3, 3]}, "sampler": "random", "seed": 0, "n": 25,
         "path": "data/near.jsonl"},
        {"id": "far", "problem": {"name": "sphere", "x_star": [-6, -6]}, "sampler": "hill_climb", "seed": 1,
         "n": 25, "path": "data/far.jsonl"},
    ]}
    p = tmp_path / "sources.json"
    p.write_text(json.dumps(m))
    return p


def spec_dict(methods=("mcts_transfer", "gp_ei"), seeds=(0, 1, 2), budget=6):
    return {"name": "t", "seeds": list(seeds), "budget": budget, "source_manifest": "sources.json",
            "problems": [{"id": "sph", "name": "sphere", "x_star": [4.0, 4.0]}],
            "methods": [{"method": m, "gp_restarts": 1} for m in methods]}


@pytest.fixture
def workspace(tmp_path):
    generate_from_manifest(write_manifest(tmp_path))
    (tmp_path / "spec.json").write_text(json.dumps(spec_dict()))
    return tmp_path


def test_run_cardinality_and_consistency(workspace):
    spec = ExperimentSpec.load(workspace / "spec.json")
    man = run_experiment(spec, workspace / "out", workers=1)
    traces = sorted((workspace / "out" / "traces").glob("*.csv"))
    assert len(traces) == 6 and man["failed"] == 0
    assert len(list((workspace / "out" / "traces").glob("*.json"))) == 6
    rows = read_summary(workspace / "out" / "summary.csv")
    assert len(rows) == 6 * 6
    with open(workspace / "out" / "traces" / "sph__gp_ei__seed1.csv") as fh:
        trace = list(csv.DictReader(fh))
    mine = [r for r in rows if r["method"] == "gp_ei" and r["seed"] == 1]
    # summary incumbents are the trace incumbents, turned back into the minimisation sense
    assert [-float(t["incumbent"]) for t in trace] == [r["incumbent"] for r in mine]
    side = json.loads((workspace / "out" / "traces" / "sph__mcts_transfer__seed0.json").read_text())
    assert side["task_ids"] == ["near", "far"] and side["tree"]["nodes"]


def test_rerun_is_byte_identical(workspace):
    spec = ExperimentSpec.load(workspace / "spec.json")
    run_experiment(spec, workspace / "a", workers=1)
    run_experiment(spec, workspace / "b", workers=2)
    assert (workspace / "a" / "summary.csv").read_bytes() == (workspace / "b" / "summary.csv").read_bytes()
    assert (workspace / "a" / "weights.csv").read_bytes() == (workspace / "b" / "weights.csv").read_bytes()


def test_missing_dataset_fails_validation(tmp_path):
    write_manifest(tmp_path)  # files never generated
    spec = ExperimentSpec.from_dict(spec_dict(), base_dir=tmp_path)
    errors = validate_spec(spec)
    assert any("missing" in e for e in errors)
    with pytest.raises(SpecError):
        run_experiment(spec, tmp_path / "out")
    assert not (tmp_path / "out" / "summary.csv").exists()


def test_spec_errors(tmp_path):
    with pytest.raises(SpecError):
        ExperimentSpec.from_dict({"seeds": [0]})
    with pytest.raises(SpecError):
        ExperimentSpec.from_dict({**spec_dict(), "colour": "red"})
    bad = ExperimentSpec.from_dict({**spec_dict(methods=("gp_ei",)), "source_manifest": None,
                                    "methods": [{"method": "nope"}]})
    assert validate_spec(bad)


def test_toml_spec(tmp_path):
    (tmp_path / "s.toml").write_text('seeds = [0]\nbudget = 3\n[[problems]]\nname = "sphere"\nx_star = [1.0, 1.0]\n'
                                     '[[methods]]\nmethod = "gp_ei"\n')
    spec = ExperimentSpec.load(tmp_path / "s.toml")
    assert validate_spec(spec) == []


def rows(table):
    return [{"problem": p, "seed": s, "t": t, "method": m, "regret": v, "status": "ok"}
            for (p, s, t, m, v) in table]


def test_ranks_strictly_better():
    summ = rows([("p", s, t, m, v) for s in range(3) for t in (1, 2)
                 for m, v in (("A", 0.1 * t), ("B", 1.0 + t))])
    table = aggregate_ranks(summ)
    assert np.all(table["A"]["mean"] == 1.0) and np.all(table["B"]["mean"] == 2.0)
    assert np.all(table["A"]["std"] == 0.0)


def test_ranks_ties_average():
    table = aggregate_ranks(rows([("p", 0, 1, "A", 0.5), ("p", 0, 1, "B", 0.5)]))
    assert table["A"]["mean"][0] == 1.5 == table["B"]["mean"][0]


def test_ranks_three_methods_by_hand():
    # seed 0: A<B<C -> 1,2,3 ; seed 1: C<A=B -> A 2.5, B 2.5, C 1
    summ = rows([("p", 0, 1, "A", 0.1), ("p", 0, 1, "B", 0.2), ("p", 0, 1, "C", 0.3),
                 ("p", 1, 1, "A", 0.5), ("p", 1, 1, "B", 0.5), ("p", 1, 1, "C", 0.0)])
    table = aggregate_ranks(summ)
    assert table["A"]["mean"][0] == 1.75 and table["B"]["mean"][0] == 2.25 and table["C"]["mean"][0] == 2.0
    assert table["A"]["std"][0] == 0.75


def test_ranks_need_two_methods():
    with pytest.raises(ValueError):
        aggregate_ranks(rows([("p", 0, 1, "A", 0.5)]))


def parse_polylines(svg):
    axes = re.search(r"axes: x \[(\S+), (\S+)\] y \[(\S+), (\S+)\] plot box (\S+) (\S+) (\S+) (\S+)", svg)
    x0, x1, y0, y1, mx, my, pw, ph = map(float, axes.groups())
    height = my * 2 + ph
    out = {}
    for name, pts in re.findall(r'<polyline class="mean" data-series="([^"]+)" points="([^"]+)"', svg):
        xy = np.array([[float(v) for v in p.split(",")] for p in pts.split()])
        t = x0 + (xy[:, 0] - mx) / pw * (x1 - x0)
        y = y0 + (height - my - xy[:, 1]) / ph * (y1 - y0)
        out[name] = (t, y)
    return out


def test_plots_match_csv(workspace):
    spec = ExperimentSpec.load(workspace / "spec.json")
    run_experiment(spec, workspace / "out", workers=1)
    notices = emit_plots(workspace / "out")
    assert notices == []
    plots = workspace / "out" / "plots"
    curves = parse_polylines((plots / "regret_sph.svg").read_text())
    with open(plots / "regret_sph.csv") as fh:
        data = list(csv.DictReader(fh))
    for name, (t, y) in curves.items():
        ref = [(int(r["t"]), float(r["mean"])) for r in data if r["series"] == name]
        assert np.allclose(t, [a for a, _ in ref], atol=1e-2)
        assert np.allclose(y, [b for _, b in ref], rtol=1e-3, atol=1e-3 * max(abs(b) for _, b in ref))
    assert (plots / "ranks.svg").exists() and (plots / "weights_sph_mcts_transfer.svg").exists()


def test_plot_skips(tmp_path):
    (tmp_path / "spec.json").write_text(json.dumps({**spec_dict(methods=("gp_ei",), seeds=(0,), budget=6),
                                                   "source_manifest": None}))
    spec = ExperimentSpec.load(tmp_path / "spec.json")
    run_experiment(spec, tmp_path / "out", workers=1)
    notices = emit_plots(tmp_path / "out")
    assert any("rank plot skipped" in n for n in notices)
    assert any("weight plot skipped" in n for n in notices)
    assert not (tmp_path / "out" / "plots" / "ranks.svg").exists()


def test_cli_exit_codes(workspace, monkeypatch, capsys):
    assert main(["validate", "--spec", str(workspace / "spec.json")]) == 0
    (workspace / "bad.json").write_text("{not json")
    assert main(["validate", "--spec", str(workspace / "bad.json")]) == 1
    assert main(["run", "--spec", str(workspace / "nope.json"), "--out", str(workspace / "x")]) == 1

    real = harness.run_method

    def flaky(objective, domain, sources, config):
        if config.method == "gp_ei" and config.seed == 1:
            raise RuntimeError("boom")
        return real(objective, domain, sources, config)

    monkeypatch.setattr(harness, "run_method", flaky)
    out = workspace / "partial"
    assert main(["run", "--spec", str(workspace / "spec.json"), "--out", str(out), "--workers", "1"]) == 2
    man = json.loads((out / "manifest.json").read_text())
    assert man["failed"] == 1
    failed = [r for r in read_summary(out / "summary.csv") if r["status"] == "failed"]
    assert len(failed) == 1 and failed[0]["method"] == "gp_ei"
    assert main(["aggregate", "--out", str(out)]) == 0
    assert (out / "ranks.csv").exists()
    assert main(["plot", "--out", str(out)]) == 0


def test_seed_offset(workspace):
    spec = ExperimentSpec.load(workspace / "spec.json")
    man = run_experiment(spec, workspace / "o", workers=1, seed_offset=10)
    assert sorted({r["seed"] for r in man["runs"]}) == [10, 11, 12]


def test_gen_data_cli(tmp_path, capsys):
    m = write_manifest(tmp_path)
    assert main(["gen-data", "--manifest", str(m)]) == 0
    assert (tmp_path / "data" / "near.jsonl").exists()
