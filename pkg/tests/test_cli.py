import csv
import io
import json
from argparse import Namespace

import pytest

from sketchsynth.cli import EXIT_CONTRACT, EXIT_IO, EXIT_OK, EXIT_USAGE, build_parser, cmd_record, main, resolve_synth
from sketchsynth.evaluation import load_dataset, validate_dataset
from sketchsynth.search import read_trajectory_csv

FAST = ["--matches", "10", "--sketch-matches", "4", "--workers", "1"]


def synth_args(*argv):
    return build_parser().parse_args(["synth", *argv])


def test_defaults():
    options, config = resolve_synth(synth_args("--budget-iterations", "60"))
    assert options["method"] == "sa" and options["mode"] == "sketch-o"
    assert (config.alpha, config.beta, config.t_initial, config.epsilon) == (0.9, 200, 100, 1)
    assert config.exploration == 10 and config.psi_matches == 1000
    assert config.sketch_iterations == 10 and config.br_iterations == 50


def test_config_file_then_flags(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"beta": 50, "alpha": 0.5, "method": "uct"}))
    options, config = resolve_synth(synth_args("--config", str(path), "--beta", "200",
                                               "--budget-seconds", "6"))
    assert config.beta == 200 and config.alpha == 0.5 and options["method"] == "uct"
    assert config.sketch_seconds == pytest.approx(1) and config.br_seconds == pytest.approx(5)


def test_unknown_config_key(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"temperature": 3}))
    assert main(["synth", "--config", str(path), "--budget-iterations", "5"]) == EXIT_USAGE


@pytest.mark.parametrize("argv", [
    ["synth", "--alpha", "-1", "--budget-iterations", "5"],
    ["synth", "--mode", "baseline"],
    ["synth", "--method", "ga", "--budget-iterations", "5"],
    ["eval", "--a", "ga", "--n", "0"],
    ["frobnicate"],
])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_missing_files_are_io_errors(tmp_path):
    assert main(["eval", "--a", str(tmp_path / "nope.sexpr"), "--n", "2"]) == EXIT_IO
    assert main(["replay", str(tmp_path / "nope.jsonl")]) == EXIT_IO


def test_sketch_mode_without_dataset(tmp_path):
    code = main(["synth", "--budget-iterations", "6", "--out-dir", str(tmp_path), *FAST])
    assert code == EXIT_CONTRACT


@pytest.mark.parametrize("method", ["sa", "uct"])
def test_synth_end_to_end(tmp_path, capsys, method):
    data = tmp_path / "ga.jsonl"
    assert main(["dataset", "--n", "2", "--out", str(data)]) == EXIT_OK
    out = tmp_path / "run"
    code = main(["synth", "--method", method, "--dataset", str(data), "--budget-iterations", "12",
                 "--out-dir", str(out), "--seed", "4", *FAST])
    assert code == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["format"] == "sketchsynth-run/1"
    assert manifest["config"]["seed"] == 4 and "result" in manifest
    best = (out / "best.sexpr").read_text()
    assert best.startswith("; manifest: manifest.json")
    rows = read_trajectory_csv(out / "trajectory.csv")
    assert rows and {r["phase"] for r in rows} <= {"sketch", "sketch_final", "br"}
    assert (out / "checkpoint.sexpr").exists()
    if method == "uct":
        trees = json.loads((out / "tree_stats.json").read_text())["searches"]
        assert [t["objective"] for t in trees] == ["clone", "psi"]
        assert all({"nodes", "max_depth", "cache_hits"} <= set(t) for t in trees)
    else:
        assert not (out / "tree_stats.json").exists()

    # the synthesized program plays
    capsys.readouterr()
    assert main(["eval", "--a", str(out / "best.sexpr"), "--n", "4", "--workers", "1"]) == EXIT_OK
    assert 0.0 <= float(capsys.readouterr().out) <= 1.0


def test_report_merges_runs(tmp_path, capsys):
    outs = []
    for seed in (1, 2):
        out = tmp_path / f"run{seed}"
        assert main(["synth", "--mode", "baseline", "--budget-iterations", "8", "--seed", str(seed),
                     "--out-dir", str(out), *FAST]) == EXIT_OK
        outs.append(str(out / "trajectory.csv"))
    table = tmp_path / "report.csv"
    assert main(["report", *outs, "--out", str(table)]) == EXIT_OK
    with open(table) as fh:
        rows = list(csv.DictReader(fh))
    assert {r["run"] for r in rows} == set(outs)
    for run in outs:
        best = [float(r["best_psi"]) for r in rows if r["run"] == run]
        assert best == sorted(best)
    elapsed = [float(r["elapsed_s"]) for r in rows]
    assert elapsed == sorted(elapsed)


def test_eval_ga_against_random(capsys):
    assert main(["eval", "--a", "ga", "--b", "random", "--n", "20", "--workers", "1"]) == EXIT_OK
    assert float(capsys.readouterr().out) > 0.5


def test_dataset_traces_replay(tmp_path, capsys):
    data, traces = tmp_path / "d.jsonl", tmp_path / "t.jsonl"
    assert main(["dataset", "--strategy", "random", "--opponent", "ga", "--n", "3",
                 "--out", str(data), "--traces", str(traces)]) == EXIT_OK
    assert len(load_dataset(data)) == 3
    capsys.readouterr()
    assert main(["replay", str(traces)]) == EXIT_OK
    assert "3 traces verified" in capsys.readouterr().out


def test_tampered_trace_is_contract_violation(tmp_path):
    traces = tmp_path / "t.jsonl"
    assert main(["eval", "--a", "ga", "--b", "random", "--n", "1", "--traces", str(traces)]) == EXIT_OK
    lines = traces.read_text().splitlines()
    record = json.loads(lines[1])
    record["winner"] = 1 - record["winner"]
    lines[1] = json.dumps(record)
    traces.write_text("\n".join(lines) + "\n")
    assert main(["replay", str(traces)]) == EXIT_CONTRACT


def test_record_with_scripted_input(tmp_path):
    out = tmp_path / "human.jsonl"
    stdin = io.StringIO("no such move\n" + "0\n" * 5000)
    stdout = io.StringIO()
    args = Namespace(opponent="ga", n=1, seed=0, difficulty="rule28", out=str(out))
    assert cmd_record(args, stdin, stdout) == EXIT_OK
    assert "not a legal choice" in stdout.getvalue()
    data = load_dataset(out)
    validate_dataset(data)
    assert data.matches[0].demonstrator == 0 and data.n_pairs > 0


def test_record_input_ends(tmp_path):
    args = Namespace(opponent="ga", n=1, seed=0, difficulty="rule28", out=str(tmp_path / "h.jsonl"))
    with pytest.raises(EOFError):
        cmd_record(args, io.StringIO("0\n"), io.StringIO())
