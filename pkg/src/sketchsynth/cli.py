"""Command line: ``sketchsynth {synth,eval,dataset,record,replay,report}``."""
from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys
from pathlib import Path

from . import cantstop as cs
from .dsl import (DEFAULT_DIFFICULTY, DIFFICULTY, ProgramStrategy, Strategy, ga_strategy,
                  parse_strategy_text, program_to_file_text, random_strategy)
from .errors import ContractViolation, ParseError, SketchSynthError
from .evaluation import (SELF_PLAY_WINNER_ONLY, VERSUS_KEEP_A, DataSet, demo_from_trace,
                         derive_seed, generate_dataset, load_dataset, load_traces, match_seed,
                         match_starter, play_match, psi, replay_trace, save_dataset, save_traces,
                         validate_dataset)
from .search import SearchConfig, read_trajectory_csv
from .synthesis import METHODS, MODES, synthesize

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_CONTRACT = 0, 2, 3, 4
MANIFEST_FORMAT = "sketchsynth-run/1"
DEFAULT_SKETCH_SHARE = 1 / 6


class UsageError(Exception):
    pass


# --- argument parsing -------------------------------------------------------

def _positive(kind):
    def check(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return check


def _non_negative(kind):
    def check(text):
        value = kind(text)
        if value < 0:
            raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
        return value
    return check


def _share(text):
    value = float(text)
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return value


# Flags that map onto SearchConfig fields.
CONFIG_FLAGS = {
    "alpha": ("--alpha", _positive(float)),
    "beta": ("--beta", _positive(float)),
    "t_initial": ("--t-initial", _positive(float)),
    "epsilon": ("--epsilon", _positive(float)),
    "exploration": ("--exploration", _non_negative(float)),
    "depth_limit": ("--depth-limit", _positive(int)),
    "seed": ("--seed", int),
    "psi_matches": ("--matches", _positive(int)),
    "sketch_psi_matches": ("--sketch-matches", _positive(int)),
    "rollout_iterations": ("--rollout-iterations", _positive(int)),
    "sketch_seconds": ("--sketch-seconds", _non_negative(float)),
    "sketch_iterations": ("--sketch-iterations", _non_negative(int)),
    "br_seconds": ("--br-seconds", _non_negative(float)),
    "br_iterations": ("--br-iterations", _non_negative(int)),
}

# Other synth options that a config file may also set, with their defaults.
SYNTH_DEFAULTS = {
    "method": "sa", "mode": "sketch-o", "score": "observation", "dataset": None,
    "opponent": "ga", "difficulty": DEFAULT_DIFFICULTY, "psi_seed": 0, "workers": None,
    "out_dir": "runs/latest", "budget_seconds": None, "budget_iterations": None,
    "sketch_share": DEFAULT_SKETCH_SHARE,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sketchsynth", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a Can't Stop strategy",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="JSON file with defaults for any synth option")
    p.add_argument("--method", choices=sorted(METHODS))
    p.add_argument("--mode", choices=list(MODES))
    p.add_argument("--score", choices=["action", "observation"],
                   help="cloning score for bc-only and lexi modes")
    p.add_argument("--dataset", help="JSON-lines dataset for the sketch modes")
    p.add_argument("--opponent", help="ga, random, or a program file")
    p.add_argument("--difficulty", choices=sorted(DIFFICULTY))
    p.add_argument("--psi-seed", type=int, dest="psi_seed", help="base seed of the psi matches")
    p.add_argument("--workers", type=_positive(int))
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--budget-seconds", type=_positive(float), dest="budget_seconds",
                   help="total wall-clock budget, split by --sketch-share")
    p.add_argument("--budget-iterations", type=_positive(int), dest="budget_iterations",
                   help="total iteration budget, split by --sketch-share")
    p.add_argument("--sketch-share", type=_share, dest="sketch_share")
    for name, (flag, kind) in CONFIG_FLAGS.items():
        p.add_argument(flag, type=kind, dest=name)

    p = sub.add_parser("eval", help="win rate of strategy A against strategy B")
    p.add_argument("--a", required=True, help="ga, random, or a program file")
    p.add_argument("--b", default="ga", help="ga, random, or a program file")
    p.add_argument("--n", "--matches", type=_positive(int), default=1000, dest="n")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive(int), default=None)
    p.add_argument("--difficulty", choices=sorted(DIFFICULTY), default=DEFAULT_DIFFICULTY)
    p.add_argument("--traces", help="also write the match traces to this file")

    p = sub.add_parser("dataset", help="generate a demonstration dataset")
    p.add_argument("--strategy", default="ga", help="ga, random, or a program file")
    p.add_argument("--opponent", default=None, help="versus mode: the other seat")
    p.add_argument("--n", "--matches", type=_positive(int), default=3, dest="n")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--difficulty", choices=sorted(DIFFICULTY), default=DEFAULT_DIFFICULTY)
    p.add_argument("--out", required=True)
    p.add_argument("--traces", help="also write the full match traces to this file")

    p = sub.add_parser("record", help="play matches at the terminal and save your decisions")
    p.add_argument("--opponent", default="ga", help="ga, random, or a program file")
    p.add_argument("--n", "--matches", type=_positive(int), default=1, dest="n")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--difficulty", choices=sorted(DIFFICULTY), default=DEFAULT_DIFFICULTY)
    p.add_argument("--out", required=True)

    p = sub.add_parser("replay", help="verify trace files by replaying them")
    p.add_argument("paths", nargs="+")

    p = sub.add_parser("report", help="merge trajectory CSVs into one win-rate-over-time table")
    p.add_argument("paths", nargs="+")
    p.add_argument("--out", help="write here instead of stdout")
    return parser


def resolve_synth(args: argparse.Namespace) -> tuple[dict, SearchConfig]:
    """Merge defaults, the config file and flags (in increasing priority)."""
    given = vars(args).copy()
    given.pop("command", None)
    file_values = {}
    if "config" in given:
        path = given.pop("config")
        try:
            with open(path, encoding="utf-8") as fh:
                file_values = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        if not isinstance(file_values, dict):
            raise UsageError(f"{path}: config must be a JSON object")
        known = set(SYNTH_DEFAULTS) | set(CONFIG_FLAGS)
        unknown = set(file_values) - known
        if unknown:
            raise UsageError(f"{path}: unknown config keys {sorted(unknown)}")
    options = dict(SYNTH_DEFAULTS)
    config_values = {}
    for source in (file_values, given):
        for key, value in source.items():
            (config_values if key in CONFIG_FLAGS else options)[key] = value
    if options["method"] not in METHODS:
        raise UsageError(f"unknown method {options['method']!r}")
    if options["mode"] not in MODES:
        raise UsageError(f"unknown mode {options['mode']!r}")
    share = options["sketch_share"]
    if options["budget_seconds"] is not None:
        total = options["budget_seconds"]
        config_values.update(sketch_seconds=total * share, br_seconds=total * (1 - share))
    if options["budget_iterations"] is not None:
        total = options["budget_iterations"]
        sketch = int(round(total * share))
        config_values.update(sketch_iterations=sketch, br_iterations=total - sketch)
    try:
        config = SearchConfig(**config_values)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc
    except ContractViolation as exc:
        raise UsageError(str(exc)) from exc
    if options["mode"].startswith("sketch-"):
        if not (config.sketch_budget().bounded and config.br_budget().bounded):
            raise UsageError("sketch modes need both a sketch and a BR budget")
    elif not (config.sketch_budget().bounded or config.br_budget().bounded):
        raise UsageError("set --budget-seconds or --budget-iterations")
    if options["workers"] is None:
        options["workers"] = os.cpu_count() or 1
    return options, config


# --- helpers ----------------------------------------------------------------

def load_program(path) -> object:
    with open(path, encoding="utf-8") as fh:
        text = "\n".join(line for line in fh if not line.lstrip().startswith(";"))
    return parse_strategy_text(text)


def make_strategy(spec: str, difficulty: str = DEFAULT_DIFFICULTY, seed: int = 0) -> Strategy:
    if spec == "ga":
        return ga_strategy(difficulty)
    if spec == "random":
        return random_strategy(seed)
    return ProgramStrategy(load_program(spec), difficulty)


def new_manifest(command: str, **fields) -> dict:
    return {"format": MANIFEST_FORMAT, "command": command,
            "started": datetime.datetime.now(datetime.timezone.utc).isoformat(), **fields}


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_program(path, program, manifest_name):
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(f"; manifest: {manifest_name}\n" + program_to_file_text(program), encoding="utf-8")
    os.replace(tmp, path)


# --- subcommands ------------------------------------------------------------

def cmd_synth(args) -> int:
    options, config = resolve_synth(args)
    out = Path(options["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    dataset = load_dataset(options["dataset"]) if options["dataset"] else None
    if dataset is not None:
        validate_dataset(dataset)
    opponent = make_strategy(options["opponent"], options["difficulty"],
                             derive_seed(config.seed, "opponent"))
    paths = {"manifest": out / "manifest.json", "trajectory": out / "trajectory.csv",
             "best": out / "best.sexpr", "checkpoint": out / "checkpoint.sexpr"}
    manifest = new_manifest("synth", config=config.to_dict(), options=options,
                            seeds={"search": config.seed, "psi": options["psi_seed"]},
                            inputs={"dataset": options["dataset"]},
                            outputs={k: str(v) for k, v in paths.items()})
    _write_json(paths["manifest"], manifest)

    def checkpoint(program, iteration):
        _write_program(paths["checkpoint"], program, paths["manifest"].name)

    try:
        result = synthesize(options["method"], options["mode"], config, opponent, dataset,
                            options["score"], psi_seed=options["psi_seed"],
                            workers=options["workers"], difficulty=options["difficulty"],
                            checkpoint=checkpoint)
    except KeyboardInterrupt:
        print(f"interrupted; latest incumbent in {paths['checkpoint']}", file=sys.stderr)
        return 130
    result.trajectory.write_csv(paths["trajectory"], manifest=paths["manifest"].name)
    _write_program(paths["best"], result.program, paths["manifest"].name)
    if "trees" in result.stats:
        tree_path = out / "tree_stats.json"
        _write_json(tree_path, {"manifest": paths["manifest"].name,
                                "searches": result.stats["trees"]})
        manifest["outputs"]["tree_stats"] = str(tree_path)
    manifest["result"] = {"psi": result.psi, "sketch_psi": result.sketch_psi,
                          "stats": result.stats}
    _write_json(paths["manifest"], manifest)
    print(f"psi={result.psi:.4f} best={paths['best']}")
    return EXIT_OK


def cmd_eval(args) -> int:
    a = make_strategy(args.a, args.difficulty, derive_seed(args.seed, "a"))
    b = make_strategy(args.b, args.difficulty, derive_seed(args.seed, "b"))
    workers = args.workers or os.cpu_count() or 1
    if args.traces:
        traces = [play_match(a, b, match_seed(args.seed, i), match_starter(i))
                  for i in range(args.n)]
        save_traces(traces, args.traces)
        rate = sum(t.winner == 0 for t in traces) / args.n
    else:
        rate = psi(a, b, args.n, args.seed, workers)
    print(f"{rate:.4f}")
    return EXIT_OK


def cmd_dataset(args) -> int:
    a = make_strategy(args.strategy, args.difficulty, derive_seed(args.seed, "a"))
    if args.opponent is None:
        data = generate_dataset(a, None, args.n, SELF_PLAY_WINNER_ONLY, args.seed)
    else:
        b = make_strategy(args.opponent, args.difficulty, derive_seed(args.seed, "b"))
        data = generate_dataset(a, b, args.n, VERSUS_KEEP_A, args.seed)
    save_dataset(data, args.out)
    if args.traces:
        b = a if args.opponent is None else b
        save_traces([play_match(a, b, match_seed(args.seed, i), match_starter(i))
                     for i in range(args.n)], args.traces)
    print(f"{len(data)} matches, {data.n_pairs} pairs -> {args.out}")
    return EXIT_OK


def render(state: cs.GameState) -> str:
    lines = []
    for c in cs.COLUMNS:
        owner = state.conquered[c]
        tag = f" won by P{owner}" if owner >= 0 else ""
        neutral = f" neutral@{state.neutral[c]}" if state.neutral[c] else ""
        lines.append(f"  col {c:2d} (top {cs.HEIGHT[c]:2d}): you {state.permanent[0][c]:2d}"
                     f"  opp {state.permanent[1][c]:2d}{neutral}{tag}")
    return "\n".join(lines)


class _Human(Strategy):
    name = "human"

    def __init__(self, stdin, stdout):
        self.stdin, self.stdout = stdin, stdout

    def act(self, state, actions):
        out = self.stdout
        print(render(state), file=out)
        if state.phase == cs.YESNO:
            print("roll again? " + "  ".join(f"[{i}] {a}" for i, a in enumerate(actions)), file=out)
        else:
            print(f"dice {state.dice}: " + "  ".join(
                f"[{i}] {'+'.join(map(str, a))}" for i, a in enumerate(actions)), file=out)
        while True:
            print("> ", end="", file=out, flush=True)
            line = self.stdin.readline()
            if not line:
                raise EOFError("input ended")
            choice = line.strip().lower()
            if choice.isdigit() and int(choice) < len(actions):
                return actions[int(choice)]
            for a in actions:
                if choice == cs.action_to_json(a) or choice == str(a) or (
                        not isinstance(a, str) and choice == "+".join(map(str, a))):
                    return a
            print(f"not a legal choice: {choice!r}", file=out)


def cmd_record(args, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    human = _Human(stdin, stdout)
    opponent = make_strategy(args.opponent, args.difficulty, derive_seed(args.seed, "opponent"))
    data = DataSet(label="human")
    for i in range(args.n):
        print(f"== match {i + 1} of {args.n}; you are P0 ==", file=stdout)
        trace = play_match(human, opponent, match_seed(args.seed, i), match_starter(i))
        print(f"winner: P{trace.winner}", file=stdout)
        data.matches.append(demo_from_trace(trace, 0))
    validate_dataset(data)
    save_dataset(data, args.out)
    print(f"{data.n_pairs} decisions -> {args.out}", file=stdout)
    return EXIT_OK


def cmd_replay(args) -> int:
    total = 0
    for path in args.paths:
        for i, trace in enumerate(load_traces(path)):
            try:
                replay_trace(trace)
            except ContractViolation as exc:
                raise ContractViolation(f"{path} match {i}: {exc}") from exc
            total += 1
    print(f"{total} traces verified")
    return EXIT_OK


REPORT_COLUMNS = ("run", "elapsed_s", "iteration", "phase", "psi_score", "best_psi", "c_score")


def cmd_report(args) -> int:
    rows = []
    for path in args.paths:
        for rec in read_trajectory_csv(path):
            if rec.get("best_psi", "") == "":
                continue
            rows.append({"run": path, **{k: rec.get(k, "") for k in REPORT_COLUMNS[1:]}})
    rows.sort(key=lambda r: (float(r["elapsed_s"] or 0), r["run"]))
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "eval": cmd_eval, "dataset": cmd_dataset, "record": cmd_record,
            "replay": cmd_replay, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"sketchsynth: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ParseError, EOFError) as exc:
        print(f"sketchsynth: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ContractViolation, SketchSynthError) as exc:
        print(f"sketchsynth: contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
