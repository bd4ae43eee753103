"""Seeded matches, the utility function psi, and demonstration datasets."""
from __future__ import annotations

import hashlib
import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import cantstop as cs
from .dsl import Strategy
from .errors import ContractViolation, ParseError, StrategyFault

MAX_DECISIONS = 10_000
TRACE_FORMAT = "sketchsynth-trace/1"
DATASET_FORMAT = "sketchsynth-dataset/1"


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from any sequence of printable parts."""
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


@dataclass
class Step:
    state: cs.GameState
    action: object
    mover: int
    bust: bool = False


@dataclass
class MatchTrace:
    """Everything needed to replay one match: seed, starter, and every decision."""

    seed: int
    starter: int
    steps: list[Step]
    final: cs.GameState
    winner: int
    players: tuple[str, str] = ("p0", "p1")
    faults: tuple[int, int] = (0, 0)
    capped: bool = False


def play_match(strategy_a: Strategy, strategy_b: Strategy, seed: int, starter: int = 0,
               record: bool = True, max_decisions: int = MAX_DECISIONS) -> MatchTrace:
    """Play ``strategy_a`` (player 0) against ``strategy_b`` (player 1).

    A strategy that faults or returns an illegal action loses the match on
    the spot.  Past ``max_decisions`` decisions the player to move loses.
    """
    dice = random.Random(derive_seed(seed, "dice"))
    players = (strategy_a.spawn(derive_seed(seed, "player", 0)),
               strategy_b.spawn(derive_seed(seed, "player", 1)))
    state = cs.initial_state(dice, starter)
    steps = []
    faults = [0, 0]
    winner = None
    capped = False
    decisions = 0
    while state.winner is None:
        mover = state.to_move
        if decisions >= max_decisions:
            winner, capped = 1 - mover, True
            break
        actions = cs.legal_actions(state)
        try:
            action = players[mover].act(state, actions)
        except StrategyFault:
            action = None
        if action not in actions:
            faults[mover] += 1
            winner = 1 - mover
            break
        nxt = cs.apply_action(state, action, dice)
        if record:
            steps.append(Step(state, action, mover, action == "y" and nxt.to_move != mover))
        state = nxt
        decisions += 1
    if winner is None:
        winner = state.winner
    return MatchTrace(seed, starter, steps, state, winner,
                      (strategy_a.name, strategy_b.name), tuple(faults), capped)


def match_seed(base_seed: int, index: int) -> int:
    return derive_seed(base_seed, "match", index)


def match_starter(index: int) -> int:
    """Player 0 starts the even-indexed matches."""
    return index % 2


def _outcomes(candidate, opponent, base_seed, indices, max_decisions):
    return [play_match(candidate, opponent, match_seed(base_seed, i), match_starter(i),
                       record=False, max_decisions=max_decisions).winner == 0
            for i in indices]


def match_outcomes(candidate: Strategy, opponent: Strategy, n_matches: int, base_seed: int = 0,
                   workers: int = 1, max_decisions: int = MAX_DECISIONS) -> list[bool]:
    """Per-match win flags for ``candidate``, ordered by match index."""
    if n_matches < 1:
        raise ContractViolation("n_matches must be at least 1")
    if workers <= 1 or n_matches < 2:
        return _outcomes(candidate, opponent, base_seed, range(n_matches), max_decisions)
    chunks = [range(start, n_matches, workers) for start in range(workers)]
    results = [None] * n_matches
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_outcomes, candidate, opponent, base_seed, chunk, max_decisions)
                   for chunk in chunks]
        for chunk, fut in zip(chunks, futures):
            for i, won in zip(chunk, fut.result()):
                results[i] = won
    return results


def psi(candidate: Strategy, opponent: Strategy, n_matches: int, base_seed: int = 0,
        workers: int = 1, max_decisions: int = MAX_DECISIONS) -> float:
    """Fraction of ``n_matches`` seeded matches ``candidate`` wins against ``opponent``.

    Match ``i`` uses a seed derived from ``(base_seed, i)`` and starts with
    the candidate when ``i`` is even, so the value does not depend on how the
    matches are scheduled across workers.
    """
    wins = match_outcomes(candidate, opponent, n_matches, base_seed, workers, max_decisions)
    return sum(wins) / n_matches


# --- datasets ---------------------------------------------------------------


@dataclass
class Pair:
    state: cs.GameState
    action: object
    bust: bool = False


@dataclass
class DemoMatch:
    """The demonstrator's decisions in one match plus the board it ended on."""

    pairs: list[Pair]
    end_state: cs.GameState
    demonstrator: int
    seed: int = 0
    starter: int = 0
    winner: int | None = None
    players: tuple[str, str] = ("p0", "p1")


@dataclass
class DataSet:
    matches: list[DemoMatch] = field(default_factory=list)
    label: str = ""

    def __len__(self):
        return len(self.matches)

    @property
    def n_pairs(self) -> int:
        return sum(len(m.pairs) for m in self.matches)

    def pairs(self):
        for m in self.matches:
            yield from m.pairs


SELF_PLAY_WINNER_ONLY = "self_play_winner_only"
VERSUS_KEEP_A = "versus_keep_a"


def demo_from_trace(trace: MatchTrace, demonstrator: int) -> DemoMatch:
    pairs = [Pair(s.state, s.action, s.bust) for s in trace.steps if s.mover == demonstrator]
    return DemoMatch(pairs, trace.final, demonstrator, trace.seed, trace.starter,
                     trace.winner, trace.players)


def generate_dataset(strategy_a: Strategy, strategy_b: Strategy | None, n_matches: int,
                     mode: str = SELF_PLAY_WINNER_ONLY, base_seed: int = 0,
                     label: str = "") -> DataSet:
    """Play ``n_matches`` and keep the demonstrator's pairs from each.

    In self-play mode both seats play ``strategy_a`` and the winner of each
    match is the demonstrator; in versus mode ``strategy_a`` is.
    """
    if mode == SELF_PLAY_WINNER_ONLY:
        if strategy_b is not None and strategy_b is not strategy_a:
            raise ContractViolation("self-play datasets use a single strategy")
        strategy_b = strategy_a
    elif mode != VERSUS_KEEP_A:
        raise ContractViolation(f"unknown dataset mode {mode!r}")
    elif strategy_b is None:
        raise ContractViolation("versus mode needs an opponent")
    data = DataSet(label=label or f"{strategy_a.name}-{mode}")
    for i in range(n_matches):
        trace = play_match(strategy_a, strategy_b, match_seed(base_seed, i), match_starter(i))
        demonstrator = trace.winner if mode == SELF_PLAY_WINNER_ONLY else 0
        data.matches.append(demo_from_trace(trace, demonstrator))
    return data


def validate_dataset(data: DataSet) -> None:
    """Raise ContractViolation if any recorded action was illegal at its state."""
    for mi, m in enumerate(data.matches):
        for pi, p in enumerate(m.pairs):
            if p.action not in cs.legal_actions(p.state):
                raise ContractViolation(f"match {mi} pair {pi}: illegal action {p.action!r}")


def replay_trace(trace: MatchTrace) -> cs.GameState:
    """Re-apply the recorded actions with the recorded seed; checks every state."""
    dice = random.Random(derive_seed(trace.seed, "dice"))
    state = cs.initial_state(dice, trace.starter)
    for i, step in enumerate(trace.steps):
        if state != step.state:
            raise ContractViolation(f"step {i}: replayed state differs from the record")
        state = cs.apply_action(state, step.action, dice)
    if trace.final != state and not (trace.capped or any(trace.faults)):
        raise ContractViolation("replayed final state differs from the record")
    if state.winner is not None and state.winner != trace.winner:
        raise ContractViolation("replayed winner differs from the record")
    return state


# --- files ------------------------------------------------------------------


def _dump(obj, fh):
    fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def _read_lines(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def save_dataset(data: DataSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        _dump({"format": DATASET_FORMAT, "label": data.label, "matches": len(data)}, fh)
        for i, m in enumerate(data.matches):
            _dump({"type": "match", "index": i, "seed": m.seed, "starter": m.starter,
                   "players": list(m.players), "demonstrator": m.demonstrator,
                   "winner": m.winner, "end_state": cs.to_record(m.end_state)}, fh)
            for p in m.pairs:
                _dump({"type": "pair", "match": i, "state": cs.to_record(p.state),
                       "action": cs.action_to_json(p.action), "bust": p.bust}, fh)


def load_dataset(path) -> DataSet:
    rows = _read_lines(path)
    if not rows or rows[0].get("format") != DATASET_FORMAT:
        raise ParseError(f"{path}: not a {DATASET_FORMAT} file")
    data = DataSet(label=rows[0].get("label", ""))
    for row in rows[1:]:
        if row["type"] == "match":
            data.matches.append(DemoMatch([], cs.from_record(row["end_state"]), row["demonstrator"],
                                          row["seed"], row["starter"], row["winner"],
                                          tuple(row["players"])))
        elif row["type"] == "pair":
            if not data.matches or row["match"] != len(data.matches) - 1:
                raise ParseError(f"{path}: pair outside its match block")
            data.matches[-1].pairs.append(Pair(cs.from_record(row["state"]),
                                               cs.action_from_json(row["action"]), row["bust"]))
        else:
            raise ParseError(f"{path}: unknown row type {row['type']!r}")
    return data


def save_traces(traces: list[MatchTrace], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        _dump({"format": TRACE_FORMAT, "matches": len(traces)}, fh)
        for i, t in enumerate(traces):
            _dump({"type": "match", "index": i, "seed": t.seed, "starter": t.starter,
                   "players": list(t.players), "winner": t.winner, "faults": list(t.faults),
                   "capped": t.capped, "end_state": cs.to_record(t.final)}, fh)
            for s in t.steps:
                _dump({"type": "step", "match": i, "mover": s.mover, "state": cs.to_record(s.state),
                       "action": cs.action_to_json(s.action), "bust": s.bust}, fh)


def load_traces(path) -> list[MatchTrace]:
    rows = _read_lines(path)
    if not rows or rows[0].get("format") != TRACE_FORMAT:
        raise ParseError(f"{path}: not a {TRACE_FORMAT} file")
    traces = []
    for row in rows[1:]:
        if row["type"] == "match":
            traces.append(MatchTrace(row["seed"], row["starter"], [], cs.from_record(row["end_state"]),
                                     row["winner"], tuple(row["players"]), tuple(row["faults"]),
                                     row["capped"]))
        elif row["type"] == "step":
            if not traces or row["match"] != len(traces) - 1:
                raise ParseError(f"{path}: step outside its match block")
            traces[-1].steps.append(Step(cs.from_record(row["state"]), cs.action_from_json(row["action"]),
                                         row["mover"], row["bust"]))
        else:
            raise ParseError(f"{path}: unknown row type {row['type']!r}")
    return traces
