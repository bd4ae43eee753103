"""Plumbing shared by the SA and UCT searches: budgets, objectives, trajectories."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

from .errors import ContractViolation, SketchSynthError
from .grammar import Node, size, to_sexpr

CSV_COLUMNS = ("elapsed_s", "iteration", "phase", "temperature", "c_score", "psi_score",
               "best_psi", "program_len")
CSV_VERSION = "1"


@dataclass
class SearchConfig:
    """Every synthesis hyperparameter; defaults are the published settings."""

    alpha: float = 0.9
    beta: float = 200.0
    t_initial: float = 100.0
    epsilon: float = 1.0
    exploration: float = 10.0
    depth_limit: int = 15
    seed: int = 0
    psi_matches: int = 1000
    sketch_psi_matches: int = 200
    rollout_iterations: int = 200
    sketch_seconds: float | None = None
    sketch_iterations: int | None = None
    br_seconds: float | None = None
    br_iterations: int | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.alpha > 0:
            raise ContractViolation("alpha must be positive")
        if not self.beta > 0:
            raise ContractViolation("beta must be positive")
        if not self.epsilon > 0:
            raise ContractViolation("epsilon must be positive")
        if not self.t_initial > self.epsilon:
            raise ContractViolation("t_initial must exceed epsilon")
        if self.exploration < 0:
            raise ContractViolation("exploration constant must be non-negative")
        if self.depth_limit < 1:
            raise ContractViolation("depth_limit must be at least 1")
        for name in ("psi_matches", "sketch_psi_matches", "rollout_iterations"):
            if getattr(self, name) < 1:
                raise ContractViolation(f"{name} must be at least 1")
        for name in ("sketch_seconds", "sketch_iterations", "br_seconds", "br_iterations"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ContractViolation(f"{name} must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def sketch_budget(self) -> "Budget":
        return Budget(self.sketch_seconds, self.sketch_iterations)

    def br_budget(self) -> "Budget":
        return Budget(self.br_seconds, self.br_iterations)


class Budget:
    """Stops a search after ``seconds`` of wall clock or ``iterations`` ticks.

    With neither set the budget never runs out; callers must then rely on the
    search's own stopping rule.
    """

    def __init__(self, seconds: float | None = None, iterations: int | None = None):
        self.seconds = seconds
        self.iterations = iterations
        self.used = 0
        self.started = None

    def start(self) -> "Budget":
        if self.started is None:
            self.started = time.monotonic()
        return self

    @property
    def elapsed(self) -> float:
        return 0.0 if self.started is None else time.monotonic() - self.started

    def tick(self, n: int = 1):
        self.used += n

    def exhausted(self) -> bool:
        if self.iterations is not None and self.used >= self.iterations:
            return True
        if self.seconds is not None and self.elapsed >= self.seconds:
            return True
        return False

    @property
    def bounded(self) -> bool:
        return self.seconds is not None or self.iterations is not None


class Objective:
    """Caches an evaluation function by program and maps faults to ``-inf``.

    ``evaluations`` counts real calls of the wrapped function; ``calls``
    counts every lookup.
    """

    def __init__(self, fn: Callable[[Node], float], name: str = "objective"):
        self.fn = fn
        self.name = name
        self.cache: dict[str, float] = {}
        self.evaluations = 0
        self.calls = 0
        self.faults = 0

    def __call__(self, program: Node) -> float:
        self.calls += 1
        key = program.key()
        value = self.cache.get(key)
        if value is None:
            self.evaluations += 1
            try:
                value = float(self.fn(program))
            except SketchSynthError:
                self.faults += 1
                value = -math.inf
            self.cache[key] = value
        return value

    def seed(self, program: Node, value: float):
        """Record a value computed elsewhere so it is never recomputed."""
        self.cache[program.key()] = value

    @property
    def cache_hits(self) -> int:
        return self.calls - self.evaluations


@dataclass
class Trajectory:
    """Timestamped search records, written out with a frozen CSV schema."""

    records: list[dict] = field(default_factory=list)
    started: float = field(default_factory=time.monotonic)
    offset: float = 0.0

    def log(self, **row):
        row.setdefault("elapsed_s", round(self.offset + time.monotonic() - self.started, 4))
        program = row.pop("program", None)
        if program is not None:
            row.setdefault("program_len", size(program))
            row["program"] = to_sexpr(program)
        self.records.append(row)

    def extend(self, other: "Trajectory"):
        self.records.extend(other.records)

    def write_csv(self, path, manifest: str | None = None):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# sketchsynth-trajectory/{CSV_VERSION}\n")
            if manifest:
                fh.write(f"# manifest: {manifest}\n")
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore")
            writer.writeheader()
            for rec in self.records:
                writer.writerow({k: _fmt(rec.get(k)) for k in CSV_COLUMNS})


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "-inf" if value < 0 else "inf"
        return f"{value:.6g}"
    return value


def read_trajectory_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))
