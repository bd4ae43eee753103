"""The sketch-search / BR-search driver shared by the SA and UCT syntheses.

A *searcher* is a callable ``search(objective, budget, seed, seed_value, rng,
on_best) -> (program, score)``; ``seed`` is a complete program to start from
(or None) and ``on_best(program, score, iteration, temperature)`` must fire on
every new incumbent.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable

from .errors import ContractViolation
from .grammar import Node
from .search import Budget, Objective, SearchConfig, Trajectory

BASELINE = "baseline"
SKETCH = "sketch"
BC_ONLY = "bc_only"
LEXICOGRAPHIC = "lexicographic"
MODES = (BASELINE, SKETCH, BC_ONLY, LEXICOGRAPHIC)


@dataclass
class SynthesisResult:
    program: Node
    psi: float
    trajectory: Trajectory
    sketch_program: Node | None = None
    sketch_psi: float | None = None
    stats: dict = field(default_factory=dict)


class _Tracker:
    """Logs incumbents and hands each one to the checkpoint hook."""

    def __init__(self, trajectory, checkpoint):
        self.trajectory = trajectory
        self.checkpoint = checkpoint
        self.best_psi = -math.inf

    def log(self, phase, iteration, temp, program, c_score=None, psi_score=None):
        if psi_score is not None and psi_score > self.best_psi:
            self.best_psi = psi_score
        self.trajectory.log(phase=phase, iteration=iteration, temperature=temp, c_score=c_score,
                            psi_score=psi_score,
                            best_psi=None if math.isinf(self.best_psi) else self.best_psi,
                            program=program)
        if self.checkpoint:
            self.checkpoint(program, iteration)


def total_budget(config: SearchConfig) -> Budget:
    """Sketch plus BR budget, for the single-phase modes."""
    def add(a, b):
        return None if a is None and b is None else (a or 0) + (b or 0)
    return Budget(add(config.sketch_seconds, config.br_seconds),
                  add(config.sketch_iterations, config.br_iterations))


def lexicographic(psi_value: float, c_value: float, n_matches: int) -> float:
    """Order by psi, then by the cloning score; stays inside [0, 1].

    Psi moves in steps of ``1 / n_matches`` so a cloning bonus below one step
    can only break ties.
    """
    if math.isinf(psi_value):
        return psi_value
    bonus = max(c_value, 0.0) / (n_matches + 1)
    return (psi_value + bonus) * (n_matches + 1) / (n_matches + 2)


def run_pipeline(search: Callable, dataset, clone_score: Callable | None,
                 psi_fn: Callable[[Node, int], float], config: SearchConfig,
                 mode: str = SKETCH, *, checkpoint: Callable | None = None) -> SynthesisResult:
    """Run one synthesis in ``mode``.

    ``clone_score(dataset, program)`` and ``psi_fn(program, n_matches)``
    return floats.  ``baseline`` optimizes psi from scratch; ``sketch`` runs
    sketch-search on the cloning score then BR-search on psi seeded with the
    sketch; ``bc_only`` runs sketch-search for the whole budget;
    ``lexicographic`` optimizes psi with the cloning score as tie-breaker.
    """
    if mode not in MODES:
        raise ContractViolation(f"unknown mode {mode!r}")
    if mode != BASELINE and (dataset is None or len(dataset) == 0 or clone_score is None):
        raise ContractViolation(f"mode {mode!r} needs a non-empty dataset and a cloning score")
    rng = random.Random(config.seed)
    trajectory = Trajectory()
    tracker = _Tracker(trajectory, checkpoint)
    full = config.psi_matches

    psi_full = Objective(lambda p: psi_fn(p, full), "psi")
    cloner = None
    if clone_score is not None and dataset is not None and len(dataset):
        cloner = Objective(lambda p: clone_score(dataset, p), "clone")

    if mode in (BASELINE, LEXICOGRAPHIC):
        budget = total_budget(config)
        if mode == BASELINE:
            objective = psi_full
        else:
            objective = Objective(lambda p: lexicographic(psi_full(p), cloner(p), full), "lexi")

        def on_best(program, score, it, temp):
            tracker.log("br", it, temp, program, cloner(program) if cloner else None,
                        psi_full(program))

        program, _ = search(objective, budget, None, None, rng, on_best)
        return SynthesisResult(program, psi_full(program), trajectory,
                               stats=_stats(psi_full, cloner, budget))

    # Sketch-search: optimize the cloning score; psi-evaluate each new C-incumbent.
    reduced = Objective(lambda p: psi_fn(p, config.sketch_psi_matches), "psi_sketch")
    found = {"psi_best": None, "psi": -math.inf, "c_best": None}

    def on_c_best(program, score, it, temp):
        found["c_best"] = program
        value = reduced(program)
        if value > found["psi"]:
            found.update(psi_best=program, psi=value)
        tracker.log("sketch", it, temp, program, score, value)

    budget1 = total_budget(config) if mode == BC_ONLY else config.sketch_budget()
    c_program, _ = search(cloner, budget1, None, None, rng, on_c_best)
    if found["psi_best"] is None or found["psi"] <= 0:
        seed = found["c_best"] or c_program
    else:
        seed = found["psi_best"]
    seed_psi = psi_full(seed)
    tracker.log("sketch_final", budget1.used, None, seed, cloner(seed), seed_psi)
    if mode == BC_ONLY:
        return SynthesisResult(seed, seed_psi, trajectory, seed, seed_psi,
                               stats=_stats(psi_full, cloner, budget1, reduced))

    # BR-search: optimize psi starting from the sketch.
    budget2 = config.br_budget()
    offset = budget1.used

    def on_psi_best(program, score, it, temp):
        tracker.log("br", offset + it, temp, program, cloner(program), score)

    program, score = search(psi_full, budget2, seed, seed_psi, rng, on_psi_best)
    if seed_psi >= score:
        program, score = seed, seed_psi
    return SynthesisResult(program, score, trajectory, seed, seed_psi,
                           stats=_stats(psi_full, cloner, budget2, reduced))


def _stats(psi_obj, cloner, budget, reduced=None):
    stats = {"psi_evaluations": psi_obj.evaluations, "psi_faults": psi_obj.faults,
             "iterations": budget.used, "elapsed_s": round(budget.elapsed, 3)}
    if cloner is not None:
        stats.update(clone_evaluations=cloner.evaluations, clone_faults=cloner.faults)
    if reduced is not None:
        stats.update(sketch_psi_evaluations=reduced.evaluations)
    return stats
