"""Simulated annealing over programs."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable

from .errors import ContractViolation
from .grammar import (Grammar, Node, complete_randomly, holes, is_complete, neighbor,
                      random_program)
from .search import Budget, SearchConfig


def accept_probability(current: float, candidate: float, temperature: float, beta: float) -> float:
    """``min(1, exp(beta * (candidate - current) / temperature))``."""
    if temperature <= 0:
        raise ContractViolation("temperature must be positive")
    if candidate >= current:
        return 1.0
    if math.isinf(candidate) or math.isinf(current):
        return 0.0
    return math.exp(beta * (candidate - current) / temperature)


def temperature(t_initial: float, alpha: float, j: int) -> float:
    """Temperature at iteration ``j``; ``j = 0`` gives ``t_initial``."""
    if j < 0:
        raise ContractViolation("iteration index must be non-negative")
    return t_initial / (1 + alpha * j)


@dataclass
class SaResult:
    program: Node
    score: float
    iterations: int = 0
    accepted: int = 0
    scores: list[float] = field(default_factory=list)


def sa_run(eval_fn: Callable[[Node], float], grammar: Grammar, config: SearchConfig,
           initial: Node | None = None, leaf_restricted: bool = False, *,
           rng: random.Random, budget: Budget | None = None, max_iterations: int | None = None,
           on_best: Callable | None = None, on_accept: Callable | None = None) -> SaResult:
    """One annealing run; stops once the temperature drops below epsilon.

    With ``leaf_restricted`` the initial program is a sketch: its holes are
    filled at random and only subtrees rooted at those holes are ever
    replaced.  ``on_best(program, score, j, temp)`` fires on each new
    incumbent; ``on_accept(program, score)`` on each accepted move.
    """
    sketch = None
    if leaf_restricted:
        if initial is None or not holes(initial, grammar):
            raise ContractViolation("leaf-restricted runs need a partial initial program")
        sketch = initial
        current = complete_randomly(initial, grammar, rng, config.depth_limit)
    elif initial is None:
        current = random_program(grammar, rng, config.depth_limit)
    elif not is_complete(initial, grammar):
        current = complete_randomly(initial, grammar, rng, config.depth_limit)
    else:
        current = initial
    current_score = eval_fn(current)
    if budget is not None:
        budget.tick()
    result = SaResult(current, current_score, scores=[current_score])
    if on_best:
        on_best(current, current_score, 0, config.t_initial)

    j = 0
    while True:
        temp = temperature(config.t_initial, config.alpha, j)
        if temp < config.epsilon:
            break
        if max_iterations is not None and j >= max_iterations:
            break
        if budget is not None and budget.exhausted():
            break
        candidate = neighbor(current, grammar, rng, leaf_restricted, config.depth_limit, sketch)
        score = eval_fn(candidate)
        if budget is not None:
            budget.tick()
        result.scores.append(score)
        j += 1
        if score > result.score:
            result.program, result.score = candidate, score
            if on_best:
                on_best(candidate, score, j, temp)
        if rng.random() < accept_probability(current_score, score, temp, config.beta):
            current, current_score = candidate, score
            result.accepted += 1
            if on_accept:
                on_accept(candidate, score)
    result.iterations = j
    return result


def sa_restarting(eval_fn: Callable[[Node], float], grammar: Grammar, config: SearchConfig,
                  budget: Budget, initial: Node | None = None, *, rng: random.Random,
                  on_best: Callable | None = None) -> SaResult:
    """Repeat :func:`sa_run` until ``budget`` runs out, seeding each run with the last result."""
    if not budget.bounded:
        raise ContractViolation("restarting SA needs a time or iteration budget")
    budget.start()
    best = None
    seed = initial
    while True:
        def report(program, score, j, temp):
            if best is None or score > best.score:
                if on_best:
                    on_best(program, score, budget.used, temp)

        run = sa_run(eval_fn, grammar, config, seed, rng=rng, budget=budget, on_best=report)
        if best is None or run.score > best.score:
            best = SaResult(run.program, run.score)
        best.iterations += run.iterations
        best.accepted += run.accepted
        seed = run.program
        if budget.exhausted():
            return best


def sa_searcher(grammar: Grammar, config: SearchConfig):
    """Adapter for :func:`sketchsynth.pipeline.run_pipeline`."""
    def search(objective, budget, seed, seed_value, rng, on_best):
        best = sa_restarting(objective, grammar, config, budget, seed, rng=rng, on_best=on_best)
        return best.program, best.score
    return search


def sketch_sa(dataset, clone_score, psi_fn, grammar: Grammar, config: SearchConfig,
              mode: str = "sketch", *, checkpoint: Callable | None = None):
    """Sketch-search on the cloning score then BR-search on psi, both by restarting SA."""
    from .pipeline import run_pipeline
    return run_pipeline(sa_searcher(grammar, config), dataset, clone_score, psi_fn, config,
                        mode, checkpoint=checkpoint)
