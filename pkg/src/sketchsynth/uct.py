"""UCT over the leftmost-derivation tree, with one SA run as the rollout."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import ContractViolation
from .grammar import (Grammar, Node, derivation_sequence, expand_leftmost, hole, holes,
                      node_at)
from .sa import sa_run
from .search import Budget, Objective, SearchConfig


class UctNode:
    """A tree node for one (partial or complete) program.

    ``children[j]`` is the program obtained with production ``j`` on the
    leftmost hole, or None until expanded.  ``visits`` counts every
    backpropagation through the node and ``rollouts`` the ones that ended
    here, so ``visits == sum(child visits) + rollouts`` always holds.
    """

    __slots__ = ("program", "depth", "complete", "children", "visits", "total", "rollouts")

    def __init__(self, program: Node, grammar: Grammar, depth: int = 0):
        self.program = program
        self.depth = depth
        open_holes = holes(program, grammar)
        self.complete = not open_holes
        if self.complete:
            self.children = []
        else:
            symbol = node_at(program, open_holes[0]).symbol
            self.children = [None] * len(grammar.rules[symbol])
        self.visits = 0
        self.total = 0.0
        self.rollouts = 0

    @property
    def mean(self) -> float:
        return self.total / self.visits if self.visits else 0.0

    def child_visits(self) -> list[int]:
        return [c.visits if c is not None else 0 for c in self.children]

    def child_means(self) -> list[float]:
        return [c.mean if c is not None else 0.0 for c in self.children]


def ucb_select(visits: Sequence[int], means: Sequence[float], exploration: float) -> int:
    """Index maximizing ``mean + K * sqrt(ln N / N_j)``; unvisited children first."""
    if not visits:
        raise ContractViolation("cannot select a child of a leaf")
    for j, n in enumerate(visits):
        if n == 0:
            return j
    log_n = math.log(sum(visits))
    best, best_value = 0, -math.inf
    for j, (n, x) in enumerate(zip(visits, means)):
        value = x + exploration * math.sqrt(log_n / n)
        if value > best_value:
            best, best_value = j, value
    return best


def select_child(node: UctNode, exploration: float) -> int:
    if node.complete:
        raise ContractViolation("cannot select a child of a complete program")
    return ucb_select(node.child_visits(), node.child_means(), exploration)


def simulate(program: Node, grammar: Grammar, config: SearchConfig, eval_fn: Callable[[Node], float],
             rng: random.Random, deadline: Budget | None = None,
             on_eval: Callable | None = None) -> tuple[Node, float]:
    """Rollout: complete ``program`` at random, then one leaf-restricted SA run.

    A complete program is simply evaluated.
    """
    if not holes(program, grammar):
        return program, eval_fn(program)
    scorer = eval_fn
    if on_eval is not None:
        def scorer(p):
            on_eval(p)
            return eval_fn(p)
    run = sa_run(scorer, grammar, config, program, leaf_restricted=True, rng=rng,
                 budget=deadline, max_iterations=config.rollout_iterations)
    return run.program, run.score


def _reward(score: float) -> float:
    return 0.0 if math.isinf(score) or math.isnan(score) else score


@dataclass
class UctResult:
    program: Node
    score: float
    root: UctNode
    iterations: int = 0
    stats: dict = field(default_factory=dict)


class UctSearch:
    """The tree plus its incumbent; :meth:`step` runs one iteration."""

    def __init__(self, eval_fn: Callable[[Node], float], grammar: Grammar, config: SearchConfig,
                 rng: random.Random, on_best: Callable | None = None):
        self.objective = eval_fn if isinstance(eval_fn, Objective) else Objective(eval_fn)
        self.grammar = grammar
        self.config = config
        self.rng = rng
        self.on_best = on_best
        self.root = UctNode(hole(grammar.start), grammar)
        self.best: Node | None = None
        self.best_score = -math.inf
        self.iterations = 0
        self.nodes = 1
        self.max_depth = 0
        self.branch_initialized = False
        self.deadline: Budget | None = None

    def _offer(self, program, score, temp=None):
        if self.best is None or score > self.best_score:
            self.best, self.best_score = program, score
            if self.on_best:
                self.on_best(program, score, self.iterations, temp)

    def _backpropagate(self, path: list[UctNode], value: float):
        for node in path:
            node.visits += 1
            node.total += value
        path[-1].rollouts += 1

    def _attach(self, parent: UctNode, j: int) -> UctNode:
        child = UctNode(expand_leftmost(parent.program, self.grammar, j), self.grammar,
                        parent.depth + 1)
        parent.children[j] = child
        self.nodes += 1
        self.max_depth = max(self.max_depth, child.depth)
        return child

    def initialize_branch(self, derivation: Sequence[tuple[str, int]], value: float):
        """Pre-build the nodes of ``derivation`` and backpropagate ``value`` once along them."""
        if self.root.visits:
            raise ContractViolation("the branch must be added before the first iteration")
        path = [self.root]
        node = self.root
        for symbol, j in derivation:
            if node.complete:
                raise ContractViolation("derivation longer than its program")
            leftmost = node_at(node.program, holes(node.program, self.grammar)[0]).symbol
            if leftmost != symbol or not 0 <= j < len(node.children):
                raise ContractViolation(f"derivation step {symbol}->{j} does not fit {leftmost}")
            node = self._attach(node, j)
            path.append(node)
        if not node.complete:
            raise ContractViolation("the initial branch must end in a complete program")
        self.objective.seed(node.program, value)
        self._backpropagate(path, _reward(value))
        self.branch_initialized = True
        self._offer(node.program, value)

    def step(self):
        node = self.root
        path = [node]
        while not node.complete:
            j = select_child(node, self.config.exploration)
            child = node.children[j]
            if child is None:
                node = self._attach(node, j)
                path.append(node)
                break
            node = child
            path.append(node)
        program, score = simulate(node.program, self.grammar, self.config, self.objective,
                                  self.rng, self.deadline)
        self._offer(program, score)
        self._backpropagate(path, _reward(score))
        self.iterations += 1

    def run(self, budget: Budget) -> UctResult:
        if not budget.bounded:
            raise ContractViolation("UCT needs a time or iteration budget")
        budget.start()
        if budget.seconds is not None:
            self.deadline = Budget(seconds=budget.seconds - budget.elapsed).start()
        while not budget.exhausted():
            self.step()
            budget.tick()
        return self.result()

    def result(self) -> UctResult:
        return UctResult(self.best, self.best_score, self.root, self.iterations, self.stats())

    def stats(self) -> dict:
        return {"nodes": self.nodes, "max_depth": self.max_depth, "iterations": self.iterations,
                "evaluations": self.objective.evaluations,
                "cache_hits": self.objective.cache_hits, "faults": self.objective.faults}


def iter_tree(root: UctNode):
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(c for c in node.children if c is not None)


def uct_search(eval_fn: Callable[[Node], float], grammar: Grammar, config: SearchConfig,
               budget: Budget, initial_branch: tuple[Sequence, float] | None = None, *,
               rng: random.Random, on_best: Callable | None = None) -> UctResult:
    """Run UCT until ``budget`` is spent and return the best program evaluated.

    ``initial_branch`` is ``(derivation, value)`` of a complete program; its
    nodes are built up front and credited with one backpropagation.
    """
    search = UctSearch(eval_fn, grammar, config, rng, on_best)
    if initial_branch is not None:
        derivation, value = initial_branch
        search.initialize_branch(derivation, value)
    return search.run(budget)


def uct_searcher(grammar: Grammar, config: SearchConfig, tree_stats: list | None = None):
    """Adapter for :func:`sketchsynth.pipeline.run_pipeline`.

    Each search appends its tree statistics to ``tree_stats`` when given.
    """
    def search(objective, budget, seed, seed_value, rng, on_best):
        branch = None
        if seed is not None:
            value = objective(seed) if seed_value is None else seed_value
            branch = (derivation_sequence(seed), value)
        result = uct_search(objective, grammar, config, budget, branch, rng=rng, on_best=on_best)
        if tree_stats is not None:
            tree_stats.append({"objective": objective.name, **result.stats})
        return result.program, result.score
    return search


def sketch_uct(dataset, clone_score, psi_fn, grammar: Grammar, config: SearchConfig,
               mode: str = "sketch", *, checkpoint: Callable | None = None):
    """Sketch-search then BR-search by UCT; the BR tree starts with the sketch's full branch."""
    from .pipeline import run_pipeline
    trees = []
    result = run_pipeline(uct_searcher(grammar, config, trees), dataset, clone_score, psi_fn,
                          config, mode, checkpoint=checkpoint)
    result.stats["trees"] = trees
    return result
