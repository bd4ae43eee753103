"""Can't Stop objectives and the method/mode dispatch used by the CLI."""
from __future__ import annotations

from typing import Callable

from . import cloning
from .dsl import DEFAULT_DIFFICULTY, GRAMMAR, ProgramStrategy, Strategy
from .errors import ContractViolation
from .evaluation import DataSet, psi
from .grammar import Node
from .pipeline import BASELINE, BC_ONLY, LEXICOGRAPHIC, SKETCH, SynthesisResult
from .sa import sketch_sa
from .search import SearchConfig
from .uct import sketch_uct

METHODS = {"sa": sketch_sa, "uct": sketch_uct}

# CLI mode name -> (pipeline mode, cloning score or None for "use --score")
MODES = {
    "baseline": (BASELINE, None),
    "sketch-a": (SKETCH, "action"),
    "sketch-o": (SKETCH, "observation"),
    "bc-only": (BC_ONLY, None),
    "lexi": (LEXICOGRAPHIC, None),
}


def psi_objective(opponent: Strategy, base_seed: int = 0, workers: int = 1,
                  difficulty: str = DEFAULT_DIFFICULTY) -> Callable[[Node, int], float]:
    """``psi_fn(program, n)``: win rate of the program over ``n`` fixed-seed matches."""
    def psi_fn(program: Node, n_matches: int) -> float:
        return psi(ProgramStrategy(program, difficulty), opponent, n_matches, base_seed, workers)
    return psi_fn


def clone_objective(kind: str, difficulty: str = DEFAULT_DIFFICULTY) -> Callable[[DataSet, Node], float]:
    if kind not in cloning.SCORES:
        raise ContractViolation(f"unknown cloning score {kind!r}")
    score = cloning.SCORES[kind]

    def clone(dataset: DataSet, program: Node) -> float:
        return score(dataset, ProgramStrategy(program, difficulty)).value
    return clone


def synthesize(method: str, mode: str, config: SearchConfig, opponent: Strategy,
               dataset: DataSet | None = None, score: str = "observation", *,
               psi_seed: int = 0, workers: int = 1, difficulty: str = DEFAULT_DIFFICULTY,
               checkpoint: Callable | None = None) -> SynthesisResult:
    """One Can't Stop synthesis run.

    ``mode`` is a CLI mode name (``baseline``, ``sketch-a``, ``sketch-o``,
    ``bc-only``, ``lexi``); ``score`` picks the cloning score for the modes
    that do not fix it.
    """
    if method not in METHODS:
        raise ContractViolation(f"unknown method {method!r}")
    if mode not in MODES:
        raise ContractViolation(f"unknown mode {mode!r}")
    pipeline_mode, fixed_score = MODES[mode]
    clone = None
    if pipeline_mode != BASELINE:
        clone = clone_objective(fixed_score or score, difficulty)
    psi_fn = psi_objective(opponent, psi_seed, workers, difficulty)
    return METHODS[method](dataset, clone, psi_fn, GRAMMAR, config, pipeline_mode,
                           checkpoint=checkpoint)
