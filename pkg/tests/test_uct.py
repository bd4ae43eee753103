import math
import random
from collections import Counter

import pytest

from sketchsynth.errors import ContractViolation, EvalError
from sketchsynth.grammar import (builtin_grammar, derivation_prefix, derivation_sequence,
                                 enumerate_children, expand_leftmost, hole, parse_sexpr, to_sexpr)
from sketchsynth.search import Budget, Objective, SearchConfig
from sketchsynth.uct import UctNode, UctSearch, iter_tree, select_child, simulate, ucb_select, uct_search

TOY = builtin_grammar("toy")
TARGET = "(I if (B b2) then (C c2))"
IF_B_THEN_C = expand_leftmost(hole("I"), TOY, 1)
SCORES = {
    "(I (C c1))": 0.1, "(I (C c2))": 0.2,
    "(I if (B b1) then (C c1))": 0.3, "(I if (B b1) then (C c2))": 0.4,
    "(I if (B b2) then (C c1))": 0.5, TARGET: 1.0,
}


def graded(program):
    return SCORES[to_sexpr(program)]


def test_ucb_worked_example():
    assert 0.6 + 10 * math.sqrt(math.log(11) / 10) == pytest.approx(5.50, abs=0.005)
    assert 0.4 + 10 * math.sqrt(math.log(11) / 1) == pytest.approx(15.89, abs=0.005)
    assert ucb_select([10, 1], [0.6, 0.4], 10) == 1


def test_unvisited_first_in_order():
    assert ucb_select([5, 0, 0], [1.0, 0.0, 0.0], 10) == 1


def test_zero_exploration_is_greedy():
    assert ucb_select([10, 1, 3], [0.2, 0.1, 0.7], 0) == 2
    assert ucb_select([1, 1], [0.5, 0.5], 0) == 0


def test_empty_children_rejected():
    with pytest.raises(ContractViolation):
        ucb_select([], [], 10)


def test_leaf_has_no_children_to_select():
    node = UctNode(parse_sexpr(TARGET, TOY), TOY)
    assert node.complete
    with pytest.raises(ContractViolation):
        select_child(node, 10)


def test_children_follow_enumeration():
    search = UctSearch(graded, TOY, SearchConfig(), random.Random(0))
    search.run(Budget(iterations=300))
    for node in iter_tree(search.root):
        if node.complete:
            continue
        expected = enumerate_children(node.program, TOY)
        for child, program in zip(node.children, expected):
            if child is not None:
                assert child.program == program
        assert len(node.children) == len(expected)


def test_simulate_complete_program():
    calls = []
    program = parse_sexpr(TARGET, TOY)
    out, score = simulate(program, TOY, SearchConfig(), lambda p: calls.append(p) or 0.7,
                          random.Random(0))
    assert out is program and score == 0.7 and len(calls) == 1


def test_rollout_keeps_structure():
    seen = []
    simulate(IF_B_THEN_C, TOY, SearchConfig(), graded, random.Random(3), on_eval=seen.append)
    assert seen
    assert all(p.production == 1 and derivation_prefix(p, IF_B_THEN_C) for p in seen)


@pytest.mark.parametrize("seed", range(10))
def test_rollout_finds_best_completion(seed):
    program, score = simulate(IF_B_THEN_C, TOY, SearchConfig(), graded, random.Random(seed))
    assert to_sexpr(program) == TARGET and score == 1.0


def test_branch_initialization():
    derivation = derivation_sequence(parse_sexpr("(I if (B b1) then (C c1))", TOY))
    search = UctSearch(graded, TOY, SearchConfig(), random.Random(0))
    search.initialize_branch(derivation, 0.3)
    path, node = [], search.root
    while node is not None:
        path.append(node)
        node = next((c for c in node.children if c is not None), None)
    assert [to_sexpr(n.program) for n in path] == [
        to_sexpr(hole("I")),
        to_sexpr(IF_B_THEN_C),
        to_sexpr(expand_leftmost(IF_B_THEN_C, TOY, 0)),
        "(I if (B b1) then (C c1))",
    ]
    for n in path:
        assert n.visits == 1 and n.mean == pytest.approx(0.3)
    assert search.nodes == 4
    search.run(Budget(iterations=7))
    assert search.root.visits == 8


def test_branch_must_precede_iterations():
    search = UctSearch(graded, TOY, SearchConfig(), random.Random(0))
    search.run(Budget(iterations=1))
    with pytest.raises(ContractViolation):
        search.initialize_branch(derivation_sequence(parse_sexpr(TARGET, TOY)), 1.0)


def test_branch_must_be_complete():
    search = UctSearch(graded, TOY, SearchConfig(), random.Random(0))
    with pytest.raises(ContractViolation):
        search.initialize_branch([("I", 1)], 0.5)
    search = UctSearch(graded, TOY, SearchConfig(), random.Random(0))
    with pytest.raises(ContractViolation):
        search.initialize_branch([("B", 0)], 0.5)


def test_root_counts_iterations():
    result = uct_search(graded, TOY, SearchConfig(), Budget(iterations=25), rng=random.Random(1))
    assert result.root.visits == 25 == result.iterations


def check_tree(root):
    for node in iter_tree(root):
        children = sum(node.child_visits())
        assert node.visits == children + node.rollouts
        if node is root:
            assert node.rollouts == 0
        elif not node.complete:
            # one rollout if the node was an expanded leaf, none if pre-built
            assert node.rollouts in (0, 1)
        assert 0.0 <= node.mean <= 1.0


def test_visit_conservation_and_single_evaluation():
    calls = Counter()

    def counted(program):
        calls[to_sexpr(program)] += 1
        return graded(program)

    search = UctSearch(counted, TOY, SearchConfig(), random.Random(7))
    for _ in range(10_000):
        search.step()
        if search.iterations % 1000 == 0:
            check_tree(search.root)
    check_tree(search.root)
    assert search.root.visits == 10_000
    assert max(calls.values()) == 1 and len(calls) <= 6
    assert to_sexpr(search.best) == TARGET


def test_conservation_with_initial_branch():
    search = UctSearch(graded, TOY, SearchConfig(), random.Random(2))
    search.initialize_branch(derivation_sequence(parse_sexpr("(I (C c1))", TOY)), 0.1)
    search.run(Budget(iterations=500))
    check_tree(search.root)
    assert search.root.visits == 501


def test_faults_backpropagate_zero():
    def fragile(program):
        if "c1" in to_sexpr(program):
            raise EvalError("bad")
        return graded(program)

    objective = Objective(fragile)
    result = uct_search(objective, TOY, SearchConfig(), Budget(iterations=200), rng=random.Random(0))
    assert objective.faults >= 1
    assert result.score == 1.0
    check_tree(result.root)


@pytest.mark.parametrize("seed", range(5))
def test_uct_finds_toy_optimum(seed):
    one_hot = lambda p: 1.0 if to_sexpr(p) == TARGET else 0.0
    result = uct_search(one_hot, TOY, SearchConfig(), Budget(iterations=50), rng=random.Random(seed))
    assert to_sexpr(result.program) == TARGET
