import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from sketchsynth.dsl import GRAMMAR as CANTSTOP
from sketchsynth.errors import ContractViolation, EvalError
from sketchsynth.grammar import (builtin_grammar, derivation_prefix, expand_leftmost, hole,
                                 parse_sexpr, random_program, to_sexpr)
from sketchsynth.sa import accept_probability, sa_restarting, sa_run, temperature
from sketchsynth.search import Budget, Objective, SearchConfig, Trajectory, read_trajectory_csv

TOY = builtin_grammar("toy")
TARGET = "(I if (B b2) then (C c2))"


def one_hot(program):
    return 1.0 if to_sexpr(program) == TARGET else 0.0


def test_accept_better_or_equal():
    assert accept_probability(0.3, 0.5, 100, 200) == 1.0
    assert accept_probability(0.3, 0.3, 100, 200) == 1.0


def test_accept_closed_forms():
    assert accept_probability(0.5, 0.49, 100, 200) == pytest.approx(math.exp(-0.02), abs=1e-12)
    assert accept_probability(0.5, 0.49, 100, 200) == pytest.approx(0.98020, abs=1e-5)
    assert accept_probability(1.0, 0.0, 1, 200) == pytest.approx(0.0, abs=1e-80)


def test_accept_with_faults():
    assert accept_probability(-math.inf, -math.inf, 10, 200) == 1.0
    assert accept_probability(-math.inf, 0.0, 10, 200) == 1.0
    assert accept_probability(0.0, -math.inf, 10, 200) == 0.0


@pytest.mark.parametrize("t", [0, -1])
def test_accept_needs_positive_temperature(t):
    with pytest.raises(ContractViolation):
        accept_probability(0, 1, t, 200)


unit = st.floats(min_value=0, max_value=1)
temps = st.floats(min_value=0.01, max_value=1000)


@given(unit, unit, unit, temps)
def test_accept_monotone_in_delta(cur, a, b, t):
    lo, hi = sorted((a, b))
    assert accept_probability(cur, lo, t, 200) <= accept_probability(cur, hi, t, 200)


@given(unit, unit, temps, temps)
def test_accept_monotone_in_temperature(cur, cand, t1, t2):
    lo, hi = sorted((t1, t2))
    if cand < cur:
        assert accept_probability(cur, cand, lo, 200) <= accept_probability(cur, cand, hi, 200)


def test_temperature_schedule():
    assert temperature(100, 0.9, 0) == 100.0
    assert temperature(100, 0.9, 10) == pytest.approx(10.0)
    values = [temperature(100, 0.9, j) for j in range(200)]
    assert all(a > b for a, b in zip(values, values[1:]))
    with pytest.raises(ContractViolation):
        temperature(100, 0.9, -1)


def test_config_validation():
    SearchConfig()
    for bad in ({"alpha": 0}, {"beta": -1}, {"epsilon": 0}, {"t_initial": 0.5},
                {"exploration": -1}, {"psi_matches": 0}):
        with pytest.raises(ContractViolation):
            SearchConfig(**bad)


def test_run_length_follows_schedule():
    # T_j < 1 first at j = 111 with T1 = 100, alpha = 0.9
    result = sa_run(lambda p: 0.0, TOY, SearchConfig(), rng=random.Random(0))
    assert result.iterations == 111
    assert len(result.scores) == 112


def test_one_hot_found_by_single_runs():
    hits = sum(sa_run(one_hot, TOY, SearchConfig(), rng=random.Random(s)).score == 1.0
               for s in range(100))
    assert hits >= 95


def test_constant_objective():
    result = sa_run(lambda p: 0.25, TOY, SearchConfig(), rng=random.Random(1))
    assert result.score == 0.25


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_returned_score_is_best_seen(seed):
    rng = random.Random(seed)
    weights = {}

    def score(p):
        return weights.setdefault(to_sexpr(p), rng.random())

    result = sa_run(score, CANTSTOP, SearchConfig(), rng=random.Random(seed), max_iterations=40)
    assert result.score == max(result.scores)
    assert score(result.program) == result.score


def test_faults_score_minus_infinity():
    def fragile(p):
        if "b1" in to_sexpr(p):
            raise EvalError("no")
        return one_hot(p)

    objective = Objective(fragile)
    result = sa_run(objective, TOY, SearchConfig(), rng=random.Random(2))
    assert objective.faults >= 1
    assert result.score == 1.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_leaf_restricted_keeps_prefix(seed):
    rng = random.Random(seed)
    full = random_program(CANTSTOP, rng)
    # cut the program back to a partial one by undoing the last few expansions
    from sketchsynth.grammar import derivation_sequence, from_derivation
    steps = derivation_sequence(full)
    cut = from_derivation(CANTSTOP, steps[: max(1, len(steps) // 2)])
    if cut.key() == full.key():
        return
    seen = []
    sa_run(lambda p: rng.random(), CANTSTOP, SearchConfig(), cut, leaf_restricted=True,
           rng=rng, max_iterations=50, on_accept=lambda p, s: seen.append(p))
    assert all(derivation_prefix(p, cut) for p in seen)


def test_leaf_restricted_from_if_b_then_c():
    partial = expand_leftmost(hole("I"), TOY, 1)
    seen = []

    def score(p):
        seen.append(p)
        return one_hot(p)

    result = sa_run(score, TOY, SearchConfig(), partial, leaf_restricted=True,
                    rng=random.Random(0), max_iterations=200)
    assert to_sexpr(result.program) == TARGET
    assert all(p.production == 1 for p in seen)


def test_leaf_restricted_needs_holes():
    with pytest.raises(ContractViolation):
        sa_run(one_hot, TOY, SearchConfig(), parse_sexpr(TARGET, TOY), leaf_restricted=True,
               rng=random.Random(0))


def test_restarting_needs_budget():
    with pytest.raises(ContractViolation):
        sa_restarting(one_hot, TOY, SearchConfig(), Budget(), rng=random.Random(0))


def test_budget_shorter_than_one_run():
    budget = Budget(iterations=10)
    result = sa_restarting(lambda p: 0.0, TOY, SearchConfig(), budget, rng=random.Random(0))
    assert budget.used == 10
    assert result.iterations == 9


def test_restart_incumbent_never_drops():
    rng = random.Random(5)
    weights = {}

    def score(p):
        return weights.setdefault(to_sexpr(p), rng.random())

    reported = []
    sa_restarting(score, CANTSTOP, SearchConfig(alpha=20), Budget(iterations=300),
                  rng=random.Random(5), on_best=lambda p, s, it, t: reported.append(s))
    assert reported == sorted(reported)
    assert len(set(reported)) == len(reported)


def test_two_restarts_beat_one_run():
    # alpha = 50 leaves two neighbor steps per run
    config = SearchConfig(alpha=50)
    one = sum(sa_restarting(one_hot, TOY, config, Budget(iterations=3),
                            rng=random.Random(s)).score == 1 for s in range(100))
    three = sum(sa_restarting(one_hot, TOY, config, Budget(iterations=9),
                              rng=random.Random(s)).score == 1 for s in range(100))
    assert three > one


def test_objective_caches_by_program():
    calls = []
    objective = Objective(lambda p: calls.append(p) or 0.5)
    p = parse_sexpr(TARGET, TOY)
    assert objective(p) == objective(parse_sexpr(TARGET, TOY)) == 0.5
    assert len(calls) == 1 and objective.cache_hits == 1


def test_trajectory_csv(tmp_path):
    traj = Trajectory()
    traj.log(phase="br", iteration=3, temperature=50.0, c_score=None, psi_score=0.25,
             best_psi=0.25, program=parse_sexpr(TARGET, TOY))
    path = tmp_path / "t.csv"
    traj.write_csv(path, manifest="manifest.json")
    assert path.read_text().startswith("# sketchsynth-trajectory/1\n# manifest: manifest.json\n")
    (row,) = read_trajectory_csv(path)
    assert row["phase"] == "br" and row["program_len"] == "7" and row["c_score"] == ""
