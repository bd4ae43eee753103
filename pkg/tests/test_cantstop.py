import random
from collections import Counter

import pytest

from sketchsynth import cantstop as cs
from sketchsynth.errors import ContractViolation


class FixedDice:
    """Yields the given die faces in order, then falls back to a seeded stream."""

    def __init__(self, faces, seed=0):
        self.faces = list(faces)
        self.rest = random.Random(seed)

    def random(self):
        if self.faces:
            return (self.faces.pop(0) - 1) / 6 + 1e-9
        return self.rest.random()


@pytest.mark.parametrize("column, height", [(2, 3), (7, 13), (12, 3)])
def test_column_height(column, height):
    assert cs.column_height(column) == height


def test_heights_table():
    assert [cs.column_height(c) for c in cs.COLUMNS] == [3, 5, 7, 9, 11, 13, 11, 9, 7, 5, 3]


@pytest.mark.parametrize("column", [1, 13])
def test_column_height_out_of_range(column):
    with pytest.raises(ContractViolation):
        cs.column_height(column)


def test_roll_dice_is_seeded():
    assert cs.roll_dice(random.Random(5)) == cs.roll_dice(random.Random(5))


def test_face_frequencies():
    rng = random.Random(1)
    counts = Counter()
    for _ in range(15_000):
        counts.update(cs.roll_dice(rng))
    for face in range(1, 7):
        assert abs(counts[face] / 60_000 - 1 / 6) <= 0.01


def test_one_stream_vs_two_streams():
    a = random.Random(9)
    first, second = cs.roll_dice(a), cs.roll_dice(a)
    b = random.Random(9)
    assert cs.roll_dice(b) == first
    assert cs.roll_dice(b) == second


def test_yes_no_actions():
    assert cs.legal_actions(cs.make_state(neutral={7: 1})) == ["y", "n"]


def test_pairings_of_1234():
    state = cs.make_state(dice=(1, 2, 3, 4))
    assert sorted(cs.legal_actions(state)) == [(3, 7), (4, 6), (5, 5)]


def test_bust_when_only_conquered_columns():
    state = cs.make_state(permanent=[{7: 13}, {6: 11, 8: 11}], dice=(3, 4, 3, 4))
    assert state.conquered[7] == 0 and state.conquered[6] == 1
    assert cs.legal_actions(state) == []


def test_columns_won_by_opponent_are_closed():
    state = cs.make_state(permanent=[{}, {2: 3}], dice=(1, 1, 3, 3))
    assert (2,) not in cs.legal_actions(state)
    assert (2, 6) not in cs.legal_actions(state)


def test_split_when_only_one_token_left():
    state = cs.make_state(neutral={4: 1, 10: 1}, dice=(1, 2, 3, 4))
    # 3+7 needs two new tokens: split; 4+6 needs one: kept whole
    assert sorted(cs.legal_actions(state)) == [(3,), (4, 6), (5, 5), (7,)]


def test_double_with_one_cell_left_moves_once():
    state = cs.make_state(permanent=[{2: 2}, {}], dice=(1, 1, 1, 1))
    assert cs.legal_actions(state) == [(2,)]


def test_terminal_state_has_no_actions():
    state = cs.make_state(permanent=[{2: 3, 3: 5, 7: 13}, {}])
    with pytest.raises(ContractViolation):
        cs.legal_actions(state)


def test_column_move_places_above_marker():
    state = cs.make_state(permanent=[{4: 2}, {}], dice=(1, 3, 2, 4))
    after = cs.apply_action(state, (4, 6), random.Random(0))
    assert after.neutral[4] == 3 and after.neutral[6] == 1
    assert after.phase == cs.YESNO and after.dice == ()


def test_stop_at_top_conquers():
    state = cs.make_state(neutral={2: 3, 5: 2})
    after = cs.apply_action(state, "n", random.Random(0))
    assert after.conquered[2] == 0
    assert after.permanent[0][2] == 3 and after.permanent[0][5] == 2
    assert after.to_move == 1
    assert not after.neutral_columns


def test_bust_after_yes():
    state = cs.make_state(permanent=[{7: 13}, {}], neutral={2: 1, 12: 1, 4: 1})
    # 3,4,3,4 pairs to 7+7 (conquered) or 6+8 (no token left)
    rng = FixedDice([3, 4, 3, 4], seed=1)
    after = cs.apply_action(state, "y", rng)
    assert after.to_move == 1
    assert not after.neutral_columns
    assert after.permanent == state.permanent


def test_yes_with_playable_roll_keeps_neutrals():
    state = cs.make_state(neutral={6: 1})
    after = cs.apply_action(state, "y", FixedDice([1, 2, 3, 3]))
    assert after.phase == cs.COLUMN and len(after.dice) == 4
    assert after.neutral == state.neutral and after.to_move == 0


def test_illegal_action_rejected():
    state = cs.make_state(dice=(1, 2, 3, 4))
    with pytest.raises(ContractViolation):
        cs.apply_action(state, (8,), random.Random(0))


def test_winner():
    assert cs.winner(cs.make_state(permanent=[{}, {2: 3, 3: 5, 7: 13}])) == 1
    assert cs.initial_state(random.Random(0)).winner is None


def test_helper_queries():
    state = cs.make_state(permanent=[{5: 2}, {5: 4}], neutral={5: 4, 8: 1})
    assert cs.secured(state, 0, 5) == 2
    assert cs.secured(state, 1, 5) == 4
    assert cs.advanced_this_round(state, 5) == 2
    assert cs.advanced_this_round(state, 6) == 0
    assert cs.advanced_by_action(state, (6, 6), 6) == 2
    assert cs.is_new_neutral(state, (6, 8), 6) == 1
    assert cs.is_new_neutral(state, (6, 8), 8) == 0


def test_win_after_n():
    state = cs.make_state(permanent=[{2: 3, 3: 5}, {}], neutral={12: 3})
    assert cs.win_after_n(state)
    assert not cs.win_after_n(cs.make_state(permanent=[{2: 3, 3: 5}, {}], neutral={12: 2}))


def test_available_columns():
    assert cs.available_columns(cs.make_state(neutral={4: 1}))
    assert not cs.available_columns(cs.make_state(neutral={4: 1, 5: 1, 6: 1}))


def test_record_round_trip():
    rng = random.Random(4)
    state = cs.initial_state(rng)
    for _ in range(30):
        assert cs.from_record(cs.to_record(state)) == state
        if state.winner is not None:
            break
        actions = cs.legal_actions(state)
        state = cs.apply_action(state, actions[int(rng.random() * len(actions))], rng)


def random_playout(seed, check=True):
    rng = random.Random(seed)
    state = cs.initial_state(rng, seed % 2)
    transitions = 0
    previous = state.permanent
    while state.winner is None:
        actions = cs.legal_actions(state)
        assert 1 <= len(actions) <= 6
        state = cs.apply_action(state, actions[int(rng.random() * len(actions))], rng)
        transitions += 1
        if check:
            cs.check_invariants(state)
            for p in (0, 1):
                assert all(a <= b for a, b in zip(previous[p], state.permanent[p]))
            previous = state.permanent
    return state, transitions


def test_random_playouts_keep_invariants():
    total = 0
    for seed in range(300):
        state, n = random_playout(seed)
        assert state.winner in (0, 1)
        total += n
    assert total > 10_000


def test_playouts_always_finish_with_one_winner():
    for seed in range(1000, 3000):
        state, _ = random_playout(seed, check=False)
        owners = [state.conquered[c] for c in cs.COLUMNS]
        assert sum(o == state.winner for o in owners) >= 3
        assert sum(o == 1 - state.winner for o in owners) < 3
