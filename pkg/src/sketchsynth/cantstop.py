"""Two-player Can't Stop.

Actions are plain values: ``"y"`` / ``"n"`` at a yes-no decision, and a
sorted tuple of column numbers (one pairing of the dice, e.g. ``(4, 6)`` or
``(5, 5)``) at a column decision.  States are immutable; :func:`apply_action`
returns a new state and draws any dice it needs from the ``rng`` it is given.

Per-column arrays are indexed by column number directly (entries 0 and 1 are
unused) so rule code reads like the board.
"""
from __future__ import annotations

import random

from .errors import ContractViolation

COLUMNS = range(2, 13)
HEIGHT = (0, 0, 3, 5, 7, 9, 11, 13, 11, 9, 7, 5, 3)
MAX_NEUTRALS = 3
COLUMNS_TO_WIN = 3

COLUMN = "column"
YESNO = "yesno"
YES_NO_ACTIONS = ("y", "n")

_EMPTY = (0,) * 13
_OPEN = (-1,) * 13
_PAIRINGS = ((0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2))


def column_height(column: int) -> int:
    if not 2 <= column <= 12:
        raise ContractViolation(f"column {column} outside 2..12")
    return HEIGHT[column]


def roll_dice(rng: random.Random) -> tuple[int, int, int, int]:
    r = rng.random
    return (int(r() * 6) + 1, int(r() * 6) + 1, int(r() * 6) + 1, int(r() * 6) + 1)


class GameState:
    """A full position.

    ``permanent[p][c]`` is the number of cells player ``p`` has secured in
    column ``c``; ``neutral[c]`` the row of the neutral token in column ``c``
    (0 when absent); ``conquered[c]`` the owner or -1.  ``rolls`` counts dice
    rolls made so far in the match.
    """

    __slots__ = ("permanent", "neutral", "conquered", "dice", "phase", "to_move",
                 "winner", "rolls", "_actions")

    def __init__(self, permanent=(_EMPTY, _EMPTY), neutral=_EMPTY, conquered=_OPEN,
                 dice=(), phase=COLUMN, to_move=0, winner=None, rolls=0):
        self.permanent = permanent
        self.neutral = neutral
        self.conquered = conquered
        self.dice = dice
        self.phase = phase
        self.to_move = to_move
        self.winner = winner
        self.rolls = rolls
        self._actions = None

    def _replace(self, **kw) -> "GameState":
        new = GameState.__new__(GameState)
        new.permanent = kw.get("permanent", self.permanent)
        new.neutral = kw.get("neutral", self.neutral)
        new.conquered = kw.get("conquered", self.conquered)
        new.dice = kw.get("dice", self.dice)
        new.phase = kw.get("phase", self.phase)
        new.to_move = kw.get("to_move", self.to_move)
        new.winner = kw.get("winner", self.winner)
        new.rolls = kw.get("rolls", self.rolls)
        new._actions = None
        return new

    @property
    def terminal(self) -> bool:
        return self.winner is not None

    @property
    def neutrals(self) -> list[tuple[int, int]]:
        """``(column, row)`` of each neutral token, by column."""
        return [(c, self.neutral[c]) for c in COLUMNS if self.neutral[c]]

    @property
    def neutral_columns(self) -> list[int]:
        return [c for c in COLUMNS if self.neutral[c]]

    def progress(self, column: int) -> int:
        """Row the mover currently occupies in ``column`` (neutral or permanent)."""
        return self.neutral[column] or self.permanent[self.to_move][column]

    def __eq__(self, other):
        if not isinstance(other, GameState):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def key(self):
        return (self.permanent, self.neutral, self.conquered, self.dice, self.phase,
                self.to_move, self.winner)

    def __repr__(self):
        return f"GameState({to_record(self)})"


def initial_state(rng: random.Random, starter: int = 0) -> GameState:
    """Fresh board with ``starter`` to move and their first roll made."""
    return _start_turn(GameState(to_move=starter), rng)


def _start_turn(state: GameState, rng: random.Random) -> GameState:
    # A roll with no playable pairing ends the turn at once.
    for _ in range(10_000):
        state = state._replace(dice=roll_dice(rng), phase=COLUMN, rolls=state.rolls + 1)
        if legal_actions(state):
            return state
        state = state._replace(dice=(), to_move=1 - state.to_move)
    raise RuntimeError("no playable roll in 10,000 attempts")


def legal_actions(state: GameState) -> list:
    """Legal actions at ``state``; an empty list at a column decision means bust."""
    if state._actions is not None:
        return state._actions
    if state.winner is not None:
        raise ContractViolation("no actions at a terminal state")
    if state.phase == YESNO:
        state._actions = list(YES_NO_ACTIONS)
        return state._actions

    neutral = state.neutral
    mine = state.permanent[state.to_move]
    conquered = state.conquered
    free = MAX_NEUTRALS - sum(1 for c in COLUMNS if neutral[c])
    d = state.dice
    actions = []

    def room(c):
        if conquered[c] != -1:
            return 0
        return HEIGHT[c] - (neutral[c] or mine[c])

    for i, j, k, m in _PAIRINGS:
        a, b = d[i] + d[j], d[k] + d[m]
        if a > b:
            a, b = b, a
        if a == b:
            r = room(a)
            if r and (neutral[a] or free):
                found = [(a, a) if r >= 2 else (a,)]
            else:
                found = []
        else:
            ok_a = room(a) > 0 and (neutral[a] or free >= 1)
            ok_b = room(b) > 0 and (neutral[b] or free >= 1)
            needed = (0 if neutral[a] else 1) + (0 if neutral[b] else 1)
            if ok_a and ok_b and needed <= free:
                found = [(a, b)]
            else:
                found = [(c,) for c, ok in ((a, ok_a), (b, ok_b)) if ok]
        for act in found:
            if act not in actions:
                actions.append(act)
    state._actions = actions
    return actions


def apply_action(state: GameState, action, rng: random.Random) -> GameState:
    """Successor of ``state`` after ``action``; dice for the next decision come from ``rng``."""
    if action not in legal_actions(state):
        raise ContractViolation(f"illegal action {action!r} at {state!r}")
    me = state.to_move
    if state.phase == COLUMN:
        neutral = list(state.neutral)
        mine = state.permanent[me]
        for c in action:
            neutral[c] = (neutral[c] or mine[c]) + 1
        return state._replace(neutral=tuple(neutral), dice=(), phase=YESNO)

    if action == "y":
        rolled = state._replace(dice=roll_dice(rng), phase=COLUMN, rolls=state.rolls + 1)
        if legal_actions(rolled):
            return rolled
        busted = state._replace(neutral=_EMPTY, dice=(), to_move=1 - me, rolls=rolled.rolls)
        return _start_turn(busted, rng)

    committed = _commit(state)
    if committed.winner is not None:
        return committed
    return _start_turn(committed._replace(to_move=1 - me), rng)


def _commit(state: GameState) -> GameState:
    me = state.to_move
    mine = list(state.permanent[me])
    conquered = list(state.conquered)
    for c in COLUMNS:
        row = state.neutral[c]
        if row:
            mine[c] = row
            if row == HEIGHT[c]:
                conquered[c] = me
    permanent = list(state.permanent)
    permanent[me] = tuple(mine)
    won = sum(1 for c in COLUMNS if conquered[c] == me) >= COLUMNS_TO_WIN
    return state._replace(permanent=tuple(permanent), neutral=_EMPTY,
                          conquered=tuple(conquered), dice=(),
                          winner=me if won else None)


def winner(state: GameState):
    """Player owning at least three conquered columns, else None."""
    for p in (0, 1):
        if sum(1 for c in COLUMNS if state.conquered[c] == p) >= COLUMNS_TO_WIN:
            return p
    return None


# --- helper queries used by the DSL ----------------------------------------


def advanced_this_round(state: GameState, column: int) -> int:
    row = state.neutral[column]
    return row - state.permanent[state.to_move][column] if row else 0


def advanced_by_action(state: GameState, action, column: int) -> int:
    if isinstance(action, tuple):
        return action.count(column)
    return 0


def secured(state: GameState, player: int, column: int) -> int:
    return state.permanent[player][column]


def is_new_neutral(state: GameState, action, column: int) -> int:
    if isinstance(action, tuple) and column in action and not state.neutral[column]:
        return 1
    return 0


def win_after_n(state: GameState) -> bool:
    """Would committing the current neutral tokens win the game?"""
    me = state.to_move
    owned = 0
    for c in COLUMNS:
        if state.conquered[c] == me or (state.neutral[c] == HEIGHT[c] and state.conquered[c] == -1):
            owned += 1
    return owned >= COLUMNS_TO_WIN


def available_columns(state: GameState) -> bool:
    """Does the mover still have a spare neutral token and a column to place it in?"""
    neutral = state.neutral
    if sum(1 for c in COLUMNS if neutral[c]) >= MAX_NEUTRALS:
        return False
    mine = state.permanent[state.to_move]
    return any(not neutral[c] and state.conquered[c] == -1 and mine[c] < HEIGHT[c]
               for c in COLUMNS)


# --- invariants and serialization ------------------------------------------


def check_invariants(state: GameState) -> None:
    """Raise AssertionError when ``state`` breaks a board invariant."""
    neutral_cols = [c for c in COLUMNS if state.neutral[c]]
    assert len(neutral_cols) <= MAX_NEUTRALS, "too many neutral tokens"
    for c in COLUMNS:
        assert 0 <= state.neutral[c] <= HEIGHT[c], f"neutral off board in {c}"
        if state.neutral[c]:
            assert state.neutral[c] > state.permanent[state.to_move][c], f"neutral below marker in {c}"
            assert state.conquered[c] == -1, f"neutral in conquered column {c}"
        for p in (0, 1):
            assert 0 <= state.permanent[p][c] <= HEIGHT[c], f"marker off board in {c}"
        owner = state.conquered[c]
        if owner != -1:
            assert state.permanent[owner][c] == HEIGHT[c], f"conquered {c} not full"
        else:
            assert all(state.permanent[p][c] < HEIGHT[c] for p in (0, 1)), f"full column {c} not conquered"
    assert winner(state) == state.winner, "winner field disagrees with conquests"
    if state.winner is None:
        assert (len(state.dice) == 4) == (state.phase == COLUMN), "dice present outside column phase"
    else:
        assert not neutral_cols, "neutral tokens left on a finished board"


def to_record(state: GameState) -> dict:
    return {
        "permanent": [list(state.permanent[p][2:]) for p in (0, 1)],
        "neutral": [[c, r] for c, r in state.neutrals],
        "conquered": [None if o == -1 else o for o in state.conquered[2:]],
        "dice": list(state.dice),
        "phase": state.phase,
        "to_move": state.to_move,
        "winner": state.winner,
    }


def from_record(rec: dict) -> GameState:
    neutral = [0] * 13
    for c, r in rec["neutral"]:
        neutral[c] = r
    permanent = tuple((0, 0) + tuple(rec["permanent"][p]) for p in (0, 1))
    conquered = (-1, -1) + tuple(-1 if o is None else o for o in rec["conquered"])
    return GameState(permanent=permanent, neutral=tuple(neutral), conquered=conquered,
                     dice=tuple(rec["dice"]), phase=rec["phase"], to_move=rec["to_move"],
                     winner=rec.get("winner"))


def action_to_json(action):
    return action if isinstance(action, str) else list(action)


def action_from_json(value):
    return value if isinstance(value, str) else tuple(value)


def make_state(to_move=0, permanent=None, neutral=None, conquered=None, dice=(),
               phase=None) -> GameState:
    """Build a position from sparse ``{column: value}`` maps, for tests and tools.

    ``permanent`` is ``[{col: cells}, {col: cells}]``; a column given a full
    height there is marked conquered for that player unless ``conquered``
    says otherwise.
    """
    perm = [[0] * 13, [0] * 13]
    for p, cells in enumerate(permanent or ({}, {})):
        for c, n in cells.items():
            perm[p][c] = n
    owners = [-1] * 13
    for p in (0, 1):
        for c in COLUMNS:
            if perm[p][c] == HEIGHT[c]:
                owners[c] = p
    for c, o in (conquered or {}).items():
        owners[c] = o
    neut = [0] * 13
    for c, r in (neutral or {}).items():
        neut[c] = r
    if phase is None:
        phase = COLUMN if dice else YESNO
    state = GameState(permanent=(tuple(perm[0]), tuple(perm[1])), neutral=tuple(neut),
                      conquered=tuple(owners), dice=tuple(dice), phase=phase, to_move=to_move)
    state.winner = winner(state)
    return state
