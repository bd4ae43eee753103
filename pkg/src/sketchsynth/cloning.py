"""Behavioral-cloning scores C(L, p) for Can't Stop.

``action_score`` is the fraction of recorded decisions a strategy reproduces.
``observation_score`` compares end-game boards: the strategy's choices on the
recorded states are replayed on a shadow board that starts empty, and the
secured cells it ends with are compared with the demonstrator's by
intersection over union.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from . import cantstop as cs
from .errors import ContractViolation
from .evaluation import DataSet, DemoMatch


@dataclass
class CloneScore:
    value: float
    per_match: list[float] = field(default_factory=list)

    def __float__(self):
        return float(self.value)


def _require(data: DataSet):
    if not data.matches or data.n_pairs == 0:
        raise ContractViolation("cloning scores need a non-empty dataset")


def action_score(data: DataSet, strategy) -> CloneScore:
    """Pooled fraction of pairs where ``strategy`` picks the recorded action.

    Strategy faults propagate to the caller.
    """
    _require(data)
    hits = total = 0
    per_match = []
    for m in data.matches:
        match_hits = 0
        for p in m.pairs:
            if strategy.act(p.state, cs.legal_actions(p.state)) == p.action:
                match_hits += 1
        hits += match_hits
        total += len(m.pairs)
        per_match.append(match_hits / len(m.pairs) if m.pairs else 0.0)
    return CloneScore(hits / total, per_match)


def secured_overlap(a: dict | list, b: dict | list) -> float:
    """Intersection over union of secured cells; ``a``/``b`` map column to cell count.

    Two empty boards overlap perfectly.
    """
    cols = range(2, 13)
    get_a = a.__getitem__ if not isinstance(a, dict) else (lambda c: a.get(c, 0))
    get_b = b.__getitem__ if not isinstance(b, dict) else (lambda c: b.get(c, 0))
    inter = sum(min(get_a(c), get_b(c)) for c in cols)
    union = sum(max(get_a(c), get_b(c)) for c in cols)
    return 1.0 if union == 0 else inter / union


def shadow_board(match: DemoMatch, strategy) -> list[int]:
    """Secured cells per column after replaying ``strategy`` on the match's states.

    Column moves advance shadow neutral tokens (at most three, capped at the
    column top); ``n`` commits them.  Whenever the recorded turn ends (the
    demonstrator stopped or busted) uncommitted shadow progress is dropped.
    """
    secured = [0] * 13
    neutral: dict[int, int] = {}
    for p in match.pairs:
        state = p.state
        action = strategy.act(state, cs.legal_actions(state))
        if state.phase == cs.COLUMN:
            for c in action:
                top = cs.HEIGHT[c]
                if c in neutral:
                    neutral[c] = min(neutral[c] + 1, top)
                elif len(neutral) < cs.MAX_NEUTRALS and secured[c] < top:
                    neutral[c] = secured[c] + 1
        elif action == "n":
            for c, row in neutral.items():
                secured[c] = max(secured[c], row)
            neutral.clear()
        if state.phase == cs.YESNO and (p.action == "n" or p.bust):
            neutral.clear()
    return secured


def observation_score(data: DataSet, strategy) -> CloneScore:
    """Mean over matches of the shadow/recorded end-board overlap."""
    _require(data)
    per_match = []
    for m in data.matches:
        shadow = shadow_board(m, strategy)
        recorded = m.end_state.permanent[m.demonstrator]
        per_match.append(secured_overlap(shadow, recorded))
    return CloneScore(sum(per_match) / len(per_match), per_match)


SCORES = {"action": action_score, "observation": observation_score}
