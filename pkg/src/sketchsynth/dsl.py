"""The Can't Stop strategy DSL: semantics, the fixed strategy skeleton, and text forms.

A strategy program is a tree derived from ``S -> A A``; the first ``A`` scores
yes-no decisions and the second picks the index of a column action.  Programs
are compiled once into nested closures and the closures are called per
decision.

Lambda binding: ``map`` over a list of columns (``l1``, ``l2``) binds the
current column, ``map`` over ``l3`` binds the current action, and ``map`` over
any other list leaves the enclosing bindings in place.  Column terminals
(``f1``-``f4``, ``f6``, ``l4``, ``l5``) read the innermost bound column;
``f2``, ``f6`` and ``l1`` read the innermost bound action.
"""
from __future__ import annotations

import random
import re
from typing import Callable

from . import cantstop as cs
from .errors import ContractViolation, EvalError, ParseError, StrategyFault
from .grammar import Grammar, Node, builtin_grammar, is_complete, parse_sexpr, to_sexpr

GRAMMAR: Grammar = builtin_grammar("cantstop")

PROGRESS_VALUE = (7, 7, 3, 2, 2, 1, 2, 2, 3, 7, 7)   # l4, indexed by column - 2
MOVE_VALUE = (7, 0, 2, 0, 4, 3, 4, 0, 2, 0, 7)       # l5, indexed by column - 2
STOP_THRESHOLD = 29
INT_BOUND = 2 ** 31


class Columns(list):
    """A list of column numbers; mapping over it binds a column."""


class Actions(list):
    """A list of actions; mapping over it binds an action."""


# --- difficulty score (f5) --------------------------------------------------


def difficulty_additive(state: cs.GameState) -> int:
    """+2 per neutral token on an odd column, +4 if all tokens sit below 7, +4 if all above."""
    cols = state.neutral_columns
    if not cols:
        return 0
    score = 2 * sum(1 for c in cols if c % 2)
    if all(c < 7 for c in cols):
        score += 4
    if all(c > 7 for c in cols):
        score += 4
    return score


def difficulty_rule28(state: cs.GameState) -> int:
    """Keller's marker adjustment: +2 all odd, -2 all even, +4 all on one side of 7."""
    cols = state.neutral_columns
    if not cols:
        return 0
    score = 0
    if all(c % 2 for c in cols):
        score += 2
    elif not any(c % 2 for c in cols):
        score -= 2
    if all(c < 7 for c in cols) or all(c > 7 for c in cols):
        score += 4
    return score


DIFFICULTY = {"rule28": difficulty_rule28, "additive": difficulty_additive}
DEFAULT_DIFFICULTY = "rule28"


# --- evaluation context -----------------------------------------------------


class EvalContext:
    """State, legal actions, and the current lambda bindings."""

    __slots__ = ("state", "actions", "action", "column", "difficulty")

    def __init__(self, state, actions, difficulty=difficulty_rule28):
        self.state = state
        self.actions = actions
        self.action = None
        self.column = None
        self.difficulty = difficulty


def _clamp(v):
    if v >= INT_BOUND:
        return INT_BOUND - 1
    if v < -INT_BOUND:
        return -INT_BOUND
    return v


def _ints(values, node, what):
    for v in values:
        if not isinstance(v, int):
            raise EvalError(f"{what} over a list holding {type(v).__name__}", node)
    return values


def compile_program(node: Node) -> Callable[[EvalContext], object]:
    """Compile a complete subtree of the Can't Stop grammar into a closure."""
    sym = node.symbol
    prod = node.production
    if prod is None:
        if sym in GRAMMAR.nonterminals:
            raise EvalError(f"hole {sym!r} in program", node)
        return _compile_terminal(node)
    kids = node.children

    if sym in ("F2", "L1", "L2", "N", "OP") or (sym == "L" and prod == 2):
        return _compile_terminal(kids[0])
    if sym == "L" and prod == 1:
        return compile_program(kids[0])
    if sym in ("A", "B", "E", "LF") and len(kids) == 3 and kids[1].symbol == "OP":
        return _compile_binop(node)
    if sym == "B" or (sym == "E" and prod in (1, 3, 4)):
        return compile_program(kids[0])
    if kids[0].symbol == "sum":
        inner = compile_program(kids[1])

        def do_sum(ctx):
            values = inner(ctx)
            if not isinstance(values, list):
                raise EvalError("sum of a non-list", node)
            return _clamp(sum(_ints(values, node, "sum")))
        return do_sum
    if kids[0].symbol == "argmax":
        inner = compile_program(kids[1])

        def do_argmax(ctx):
            values = inner(ctx)
            if not isinstance(values, list):
                raise EvalError("argmax of a non-list", node)
            _ints(values, node, "argmax")
            if not values:
                return 0
            best = 0
            for i in range(1, len(values)):
                if values[i] > values[best]:
                    best = i
            return best
        return do_argmax
    if kids[0].symbol == "map":
        return _compile_map(node)
    if kids[0].symbol == "if":
        left, right = compile_program(kids[1]), compile_program(kids[3])
        then, other = compile_program(kids[5]), compile_program(kids[7])
        return lambda ctx: then(ctx) if left(ctx) < right(ctx) else other(ctx)
    raise EvalError(f"no semantics for {sym} production {prod}", node)


def _compile_binop(node):
    left, right = compile_program(node.children[0]), compile_program(node.children[2])
    op = node.children[1].children[0].symbol
    if op == "+":
        return lambda ctx: _clamp(left(ctx) + right(ctx))
    if op == "-":
        return lambda ctx: _clamp(left(ctx) - right(ctx))
    return lambda ctx: _clamp(left(ctx) * right(ctx))


def _compile_map(node):
    body = compile_program(node.children[1])
    source = compile_program(node.children[2])

    def do_map(ctx):
        values = source(ctx)
        if not isinstance(values, list):
            raise EvalError("map over a non-list", node)
        saved_action, saved_column = ctx.action, ctx.column
        out = []
        try:
            if isinstance(values, Columns):
                for v in values:
                    ctx.column = v
                    out.append(body(ctx))
            elif isinstance(values, Actions):
                for v in values:
                    ctx.action = v
                    out.append(body(ctx))
            else:
                for v in values:
                    out.append(body(ctx))
        finally:
            ctx.action, ctx.column = saved_action, saved_column
        return out
    return do_map


def _need_column(ctx, node):
    if ctx.column is None:
        raise EvalError(f"{node.symbol} used outside a lambda over columns", node)
    return ctx.column


def _need_action(ctx, node):
    if ctx.action is None:
        raise EvalError(f"{node.symbol} used outside a lambda over actions", node)
    return ctx.action


def _compile_terminal(node):
    t = node.symbol
    if t == "0":
        return lambda ctx: 0
    if t == "1":
        return lambda ctx: 1
    if t == "f1":
        return lambda ctx: cs.advanced_this_round(ctx.state, _need_column(ctx, node))
    if t == "f2":
        return lambda ctx: cs.advanced_by_action(ctx.state, _need_action(ctx, node), _need_column(ctx, node))
    if t == "f3":
        return lambda ctx: ctx.state.permanent[ctx.state.to_move][_need_column(ctx, node)]
    if t == "f4":
        return lambda ctx: ctx.state.permanent[1 - ctx.state.to_move][_need_column(ctx, node)]
    if t == "f5":
        return lambda ctx: ctx.difficulty(ctx.state)
    if t == "f6":
        return lambda ctx: cs.is_new_neutral(ctx.state, _need_action(ctx, node), _need_column(ctx, node))
    if t == "l1":
        def local_list(ctx):
            action = _need_action(ctx, node)
            return Columns(action) if isinstance(action, tuple) else Columns()
        return local_list
    if t == "l2":
        return lambda ctx: Columns(ctx.state.neutral_columns)
    if t == "l3":
        return lambda ctx: Actions(ctx.actions)
    if t == "l4":
        return lambda ctx: PROGRESS_VALUE[_need_column(ctx, node) - 2]
    if t == "l5":
        return lambda ctx: MOVE_VALUE[_need_column(ctx, node) - 2]
    raise EvalError(f"terminal {t!r} has no value", node)


def evaluate(program: Node, ctx: EvalContext):
    """Evaluate a complete subtree in ``ctx``."""
    return compile_program(program)(ctx)


# --- strategies -------------------------------------------------------------


class Strategy:
    """Maps a decision state to a legal action.

    ``spawn(seed)`` returns the instance to use for one match; strategies
    with internal randomness return a copy with its own stream.
    """

    name = "strategy"

    def __call__(self, state: cs.GameState):
        return self.act(state, cs.legal_actions(state))

    def act(self, state, actions):
        raise NotImplementedError

    def spawn(self, seed) -> "Strategy":
        return self


def skeleton_yes_no(state, score) -> str:
    if cs.win_after_n(state):
        return "n"
    if cs.available_columns(state):
        return "y"
    return "n" if score >= STOP_THRESHOLD else "y"


class ProgramStrategy(Strategy):
    """The fixed skeleton with a synthesized yes-no score and column index.

    Column indices outside ``0..n-1`` are wrapped modulo ``n`` and counted in
    ``soft_faults``.  Evaluation errors surface as :class:`StrategyFault`.
    """

    name = "program"

    def __init__(self, program: Node, difficulty: str = DEFAULT_DIFFICULTY):
        if program.symbol != "S" or not is_complete(program, GRAMMAR):
            raise ContractViolation("a strategy needs a complete S program")
        self.program = program
        self.difficulty = difficulty
        self.soft_faults = 0
        self._compiled = None

    @classmethod
    def from_pair(cls, yes_no: Node, column: Node, **kw) -> "ProgramStrategy":
        return cls(Node("S", 0, (yes_no, column)), **kw)

    @property
    def yes_no_program(self) -> Node:
        return self.program.children[0]

    @property
    def column_program(self) -> Node:
        return self.program.children[1]

    def _compile(self):
        if self._compiled is None:
            try:
                self._compiled = (compile_program(self.yes_no_program),
                                  compile_program(self.column_program),
                                  DIFFICULTY[self.difficulty])
            except EvalError as exc:
                raise StrategyFault(str(exc)) from exc
        return self._compiled

    def __getstate__(self):
        return {"program": self.program, "difficulty": self.difficulty}

    def __setstate__(self, d):
        self.__init__(d["program"], d["difficulty"])

    def act(self, state, actions):
        yes_no, column, difficulty = self._compile()
        ctx = EvalContext(state, actions, difficulty)
        try:
            if state.phase == cs.YESNO:
                return skeleton_yes_no(state, yes_no(ctx))
            index = column(ctx)
        except EvalError as exc:
            raise StrategyFault(str(exc)) from exc
        n = len(actions)
        if not 0 <= index < n:
            self.soft_faults += 1
            index %= n
        return actions[index]


class GAStrategy(Strategy):
    """Glenn and Aloi's strategy, written natively."""

    name = "ga"

    def __init__(self, difficulty: str = DEFAULT_DIFFICULTY):
        self.difficulty = difficulty
        self._f5 = DIFFICULTY[difficulty]

    def __getstate__(self):
        return {"difficulty": self.difficulty}

    def __setstate__(self, d):
        self.__init__(d["difficulty"])

    def yes_no_score(self, state) -> int:
        me = state.permanent[state.to_move]
        score = 0
        for c in cs.COLUMNS:
            row = state.neutral[c]
            if row:
                score += (row - me[c] + 1) * PROGRESS_VALUE[c - 2]
        return score + self._f5(state)

    def column_score(self, state, action) -> int:
        total = 0
        for c in action:
            total += action.count(c) * MOVE_VALUE[c - 2] - 6 * (0 if state.neutral[c] else 1)
        return total

    def act(self, state, actions):
        if state.phase == cs.YESNO:
            return skeleton_yes_no(state, self.yes_no_score(state))
        best, best_score = 0, None
        for i, action in enumerate(actions):
            s = self.column_score(state, action)
            if best_score is None or s > best_score:
                best, best_score = i, s
        return actions[best]


class RandomStrategy(Strategy):
    """Uniform over legal actions, with its own random stream."""

    name = "random"

    def __init__(self, seed=0):
        self.seed = seed
        self.rng = random.Random(seed)

    def __getstate__(self):
        return {"seed": self.seed}

    def __setstate__(self, d):
        self.__init__(d["seed"])

    def spawn(self, seed):
        return RandomStrategy(seed)

    def act(self, state, actions):
        return actions[int(self.rng.random() * len(actions))]


def ga_strategy(difficulty: str = DEFAULT_DIFFICULTY) -> GAStrategy:
    return GAStrategy(difficulty)


def random_strategy(seed=0) -> RandomStrategy:
    return RandomStrategy(seed)


def strategy_from_programs(program: Node, difficulty: str = DEFAULT_DIFFICULTY) -> ProgramStrategy:
    return ProgramStrategy(program, difficulty)


# --- infix text --------------------------------------------------------------

_INFIX_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\S))")


def _normalize(text):
    text = text.replace("$", "")
    return re.sub(r"\b([fl])_\{?(\d)\}?", r"\1\2", text)


def _tokenize(text):
    tokens = []
    for m in _INFIX_TOKEN.finditer(_normalize(text).strip()):
        num, name, sym = m.groups()
        tokens.append(("num", int(num)) if num else ("name", name) if name else ("sym", sym))
    return tokens


class _InfixParser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, k=0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else (None, None)

    def take(self, kind=None, value=None):
        tok = self.peek()
        if tok[0] is None or (kind and tok[0] != kind) or (value is not None and tok[1] != value):
            raise ParseError(f"expected {value or kind}, found {tok[1]!r}")
        self.i += 1
        return tok

    def done(self):
        if self.i != len(self.toks):
            raise ParseError(f"unexpected {self.peek()[1]!r}")

    def expr(self):
        node = self.term()
        while self.peek() in (("sym", "+"), ("sym", "-")):
            op = self.take()[1]
            node = ("op", op, node, self.term())
        return node

    def term(self):
        node = self.atom()
        while self.peek() == ("sym", "*"):
            self.take()
            node = ("op", "*", node, self.atom())
        return node

    def atom(self):
        kind, value = self.peek()
        if kind == "num":
            self.take()
            return ("num", value)
        if kind == "sym" and value == "(":
            self.take()
            inner = self.lam() if self.peek() == ("name", "lambda") else self.expr()
            self.take("sym", ")")
            return inner
        if kind == "name" and value == "lambda":
            return self.lam()
        if kind == "name" and value in ("sum", "argmax"):
            self.take()
            self.take("sym", "(")
            arg = self.expr()
            self.take("sym", ")")
            return ("call", value, arg)
        if kind == "name" and value == "map":
            self.take()
            self.take("sym", "(")
            fn = self.expr()
            if fn[0] != "lambda":
                raise ParseError("map expects a lambda as first argument")
            self.take("sym", ",")
            lst = self.expr()
            self.take("sym", ")")
            return ("map", fn[1], lst)
        if kind == "name" and value == "if":
            self.take()
            self.take("sym", "(")
            left = self.expr()
            self.take("sym", "<")
            right = self.expr()
            self.take("sym", ")")
            self.take("name", "then")
            then = self.expr()
            self.take("name", "else")
            return ("if", left, right, then, self.expr())
        if kind == "name":
            self.take()
            return ("name", value)
        raise ParseError(f"unexpected {value!r}")

    def lam(self):
        self.take("name", "lambda")
        self.take("name")
        self.take("sym", ":")
        return ("lambda", self.expr())


def _leaf(nt, terminal):
    prods = GRAMMAR.rules[nt]
    return Node(nt, prods.index((terminal,)), (Node(terminal),))


def _derive(expr, nt):
    """Map a parsed infix expression onto a derivation rooted at ``nt``."""
    kind = expr[0]
    rules = GRAMMAR.rules
    if kind == "op" and nt in ("A", "B", "E", "LF"):
        index = rules[nt].index(("E", "OP", "E"))
        return Node(nt, index, (_derive(expr[2], "E"), _leaf("OP", expr[1]), _derive(expr[3], "E")))
    if kind == "num" and nt in ("B", "E"):
        if expr[1] in (0, 1):
            return Node(nt, rules[nt].index(("N",)), (_leaf("N", str(expr[1])),))
        if nt == "E" and expr[1] > 1:
            # Integers above 1 are spelled as sums of ones.
            tree = ("num", 1)
            for _ in range(expr[1] - 1):
                tree = ("op", "+", tree, ("num", 1))
            return _derive(tree, "E")
    if kind == "call" and nt in ("A", "E", "LF") and (expr[1] == "sum" or nt == "A"):
        index = rules[nt].index((expr[1], "L"))
        return Node(nt, index, (Node(expr[1]), _derive(expr[2], "L")))
    if kind == "map" and nt in ("L", "LF"):
        index = rules[nt].index(("map", "LF", "L"))
        return Node(nt, index, (Node("map"), _derive(expr[1], "LF"), _derive(expr[2], "L")))
    if kind == "if" and nt == "A":
        return Node("A", 0, (Node("if"), _derive(expr[1], "B"), Node("<"), _derive(expr[2], "B"),
                             Node("then"), _derive(expr[3], "A"), Node("else"), _derive(expr[4], "A")))
    if kind == "name":
        name = expr[1]
        if nt == "E" and name in ("f1", "f2", "f3", "f4", "f5", "f6"):
            return Node("E", rules["E"].index(("F2",)), (_leaf("F2", name),))
        if nt == "E" and name in ("l4", "l5"):
            return Node("E", rules["E"].index(("L2",)), (_leaf("L2", name),))
        if nt == "L" and name in ("l2", "l3"):
            return Node("L", rules["L"].index(("L1",)), (_leaf("L1", name),))
        if nt == "L" and name == "l1":
            return _leaf("L", "l1")
    raise ParseError(f"{_show(expr)} cannot be derived from {nt}")


def _show(expr):
    return to_infix_expr(expr) if isinstance(expr, Node) else repr(expr)


def parse_infix(text: str, symbol: str = "A") -> Node:
    """Parse infix text, e.g. ``sum(map(lambda x: (f1 + 1) * l4, l2)) + f5``."""
    parser = _InfixParser(text)
    expr = parser.lam() if parser.peek() == ("name", "lambda") else parser.expr()
    parser.done()
    if expr[0] == "lambda":
        expr = expr[1]
    return _derive(expr, symbol)


def to_infix(node: Node) -> str:
    """Paper-style rendering of a (possibly partial) subtree; holes print as ``?``."""
    return to_infix_expr(node)


def to_infix_expr(node: Node) -> str:
    if node.production is None:
        return "?" if node.symbol in GRAMMAR.nonterminals else node.symbol
    kids = node.children
    if node.symbol == "S":
        return f"yes-no: {to_infix_expr(kids[0])}\ncolumn: {to_infix_expr(kids[1])}"
    if len(kids) == 1:
        return to_infix_expr(kids[0])
    if len(kids) == 3 and kids[1].symbol == "OP":
        return f"({to_infix_expr(kids[0])} {to_infix_expr(kids[1])} {to_infix_expr(kids[2])})"
    head = kids[0].symbol
    if head in ("sum", "argmax"):
        return f"{head}({to_infix_expr(kids[1])})"
    if head == "map":
        return f"map((lambda x : {to_infix_expr(kids[1])}), {to_infix_expr(kids[2])})"
    if head == "if":
        return (f"if ({to_infix_expr(kids[1])} < {to_infix_expr(kids[3])}) then "
                f"{to_infix_expr(kids[5])} else {to_infix_expr(kids[7])}")
    raise ParseError(f"cannot render {node.symbol} production {node.production}")


def parse_strategy_text(text: str) -> Node:
    """Read a program file: an ``(S ...)`` s-expression, or ``yes-no:`` / ``column:`` lines."""
    stripped = text.strip()
    if stripped.startswith("("):
        node = parse_sexpr(stripped, GRAMMAR)
        if node.symbol != "S":
            raise ParseError("program file must hold an S program")
        return node
    parts = {}
    for line in stripped.splitlines():
        if not line.strip():
            continue
        label, sep, body = line.partition(":")
        label = label.strip().lower().replace("_", "-")
        if not sep or label not in ("yes-no", "column"):
            raise ParseError(f"expected 'yes-no:' or 'column:' line, got {line!r}")
        parts[label] = body
    if set(parts) != {"yes-no", "column"}:
        raise ParseError("need both a yes-no and a column program")
    return Node("S", 0, (parse_infix(parts["yes-no"]), parse_infix(parts["column"])))


GA_YES_NO = "sum(map(lambda x: (f1 + 1) * l4, l2)) + f5"
GA_COLUMN = "argmax(map(lambda x: sum(map(lambda x: f2 * l5 - 6 * f6, l1)), l3))"
GA_PROGRAM_TEXT = f"yes-no: {GA_YES_NO}\ncolumn: {GA_COLUMN}\n"

SKETCH_SA_O_YES_NO = ("((f5 * f5) - (sum(map((lambda x : sum(l2)), l2)) - "
                      "(f5 + sum(map((lambda x : (l4 * (f1 * f3))), l2)))))")
SKETCH_SA_O_COLUMN = "argmax(map((lambda x : sum(map((lambda x : (f3 + l5)), l1))), l3))"
SKETCH_SA_O_TEXT = f"yes-no: {SKETCH_SA_O_YES_NO}\ncolumn: {SKETCH_SA_O_COLUMN}\n"


def ga_program() -> Node:
    """Glenn and Aloi's strategy as a DSL program."""
    return parse_strategy_text(GA_PROGRAM_TEXT)


def published_program() -> Node:
    """The published Sketch-SA(O) program for Can't Stop."""
    return parse_strategy_text(SKETCH_SA_O_TEXT)


def program_to_file_text(program: Node) -> str:
    return to_sexpr(program) + "\n"
