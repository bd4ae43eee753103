"""Context-free grammars and programs as ASTs.

A program is a tree of :class:`Node` values.  Internal nodes carry a
nonterminal and the index of the production applied to it; leaves carry a
terminal, or a nonterminal with no production applied (a hole).  Nodes are
treated as immutable: every operation that "changes" a program returns a new
tree that shares untouched subtrees with the input.
"""
from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterator, Sequence

from .errors import ContractViolation, GrammarError, ParseError

DEFAULT_DEPTH_LIMIT = 15

_RESERVED = re.compile(r"[\s()|#]")


class Node:
    """One AST node.  ``production`` is None for terminals and holes."""

    __slots__ = ("symbol", "production", "children", "_key")

    def __init__(self, symbol: str, production: int | None = None, children: tuple = ()):
        self.symbol = symbol
        self.production = production
        self.children = children
        self._key = None

    @property
    def expanded(self) -> bool:
        return self.production is not None

    def key(self) -> str:
        """Canonical s-expression text, cached; used for equality and hashing."""
        if self._key is None:
            self._key = to_sexpr(self)
        return self._key

    def __eq__(self, other):
        if not isinstance(other, Node):
            return NotImplemented
        return self is other or self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"Node({self.key()})"


Program = Node
Derivation = list  # of (nonterminal, production index) pairs


@dataclass(frozen=True)
class Grammar:
    """A context-free grammar ``(nonterminals, terminals, rules, start)``.

    ``rules`` maps each nonterminal to its ordered productions; a production is
    a tuple of symbols.  Validity (closed symbol set, no empty rule lists, no
    dead nonterminals) is checked at construction.
    """

    rules: dict[str, tuple[tuple[str, ...], ...]]
    start: str
    nonterminals: frozenset = field(init=False)
    terminals: frozenset = field(init=False)
    min_depth: dict = field(init=False, repr=False, compare=False)
    shortest: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rules = {nt: tuple(tuple(p) for p in prods) for nt, prods in self.rules.items()}
        object.__setattr__(self, "rules", rules)
        nts = frozenset(rules)
        if self.start not in nts:
            raise GrammarError(f"start symbol {self.start!r} has no rules")
        symbols = set()
        for nt, prods in rules.items():
            if not prods:
                raise GrammarError(f"nonterminal {nt!r} has no productions")
            for prod in prods:
                symbols.update(prod)
        for sym in symbols | nts:
            if not sym or _RESERVED.search(sym):
                raise GrammarError(f"invalid symbol {sym!r}")
        object.__setattr__(self, "nonterminals", nts)
        object.__setattr__(self, "terminals", frozenset(symbols - nts))

        depth = _min_depths(rules)
        dead = sorted(nt for nt, d in depth.items() if math.isinf(d))
        if dead:
            raise GrammarError(f"nonterminals cannot derive a terminal string: {dead}")
        shortest = {}
        for nt, prods in rules.items():
            shortest[nt] = tuple(
                i for i, p in enumerate(prods) if _production_depth(p, depth) == depth[nt]
            )
        object.__setattr__(self, "min_depth", depth)
        object.__setattr__(self, "shortest", shortest)

    def is_nonterminal(self, symbol: str) -> bool:
        return symbol in self.nonterminals

    def productions(self, nonterminal: str) -> tuple[tuple[str, ...], ...]:
        return self.rules[nonterminal]

    def to_text(self) -> str:
        order = [self.start] + sorted(nt for nt in self.rules if nt != self.start)
        return "\n".join(
            f"{nt} -> " + " | ".join(" ".join(p) for p in self.rules[nt]) for nt in order
        ) + "\n"


def _production_depth(prod, depth):
    return 1 + max((depth[s] for s in prod if s in depth), default=0)


def _min_depths(rules):
    depth = {nt: math.inf for nt in rules}
    changed = True
    while changed:
        changed = False
        for nt, prods in rules.items():
            best = min(_production_depth(p, depth) for p in prods)
            if best < depth[nt]:
                depth[nt] = best
                changed = True
    return depth


def parse_grammar(text: str) -> Grammar:
    """Parse ``NT -> a b | c`` lines; ``#`` starts a comment.

    The head of the first rule is the start symbol.  A rule may continue on
    the next line when that line starts with ``|``.  Repeated heads append.
    """
    rules: dict[str, list[tuple[str, ...]]] = {}
    start = None
    head = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" in line:
            head, body = (s.strip() for s in line.split("->", 1))
            if not head or " " in head:
                raise ParseError(f"line {lineno}: bad rule head {head!r}")
            start = start or head
        elif line.startswith("|") and head is not None:
            body = line[1:]
        else:
            raise ParseError(f"line {lineno}: expected 'NT -> ...'")
        prods = rules.setdefault(head, [])
        for alt in body.split("|"):
            syms = tuple(alt.split())
            if not syms:
                raise ParseError(f"line {lineno}: empty alternative")
            prods.append(syms)
    if start is None:
        raise ParseError("grammar text contains no rules")
    return Grammar(rules, start)


def load_grammar(path) -> Grammar:
    with open(path, encoding="utf-8") as fh:
        return parse_grammar(fh.read())


def builtin_grammar(name: str) -> Grammar:
    """Load one of the grammars shipped with the package (``toy``, ``cantstop``)."""
    text = resources.files("sketchsynth.grammars").joinpath(f"{name}.grammar").read_text()
    return parse_grammar(text)


# --- construction -----------------------------------------------------------


def hole(symbol: str) -> Node:
    return Node(symbol)


def _expand_node(grammar: Grammar, symbol: str, index: int) -> Node:
    prods = grammar.rules[symbol]
    if not 0 <= index < len(prods):
        raise ContractViolation(f"production index {index} invalid for {symbol!r}")
    return Node(symbol, index, tuple(Node(s) for s in prods[index]))


def random_subtree(grammar: Grammar, symbol: str, rng: random.Random,
                   depth_limit: int = DEFAULT_DEPTH_LIMIT, depth: int = 0) -> Node:
    """Randomly derive a complete tree rooted at ``symbol``.

    Productions are drawn uniformly; at ``depth >= depth_limit`` only the
    productions on a shortest path to termination are eligible.
    """
    if symbol not in grammar.nonterminals:
        return Node(symbol)
    prods = grammar.rules[symbol]
    if depth >= depth_limit:
        choices = grammar.shortest[symbol]
        index = choices[int(rng.random() * len(choices))]
    else:
        index = int(rng.random() * len(prods))
    children = tuple(random_subtree(grammar, s, rng, depth_limit, depth + 1) for s in prods[index])
    return Node(symbol, index, children)


def random_program(grammar: Grammar, rng: random.Random,
                   depth_limit: int = DEFAULT_DEPTH_LIMIT) -> Node:
    """A complete program derived from the start symbol."""
    return random_subtree(grammar, grammar.start, rng, depth_limit)


def complete_randomly(program: Node, grammar: Grammar, rng: random.Random,
                      depth_limit: int = DEFAULT_DEPTH_LIMIT) -> Node:
    """Fill every hole of ``program`` with a random subtree."""
    def fill(node, depth):
        if node.production is None:
            if node.symbol in grammar.nonterminals:
                return random_subtree(grammar, node.symbol, rng, depth_limit, depth)
            return node
        kids = tuple(fill(c, depth + 1) for c in node.children)
        if all(a is b for a, b in zip(kids, node.children)):
            return node
        return Node(node.symbol, node.production, kids)
    return fill(program, 0)


# --- queries ----------------------------------------------------------------


def iter_nodes(program: Node) -> Iterator[tuple[tuple[int, ...], Node]]:
    """Pre-order ``(path, node)`` pairs; a path is a tuple of child indices."""
    stack = [((), program)]
    while stack:
        path, node = stack.pop()
        yield path, node
        for i in range(len(node.children) - 1, -1, -1):
            stack.append((path + (i,), node.children[i]))


def holes(program: Node, grammar: Grammar) -> list[tuple[int, ...]]:
    """Paths of nonterminal leaves, in leftmost (pre-order) order."""
    return [p for p, n in iter_nodes(program)
            if n.production is None and n.symbol in grammar.nonterminals]


def is_complete(program: Node, grammar: Grammar) -> bool:
    return not any(n.production is None and n.symbol in grammar.nonterminals
                   for _, n in iter_nodes(program))


def node_at(program: Node, path: Sequence[int]) -> Node:
    node = program
    for i in path:
        node = node.children[i]
    return node


def replace_at(program: Node, path: Sequence[int], subtree: Node) -> Node:
    if not path:
        return subtree
    head, rest = path[0], path[1:]
    kids = list(program.children)
    kids[head] = replace_at(kids[head], rest, subtree)
    return Node(program.symbol, program.production, tuple(kids))


def size(program: Node) -> int:
    """Number of nodes in the tree."""
    return sum(1 for _ in iter_nodes(program))


def leaves(program: Node) -> list[str]:
    return [n.symbol for _, n in iter_nodes(program) if not n.children]


def to_text(program: Node) -> str:
    """Frontier of the tree: terminals and holes joined by spaces."""
    return " ".join(leaves(program))


# --- search operations ------------------------------------------------------


def neighbor(program: Node, grammar: Grammar, rng: random.Random,
             leaf_restricted: bool = False, depth_limit: int = DEFAULT_DEPTH_LIMIT,
             sketch: Node | None = None) -> Node:
    """Replace one uniformly chosen nonterminal subtree with a fresh random one.

    Without ``leaf_restricted`` every node carrying a nonterminal is a
    candidate, the root included.  With it, only the holes of ``sketch``
    (default: ``program`` itself) are candidates; the sketch's holes must be
    positions in ``program`` so the sketch's structure is never modified.
    """
    if leaf_restricted:
        candidates = holes(sketch if sketch is not None else program, grammar)
        if not candidates:
            raise ContractViolation("leaf-restricted neighbor needs at least one nonterminal leaf")
    else:
        candidates = [p for p, n in iter_nodes(program) if n.symbol in grammar.nonterminals]
        if not candidates:
            raise ContractViolation("program has no nonterminal node to replace")
    path = candidates[int(rng.random() * len(candidates))]
    symbol = node_at(program, path).symbol
    fresh = random_subtree(grammar, symbol, rng, depth_limit, len(path))
    return replace_at(program, path, fresh)


def expand_leftmost(partial: Node, grammar: Grammar, production: int) -> Node:
    """Copy of ``partial`` with its leftmost hole expanded by ``production``."""
    paths = holes(partial, grammar)
    if not paths:
        raise ContractViolation("program is complete; nothing to expand")
    path = paths[0]
    return replace_at(partial, path, _expand_node(grammar, node_at(partial, path).symbol, production))


def enumerate_children(partial: Node, grammar: Grammar) -> list[Node]:
    """One child per production of the leftmost hole, in grammar order."""
    paths = holes(partial, grammar)
    if not paths:
        return []
    path = paths[0]
    symbol = node_at(partial, path).symbol
    return [replace_at(partial, path, _expand_node(grammar, symbol, i))
            for i in range(len(grammar.rules[symbol]))]


def derivation_sequence(program: Node) -> Derivation:
    """Leftmost-order ``(nonterminal, production)`` list of the expanded nodes."""
    return [(n.symbol, n.production) for _, n in iter_nodes(program) if n.production is not None]


def from_derivation(grammar: Grammar, derivation: Sequence[tuple[str, int]],
                    start: str | None = None) -> Node:
    """Replay a derivation from the start symbol through :func:`expand_leftmost`."""
    program = hole(start or grammar.start)
    for symbol, index in derivation:
        paths = holes(program, grammar)
        if not paths:
            raise ContractViolation("derivation longer than the program it describes")
        if node_at(program, paths[0]).symbol != symbol:
            raise ContractViolation(
                f"derivation expands {symbol!r} but leftmost hole is {node_at(program, paths[0]).symbol!r}")
        program = expand_leftmost(program, grammar, index)
    return program


def derivation_prefix(program: Node, sketch: Node) -> bool:
    """True when ``program`` agrees with ``sketch`` on every expanded sketch node."""
    if sketch.production is None:
        return sketch.symbol == program.symbol
    if program.symbol != sketch.symbol or program.production != sketch.production:
        return False
    return all(derivation_prefix(c, s) for c, s in zip(program.children, sketch.children))


# --- s-expressions ----------------------------------------------------------


def to_sexpr(program: Node) -> str:
    """``(NT child ...)`` for expanded nodes, bare atoms for terminals and holes."""
    if program.production is None:
        return program.symbol
    if not program.children:
        return f"({program.symbol})"
    return "(" + program.symbol + " " + " ".join(to_sexpr(c) for c in program.children) + ")"


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse_sexpr(text: str, grammar: Grammar) -> Node:
    """Inverse of :func:`to_sexpr`; production indices are recovered from the grammar."""
    tokens = _TOKEN.findall(text)
    pos = 0

    def parse():
        nonlocal pos
        if pos >= len(tokens):
            raise ParseError("unexpected end of s-expression")
        tok = tokens[pos]
        pos += 1
        if tok == ")":
            raise ParseError("unexpected ')'")
        if tok != "(":
            if tok not in grammar.nonterminals and tok not in grammar.terminals:
                raise ParseError(f"unknown symbol {tok!r}")
            return Node(tok)
        if pos >= len(tokens) or tokens[pos] in "()":
            raise ParseError("expected nonterminal after '('")
        symbol = tokens[pos]
        pos += 1
        if symbol not in grammar.nonterminals:
            raise ParseError(f"{symbol!r} is not a nonterminal")
        kids = []
        while True:
            if pos >= len(tokens):
                raise ParseError("unbalanced parentheses")
            if tokens[pos] == ")":
                pos += 1
                break
            kids.append(parse())
        shape = tuple(k.symbol for k in kids)
        try:
            index = grammar.rules[symbol].index(shape)
        except ValueError:
            raise ParseError(f"no production {symbol} -> {' '.join(shape)}") from None
        return Node(symbol, index, tuple(kids))

    node = parse()
    if pos != len(tokens):
        raise ParseError("trailing tokens after s-expression")
    return node
