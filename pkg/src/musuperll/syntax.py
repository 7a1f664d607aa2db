"""Formulas of circular linear logic with signature-indexed exponentials.

Fixed-point binders use de Bruijn indices: ``Var(0)`` is bound by the
nearest enclosing ``Mu``/``Nu``.  Formulas are immutable and hashable; each
node caches its hash, its size and its number of loose binder indices so
that closure computations and proof checking stay cheap.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator

__all__ = [
    "Formula", "Atom", "NegAtom", "Var", "Mu", "Nu", "Par", "Tensor", "Plus",
    "With", "One", "Bot", "Zero", "Top", "Whynot", "Bang",
    "negate", "shift", "subst", "unfold", "children", "is_closed",
    "build_closure", "ClosureTable", "ClosureOverflow", "NotAFixedPoint",
    "FormulaSyntaxError", "parse_formula", "parse_formulas", "show",
    "ANON_SIG",
]

# signature given to ?/! written without brackets when no default is known
ANON_SIG = "_"


class ClosureOverflow(Exception):
    """The Fischer-Ladner closure exceeded the configured cap."""


class NotAFixedPoint(ValueError):
    """``unfold`` was applied to something that is not a mu/nu formula."""


class FormulaSyntaxError(ValueError):
    def __init__(self, msg: str, text: str, pos: int):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{msg} at line {line}, column {col}")
        self.line, self.col = line, col


class Formula:
    __slots__ = ()

    # filled in by every subclass' __post_init__
    _h: int
    size: int
    loose: int

    def __str__(self) -> str:
        return show(self)


def _init(obj, h, size, loose):
    object.__setattr__(obj, "_h", h)
    object.__setattr__(obj, "size", size)
    object.__setattr__(obj, "loose", loose)


def _node(cls):
    """Frozen slotted dataclass whose hash is computed once."""
    cls = dataclass(frozen=True, slots=True)(cls)
    cls.__hash__ = lambda self: self._h
    return cls


_X = dict(init=False, repr=False, compare=False)


@_node
class Atom(Formula):
    name: str
    _h: int = field(**_X)
    size: int = field(**_X)
    loose: int = field(**_X)

    def __post_init__(self):
        _init(self, hash(("a", self.name)), 1, 0)


@_node
class NegAtom(Formula):
    name: str
    _h: int = field(**_X)
    size: int = field(**_X)
    loose: int = field(**_X)

    def __post_init__(self):
        _init(self, hash(("n", self.name)), 1, 0)


@_node
class Var(Formula):
    index: int
    _h: int = field(**_X)
    size: int = field(**_X)
    loose: int = field(**_X)

    def __post_init__(self):
        _init(self, hash(("v", self.index)), 1, self.index + 1)


@_node
class Mu(Formula):
    body: Formula
    _h: int = field(**_X)
    size: int = field(**_X)
    loose: int = field(**_X)

    def __post_init__(self):
        b = self.body
        _init(self, hash(("mu", b._h)), b.size + 1, max(b.loose - 1, 0))


@_node
class Nu(Formula):
    body: Formula
    _h: int = field(**_X)
    size: int = field(**_X)
    loose: int = field(**_X)

    def __post_init__(self):
        b = self.body
        _init(self, hash(("nu", b._h)), b.size + 1, max(b.loose - 1, 0))


def _binary_init(self, tag):
    l, r = self.left, self.right
    _init(self, hash((tag, l._h, r._h)), l.size + r.size + 1, max(l.loose, r.loose))


@_node
class Par(Formula):
    left: Formula
    right: Formula
    _h: int = field(**_X)
    size: int = field(**_X)
    loose: int = field(**_X)

    def __post_init__(self):
        _binary_init(self, "par")


@_node
class Tensor(Formula):
    left: Formula
    right: Formula
    _h: int = field(**_X)
    size: int = field(**_X)
    loose: int = field(**_X)

    def __post_init__(self):
        _binary_init(self, "tensor")


@_node
class Plus(Formula):
    left: Formula
    right: Formula
    _h: int = field(**_X)
    size: int = field(**_X)
    loose: int = field(**_X)

    def __post_init__(self):
        _binary_init(self, "plus")


@_node
class With(Formula):
    left: Formula
    right: Formula
    _h: int = field(**_X)
    size: int = field(**_X)
    loose: int = field(**_X)

    def __post_init__(self):
        _binary_init(self, "with")


@_node
class One(Formula):
    _h: int = field(**_X)
    size: int = field(**_X)
    loose: int = field(**_X)

    def __post_init__(self):
        _init(self, hash("one"), 1, 0)


@_node
class Bot(Formula):
    _h: int = field(**_X)
    size: int = field(**_X)
    loose: int = field(**_X)

    def __post_init__(self):
        _init(self, hash("bot"), 1, 0)


@_node
class Zero(Formula):
    _h: int = field(**_X)
    size: int = field(**_X)
    loose: int = field(**_X)

    def __post_init__(self):
        _init(self, hash("zero"), 1, 0)


@_node
class Top(Formula):
    _h: int = field(**_X)
    size: int = field(**_X)
    loose: int = field(**_X)

    def __post_init__(self):
        _init(self, hash("top"), 1, 0)


@_node
class Whynot(Formula):
    sig: str
    body: Formula
    _h: int = field(**_X)
    size: int = field(**_X)
    loose: int = field(**_X)

    def __post_init__(self):
        b = self.body
        _init(self, hash(("?", self.sig, b._h)), b.size + 1, b.loose)


@_node
class Bang(Formula):
    sig: str
    body: Formula
    _h: int = field(**_X)
    size: int = field(**_X)
    loose: int = field(**_X)

    def __post_init__(self):
        b = self.body
        _init(self, hash(("!", self.sig, b._h)), b.size + 1, b.loose)


BINARY = (Par, Tensor, Plus, With)
DUAL_BINARY = {Par: Tensor, Tensor: Par, Plus: With, With: Plus}
UNITS = {One: Bot, Bot: One, Zero: Top, Top: Zero}


def is_closed(f: Formula) -> bool:
    return f.loose == 0


def children(f: Formula) -> tuple[Formula, ...]:
    """Immediate syntactic subterms (binder bodies are open)."""
    match f:
        case Par(l, r) | Tensor(l, r) | Plus(l, r) | With(l, r):
            return (l, r)
        case Mu(b) | Nu(b) | Whynot(_, b) | Bang(_, b):
            return (b,)
        case _:
            return ()


@lru_cache(maxsize=1 << 16)
def negate(f: Formula) -> Formula:
    """Linear negation; an involution.  Bound variables are left in place."""
    match f:
        case Atom(n):
            return NegAtom(n)
        case NegAtom(n):
            return Atom(n)
        case Var():
            return f
        case Mu(b):
            return Nu(negate(b))
        case Nu(b):
            return Mu(negate(b))
        case Par(l, r) | Tensor(l, r) | Plus(l, r) | With(l, r):
            return DUAL_BINARY[type(f)](negate(l), negate(r))
        case Whynot(s, b):
            return Bang(s, negate(b))
        case Bang(s, b):
            return Whynot(s, negate(b))
        case _:
            return UNITS[type(f)]()


def _rebuild(f: Formula, kids: list[Formula]) -> Formula:
    match f:
        case Par() | Tensor() | Plus() | With():
            return type(f)(kids[0], kids[1])
        case Mu() | Nu():
            return type(f)(kids[0])
        case Whynot(s, _) | Bang(s, _):
            return type(f)(s, kids[0])
    return f


def shift(f: Formula, d: int, cutoff: int = 0) -> Formula:
    """Add ``d`` to every variable index >= ``cutoff``."""
    if f.loose <= cutoff or d == 0:
        return f
    match f:
        case Var(i):
            return Var(i + d) if i >= cutoff else f
        case Mu(b) | Nu(b):
            return type(f)(shift(b, d, cutoff + 1))
    return _rebuild(f, [shift(c, d, cutoff) for c in children(f)])


def subst(f: Formula, j: int, s: Formula) -> Formula:
    """Replace ``Var(j)`` by ``s`` (indices of ``s`` are shifted under binders)."""
    if f.loose <= j:
        return f
    match f:
        case Var(i):
            return s if i == j else f
        case Mu(b) | Nu(b):
            return type(f)(subst(b, j + 1, shift(s, 1)))
    return _rebuild(f, [subst(c, j, s) for c in children(f)])


@lru_cache(maxsize=1 << 16)
def unfold(f: Formula) -> Formula:
    """``μX.F`` becomes ``F[X := μX.F]``; likewise for ν."""
    if not isinstance(f, (Mu, Nu)):
        raise NotAFixedPoint(f"not a fixed point: {show(f)}")
    return shift(subst(f.body, 0, shift(f, 1)), -1)


# ---------------------------------------------------------------- closure

def _cap() -> int:
    return int(os.environ.get("MULL_MAX_CLOSURE", 10**6))


@dataclass(frozen=True)
class ClosureTable:
    """Closed formulas reachable by subformulas and unfoldings, with priorities.

    The priority is a linear extension of the "is a proper syntactic
    subterm of" order: smaller formulas come first, ties are broken by the
    printed form.  In particular every immediate subformula sits below its
    parent and every fixed point whose variable occurs sits below its
    unfolding.
    """

    formulas: tuple[Formula, ...]
    priority: dict[Formula, int]

    def __contains__(self, f: Formula) -> bool:
        return f in self.priority

    def __len__(self) -> int:
        return len(self.formulas)

    def is_nu(self, prio: int) -> bool:
        return isinstance(self.formulas[prio], Nu)


def _steps(f: Formula) -> Iterator[Formula]:
    if isinstance(f, (Mu, Nu)):
        yield unfold(f)
    else:
        yield from children(f)


def build_closure(formulas: Iterable[Formula]) -> ClosureTable:
    cap = _cap()
    seen: dict[Formula, None] = {}
    todo = []
    for f in formulas:
        if not is_closed(f):
            raise ValueError(f"closure of an open formula: {show(f)}")
        if f not in seen:
            seen[f] = None
            todo.append(f)
    while todo:
        f = todo.pop()
        for g in _steps(f):
            if g not in seen:
                seen[g] = None
                if len(seen) > cap:
                    raise ClosureOverflow(f"closure exceeds {cap} formulas")
                todo.append(g)
    ordered = tuple(sorted(seen, key=lambda g: (g.size, show(g))))
    return ClosureTable(ordered, {g: i for i, g in enumerate(ordered)})


# ---------------------------------------------------------- text format

_TOKEN = re.compile(r"\s*(?:(?P<id>[A-Za-z_][A-Za-z0-9_']*)|(?P<num>[01])(?![A-Za-z0-9_])|(?P<sym>[~*|+&?!()\[\].,]))")
_KEYWORDS = {"mu", "nu", "bot", "top"}
_LEVEL = {Par: 1, Plus: 1, Tensor: 2, With: 2}
_OPS = {"|": Par, "+": Plus, "*": Tensor, "&": With}
_SYM = {Par: "|", Plus: "+", Tensor: "*", With: "&"}


class _Parser:
    def __init__(self, text: str, default_sig: str | None):
        self.text = text
        self.default_sig = default_sig
        self.toks: list[tuple[str, str, int]] = []
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN.match(text, pos)
            if not m:
                raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
            kind = m.lastgroup
            self.toks.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.i = 0
        self.env: list[str] = []

    def peek(self) -> tuple[str, str, int] | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def error(self, msg: str):
        t = self.peek()
        raise FormulaSyntaxError(msg, self.text, t[2] if t else len(self.text))

    def take(self, value: str | None = None, kind: str | None = None) -> str:
        t = self.peek()
        if t is None or (value is not None and t[1] != value) or (kind is not None and t[0] != kind):
            self.error(f"expected {value or kind}")
        self.i += 1
        return t[1]

    def formula(self) -> Formula:
        return self.level(1)

    def level(self, lv: int) -> Formula:
        if lv == 3:
            return self.unary()
        operands = [self.level(lv + 1)]
        ops = []
        while (t := self.peek()) and t[0] == "sym" and t[1] in _OPS and _LEVEL[_OPS[t[1]]] == lv:
            if ops and _OPS[t[1]] is not ops[0]:
                self.error("mixed operators need parentheses")
            ops.append(_OPS[t[1]])
            self.i += 1
            operands.append(self.level(lv + 1))
        f = operands.pop()
        while operands:
            f = ops[0](operands.pop(), f)
        return f

    def sig(self) -> str:
        t = self.peek()
        if t and t[1] == "[":
            self.i += 1
            name = self.take(kind="id") if self.peek() and self.peek()[0] == "id" else self.take(kind="num")
            self.take("]")
            return name
        return self.default_sig if self.default_sig is not None else ANON_SIG

    def unary(self) -> Formula:
        t = self.peek()
        if t is None:
            self.error("unexpected end of formula")
        kind, val, _ = t
        if kind == "sym":
            if val == "(":
                self.i += 1
                f = self.formula()
                self.take(")")
                return f
            if val in "?!":
                self.i += 1
                s = self.sig()
                body = self.unary()
                return (Whynot if val == "?" else Bang)(s, body)
            if val == "~":
                self.i += 1
                name = self.take(kind="id")
                if name in _KEYWORDS or name in self.env:
                    self.error("negation applies to atoms only")
                return NegAtom(name)
            self.error(f"unexpected {val!r}")
        if kind == "num":
            self.i += 1
            return One() if val == "1" else Zero()
        self.i += 1
        if val in ("mu", "nu"):
            name = self.take(kind="id")
            self.take(".")
            self.env.append(name)
            body = self.formula()
            self.env.pop()
            return (Mu if val == "mu" else Nu)(body)
        if val == "bot":
            return Bot()
        if val == "top":
            return Top()
        for depth, name in enumerate(reversed(self.env)):
            if name == val:
                return Var(depth)
        return Atom(val)


def parse_formula(text: str, default_sig: str | None = None) -> Formula:
    """Parse one formula.

    Grammar (loosest first)::

        F ::= mu X. F | nu X. F | D
        D ::= C | C '|' D | C '+' D      (one operator per level unless parenthesised)
        C ::= U | U '*' C | U '&' C
        U ::= '?' ['[' sig ']'] U | '!' ['[' sig ']'] U | '~' atom
            | atom | X | 1 | 0 | bot | top | '(' F ')' | mu X. F | nu X. F

    A name bound by an enclosing ``mu``/``nu`` is a variable, any other
    name is an atom.
    """
    p = _Parser(text, default_sig)
    f = p.formula()
    if p.peek() is not None:
        p.error("trailing input")
    return f


def parse_formulas(text: str, default_sig: str | None = None) -> list[Formula]:
    """Comma separated list of formulas (possibly empty)."""
    p = _Parser(text, default_sig)
    out: list[Formula] = []
    if p.peek() is None:
        return out
    while True:
        out.append(p.formula())
        if p.peek() is None:
            return out
        p.take(",")


_NAMES = ("X", "Y", "Z", "W", "V", "U")


def _atoms(f: Formula, acc: set[str]) -> set[str]:
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, (Atom, NegAtom)):
            acc.add(g.name)
        stack.extend(children(g))
    return acc


def show(f: Formula, default_sig: str | None = None) -> str:
    """Print ``f`` so that ``parse_formula`` gives it back."""
    taken = _atoms(f, set()) | _KEYWORDS
    pool = [n for n in _NAMES if n not in taken]
    k = 1
    while len(pool) < 64:
        pool += [f"{n}{k}" for n in _NAMES if f"{n}{k}" not in taken]
        k += 1
    out: list[str] = []
    _show(f, [], pool, default_sig, True, out)
    return "".join(out)


def _show(f, env, pool, dsig, tail, out):
    match f:
        case Atom(n):
            out.append(n)
        case NegAtom(n):
            out.append("~" + n)
        case Var(i):
            out.append(env[-1 - i] if i < len(env) else f"#{i}")
        case One():
            out.append("1")
        case Bot():
            out.append("bot")
        case Zero():
            out.append("0")
        case Top():
            out.append("top")
        case Mu(b) | Nu(b):
            if not tail:
                out.append("(")
            name = pool[len(env) % len(pool)] if len(env) < len(pool) else f"X{len(env)}"
            out.append(("mu " if isinstance(f, Mu) else "nu ") + name + ". ")
            _show(b, env + [name], pool, dsig, True, out)
            if not tail:
                out.append(")")
        case Whynot(s, b) | Bang(s, b):
            out.append("?" if isinstance(f, Whynot) else "!")
            if s != dsig:
                out.append(f"[{s}] ")
            if type(b) in _LEVEL:
                out.append("(")
                _show(b, env, pool, dsig, True, out)
                out.append(")")
            else:
                _show(b, env, pool, dsig, tail, out)
        case _:
            lv = _LEVEL[type(f)]
            l, r = f.left, f.right
            lp = type(l) in _LEVEL and _LEVEL[type(l)] <= lv
            if lp:
                out.append("(")
            _show(l, env, pool, dsig, lp, out)
            if lp:
                out.append(")")
            out.append(f" {_SYM[type(f)]} ")
            rp = type(r) in _LEVEL and (_LEVEL[type(r)] < lv or (_LEVEL[type(r)] == lv and type(r) is not type(f)))
            if rp:
                out.append("(")
            _show(r, env, pool, dsig, rp or tail, out)
            if rp:
                out.append(")")
