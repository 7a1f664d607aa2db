"""Exponential signatures, derivability closure, derived rules and the
cut-elimination axioms of a superLL instance."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from importlib import resources

__all__ = [
    "Signature", "RuleName", "InstanceSpec", "Violation", "AxiomReport",
    "Derivation", "Contr", "Weak", "Mpx", "Id", "NotDerivable", "UnknownInstance",
    "InstanceSyntaxError", "closure_contains", "closure_oracle",
    "synthesize_derived", "check_axioms", "builtin_instance", "parse_instance",
    "print_instance", "AXIOM_NAMES", "shipped_instance_text", "mpx", "c",
]


class NotDerivable(ValueError):
    pass


class UnknownInstance(KeyError):
    pass


class InstanceSyntaxError(ValueError):
    def __init__(self, msg: str, line: int, col: int = 1):
        super().__init__(f"{msg} at line {line}, column {col}")
        self.line, self.col = line, col


@dataclass(frozen=True)
class Signature:
    mpx: frozenset[int] = frozenset()
    contr: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "mpx", frozenset(self.mpx))
        object.__setattr__(self, "contr", frozenset(self.contr))
        if any(i < 0 for i in self.mpx) or any(i < 2 for i in self.contr):
            raise ValueError("mpx indices must be >= 0 and contraction indices >= 2")

    def has(self, rule: RuleName) -> bool:
        """Primitive membership σ(r)."""
        return rule.index in (self.mpx if rule.kind == "mpx" else self.contr)


@dataclass(frozen=True, order=True)
class RuleName:
    kind: str  # "mpx" or "c"
    index: int

    def __str__(self):
        return f"{self.kind}_{self.index}"


def mpx(i: int) -> RuleName:
    return RuleName("mpx", i)


def c(i: int) -> RuleName:
    return RuleName("c", i)


# ----------------------------------------------------------- derivations
#
# A derivation of c_i (i copies of ?A into one ?A) or mpx_i (i copies of A
# into one ?A) is a tree: internal nodes apply a primitive contraction to
# the outputs of their children, leaves consume input copies.


@dataclass(frozen=True)
class Id:
    """Consumes one ?A copy unchanged."""


@dataclass(frozen=True)
class Mpx:
    """Primitive mpx_j on j naked copies (j >= 1)."""
    arity: int


@dataclass(frozen=True)
class Weak:
    """Primitive mpx_0: produces ?A from nothing."""


@dataclass(frozen=True)
class Contr:
    """Primitive c_k on the outputs of k >= 2 sub-derivations."""
    kids: tuple[Derivation, ...]


Derivation = Id | Mpx | Weak | Contr


def consumed(d: Derivation) -> int:
    match d:
        case Id():
            return 1
        case Mpx(j):
            return j
        case Weak():
            return 0
        case Contr(kids):
            return sum(consumed(k) for k in kids)


def steps(d: Derivation) -> list[RuleName]:
    """Primitive rules used, in post-order (top of the proof first)."""
    match d:
        case Id():
            return []
        case Mpx(j):
            return [mpx(j)]
        case Weak():
            return [mpx(0)]
        case Contr(kids):
            return [r for k in kids for r in steps(k)] + [c(len(kids))]


def _graft(outer: Derivation, inner: Derivation) -> tuple[Derivation, bool]:
    """Replace the first Id leaf of ``outer`` by ``inner``."""
    match outer:
        case Id():
            return inner, True
        case Contr(kids):
            out = []
            done = False
            for k in kids:
                if not done:
                    k, done = _graft(k, inner)
                out.append(k)
            return Contr(tuple(out)), done
    return outer, False


def _derelict(d: Derivation) -> Derivation:
    match d:
        case Id():
            return Mpx(1)
        case Contr(kids):
            return Contr(tuple(_derelict(k) for k in kids))
    return d


def _saturate(sig: Signature, bound: int) -> dict[RuleName, Derivation]:
    """All rule names of index <= bound in the closure, with a derivation each.

    With c_1 available every closure rule produces an index at least as big
    as each premise index, so nothing above ``bound`` is ever needed.
    """
    facts: dict[RuleName, Derivation] = {c(1): Id()}
    for i in sorted(sig.mpx):
        if i <= bound:
            facts[mpx(i)] = Weak() if i == 0 else Mpx(i)
    for i in sorted(sig.contr):
        if i <= bound:
            facts[c(i)] = Contr((Id(),) * i)
    changed = True
    while changed:
        changed = False
        cs = sorted((r.index, d) for r, d in facts.items() if r.kind == "c")
        for (i, di), (j, dj) in itertools.product(cs, cs):
            k = i + j - 1
            if k <= bound and c(k) not in facts:
                facts[c(k)] = _graft(dj, di)[0]
                changed = True
        if 2 in sig.contr:
            ms = sorted((r.index, d) for r, d in facts.items() if r.kind == "mpx" and r.index > 0)
            for (i, di), (j, dj) in itertools.product(ms, ms):
                if i + j <= bound and mpx(i + j) not in facts:
                    facts[mpx(i + j)] = Contr((di, dj))
                    changed = True
        if 1 in sig.mpx:
            for r, d in sorted(facts.items()):
                if r.kind == "c" and mpx(r.index) not in facts:
                    facts[mpx(r.index)] = _derelict(d)
                    changed = True
    return facts


def _normalize(rule: RuleName) -> RuleName:
    return mpx(0) if rule == c(0) else rule


def closure_contains(sig: Signature, rule: RuleName) -> bool:
    """σ̄(rule): c_0 means mpx_0 and c_1 always holds."""
    rule = _normalize(rule)
    if rule == mpx(0):
        return 0 in sig.mpx
    return rule in _saturate(sig, rule.index)


def synthesize_derived(sig: Signature, rule: RuleName) -> Derivation:
    rule = _normalize(rule)
    if rule == mpx(0):
        if 0 not in sig.mpx:
            raise NotDerivable(str(rule))
        return Weak()
    facts = _saturate(sig, rule.index)
    if rule not in facts:
        raise NotDerivable(f"{rule} is not in the closure")
    return facts[rule]


def closure_oracle(sig: Signature, rule: RuleName, slack: int = 4) -> bool:
    """Naive saturation over a generous index window (test oracle)."""
    rule = _normalize(rule)
    top = 2 * max([rule.index, *sig.mpx, *sig.contr]) + slack
    C = {i for i in sig.contr if i <= top} | {1}
    M = {i for i in sig.mpx if i <= top}
    while True:
        C2 = C | {i + j - 1 for i in C for j in C if i + j - 1 <= top}
        M2 = set(M)
        if 2 in sig.contr:
            M2 |= {i + j for i in M for j in M if i and j and i + j <= top}
        if 1 in sig.mpx:
            M2 |= C
        if C2 == C and M2 == M:
            break
        C, M = C2, M2
    return rule.index in (M if rule.kind == "mpx" else C)


# ------------------------------------------------------------- instances

@dataclass(frozen=True)
class InstanceSpec:
    sigs: dict[str, Signature]
    leq_g: frozenset[tuple[str, str]] = frozenset()
    leq_f: frozenset[tuple[str, str]] = frozenset()
    leq_u: frozenset[tuple[str, str]] = frozenset()
    name: str = field(default="", compare=False)

    def __post_init__(self):
        for rel in (self.leq_g, self.leq_f, self.leq_u):
            for a, b in rel:
                if a not in self.sigs or b not in self.sigs:
                    raise ValueError(f"relation mentions undeclared signature {a if a not in self.sigs else b}")
        object.__setattr__(self, "leq_g", frozenset(self.leq_g))
        object.__setattr__(self, "leq_f", frozenset(self.leq_f))
        object.__setattr__(self, "leq_u", frozenset(self.leq_u))

    def leq(self, s: str) -> frozenset[tuple[str, str]]:
        return {"g": self.leq_g, "f": self.leq_f, "u": self.leq_u}[s]

    def default_sig(self) -> str | None:
        return next(iter(self.sigs)) if len(self.sigs) == 1 else None

    def closure(self, sig: str, rule: RuleName) -> bool:
        return sig in self.sigs and closure_contains(self.sigs[sig], rule)


AXIOM_NAMES = ("Ax^g_m", "Ax^fu_m", "Ax_c", "Ax_trans", "Ax≤^gs", "Ax≤^fu", "Ax≤^fg", "Ax≤^us")


@dataclass(frozen=True)
class Violation:
    axiom: str
    witness: tuple
    detail: str = ""

    def __str__(self):
        return f"{self.axiom} violated by {self.witness}: {self.detail}"


@dataclass(frozen=True)
class AxiomReport:
    violations: tuple[Violation, ...]

    @property
    def satisfied(self) -> bool:
        return not self.violations


def check_axioms(inst: InstanceSpec, expansion: bool = False, closure=closure_contains) -> AxiomReport:
    """Decide the eight cut-elimination axioms (and optionally expansion).

    ``closure`` can be swapped for ``closure_oracle`` to cross-check.
    """
    E = sorted(inst.sigs)
    S = inst.sigs
    out: list[Violation] = []
    rel = {s: inst.leq(s) for s in "gfu"}

    for a, b in sorted(rel["g"]):
        for i in sorted(S[a].mpx):
            if not closure(S[b], c(i)):
                out.append(Violation("Ax^g_m", (a, b, i), f"{a}(mpx_{i}) but not closure({b})(c_{i})"))
    for s in "fu":
        for a, b in sorted(rel[s]):
            for i in sorted(S[a].mpx):
                if not closure(S[b], mpx(i)):
                    out.append(Violation("Ax^fu_m", (s, a, b, i), f"{a}(mpx_{i}) but not closure({b})(mpx_{i})"))
    for s in "gfu":
        for a, b in sorted(rel[s]):
            for i in sorted(S[a].contr):
                if not closure(S[b], c(i)):
                    out.append(Violation("Ax_c", (s, a, b, i), f"{a}(c_{i}) but not closure({b})(c_{i})"))

    def compose(name, first, second, result, extra=None):
        for a, b in sorted(rel[first]):
            for b2, d in sorted(rel[second]):
                if b2 != b:
                    continue
                if (a, d) not in rel[result]:
                    out.append(Violation(name, (first, second, a, b, d), f"{a}≤{first}{b}≤{second}{d} but not {a}≤{result}{d}"))
                if extra:
                    extra(a, b, d)

    for s in "gfu":
        compose("Ax_trans", s, s, s)
    for s in "gfu":
        compose("Ax≤^gs", "g", s, "g")
    compose("Ax≤^fu", "f", "u", "f")

    def fg_extra(a, b, d):
        for e in E:
            if (a, e) in rel["f"] and not ((a, e) in rel["g"] and 1 in S[e].mpx):
                out.append(Violation("Ax≤^fg", ("f", "g", a, b, d, e),
                                     f"{a}≤f{e} requires {a}≤g{e} and {e}(mpx_1)"))

    compose("Ax≤^fg", "f", "g", "g", fg_extra)
    for s in "gfu":
        compose("Ax≤^us", "u", s, s)

    if expansion:
        for a in E:
            ok = (a, a) in rel["u"] or (a, a) in rel["f"] or ((a, a) in rel["g"] and 1 in S[a].mpx)
            if not ok:
                out.append(Violation("expansion", (a,), f"{a} is neither ≤u nor ≤f itself, nor ≤g with mpx_1"))
    # each axiom may be reported from several relation letters; keep the first
    seen, uniq = set(), []
    for v in out:
        if (v.axiom, v.witness) not in seen:
            seen.add((v.axiom, v.witness))
            uniq.append(v)
    return AxiomReport(tuple(uniq))


# ---------------------------------------------------------- file format

_SIG_LINE = re.compile(r"sig\s+(?P<name>[A-Za-z0-9_]+)((\s+mpx=\{(?P<mpx>[0-9,\s]*)\})|(\s+contr=\{(?P<contr>[0-9,\s]*)\}))*\s*$")
_LEQ_LINE = re.compile(r"leq\s+(?P<rel>[gfu])\s+(?P<a>[A-Za-z0-9_]+)\s+(?P<b>[A-Za-z0-9_]+)\s*$")


def _ints(text: str | None) -> frozenset[int]:
    if not text or not text.strip():
        return frozenset()
    return frozenset(int(x) for x in text.replace(" ", "").split(",") if x)


def parse_instance(text: str, name: str = "") -> InstanceSpec:
    """Line-oriented instance format::

        # comment
        sig <name> mpx={0,1} contr={2}
        leq g|f|u <a> <b>

    Each field of a ``sig`` line is optional (missing means empty) but may
    appear once.  At least one ``sig`` line is required.
    """
    sigs: dict[str, Signature] = {}
    rels: dict[str, set] = {"g": set(), "f": set(), "u": set()}
    pending = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        col = len(raw) - len(raw.lstrip()) + 1
        if line.startswith("sig"):
            m = _SIG_LINE.match(line)
            if not m or line.count("mpx=") > 1 or line.count("contr=") > 1:
                raise InstanceSyntaxError("malformed sig line", lineno, col)
            if m["name"] in sigs:
                raise InstanceSyntaxError(f"duplicate signature {m['name']}", lineno, col)
            try:
                sigs[m["name"]] = Signature(_ints(m["mpx"]), _ints(m["contr"]))
            except ValueError as e:
                raise InstanceSyntaxError(str(e), lineno, col) from None
        elif line.startswith("leq"):
            m = _LEQ_LINE.match(line)
            if not m:
                raise InstanceSyntaxError("malformed leq line", lineno, col)
            pending.append((lineno, col, m["rel"], m["a"], m["b"]))
        else:
            raise InstanceSyntaxError(f"unknown directive {line.split()[0]!r}", lineno, col)
    if not sigs:
        raise InstanceSyntaxError("no signature declared", 1)
    for lineno, col, r, a, b in pending:
        for x in (a, b):
            if x not in sigs:
                raise InstanceSyntaxError(f"undeclared signature {x}", lineno, col)
        rels[r].add((a, b))
    return InstanceSpec(sigs, frozenset(rels["g"]), frozenset(rels["f"]), frozenset(rels["u"]), name=name)


def print_instance(inst: InstanceSpec) -> str:
    lines = []
    for n, s in inst.sigs.items():
        mp = ",".join(map(str, sorted(s.mpx)))
        ct = ",".join(map(str, sorted(s.contr)))
        lines.append(f"sig {n} mpx={{{mp}}} contr={{{ct}}}")
    for r in "gfu":
        for a, b in sorted(inst.leq(r)):
            lines.append(f"leq {r} {a} {b}")
    return "\n".join(lines) + "\n"


def _ll() -> InstanceSpec:
    return InstanceSpec({"ll": Signature({0, 1}, {2})}, leq_g={("ll", "ll")}, name="ll")


def _ell(name="ell") -> InstanceSpec:
    return InstanceSpec({"e": Signature({0}, {2})}, leq_f={("e", "e")}, name=name)


def _box(k: int) -> InstanceSpec:
    acts = [f"a{i}" for i in range(1, k + 1)]
    sigs = {"box": Signature({0, 1}, {2})}
    sigs.update({a: Signature({0}, {2}) for a in acts})
    g = {("box", "box")} | {("box", a) for a in acts}
    f = {(a, a) for a in acts}
    return InstanceSpec(sigs, leq_g=frozenset(g), leq_f=frozenset(f), name=f"mu-ll-box:{k}")


def _counterexample() -> InstanceSpec:
    return InstanceSpec({"a": Signature({2}), "b": Signature()}, leq_g={("a", "b")}, name="counterexample")


def builtin_instance(name: str) -> InstanceSpec:
    """``ell``, ``mu-ell``, ``mu-ll-box:<k>``, ``ll`` or ``counterexample``."""
    if name == "ll":
        return _ll()
    if name in ("ell", "mu-ell"):
        return _ell(name)
    if name == "counterexample":
        return _counterexample()
    m = re.fullmatch(r"mu-ll-box:(\d+)", name)
    if m and int(m[1]) >= 1:
        return _box(int(m[1]))
    raise UnknownInstance(name)


def shipped_instance_text(name: str) -> str:
    """Contents of a shipped ``.inst`` file."""
    return (resources.files("musuperll") / "data" / "instances" / f"{name}.inst").read_text()
