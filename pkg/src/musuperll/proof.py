"""Proof trees with back-edges, explicit ancestry, multicuts and checking.

A proof is a tree of ``Proof`` nodes.  A premise may be a ``Back`` leaf
pointing at the nearest ancestor carrying the same label, which makes the
tree a finite presentation of a regular (circular) pre-proof.

Every node records, for each position of its conclusion, the list of
premise positions ``(k, q)`` it is the ancestor of.  Building nodes by hand
with positions is tedious, so the second half of this module provides a
small "tagged occurrence" layer: formula occurrences are objects, and
ancestry is computed from object identity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import networkx as nx

from .signatures import InstanceSpec, RuleName, print_instance
from .syntax import (Bang, Bot, Formula, One, Top, Whynot, Mu, Nu, Tensor, Par,
                     Plus, With, negate, unfold, is_closed, show)

__all__ = [
    "Rule", "Proof", "Back", "RuleError", "Mcut", "McutError", "KINDS",
    "check_wellformed", "validate_mcut", "restrict_context", "hanging_context",
    "detect_bang_context", "AllPromotions", "NotAllPromotions", "mcut_of",
    "walk", "proof_key", "same_proof", "unroll_node", "addr_str", "node_at",
    "Occ", "Tagged", "tag", "build", "open_rule", "Opened", "resolve_premise",
    "premise_seq", "PROMOTIONS",
]

KINDS = ("ax", "cut", "tensor", "par", "plus1", "plus2", "with", "one", "bot",
         "top", "mu", "nu", "mpx", "contr", "bang_g", "bang_f", "bang_u", "mcut")
PROMOTIONS = ("bang_g", "bang_f", "bang_u")
ARITY = {"ax": 0, "one": 0, "top": 0, "cut": 2, "tensor": 2, "with": 2}

Anc = tuple[tuple[tuple[int, int], ...], ...]
Pos = tuple[int, int]


@dataclass(frozen=True)
class Rule:
    kind: str
    principal: int | None = None
    anc: Anc = ()
    index: int | None = None          # arity of mpx / contr
    sig: str | None = None            # σ of mpx / contr / promotions
    taus: tuple[str, ...] = ()        # promotion context signatures, in position order
    pp: tuple[tuple[Pos, Pos], ...] = ()  # mcut pairing, each pair listed once

    def name(self) -> str:
        return f"{self.kind}({self.index})" if self.kind in ("mpx", "contr") else self.kind


_uids = itertools.count()


@dataclass(frozen=True, eq=False)
class Back:
    """Back-edge to the nearest ancestor labelled ``target``.

    ``seq`` is the sequent at the back-edge site; it must equal the target's.
    Site position ``j`` continues as target position ``perm[j]``.
    """

    target: str
    seq: tuple[Formula, ...]
    perm: tuple[int, ...] | None = None
    name: str | None = None

    def mapped(self, j: int) -> int:
        return j if self.perm is None else self.perm[j]


@dataclass(frozen=True, eq=False)
class Proof:
    seq: tuple[Formula, ...]
    rule: Rule
    premises: tuple[Proof | Back, ...] = ()
    label: str | None = None
    name: str | None = None     # node id from a file, for diagnostics only
    uid: int = field(default_factory=lambda: next(_uids))
    ncuts: int = field(init=False, repr=False)
    nnodes: int = field(init=False, repr=False)

    def __post_init__(self):
        cuts = 1 if self.rule.kind in ("cut", "mcut") else 0
        nodes = 1
        for p in self.premises:
            if isinstance(p, Proof):
                cuts += p.ncuts
                nodes += p.nnodes
            else:
                nodes += 1
        object.__setattr__(self, "ncuts", cuts)
        object.__setattr__(self, "nnodes", nodes)


def premise_seq(p: Proof | Back) -> tuple[Formula, ...]:
    return p.seq


# ----------------------------------------------------------- traversal

def addr_str(addr: Sequence[int]) -> str:
    return "r" + "".join(f".{i}" for i in addr)


def walk(p: Proof) -> Iterator[tuple[tuple[int, ...], Proof | Back, dict[str, tuple[tuple[int, ...], Proof]]]]:
    """Pre-order over the finite tree: (address, node, labels in scope)."""
    stack = [((), p, {})]
    while stack:
        addr, node, env = stack.pop()
        yield addr, node, env
        if isinstance(node, Proof):
            inner = env
            if node.label is not None:
                inner = dict(env)
                inner[node.label] = (addr, node)
            for k in range(len(node.premises) - 1, -1, -1):
                stack.append((addr + (k,), node.premises[k], inner))


def node_at(p: Proof, addr: Sequence[int]) -> tuple[Proof | Back, dict]:
    env: dict = {}
    node: Proof | Back = p
    here: tuple[int, ...] = ()
    for k in addr:
        if node.label is not None:
            env = dict(env)
            env[node.label] = (here, node)
        node = node.premises[k]
        here += (k,)
    return node, env


def proof_key(p: Proof):
    """Label- and name-independent structural key (back-edges by height)."""
    def key(node, depth, env):
        if isinstance(node, Back):
            up = env.get(node.target)
            return ("back", None if up is None else depth - up, node.perm)
        inner = env
        if node.label is not None:
            inner = dict(env)
            inner[node.label] = depth
        return (node.seq, node.rule, tuple(key(q, depth + 1, inner) for q in node.premises))
    return key(p, 0, {})


def same_proof(a: Proof, b: Proof) -> bool:
    return proof_key(a) == proof_key(b)


def unroll_node(x: Proof) -> Proof:
    """Drop the label of ``x``, turning back-edges to it into copies of ``x``.

    The result presents the same infinite proof, with ``x`` unfolded once.
    """
    if x.label is None:
        return x
    label = x.label

    def sub(node: Proof) -> Proof:
        if node.label == label and node is not x:
            return node                      # shadowed
        changed = False
        prems = list(node.premises)
        anc = node.rule.anc
        for k, q in enumerate(prems):
            if isinstance(q, Back) and q.target == label:
                prems[k] = x
                if q.perm is not None:
                    anc = tuple(tuple((kk, q.perm[pp]) if kk == k else (kk, pp) for kk, pp in e) for e in anc)
                changed = True
            elif isinstance(q, Proof) and _mentions(q, label):
                prems[k] = sub(q)
                changed = True
        if not changed:
            return node
        rule = node.rule if anc is node.rule.anc else replace(node.rule, anc=anc)
        return replace(node, premises=tuple(prems), rule=rule)

    inner = sub(replace(x, label=None))
    return inner


def _mentions(p: Proof, label: str) -> bool:
    for _, node, _ in walk(p):
        if isinstance(node, Back) and node.target == label:
            return True
    return False


# ----------------------------------------------------------- multicut

@dataclass(frozen=True)
class Mcut:
    premises: tuple[tuple[Formula, ...], ...]
    iota: tuple[Pos, ...]                     # conclusion position -> premise position
    pp: tuple[tuple[Pos, Pos], ...]           # relation, meant to be symmetric


@dataclass(frozen=True)
class McutError:
    kind: str      # NotInjective | NotTotalOffIota | NotSymmetric | NotDual | MultiplyPaired | NotTree
    witness: tuple

    def __str__(self):
        return f"{self.kind} {self.witness}"


def mcut_of(node: Proof) -> Mcut:
    """The multicut data of an ``mcut`` node (pp made symmetric)."""
    pp = []
    for a, b in node.rule.pp:
        pp += [(a, b), (b, a)]
    iota = tuple(e[0] for e in node.rule.anc)
    return Mcut(tuple(premise_seq(q) for q in node.premises), iota, tuple(pp))


def validate_mcut(m: Mcut) -> McutError | None:
    """First failed condition, or None.

    Checked in the order NotInjective, NotTotalOffIota, NotSymmetric,
    NotDual, MultiplyPaired, NotTree.
    """
    positions = {(i, p) for i, s in enumerate(m.premises) for p in range(len(s))}
    seen: dict[Pos, int] = {}
    for j, x in enumerate(m.iota):
        if x in seen:
            return McutError("NotInjective", (seen[x], j, x))
        seen[x] = j
    stray = [x for x in m.iota if x not in positions] + [x for pr in m.pp for x in pr if x not in positions]
    if stray:
        return McutError("NotTotalOffIota", (stray[0],))
    paired = {a for a, _ in m.pp}
    for x in sorted(positions):
        if x not in seen and x not in paired:
            return McutError("NotTotalOffIota", (x,))
    rel = set(m.pp)
    for a, b in m.pp:
        if (b, a) not in rel:
            return McutError("NotSymmetric", (a, b))
    for a, b in m.pp:
        fa, fb = m.premises[a[0]][a[1]], m.premises[b[0]][b[1]]
        if fa != negate(fb):
            return McutError("NotDual", (a, b))
    partners: dict[Pos, Pos] = {}
    for a, b in m.pp:
        if a in seen:
            return McutError("MultiplyPaired", (a, "iota", b))
        if partners.setdefault(a, b) != b:
            return McutError("MultiplyPaired", (a, partners[a], b))
    g = nx.MultiGraph()
    g.add_nodes_from(range(len(m.premises)))
    for a, b in rel:
        if a <= b:
            g.add_edge(a[0], b[0])
    if len(m.premises) == 0 or not nx.is_tree(g):
        return McutError("NotTree", (len(m.premises), g.number_of_edges()))
    return None


def _partner_map(m: Mcut) -> dict[Pos, Pos]:
    return {a: b for a, b in m.pp}


def restrict_context(m: Mcut, positions: Sequence[Pos]) -> list[int]:
    """Premises hereditarily linked to the given premise positions.

    For a position paired by pp this is every premise reachable from its
    premise except that premise itself; an ι-mapped position gives nothing.
    The result for a list is the union, in premise order.
    """
    partner = _partner_map(m)
    adj: dict[int, set[int]] = {i: set() for i in range(len(m.premises))}
    for a, b in partner.items():
        adj[a[0]].add(b[0])
    out: set[int] = set()
    for x in positions:
        if x not in partner:
            continue
        start = x[0]
        comp = set(nx.node_connected_component(nx.Graph(adj), start)) if adj else {start}
        out |= comp - {start}
    return sorted(out)


def hanging_context(m: Mcut, x: Pos) -> list[int]:
    """Premises on the far side of the pp edge at ``x``.

    Removing that edge splits the tree in two; this is the half not
    containing ``x``'s own premise (empty if ``x`` is ι-mapped).
    """
    partner = _partner_map(m)
    if x not in partner:
        return []
    g = nx.Graph()
    g.add_nodes_from(range(len(m.premises)))
    for a, b in partner.items():
        g.add_edge(a[0], b[0])
    g.remove_node(x[0])
    return sorted(nx.node_connected_component(g, partner[x][0]))


@dataclass(frozen=True)
class AllPromotions:
    kinds: tuple[str | None, ...]       # per premise, None for the excluded one
    nonempty: tuple[bool, ...]          # context of the promotion is non-empty


@dataclass(frozen=True)
class NotAllPromotions:
    witness: int


def detect_bang_context(premises: Sequence[Proof], around: int) -> AllPromotions | NotAllPromotions:
    """Classify the premises other than ``around`` by their last rule."""
    kinds, flags = [], []
    for i, q in enumerate(premises):
        if i == around:
            kinds.append(None)
            flags.append(False)
            continue
        if not isinstance(q, Proof) or q.rule.kind not in PROMOTIONS:
            return NotAllPromotions(i)
        kinds.append(q.rule.kind[-1])
        flags.append(len(q.seq) > 1)
    return AllPromotions(tuple(kinds), tuple(flags))


# ----------------------------------------------------------- checking

@dataclass(frozen=True)
class RuleError:
    kind: str        # SchemeMismatch | SideConditionFailed | BackEdgeMismatch | NotClosed
    at: str          # node address, e.g. "r.0.1"
    message: str
    name: str | None = None
    witness: tuple = ()

    def __str__(self):
        where = f"{self.name} ({self.at})" if self.name else self.at
        return f"{self.kind} at {where}: {self.message}"


class _Bad(Exception):
    def __init__(self, kind, msg, witness=()):
        super().__init__(msg)
        self.kind, self.msg, self.witness = kind, msg, witness


def _scheme(msg):
    return _Bad("SchemeMismatch", msg)


def _check_node(seq, rule: Rule, prems: tuple[tuple[Formula, ...], ...], inst: InstanceSpec | None):
    kind = rule.kind
    if kind not in KINDS:
        raise _scheme(f"unknown rule {kind}")
    if len(rule.anc) != len(seq):
        raise _scheme("ancestry does not cover the conclusion")
    n = len(prems)
    if kind in ARITY and n != ARITY[kind]:
        raise _scheme(f"{kind} needs {ARITY[kind]} premises")
    if kind not in ARITY and kind != "mcut" and n != 1:
        raise _scheme(f"{kind} needs one premise")
    if kind == "mcut" and n == 0:
        raise _scheme("mcut needs premises")
    used: set[Pos] = set()
    for e in rule.anc:
        for k, q in e:
            if not (0 <= k < n and 0 <= q < len(prems[k])):
                raise _scheme(f"ancestry points outside the premises: {(k, q)}")
    for j, e in enumerate(rule.anc):
        for x in e:
            if x in used:
                raise _scheme(f"premise position {x} has two ancestors")
            used.add(x)
    p = rule.principal
    if kind in ("ax", "one", "cut", "mcut"):
        pass
    elif p is None or not 0 <= p < len(seq):
        raise _scheme("missing principal position")
    P = prems

    def at(x):
        return P[x[0]][x[1]]

    def context(skip, stripped=False, both=False):
        for j, e in enumerate(rule.anc):
            if j == skip:
                continue
            if both:
                if sorted(k for k, _ in e) != [0, 1] or any(at(x) != seq[j] for x in e):
                    raise _scheme(f"context position {j} must occur in both premises")
                continue
            if len(e) != 1:
                raise _scheme(f"context position {j} needs exactly one ancestor")
            want = seq[j].body if stripped else seq[j]
            if at(e[0]) != want:
                raise _scheme(f"context position {j} does not match its premise occurrence")

    def covered(expect_uncovered=()):
        allpos = {(k, q) for k in range(n) for q in range(len(P[k]))}
        if allpos - used != set(expect_uncovered):
            raise _scheme("premise occurrences without ancestor")

    def head(cls):
        if not isinstance(seq[p], cls):
            raise _scheme(f"principal formula is not a {cls.__name__}")
        return seq[p]

    def side_sig(name):
        if inst is None:
            return
        if name not in inst.sigs:
            raise _Bad("SideConditionFailed", f"unknown signature {name}", (name,))

    match kind:
        case "ax":
            if len(seq) != 2 or seq[1] != negate(seq[0]) or any(rule.anc):
                raise _scheme("axiom needs F, F⊥")
        case "one":
            if seq != (One(),):
                raise _scheme("one concludes exactly 1")
        case "top":
            head(Top)
            if any(rule.anc):
                raise _scheme("top has no premises")
        case "cut":
            context(None)
            free = [(k, q) for k in range(2) for q in range(len(P[k])) if (k, q) not in used]
            if len(free) != 2 or free[0][0] != 0 or free[1][0] != 1:
                raise _scheme("cut needs exactly one cut formula per premise")
            if at(free[0]) != negate(at(free[1])):
                raise _scheme("cut formulas are not dual")
        case "tensor" | "par" | "plus1" | "plus2" | "with" | "mu" | "nu" | "bot":
            cls = {"tensor": Tensor, "par": Par, "plus1": Plus, "plus2": Plus, "with": With,
                   "mu": Mu, "nu": Nu, "bot": Bot}[kind]
            f = head(cls)
            e = rule.anc[p]
            if kind == "tensor":
                ok = len(e) == 2 and e[0][0] == 0 and e[1][0] == 1 and at(e[0]) == f.left and at(e[1]) == f.right
            elif kind == "with":
                ok = len(e) == 2 and e[0][0] == 0 and e[1][0] == 1 and at(e[0]) == f.left and at(e[1]) == f.right
            elif kind == "par":
                ok = len(e) == 2 and at(e[0]) == f.left and at(e[1]) == f.right
            elif kind in ("plus1", "plus2"):
                ok = len(e) == 1 and at(e[0]) == (f.left if kind == "plus1" else f.right)
            elif kind in ("mu", "nu"):
                ok = len(e) == 1 and at(e[0]) == unfold(f)
            else:
                ok = len(e) == 0
            if not ok:
                raise _scheme(f"{kind} premise does not match the principal formula")
            context(p, both=(kind == "with"))
            covered()
        case "mpx" | "contr":
            f = head(Whynot)
            i = rule.index
            if i is None or i < 0 or (kind == "contr" and i < 2):
                raise _scheme(f"bad arity {i}")
            if rule.sig != f.sig:
                raise _scheme("side payload does not match the principal signature")
            e = rule.anc[p]
            want = f.body if kind == "mpx" else f
            if len(e) != i or any(at(x) != want for x in e):
                raise _scheme(f"{kind}({i}) needs {i} copies of {show(want)}")
            context(p)
            covered()
            side_sig(f.sig)
            rn = RuleName("mpx" if kind == "mpx" else "c", i)
            if inst is not None and not inst.sigs[f.sig].has(rn):
                raise _Bad("SideConditionFailed", f"{f.sig}({rn}) does not hold", (f.sig, str(rn)))
        case "bang_g" | "bang_f" | "bang_u":
            f = head(Bang)
            if rule.sig != f.sig:
                raise _scheme("side payload does not match the principal signature")
            e = rule.anc[p]
            if len(e) != 1 or at(e[0]) != f.body:
                raise _scheme("promotion premise does not match")
            ctx = [j for j in range(len(seq)) if j != p]
            if any(not isinstance(seq[j], Whynot) for j in ctx):
                raise _scheme("promotion context must be ?-formulas")
            taus = tuple(seq[j].sig for j in ctx)
            if rule.taus != taus:
                raise _scheme("side payload does not match the context signatures")
            if kind == "bang_u" and len(ctx) != 1:
                raise _scheme("bang_u needs exactly one context formula")
            context(p, stripped=(kind != "bang_g"))
            covered()
            side_sig(f.sig)
            for t in taus:
                side_sig(t)
                if inst is not None and (f.sig, t) not in inst.leq(kind[-1]):
                    raise _Bad("SideConditionFailed", f"{f.sig} ≤{kind[-1]} {t} does not hold",
                               (kind[-1], f.sig, t))
        case "mcut":
            for j, e in enumerate(rule.anc):
                if len(e) != 1 or at(e[0]) != seq[j]:
                    raise _scheme(f"mcut conclusion position {j} must come from one premise occurrence")
            pp = []
            for a, b in rule.pp:
                pp += [(a, b), (b, a)]
            err = validate_mcut(Mcut(P, tuple(e[0] for e in rule.anc), tuple(pp)))
            if err is not None:
                raise _scheme(f"multicut condition {err.kind} fails: {err.witness}")


_CACHE: dict = {}


def _node_errors(node: Proof, inst: InstanceSpec | None, fp: str):
    key = (node.seq, node.rule, tuple(premise_seq(q) for q in node.premises), fp)
    hit = _CACHE.get(key)
    if hit is None:
        try:
            _check_node(key[0], key[1], key[2], inst)
            hit = ()
        except _Bad as b:
            hit = ((b.kind, b.msg, b.witness),)
        if len(_CACHE) > 200_000:
            _CACHE.clear()
        _CACHE[key] = hit
    return hit


def check_wellformed(p: Proof, inst: InstanceSpec | None) -> list[RuleError]:
    """All rule errors of ``p`` (empty list when well formed).

    With ``inst=None`` only the rule schemes are checked, not the
    exponential side conditions.
    """
    fp = print_instance(inst) if inst is not None else ""
    errors: list[RuleError] = []
    if isinstance(p, Back):
        return [RuleError("BackEdgeMismatch", "r", "the root cannot be a back-edge")]
    for addr, node, env in walk(p):
        where = addr_str(addr)
        if any(not is_closed(f) for f in node.seq):
            errors.append(RuleError("NotClosed", where, "open formula in sequent", node.name))
            continue
        if inst is not None:
            unknown = sorted({s for f in node.seq for s in _sigs(f)} - set(inst.sigs))
            if unknown:
                errors.append(RuleError("SideConditionFailed", where, f"unknown signature {unknown[0]}",
                                        node.name, (unknown[0],)))
                continue
        if isinstance(node, Back):
            hit = env.get(node.target)
            if hit is None:
                errors.append(RuleError("BackEdgeMismatch", where, f"{node.target} is not an ancestor", node.name))
            elif hit[1].seq != node.seq:
                errors.append(RuleError("BackEdgeMismatch", where, f"sequent differs from {node.target}",
                                        node.name, (node.target,)))
            elif node.perm is not None and (sorted(node.perm) != list(range(len(node.seq)))
                                            or any(node.seq[j] != node.seq[node.perm[j]] for j in range(len(node.seq)))):
                errors.append(RuleError("BackEdgeMismatch", where, "position map is not a formula-preserving bijection",
                                        node.name))
            continue
        for kind, msg, wit in _node_errors(node, inst, fp):
            errors.append(RuleError(kind, where, msg, node.name, wit))
    return errors


def _sigs(f: Formula) -> Iterator[str]:
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, (Whynot, Bang)):
            yield g.sig
        from .syntax import children
        stack.extend(children(g))


# ----------------------------------------------------- tagged occurrences

class Occ:
    """A formula occurrence; identity is what matters."""

    __slots__ = ("f",)

    def __init__(self, f: Formula):
        self.f = f

    def __repr__(self):
        return f"Occ({show(self.f)})"


@dataclass(frozen=True)
class Tagged:
    proof: Proof | Back
    occs: tuple[Occ, ...]


def tag(p: Proof | Back) -> Tagged:
    return Tagged(p, tuple(Occ(f) for f in p.seq))


def build(kind: str, concl: Sequence[Occ], prems: Sequence[Tagged] = (), *,
          principal: Occ | None = None, active: Sequence[Occ] = (),
          links: dict[Occ, Sequence[Occ]] | None = None, index: int | None = None,
          sig: str | None = None, pairs: Sequence[tuple[Occ, Occ]] = (),
          label: str | None = None) -> Tagged:
    """Make a node; ancestry follows occurrence identity.

    The principal occurrence is linked to ``active``; any occurrence in
    ``links`` to the given premise occurrences; every other conclusion
    occurrence to the premise occurrences that are the very same object.
    """
    where: dict[int, list[Pos]] = {}
    for k, t in enumerate(prems):
        for q, o in enumerate(t.occs):
            where.setdefault(id(o), []).append((k, q))
    anc = []
    pidx = None
    for j, o in enumerate(concl):
        if o is principal:
            pidx = j
            src = active
        elif links is not None and o in links:
            src = links[o]
        else:
            anc.append(tuple(where.get(id(o), ())))
            continue
        ent = []
        for a in src:
            hits = where.get(id(a))
            if not hits:
                raise ValueError(f"active occurrence {a!r} not found in premises")
            ent.append(hits[0])
        anc.append(tuple(ent))
    pp = []
    for a, b in pairs:
        pp.append((where[id(a)][0], where[id(b)][0]))
    seq = tuple(o.f for o in concl)
    taus: tuple[str, ...] = ()
    if kind in PROMOTIONS:
        taus = tuple(concl[j].f.sig for j in range(len(concl)) if j != pidx)
        sig = concl[pidx].f.sig
    elif kind in ("mpx", "contr"):
        sig = concl[pidx].f.sig
    rule = Rule(kind, pidx, tuple(anc), index, sig, taus, tuple(pp))
    node = Proof(seq, rule, tuple(t.proof for t in prems), label)
    return Tagged(node, tuple(concl))


@dataclass
class Opened:
    node: Proof
    kind: str
    index: int | None
    sig: str | None
    principal: Occ | None
    prems: list[Tagged]
    active: list[Occ]
    link: dict[Occ, list[Occ]]          # every conclusion occurrence -> premise occurrences
    pairs: list[tuple[Occ, Occ]]        # cut / mcut pairings


def resolve_premise(t: Tagged, env: dict) -> Tagged:
    """Replace a back-edge by (a shared copy of) its target."""
    if not isinstance(t.proof, Back):
        return t
    b = t.proof
    target = env[b.target][1]
    occs: list[Occ | None] = [None] * len(t.occs)
    for j, o in enumerate(t.occs):
        occs[b.mapped(j)] = o
    return Tagged(target, tuple(occs))


def open_rule(t: Tagged) -> Opened:
    """Expose the last rule of a tagged proof.

    Context occurrences that reappear unchanged in a premise are the same
    objects as in the conclusion; everything else gets fresh occurrences.
    """
    node = t.proof
    if not isinstance(node, Proof):
        raise TypeError("cannot open a back-edge")
    node = unroll_node(node)
    rule = node.rule
    prem_occs = [[Occ(f) for f in premise_seq(q)] for q in node.premises]
    link: dict[Occ, list[Occ]] = {}
    active: list[Occ] = []
    principal = None
    for j, (o, e) in enumerate(zip(t.occs, rule.anc)):
        if j == rule.principal and rule.kind not in ("ax", "one", "cut", "mcut"):
            principal = o
            active = [prem_occs[k][q] for k, q in e]
            link[o] = active
            continue
        for k, q in e:
            if node.premises[k].seq[q] == o.f:
                prem_occs[k][q] = o
        link[o] = [prem_occs[k][q] for k, q in e]
    pairs: list[tuple[Occ, Occ]] = []
    if rule.kind == "cut":
        used = {x for e in rule.anc for x in e}
        free = [prem_occs[k][q] for k in range(2) for q in range(len(prem_occs[k])) if (k, q) not in used]
        pairs = [(free[0], free[1])]
    elif rule.kind == "mcut":
        pairs = [(prem_occs[a[0]][a[1]], prem_occs[b[0]][b[1]]) for a, b in rule.pp]
    if rule.kind in ("ax", "top") and rule.principal is not None:
        principal = t.occs[rule.principal]
    prems = [Tagged(q, tuple(os)) for q, os in zip(node.premises, prem_occs)]
    return Opened(node, rule.kind, rule.index, rule.sig, principal, prems, active, link, pairs)
