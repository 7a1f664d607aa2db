"""Multicut reduction: redexes, the rewriting steps and a fair normaliser.

Every step is written against a *view* of one ``mcut`` node: its premises
as tagged proofs, the pairing as pairs of occurrence objects, and its
conclusion as the list of premise occurrences it exposes.  Rewriting a
view and calling ``build`` recomputes all ancestry, so each step reads
close to its inference-rule picture.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

from .proof import (Back, Occ, Proof, Tagged, PROMOTIONS, build, node_at, open_rule,
                    resolve_premise, tag, unroll_node, walk, addr_str, _check_node, _Bad)
from .signatures import (Contr, Id, InstanceSpec, Mpx, NotDerivable, Weak, c as c_rule,
                         mpx as mpx_rule, synthesize_derived)
from .syntax import Whynot

__all__ = ["Redex", "NotApplicable", "InternalInvariantBroken", "SHAPES",
           "enumerate_redexes", "apply_step", "compute_ompx", "fair_normalize",
           "Trace", "TraceStep", "productive_depth", "is_cut_free", "prepare",
           "audit_fairness", "mcut_redexes"]

SHAPES = ("merge_cut", "ax", "comm_tensor", "comm_par", "comm_plus", "comm_with", "comm_bot",
          "comm_top", "comm_one", "comm_mu", "comm_nu", "princ_tensor_par", "princ_plus_with",
          "princ_mu_nu", "princ_one_bot", "comm_bang_g", "comm1_bang_f", "comm2_bang_f",
          "comm1_bang_u", "comm2_bang_u", "comm3_bang_u", "comm4_bang_u", "comm_mpx",
          "comm_contr", "princ_contr", "princ_mpx")

_COMM = {"tensor": "comm_tensor", "par": "comm_par", "plus1": "comm_plus", "plus2": "comm_plus",
         "with": "comm_with", "bot": "comm_bot", "mu": "comm_mu", "nu": "comm_nu",
         "mpx": "comm_mpx", "contr": "comm_contr"}
_PRINC = {("tensor", "par"): "princ_tensor_par", ("plus1", "with"): "princ_plus_with",
          ("plus2", "with"): "princ_plus_with", ("mu", "nu"): "princ_mu_nu",
          ("one", "bot"): "princ_one_bot"}


class NotApplicable(ValueError):
    pass


class InternalInvariantBroken(AssertionError):
    """A rule built by a step violates its side condition (a kernel bug)."""

    def __init__(self, msg: str, witness: tuple = ()):
        super().__init__(msg)
        self.witness = witness


@dataclass(frozen=True)
class Redex:
    at: tuple[int, ...]          # address of the mcut node
    shape: str
    focus: tuple[int, ...]       # premise indices involved
    key: tuple                   # (shape, uids of the rule nodes matched): its residual family

    def __str__(self):
        return f"{self.shape} at {addr_str(self.at)} on {list(self.focus)}"


# ------------------------------------------------------------ enumeration

@dataclass
class _Info:
    kind: str
    principal: int | None        # at the premise site
    node: Proof
    arity: int


def _premise_info(q: Proof | Back, env) -> _Info:
    if isinstance(q, Back):
        node = env[q.target][1]
        p = node.rule.principal
        if p is not None and q.perm is not None:
            p = q.perm.index(p)
        return _Info(node.rule.kind, p, node, len(q.seq))
    return _Info(q.rule.kind, q.rule.principal, q, len(q.seq))


def mcut_redexes(node: Proof, env: dict, at: tuple[int, ...]) -> list[Redex]:
    """Redexes of one mcut node (``env``: labels in scope above it)."""
    if node.label is not None:
        env = {**env, node.label: (at, node)}
    infos = [_premise_info(q, env) for q in node.premises]
    n = len(infos)
    iota = {e[0] for e in node.rule.anc}
    partner = {}
    for a, b in node.rule.pp:
        partner[a], partner[b] = b, a
    out: list[Redex] = []

    def add(shape, focus):
        out.append(Redex(at, shape, tuple(focus), (shape,) + tuple(infos[k].node.uid for k in focus)))

    def hanging(x):
        k0, k1 = x[0], partner[x][0]
        seen, todo = {k1}, [k1]
        while todo:
            j = todo.pop()
            for (a, b) in partner.items():
                if a[0] == j and b[0] != k0 and b[0] not in seen:
                    seen.add(b[0])
                    todo.append(b[0])
        return seen

    for k, inf in enumerate(infos):
        kind, p = inf.kind, inf.principal
        if kind in ("cut", "mcut"):
            add("merge_cut", [k])
        elif kind == "ax":
            add("ax", [k])
        elif kind == "one":
            if n == 1:
                add("comm_one", [k])
            elif (k, 0) in partner:
                k2, q = partner[(k, 0)]
                if infos[k2].kind == "bot" and infos[k2].principal == q:
                    add("princ_one_bot", [k, k2])
        elif kind == "top":
            if (k, p) in iota:
                add("comm_top", [k])
        elif (k, p) in iota:
            if kind in _COMM:
                add(_COMM[kind], [k])
            elif kind in PROMOTIONS:
                shape = _promotion_shape(k, infos, partner)
                if shape:
                    add(shape, [k])
        elif (k, p) in partner:
            k2, q = partner[(k, p)]
            other = infos[k2]
            if other.principal != q:
                continue
            if (kind, other.kind) in _PRINC:
                add(_PRINC[(kind, other.kind)], [k, k2])
            elif kind in ("mpx", "contr") and other.kind in PROMOTIONS:
                if all(infos[j].kind in PROMOTIONS for j in hanging((k, p))):
                    add("princ_mpx" if kind == "mpx" else "princ_contr", [k, k2])
    return out


def _promotion_shape(k, infos, partner) -> str | None:
    others = [j for j in range(len(infos)) if j != k]
    if any(infos[j].kind not in PROMOTIONS for j in others):
        return None
    kind = infos[k].kind
    g_nonempty = any(infos[j].kind == "bang_g" and infos[j].arity > 1 for j in others)
    if kind == "bang_g":
        return "comm_bang_g"
    if kind == "bang_f":
        return "comm2_bang_f" if g_nonempty else "comm1_bang_f"
    if all(infos[j].kind == "bang_u" for j in others):
        return "comm1_bang_u"
    x = _chain_end(k, infos, partner)
    if x is not None and infos[x].kind == "bang_g":
        return "comm4_bang_u"
    if not g_nonempty:
        return "comm2_bang_u"
    return "comm3_bang_u"


def _chain(k, infos, partner) -> tuple[list[int], int | None]:
    """Follow the contexts of ``!u`` premises from ``k``: (the u chain, first non-u)."""
    chain, cur = [k], k
    while True:
        ctx = 1 - infos[cur].principal
        nxt = partner.get((cur, ctx))
        if nxt is None:
            return chain, None
        j = nxt[0]
        if infos[j].kind != "bang_u":
            return chain, j
        chain.append(j)
        cur = j


def _chain_end(k, infos, partner):
    return _chain(k, infos, partner)[1]


def enumerate_redexes(p: Proof) -> list[Redex]:
    out = []
    for addr, node, env in walk(p):
        if isinstance(node, Proof) and node.rule.kind == "mcut":
            out.extend(mcut_redexes(node, env, addr))
    return out


# ------------------------------------------------------------------ views

@dataclass
class _View:
    concl: list[Occ]
    prems: list[Tagged]
    pairs: list[tuple[Occ, Occ]]

    def owner(self) -> dict[int, int]:
        return {id(o): k for k, t in enumerate(self.prems) for o in t.occs}

    def partner(self) -> dict[int, Occ]:
        d = {}
        for a, b in self.pairs:
            d[id(a)], d[id(b)] = b, a
        return d

    def hanging(self, o: Occ) -> set[int]:
        """Premises on the far side of the pairing at ``o``."""
        own, part = self.owner(), self.partner()
        k0 = own[id(o)]
        start = own[id(part[id(o)])]
        seen, todo = {start}, [start]
        while todo:
            j = todo.pop()
            for x in self.prems[j].occs:
                y = part.get(id(x))
                if y is not None:
                    kk = own[id(y)]
                    if kk != k0 and kk not in seen:
                        seen.add(kk)
                        todo.append(kk)
        return seen


def _open_view(node: Proof, env) -> tuple[_View, int]:
    unrolls = 0
    if node.label is not None:
        unrolls += 1
    node = unroll_node(node)
    t = tag(node)
    o = open_rule(t)
    prems = [resolve_premise(q, env) for q in o.prems]
    return _View(list(t.occs), prems, list(o.pairs)), unrolls


class _Ctx:
    """Per-step state: the instance, for side-condition assertions."""

    def __init__(self, inst: InstanceSpec | None):
        self.inst = inst
        self.unrolls = 0

    def mk(self, kind, concl, prems=(), **kw) -> Tagged:
        t = build(kind, concl, prems, **kw)
        if self.inst is not None and kind in ("mpx", "contr") + PROMOTIONS:
            node = t.proof
            try:
                _check_node(node.seq, node.rule, tuple(q.seq for q in node.premises), self.inst)
            except _Bad as b:
                raise InternalInvariantBroken(f"{kind}: {b.msg}", b.witness) from None
        return t

    def open(self, t: Tagged):
        if isinstance(t.proof, Proof) and t.proof.label is not None:
            self.unrolls += 1
        return open_rule(t)

    def mcut(self, concl, prems, pairs) -> Tagged:
        return build("mcut", concl, prems, pairs=pairs)


def _reorder(t: Tagged, order: Sequence[Occ]) -> Tagged:
    if list(map(id, t.occs)) == list(map(id, order)):
        return t
    node = t.proof
    pos = {id(o): j for j, o in enumerate(t.occs)}
    perm = [pos[id(o)] for o in order]
    rule = node.rule
    anc = tuple(rule.anc[j] for j in perm)
    principal = perm.index(rule.principal) if rule.principal is not None else None
    seq = tuple(o.f for o in order)
    taus = rule.taus
    if rule.kind in PROMOTIONS:
        taus = tuple(seq[j].sig for j in range(len(seq)) if j != principal)
    new = replace(node, seq=seq, rule=replace(rule, anc=anc, principal=principal, taus=taus))
    return Tagged(new, tuple(order))


def _final(t: Tagged, concl: Sequence[Occ], rename: dict[int, Occ] | None = None) -> Tagged:
    rename = rename or {}
    return _reorder(t, [rename.get(id(o), o) for o in concl])


def _splice(concl, o, new):
    out = []
    for x in concl:
        if x is o:
            out.extend(new)
        else:
            out.append(x)
    return out


# ------------------------------------------------------------- the steps

def _merge_cut(V: _View, ctx: _Ctx, k: int) -> Tagged:
    O = ctx.open(V.prems[k])
    prems = V.prems[:k] + O.prems + V.prems[k + 1:]
    return ctx.mcut(V.concl, prems, V.pairs + O.pairs)


def _ax(V: _View, ctx: _Ctx, k: int) -> Tagged:
    t = V.prems[k]
    a, b = t.occs
    if len(V.prems) == 1:
        return _final(ctx.mk("ax", [a, b]), V.concl)
    part = V.partner()
    pa, pb = part.get(id(a)), part.get(id(b))
    pairs = [pr for pr in V.pairs if pr[0] not in (a, b) and pr[1] not in (a, b)]
    concl = list(V.concl)
    if pa is not None and pb is not None:
        pairs.append((pa, pb))
    else:
        inside, outside = (b, pa) if pa is not None else (a, pb)
        concl = [outside if x is inside else x for x in concl]
    return ctx.mcut(concl, V.prems[:k] + V.prems[k + 1:], pairs)


def _comm_unit(V: _View, ctx: _Ctx, k: int, kind: str) -> Tagged:
    t = V.prems[k]
    o = t.occs[t.proof.rule.principal] if kind == "top" else t.occs[0]
    if kind == "one":
        return ctx.mk("one", V.concl)
    return ctx.mk("top", V.concl, principal=o)


def _comm_unary(V: _View, ctx: _Ctx, k: int) -> Tagged:
    O = ctx.open(V.prems[k])
    o = O.principal
    inner_concl = _splice(V.concl, o, O.active)
    prems = V.prems[:k] + [O.prems[0]] + V.prems[k + 1:]
    inner = ctx.mcut(inner_concl, prems, V.pairs)
    return ctx.mk(O.kind, V.concl, [inner], principal=o, active=O.active, index=O.index)


def _comm_tensor(V: _View, ctx: _Ctx, k: int) -> Tagged:
    O = ctx.open(V.prems[k])
    o = O.principal
    part = V.partner()
    sides = []
    for s in (0, 1):
        sub = O.prems[s]
        ks = set()
        for x in sub.occs:
            y = part.get(id(x))
            if y is not None:
                ks |= V.hanging(x)
        sides.append(ks)
    out = []
    for s in (0, 1):
        sub = O.prems[s]
        members = {id(x) for x in sub.occs}
        for j in sides[s]:
            members |= {id(x) for x in V.prems[j].occs}
        concl = [x for x in V.concl if id(x) in members]
        concl = [O.active[s]] + concl
        prems = [V.prems[j] for j in sorted(sides[s]) if j < k] + [sub] + \
                [V.prems[j] for j in sorted(sides[s]) if j > k]
        pairs = [pr for pr in V.pairs if id(pr[0]) in members and id(pr[1]) in members]
        out.append(ctx.mcut(concl, prems, pairs))
    return ctx.mk("tensor", V.concl, out, principal=o, active=O.active)


def _comm_with(V: _View, ctx: _Ctx, k: int) -> Tagged:
    O = ctx.open(V.prems[k])
    o = O.principal
    out = []
    for s in (0, 1):
        concl = _splice(V.concl, o, [O.active[s]])
        prems = V.prems[:k] + [O.prems[s]] + V.prems[k + 1:]
        out.append(ctx.mcut(concl, prems, V.pairs))
    return ctx.mk("with", V.concl, out, principal=o, active=O.active)


def _princ_binary(V: _View, ctx: _Ctx, k: int, k2: int) -> Tagged:
    """tensor/par, plus/with, mu/nu, one/bot: the two rules vanish."""
    A = ctx.open(V.prems[k])
    B = ctx.open(V.prems[k2])
    pairs = [pr for pr in V.pairs if not ({id(pr[0]), id(pr[1])} & {id(A.principal), id(B.principal)})]
    if A.kind == "tensor":
        new = {k: A.prems, k2: B.prems}
        pairs += [(A.active[0], B.active[0]), (A.active[1], B.active[1])]
    elif A.kind in ("plus1", "plus2"):
        s = 0 if A.kind == "plus1" else 1
        new = {k: A.prems, k2: [B.prems[s]]}
        pairs += [(A.active[0], B.active[s])]
    elif A.kind == "mu":
        new = {k: A.prems, k2: B.prems}
        pairs += [(A.active[0], B.active[0])]
    else:  # one / bot
        new = {k: [], k2: B.prems}
    prems = []
    for j, t in enumerate(V.prems):
        prems.extend(new.get(j, [t]))
    return ctx.mcut(V.concl, prems, pairs)


def _strip(ctx: _Ctx, t: Tagged) -> tuple[Tagged, dict[int, Occ]]:
    """Remove the last promotion: (its premise, occurrence map)."""
    O = ctx.open(t)
    return O.prems[0], {id(c): O.link[c][0] for c in t.occs}


def _derelict(ctx: _Ctx, t: Tagged, restore: list[tuple[Occ, Occ]]) -> Tagged:
    """Apply mpx_1 turning each naked occurrence back into the given ?-occurrence."""
    for whynot, naked in restore:
        concl = [whynot if x is naked else x for x in t.occs]
        t = ctx.mk("mpx", concl, [t], principal=whynot, active=[naked], index=1)
    return t


def _promotion_comm(V: _View, ctx: _Ctx, k: int, shape: str) -> Tagged:
    n = len(V.prems)
    root = V.prems[k]
    o = root.occs[root.proof.rule.principal]
    infos = [_Info(t.proof.rule.kind, t.proof.rule.principal, t.proof, len(t.occs)) for t in V.prems]
    own = V.owner()
    ppos = {}
    for a, b in V.pairs:
        ppos[(own[id(a)], V.prems[own[id(a)]].occs.index(a))] = (own[id(b)], V.prems[own[id(b)]].occs.index(b))
    if shape == "comm_bang_g":
        strip, deref, result = set(), set(), "bang_g"
    elif shape == "comm1_bang_f":
        strip, deref, result = set(range(n)) - {k}, set(), "bang_f"
    elif shape == "comm2_bang_f":
        strip, deref, result = set(), {k}, "bang_g"
    elif shape == "comm1_bang_u":
        strip, deref, result = set(range(n)) - {k}, set(), "bang_u"
    elif shape == "comm2_bang_u":
        strip, deref, result = set(range(n)) - {k}, set(), "bang_f"
    else:
        chain, x = _chain(k, infos, ppos)
        strip = set(chain[1:]) | {x}
        deref = {x} if shape == "comm3_bang_u" else set()
        result = "bang_g"
    strip |= {k}
    occmap: dict[int, Occ] = {}
    prems = []
    for j, t in enumerate(V.prems):
        if j in strip or j in deref:
            sub, m = _strip(ctx, t)
            if j in deref:
                ctxs = [(c, m[id(c)]) for c in t.occs if c is not t.occs[t.proof.rule.principal]]
                sub = _derelict(ctx, sub, ctxs)
                for c, _ in ctxs:
                    m[id(c)] = c
            occmap.update(m)
            prems.append(sub)
        else:
            prems.append(t)
    f = lambda x: occmap.get(id(x), x)
    pairs = [(f(a), f(b)) for a, b in V.pairs]
    body = f(o)
    inner_concl = [f(x) for x in V.concl]
    inner = ctx.mcut(inner_concl, prems, pairs)
    links = {x: [f(x)] for x in V.concl if x is not o}
    return ctx.mk(result, V.concl, [inner], principal=o, active=[body], links=links)


def _apply_derivation(ctx: _Ctx, t: Tagged, d, inputs: list[Occ], sig: str, body) -> tuple[Tagged, Occ]:
    """Run a derivation of c_i / mpx_i on ``inputs``; returns the new proof and output occurrence."""
    it = iter(inputs)
    target = Whynot(sig, body)

    def go(t, d):
        match d:
            case Id():
                return t, next(it)
            case Weak():
                new = Occ(target)
                return ctx.mk("mpx", list(t.occs) + [new], [t], principal=new, active=[], index=0), new
            case Mpx(j):
                used = [next(it) for _ in range(j)]
                new = Occ(target)
                concl = [x for x in t.occs if all(x is not u for u in used)] + [new]
                return ctx.mk("mpx", concl, [t], principal=new, active=used, index=j), new
            case Contr(kids):
                outs = []
                for kid in kids:
                    t, o = go(t, kid)
                    outs.append(o)
                new = Occ(target)
                concl = [x for x in t.occs if all(x is not u for u in outs)] + [new]
                return ctx.mk("contr", concl, [t], principal=new, active=outs, index=len(kids)), new
        raise TypeError(d)

    return go(t, d)


def _derived(ctx: _Ctx, sig: str, rule):
    if ctx.inst is None or sig not in ctx.inst.sigs:
        raise InternalInvariantBroken(f"no instance to derive {rule} for {sig}")
    try:
        return synthesize_derived(ctx.inst.sigs[sig], rule)
    except NotDerivable as e:
        raise InternalInvariantBroken(f"{sig}: {e}", (sig, str(rule))) from None


def _copy(t: Tagged) -> tuple[Tagged, dict[int, Occ]]:
    new = tuple(Occ(o.f) for o in t.occs)
    return Tagged(t.proof, new), {id(a): b for a, b in zip(t.occs, new)}


def ompx_plan(V: _View, root: int, hang: set[int]) -> dict[int, str]:
    """The O_mpx construction on the promotion tree ``hang`` rooted at ``root``.

    Modes: "mpx" (f/u root stripped, in S_mpx), "croot" (g root stripped,
    in S_c) and "keep" (left as is, in S_c).
    """
    part = V.partner()
    own = V.owner()
    plan: dict[int, str] = {}
    todo = [root]
    while todo:
        j = todo.pop()
        t = V.prems[j]
        kind = t.proof.rule.kind
        p = t.proof.rule.principal
        kids = []
        for q, x in enumerate(t.occs):
            if q != p and id(x) in part:
                kk = own[id(part[id(x)])]
                if kk in hang:
                    kids.append(kk)
        if kind == "bang_g":
            plan[j] = "croot"
            sub = list(kids)
            while sub:
                i = sub.pop()
                plan[i] = "keep"
                ti = V.prems[i]
                pi = ti.proof.rule.principal
                for q, x in enumerate(ti.occs):
                    if q != pi and id(x) in part:
                        kk = own[id(part[id(x)])]
                        if kk in hang and kk not in plan:
                            sub.append(kk)
        else:
            plan[j] = "mpx"
            todo.extend(kids)
    return plan


def _princ_exp(V: _View, ctx: _Ctx, k: int, k2: int) -> Tagged:
    """principal_contr and principal_mpx."""
    A = ctx.open(V.prems[k])
    o = A.principal
    hang = V.hanging(o)
    is_mpx = A.kind == "mpx"
    plan = ompx_plan(V, k2, hang) if is_mpx else {j: "keep" for j in hang}
    i = len(A.active)
    own = V.owner()
    hang_occs = {id(x) for j in hang for x in V.prems[j].occs}
    base_pairs = [pr for pr in V.pairs if id(pr[0]) not in hang_occs and id(pr[1]) not in hang_occs]
    hang_pairs = [pr for pr in V.pairs if id(pr[0]) in hang_occs and id(pr[1]) in hang_occs]
    partner_o = V.partner()[id(o)]
    prems = [A.prems[0] if j == k else t for j, t in enumerate(V.prems) if j not in hang]
    pairs = list(base_pairs)
    pairs = [pr for pr in pairs if pr[0] is not o and pr[1] is not o]
    copies: list[dict[int, Occ]] = []
    for m in range(i):
        occmap: dict[int, Occ] = {}
        for j in sorted(hang):
            t, cm = _copy(V.prems[j])
            if plan[j] in ("mpx", "croot"):
                t, sm = _strip(ctx, t)
                cm = {a: sm[id(b)] for a, b in cm.items()}
            occmap.update(cm)
            prems.append(t)
        pairs += [(occmap[id(a)], occmap[id(b)]) for a, b in hang_pairs]
        pairs.append((A.active[m], occmap[id(partner_o)]))
        copies.append(occmap)
    concl_inner = []
    groups = []
    for x in V.concl:
        if id(x) in hang_occs:
            xs = [cm[id(x)] for cm in copies]
            concl_inner.extend(xs)
            groups.append((x, xs, plan[own[id(x)]] == "mpx"))
        else:
            concl_inner.append(x)
    t = ctx.mcut(concl_inner, prems, pairs)
    rename = {}
    for x, xs, naked in groups:
        f = x.f
        rule = mpx_rule(i) if naked else c_rule(i)
        d = _derived(ctx, f.sig, rule)
        t, out = _apply_derivation(ctx, t, d, xs, f.sig, f.body)
        rename[id(x)] = out
    return _final(t, V.concl, rename)


def compute_ompx(V: _View, root: int, hang: set[int]):
    """(plan, S_mpx, S_c) of the O_mpx construction."""
    plan = ompx_plan(V, root, hang)
    return plan, {j for j, m in plan.items() if m == "mpx"}, {j for j, m in plan.items() if m != "mpx"}


# ------------------------------------------------------------- apply_step

def _replace_at(p: Proof, addr: tuple[int, ...], new: Proof) -> Proof:
    if not addr:
        return new
    k = addr[0]
    child = _replace_at(p.premises[k], addr[1:], new)
    prems = p.premises[:k] + (child,) + p.premises[k + 1:]
    return replace(p, premises=prems)


def apply_step(p: Proof, r: Redex, inst: InstanceSpec | None = None, *, stats: dict | None = None) -> Proof:
    node, env = node_at(p, r.at)
    if not isinstance(node, Proof) or node.rule.kind != "mcut":
        raise NotApplicable(f"no mcut at {addr_str(r.at)}")
    if r not in mcut_redexes(node, env, r.at):
        raise NotApplicable(f"{r} does not match the proof")
    V, unrolls = _open_view(node, env)
    ctx = _Ctx(inst)
    ctx.unrolls = unrolls
    s, f = r.shape, r.focus
    if s == "merge_cut":
        t = _merge_cut(V, ctx, f[0])
    elif s == "ax":
        t = _ax(V, ctx, f[0])
    elif s in ("comm_one", "comm_top"):
        t = _comm_unit(V, ctx, f[0], s[5:])
    elif s in ("comm_par", "comm_plus", "comm_bot", "comm_mu", "comm_nu", "comm_mpx", "comm_contr"):
        t = _comm_unary(V, ctx, f[0])
    elif s == "comm_tensor":
        t = _comm_tensor(V, ctx, f[0])
    elif s == "comm_with":
        t = _comm_with(V, ctx, f[0])
    elif s in ("princ_tensor_par", "princ_plus_with", "princ_mu_nu", "princ_one_bot"):
        t = _princ_binary(V, ctx, f[0], f[1])
    elif s in ("princ_contr", "princ_mpx"):
        t = _princ_exp(V, ctx, f[0], f[1])
    else:
        t = _promotion_comm(V, ctx, f[0], s)
    new = t.proof
    if new.seq != node.seq:
        raise InternalInvariantBroken(f"{s} changed the end-sequent")
    if stats is not None:
        stats["unrolls"] = stats.get("unrolls", 0) + ctx.unrolls
    return _replace_at(p, r.at, new)


# ------------------------------------------------------------ normalising

def is_cut_free(p: Proof) -> bool:
    return p.ncuts == 0


def productive_depth(p: Proof) -> float:
    """Depth of the shallowest cut or mcut (infinite when cut-free)."""
    if p.ncuts == 0:
        return float("inf")
    layer = [p]
    d = 0
    while layer:
        nxt = []
        for node in layer:
            if node.rule.kind in ("cut", "mcut"):
                return d
            nxt.extend(q for q in node.premises if isinstance(q, Proof) and q.ncuts)
        layer = nxt
        d += 1
    return float("inf")


def prepare(p: Proof) -> Proof:
    """Put the proof in the shape reduction starts from: one mcut at the root.

    A root cut becomes a two-premise mcut; otherwise a proof with cuts is
    wrapped in a one-premise mcut.  Cut-free proofs are returned as is.
    """
    if p.ncuts == 0 or p.rule.kind == "mcut":
        return p
    t = tag(p)
    if p.rule.kind == "cut":
        O = open_rule(t)
        return build("mcut", list(t.occs), O.prems, pairs=O.pairs, label=p.label).proof
    return build("mcut", list(t.occs), [t]).proof


@dataclass(frozen=True)
class TraceStep:
    n: int
    shape: str
    node: str
    depth: float
    live: int          # live redex families before the step
    max_age: int       # age of the oldest live family before the step
    age: int           # age of the family reduced

    def line(self) -> str:
        d = "inf" if self.depth == float("inf") else int(self.depth)
        return f"step {self.n} {self.shape} at {self.node} depth {d}"


@dataclass
class Trace:
    steps: list[TraceStep] = field(default_factory=list)
    unrolls: int = 0

    def text(self) -> str:
        return "".join(s.line() + "\n" for s in self.steps)


def fair_normalize(p: Proof, inst: InstanceSpec | None, max_steps: int = 10_000,
                   depth_goal: int | None = None, *, check=None) -> tuple[Proof, Trace, str]:
    """Reduce with the oldest redex family first.

    A family is the set of residuals of a redex: redexes with the same shape
    on the same rule nodes.  Its age counts the steps since it last had a
    member reduced, or since it appeared.  Returns (proof, trace, status)
    with status CutFree, DepthReached or Budget.
    """
    p = prepare(p)
    trace = Trace()
    touched: dict[tuple, int] = {}
    stats: dict = {}
    for n in range(max_steps + 1):
        if p.ncuts == 0:
            return p, trace, "CutFree"
        depth = productive_depth(p)
        if depth_goal is not None and depth >= depth_goal:
            return p, trace, "DepthReached"
        if n == max_steps:
            break
        rs = enumerate_redexes(p)
        if not rs:
            return p, trace, "Stuck"
        fams: dict[tuple, Redex] = {}
        for r in rs:
            fams.setdefault(r.key, r)
        touched = {k: v for k, v in touched.items() if k in fams}
        for k in fams:
            touched.setdefault(k, n)
        key = min(fams, key=lambda k: (touched[k], rs.index(fams[k])))
        r = fams[key]
        age = n - touched[key]
        max_age = n - min(touched.values())
        p = apply_step(p, r, inst, stats=stats)
        touched[key] = n + 1
        if check is not None:
            check(p, r)
        trace.steps.append(TraceStep(n, r.shape, addr_str(r.at), productive_depth(p), len(fams), max_age, age))
    trace.unrolls = stats.get("unrolls", 0)
    return p, trace, "Budget"


def audit_fairness(trace: Trace) -> list[str]:
    """Check that no family waited longer than the families alive meanwhile.

    With oldest-first scheduling, a family that has waited ``a`` steps saw
    ``a`` distinct older families reduced, all alive when it was last
    touched; so ``a`` never exceeds the largest live count in that window.
    """
    problems = []
    live = [s.live for s in trace.steps]
    for i, s in enumerate(trace.steps):
        lo = max(0, i - s.max_age)
        if s.max_age > max(live[lo:i + 1]):
            problems.append(f"step {s.n}: age {s.max_age} exceeds live families {max(live[lo:i + 1])}")
        if s.age != s.max_age:
            problems.append(f"step {s.n}: reduced a family of age {s.age}, oldest was {s.max_age}")
    return problems
