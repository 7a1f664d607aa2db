"""Translation into μLL∞, the μMALL encoding of exponentials, rule permutations.

The target system is the ``ll`` instance: one signature ``ll`` whose
dereliction, weakening and binary contraction are ``mpx(1)``, ``mpx(0)``
and ``contr(2)``, and whose promotion is ``bang_g``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace

from .proof import (Back, Occ, Proof, Tagged, build, node_at, open_rule, tag, walk)
from .reduction import (Redex, apply_step, compute_ompx, enumerate_redexes,
                        _open_view)
from .signatures import InstanceSpec, builtin_instance
from .syntax import (Bang, Bot, Formula, Mu, Nu, One, Par, Plus, Tensor, Var, Whynot, With,
                     children, _rebuild, shift, unfold)

__all__ = ["LL_SIG", "translate_formula", "translate_proof", "translated_address",
           "encode_exponential", "build_promotion_template", "SequentMismatch", "NotPermutable",
           "permute_one_step", "exponential_pairs", "Simulated", "NotFound", "check_simulation",
           "recipe", "key_modulo_exchange"]

LL_SIG = "ll"
LL = builtin_instance("ll")


class SequentMismatch(ValueError):
    pass


class NotPermutable(ValueError):
    pass


# ------------------------------------------------------------- formulas

def translate_formula(f: Formula) -> Formula:
    """Collapse every signature to the single μLL exponential."""
    match f:
        case Whynot(_, b):
            return Whynot(LL_SIG, translate_formula(b))
        case Bang(_, b):
            return Bang(LL_SIG, translate_formula(b))
    kids = children(f)
    if not kids:
        return f
    return _rebuild(f, [translate_formula(k) for k in kids])


def encode_exponential(f: Formula) -> Formula:
    """?A ↦ μX.(A ⊕ (⊥ ⊕ (X⅋X))) and !A ↦ νX.(A & (1 & (X⊗X))), recursively."""
    match f:
        case Whynot(_, b):
            a = shift(encode_exponential(b), 1)
            return Mu(Plus(a, Plus(Bot(), Par(Var(0), Var(0)))))
        case Bang(_, b):
            a = shift(encode_exponential(b), 1)
            return Nu(With(a, With(One(), Tensor(Var(0), Var(0)))))
    kids = children(f)
    if not kids:
        return f
    return _rebuild(f, [encode_exponential(k) for k in kids])


# --------------------------------------------------------------- proofs

def _chain_length(node: Proof) -> int:
    r = node.rule
    match r.kind:
        case "mpx":
            return 1 if r.index == 0 else 2 * r.index - 1
        case "contr":
            return r.index - 1
        case "bang_f" | "bang_u":
            return len(node.seq)
    return 1


def translated_address(p: Proof, addr: tuple[int, ...]) -> tuple[int, ...]:
    """Where the translation of the node at ``addr`` ends up."""
    out: list[int] = []
    node = p
    for k in addr:
        out += [0] * (_chain_length(node) - 1) + [k]
        node = node.premises[k]
    return tuple(out)


def _derelict(t: Tagged, x: Occ) -> tuple[Tagged, Occ]:
    y = Occ(Whynot(LL_SIG, x.f))
    concl = [y if z is x else z for z in t.occs]
    return build("mpx", concl, [t], principal=y, active=[x], index=1), y


def _contract(t: Tagged, xs: list[Occ]) -> tuple[Tagged, Occ]:
    """Binary contractions folding ``xs`` into one occurrence, left to right."""
    acc = xs[0]
    for x in xs[1:]:
        y = Occ(acc.f)
        concl = [z for z in t.occs if z is not acc and z is not x] + [y]
        t = build("contr", concl, [t], principal=y, active=[acc, x], index=2)
        acc = y
    return t, acc


def translate_proof(p: Proof) -> Proof:
    """Node-wise translation; back-edges and labels are kept."""
    memo: dict[int, Proof] = {}

    def tr(node):
        if isinstance(node, Back):
            return Back(node.target, tuple(map(translate_formula, node.seq)), node.perm, node.name)
        hit = memo.get(id(node))
        if hit is not None:
            return hit
        r = node.rule
        seq = tuple(map(translate_formula, node.seq))
        prems = tuple(tr(q) for q in node.premises)
        kind = r.kind
        if kind in ("contr", "bang_f", "bang_u") or kind == "mpx" and r.index > 1:
            out = _expand(node, seq, prems)
        else:
            sig = LL_SIG if r.sig is not None else None
            taus = tuple(LL_SIG for _ in r.taus)
            out = Proof(seq, replace(r, sig=sig, taus=taus), prems, node.label, node.name)
        memo[id(node)] = out
        return out

    return tr(p)


def _expand(node: Proof, seq, prems) -> Proof:
    r = node.rule
    t = tag(prems[0])
    concl = [None] * len(seq)
    top = {q: t.occs[q] for q in range(len(t.occs))}
    for j, e in enumerate(r.anc):
        if j != r.principal:
            concl[j] = top[e[0][1]]
    actives = [top[q] for _, q in r.anc[r.principal]]
    if r.kind == "mpx":
        ds = []
        for x in actives:
            t, y = _derelict(t, x)
            ds.append(y)
        t, out = _contract(t, ds)
    elif r.kind == "contr":
        t, out = _contract(t, actives)
    else:  # bang_f, bang_u: dereliction on every context formula, then a promotion
        for j in range(len(seq)):
            if j != r.principal:
                t, concl[j] = _derelict(t, concl[j])
        out = Occ(seq[r.principal])
        concl[r.principal] = out
        t = build("bang_g", concl, [t], principal=out, active=actives)
        return replace(t.proof, label=node.label, name=node.name)
    concl[r.principal] = out
    last = t.proof
    order = {id(o): k for k, o in enumerate(t.occs)}
    perm = [order[id(o)] for o in concl]
    lr = last.rule
    anc = tuple(lr.anc[k] for k in perm)
    principal = perm.index(lr.principal)
    return replace(last, seq=seq, rule=replace(lr, anc=anc, principal=principal),
                   label=node.label, name=node.name)


# ------------------------------------------------------------ template

def build_promotion_template(body: Proof) -> Proof:
    """The circular μMALL proof of ⊢ !̂A, ?̂Γ from a body proof of ⊢ A, ?̂Γ.

    Bottom-up: ν, & (body | &(1 after weakenings | contractions then ⊗ of
    two back-edges to the root)).
    """
    if not body.seq:
        raise SequentMismatch("the body proves the empty sequent")
    a, gamma = body.seq[0], list(body.seq[1:])
    for g in gamma:
        if not _is_encoded_whynot(g):
            raise SequentMismatch(f"context formula is not an encoded ?-formula: {g}")
    bang = Nu(With(shift(a, 1), With(One(), Tensor(Var(0), Var(0)))))
    label = "tmpl"
    root = Occ(bang)
    ctx = [Occ(g) for g in gamma]
    unfolded = With(a, With(One(), Tensor(bang, bang)))
    w_occ = Occ(unfolded)

    # left: the body, with its conclusion occurrences renamed to ours
    tb = Tagged(body, tuple([Occ(a)] + ctx))
    # right-left: ⊢ 1, ?̂Γ by encoded weakenings
    one = Occ(One())
    t1 = build("one", [one])
    for g in ctx:
        t1 = _enc_weaken(t1, g)
    # right-right: ⊢ !̂A ⊗ !̂A, ?̂Γ by encoded contractions and a tensor of back-edges
    left_ctx = [Occ(g.f) for g in ctx]
    right_ctx = [Occ(g.f) for g in ctx]
    bl, br = Occ(bang), Occ(bang)
    backl = Tagged(Back(label, tuple([bang] + gamma)), tuple([bl] + left_ctx))
    backr = Tagged(Back(label, tuple([bang] + gamma)), tuple([br] + right_ctx))
    tens = Occ(Tensor(bang, bang))
    tt = build("tensor", [tens] + left_ctx + right_ctx, [backl, backr], principal=tens, active=[bl, br])
    for g, x, y in zip(ctx, left_ctx, right_ctx):
        tt = _enc_contract(tt, g, x, y)
    inner = Occ(With(One(), Tensor(bang, bang)))
    tw = build("with", [inner] + ctx, [t1, tt], principal=inner, active=[one, tens])
    top = build("with", [w_occ] + ctx, [tb, tw], principal=w_occ, active=[tb.occs[0], inner])
    return build("nu", [root] + ctx, [top], principal=root, active=[w_occ], label=label).proof


def _is_encoded_whynot(f: Formula) -> bool:
    return (isinstance(f, Mu) and isinstance(f.body, Plus) and f.body.right == Plus(Bot(), Par(Var(0), Var(0))))


def _enc_weaken(t: Tagged, g: Occ) -> Tagged:
    """⊢ Γ  ↦  ⊢ ?̂B, Γ through μ, ⊕2, ⊕1, ⊥ (ending on the occurrence ``g``)."""
    unf = unfold(g.f)
    bot = Occ(Bot())
    t = build("bot", [bot] + list(t.occs), [t], principal=bot)
    mid = Occ(unf.right)
    t = build("plus1", [mid] + list(t.occs[1:]), [t], principal=mid, active=[bot])
    top = Occ(unf)
    t = build("plus2", [top] + list(t.occs[1:]), [t], principal=top, active=[mid])
    return build("mu", [g] + list(t.occs[1:]), [t], principal=g, active=[top])


def _enc_contract(t: Tagged, g: Occ, x: Occ, y: Occ) -> Tagged:
    """Merge two ?̂B occurrences ``x``, ``y`` into ``g`` through ⅋, ⊕2, ⊕2, μ."""
    unf = unfold(g.f)
    rest = [z for z in t.occs if z is not x and z is not y]
    par = Occ(unf.right.right)
    t = build("par", [par] + rest, [t], principal=par, active=[x, y])
    mid = Occ(unf.right)
    t = build("plus2", [mid] + rest, [t], principal=mid, active=[par])
    top = Occ(unf)
    t = build("plus2", [top] + rest, [t], principal=top, active=[mid])
    return build("mu", [g] + rest, [t], principal=g, active=[top])


# --------------------------------------------------------- permutations

_PERMUTABLE = {("mpx", 0), ("mpx", 1), ("contr", 2)}


def _path_to_addr(p: Proof, path: str) -> tuple[int, ...]:
    addr, node = [], p
    for ch in path:
        if not isinstance(node, Proof):
            raise NotPermutable(f"path {path!r} leaves the proof")
        n = len(node.premises)
        if ch == "i" and n == 1 or ch == "l" and n == 2:
            k = 0
        elif ch == "r" and n == 2:
            k = 1
        elif ch.isdigit() and int(ch) < n:
            k = int(ch)
        else:
            raise NotPermutable(f"path {path!r} does not fit the proof at {''.join(map(str, addr))}")
        addr.append(k)
        node = node.premises[k]
    return tuple(addr)


def _swap_here(node: Proof) -> Proof:
    lower = node
    if not isinstance(lower, Proof) or len(lower.premises) != 1:
        raise NotPermutable("no unary rule here")
    upper = lower.premises[0]
    if not isinstance(upper, Proof):
        raise NotPermutable("premise is a back-edge")
    if (lower.rule.kind, lower.rule.index) not in _PERMUTABLE or (upper.rule.kind, upper.rule.index) not in _PERMUTABLE:
        raise NotPermutable(f"{upper.rule.name()} above {lower.rule.name()} is not a listed permutation")
    if upper.label is not None:
        raise NotPermutable("the upper rule is a back-edge target")
    T = tag(lower)
    X = open_rule(T)
    Y = open_rule(X.prems[0])
    if any(a is Y.principal for a in X.active):
        raise NotPermutable("the two rules act on the same formula")
    above = Y.prems[0]
    new_upper_concl = [z for z in above.occs if all(z is not a for a in X.active)] + [X.principal]
    nu = build(X.kind, new_upper_concl, [above], principal=X.principal, active=X.active, index=X.index)
    nl = build(Y.kind, list(T.occs), [nu], principal=Y.principal, active=Y.active, index=Y.index,
               label=lower.label)
    return replace(nl.proof, name=lower.name)


def _replace(p: Proof, addr, new):
    if not addr:
        return new
    k = addr[0]
    prems = list(p.premises)
    prems[k] = _replace(p.premises[k], addr[1:], new)
    return replace(p, premises=tuple(prems))


def permute_one_step(p: Proof, at: str) -> Proof:
    """Swap the unary ?-rule addressed by ``at`` with the ?-rule just above it.

    ``at`` is a word over ``i`` (unary premise), ``l``/``r`` (binary
    premises) and digits (premises of a wider multicut).
    """
    addr = _path_to_addr(p, at)
    node, _ = node_at(p, addr)
    return _replace(p, addr, _swap_here(node))


def exponential_pairs(p: Proof, under: tuple[int, ...] = ()) -> list[tuple[int, ...]]:
    """Addresses (within ``under``) where a listed permutation applies."""
    out = []
    base, _ = node_at(p, under)
    if not isinstance(base, Proof):
        return out
    for addr, node, _ in walk(base):
        if isinstance(node, Proof) and len(node.premises) == 1 and isinstance(node.premises[0], Proof):
            try:
                _swap_here(node)
            except NotPermutable:
                continue
            out.append(under + addr)
    return out


def _addr_path(p: Proof, addr) -> str:
    out, node = [], p
    for k in addr:
        n = len(node.premises)
        out.append("i" if n == 1 else ("l", "r")[k] if n == 2 else str(k))
        node = node.premises[k]
    return "".join(out)


# -------------------------------------------------- proof equality

def key_modulo_exchange(p: Proof) -> int:
    """A hash of ``p`` that ignores the order of formulas in sequents and of
    multicut premises.  Back-edges are compared by their sequent only.
    """
    memo_pos: dict[tuple[int, int], int] = {}
    memo_node: dict[int, int] = {}

    def node_key(n) -> int:
        if isinstance(n, Back):
            return hash(("back", tuple(sorted(map(hash, n.seq)))))
        h = memo_node.get(id(n))
        if h is None:
            r = n.rule
            ks = [node_key(q) for q in n.premises]
            if r.kind == "mcut":
                ks = sorted(ks)
            pos = sorted(pos_key(n, j) for j in range(len(n.seq)))
            pairs = ()
            if r.kind == "mcut":
                pairs = tuple(sorted(tuple(sorted((pos_key(n.premises[a[0]], a[1]), pos_key(n.premises[b[0]], b[1]))))
                                     for a, b in r.pp))
            h = hash((r.kind, r.index, tuple(ks), tuple(pos), pairs))
            memo_node[id(n)] = h
        return h

    def pos_key(n, j) -> int:
        if isinstance(n, Back):
            return hash(("backpos", n.seq[j]))
        h = memo_pos.get((id(n), j))
        if h is None:
            r = n.rule
            up = tuple(sorted(pos_key(n.premises[k], q) if r.kind in ("mcut", "with") else
                              hash((k, pos_key(n.premises[k], q))) for k, q in r.anc[j]))
            h = hash((n.seq[j], j == r.principal, up))
            memo_pos[(id(n), j)] = h
        return h

    return node_key(p)


# ----------------------------------------------------------- simulation

@dataclass(frozen=True)
class Simulated:
    steps: int
    perms: int
    shapes: tuple[str, ...] = ()


@dataclass(frozen=True)
class NotFound:
    reason: str


def recipe(p: Proof, r: Redex) -> tuple[frozenset[str], int, int]:
    """(μLL shapes allowed, step budget, permutation budget) for simulating ``r``."""
    node, env = node_at(p, r.at)
    V, _ = _open_view(node, env)
    k = r.focus[0]
    prem = V.prems[k].proof
    s = r.shape
    ctx_total = sum(len(t.occs) - 1 for t in V.prems)
    n_others = len(V.prems) - 1
    exp = frozenset({"comm_bang_g", "princ_mpx", "princ_contr", "comm_mpx", "comm_contr"})
    if s in ("comm_bang_g", "comm2_bang_f"):
        return frozenset({"comm_bang_g"}), 1, 0
    if s in ("comm1_bang_f", "comm2_bang_u"):
        return exp, 1 + n_others + ctx_total, ctx_total * ctx_total
    if s == "comm1_bang_u":
        return exp, 1 + n_others + 1, 0
    if s in ("comm3_bang_u", "comm4_bang_u"):
        return exp, 1 + n_others + 1, 0
    if s == "comm_mpx":
        i = prem.rule.index
        return frozenset({"comm_mpx", "comm_contr"}), max(1, 2 * i - 1), 0
    if s == "comm_contr":
        return frozenset({"comm_contr"}), prem.rule.index - 1, 0
    if s in ("princ_contr", "princ_mpx"):
        i = prem.rule.index
        o = V.prems[k].occs[prem.rule.principal]
        hang = V.hanging(o)
        plan, s_mpx, _ = compute_ompx(V, r.focus[1], hang)
        stripped = len(plan) - sum(1 for m in plan.values() if m == "keep")
        concl_h = sum(1 for x in V.concl for j in hang for y in V.prems[j].occs if x is y)
        if s == "princ_contr":
            n = i - 1
            return frozenset({"princ_contr"}), n, (n * concl_h) ** 2 + 2 * n * concl_h
        if i == 0:
            return frozenset({"princ_mpx"}), 1, 0
        n = (i - 1) + i * stripped + i * concl_h
        below = (2 * i) * concl_h
        return exp, n, below * below
    return frozenset({s}), 1, 0


def check_simulation(p: Proof, r: Redex, inst: InstanceSpec, budget: int | None = None,
                     max_states: int = 20_000) -> Simulated | NotFound:
    """Search μLL reductions (plus permutations) from the translation of ``p``
    to the translation of ``apply_step(p, r)``.

    Reductions are confined to the subtree of the translated multicut and to
    the μLL shapes of the step's recipe; ``budget`` overrides the recipe's
    step budget.
    """
    target = translate_proof(apply_step(p, r, inst))
    tkey = key_modulo_exchange(target)
    tsig = _coarse(target)
    shapes, steps_budget, perm_budget = recipe(p, r)
    if budget is not None:
        steps_budget = budget
    start = translate_proof(p)
    root = translated_address(p, r.at)
    seen = {key_modulo_exchange(start)}
    layer = [(start, ())]
    candidates = []
    for depth in range(steps_budget + 1):
        for q, used in layer:
            if key_modulo_exchange(q) == tkey:
                return Simulated(depth, 0, used)
            if _coarse(q) == tsig:
                candidates.append((q, used))
        if depth == steps_budget:
            break
        nxt = []
        for q, used in layer:
            for red in enumerate_redexes(q):
                if red.at[:len(root)] != root or red.shape not in shapes:
                    continue
                q2 = apply_step(q, red, LL)
                k2 = key_modulo_exchange(q2)
                if k2 in seen:
                    continue
                seen.add(k2)
                nxt.append((q2, used + (red.shape,)))
                if len(seen) > max_states:
                    return NotFound("state limit")
        layer = nxt
    for q, used in candidates:
        n = _permutation_distance(q, tkey, root, perm_budget, max_states)
        if n is not None:
            return Simulated(len(used), n, used)
    return NotFound(f"no match within {steps_budget} steps and {perm_budget} permutations")


def _coarse(p: Proof):
    c = Counter()
    for _, n, _ in walk(p):
        if isinstance(n, Proof):
            c[(n.rule.kind, n.rule.index)] += 1
    return frozenset(c.items())


def _permutation_distance(q: Proof, tkey: int, root, budget: int, max_states: int) -> int | None:
    seen = {key_modulo_exchange(q)}
    layer = [q]
    for d in range(budget + 1):
        nxt = []
        for x in layer:
            if key_modulo_exchange(x) == tkey:
                return d
            if d == budget:
                continue
            for addr in exponential_pairs(x, root):
                y = _replace(x, addr, _swap_here(node_at(x, addr)[0]))
                k = key_modulo_exchange(y)
                if k not in seen:
                    seen.add(k)
                    nxt.append(y)
            if len(seen) > max_states:
                return None
        layer = nxt
    return None
