"""Seeded random formulas and proofs, for tests and the ``oracle`` command.

``ProofGen.analytic`` grows a finite proof of ``⊢ F, Δ`` from ``F`` down to
axioms, inventing the side formulas ``Δ`` on the way (optionally with
cuts).  ``ProofGen.circular`` runs a bounded random proof search on a given
sequent that closes branches with back-edges whenever a sequent repeats.
Everything is driven by a ``random.Random`` so runs are reproducible.
"""

from __future__ import annotations

import random
from collections import Counter

from .proof import Back, Occ, Proof, Tagged, build, check_wellformed, tag
from .signatures import InstanceSpec, parse_instance
from .syntax import (Atom, Bang, Bot, Formula, Mu, NegAtom, Nu, One, Par, Plus, Tensor, Top, Var,
                     Whynot, With, Zero, is_closed, negate, unfold)

__all__ = ["random_formula", "ProofGen", "full_instance", "GenFailed", "template_consumer",
           "template_against_consumer", "redex_corpus"]


class GenFailed(Exception):
    pass


def full_instance() -> InstanceSpec:
    """One signature with every promotion kind: exercises all step shapes."""
    return parse_instance("sig x mpx={0,1,2} contr={2,3}\nleq g x x\nleq f x x\nleq u x x\n", "full")


def random_formula(rng: random.Random, size: int, sigs=("s",), atoms="abc", fix=True, depth=0) -> Formula:
    """A closed formula with about ``size`` connectives."""
    def go(n, bound):
        if n <= 0:
            choices = [lambda: Atom(rng.choice(atoms)), lambda: NegAtom(rng.choice(atoms)),
                       lambda: rng.choice([One(), Bot(), Top(), Zero()])]
            if bound:
                choices += [lambda: Var(rng.randrange(bound))] * 2
            return rng.choice(choices)()
        k = rng.randrange(10 if fix else 8)
        if k < 4:
            cls = (Par, Tensor, Plus, With)[k]
            a = rng.randrange(n)
            return cls(go(a, bound), go(n - 1 - a, bound))
        if k < 6:
            cls = Whynot if k == 4 else Bang
            return cls(rng.choice(sigs), go(n - 1, bound))
        if k < 8:
            return go(n - 1, bound) if n > 1 else go(0, bound)
        return (Mu if k == 8 else Nu)(go(n - 1, bound + 1))
    while True:
        f = go(size, depth)
        if is_closed(f):
            return f


class ProofGen:
    def __init__(self, rng: random.Random, inst: InstanceSpec, *, cut_rate: float = 0.0,
                 ax_rate: float = 0.15):
        self.rng = rng
        self.inst = inst
        self.cut_rate = cut_rate
        self.ax_rate = ax_rate
        self.sigs = sorted(inst.sigs)

    # ------------------------------------------------------------ formulas

    def formula(self, size: int, fix: bool = True) -> Formula:
        return random_formula(self.rng, size, tuple(self.sigs), fix=fix)

    # ----------------------------------------------------- finite, analytic

    def analytic(self, f: Formula, depth: int = 4) -> tuple[Tagged, Occ]:
        """A finite proof of ``⊢ f, Δ``; returns it with the occurrence of ``f``."""
        rng = self.rng
        if depth > 0 and rng.random() < self.cut_rate:
            t, o = self.analytic(f, depth - 1)
            side = [x for x in t.occs if x is not o]
            if side:
                x = rng.choice(side)
                t2, o2 = self.analytic(negate(x.f), depth - 1)
                concl = [y for y in t.occs if y is not x] + [y for y in t2.occs if y is not o2]
                return build("cut", concl, [t, t2]), o
        if depth <= 0 or rng.random() < self.ax_rate:
            return self._ax(f)
        match f:
            case One():
                return self._one()
            case Bot():
                t, _ = self._one()
                o = Occ(f)
                return build("bot", [o] + list(t.occs), [t], principal=o), o
            case Top():
                o = Occ(f)
                ctx = [Occ(self.formula(1, fix=False))] if rng.random() < 0.5 else []
                return build("top", [o] + ctx, principal=o), o
            case Tensor(a, b):
                ta, oa = self.analytic(a, depth - 1)
                tb, ob = self.analytic(b, depth - 1)
                o = Occ(f)
                concl = [o] + [x for x in ta.occs if x is not oa] + [x for x in tb.occs if x is not ob]
                return build("tensor", concl, [ta, tb], principal=o, active=[oa, ob]), o
            case Par(a, b):
                ta, oa = self.analytic(a, depth - 1)
                tb, ob = self.analytic(b, depth - 1)
                t = self._merge(ta, [oa], tb, [ob])
                o = Occ(f)
                concl = [o] + [x for x in t.occs if x is not oa and x is not ob]
                return build("par", concl, [t], principal=o, active=[oa, ob]), o
            case Plus(a, b):
                s = rng.randrange(2)
                t, oa = self.analytic((a, b)[s], depth - 1)
                o = Occ(f)
                return build(("plus1", "plus2")[s], _swap(t.occs, oa, o), [t], principal=o, active=[oa]), o
            case With(a, b):
                return self._with(f, a, b, depth)
            case Mu() | Nu():
                t, oa = self.analytic(unfold(f), depth - 1)
                o = Occ(f)
                return build("mu" if isinstance(f, Mu) else "nu", _swap(t.occs, oa, o), [t],
                             principal=o, active=[oa]), o
            case Whynot(s, a):
                return self._whynot(f, s, a, depth)
            case Bang(s, a):
                r = self._bang(f, s, a, depth)
                if r is not None:
                    return r
        return self._ax(f)

    def _ax(self, f):
        o = Occ(f)
        return build("ax", [o, Occ(negate(f))]), o

    def _one(self):
        o = Occ(One())
        return build("one", [o]), o

    def _nonempty(self, t: Tagged, keep) -> Tagged:
        if any(all(x is not k for k in keep) for x in t.occs):
            return t
        o = Occ(Bot())
        return build("bot", list(t.occs) + [o], [t], principal=o)

    def _merge(self, ta, keep_a, tb, keep_b) -> Tagged:
        """One sequent holding both conclusions: a tensor on a side formula of each."""
        ta, tb = self._nonempty(ta, keep_a), self._nonempty(tb, keep_b)
        x = self.rng.choice([y for y in ta.occs if all(y is not k for k in keep_a)])
        y = self.rng.choice([z for z in tb.occs if all(z is not k for k in keep_b)])
        o = Occ(Tensor(x.f, y.f))
        concl = [z for z in ta.occs if z is not x] + [z for z in tb.occs if z is not y] + [o]
        return build("tensor", concl, [ta, tb], principal=o, active=[x, y])

    def _collapse(self, t: Tagged, keep: Occ) -> tuple[Tagged, Occ]:
        """Par the side formulas together into exactly one."""
        t = self._nonempty(t, [keep])
        while True:
            side = [x for x in t.occs if x is not keep]
            if len(side) == 1:
                return t, side[0]
            x, y = side[0], side[1]
            o = Occ(Par(x.f, y.f))
            concl = [z for z in t.occs if z is not x and z is not y] + [o]
            t = build("par", concl, [t], principal=o, active=[x, y])

    def _with(self, f, a, b, depth):
        ta, oa = self.analytic(a, depth - 1)
        tb, ob = self.analytic(b, depth - 1)
        ta, xa = self._collapse(ta, oa)
        tb, xb = self._collapse(tb, ob)
        side = Occ(Plus(xa.f, xb.f))
        pa = build("plus1", [oa, side], [ta], principal=side, active=[xa])
        pb = build("plus2", [ob, side], [tb], principal=side, active=[xb])
        o = Occ(f)
        return build("with", [o, side], [pa, pb], principal=o, active=[oa, ob]), o

    def _whynot(self, f, s, a, depth):
        sig = self.inst.sigs.get(s)
        if sig is None:
            return self._ax(f)
        opts = [("mpx", i) for i in sorted(sig.mpx) if i <= 2] + [("contr", i) for i in sorted(sig.contr) if i <= 3]
        kind, i = self.rng.choice(opts) if opts else ("ax", 0)
        if kind == "ax":
            return self._ax(f)
        o = Occ(f)
        if kind == "mpx" and i == 0:
            t, _ = self.analytic(self.formula(1, fix=False), depth - 1)
            return build("mpx", [o] + list(t.occs), [t], principal=o, active=[], index=0), o
        want = a if kind == "mpx" else f
        t, x = self.analytic(want, depth - 1)
        xs = [x]
        for _ in range(i - 1):
            t2, x2 = self.analytic(want, depth - 2)
            t = self._merge(t, xs, t2, [x2])
            xs.append(x2)
        concl = [o] + [z for z in t.occs if all(z is not y for y in xs)]
        return build(kind, concl, [t], principal=o, active=xs, index=i), o

    def _bang(self, f, s, a, depth):
        rng, inst = self.rng, self.inst
        t, oa = self.analytic(a, depth - 1)
        kinds = ["g", "f", "u"]
        rng.shuffle(kinds)
        for k in kinds:
            targets = sorted(b for (x, b) in inst.leq(k) if x == s)
            if not targets:
                continue
            o = Occ(f)
            if k == "g":
                tt = t
                for x in [z for z in t.occs if z is not oa]:
                    ok = [b for b in targets if isinstance(x.f, Whynot) and x.f.sig == b]
                    if ok and rng.random() < 0.7:
                        continue
                    der = [b for b in targets if 1 in inst.sigs[b].mpx]
                    if not der:
                        break
                    y = Occ(Whynot(rng.choice(der), x.f))
                    tt = build("mpx", _swap(tt.occs, x, y), [tt], principal=y, active=[x], index=1)
                else:
                    return build("bang_g", _swap(tt.occs, oa, o), [tt], principal=o, active=[oa]), o
                continue
            tt = t
            if k == "u":
                side = [z for z in t.occs if z is not oa]
                if len(side) != 1:
                    tt, _ = self._collapse(t, oa)
            links, concl = {}, []
            for x in tt.occs:
                if x is oa:
                    concl.append(o)
                else:
                    y = Occ(Whynot(rng.choice(targets), x.f))
                    links[y] = [x]
                    concl.append(y)
            return build(f"bang_{k}", concl, [tt], principal=o, active=[oa], links=links), o
        return None

    def finite_with_cuts(self, size: int = 3, depth: int = 4, tries: int = 50) -> Proof:
        """A finite proof with at least one cut, well formed under the instance."""
        for _ in range(tries):
            f = self.formula(size)
            t, o = self.analytic(f, depth)
            p = t.proof
            if p.ncuts == 0:
                side = [x for x in t.occs]
                x = self.rng.choice(side)
                t2, o2 = self.analytic(negate(x.f), depth)
                concl = [y for y in t.occs if y is not x] + [y for y in t2.occs if y is not o2]
                p = build("cut", concl, [t, t2]).proof
            if not check_wellformed(p, self.inst):
                return p
        raise GenFailed("no well-formed proof with cuts")

    # ------------------------------------------------------------ circular

    def circular(self, seq: list[Formula], max_nodes: int = 8, tries: int = 200) -> Proof:
        """Random bounded proof search on ``seq``; repeats become back-edges."""
        for _ in range(tries):
            try:
                self._budget = max_nodes
                self._labels = 0
                p = self._search(tuple(seq), [])
            except GenFailed:
                continue
            if p.nnodes <= max_nodes and not check_wellformed(p, self.inst):
                return p
        raise GenFailed(f"no circular proof found for {seq}")

    def _search(self, seq: tuple[Formula, ...], path: list[tuple[tuple, str]]) -> Proof:
        rng = self.rng
        self._budget -= 1
        if self._budget < 0:
            raise GenFailed("budget")
        for anc_seq, label in reversed(path):
            perm = _perm(seq, anc_seq)
            if perm is not None and rng.random() < 0.9:
                return Back(label, seq, None if perm == tuple(range(len(seq))) else perm)
        moves = self._moves(seq)
        if not moves:
            raise GenFailed("stuck")
        rng.shuffle(moves)
        moves.sort(key=lambda m: m[0] not in ("ax", "one", "top"))
        kind, j, extra = moves[0] if rng.random() < 0.5 else rng.choice(moves)
        label = f"l{len(path)}"
        prem_seqs, anc, index = self._premises(seq, kind, j, extra)
        here = path + [(seq, label)]
        prems = tuple(self._search(ps, here) for ps in prem_seqs)
        from .proof import Rule
        sig = None
        taus = ()
        if kind in ("mpx", "contr", "bang_g", "bang_f", "bang_u"):
            sig = seq[j].sig
        if kind.startswith("bang"):
            taus = tuple(seq[q].sig for q in range(len(seq)) if q != j)
        rule = Rule(kind, j if kind not in ("ax", "one") else None, anc, index, sig, taus)
        used = any(isinstance(b, Back) and b.target == label for b in _backs(prems))
        return Proof(seq, rule, prems, label if used else None)

    def _moves(self, seq):
        inst = self.inst
        out = []
        if len(seq) == 2 and seq[1] == negate(seq[0]):
            out.append(("ax", None, None))
        if seq == (One(),):
            out.append(("one", None, None))
        for j, f in enumerate(seq):
            match f:
                case Top():
                    out.append(("top", j, None))
                case Bot():
                    out.append(("bot", j, None))
                case Par():
                    out.append(("par", j, None))
                case With():
                    out.append(("with", j, None))
                case Plus():
                    out += [("plus1", j, None), ("plus2", j, None)]
                case Mu():
                    out.append(("mu", j, None))
                case Nu():
                    out.append(("nu", j, None))
                case Tensor():
                    rest = [q for q in range(len(seq)) if q != j]
                    split = frozenset(q for q in rest if self.rng.random() < 0.5)
                    out.append(("tensor", j, split))
                case Whynot(s, _) if s in inst.sigs:
                    sig = inst.sigs[s]
                    out += [("mpx", j, i) for i in sig.mpx if i <= 2]
                    out += [("contr", j, i) for i in sig.contr if i <= 2]
                case Bang(s, _) if s in inst.sigs:
                    ctx = [g for q, g in enumerate(seq) if q != j]
                    if all(isinstance(g, Whynot) for g in ctx):
                        for k in "gfu":
                            rel = inst.leq(k)
                            if all((s, g.sig) in rel for g in ctx) and (k != "u" or len(ctx) == 1):
                                out.append((f"bang_{k}", j, None))
        return out

    def _premises(self, seq, kind, j, extra):
        n = len(seq)
        rest = [q for q in range(n) if q != j]
        if kind in ("ax", "one", "top"):
            return [], tuple(() for _ in seq), None
        f = seq[j]
        if kind == "tensor":
            left = [q for q in rest if q in extra]
            right = [q for q in rest if q not in extra]
            ps = [(f.left,) + tuple(seq[q] for q in left), (f.right,) + tuple(seq[q] for q in right)]
            anc = [None] * n
            anc[j] = ((0, 0), (1, 0))
            for i, q in enumerate(left):
                anc[q] = ((0, i + 1),)
            for i, q in enumerate(right):
                anc[q] = ((1, i + 1),)
            return ps, tuple(anc), None
        if kind == "with":
            ctx = tuple(seq[q] for q in rest)
            anc = [None] * n
            anc[j] = ((0, 0), (1, 0))
            for i, q in enumerate(rest):
                anc[q] = ((0, i + 1), (1, i + 1))
            return [(f.left,) + ctx, (f.right,) + ctx], tuple(anc), None
        heads = {"par": lambda: [f.left, f.right], "plus1": lambda: [f.left], "plus2": lambda: [f.right],
                 "mu": lambda: [unfold(f)], "nu": lambda: [unfold(f)], "bot": lambda: [],
                 "mpx": lambda: [f.body] * extra, "contr": lambda: [f] * extra,
                 "bang_g": lambda: [f.body], "bang_f": lambda: [f.body], "bang_u": lambda: [f.body]}[kind]()
        strip = kind in ("bang_f", "bang_u")
        ctx = tuple(seq[q].body if strip else seq[q] for q in rest)
        anc = [None] * n
        anc[j] = tuple((0, i) for i in range(len(heads)))
        for i, q in enumerate(rest):
            anc[q] = ((0, len(heads) + i),)
        return [tuple(heads) + ctx], tuple(anc), (extra if kind in ("mpx", "contr") else None)


def _swap(occs, old, new):
    return [new if x is old else x for x in occs]


def _perm(seq, target):
    """perm with seq[j] == target[perm[j]], or None."""
    if len(seq) != len(target) or Counter(seq) != Counter(target):
        return None
    free = list(range(len(target)))
    out = []
    for f in seq:
        for i in free:
            if target[i] == f:
                out.append(i)
                free.remove(i)
                break
    return tuple(out)


def _backs(prems):
    stack = list(prems)
    while stack:
        q = stack.pop()
        if isinstance(q, Back):
            yield q
        else:
            stack.extend(q.premises)


def template_consumer() -> Proof:
    """A circular proof of ⊢ ?̂⊥, S with S = νY.(1 ⊗ Y) that uses one copy of
    ?̂⊥ per unfolding of S: cut against the template for A = 1 it needs
    the template to unfold forever.
    """
    from .translate import encode_exponential
    w = encode_exponential(Whynot("ll", Bot()))
    s = Nu(Tensor(One(), Var(0)))
    unf = unfold(w)
    label = "cons"
    root_w = Occ(w)
    # ⊢ ?̂⊥, 1 : one copy derelicted
    x1, o1 = Occ(w), Occ(One())
    b = Occ(Bot())
    t = build("one", [o1])
    t = build("bot", [b, o1], [t], principal=b)
    m = Occ(unf)
    t = build("plus1", [m, o1], [t], principal=m, active=[b])
    left = build("mu", [x1, o1], [t], principal=x1, active=[m])
    # ⊢ ?̂⊥, S : back to the root
    x2, s2 = Occ(w), Occ(s)
    right = Tagged(Back(label, (w, s)), (x2, s2))
    ts = Occ(Tensor(One(), s))
    t = build("tensor", [ts, x1, x2], [left, right], principal=ts, active=[o1, s2])
    s3 = Occ(s)
    t = build("nu", [s3, x1, x2], [t], principal=s3, active=[ts])
    par = Occ(unf.right.right)
    t = build("par", [par, s3], [t], principal=par, active=[x1, x2])
    mid = Occ(unf.right)
    t = build("plus2", [mid, s3], [t], principal=mid, active=[par])
    top = Occ(unf)
    t = build("plus2", [top, s3], [t], principal=top, active=[mid])
    return build("mu", [root_w, s3], [t], principal=root_w, active=[top], label=label).proof


def template_against_consumer() -> Proof:
    """The promotion template (A = 1, empty Γ) cut against ``template_consumer``."""
    from .translate import build_promotion_template
    tmpl = build_promotion_template(build("one", [Occ(One())]).proof)
    cons = template_consumer()
    a, b = tag(tmpl), tag(cons)
    return build("cut", [b.occs[1]], [a, b]).proof


def redex_corpus(rng: random.Random, insts, per_shape: int = 10, rounds: int = 1500,
                 walk: int = 60, max_nodes: int = 80) -> dict[str, list]:
    """Examples ``(proof, redex, instance)`` of every reduction shape met on
    random walks of the fair-reduction relation from random finite proofs
    with cuts.  At most ``per_shape`` examples are kept per shape; the walk
    stops early once every shape has that many.
    """
    from .reduction import SHAPES, apply_step, enumerate_redexes, prepare

    out: dict[str, list] = {s: [] for s in SHAPES}
    for _ in range(rounds):
        inst = rng.choice(insts)
        try:
            p = ProofGen(rng, inst, cut_rate=0.3).finite_with_cuts(4, 5)
        except GenFailed:
            continue
        p = prepare(p)
        for _ in range(walk):
            rs = enumerate_redexes(p)
            if not rs:
                break
            if p.nnodes < max_nodes:
                for r in rs:
                    if len(out[r.shape]) < per_shape:
                        out[r.shape].append((p, r, inst))
            p = apply_step(p, rng.choice(rs), inst)
        if all(len(v) >= per_shape for v in out.values()):
            break
    return out
