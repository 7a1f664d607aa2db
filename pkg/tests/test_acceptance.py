"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N ...: PASS`` or ``FAIL`` line (shown
even when pytest captures output) and fails when the criterion fails.
"""

import random
import time
from contextlib import contextmanager

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DATA, formulas, mcuts, permute_mcut
from oracles import closure_brute, closure_pairs
from musuperll.formats import parse_proof, print_proof
from musuperll.generate import (GenFailed, ProofGen, full_instance, random_formula, redex_corpus,
                                template_against_consumer)
from musuperll.proof import Occ, build, check_wellformed, mcut_of, restrict_context, same_proof, validate_mcut
from musuperll.reduction import (SHAPES, InternalInvariantBroken, apply_step, audit_fairness,
                                 enumerate_redexes, fair_normalize, is_cut_free, prepare, productive_depth)
from musuperll.signatures import builtin_instance, check_axioms, closure_contains
from musuperll.syntax import Atom, NegAtom, One, Top, Zero, negate, parse_formula, show
from musuperll.translate import (Simulated, build_promotion_template, check_simulation, translate_proof)
from musuperll.validity import (Inconclusive, Invalid, Valid, check_validity, lasso_has_valid_thread,
                                proof_graph, validity_oracle)

LL = builtin_instance("ll")
TRACES = []        # every fair_normalize trace produced here, audited by criterion 9


@pytest.fixture
def criterion(capsys):
    @contextmanager
    def run(n: int, name: str):
        t0 = time.perf_counter()
        info: dict = {}
        try:
            yield info
        except BaseException:
            with capsys.disabled():
                print(f"\ncriterion {n} {name}: FAIL {info.get('detail', '')}".rstrip())
            raise
        dt = time.perf_counter() - t0
        with capsys.disabled():
            print(f"\ncriterion {n} {name}: PASS ({dt:.1f}s) {info.get('detail', '')}".rstrip())

    return run


def _brute_closure(sig, rule):
    return (rule.kind, rule.index) in closure_brute(sig, rule.index)


def _normalize(p, inst, max_steps=10_000, depth_goal=None):
    q, trace, status = fair_normalize(p, inst, max_steps, depth_goal)
    TRACES.append(trace)
    return q, trace, status


# ------------------------------------------------------------------- 1

MCUT_SEED = """
(node m (seq top, top) (rule cut :premises (p1 c)))
(node p1 (seq top, b) (rule top :principal 0))
(node c (seq ~b, top) (rule cut :premises (p2 p3)))
(node p2 (seq ~b, top) (rule top :principal 1))
(node p3 (seq 0, top) (rule top :principal 1))
"""


def test_criterion_1_golden(criterion):
    with criterion(1, "golden examples") as info:
        reg = parse_proof((DATA / "proofs" / "regproof.prf").read_text(), "ll")
        assert check_wellformed(reg, LL) == []
        assert check_validity(reg) == Valid()
        # the promotion template on a unit body with empty context
        top = Occ(Top())
        for body in (build("one", [Occ(One())]), build("top", [top], principal=top)):
            t = build_promotion_template(body.proof)
            assert check_wellformed(t, LL) == []
            assert check_validity(t) == Valid()
        # merging two binary cuts into the three-premise multicut
        p = prepare(parse_proof(MCUT_SEED))
        merge = [r for r in enumerate_redexes(p) if r.shape == "merge_cut"]
        assert len(merge) == 1
        m = mcut_of(apply_step(p, merge[0]))
        b = Atom("b")
        assert m.premises == ((Top(), b), (NegAtom("b"), Top()), (Zero(), Top()))
        assert validate_mcut(m) is None
        # hanging on ~b: premises 0 and 2; hanging on the ι formula: nothing
        assert restrict_context(m, [(1, 0)]) == [0, 2]
        assert restrict_context(m, [(0, 0)]) == []
        info["detail"] = "regproof, template, 3-premise mcut"


# ------------------------------------------------------------------- 2

def test_criterion_2_axioms(criterion):
    with criterion(2, "signature axioms") as info:
        for name in ("ell", "mu-ell", "mu-ll-box:2", "ll"):
            inst = builtin_instance(name)
            assert check_axioms(inst).satisfied, name
            assert check_axioms(inst, closure=_brute_closure).satisfied, name
        bad = builtin_instance("counterexample")
        rep, rep_brute = check_axioms(bad), check_axioms(bad, closure=_brute_closure)
        assert not rep.satisfied
        assert rep.violations[0].axiom == "Ax^g_m" and rep.violations[0].witness == ("a", "b", 2)
        assert rep.violations == rep_brute.violations
        info["detail"] = f"counterexample: {rep.violations[0].axiom} {rep.violations[0].witness}"


# ------------------------------------------------------------------- 3

def test_criterion_3_closure(criterion):
    with criterion(3, "closure vs brute force") as info:
        n = bad = 0
        for sig, rule, expected in closure_pairs(6, 8):
            n += 1
            bad += closure_contains(sig, rule) != expected
        info["detail"] = f"{n} pairs, {bad} disagreements"
        assert n == 73728 and bad == 0


# ------------------------------------------------------------------- 4

def _regular_proofs(count, seed):
    rng = random.Random(seed)
    insts = [builtin_instance(n) for n in ("ll", "ell", "mu-ell")]
    out = []
    while len(out) < count:
        inst = rng.choice(insts)
        sigs = tuple(inst.sigs)
        f = random_formula(rng, rng.randint(2, 5), sigs=sigs)
        seq = [f] if rng.random() < 0.5 else [f, random_formula(rng, 3, sigs=sigs)]
        try:
            out.append(ProofGen(rng, inst).circular(seq, 8, tries=20))
        except GenFailed:
            continue
    return out


def test_criterion_4_validity_oracle(criterion):
    with criterion(4, "validity vs lasso oracle") as info:
        verdicts = {"Valid": 0, "Invalid": 0}
        decisive = 0
        for p in _regular_proofs(300, seed=4):
            assert p.nnodes <= 8
            g = proof_graph(p)
            v = check_validity(p)
            verdicts[type(v).__name__] += 1
            o = validity_oracle(p, 10)
            if not isinstance(o, Inconclusive):
                decisive += 1
                assert type(o) is type(v)
            if isinstance(v, Invalid):
                # the lasso is a real branch and has no valid thread
                cur = g.root
                for u, k in v.prefix + v.cycle:
                    assert u == cur
                    cur = g.edges[u][k][1]
                assert cur == v.cycle[0][0]
                assert not lasso_has_valid_thread(g, v.cycle)
                assert isinstance(validity_oracle(p, len(v.prefix) + len(v.cycle)), Invalid)
            else:
                assert not isinstance(o, Invalid)
        info["detail"] = f"{verdicts}, oracle decisive on {decisive}"
        assert verdicts["Valid"] and verdicts["Invalid"]


# ------------------------------------------------------------------- 5

def test_criterion_5_finite_cut_elimination(criterion):
    with criterion(5, "finite cut elimination") as info:
        rng = random.Random(5)
        done, longest = 0, 0
        for name in ("ell", "ll"):
            inst = builtin_instance(name)
            gen = ProofGen(rng, inst, cut_rate=0.3)
            k = 0
            while k < 100:
                try:
                    p = gen.finite_with_cuts(4, 5)
                except GenFailed:
                    continue
                q, trace, status = _normalize(p, inst)
                assert status == "CutFree", (name, status)
                assert q.seq == p.seq and is_cut_free(q)
                assert check_wellformed(q, inst) == []
                longest = max(longest, len(trace.steps))
                k += 1
            done += k
        info["detail"] = f"{done} proofs, longest {longest} steps"
        assert done == 200


# ------------------------------------------------------------------- 6

def test_criterion_6_random_steps(criterion):
    with criterion(6, "random steps") as info:
        rng = random.Random(6)
        insts = [builtin_instance(n) for n in ("ll", "ell", "mu-ell", "mu-ll-box:2")] + [full_instance()]
        calls = broken = bad = 0
        shapes = set()
        while calls < 10_000:
            if rng.random() < 0.05:
                inst, p = LL, template_against_consumer()
            else:
                inst = rng.choice(insts)
                try:
                    p = prepare(ProofGen(rng, inst, cut_rate=0.3).finite_with_cuts(4, 5))
                except GenFailed:
                    continue
            for _ in range(40):
                rs = enumerate_redexes(p)
                if not rs or calls >= 10_000:
                    break
                r = rng.choice(rs)
                shapes.add(r.shape)
                calls += 1
                try:
                    p = apply_step(p, r, inst)
                except InternalInvariantBroken:
                    broken += 1
                    break
                bad += bool(check_wellformed(p, inst))
        info["detail"] = f"{calls} calls, {broken} broken invariants, {bad} ill-formed, {len(shapes)} shapes"
        assert broken == 0 and bad == 0


# ------------------------------------------------------------------- 7

def test_criterion_7_productivity(criterion):
    with criterion(7, "productivity") as info:
        q, trace, status = _normalize(template_against_consumer(), None, 5000, depth_goal=5)
        info["detail"] = f"{status} after {len(trace.steps)} steps, depth {productive_depth(q)}"
        assert status == "DepthReached" and productive_depth(q) >= 5
        assert check_wellformed(q, None) == []


# ------------------------------------------------------------------- 8

def test_criterion_8_translation(criterion):
    with criterion(8, "translation") as info:
        rng = random.Random(8)
        insts = [builtin_instance(n) for n in ("ell", "mu-ell", "mu-ll-box:2")] + [full_instance()]
        translated = 0
        while translated < 500:
            inst = rng.choice(insts)
            gen = ProofGen(rng, inst, cut_rate=0.3)
            try:
                if rng.random() < 0.5:
                    p = gen.finite_with_cuts(4, 4)
                else:
                    p = gen.circular([random_formula(rng, rng.randint(2, 5), sigs=tuple(inst.sigs))], 8, tries=20)
            except GenFailed:
                continue
            assert check_wellformed(translate_proof(p), LL) == []
            translated += 1
        same = 0
        for p in _regular_proofs(100, seed=80):
            assert type(check_validity(translate_proof(p))) is type(check_validity(p))
            same += 1
        corpus = redex_corpus(random.Random(0), [full_instance()], per_shape=1)
        simulated = 0
        for shape in SHAPES:
            assert corpus[shape], f"no {shape} example"
            p, r, inst = corpus[shape][0]
            out = check_simulation(p, r, inst)
            assert isinstance(out, Simulated), (shape, out)
            simulated += 1
        info["detail"] = f"{translated} well formed, {same} validity matches, {simulated}/26 shapes simulated"
        assert simulated == len(SHAPES) == 26


# ------------------------------------------------------------------- 9

def test_criterion_9_properties(criterion):
    with criterion(9, "properties") as info:
        rng = random.Random(9)
        for _ in range(200):
            f = random_formula(rng, rng.randint(1, 8), sigs=("s", "t"))
            assert negate(negate(f)) == f
            assert parse_formula(show(f)) == f

        @settings(max_examples=200, database=None)
        @given(formulas())
        def round_trip(f):
            assert parse_formula(show(f)) == f

        round_trip()
        for p in _regular_proofs(100, seed=90):
            assert same_proof(parse_proof(print_proof(p)), p)

        @settings(max_examples=300, database=None)
        @given(mcuts(), st.randoms())
        def order_insensitive(m, r):
            order = list(range(len(m.premises)))
            r.shuffle(order)
            v1, v2 = validate_mcut(m), validate_mcut(permute_mcut(m, order))
            assert (v1 is None) == (v2 is None)
            assert v1 is None or v1.kind == v2.kind

        order_insensitive()
        # fairness of every trace this module produced, plus some fresh ones
        rng = random.Random(99)
        while len(TRACES) < 250:
            inst = rng.choice([LL, builtin_instance("ell")])
            try:
                p = ProofGen(rng, inst, cut_rate=0.3).finite_with_cuts(4, 5)
            except GenFailed:
                continue
            _normalize(p, inst)
        unfair = [t for t in TRACES if audit_fairness(t)]
        info["detail"] = f"{len(TRACES)} traces audited, {len(unfair)} unfair"
        assert not unfair
