import random

from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import mcuts, permute_mcut

from musuperll.formats import parse_proof
from musuperll.generate import ProofGen, GenFailed, full_instance
from musuperll.proof import (AllPromotions, Mcut, NotAllPromotions, Occ, Proof, build,
                             check_wellformed, detect_bang_context, hanging_context, mcut_of,
                             restrict_context, unroll_node, validate_mcut, walk)
from musuperll.signatures import builtin_instance
from musuperll.syntax import Atom, NegAtom, One, parse_formula

A, B, C, D = (Atom(x) for x in "abcd")
nA, nB, nC, nD = (NegAtom(x) for x in "abcd")

# the three-premise multicut: ⊢A,B  ⊢B⊥,C  ⊢C⊥,D with ι on A and D
EX_MCUT = Mcut(((A, B), (nB, C), (nC, D)), ((0, 0), (2, 1)),
               (((0, 1), (1, 0)), ((1, 0), (0, 1)), ((1, 1), (2, 0)), ((2, 0), (1, 1))))


def test_regproof_is_wellformed(data_dir):
    text = (data_dir / "proofs" / "regproof.prf").read_text()
    assert check_wellformed(parse_proof(text, "ll"), builtin_instance("ll")) == []


def test_regproof_under_ell_fails_the_promotion_side_condition(data_dir):
    text = (data_dir / "proofs" / "regproof.prf").read_text()
    errs = check_wellformed(parse_proof(text, "e"), builtin_instance("ell"))
    assert [e.kind for e in errs] == ["SideConditionFailed"]
    assert errs[0].name == "n1"


def test_broken_back_edge():
    text = """
    (node n0 (seq nu X. !X, ?0) (rule nu :principal 0 :premises (n1)))
    (node n1 (seq !(nu X. !X), ?0) (rule bang_g :principal 0 :premises (n2)))
    (node n2 (seq nu X. !X, ?0) (back n1))
    """
    errs = check_wellformed(parse_proof(text, "ll"), builtin_instance("ll"))
    assert [(e.kind, e.name) for e in errs] == [("BackEdgeMismatch", "n2")]


def test_scheme_mismatch():
    text = """
    (node n0 (seq a * b, ~a, ~b) (rule tensor :principal 0 :premises (n1 n2)
        :anc ((0 0 1 0) (0 1) (1 1))))
    (node n1 (seq a, ~a) (rule ax))
    (node n2 (seq a, ~b) (rule ax))
    """
    errs = check_wellformed(parse_proof(text), None)
    assert errs and all(e.kind == "SchemeMismatch" for e in errs)


def test_unknown_signature_is_a_side_condition_failure():
    text = "(node n0 (seq ?[zz] 1, bot) (rule mpx 0 :principal 0 :premises (n1)))\n" \
           "(node n1 (seq bot) (rule bot :principal 0 :premises (n2)))\n(node n2 (seq 1) (rule one))"
    text = text.replace("mpx 0", "(mpx 0)")
    errs = check_wellformed(parse_proof(text), builtin_instance("ll"))
    assert errs[0].kind == "SideConditionFailed"


def test_mcut_example_is_valid():
    assert validate_mcut(EX_MCUT) is None


def test_mcut_failures():
    extra = EX_MCUT.pp + (((0, 0), (2, 1)), ((2, 1), (0, 0)))
    assert validate_mcut(Mcut(EX_MCUT.premises, EX_MCUT.iota, extra)).kind == "NotDual"
    cyc = Mcut(((A, nA), (A, nA)), (), (((0, 0), (1, 1)), ((1, 1), (0, 0)), ((0, 1), (1, 0)), ((1, 0), (0, 1))))
    assert validate_mcut(cyc).kind == "NotTree"
    assert validate_mcut(Mcut(EX_MCUT.premises, ((0, 0), (0, 0)), EX_MCUT.pp)).kind == "NotInjective"
    assert validate_mcut(Mcut(EX_MCUT.premises, ((0, 0),), EX_MCUT.pp)).kind == "NotTotalOffIota"
    assert validate_mcut(Mcut(EX_MCUT.premises, EX_MCUT.iota, EX_MCUT.pp[:3] + (((2, 0), (0, 1)),))).kind == "NotSymmetric"
    twice = Mcut(((A, nA), (A, nA), (A,)), ((0, 1),),
                 (((0, 0), (1, 1)), ((1, 1), (0, 0)), ((1, 0), (2, 0)), ((2, 0), (1, 0)),
                  ((0, 0), (2, 0)), ((2, 0), (0, 0))))
    assert validate_mcut(twice).kind == "NotDual"
    dual_twice = Mcut(((A, nA), (nA,), (nA,)), ((0, 1),),
                      (((0, 0), (1, 0)), ((1, 0), (0, 0)), ((0, 0), (2, 0)), ((2, 0), (0, 0))))
    assert validate_mcut(dual_twice).kind == "MultiplyPaired"
    dual_iota = Mcut(((A, nA), (nA,)), ((0, 0), (0, 1)), (((0, 0), (1, 0)), ((1, 0), (0, 0))))
    assert validate_mcut(dual_iota).kind == "MultiplyPaired"


def test_restriction_example():
    assert restrict_context(EX_MCUT, [(1, 0)]) == [0, 2]
    assert restrict_context(EX_MCUT, [(0, 0)]) == []
    assert restrict_context(EX_MCUT, []) == []
    assert restrict_context(EX_MCUT, [(1, 0), (0, 0)]) == sorted(
        set(restrict_context(EX_MCUT, [(1, 0)])) | set(restrict_context(EX_MCUT, [(0, 0)])))


@settings(max_examples=300)
@given(mcuts(), st.randoms())
def test_validate_mcut_is_order_insensitive(m, r):
    order = list(range(len(m.premises)))
    r.shuffle(order)
    v1, v2 = validate_mcut(m), validate_mcut(permute_mcut(m, order))
    assert (v1 is None) == (v2 is None)
    if v1 is not None:
        assert v1.kind == v2.kind


@settings(max_examples=200)
@given(mcuts())
def test_hanging_contexts_split_the_tree(m):
    if validate_mcut(m) is not None:
        return
    seen = set()
    for a, b in m.pp:
        if (b, a) in seen:
            continue
        seen.add((a, b))
        left, right = set(hanging_context(m, a)), set(hanging_context(m, b))
        assert not left & right
        assert left | right == set(range(len(m.premises)))
        assert b[0] in left and a[0] in right


def test_detect_bang_context():
    one = build("one", [Occ(One())]).proof
    x = Occ(parse_formula("![a1] 1"))
    bu = build("bang_f", [x], [build("one", [o := Occ(One())])], principal=x, active=[o]).proof
    assert detect_bang_context([one, bu, bu], 0) == AllPromotions((None, "f", "f"), (False, False, False))
    assert detect_bang_context([bu, one], 0) == NotAllPromotions(1)


def _replace(p, addr, new):
    if not addr:
        return new
    prems = list(p.premises)
    prems[addr[0]] = _replace(prems[addr[0]], addr[1:], new)
    return Proof(p.seq, p.rule, tuple(prems), p.label, p.name)


def test_unrolling_preserves_wellformedness():
    rng = random.Random(3)
    for name in ["ll", "ell"]:
        inst = builtin_instance(name)
        gen = ProofGen(rng, inst)
        done = 0
        while done < 40:
            try:
                p = gen.circular([parse_formula("nu X. (a + X) * (~a + X)")], 8, tries=5)
            except GenFailed:
                try:
                    p = gen.circular([parse_formula("nu X. ?X"
                                                    if name == "ell" else "nu X. ?[ll] X")], 8, tries=5)
                except GenFailed:
                    continue
            done += 1
            for addr, node, _ in walk(p):
                if isinstance(node, Proof) and node.label is not None:
                    assert check_wellformed(_replace(p, addr, unroll_node(node)), inst) == []


def test_wellformed_on_generated_proofs():
    rng = random.Random(4)
    inst = full_instance()
    gen = ProofGen(rng, inst, cut_rate=0.3)
    for _ in range(50):
        p = gen.finite_with_cuts(3, 4)
        assert check_wellformed(p, inst) == []
        for addr, node, _ in walk(p):
            if isinstance(node, Proof) and node.rule.kind == "mcut":
                assert validate_mcut(mcut_of(node)) is None
