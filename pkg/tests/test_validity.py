import random

from musuperll.formats import parse_proof
from musuperll.generate import GenFailed, ProofGen, random_formula, template_against_consumer
from musuperll.proof import Occ, Proof, build, unroll_node
from musuperll.signatures import builtin_instance
from musuperll.syntax import One
from musuperll.translate import build_promotion_template
from musuperll.validity import (Inconclusive, Invalid, Valid, check_validity, emit_automaton,
                                lasso_has_valid_thread, proof_graph, validity_oracle)

LOOP = "(node a (seq mu X. X) (rule mu :principal 0 :premises (back:a)))"
NU_LOOP = "(node a (seq nu X. X) (rule nu :principal 0 :premises (back:a)))"


def _regproof(data_dir):
    return parse_proof((data_dir / "proofs" / "regproof.prf").read_text(), "ll")


def test_regproof_is_valid(data_dir):
    assert check_validity(_regproof(data_dir)) == Valid()
    assert not isinstance(validity_oracle(_regproof(data_dir), 2), Invalid)


def test_template_is_valid():
    t = build_promotion_template(build("one", [Occ(One())]).proof)
    assert check_validity(t) == Valid()
    assert check_validity(template_against_consumer()) == Valid()


def test_mu_loop_is_invalid():
    p = parse_proof(LOOP)
    v = check_validity(p)
    assert v == Invalid((), (("r", 0),))
    assert validity_oracle(p, 1) == Invalid((), (("r", 0),))
    assert check_validity(parse_proof(NU_LOOP)) == Valid()


def test_thread_must_be_principal_infinitely_often():
    # the ν formula is carried along but never unfolded on the cycle
    text = """
    (node a (seq nu X. X, mu Y. Y) (rule mu :principal 1 :premises (back:a)))
    """
    p = parse_proof(text)
    assert isinstance(check_validity(p), Invalid)
    assert isinstance(validity_oracle(p, 3), Invalid)


def test_two_back_edges():
    text = """
    (node r (seq nu X. X & X) (rule nu :principal 0 :premises (w)))
    (node w (seq (nu X. X & X) & nu X. X & X) (rule with :principal 0 :premises (back:r back:r)))
    """
    assert check_validity(parse_proof(text)) == Valid()
    assert isinstance(check_validity(parse_proof(text.replace("nu", "mu"))), Invalid)


def test_inner_mu_thread_fails_when_outer_nu_does_not_recur():
    # nu X. mu Y. (X + Y): looping on the inner μ only never revisits the ν
    text = """
    (node r (seq nu X. mu Y. X + Y) (rule nu :principal 0 :premises (m)))
    (node m (seq mu Y. (nu X. mu Y. X + Y) + Y) (rule mu :principal 0 :premises (p)))
    (node p (seq (nu X. mu Y. X + Y) + mu Y. (nu X. mu Y. X + Y) + Y) (rule plus2 :principal 0 :premises (back:m)))
    """
    p = parse_proof(text)
    v = check_validity(p)
    assert isinstance(v, Invalid) and [u for u, _ in v.cycle] == ["r.0", "r.0.0"]
    q = parse_proof(text.replace("plus2 :principal 0 :premises (back:m)", "plus1 :principal 0 :premises (back:r)"))
    assert check_validity(q) == Valid()


def _generated(count, seed=0):
    rng = random.Random(seed)
    out = []
    for name in ["ll", "ell"]:
        inst = builtin_instance(name)
        gen = ProofGen(rng, inst)
        sigs = tuple(inst.sigs)
        while len(out) < count // 2 * (1 + (name == "ell")):
            f = random_formula(rng, rng.randint(2, 5), sigs=sigs)
            seq = [f] if rng.random() < 0.5 else [f, random_formula(rng, 3, sigs=sigs)]
            try:
                out.append(gen.circular(seq, 8, tries=20))
            except GenFailed:
                continue
    return out


def _is_branch(p, v: Invalid):
    g = proof_graph(p)
    cur = g.root
    for u, k in v.prefix + v.cycle:
        assert u == cur
        cur = g.edges[u][k][1]
    assert cur == (v.cycle[0][0])


def test_agrees_with_oracle_on_generated_proofs():
    seen = {"Valid": 0, "Invalid": 0}
    for p in _generated(150, seed=5):
        v = check_validity(p)
        o = validity_oracle(p, 10)
        seen[type(v).__name__] += 1
        if not isinstance(o, Inconclusive):
            assert type(o) is type(v)
        if isinstance(v, Invalid):
            _is_branch(p, v)
            assert not lasso_has_valid_thread(proof_graph(p), v.cycle)
        assert check_validity(p) == v
    assert seen["Valid"] and seen["Invalid"]


def test_unrolling_preserves_the_verdict():
    for p in _generated(60, seed=6):
        v = check_validity(p)
        if isinstance(p, Proof) and p.label is not None:
            assert type(check_validity(unroll_node(p))) is type(v)


def test_emit_automaton(data_dir):
    out = emit_automaton(_regproof(data_dir))
    assert out.startswith("HOA: v1")
    assert "State: r.0 bang_g" in out and "--END--" in out
