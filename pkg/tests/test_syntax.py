import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from musuperll.syntax import (Atom, Bang, Bot, ClosureOverflow, FormulaSyntaxError, Mu, NegAtom,
                              NotAFixedPoint, Nu, One, Par, Plus, Tensor, Var, Whynot, With, build_closure,
                              children, is_closed, negate, parse_formula, parse_formulas, show, unfold)

from conftest import formulas

a, b = Atom("a"), Atom("b")


def wn_hat(f):
    return Mu(Plus(f, Plus(Bot(), Par(Var(0), Var(0)))))


def test_negate_connectives():
    assert negate(Tensor(a, b)) == Par(NegAtom("a"), NegAtom("b"))
    assert negate(Bang("s", a)) == Whynot("s", NegAtom("a"))
    assert negate(Mu(Plus(a, Var(0)))) == Nu(With(NegAtom("a"), Var(0)))
    assert negate(One()) == Bot()


@settings(max_examples=200)
@given(formulas())
def test_negation_is_an_involution(f):
    assert negate(negate(f)) == f
    assert negate(f) != f


def test_unfold_examples():
    nu = Nu(Bang("s", Var(0)))
    assert unfold(nu) == Bang("s", nu)
    assert unfold(Mu(Var(0))) == Mu(Var(0))
    w = wn_hat(a)
    assert unfold(w) == Plus(a, Plus(Bot(), Par(w, w)))


def test_unfold_rejects_other_connectives():
    with pytest.raises(NotAFixedPoint):
        unfold(Tensor(a, b))


def test_unfold_under_nested_binders():
    # nu X. mu Y. (X * Y): the inner binder body refers to both
    f = Nu(Mu(Tensor(Var(1), Var(0))))
    g = unfold(f)
    assert g == Mu(Tensor(f, Var(0)))
    assert is_closed(g)


def _brute_closure(roots):
    """Saturation by the two closure rules, written independently."""
    out = set(roots)
    frontier = list(roots)
    while frontier:
        f = frontier.pop()
        if isinstance(f, (Mu, Nu)):
            nxt = [unfold(f)]
        else:
            nxt = [g for g in children(f)]
        for g in nxt:
            if g not in out:
                out.add(g)
                frontier.append(g)
    return out


def _occurs(g, f):
    return f == g or any(_occurs(g, h) for h in children(f))


def test_closure_examples():
    assert set(build_closure([Mu(Var(0))]).formulas) == {Mu(Var(0))}
    nu = Nu(Bang("s", Var(0)))
    t = build_closure([nu])
    assert set(t.formulas) == {nu, Bang("s", nu)}
    assert t.priority[nu] < t.priority[Bang("s", nu)]


def test_closure_of_encoded_whynot_counts_bot():
    w = wn_hat(a)
    t = build_closure([w])
    expected = {w, Plus(a, Plus(Bot(), Par(w, w))), Plus(Bot(), Par(w, w)), Par(w, w), a, Bot()}
    assert set(t.formulas) == expected == _brute_closure([w])
    assert len(t) == 6


@settings(max_examples=100)
@given(formulas(budget=8))
def test_closure_matches_brute_force_and_orders_subterms(f):
    t = build_closure([f])
    assert set(t.formulas) == _brute_closure([f])
    assert set(build_closure(t.formulas).formulas) == set(t.formulas)
    assert sorted(t.priority.values()) == list(range(len(t)))
    for g in t.formulas:
        if isinstance(g, (Mu, Nu)):
            assert unfold(g) in t
            u = unfold(g)
            if u != g and _occurs(g, u):
                assert t.priority[g] < t.priority[u]
        else:
            for h in children(g):
                assert t.priority[h] < t.priority[g]


def test_closure_cap(monkeypatch):
    monkeypatch.setenv("MULL_MAX_CLOSURE", "3")
    with pytest.raises(ClosureOverflow):
        build_closure([wn_hat(a)])


@settings(max_examples=200)
@given(formulas())
def test_print_parse_round_trip(f):
    assert parse_formula(show(f)) == f


def test_parse_examples():
    assert parse_formula("a * b | ~a") == Par(Tensor(a, b), NegAtom("a"))
    assert parse_formula("nu X. ![s] X") == Nu(Bang("s", Var(0)))
    assert parse_formula("?a", "e") == Whynot("e", a)
    assert parse_formula("mu X. a + bot + (X | X)") == wn_hat(a)
    assert parse_formulas("a, b") == [a, b]
    assert parse_formulas("") == []


@pytest.mark.parametrize("text", ["a | b + c", "a * b & c", "(a", "a b", "~(a)", ""])
def test_parse_errors(text):
    with pytest.raises(FormulaSyntaxError):
        parse_formula(text)


@given(formulas(), st.sampled_from(["s", "t"]))
def test_negation_commutes_with_exponentials(f, s):
    assert negate(Whynot(s, f)) == Bang(s, negate(f))
