import random
from importlib import resources
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from musuperll.proof import Mcut
from musuperll.syntax import (Atom, Bang, Bot, Mu, NegAtom, Nu, One, Par, Plus, Tensor, Top, Var,
                              Whynot, With, Zero)

settings.register_profile("kernel", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("kernel")

DATA = Path(str(resources.files("musuperll") / "data"))


@pytest.fixture
def data_dir() -> Path:
    return DATA


@st.composite
def formulas(draw, budget: int = 7, bound: int = 0, sigs=("s", "t")):
    """Closed formulas (``bound`` binders are in scope)."""
    leaves = [st.sampled_from("abc").map(Atom), st.sampled_from("abc").map(NegAtom),
              st.sampled_from([One(), Bot(), Zero(), Top()])]
    if bound:
        leaves.append(st.integers(0, bound - 1).map(Var))
    if budget <= 1 or draw(st.integers(0, budget)) == 0:
        return draw(st.one_of(leaves))
    kind = draw(st.sampled_from(["bin", "bin", "fix", "exp"]))
    if kind == "bin":
        op = draw(st.sampled_from([Par, Tensor, Plus, With]))
        left = draw(formulas(budget // 2, bound, sigs))
        return op(left, draw(formulas(budget // 2, bound, sigs)))
    if kind == "fix":
        op = draw(st.sampled_from([Mu, Nu]))
        return op(draw(formulas(budget - 1, bound + 1, sigs)))
    op = draw(st.sampled_from([Whynot, Bang]))
    return op(draw(st.sampled_from(sigs)), draw(formulas(budget - 1, bound, sigs)))


def rng(seed: int = 0) -> random.Random:
    return random.Random(seed)


@st.composite
def mcuts(draw):
    """Random trees of premises over atoms, with duals on every edge."""
    n = draw(st.integers(1, 5))
    prem: list[list] = [[] for _ in range(n)]
    pp = []
    for i in range(1, n):
        j = draw(st.integers(0, i - 1))
        f = draw(st.sampled_from([Atom(x) for x in "abc"]))
        pp.append(((j, len(prem[j])), (i, len(prem[i]))))
        prem[j].append(f)
        prem[i].append(NegAtom(f.name))
    iota = []
    for i in range(n):
        for _ in range(draw(st.integers(0, 2))):
            iota.append((i, len(prem[i])))
            prem[i].append(draw(st.sampled_from([Atom("a"), Atom("d"), NegAtom("d")])))
    if draw(st.booleans()) and n > 1:
        # corrupt: an extra pairing or a dropped ι entry
        if draw(st.booleans()):
            a, b = draw(st.sampled_from(pp))
            pp.append((a, (b[0], 0)))
        elif iota:
            iota.pop(draw(st.integers(0, len(iota) - 1)))
    sym = tuple(pp) + tuple((b, a) for a, b in pp)
    return Mcut(tuple(map(tuple, prem)), tuple(iota), sym)


def permute_mcut(m: Mcut, order) -> Mcut:
    where = {old: new for new, old in enumerate(order)}
    mv = lambda x: (where[x[0]], x[1])
    return Mcut(tuple(m.premises[i] for i in order), tuple(mv(x) for x in m.iota),
                tuple((mv(a), mv(b)) for a, b in m.pp))
