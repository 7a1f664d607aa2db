import random
import re

import pytest
from click.testing import CliRunner

from musuperll.cli import NEGATIVE, OK, PARSE_ERROR, TOO_LARGE, main
from musuperll.formats import parse_proof, print_proof
from musuperll.generate import ProofGen
from musuperll.proof import check_wellformed
from musuperll.reduction import is_cut_free
from musuperll.signatures import builtin_instance
from musuperll.syntax import parse_formula

CUT = """
(node n0 (seq ~a, a) (rule cut :premises (n1 n2)))
(node n1 (seq a, ~a) (rule ax))
(node n2 (seq a, ~a) (rule ax))
"""
BROKEN = """
(node n0 (seq nu X. !X, ?0) (rule nu :principal 0 :premises (n1)))
(node n1 (seq !(nu X. !X), ?0) (rule bang_g :principal 0 :premises (n2)))
(node n2 (seq nu X. !X, ?0) (back n1))
"""
LOOP = "(node a (seq mu X. X) (rule mu :principal 0 :premises (back:a)))\n"
TRACE_LINE = re.compile(r"^step \d+ \w+ at \S+ depth \d+$")


@pytest.fixture
def run(tmp_path):
    runner = CliRunner()

    def go(*args, env=None):
        return runner.invoke(main, [str(a) for a in args], env=env)

    return go


@pytest.fixture
def files(tmp_path, data_dir):
    def put(name, text):
        f = tmp_path / name
        f.write_text(text)
        return f

    return {"reg": data_dir / "proofs" / "regproof.prf", "tcut": data_dir / "proofs" / "template_cut.prf",
            "ell": data_dir / "instances" / "ell.inst", "box": data_dir / "instances" / "mu-ll-box.inst",
            "cut": put("cut.prf", CUT), "broken": put("broken.prf", BROKEN), "loop": put("loop.prf", LOOP),
            "empty": put("empty.prf", ""), "put": put}


def test_check(run, files, data_dir):
    r = run("check", data_dir / "instances" / "ll.inst", files["reg"])
    assert r.exit_code == OK and "wellformed: yes" in r.output
    r = run("check", "ell", files["reg"])
    assert r.exit_code == NEGATIVE and "SideConditionFailed at n1" in r.output
    r = run("check", "ll", files["broken"])
    assert r.exit_code == NEGATIVE and "BackEdgeMismatch at n2" in r.output


def test_parse_errors_exit_2(run, files):
    r = run("check", "ll", files["empty"])
    assert r.exit_code == PARSE_ERROR and "line 1" in r.output
    assert run("check", "ll", "/no/such/file.prf").exit_code == PARSE_ERROR
    assert run("check", "no-such-instance", files["reg"]).exit_code == PARSE_ERROR
    bad = files["put"]("bad.inst", "sig s mpx={1\n")
    assert run("axioms", bad).exit_code == PARSE_ERROR
    bad = files["put"]("bad.prf", "(node n0 (seq a &) (rule top :principal 0))\n")
    r = run("validate", bad)
    assert r.exit_code == PARSE_ERROR and "line 1" in r.output


def test_validate(run, files):
    r = run("validate", files["reg"])
    assert r.exit_code == OK and "validity: Valid" in r.output
    r = run("validate", files["loop"])
    assert r.exit_code == NEGATIVE and "cycle [r/0]" in r.output
    assert run("validate", files["cut"]).exit_code == OK
    r = run("validate", "--emit-automaton", files["reg"])
    assert r.exit_code == OK and r.output.count("\n") > 2


def test_axioms(run, files):
    assert run("axioms", files["ell"]).exit_code == OK
    assert run("axioms", files["box"]).exit_code == OK
    assert run("axioms", "--expansion", "mu-ll-box:2").exit_code == OK
    r = run("axioms", "counterexample")
    assert r.exit_code == NEGATIVE
    assert "Ax^g_m violated by ('a', 'b', 2)" in r.output


def test_reduce_finite(run, files, tmp_path):
    out = tmp_path / "out.prf"
    r = run("reduce", "ll", files["cut"], "--output", out)
    assert r.exit_code == OK and "status: CutFree" in r.output and "fairness: ok" in r.output
    q = parse_proof(out.read_text())
    assert is_cut_free(q) and q.seq == parse_proof(CUT).seq
    assert check_wellformed(q, builtin_instance("ll")) == []
    r = run("reduce", "ll", files["reg"])
    assert r.exit_code == OK and "steps: 0" in r.output


def test_reduce_trace_and_depth_goal(run, files, tmp_path):
    trace = tmp_path / "trace.txt"
    r = run("reduce", "ll", files["tcut"], "--depth-goal", 3, "--trace", trace)
    assert r.exit_code == OK and "status: DepthReached" in r.output
    lines = trace.read_text().splitlines()
    assert lines and all(TRACE_LINE.match(x) for x in lines)
    n = int(re.search(r"steps: (\d+)", r.output).group(1))
    assert len(lines) == n
    # a budget too small for the goal is a negative verdict
    r = run("reduce", "ll", files["tcut"], "--depth-goal", 5, "--max-steps", 3)
    assert r.exit_code == NEGATIVE and "status: Budget" in r.output


def test_reports_are_reproducible(run, files):
    a = run("reduce", "ll", files["tcut"], "--depth-goal", 3)
    b = run("reduce", "ll", files["tcut"], "--depth-goal", 3)
    assert a.output == b.output
    assert run("--seed", 4, "oracle", "random", "--count", 5).output == \
        run("--seed", 4, "oracle", "random", "--count", 5).output


def test_translate(run, files):
    r = run("translate", files["reg"])
    assert r.exit_code == OK
    q = parse_proof(r.output)
    assert check_wellformed(q, builtin_instance("ll")) == []
    assert q.seq == parse_proof(files["reg"].read_text(), "ll").seq
    r = run("translate", "--to", "mall", "--instance", "ll", files["reg"])
    assert r.exit_code == OK
    assert r.output.splitlines() == ["nu X. nu Y. X & 1 & (Y * Y)", "mu X. 0 + bot + (X | X)"]
    assert parse_formula(r.output.splitlines()[1]) == parse_formula("mu X. 0 + bot + (X | X)")


def test_translated_ell_proof_checks_under_ll(run, files, tmp_path):
    p = ProofGen(random.Random(2), builtin_instance("ell")).finite_with_cuts(4, 3)
    src = files["put"]("gen.prf", print_proof(p))
    r = run("translate", src)
    assert r.exit_code == OK
    out = tmp_path / "gen_ll.prf"
    out.write_text(r.output)
    assert run("check", "ll", out).exit_code == OK


def test_closure_cap_from_environment(run, files):
    r = run("validate", files["reg"], env={"MULL_MAX_CLOSURE": "2"})
    assert r.exit_code == TOO_LARGE and "closure exceeds 2" in r.output
    assert run("validate", files["reg"], env={"MULL_MAX_CLOSURE": "100"}).exit_code == OK


def test_oracle_commands(run, files):
    r = run("oracle", "validity", files["reg"])
    assert r.exit_code == OK and "agree: yes" in r.output
    r = run("oracle", "validity", files["loop"], "--bound", 3)
    assert r.exit_code == OK and "oracle: Invalid" in r.output
    assert run("oracle", "closure", "mu-ll-box:3", "--max-index", 6).exit_code == OK
    r = run("--seed", 1, "oracle", "random", "--count", 10, "--instance", "ell")
    assert r.exit_code == OK and "disagreements: 0" in r.output
