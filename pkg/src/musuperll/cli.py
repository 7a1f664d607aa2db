"""Command-line front end.

Exit codes: 0 when every verdict asked for is positive, 1 on a negative
verdict, 2 when an input file does not parse, 3 when a closure outgrows
the cap set by ``MULL_MAX_CLOSURE``.
"""

from __future__ import annotations

import random
import sys
from pathlib import Path

import click

from .formats import ProofSyntaxError, parse_proof, print_proof
from .proof import Proof, check_wellformed
from .reduction import audit_fairness, fair_normalize
from .signatures import (InstanceSpec, InstanceSyntaxError, UnknownInstance, builtin_instance,
                         c, check_axioms, closure_contains, closure_oracle, mpx, parse_instance)
from .syntax import ClosureOverflow, FormulaSyntaxError, show
from .translate import LL_SIG, encode_exponential, translate_formula, translate_proof
from .validity import Inconclusive, Invalid, check_validity, emit_automaton, validity_oracle

OK, NEGATIVE, PARSE_ERROR, TOO_LARGE = 0, 1, 2, 3


class ParseFailure(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise ParseFailure(f"{path}: {e.strerror}") from None


def load_instance(arg: str) -> InstanceSpec:
    """A path to an ``.inst`` file, or the name of a builtin instance."""
    if not Path(arg).exists():
        try:
            return builtin_instance(arg)
        except UnknownInstance:
            raise ParseFailure(f"{arg}: no such file or builtin instance") from None
    try:
        return parse_instance(_read(arg), Path(arg).stem)
    except InstanceSyntaxError as e:
        raise ParseFailure(f"{arg}: {e}") from None


def load_proof(path: str, inst: InstanceSpec | None = None) -> Proof:
    default = next(iter(inst.sigs)) if inst is not None and len(inst.sigs) == 1 else None
    try:
        return parse_proof(_read(path), default)
    except (ProofSyntaxError, FormulaSyntaxError) as e:
        raise ParseFailure(f"{path}: {e}") from None


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ParseFailure as e:
            click.echo(f"parse error: {e}", err=True)
            ctx.exit(PARSE_ERROR)
        except ClosureOverflow as e:
            click.echo(f"limit: {e}", err=True)
            ctx.exit(TOO_LARGE)


@click.group(cls=_Group)
@click.option("--seed", default=0, show_default=True, help="Seed for every random choice.")
@click.pass_context
def main(ctx, seed):
    """Proof kernel for circular linear logic with super exponentials."""
    ctx.obj = {"seed": seed}


@main.command()
@click.argument("instance")
@click.argument("proof")
def check(instance, proof):
    """Check that PROOF is well formed under INSTANCE."""
    inst = load_instance(instance)
    p = load_proof(proof, inst)
    errors = check_wellformed(p, inst)
    click.echo(f"check {proof} under {inst.name or instance}")
    for e in errors:
        click.echo(str(e))
    click.echo(f"wellformed: {'no' if errors else 'yes'}")
    sys.exit(NEGATIVE if errors else OK)


@main.command()
@click.argument("proof")
@click.option("--instance", default=None, help="Instance giving bare ?/! their signature.")
@click.option("--emit-automaton", "emit", is_flag=True, help="Also print the thread automaton.")
def validate(proof, instance, emit):
    """Decide whether every infinite branch of PROOF carries a valid thread."""
    inst = load_instance(instance) if instance else None
    p = load_proof(proof, inst)
    if emit:
        click.echo(emit_automaton(p), nl=False)
    verdict = check_validity(p)
    click.echo(f"validity: {verdict}")
    sys.exit(NEGATIVE if isinstance(verdict, Invalid) else OK)


@main.command()
@click.argument("instance")
@click.option("--expansion", is_flag=True, help="Also check the expansion axiom.")
def axioms(instance, expansion):
    """Check the cut-elimination axioms of INSTANCE."""
    inst = load_instance(instance)
    report = check_axioms(inst, expansion=expansion)
    for v in report.violations:
        click.echo(str(v))
    click.echo(f"axioms: {'satisfied' if report.satisfied else 'violated'}")
    sys.exit(OK if report.satisfied else NEGATIVE)


@main.command()
@click.argument("instance")
@click.argument("proof")
@click.option("--max-steps", default=10_000, show_default=True)
@click.option("--depth-goal", type=int, default=None, help="Stop once every cut is this deep.")
@click.option("--trace", "trace_file", type=click.Path(dir_okay=False), default=None,
              help="Write one line per step to this file.")
@click.option("--output", type=click.Path(dir_okay=False), default=None, help="Write the reduct here.")
def reduce(instance, proof, max_steps, depth_goal, trace_file, output):
    """Reduce the cuts of PROOF with the fair scheduler."""
    inst = load_instance(instance)
    p = load_proof(proof, inst)
    errors = check_wellformed(p, inst)
    if errors:
        for e in errors:
            click.echo(str(e))
        click.echo("wellformed: no")
        sys.exit(NEGATIVE)
    q, trace, status = fair_normalize(p, inst, max_steps, depth_goal)
    if trace_file:
        Path(trace_file).write_text(trace.text())
    if output:
        Path(output).write_text(print_proof(q))
    click.echo(f"status: {status}")
    click.echo(f"steps: {len(trace.steps)}")
    problems = audit_fairness(trace)
    click.echo(f"fairness: {'ok' if not problems else problems[0]}")
    good = status == "CutFree" or status == "DepthReached" and depth_goal is not None
    sys.exit(OK if good and not problems else NEGATIVE)


@main.command()
@click.argument("proof")
@click.option("--to", "target", type=click.Choice(["ll", "mall"]), default="ll", show_default=True)
@click.option("--instance", default=None, help="Instance giving bare ?/! their signature.")
def translate(proof, target, instance):
    """Translate PROOF into μLL (a proof) or μMALL (its encoded formulas)."""
    inst = load_instance(instance) if instance else None
    p = load_proof(proof, inst)
    if target == "ll":
        click.echo(print_proof(translate_proof(p)), nl=False)
    else:
        for f in p.seq:
            click.echo(show(encode_exponential(translate_formula(f)), LL_SIG))
    sys.exit(OK)


@main.group()
def oracle():
    """Cross-checks against the brute-force oracles."""


@oracle.command("validity")
@click.argument("proof")
@click.option("--bound", default=12, show_default=True, help="Longest lasso tried.")
def oracle_validity(proof, bound):
    """Compare check_validity with lasso enumeration on PROOF."""
    p = load_proof(proof)
    fast, slow = check_validity(p), validity_oracle(p, bound)
    click.echo(f"check_validity: {fast}")
    click.echo(f"oracle: {slow}")
    agree = isinstance(slow, Inconclusive) or type(fast) is type(slow)
    click.echo(f"agree: {'yes' if agree else 'no'}")
    sys.exit(OK if agree else NEGATIVE)


@oracle.command("closure")
@click.argument("instance")
@click.option("--max-index", default=8, show_default=True)
def oracle_closure(instance, max_index):
    """Compare closure membership with naive saturation for every signature."""
    inst = load_instance(instance)
    bad = []
    for name, sig in inst.sigs.items():
        for i in range(max_index + 1):
            for rule in (mpx(i), c(i)):
                if closure_contains(sig, rule) != closure_oracle(sig, rule):
                    bad.append(f"{name} {rule}")
    for b in bad:
        click.echo(f"disagree: {b}")
    click.echo(f"agree: {'no' if bad else 'yes'}")
    sys.exit(NEGATIVE if bad else OK)


@oracle.command("random")
@click.option("--count", default=100, show_default=True)
@click.option("--instance", default="ll", show_default=True)
@click.pass_context
def oracle_random(ctx, count, instance):
    """Cross-check validity on random circular proofs (uses --seed)."""
    from .generate import GenFailed, ProofGen, random_formula

    inst = load_instance(instance)
    rng = random.Random(ctx.obj["seed"])
    gen = ProofGen(rng, inst)
    done = disagree = 0
    while done < count:
        f = random_formula(rng, rng.randint(2, 5), sigs=tuple(inst.sigs))
        try:
            p = gen.circular([f], 8, tries=20)
        except GenFailed:
            continue
        done += 1
        fast, slow = check_validity(p), validity_oracle(p, 10)
        if not isinstance(slow, Inconclusive) and type(fast) is not type(slow):
            disagree += 1
            click.echo(f"disagree on proof {done}:\n{print_proof(p)}")
    click.echo(f"checked: {done} disagreements: {disagree}")
    sys.exit(NEGATIVE if disagree else OK)


if __name__ == "__main__":
    main()
