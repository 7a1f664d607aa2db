"""Text format for proofs.

One form per node::

    (node n0 (seq nu X. !X, ?0) (rule nu :principal 0 :premises (n1)))
    (node n1 (seq !(nu X. !X), ?0) (rule bang_g :principal 0 :premises (back:n0) :side (_ _)))

Grammar (whitespace-insensitive, ``;`` starts a comment)::

    file     := node+
    node     := "(node" ID "(seq" formulas ")" body ")"
    body     := "(rule" kind opt* ")" | "(back" ID [":perm (" INT* ")"] ")"
    kind     := NAME | "(" ("mpx" | "contr") INT ")"
    opt      := ":principal" INT
              | ":premises (" (ID | "back:" ID)* ")"
              | ":side (" SIG* ")"                      promotions: σ τ1 … ; mpx/contr: σ
              | ":side (" ("((" INT INT ") (" INT INT "))")* ")"   mcut pairing
              | ":anc (" ("(" (INT INT)* ")")* ")"      per conclusion position: premise, position
    formulas := formula ("," formula)*

``back:ID`` in a premise list is a back-edge whose sequent is the target's;
the ``(back ...)`` node form states the site sequent explicitly.  Without
``:anc`` the ancestry is inferred greedily (principal first, then each
context formula takes the first free equal premise occurrence); the printer
writes ``:anc`` only when inference would give something else.  The first
node is the root.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .proof import Back, Proof, Rule, walk, PROMOTIONS
from .syntax import FormulaSyntaxError, negate, parse_formulas, show, unfold

__all__ = ["ProofSyntaxError", "parse_proof", "print_proof", "infer_anc"]


class ProofSyntaxError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{msg} at line {line}, column {col}")
        self.line, self.col = line, col


# ------------------------------------------------------------- reader

@dataclass
class _Raw:
    text: str
    pos: int


_ATOM = re.compile(r"[^\s()]+")


class _Reader:
    def __init__(self, text: str):
        self.text = text
        self.i = 0

    def where(self, pos=None):
        pos = self.i if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        return line, pos - (self.text.rfind("\n", 0, pos) + 1) + 1

    def fail(self, msg, pos=None):
        raise ProofSyntaxError(msg, *self.where(pos))

    def skip(self):
        t = self.text
        while self.i < len(t):
            if t[self.i].isspace():
                self.i += 1
            elif t[self.i] == ";":
                while self.i < len(t) and t[self.i] != "\n":
                    self.i += 1
            else:
                break

    def read(self):
        """An s-expression; ``(seq ...)`` bodies are kept as raw text."""
        self.skip()
        if self.i >= len(self.text):
            self.fail("unexpected end of input")
        c = self.text[self.i]
        if c == ")":
            self.fail("unexpected ')'")
        if c != "(":
            m = _ATOM.match(self.text, self.i)
            self.i = m.end()
            return (m.group(), m.start())
        start = self.i
        self.i += 1
        self.skip()
        if self.text.startswith("seq", self.i) and _ATOM.match(self.text, self.i).group() == "seq":
            self.i += 3
            depth, j = 0, self.i
            while j < len(self.text):
                ch = self.text[j]
                if ch == "(":
                    depth += 1
                elif ch == ")":
                    if depth == 0:
                        break
                    depth -= 1
                j += 1
            else:
                self.fail("unclosed (seq", start)
            raw = _Raw(self.text[self.i:j], self.i)
            self.i = j + 1
            return [("seq", start), raw]
        items = []
        while True:
            self.skip()
            if self.i >= len(self.text):
                self.fail("unclosed '('", start)
            if self.text[self.i] == ")":
                self.i += 1
                return items
            items.append(self.read())

    def forms(self):
        out = []
        while True:
            self.skip()
            if self.i >= len(self.text):
                return out
            out.append((self.i, self.read()))


# ------------------------------------------------------- ancestry inference

def infer_anc(seq, kind, principal, prems, index=None, pp=()) -> tuple | None:
    """Greedy ancestry from sequents alone; None when it gets stuck."""
    if kind == "cut" and not pp and len(prems) == 2:
        for q0, f in enumerate(prems[0]):
            for q1, g in enumerate(prems[1]):
                if g == negate(f):
                    anc = infer_anc(seq, kind, principal, prems, index, (((0, q0), (1, q1)),))
                    if anc is not None:
                        return anc
        return None
    used = {x for pr in pp for x in pr}
    anc: list = [None] * len(seq)

    def take(want, only=None):
        for k, ps in enumerate(prems):
            if only is not None and k != only:
                continue
            for q, g in enumerate(ps):
                if (k, q) not in used and g == want:
                    used.add((k, q))
                    return (k, q)
        return None

    p = principal
    if kind in ("ax", "one", "top"):
        return tuple(() for _ in seq)
    if p is not None and kind not in ("cut", "mcut"):
        f = seq[p]
        try:
            match kind:
                case "tensor" | "with":
                    want = [(f.left, 0), (f.right, 1)]
                case "par":
                    want = [(f.left, 0), (f.right, 0)]
                case "plus1":
                    want = [(f.left, 0)]
                case "plus2":
                    want = [(f.right, 0)]
                case "mu" | "nu":
                    want = [(unfold(f), 0)]
                case "bot":
                    want = []
                case "mpx":
                    want = [(f.body, 0)] * (index or 0)
                case "contr":
                    want = [(f, 0)] * (index or 0)
                case _:
                    want = [(f.body, 0)]
        except AttributeError:
            return None
        ent = []
        for g, k in want:
            x = take(g, k)
            if x is None:
                return None
            ent.append(x)
        anc[p] = tuple(ent)
    for j, f in enumerate(seq):
        if j == p and kind not in ("cut", "mcut"):
            continue
        if kind == "with":
            a, b = take(f, 0), take(f, 1)
            if a is None or b is None:
                return None
            anc[j] = (a, b)
            continue
        want = f.body if kind in ("bang_f", "bang_u") and hasattr(f, "body") else f
        x = take(want)
        if x is None:
            return None
        anc[j] = (x,)
    return tuple(anc)


# ------------------------------------------------------------- parsing

def _int(tok, r: _Reader):
    if not isinstance(tok, tuple) or not re.fullmatch(r"-?\d+", tok[0]):
        r.fail("expected an integer", tok[1] if isinstance(tok, tuple) else None)
    return int(tok[0])


def parse_proof(text: str, default_sig: str | None = None) -> Proof:
    r = _Reader(text)
    forms = r.forms()
    if not forms:
        r.fail("empty proof file")
    nodes: dict[str, dict] = {}
    order: list[str] = []
    for pos, form in forms:
        if not (isinstance(form, list) and len(form) == 4 and form[0][0:1] == ("node",)):
            r.fail("expected (node ID (seq ...) (rule ...))", pos)
        name = form[1]
        if not isinstance(name, tuple):
            r.fail("node id must be a name", pos)
        nid = name[0]
        if nid in nodes:
            r.fail(f"duplicate node id {nid}", name[1])
        seqf = form[2]
        if not (isinstance(seqf, list) and len(seqf) == 2 and seqf[0][0] == "seq"):
            r.fail("expected (seq ...)", pos)
        raw: _Raw = seqf[1]
        try:
            seq = tuple(parse_formulas(raw.text, default_sig)) if raw.text.strip() else ()
        except FormulaSyntaxError as e:
            off = raw.pos + _offset(raw.text, e.line, e.col)
            r.fail(f"bad formula: {str(e).split(' at line')[0]}", off)
        body = form[3]
        if not isinstance(body, list) or not body or not isinstance(body[0], tuple):
            r.fail("expected (rule ...) or (back ...)", pos)
        nodes[nid] = _parse_body(nid, seq, body, r, pos)
        order.append(nid)
    # premises and back-edge targets
    referenced = set()
    for nid in order:
        for pr in nodes[nid].get("premises", ()):
            if not pr[0].startswith("back:"):
                if pr[0] not in nodes:
                    r.fail(f"unknown premise {pr[0]}", pr[1])
                if pr[0] in referenced:
                    r.fail(f"node {pr[0]} is used as a premise twice", pr[1])
                referenced.add(pr[0])
    root = order[0]
    if root in referenced:
        r.fail("the first node must be the root", forms[0][0])
    unreached = [n for n in order if n != root and n not in referenced]
    if unreached:
        r.fail(f"node {unreached[0]} is not reachable from the root", forms[order.index(unreached[0])][0])
    targets = set()
    for nid in order:
        d = nodes[nid]
        if d["back"] is not None:
            targets.add(d["back"][0])
        for pr in d.get("premises", ()):
            if pr[0].startswith("back:"):
                targets.add(pr[0][5:])

    built: dict[str, Proof | Back] = {}

    def make(nid):
        # iterative post-order to avoid deep recursion
        stack = [(nid, False)]
        while stack:
            cur, ready = stack.pop()
            d = nodes[cur]
            if d["back"] is not None:
                t, perm = d["back"]
                built[cur] = Back(t, d["seq"], perm, cur)
                continue
            kids = [pr[0] for pr in d["premises"] if not pr[0].startswith("back:")]
            if not ready:
                stack.append((cur, True))
                stack.extend((k, False) for k in reversed(kids))
                continue
            prems = []
            for pr in d["premises"]:
                if pr[0].startswith("back:"):
                    t = pr[0][5:]
                    if t not in nodes:
                        r.fail(f"back-edge to unknown node {t}", pr[1])
                    prems.append(Back(t, nodes[t]["seq"], None, None))
                else:
                    prems.append(built[pr[0]])
            pseqs = tuple(q.seq for q in prems)
            anc = d["anc"]
            if anc is None:
                anc = infer_anc(d["seq"], d["kind"], d["principal"], pseqs, d["index"], d["pp"])
                if anc is None:
                    r.fail(f"cannot infer the ancestry of node {cur}; give :anc", d["pos"])
            taus = d["side"][1:] if d["kind"] in PROMOTIONS else ()
            sig = d["side"][0] if d["side"] else None
            if d["kind"] in PROMOTIONS and not d["side"]:
                sig, taus = _promo_side(d["seq"], d["principal"])
            if d["kind"] in ("mpx", "contr") and sig is None and d["principal"] is not None:
                sig = getattr(d["seq"][d["principal"]], "sig", None)
            rule = Rule(d["kind"], d["principal"], anc, d["index"], sig, tuple(taus), d["pp"])
            built[cur] = Proof(d["seq"], rule, tuple(prems), cur if cur in targets else None, cur)
        return built[nid]

    return make(root)


def _promo_side(seq, p):
    if p is None or not 0 <= p < len(seq):
        return None, ()
    sig = getattr(seq[p], "sig", None)
    return sig, tuple(getattr(seq[j], "sig", "?") for j in range(len(seq)) if j != p)


def _offset(text, line, col):
    lines = text.split("\n")
    return sum(len(l) + 1 for l in lines[: line - 1]) + col - 1


def _parse_body(nid, seq, body, r: _Reader, pos):
    head = body[0][0]
    d = {"seq": seq, "back": None, "pos": pos, "kind": None, "principal": None, "premises": [],
         "side": (), "pp": (), "anc": None, "index": None}
    if head == "back":
        if len(body) < 2 or not isinstance(body[1], tuple):
            r.fail("expected (back ID)", body[0][1])
        perm = None
        rest = body[2:]
        if rest:
            if len(rest) != 2 or rest[0][0] != ":perm" or not isinstance(rest[1], list):
                r.fail("expected :perm (...)", body[0][1])
            perm = tuple(_int(t, r) for t in rest[1])
        d["back"] = (body[1][0], perm)
        return d
    if head != "rule" or len(body) < 2:
        r.fail("expected (rule KIND ...)", body[0][1])
    kind = body[1]
    if isinstance(kind, list):
        if len(kind) != 2 or not isinstance(kind[0], tuple) or kind[0][0] not in ("mpx", "contr"):
            r.fail("expected (mpx N) or (contr N)", body[0][1])
        d["kind"], d["index"] = kind[0][0], _int(kind[1], r)
    else:
        from .proof import KINDS
        if kind[0] not in KINDS or kind[0] in ("mpx", "contr"):
            r.fail(f"unknown rule kind {kind[0]}", kind[1])
        d["kind"] = kind[0]
    opts = body[2:]
    i = 0
    while i < len(opts):
        key = opts[i]
        if not isinstance(key, tuple) or not key[0].startswith(":") or i + 1 >= len(opts):
            r.fail("expected :option value", key[1] if isinstance(key, tuple) else None)
        val = opts[i + 1]
        i += 2
        match key[0]:
            case ":principal":
                d["principal"] = _int(val, r)
            case ":premises":
                if not isinstance(val, list) or any(not isinstance(v, tuple) for v in val):
                    r.fail("expected a list of node ids", key[1])
                d["premises"] = list(val)
            case ":side":
                if not isinstance(val, list):
                    r.fail("expected a list", key[1])
                if d["kind"] == "mcut":
                    pp = []
                    for pr in val:
                        if not (isinstance(pr, list) and len(pr) == 2 and all(isinstance(x, list) and len(x) == 2 for x in pr)):
                            r.fail("expected ((i p) (i p)) pairs", key[1])
                        pp.append(tuple((_int(x[0], r), _int(x[1], r)) for x in pr))
                    d["pp"] = tuple(pp)
                else:
                    if any(not isinstance(v, tuple) for v in val):
                        r.fail("expected signature names", key[1])
                    d["side"] = tuple(v[0] for v in val)
            case ":anc":
                if not isinstance(val, list):
                    r.fail("expected a list", key[1])
                anc = []
                for e in val:
                    if not isinstance(e, list) or len(e) % 2:
                        r.fail("expected (k q k q ...)", key[1])
                    xs = [_int(t, r) for t in e]
                    anc.append(tuple(zip(xs[::2], xs[1::2])))
                d["anc"] = tuple(anc)
            case _:
                r.fail(f"unknown option {key[0]}", key[1])
    return d


# ------------------------------------------------------------- printing

def print_proof(p: Proof) -> str:
    # names are per position: a subproof shared by two premises is printed twice
    names: dict[tuple[int, ...], str] = {}
    taken: set[str] = set()
    order = list(walk(p))
    for addr, node, _ in order:
        if node.name and node.name not in taken and re.fullmatch(r"[^\s():;]+", node.name) and not node.name.startswith("back:"):
            names[addr] = node.name
            taken.add(node.name)
    k = 0
    for addr, _, _ in order:
        if addr not in names:
            while f"n{k}" in taken:
                k += 1
            names[addr] = f"n{k}"
            taken.add(f"n{k}")
    lines = []
    for addr, node, env in order:
        nid = names[addr]
        seq = ", ".join(show(f) for f in node.seq)
        if isinstance(node, Back):
            hit = env.get(node.target)
            tgt = names[hit[0]] if hit else node.target
            perm = "" if node.perm is None else " :perm (" + " ".join(map(str, node.perm)) + ")"
            lines.append(f"(node {nid} (seq {seq}) (back {tgt}{perm}))")
            continue
        lines.append(f"(node {nid} (seq {seq}) {_rule_text(node, addr, names)})")
    return "\n".join(lines) + "\n"


def _rule_text(node: Proof, addr, names) -> str:
    rule = node.rule
    kind = f"({rule.kind} {rule.index})" if rule.kind in ("mpx", "contr") else rule.kind
    parts = [f"(rule {kind}"]
    if rule.principal is not None:
        parts.append(f":principal {rule.principal}")
    if node.premises:
        ps = [names[addr + (k,)] for k in range(len(node.premises))]
        parts.append(":premises (" + " ".join(ps) + ")")
    if rule.kind in PROMOTIONS:
        parts.append(":side (" + " ".join((rule.sig or "?",) + rule.taus) + ")")
    elif rule.kind in ("mpx", "contr") and rule.sig is not None:
        parts.append(f":side ({rule.sig})")
    elif rule.kind == "mcut" and rule.pp:
        parts.append(":side (" + " ".join(f"(({a[0]} {a[1]}) ({b[0]} {b[1]}))" for a, b in rule.pp) + ")")
    pseqs = tuple(q.seq for q in node.premises)
    guess = infer_anc(node.seq, rule.kind, rule.principal, pseqs, rule.index, rule.pp)
    if guess != rule.anc:
        parts.append(":anc (" + " ".join("(" + " ".join(f"{k} {q}" for k, q in e) + ")" for e in rule.anc) + ")")
    return " ".join(parts) + ")"
