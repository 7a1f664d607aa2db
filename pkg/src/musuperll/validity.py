"""Thread validity of circular proofs.

``check_validity`` decides whether every infinite branch carries a valid
thread.  It is the Ramsey-based complementation of the thread acceptor:
every finite path of the proof graph is abstracted by the set of threads
running along it, each summarised as (start position, end position, least
priority seen, principal seen).  These abstractions form a finite monoid
under composition.  An infinite branch without a valid thread exists iff
some idempotent abstraction of a cycle has no self-loop with a ν least
priority and a principal visit, and that cycle repeated is the lasso.

``validity_oracle`` is an independent check that enumerates lassos and
tests each one by searching the finite thread graph of the lasso's cycle.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import networkx as nx

from .proof import Back, Proof, walk
from .syntax import ClosureTable, build_closure

__all__ = ["Valid", "Invalid", "Inconclusive", "ProofGraph", "proof_graph",
           "check_validity", "validity_oracle", "lasso_has_valid_thread", "emit_automaton"]


@dataclass(frozen=True)
class Valid:
    def __str__(self):
        return "Valid"


@dataclass(frozen=True)
class Invalid:
    """An infinite branch: ``prefix`` from the root, then ``cycle`` forever.

    Both are lists of edges ``(node, premise index)`` over node addresses.
    """

    prefix: tuple[tuple[str, int], ...]
    cycle: tuple[tuple[str, int], ...]

    def __str__(self):
        fmt = lambda es: " ".join(f"{u}/{k}" for u, k in es)
        return f"Invalid prefix [{fmt(self.prefix)}] cycle [{fmt(self.cycle)}]"


@dataclass(frozen=True)
class Inconclusive:
    bound: int
    needed: int

    def __str__(self):
        return f"Inconclusive (bound {self.bound} < {self.needed})"


# ------------------------------------------------------------ proof graph

@dataclass
class ProofGraph:
    """The finite graph behind a circular proof.

    Nodes are the addresses of rule nodes; a back-edge premise leads to its
    target.  ``edges[u]`` lists ``(k, v, arcs)`` where ``arcs`` maps
    conclusion positions of ``u`` to positions of ``v``.
    """

    root: str
    nodes: dict[str, Proof]
    edges: dict[str, list[tuple[int, str, tuple[tuple[int, int], ...]]]]
    closure: ClosureTable
    prio: dict[str, tuple[int, ...]]
    principal: dict[str, frozenset[int]]
    names: dict[str, str | None]

    def arity(self, u: str) -> int:
        return len(self.nodes[u].seq)


def _addr(a) -> str:
    return "r" + "".join(f".{i}" for i in a)


def _principals(node: Proof) -> frozenset[int]:
    r = node.rule
    if r.kind in ("cut", "mcut"):
        return frozenset()
    if r.kind == "ax":
        return frozenset(range(len(node.seq)))
    return frozenset() if r.principal is None else frozenset({r.principal})


def proof_graph(p: Proof) -> ProofGraph:
    nodes, edges, names = {}, {}, {}
    formulas = []
    for addr, node, env in walk(p):
        if isinstance(node, Back):
            continue
        u = _addr(addr)
        nodes[u] = node
        names[u] = node.name
        formulas.extend(node.seq)
        if node.label is not None:
            env = {**env, node.label: (addr, node)}
        out = []
        for k, q in enumerate(node.premises):
            if isinstance(q, Back):
                taddr, target = env[q.target]
                v = _addr(taddr)
                mapq = q.mapped
            else:
                v = _addr(addr + (k,))
                mapq = lambda x: x
            arcs = tuple((j, mapq(qq)) for j, e in enumerate(node.rule.anc) for kk, qq in e if kk == k)
            out.append((k, v, arcs))
        edges[u] = out
    closure = build_closure(formulas)
    prio = {u: tuple(closure.priority[f] for f in n.seq) for u, n in nodes.items()}
    principal = {u: _principals(n) for u, n in nodes.items()}
    return ProofGraph("r", nodes, edges, closure, prio, principal, names)


# ------------------------------------------------------------- Ramsey check

Graph = frozenset  # of (p, q, m, principal)


def _edge_graph(g: ProofGraph, u: str, arcs) -> Graph:
    return frozenset((j, q, g.prio[u][j], j in g.principal[u]) for j, q in arcs)


def _prune(arcs) -> Graph:
    best: dict[tuple[int, int, int], bool] = {}
    for p, q, m, f in arcs:
        best[(p, q, m)] = best.get((p, q, m), False) or f
    return frozenset((p, q, m, f) for (p, q, m), f in best.items())


def _compose(a: Graph, b: Graph) -> Graph:
    by_start: dict[int, list] = {}
    for q, r, m, f in b:
        by_start.setdefault(q, []).append((r, m, f))
    out = []
    for p, q, m, f in a:
        for r, m2, f2 in by_start.get(q, ()):
            out.append((p, r, min(m, m2), f or f2))
    return _prune(out)


def _good(g: Graph, closure: ClosureTable) -> bool:
    return any(p == q and f and closure.is_nu(m) for p, q, m, f in g)


def check_validity(p: Proof, *, graph: ProofGraph | None = None) -> Valid | Invalid:
    g = graph or proof_graph(p)
    # found[(u, v, G)] = path of edges realising G from u to v
    found: dict[tuple[str, str, Graph], tuple[tuple[str, int], ...]] = {}
    queue: deque = deque()
    for u in sorted(g.edges):
        for k, v, arcs in g.edges[u]:
            key = (u, v, _edge_graph(g, u, arcs))
            if key not in found:
                found[key] = ((u, k),)
                queue.append(key)
    while queue:
        key = queue.popleft()
        u, v, G = key
        if u == v and _compose(G, G) == G and not _good(G, g.closure):
            return Invalid(_prefix(g, u), found[key])
        for k, w, arcs in g.edges[v]:
            nk = (u, w, _compose(G, _edge_graph(g, v, arcs)))
            if nk not in found:
                found[nk] = found[key] + ((v, k),)
                queue.append(nk)
    return Valid()


def _prefix(g: ProofGraph, u: str) -> tuple[tuple[str, int], ...]:
    parts = u.split(".")[1:]
    out, cur = [], "r"
    for k in parts:
        out.append((cur, int(k)))
        cur = f"{cur}.{k}"
    return tuple(out)


# ------------------------------------------------------------------ oracle

def lasso_has_valid_thread(g: ProofGraph, cycle: tuple[tuple[str, int], ...]) -> bool:
    """Does the branch going round ``cycle`` forever carry a valid thread?

    Threads of the periodic branch are the infinite paths of the thread
    graph on (step in cycle, position).  One is valid iff some strongly
    connected part, restricted to priorities ≥ m for a ν priority m, has a
    cycle through a position of priority m and through a principal position.
    """
    n = len(cycle)
    T = nx.DiGraph()
    attrs = {}
    for i, (u, k) in enumerate(cycle):
        for j in range(g.arity(u)):
            attrs[(i, j)] = (g.prio[u][j], j in g.principal[u])
            T.add_node((i, j))
        _, v, arcs = g.edges[u][k]
        nxt = cycle[(i + 1) % n][0]
        if v != nxt:
            raise ValueError("not a cycle of the proof graph")
        for j, q in arcs:
            T.add_edge((i, j), ((i + 1) % n, q))
    for m in sorted({a[0] for a in attrs.values()}):
        if not g.closure.is_nu(m):
            continue
        sub = T.subgraph([x for x, a in attrs.items() if a[0] >= m])
        for comp in nx.strongly_connected_components(sub):
            if len(comp) == 1:
                (x,) = comp
                if not sub.has_edge(x, x):
                    continue
            if any(attrs[x][0] == m for x in comp) and any(attrs[x][1] for x in comp):
                return True
    return False


def _needed_bound(g: ProofGraph) -> int:
    cyclic = not nx.is_directed_acyclic_graph(_node_digraph(g))
    if not cyclic:
        return 0
    width = max((g.arity(u) for u in g.nodes), default=0)
    levels = len({m for ps in g.prio.values() for m in ps})
    return 2 * len(g.nodes) * 3 ** (levels * width * width)


def _node_digraph(g: ProofGraph) -> nx.DiGraph:
    d = nx.DiGraph()
    d.add_nodes_from(g.nodes)
    for u, es in g.edges.items():
        for _, v, _ in es:
            d.add_edge(u, v)
    return d


def validity_oracle(p: Proof, bound: int) -> Valid | Invalid | Inconclusive:
    """Try every lasso whose prefix plus cycle has at most ``bound`` edges."""
    g = proof_graph(p)
    dist = {g.root: ()}
    frontier = [g.root]
    while frontier:
        nxt = []
        for u in frontier:
            for k, v, _ in g.edges[u]:
                if v not in dist:
                    dist[v] = dist[u] + ((u, k),)
                    nxt.append(v)
        frontier = nxt
    for u in sorted(g.nodes, key=lambda x: (len(dist[x]), x)):
        room = bound - len(dist[u])
        for cyc in _closed_walks(g, u, room):
            if not lasso_has_valid_thread(g, cyc):
                return Invalid(dist[u], cyc)
    needed = _needed_bound(g)
    if bound >= needed:
        return Valid()
    return Inconclusive(bound, needed)


def _closed_walks(g: ProofGraph, u: str, limit: int):
    """Closed walks from ``u`` of length 1..limit, shortest first."""
    layer = [((), u)]
    for _ in range(limit):
        new = []
        for path, cur in layer:
            for k, v, _ in g.edges[cur]:
                p2 = path + ((cur, k),)
                if v == u:
                    yield p2
                new.append((p2, v))
        layer = new
        if not layer:
            return


# ------------------------------------------------------------------ debug dump

def emit_automaton(p: Proof) -> str:
    """HOA-like dump of the branch/thread automaton (for inspection only)."""
    g = proof_graph(p)
    lines = ["HOA: v1", f"States: {len(g.nodes)}", f"Start: {g.root}", "Acceptance: threads"]
    lines.append("Priorities: " + " ".join(
        f"{i}:{'nu' if g.closure.is_nu(i) else '-'}" for i in range(len(g.closure))))
    lines.append("--BODY--")
    for u in sorted(g.nodes, key=lambda x: (x.count("."), x)):
        node = g.nodes[u]
        lines.append(f"State: {u} {node.rule.name()} prio {list(g.prio[u])} principal {sorted(g.principal[u])}")
        for k, v, arcs in g.edges[u]:
            lines.append(f"  [{k}] {v} threads {' '.join(f'{a}->{b}' for a, b in arcs) or '-'}")
    lines.append("--END--")
    return "\n".join(lines) + "\n"
