"""Integrable-set discovery on the judgment graph.

Label-1 pairs become edges; integrable sets are read off either as maximal
cliques (pivoting Bron-Kerbosch, then a greedy overlap-to-disjoint step) or
as communities (Louvain modularity, or label propagation as the cheap
fallback). All outputs are disjoint partitions of the row ids.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass

from .judge import PairJudgments
from .seeds import rng_for

__all__ = [
    "RowIdOutOfRange",
    "ComponentTooLarge",
    "Graph",
    "Partition",
    "build_graph",
    "bron_kerbosch",
    "cliques_to_partition",
    "louvain",
    "label_propagation",
    "modularity",
    "save_partition",
    "load_partition",
]

MAX_COMPONENT = 5000


class RowIdOutOfRange(Exception):
    pass


class ComponentTooLarge(Exception):
    """A connected component exceeds the clique-enumeration guard."""


@dataclass(frozen=True)
class Graph:
    n: int
    adjacency: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if len(self.adjacency) != self.n:
            raise ValueError("adjacency length must equal n")
        for u, nbrs in enumerate(self.adjacency):
            if list(nbrs) != sorted(set(nbrs)):
                raise ValueError(f"neighbors of {u} not sorted/unique")
            for v in nbrs:
                if v == u:
                    raise ValueError(f"self-loop at {u}")
                if not 0 <= v < self.n:
                    raise RowIdOutOfRange(f"neighbor {v} of {u} out of range")
                if u not in self.adjacency[v]:
                    raise ValueError(f"edge ({u}, {v}) not symmetric")

    @staticmethod
    def from_edges(n: int, edges) -> "Graph":
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for a, b in edges:
            if not (0 <= a < n and 0 <= b < n):
                raise RowIdOutOfRange(f"edge ({a}, {b}) outside 0..{n - 1}")
            if a == b:
                continue
            nbrs[a].add(b)
            nbrs[b].add(a)
        return Graph(n, tuple(tuple(sorted(s)) for s in nbrs))

    def neighbors(self, u: int) -> tuple[int, ...]:
        return self.adjacency[u]

    def n_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2


@dataclass(frozen=True)
class Partition:
    """Disjoint non-empty sets covering 0..n-1, ordered by minimum element."""

    n: int
    sets: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        seen: set[int] = set()
        for s in self.sets:
            if not s:
                raise ValueError("empty set in partition")
            if list(s) != sorted(s):
                raise ValueError("set members must be sorted")
            if seen & set(s):
                raise ValueError("sets are not disjoint")
            seen.update(s)
        if seen != set(range(self.n)):
            raise ValueError("sets do not cover 0..n-1 exactly")
        if list(self.sets) != sorted(self.sets, key=lambda s: s[0]):
            raise ValueError("sets must be ordered by minimum element")

    @staticmethod
    def from_sets(n: int, sets) -> "Partition":
        normal = sorted((tuple(sorted(s)) for s in sets if s), key=lambda s: s[0])
        return Partition(n, tuple(normal))

    def labels(self) -> list[int]:
        lab = [0] * self.n
        for i, s in enumerate(self.sets):
            for v in s:
                lab[v] = i
        return lab


def build_graph(judgments: PairJudgments) -> Graph:
    """One edge per label-1 pair; isolated nodes kept."""
    return Graph.from_edges(
        judgments.n, [(a, b) for a, b, _p, label in judgments.pairs if label == 1]
    )


def _components(g: Graph) -> list[list[int]]:
    seen = [False] * g.n
    out = []
    for start in range(g.n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in g.adjacency[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        out.append(sorted(comp))
    return out


def bron_kerbosch(g: Graph, max_component: int = MAX_COMPONENT) -> list[tuple[int, ...]]:
    """All maximal cliques, each sorted, the list sorted lexicographically.

    Pivot: the vertex of P | X maximizing |P & N(u)|, lowest id on ties.
    Enumeration is exponential in the worst case; components larger than
    max_component are refused rather than silently hanging.
    """
    nbrs = [set(a) for a in g.adjacency]
    cliques: list[tuple[int, ...]] = []

    def expand(r: set[int], p: set[int], x: set[int]) -> None:
        if not p and not x:
            cliques.append(tuple(sorted(r)))
            return
        pivot = min(p | x, key=lambda u: (-len(p & nbrs[u]), u))
        for v in sorted(p - nbrs[pivot]):
            expand(r | {v}, p & nbrs[v], x & nbrs[v])
            p.remove(v)
            x.add(v)

    # recursion depth is bounded by the largest clique, itself bounded by
    # the component guard
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, max_component + 200))
    try:
        for comp in _components(g):
            if len(comp) > max_component:
                raise ComponentTooLarge(
                    f"component of {len(comp)} nodes exceeds {max_component}"
                )
            expand(set(), set(comp), set())
    finally:
        sys.setrecursionlimit(limit)
    return sorted(cliques)


def cliques_to_partition(cliques, n: int) -> Partition:
    """Greedy disjointification: biggest cliques first (lexicographic ties);
    whatever unassigned members a clique still has become one output set."""
    ordered = sorted((tuple(sorted(c)) for c in cliques), key=lambda c: (-len(c), c))
    assigned: set[int] = set()
    sets = []
    for clique in ordered:
        members = [v for v in clique if v not in assigned]
        if members:
            sets.append(members)
            assigned.update(members)
    for v in range(n):
        if v not in assigned:
            sets.append([v])
    return Partition.from_sets(n, sets)


def modularity(g: Graph, partition: Partition) -> float:
    """Unweighted Newman modularity at resolution 1."""
    m2 = 2.0 * g.n_edges()
    if m2 == 0.0:
        return 0.0
    lab = partition.labels()
    q = 0.0
    deg = [len(g.adjacency[u]) for u in range(g.n)]
    internal = [0] * len(partition.sets)
    degsum = [0] * len(partition.sets)
    for u in range(g.n):
        degsum[lab[u]] += deg[u]
        for v in g.adjacency[u]:
            if lab[v] == lab[u]:
                internal[lab[u]] += 1
    for c in range(len(partition.sets)):
        q += internal[c] / m2 - (degsum[c] / m2) ** 2
    return q


_GAIN_EPS = 1e-9


def louvain(g: Graph, seed: int = 0) -> Partition:
    """Two-phase Louvain on the unweighted graph.

    Local moving visits nodes in ascending order until a full pass makes no
    move, then communities are aggregated into a weighted graph; phases
    repeat until the modularity gain drops below 1e-9. The node order is
    fixed, so the result does not depend on the seed; the parameter stays
    for interface symmetry with the other strategies.
    """
    del seed
    n = g.n
    # weighted working graph: adj[u] = {v: weight}; self-loops hold internal
    # weight once, degrees count them twice
    adj: list[dict[int, float]] = [dict.fromkeys(g.adjacency[u], 1.0) for u in range(n)]
    members: list[list[int]] = [[u] for u in range(n)]
    m2 = float(sum(len(a) for a in g.adjacency))
    if m2 == 0.0:
        return Partition.from_sets(n, [[u] for u in range(n)])

    total_q = None
    while True:
        size = len(adj)
        degree = [sum(w for v, w in adj[u].items() if v != u) + 2.0 * adj[u].get(u, 0.0) for u in range(size)]
        comm = list(range(size))
        comm_tot = degree.copy()
        moved_any = True
        while moved_any:
            moved_any = False
            for u in range(size):
                cu = comm[u]
                k_u = degree[u]
                links: dict[int, float] = {}
                for v, w in adj[u].items():
                    if v != u:
                        links[comm[v]] = links.get(comm[v], 0.0) + w
                comm_tot[cu] -= k_u
                base = links.get(cu, 0.0) - comm_tot[cu] * k_u / m2
                best_c, best_gain = cu, 0.0
                for c, k_uc in sorted(links.items()):
                    gain = (k_uc - comm_tot[c] * k_u / m2) - base
                    if gain > best_gain + _GAIN_EPS or (
                        gain > best_gain - _GAIN_EPS and gain > _GAIN_EPS and c < best_c
                    ):
                        best_c, best_gain = c, gain
                comm_tot[best_c] += k_u
                if best_c != cu:
                    comm[u] = best_c
                    moved_any = True

        # compress community ids in order of first appearance
        remap: dict[int, int] = {}
        for u in range(size):
            remap.setdefault(comm[u], len(remap))
        comm = [remap[c] for c in comm]
        n_comm = len(remap)

        new_members: list[list[int]] = [[] for _ in range(n_comm)]
        for u in range(size):
            new_members[comm[u]].extend(members[u])
        q = _weighted_modularity(adj, comm, n_comm, m2)
        if total_q is not None and q - total_q < _GAIN_EPS:
            members = new_members
            break
        total_q = q
        if n_comm == size:
            members = new_members
            break

        new_adj: list[dict[int, float]] = [{} for _ in range(n_comm)]
        for u in range(size):
            cu = comm[u]
            for v, w in adj[u].items():
                cv = comm[v]
                if u == v:
                    new_adj[cu][cu] = new_adj[cu].get(cu, 0.0) + w
                elif cu == cv:
                    if u < v:
                        new_adj[cu][cu] = new_adj[cu].get(cu, 0.0) + w
                else:
                    new_adj[cu][cv] = new_adj[cu].get(cv, 0.0) + w
        adj = new_adj
        members = new_members

    return Partition.from_sets(n, members)


def _weighted_modularity(adj: list[dict[int, float]], comm: list[int], n_comm: int, m2: float) -> float:
    internal = [0.0] * n_comm
    tot = [0.0] * n_comm
    for u in range(len(adj)):
        cu = comm[u]
        deg = sum(w for v, w in adj[u].items() if v != u) + 2.0 * adj[u].get(u, 0.0)
        tot[cu] += deg
        for v, w in adj[u].items():
            if v == u:
                internal[cu] += 2.0 * w
            elif comm[v] == cu:
                internal[cu] += w
    return sum(internal[c] / m2 - (tot[c] / m2) ** 2 for c in range(n_comm))


def label_propagation(g: Graph, seed: int = 0, max_sweeps: int = 100) -> Partition:
    """Asynchronous label propagation: shuffled node order per sweep, each
    node takes its neighbors' majority label (lowest label on ties)."""
    labels = list(range(g.n))
    rng = rng_for(seed, "label-propagation")
    for _ in range(max_sweeps):
        changed = False
        for u in rng.permutation(g.n):
            nbrs = g.adjacency[u]
            if not nbrs:
                continue
            counts: dict[int, int] = {}
            for v in nbrs:
                counts[labels[v]] = counts.get(labels[v], 0) + 1
            best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
            if best != labels[u]:
                labels[u] = best
                changed = True
        if not changed:
            break
    groups: dict[int, list[int]] = {}
    for u, lab in enumerate(labels):
        groups.setdefault(lab, []).append(u)
    return Partition.from_sets(g.n, groups.values())


def save_partition(partition: Partition, method: str, path: str) -> None:
    doc = {"n": partition.n, "method": method, "sets": [list(s) for s in partition.sets]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_partition(path: str) -> tuple[Partition, str]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    part = Partition.from_sets(int(doc["n"]), [[int(v) for v in s] for s in doc["sets"]])
    return part, str(doc.get("method", ""))
