"""Vertex graphs of P(A) and Q(A), exact diameters, and dual walk extraction."""
from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

__all__ = [
    "VertexGraph",
    "WalkCertificate",
    "RelationReport",
    "DisconnectedGraphError",
    "WalkPreconditionError",
    "bfs_distance",
    "bfs_path",
    "eccentricity",
    "diameter",
    "shortest_facet_path",
    "extract_dual_walk",
    "diameter_relation_check",
    "write_graph_csv",
]

ALL_PAIRS_LIMIT = 50_000
_CHUNK = 256


class DisconnectedGraphError(ValueError):
    pass


class WalkPreconditionError(ValueError):
    pass


@dataclass
class VertexGraph:
    """Vertices with coordinates and tight-constraint sets, plus adjacency lists.

    ``kind`` is "P" (vertices of P(A), bases of size n) or "Q" (hull vertices
    of A, basis = the point's own index).
    """

    coords: np.ndarray
    bases: list[tuple[int, ...]]
    adjacency: list[list[int]]
    kind: str = "P"
    _csr: csr_matrix | None = field(default=None, repr=False)
    _by_label: dict[int, int] | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.adjacency)

    @property
    def dimension(self) -> int:
        return self.coords.shape[1]

    def edges(self) -> Iterable[tuple[int, int]]:
        for u, nbrs in enumerate(self.adjacency):
            for v in nbrs:
                if u < v:
                    yield u, v

    def num_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=int)

    def csr(self) -> csr_matrix:
        if self._csr is None:
            V = len(self)
            indptr = np.zeros(V + 1, dtype=np.int64)
            indptr[1:] = np.cumsum([len(a) for a in self.adjacency])
            indices = np.fromiter((v for a in self.adjacency for v in a), dtype=np.int64, count=indptr[-1])
            self._csr = csr_matrix((np.ones(indptr[-1]), indices, indptr), shape=(V, V))
        return self._csr

    def vertex_of_point(self, label: int) -> int:
        """Q graphs: vertex id of the hull vertex with cloud index ``label``."""
        if self._by_label is None:
            self._by_label = {b[0]: i for i, b in enumerate(self.bases)}
        return self._by_label[label]

    def check(self) -> list[str]:
        """Return a list of violated structural invariants (empty when valid)."""
        problems = []
        for u, nbrs in enumerate(self.adjacency):
            for v in nbrs:
                if u not in self.adjacency[v]:
                    problems.append(f"asymmetric edge {u}-{v}")
                    break
        if len(set(self.bases)) != len(self.bases):
            problems.append("duplicate basis sets")
        if self.kind == "P":
            n = self.dimension
            bad = [u for u, a in enumerate(self.adjacency) if len(a) != n]
            if bad:
                problems.append(f"{len(bad)} vertices with degree != {n}")
        if len(self) and not _connected(self):
            problems.append("graph is disconnected")
        return problems


def _connected(G: VertexGraph) -> bool:
    seen = np.zeros(len(G), dtype=bool)
    seen[0] = True
    todo = [0]
    while todo:
        u = todo.pop()
        for v in G.adjacency[u]:
            if not seen[v]:
                seen[v] = True
                todo.append(v)
    return bool(seen.all())


# -- BFS --------------------------------------------------------------------

def bfs_path(
    G: VertexGraph,
    sources: int | Sequence[int],
    targets: int | Sequence[int],
    allowed: np.ndarray | None = None,
) -> list[int] | None:
    """Shortest path from any source to any target, or None if unreachable.

    Ties resolve to the lexicographically smallest discovery order (sources and
    neighbor lists are scanned in increasing index order). ``allowed`` is an
    optional boolean mask restricting the search to an induced subgraph.
    """
    srcs = sorted({sources} if isinstance(sources, (int, np.integer)) else set(sources))
    tgts = {targets} if isinstance(targets, (int, np.integer)) else set(targets)
    parent = {}
    queue = deque()
    for s in srcs:
        if allowed is not None and not allowed[s]:
            continue
        parent[s] = -1
        queue.append(s)
    while queue:
        u = queue.popleft()
        if u in tgts:
            path = [u]
            while parent[path[-1]] != -1:
                path.append(parent[path[-1]])
            return path[::-1]
        for v in G.adjacency[u]:
            if v not in parent and (allowed is None or allowed[v]):
                parent[v] = u
                queue.append(v)
    return None


def bfs_distance(G: VertexGraph, u: int, v: int) -> int:
    path = bfs_path(G, u, v)
    if path is None:
        raise DisconnectedGraphError(f"no path between {u} and {v}")
    return len(path) - 1


def _bfs_levels(G: VertexGraph, sources) -> np.ndarray:
    d = shortest_path(G.csr(), method="D", unweighted=True, directed=False, indices=sources)
    if not np.all(np.isfinite(d)):
        raise DisconnectedGraphError("graph is disconnected")
    return d.astype(np.int64)


def eccentricity(G: VertexGraph, u: int) -> int:
    return int(_bfs_levels(G, [u]).max())


def diameter(G: VertexGraph) -> tuple[int, tuple[int, int]]:
    """Exact diameter and the lexicographically smallest pair attaining it."""
    V = len(G)
    if V == 0:
        raise ValueError("empty graph")
    if V == 1:
        return 0, (0, 0)
    if V > ALL_PAIRS_LIMIT:
        return _ifub_diameter(G)
    best, witness = -1, (0, 0)
    for start in range(0, V, _CHUNK):
        rows = np.arange(start, min(start + _CHUNK, V))
        d = _bfs_levels(G, rows)
        ecc = d.max(axis=1)
        k = int(ecc.max())
        if k > best:
            i = int(np.flatnonzero(ecc == k)[0])
            j = int(np.flatnonzero(d[i] == k)[0])
            best, witness = k, (int(rows[i]), j)
    return best, witness


def _ifub_diameter(G: VertexGraph) -> tuple[int, tuple[int, int]]:
    """Exact diameter by iterative fringe upper bounding.

    The witness is a maximizing pair, not necessarily the lexicographic minimum.
    """
    d0 = _bfs_levels(G, [0])[0]
    a = int(np.argmax(d0))
    da = _bfs_levels(G, [a])[0]
    b = int(np.argmax(da))
    path = bfs_path(G, a, b)
    root = path[len(path) // 2]
    dr = _bfs_levels(G, [root])[0]
    i = int(dr.max())
    lb, witness = int(da[b]), (min(a, b), max(a, b))
    ub = 2 * i
    while ub > lb:
        fringe = np.flatnonzero(dr == i)
        for start in range(0, fringe.size, _CHUNK):
            rows = fringe[start: start + _CHUNK]
            d = _bfs_levels(G, rows)
            ecc = d.max(axis=1)
            k = int(ecc.max())
            if k > lb:
                r = int(np.argmax(ecc))
                x, y = int(rows[r]), int(np.argmax(d[r]))
                lb, witness = k, (min(x, y), max(x, y))
        if lb > 2 * (i - 1):
            break
        ub = 2 * (i - 1)
        i -= 1
    return lb, witness


# -- dual walks -------------------------------------------------------------

@dataclass
class WalkCertificate:
    """Walk in Q(A) extracted from a shortest facet-to-facet path in P(A)."""

    path_in_P: list[int]
    walk_in_Q: list[int]
    breakpoints: list[int]
    n: int

    @property
    def D(self) -> int:
        return len(self.path_in_P) - 1

    @property
    def L(self) -> int:
        return len(self.walk_in_Q) - 1

    def length_ok(self) -> bool:
        return self.L <= self.D / (self.n - 1) + 2

    def validate(self, hull_edges) -> list[str]:
        problems = []
        for x, y in zip(self.walk_in_Q, self.walk_in_Q[1:]):
            if x == y:
                problems.append(f"repeated walk vertex {x}")
            elif (min(x, y), max(x, y)) not in hull_edges:
                problems.append(f"({x}, {y}) is not an edge of Q")
        if not self.length_ok():
            problems.append(f"L={self.L} exceeds D/(n-1)+2 with D={self.D}, n={self.n}")
        return problems


def shortest_facet_path(P: VertexGraph, a1: int, a2: int) -> list[int]:
    """Shortest path in P from a vertex tight at a1 to a vertex tight at a2."""
    src = [v for v, b in enumerate(P.bases) if a1 in b]
    dst = [v for v, b in enumerate(P.bases) if a2 in b]
    if not src or not dst:
        raise WalkPreconditionError("constraint is not a facet of P")
    path = bfs_path(P, src, dst)
    if path is None:
        raise DisconnectedGraphError("facets are not connected")
    return path


def extract_dual_walk(P: VertexGraph, path: Sequence[int], a1: int, a2: int) -> WalkCertificate:
    """Turn a minimal facet-to-facet path w_0..w_D of P into a walk a1 -> a2 in Q.

    Breakpoints l_i are the maximal stretches on which the tight sets S_r
    still share a constraint; each intermediate walk vertex is the smallest
    index in that common intersection.
    """
    path = list(path)
    if not path:
        raise WalkPreconditionError("empty path")
    n = P.dimension
    S = [set(P.bases[w]) for w in path]
    D = len(path) - 1
    for x, y in zip(path, path[1:]):
        if y not in P.adjacency[x]:
            raise WalkPreconditionError(f"{x}-{y} is not an edge of P")
    if a1 not in S[0] or a2 not in S[D]:
        raise WalkPreconditionError("endpoint constraints are not tight at the path ends")
    if any(a1 in s for s in S[1:]) or any(a2 in s for s in S[:D]):
        raise WalkPreconditionError("path is not minimal between the two facets; shortcut it first")
    if a1 == a2:
        raise WalkPreconditionError("a1 and a2 must differ")
    if D == 0:
        return WalkCertificate(path, [a1, a2], [0], n)
    breaks = [0]
    walk = [a1]
    while breaks[-1] < D:
        start = breaks[-1]
        common = set(S[start])
        j = start
        while j < D and common & S[j + 1]:
            common &= S[j + 1]
            j += 1
        breaks.append(j)
        walk.append(min(common))
    walk.append(a2)
    return WalkCertificate(path, walk, breaks, n)


@dataclass
class RelationReport:
    diam_P: int
    diam_Q: int
    n: int
    witness_Q: tuple[int, int]
    certificate: WalkCertificate | None = None
    problems: list[str] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.diam_P >= (self.n - 1) * (self.diam_Q - 2)


def diameter_relation_check(P: VertexGraph, Q: VertexGraph, hull_edges=None) -> RelationReport:
    """Exact diam(P) and diam(Q), plus a dual-walk certificate on the Q witness pair."""
    n = P.dimension
    dP, _ = diameter(P)
    dQ, (i, j) = diameter(Q)
    a1, a2 = Q.bases[i][0], Q.bases[j][0]
    rep = RelationReport(dP, dQ, n, (a1, a2))
    if dQ >= 2:
        path = shortest_facet_path(P, a1, a2)
        cert = extract_dual_walk(P, path, a1, a2)
        rep.certificate = cert
        if hull_edges is not None:
            rep.problems.extend(cert.validate(hull_edges))
        elif not cert.length_ok():
            rep.problems.append("walk length bound violated")
        if cert.L < dQ:
            rep.problems.append("walk shorter than the Q distance")
    if not rep.holds:
        rep.problems.append(f"diam(P)={dP} < (n-1)(diam(Q)-2) with diam(Q)={dQ}")
    return rep


def write_graph_csv(G: VertexGraph, path) -> None:
    """Adjacency table: vertex id, basis, coordinates, neighbor ids."""
    buf = io.StringIO()
    buf.write(f"# spherepoly-graph v1 kind={G.kind}\n")
    buf.write("vertex,basis,coords,neighbors\n")
    for v, (b, nb) in enumerate(zip(G.bases, G.adjacency)):
        coords = " ".join(f"{c:.17g}" for c in G.coords[v])
        buf.write(f"{v},{' '.join(map(str, b))},{coords},{' '.join(map(str, nb))}\n")
    Path(path).write_text(buf.getvalue())
