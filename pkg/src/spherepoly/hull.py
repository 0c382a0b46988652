"""Convex hull of a point cloud and the polarity bridge to P(A).

The hull is built incrementally (beneath-beyond) with a random insertion
order and conflict lists. Visibility is decided in floating point and falls
back to an exact rational determinant when the signed distance is within
``config.GEOM_TOL`` of zero.
"""
from __future__ import annotations

import io
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import config
from .polytope_graph import VertexGraph

__all__ = [
    "Facet",
    "Hull",
    "DegeneracyError",
    "PolarityError",
    "convex_hull",
    "contains_origin",
    "polar_vertex_graph",
    "hull_vertex_graph",
    "exact_orientation",
    "write_facets_csv",
]


class DegeneracyError(ValueError):
    """Points are not in general position even under exact arithmetic."""


class PolarityError(ValueError):
    """The origin is not interior to conv(A), so P(A) is unbounded."""


@dataclass(frozen=True)
class Facet:
    basis: tuple[int, ...]
    outward_normal: np.ndarray
    support: float


@dataclass
class Hull:
    cloud: object
    facets: list[Facet]
    ridge_adjacency: dict[tuple[int, ...], tuple[int, int]]
    hull_edges: set[tuple[int, int]]
    _vertices: np.ndarray | None = field(default=None, repr=False)

    @property
    def points(self) -> np.ndarray:
        return np.asarray(getattr(self.cloud, "points", self.cloud), dtype=float)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def vertices(self) -> np.ndarray:
        """Sorted indices of points that are hull vertices."""
        if self._vertices is None:
            self._vertices = np.unique(np.array([f.basis for f in self.facets], dtype=np.int64))
        return self._vertices

    def facet_set(self) -> set[tuple[int, ...]]:
        return {f.basis for f in self.facets}

    def max_violation(self) -> float:
        """Largest signed distance of any point above any facet hyperplane."""
        pts = self.points
        N = np.array([f.outward_normal for f in self.facets])
        h = np.array([f.support for f in self.facets])
        worst = -np.inf
        for start in range(0, pts.shape[0], 4096):
            vals = pts[start: start + 4096] @ N.T - h
            worst = max(worst, float(vals.max()))
        return worst

    def near_coplanar(self, tol: float | None = None) -> int:
        """Number of (facet, non-basis point) pairs within ``tol`` of the facet plane."""
        tol = config.GEOM_TOL if tol is None else tol
        pts = self.points
        count = 0
        for f in self.facets:
            vals = pts @ f.outward_normal - f.support
            vals[list(f.basis)] = -np.inf
            count += int(np.count_nonzero(vals > -tol))
        return count

    def check(self, tol: float | None = None) -> list[str]:
        """Return the list of violated hull invariants (empty when valid)."""
        tol = config.GEOM_TOL if tol is None else tol
        n = self.dimension
        problems = []
        if any(len(f.basis) != n for f in self.facets):
            problems.append("non-simplicial facet")
        counts: dict[tuple[int, ...], int] = {}
        for f in self.facets:
            for r in itertools.combinations(f.basis, n - 1):
                counts[r] = counts.get(r, 0) + 1
        if any(c != 2 for c in counts.values()):
            problems.append("ridge not shared by exactly two facets")
        if len(counts) != len(self.ridge_adjacency):
            problems.append("ridge table out of sync with facets")
        norms = np.array([np.linalg.norm(f.outward_normal) for f in self.facets])
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            problems.append("non-unit facet normal")
        pts = self.points
        for f in self.facets:
            vals = pts @ f.outward_normal - f.support
            vals[list(f.basis)] = -np.inf
            if vals.max() > tol:
                problems.append(f"point above facet {f.basis}")
                break
            if np.max(np.abs(pts[list(f.basis)] @ f.outward_normal - f.support)) > tol:
                problems.append(f"basis point off facet {f.basis}")
                break
        if n == 3:
            V, E, F = len(self.vertices), len(self.hull_edges), len(self.facets)
            if V - E + F != 2:
                problems.append(f"Euler characteristic {V - E + F} != 2")
            if 2 * E != 3 * F:
                problems.append("2E != 3F")
        return problems


# -- exact predicate --------------------------------------------------------

def _exact_det(rows: list[list[Fraction]]) -> Fraction:
    a = [r[:] for r in rows]
    k = len(a)
    det = Fraction(1)
    for c in range(k):
        p = next((r for r in range(c, k) if a[r][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            a[c], a[p] = a[p], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, k):
            if a[r][c] != 0:
                f = a[r][c] / a[c][c]
                for j in range(c, k):
                    a[r][j] -= f * a[c][j]
    return det


def exact_orientation(simplex_pts: np.ndarray, q: np.ndarray) -> int:
    """Sign of det[[p_1, 1], ..., [p_n, 1], [q, 1]] in exact rational arithmetic."""
    rows = [[Fraction(float(v)) for v in p] + [Fraction(1)] for p in simplex_pts]
    rows.append([Fraction(float(v)) for v in q] + [Fraction(1)])
    d = _exact_det(rows)
    return (d > 0) - (d < 0)


# -- incremental construction ----------------------------------------------

def _hyperplanes(pts: np.ndarray, simplices: np.ndarray, interior: np.ndarray):
    """Unit normals and offsets for a stack of simplices, oriented away from ``interior``."""
    V = pts[simplices]  # (k, n, n)
    diffs = V[:, 1:, :] - V[:, :1, :]
    _, _, vh = np.linalg.svd(diffs, full_matrices=True)
    normals = vh[:, -1, :]
    offsets = np.einsum("kn,kin->ki", normals, V).mean(axis=1)
    flip = normals @ interior - offsets > 0
    normals[flip] *= -1
    offsets[flip] *= -1
    return normals, offsets


class _Builder:
    def __init__(self, pts: np.ndarray, order: np.ndarray, tol: float):
        self.pts = pts
        self.n = pts.shape[1]
        self.tol = tol
        self.verts: dict[int, tuple[int, ...]] = {}
        self.normal: dict[int, np.ndarray] = {}
        self.offset: dict[int, float] = {}
        self.conflict: dict[int, np.ndarray] = {}
        self.ridges: dict[tuple[int, ...], list[int]] = {}
        self.sees: list[set[int]] = [set() for _ in range(pts.shape[0])]
        self.next_id = 0
        self.order = order
        self.interior = np.zeros(self.n)
        self._orient_sign: dict[int, int] = {}

    # visibility of candidate points from facet f, with exact fallback
    def _visible(self, f: int, cand: np.ndarray) -> np.ndarray:
        if cand.size == 0:
            return cand
        vals = self.pts[cand] @ self.normal[f] - self.offset[f]
        vis = vals > self.tol
        near = np.flatnonzero(np.abs(vals) <= self.tol)
        for i in near:
            vis[i] = self._exact_visible(f, int(cand[i]))
        return cand[vis]

    def _exact_visible(self, f: int, q: int) -> bool:
        simplex = self.pts[list(self.verts[f])]
        s_in = self._orient_sign.get(f)
        if s_in is None:
            s_in = exact_orientation(simplex, self.interior)
            if s_in == 0:
                raise DegeneracyError("interior reference point lies on a facet hyperplane")
            self._orient_sign[f] = s_in
        s_q = exact_orientation(simplex, self.pts[q])
        if s_q == 0:
            raise DegeneracyError(f"point {q} is coplanar with facet {self.verts[f]}")
        return s_q != s_in

    def _add_facets(self, simplices: list[tuple[int, ...]], candidates: list[np.ndarray]):
        arr = np.array(simplices, dtype=np.int64)
        normals, offsets = _hyperplanes(self.pts, arr, self.interior)
        for s, nrm, off, cand in zip(simplices, normals, offsets, candidates):
            f = self.next_id
            self.next_id += 1
            self.verts[f] = s
            self.normal[f] = nrm
            self.offset[f] = float(off)
            conf = self._visible(f, cand)
            self.conflict[f] = conf
            for q in conf.tolist():
                self.sees[q].add(f)
            for r in itertools.combinations(s, self.n - 1):
                self.ridges.setdefault(r, []).append(f)

    def _remove_facet(self, f: int):
        for q in self.conflict.pop(f).tolist():
            self.sees[q].discard(f)
        for r in itertools.combinations(self.verts[f], self.n - 1):
            lst = self.ridges[r]
            lst.remove(f)
            if not lst:
                del self.ridges[r]
        del self.verts[f], self.normal[f], self.offset[f]
        self._orient_sign.pop(f, None)

    def initial_simplex(self) -> list[int]:
        """Pick n+1 points from the head of the insertion order with large volume."""
        pts, n = self.pts, self.n
        head = self.order[: min(len(self.order), 64 * n)]
        chosen = [int(head[0])]
        for _ in range(n):
            base = pts[chosen[0]]
            B = (pts[chosen[1:]] - base).T if len(chosen) > 1 else np.zeros((n, 0))
            Qm = np.linalg.qr(B)[0] if B.shape[1] else np.zeros((n, 0))
            d = pts[head] - base
            resid = d - (d @ Qm) @ Qm.T
            dist = np.linalg.norm(resid, axis=1)
            dist[np.isin(head, chosen)] = -1.0
            k = int(np.argmax(dist))
            if dist[k] <= self.tol:
                # fall back to a scan of the whole order
                d = pts[self.order] - base
                resid = d - (d @ Qm) @ Qm.T
                dist = np.linalg.norm(resid, axis=1)
                dist[np.isin(self.order, chosen)] = -1.0
                k = int(np.argmax(dist))
                if dist[k] <= self.tol:
                    raise DegeneracyError("points do not span R^n affinely")
                chosen.append(int(self.order[k]))
            else:
                chosen.append(int(head[k]))
        return chosen

    def run(self):
        n = self.n
        simplex = self.initial_simplex()
        self.interior = self.pts[simplex].mean(axis=0)
        in_simplex = set(simplex)
        rest = np.array([i for i in self.order.tolist() if i not in in_simplex], dtype=np.int64)
        faces = [tuple(sorted(c)) for c in itertools.combinations(simplex, n)]
        self._add_facets(faces, [rest] * len(faces))
        for p in rest.tolist():
            vis = self.sees[p]
            if not vis:
                continue
            vis = sorted(vis)
            vis_set = set(vis)
            horizon = []
            cands = []
            for f in vis:
                for r in itertools.combinations(self.verts[f], n - 1):
                    owners = self.ridges[r]
                    g = owners[0] if owners[1] == f else owners[1]
                    if g in vis_set:
                        continue
                    horizon.append(tuple(sorted(r + (p,))))
                    c = np.union1d(self.conflict[f], self.conflict[g])
                    cands.append(c[c != p])
            for f in vis:
                self._remove_facet(f)
            self._add_facets(horizon, cands)
        return self


def _assemble(cloud, pts, verts, normals, offsets) -> Hull:
    order = sorted(range(len(verts)), key=lambda i: verts[i])
    facets = [Facet(verts[i], np.asarray(normals[i], dtype=float), float(offsets[i])) for i in order]
    n = pts.shape[1]
    ridge_tmp: dict[tuple[int, ...], list[int]] = {}
    edges: set[tuple[int, int]] = set()
    for fid, f in enumerate(facets):
        for r in itertools.combinations(f.basis, n - 1):
            ridge_tmp.setdefault(r, []).append(fid)
        edges.update(itertools.combinations(f.basis, 2))
    ridges = {}
    for r, lst in ridge_tmp.items():
        if len(lst) != 2:
            raise DegeneracyError(f"ridge {r} is shared by {len(lst)} facets")
        ridges[r] = (lst[0], lst[1])
    return Hull(cloud, facets, ridges, edges)


def convex_hull(cloud, seed: int | None = None, method: str = "incremental") -> Hull:
    """Facets, ridges and edges of conv(A).

    ``method="qhull"`` delegates to scipy's Qhull binding instead of the built-in
    incremental construction; both return the same structure.
    """
    pts = np.asarray(getattr(cloud, "points", cloud), dtype=float)
    if pts.ndim != 2:
        raise ValueError("expected an (M, n) array of points")
    M, n = pts.shape
    if n < 2:
        raise ValueError("dimension must be >= 2")
    if M < n + 1:
        raise ValueError(f"need at least n+1 = {n + 1} points, got {M}")
    if method == "qhull":
        return _qhull(cloud, pts)
    if method != "incremental":
        raise ValueError(f"unknown hull method {method!r}")
    if seed is None:
        seed = int(getattr(cloud, "seed", 0))
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, 0x48554C4C])
    b = _Builder(pts, rng.permutation(M), config.GEOM_TOL).run()
    ids = list(b.verts)
    return _assemble(cloud, pts, [b.verts[i] for i in ids],
                     [b.normal[i] for i in ids], [b.offset[i] for i in ids])


def _qhull(cloud, pts) -> Hull:
    from scipy.spatial import ConvexHull

    h = ConvexHull(pts)
    verts = [tuple(sorted(int(i) for i in s)) for s in h.simplices]
    normals = h.equations[:, :-1]
    scale = np.linalg.norm(normals, axis=1)
    return _assemble(cloud, pts, verts, normals / scale[:, None], -h.equations[:, -1] / scale)


# -- polarity ---------------------------------------------------------------

def contains_origin(hull: Hull, tol: float | None = None) -> bool:
    tol = config.GEOM_TOL if tol is None else tol
    return all(f.support > tol for f in hull.facets)


def polar_vertex_graph(hull: Hull) -> VertexGraph:
    """Vertex-edge graph of P(A): one vertex u/h per facet, one edge per ridge."""
    if not contains_origin(hull):
        raise PolarityError("origin is not interior to conv(A); P(A) is unbounded")
    F = len(hull.facets)
    coords = np.array([f.outward_normal / f.support for f in hull.facets])
    adjacency: list[list[int]] = [[] for _ in range(F)]
    for f, g in hull.ridge_adjacency.values():
        adjacency[f].append(g)
        adjacency[g].append(f)
    for a in adjacency:
        a.sort()
    return VertexGraph(coords, [f.basis for f in hull.facets], adjacency, kind="P")


def hull_vertex_graph(hull: Hull) -> VertexGraph:
    """Vertex-edge graph of Q(A); vertex ids follow the sorted hull-vertex indices."""
    verts = hull.vertices
    pos = {int(v): i for i, v in enumerate(verts)}
    adjacency: list[list[int]] = [[] for _ in verts]
    for a, b in hull.hull_edges:
        adjacency[pos[a]].append(pos[b])
        adjacency[pos[b]].append(pos[a])
    for a in adjacency:
        a.sort()
    coords = hull.points[verts]
    return VertexGraph(coords, [(int(v),) for v in verts], adjacency, kind="Q")


def write_facets_csv(hull: Hull, path) -> None:
    n = hull.dimension
    buf = io.StringIO()
    buf.write("# spherepoly-facets v1\n")
    cols = [f"b{i}" for i in range(n)] + [f"u{i}" for i in range(n)] + ["support"]
    buf.write(",".join(cols) + "\n")
    for f in hull.facets:
        vals = [str(i) for i in f.basis] + [f"{x:.17g}" for x in f.outward_normal] + [f"{f.support:.17g}"]
        buf.write(",".join(vals) + "\n")
    Path(path).write_text(buf.getvalue())
