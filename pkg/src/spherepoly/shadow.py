"""Shadow vertices, shadow paths, monotone local paths and the stitched path.

A vertex v of P(A) maximizes exactly the objectives in cone(A_v), the cone of
its tight constraints. It is a shadow vertex for a plane W when that cone
meets W away from the origin, which for a simple vertex is a two-variable
feasibility problem solved here in closed form.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from . import config
from .polytope_graph import VertexGraph, bfs_path
from .sphere_geom import (
    SphericalCap,
    SphericalNet,
    geodesic_subdivide,
    is_dense_for,
    occupancy,
    unit,
)

__all__ = [
    "PlaneSpan",
    "ShadowRecord",
    "LocalityEvent",
    "LocalityReport",
    "StitchedPath",
    "AdjacencyError",
    "UnreachableError",
    "maximizer",
    "shadow_mask",
    "is_shadow_vertex",
    "projection_polygon_vertices",
    "shadow_record",
    "shadow_path",
    "monotone_local_path",
    "check_locality_event",
    "verify_tight_constraint_locality",
    "stitched_diameter_path",
    "shadow_size_stats",
    "write_shadow_csv",
    "shadow_svg",
]


class AdjacencyError(RuntimeError):
    """Consecutive vertices of a claimed path are not adjacent."""


class UnreachableError(RuntimeError):
    """Target not reachable inside the superlevel subgraph."""


@dataclass(frozen=True)
class PlaneSpan:
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        u1 = np.asarray(self.u1, dtype=float)
        u2 = np.asarray(self.u2, dtype=float)
        if abs(np.linalg.norm(u1) - 1) > 1e-9 or abs(np.linalg.norm(u2) - 1) > 1e-9:
            raise ValueError("plane basis vectors must be unit")
        if abs(u1 @ u2) > config.UNIT_TOL * 100:
            raise ValueError("plane basis vectors must be orthogonal")
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)

    @classmethod
    def from_vectors(cls, a, b) -> "PlaneSpan":
        """Orthonormal basis of span(a, b) with u1 along a (Gram-Schmidt)."""
        u1 = unit(a)
        b = np.asarray(b, dtype=float)
        r = b - (b @ u1) * u1
        if np.linalg.norm(r) < 1e-12:
            raise ValueError("vectors are linearly dependent")
        r = unit(r)
        r = unit(r - (r @ u1) * u1)
        return cls(u1, r)

    @classmethod
    def random(cls, n: int, rng) -> "PlaneSpan":
        g = rng.standard_normal((n, 2))
        q, _ = np.linalg.qr(g)
        return cls(q[:, 0], q[:, 1])

    @property
    def basis(self) -> np.ndarray:
        return np.column_stack([self.u1, self.u2])

    def coords(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.basis

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        c = self.coords(x)
        return bool(np.linalg.norm(x - self.basis @ c) <= tol * max(1.0, np.linalg.norm(x)))


@dataclass
class ShadowRecord:
    plane: PlaneSpan
    shadow_vertex_ids: list[int]
    angles: np.ndarray

    @property
    def size(self) -> int:
        return len(self.shadow_vertex_ids)


@dataclass
class LocalityEvent:
    x: np.ndarray
    y: np.ndarray
    eps: float
    p: float
    dense_ok: bool
    occupancy_ok: bool
    max_occupancy: int = 0
    threshold: float = 0.0

    @property
    def holds(self) -> bool:
        return self.dense_ok and self.occupancy_ok


# -- basic queries ------------------------------------------------------------

def maximizer(G: VertexGraph, w) -> int:
    """Index of the vertex maximizing <w, .>; exact ties go to the smallest index."""
    w = np.asarray(w, dtype=float)
    if not np.any(w):
        raise ValueError("objective must be nonzero")
    return int(np.argmax(G.coords @ w))


def _basis_matrix(G: VertexGraph, A: np.ndarray, ids) -> np.ndarray:
    return A[np.array([G.bases[i] for i in ids], dtype=np.int64)]


def _cone_directions(G: VertexGraph, A: np.ndarray, W: PlaneSpan, ids):
    """For each vertex: shadow flag and the W-angle of an objective it maximizes.

    Writes objectives c = alpha u1 + beta u2 in the basis of tight constraints,
    lambda = R (alpha, beta); the vertex maximizes c iff lambda >= 0. The
    2D cone {R c >= 0} is nonzero iff one of its candidate boundary rays
    +-J r_i is feasible.
    """
    Mv = _basis_matrix(G, A, ids)                                    # (k, n, n), rows a_i
    rhs = np.broadcast_to(W.basis, (Mv.shape[0],) + W.basis.shape)  # (k, n, 2)
    R = np.linalg.solve(np.transpose(Mv, (0, 2, 1)), rhs)           # (k, n, 2)
    perp = np.stack([-R[..., 1], R[..., 0]], axis=-1)               # J r_i
    cand = np.concatenate([perp, -perp], axis=1)                    # (k, 2n, 2)
    cn = np.linalg.norm(cand, axis=2, keepdims=True)
    cand = np.divide(cand, cn, out=np.zeros_like(cand), where=cn > 0)
    vals = np.einsum("kid,kjd->kji", R, cand)                       # (k, 2n, n)
    scale = np.linalg.norm(R, axis=2)[:, None, :]
    ok = np.all(vals >= -config.GEOM_TOL * scale, axis=2) & (cn[..., 0] > 0)
    is_shadow = ok.any(axis=1)
    mean_dir = np.einsum("kj,kjd->kd", ok.astype(float), cand)
    angles = np.arctan2(mean_dir[:, 1], mean_dir[:, 0])
    return is_shadow, angles


def shadow_mask(G: VertexGraph, A, W: PlaneSpan) -> np.ndarray:
    """Boolean shadow indicator for every vertex of G."""
    A = np.asarray(getattr(A, "points", A), dtype=float)
    mask, _ = _cone_directions(G, A, W, range(len(G)))
    return mask


def is_shadow_vertex(G: VertexGraph, A, v: int, W: PlaneSpan) -> bool:
    A = np.asarray(getattr(A, "points", A), dtype=float)
    mask, _ = _cone_directions(G, A, W, [v])
    return bool(mask[0])


def projection_polygon_vertices(G: VertexGraph, W: PlaneSpan) -> set[int]:
    """Vertices of G whose projection is a vertex of the 2D projection polygon."""
    proj = W.coords(G.coords)
    if proj.shape[0] < 3:
        return set(range(proj.shape[0]))
    return set(int(i) for i in ConvexHull(proj).vertices)


def _check_adjacent(G: VertexGraph, path) -> None:
    for x, y in zip(path, path[1:]):
        if y not in G.adjacency[x]:
            raise AdjacencyError(f"vertices {x} and {y} are not adjacent")


def shadow_record(G: VertexGraph, A, W: PlaneSpan) -> ShadowRecord:
    """Shadow vertices sorted by the angle of an objective in W they maximize."""
    A = np.asarray(getattr(A, "points", A), dtype=float)
    mask, angles = _cone_directions(G, A, W, range(len(G)))
    ids = np.flatnonzero(mask)
    order = np.argsort(angles[ids], kind="stable")
    ids = ids[order]
    rec = ShadowRecord(W, [int(i) for i in ids], angles[ids])
    if rec.size > 2:
        _check_adjacent(G, rec.shadow_vertex_ids + rec.shadow_vertex_ids[:1])
    return rec


def _walk(rec: ShadowRecord, s: int, t: int, step: int) -> list[int]:
    ids = rec.shadow_vertex_ids
    pos = {v: i for i, v in enumerate(ids)}
    if s not in pos or t not in pos:
        raise AdjacencyError("maximizer is not a shadow vertex")
    i, out = pos[s], [s]
    while out[-1] != t:
        i = (i + step) % len(ids)
        out.append(ids[i])
        if len(out) > len(ids):
            raise AdjacencyError("target not met while walking the shadow")
    return out


def shadow_path(G: VertexGraph, A, W: PlaneSpan, w1, w2, record: ShadowRecord | None = None) -> list[int]:
    """Shadow path from maximizer(w1) to maximizer(w2), turning from w1 toward w2."""
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    if not (W.contains(w1) and W.contains(w2)):
        raise ValueError("objectives must lie in the plane")
    c1, c2 = W.coords(w1), W.coords(w2)
    cross = c1[0] * c2[1] - c1[1] * c2[0]
    s, t = maximizer(G, w1), maximizer(G, w2)
    if s == t:
        return [s]
    if abs(cross) <= 1e-14 * np.linalg.norm(c1) * np.linalg.norm(c2):
        raise ValueError("objectives must be linearly independent")
    rec = shadow_record(G, A, W) if record is None else record
    path = _walk(rec, s, t, 1 if cross > 0 else -1)
    _check_adjacent(G, path)
    _check_monotone(G, path, w2)
    return path


def _check_monotone(G: VertexGraph, path, w) -> None:
    vals = G.coords[path] @ np.asarray(w, dtype=float)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if np.any(np.diff(vals) < -config.GEOM_TOL * scale):
        raise AdjacencyError("path is not monotone in the target objective")


def monotone_local_path(G: VertexGraph, w, w2) -> tuple[list[int], int]:
    """Shortest path from maximizer(w) to maximizer(w2) using only vertices v
    with <w2, v> >= <w2, maximizer(w)>."""
    w2 = np.asarray(w2, dtype=float)
    s, t = maximizer(G, w), maximizer(G, w2)
    vals = G.coords @ w2
    level = vals[s] - config.GEOM_TOL * max(1.0, abs(vals[s]))
    path = bfs_path(G, s, t, allowed=vals >= level)
    if path is None:
        raise UnreachableError("superlevel subgraph does not connect the maximizers")
    return path, len(path) - 1


# -- locality -----------------------------------------------------------------

def check_locality_event(A, x, y, eps: float, p: float, samples: int = 101) -> LocalityEvent:
    """Evaluate the density and occupancy clauses of the (x, y)-locality event."""
    x = unit(x)
    y = unit(y)
    n = x.shape[0]
    pts = np.asarray(getattr(A, "points", A), dtype=float)
    radius = min(2.0, float(np.linalg.norm(x - y)) + 4.0 * eps)
    dense = pts.size > 0 and is_dense_for(pts, SphericalCap(x, radius), eps)
    threshold = 45.0 * math.e * 2.0 ** n * math.log(1.0 / p)
    occ_r = min(2.0, (2.0 + 2.0 / n) * eps)
    worst = 0
    for s in np.linspace(0.0, 1.0, samples):
        z = (1 - s) * x + s * y
        nz = np.linalg.norm(z)
        if nz == 0:
            continue
        worst = max(worst, occupancy(pts, SphericalCap(z / nz, occ_r)))
    return LocalityEvent(x, y, eps, p, bool(dense), worst <= threshold, worst, threshold)


@dataclass
class LocalityReport:
    eps: float
    checked: int = 0
    bound_violations: list[tuple[int, int, float, float]] = field(default_factory=list)
    norm_violations: list[tuple[int, float]] = field(default_factory=list)
    max_ratio: float = 0.0

    @property
    def clean(self) -> bool:
        return not self.bound_violations and not self.norm_violations


def verify_tight_constraint_locality(G: VertexGraph, A, w1, w2, eps: float, samples: int = 11) -> LocalityReport:
    """Check ||w2 - a|| <= 2 eps + ||w1 - w2|| for every tight a on every
    monotone local path from a point of [w1, w2] to w2, and the vertex-norm bound."""
    A = np.asarray(getattr(A, "points", A), dtype=float)
    w1 = unit(w1)
    w2 = unit(w2)
    bound = 2.0 * eps + float(np.linalg.norm(w1 - w2))
    norm_cap = 1.0 / (1.0 - eps * eps / 2.0)
    rep = LocalityReport(eps)
    seen = set()
    for s in np.linspace(0.0, 1.0, samples):
        w = unit((1 - s) * w1 + s * w2)
        path, _ = monotone_local_path(G, w, w2)
        for v in path:
            if v in seen:
                continue
            seen.add(v)
            rep.checked += 1
            nv = float(np.linalg.norm(G.coords[v]))
            if nv > norm_cap + 1e-9:
                rep.norm_violations.append((v, nv))
            for a in G.bases[v]:
                d = float(np.linalg.norm(w2 - A[a]))
                rep.max_ratio = max(rep.max_ratio, d / bound)
                if d > bound + 1e-9:
                    rep.bound_violations.append((v, a, d, bound))
    return rep


# -- stitched path ------------------------------------------------------------

@dataclass
class StitchedPath:
    path: list[int]
    local_length: int
    shadow_length: int
    net_point: np.ndarray
    shadow_segments: list[int] = field(default_factory=list)

    @property
    def length(self) -> int:
        return len(self.path) - 1


def _target_axis(n: int) -> np.ndarray:
    e1 = np.zeros(n)
    e1[0] = 1.0
    return e1


def stitched_diameter_path(G: VertexGraph, A, net: SphericalNet, w, eps: float | None = None) -> StitchedPath:
    """Path from maximizer(w) to maximizer(e1) through the nearest net point.

    Segment one is a monotone local path toward the net point n_w; segment
    two is the shadow path in span(e1, n_w) from n_w to e1. When ``eps`` is
    given, the shadow segment is also split into pieces between maximizers of
    consecutive points of an eps-fine subdivision of the arc (the slice counts).
    """
    A = np.asarray(getattr(A, "points", A), dtype=float)
    w = unit(w)
    n = w.shape[0]
    e1 = _target_axis(n)
    start, goal = maximizer(G, w), maximizer(G, e1)
    nw = net.points[net.nearest(w)]
    if start == goal:
        return StitchedPath([start], 0, 0, nw)
    local, K0 = monotone_local_path(G, w, nw)
    mid = local[-1]
    if mid == goal:
        return StitchedPath(local, K0, 0, nw)
    c = float(nw @ e1)
    if c < -1.0 + 1e-12:
        # antipodal net point: any plane through e1 works; increasing angle
        # from -e1 passes through -e2
        e2 = np.zeros(n)
        e2[1] = 1.0
        W = PlaneSpan(e1, e2)
        rec = shadow_record(G, A, W)
        shadow = _walk(rec, mid, goal, 1)
        _check_monotone(G, shadow, e1)
        arc = [nw, -e2, e1]
    else:
        W = PlaneSpan.from_vectors(e1, nw)
        rec = shadow_record(G, A, W)
        shadow = shadow_path(G, A, W, nw, e1, record=rec)
        arc = [nw, e1]
    _check_adjacent(G, shadow)
    pieces = []
    if eps is not None:
        pts = [arc[0]]
        for a, b in zip(arc, arc[1:]):
            k = max(1, math.ceil(float(np.linalg.norm(a - b)) / eps))
            pts.extend(geodesic_subdivide(a, b, k)[1:])
        pos = {v: i for i, v in enumerate(shadow)}
        marks = [pos[maximizer(G, q)] for q in pts]
        pieces = [b - a for a, b in zip(marks, marks[1:])]
    full = local + shadow[1:]
    _check_adjacent(G, full)
    return StitchedPath(full, K0, len(shadow) - 1, nw, pieces)


# -- statistics ---------------------------------------------------------------

def shadow_size_stats(n: int, m: float, plane: PlaneSpan | None, trials: int, p: float,
                      seed: int = 0, c1: float = 1.0, c2: float = 1.0, cU: float = 1.0):
    """Empirical mean and maximal deviation of |S(P(A), W)| and the analytic t_p."""
    from .hull import convex_hull, contains_origin, polar_vertex_graph
    from .prob_bounds import shadow_tail_params
    from .sampler import derive_seed, sample_poisson_sphere

    if trials < 2:
        raise ValueError("trials must be >= 2")
    sizes = []
    for t in range(trials):
        s = derive_seed(seed, t)
        cloud = sample_poisson_sphere(n, m, s)
        W = plane if plane is not None else PlaneSpan.random(n, np.random.default_rng([s, 1]))
        h = convex_hull(cloud)
        if not contains_origin(h):
            continue
        G = polar_vertex_graph(h)
        sizes.append(shadow_record(G, cloud.points, W).size)
    sizes = np.array(sizes, dtype=float)
    mean = float(sizes.mean())
    dev = float(np.max(np.abs(sizes - mean)))
    return mean, dev, shadow_tail_params(m, n, p, cU, c1, c2).t_p


def write_shadow_csv(rec: ShadowRecord, path, stitched: StitchedPath | None = None) -> None:
    buf = io.StringIO()
    buf.write("# spherepoly-shadow v1\n")
    buf.write("vertex,angle\n")
    for v, a in zip(rec.shadow_vertex_ids, rec.angles):
        buf.write(f"{v},{a:.17g}\n")
    if stitched is not None:
        buf.write("# segments\nsegment,length\n")
        buf.write(f"local,{stitched.local_length}\nshadow,{stitched.shadow_length}\n")
        for i, k in enumerate(stitched.shadow_segments):
            buf.write(f"K{i},{k}\n")
    Path(path).write_text(buf.getvalue())


def shadow_svg(G: VertexGraph, rec: ShadowRecord, path, stitched: StitchedPath | None = None) -> None:
    """Projection of the vertices onto W with the shadow polygon and, optionally,
    a stitched path (local segment dashed)."""
    from .svg import Figure

    W = rec.plane
    proj = W.coords(G.coords)
    fig = Figure()
    fig.points(proj, r=1.0, fill="lightgray")
    fig.polyline(proj[rec.shadow_vertex_ids], stroke="black", width=1.5, closed=True)
    if stitched is not None:
        k = stitched.local_length
        fig.polyline(proj[stitched.path[: k + 1]], stroke="red", width=2.0, dash="4,3")
        fig.polyline(proj[stitched.path[k:]], stroke="red", width=2.0)
        fig.points(proj[stitched.path[:1]], r=3.0, fill="red")
    fig.text(proj.min(axis=0), f"|S|={rec.size}")
    fig.save(path)
