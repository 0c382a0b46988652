"""Certified lower bounds on graph distances in Q(A).

A shortest edge path a_0..a_l of Q(A) is turned into a curve f on the
sphere along which the owning constraint is always a nearest point of A.
A net subsequence x_0..x_k with jumps in [6 eps, 8 eps] is extracted along f,
and every consecutive pair of occupied eps/2-caps forces a distinct path
vertex. The pair count is therefore a lower bound on l.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .hull import Hull
from .polytope_graph import VertexGraph, bfs_path
from .sphere_geom import SphericalCap, SphericalNet, greedy_separated_net, occupancy, sphere_grid

__all__ = [
    "CurveSample",
    "LBCertificate",
    "NonEdgeError",
    "NoAntipodeError",
    "ResolutionError",
    "SoundnessError",
    "path_to_curve",
    "curve_subsequence",
    "certify_lower_bound",
    "antipodal_distance_experiment",
    "write_certificate_csv",
    "certificate_svg",
]

T_RESOLUTION = 1e-4
T_BISECT = 1e-9


class NonEdgeError(ValueError):
    pass


class NoAntipodeError(RuntimeError):
    pass


class ResolutionError(RuntimeError):
    pass


class SoundnessError(AssertionError):
    pass


@dataclass
class CurveSample:
    """Piecewise normalized-linear curve through the breakpoints.

    ``owners[j]`` is the constraint index that is a nearest point of A on the
    parameter interval [params[j], params[j + 1]].
    """

    params: np.ndarray
    points: np.ndarray
    owners: list[int]

    def __call__(self, t) -> np.ndarray:
        t = np.clip(np.atleast_1d(np.asarray(t, dtype=float)), 0.0, 1.0)
        j = np.clip(np.searchsorted(self.params, t, side="right") - 1, 0, len(self.params) - 2)
        s0, s1 = self.params[j], self.params[j + 1]
        tau = ((t - s0) / (s1 - s0))[:, None]
        v = (1.0 - tau) * self.points[j] + tau * self.points[j + 1]
        v /= np.linalg.norm(v, axis=1)[:, None]
        # breakpoints are returned as stored, without renormalization
        v = np.where(tau == 0.0, self.points[j], v)
        return np.where(tau == 1.0, self.points[j + 1], v)

    def owner_at(self, t) -> np.ndarray:
        t = np.clip(np.atleast_1d(np.asarray(t, dtype=float)), 0.0, 1.0)
        j = np.clip(np.searchsorted(self.params, t, side="right") - 1, 0, len(self.params) - 2)
        return np.asarray(self.owners)[j]

    def argmin_violation(self, A, per_edge: int = 101) -> float:
        """Largest excess of the owner's distance over the nearest distance in A."""
        A = np.asarray(getattr(A, "points", A), dtype=float)
        edges = (len(self.params) - 1) // 2
        t = np.linspace(0.0, 1.0, per_edge * max(edges, 1))
        F = self(t)
        d_near, _ = cKDTree(A).query(F)
        d_own = np.linalg.norm(F - A[self.owner_at(t)], axis=1)
        return float(np.max(d_own - d_near))


def _edge_facet_centers(hull: Hull) -> dict[tuple[int, int], np.ndarray]:
    """For each hull edge, the circumscribed cap center of the
    lexicographically smallest incident facet."""
    centers: dict[tuple[int, int], np.ndarray] = {}
    for f in hull.facets:  # facets are sorted by basis
        c = f.outward_normal if f.support >= 0 else -f.outward_normal
        b = f.basis
        for i in range(len(b)):
            for j in range(i + 1, len(b)):
                centers.setdefault((b[i], b[j]), c)
    return centers


def path_to_curve(hull: Hull, path, centers=None) -> CurveSample:
    """Curve for the edge path a_0..a_l: each edge [a_i, a_i+1] becomes the two
    arcs a_i -> x_i -> a_i+1 through the cap center x_i of an incident facet.

    Edge i occupies parameters [i/l, (i+1)/l] with the owner switch at its midpoint.
    """
    path = [int(a) for a in path]
    if len(path) < 2:
        raise ValueError("path needs at least one edge")
    A = hull.points
    centers = _edge_facet_centers(hull) if centers is None else centers
    ell = len(path) - 1
    params = [0.0]
    pts = [A[path[0]]]
    owners = []
    for i, (a, b) in enumerate(zip(path, path[1:])):
        key = (min(a, b), max(a, b))
        if key not in centers:
            raise NonEdgeError(f"({a}, {b}) is not an edge of Q(A)")
        params += [(i + 0.5) / ell, (i + 1.0) / ell]
        pts += [centers[key], A[b]]
        owners += [a, b]
    params[-1] = 1.0
    return CurveSample(np.array(params), np.array(pts), owners)


def _refine_last(f: CurveSample, x: np.ndarray, eps: float, lo: float, hi: float) -> float:
    """Sup of {t in [lo, hi] : ||f(t) - x|| <= eps} given it holds at lo but not hi."""
    while hi - lo > T_BISECT:
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(f(mid)[0] - x) <= eps:
            lo = mid
        else:
            hi = mid
    return lo


def _last_within(f: CurveSample, T: np.ndarray, F: np.ndarray, x: np.ndarray, eps: float) -> float:
    inside = np.flatnonzero(np.linalg.norm(F - x, axis=1) <= eps)
    if inside.size == 0:
        raise ResolutionError("net point not within eps of any curve sample")
    j = int(inside[-1])
    if j == len(T) - 1:
        return 1.0
    return _refine_last(f, x, eps, float(T[j]), float(T[j + 1]))


def _subsequence(f: CurveSample, N: SphericalNet, eps: float, resolution: float):
    G = int(math.ceil(1.0 / resolution)) + 1
    T = np.linspace(0.0, 1.0, G)
    F = f(T)
    net = N.points
    d0, i0 = N.tree.query(F[0])
    if d0 > 1e-9:
        raise ValueError("f(0) must be a net point")
    seq_idx = [int(i0)]
    seq_t = [_last_within(f, T, F, net[i0], eps)]
    end = F[-1]
    near = N.tree.query_ball_point(F, eps)
    while np.linalg.norm(net[seq_idx[-1]] - end) >= 7.0 * eps:
        x_last = net[seq_idx[-1]]
        j = int(np.searchsorted(T, seq_t[-1], side="left"))
        found = None
        while j < G:
            cand = [c for c in near[j] if np.linalg.norm(net[c] - x_last) >= 6.0 * eps]
            if cand:
                found = j
                break
            j += 1
        if found is None:
            raise ResolutionError("no admissible next net point along the curve")
        # locate the first parameter in (T[j-1], T[j]] where a far net point is within eps
        far = [c for c in N.tree.query_ball_point(F[found], 3.0 * eps)
               if np.linalg.norm(net[c] - x_last) >= 6.0 * eps]
        lo = max(float(T[found - 1]) if found > 0 else 0.0, seq_t[-1])
        hi = float(T[found])

        def hit(t):
            d = np.linalg.norm(net[far] - f(t)[0], axis=1)
            return d.min() <= eps

        if lo >= hi or hit(lo):
            hi = min(lo, hi)
        else:
            while hi - lo > T_BISECT:
                mid = 0.5 * (lo + hi)
                if hit(mid):
                    hi = mid
                else:
                    lo = mid
        t_prime = hi
        d = np.linalg.norm(net[far] - f(t_prime)[0], axis=1)
        ok = np.flatnonzero(d <= eps)
        nxt = int(far[int(ok[np.argmin(d[ok])])]) if ok.size else int(cand[0])
        if nxt in seq_idx:
            raise ResolutionError("subsequence revisited a net point")
        seq_idx.append(nxt)
        seq_t.append(max(_last_within(f, T, F, net[nxt], eps), t_prime))
    return seq_t, seq_idx


def _jumps_ok(net: np.ndarray, idx, eps: float) -> bool:
    if len(idx) < 2:
        return True
    jumps = np.linalg.norm(np.diff(net[idx], axis=0), axis=1)
    return bool(np.all(jumps >= 6.0 * eps - 1e-12) and np.all(jumps <= 8.0 * eps + 1e-9))


def curve_subsequence(f: CurveSample, N: SphericalNet, eps: float,
                      resolution: float = T_RESOLUTION) -> list[tuple[float, int]]:
    """Net subsequence (t_i, index of x_i) along f with jumps in [6 eps, 8 eps].

    Parameters are located on a grid of the given resolution and refined by
    bisection. If a jump leaves the window the grid is refined tenfold once.
    """
    seq_t, seq_idx = _subsequence(f, N, eps, resolution)
    if not _jumps_ok(N.points, seq_idx, eps):
        seq_t, seq_idx = _subsequence(f, N, eps, resolution / 10.0)
        if not _jumps_ok(N.points, seq_idx, eps):
            raise ResolutionError("jump window [6 eps, 8 eps] violated after refinement")
    return list(zip(seq_t, seq_idx))


@dataclass
class LBCertificate:
    net: SphericalNet
    a_plus: int
    a_minus: int
    eps: float
    path: list[int]
    sequence: list[tuple[float, int]]
    occupied: list[bool]
    pair_count: int
    k0_minus: int
    k0_plus: int
    argmin_violation: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.sequence) - 1

    @property
    def certified_lb(self) -> int:
        return self.pair_count

    @property
    def distance(self) -> int:
        return len(self.path) - 1

    @property
    def sound(self) -> bool:
        return self.pair_count <= self.distance

    def check(self, curve: CurveSample | None = None) -> list[str]:
        """Structural properties of the subsequence (empty list when all hold)."""
        eps, X = self.eps, self.net.points
        idx = [i for _, i in self.sequence]
        problems = []
        if len(set(idx)) != len(idx):
            problems.append("net points repeat")
        if not _jumps_ok(X, idx, eps):
            problems.append("jump outside [6 eps, 8 eps]")
        ts = [t for t, _ in self.sequence]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            problems.append("parameters not strictly increasing")
        if curve is not None:
            end = curve(1.0)[0]
            if not np.linalg.norm(X[idx[-1]] - end) < 7.0 * eps:
                problems.append("last net point not within 7 eps of f(1)")
            for t, i in self.sequence:
                if np.linalg.norm(curve(t)[0] - X[i]) > eps + 1e-9:
                    problems.append("f(t_i) farther than eps from x_i")
                    break
        if not self.sound:
            problems.append("pair count exceeds path length")
        return problems


def _choose_endpoints(A: np.ndarray, rng) -> tuple[int, int]:
    a_plus = int(rng.integers(A.shape[0]))
    d = np.linalg.norm(A - A[a_plus], axis=1)
    a_minus = int(np.argmax(d))
    if d[a_minus] < 1.0:
        raise NoAntipodeError("no point at distance >= 1 from a_plus")
    return a_plus, a_minus


def certify_lower_bound(cloud, hull: Hull, Q_graph: VertexGraph, c6: float = 1.0,
                        seed: int = 0, strict: bool = True) -> LBCertificate:
    """Certified lower bound on dist_Q(a_plus, a_minus) <= diam(Q(A)).

    a_plus is uniform from A, a_minus is the point farthest from it. The
    net has separation eps = c6 m^(-1/(n-1)), is pinned at a_plus, and
    takes candidates from a fine sphere grid together with the curve samples.
    """
    A = np.asarray(getattr(cloud, "points", cloud), dtype=float)
    n = A.shape[1]
    m = float(getattr(cloud, "intensity", A.shape[0]))
    rng = np.random.default_rng(seed)
    a_plus, a_minus = _choose_endpoints(A, rng)
    eps = c6 * m ** (-1.0 / (n - 1))
    if not 0 < eps <= 2:
        raise ValueError(f"eps = {eps} outside (0, 2]; lower c6")
    vpath = bfs_path(Q_graph, Q_graph.vertex_of_point(a_plus), Q_graph.vertex_of_point(a_minus))
    path = [Q_graph.bases[v][0] for v in vpath]
    curve = path_to_curve(hull, path)
    samples = curve(np.linspace(0.0, 1.0, int(math.ceil(1.0 / T_RESOLUTION)) + 1))
    cands = np.vstack([sphere_grid(n, eps / 8.0), samples])
    net = greedy_separated_net(n, eps, seed=int(rng.integers(2**63)), pin=A[a_plus], candidates=cands)
    seq = curve_subsequence(curve, net, eps)
    occ = [occupancy(A, SphericalCap(net.points[i], eps / 2.0)) > 0 for _, i in seq]
    pairs = sum(1 for x, y in zip(occ, occ[1:]) if x and y)
    k0 = math.ceil(1.0 / (8.0 * eps))
    cert = LBCertificate(net, a_plus, a_minus, eps, path, seq, occ, pairs, k0 - 1, k0 + 1,
                         curve.argmin_violation(A))
    if cert.k < cert.k0_minus:
        cert.notes.append(f"k={cert.k} below k0={cert.k0_minus}")
    if strict and not cert.sound:
        raise SoundnessError(f"pair count {pairs} exceeds path length {cert.distance}")
    return cert


def antipodal_distance_experiment(n: int, m: float, trials: int, seed: int = 0) -> dict:
    """Exact Q(A) distance between the maximizers of e1 and -e1 over seeded trials."""
    from .hull import convex_hull, hull_vertex_graph
    from .polytope_graph import bfs_distance
    from .sampler import derive_seed, sample_poisson_sphere

    if trials < 1:
        raise ValueError("trials must be >= 1")
    dists = []
    for t in range(trials):
        cloud = sample_poisson_sphere(n, m, derive_seed(seed, t))
        Q = hull_vertex_graph(convex_hull(cloud))
        hi = int(np.argmax(cloud.points[:, 0]))
        lo = int(np.argmin(cloud.points[:, 0]))
        dists.append(bfs_distance(Q, Q.vertex_of_point(hi), Q.vertex_of_point(lo)))
    d = np.array(dists, dtype=float)
    return {"distances": dists, "mean": float(d.mean()), "median": float(np.median(d)),
            "std": float(d.std(ddof=1)) if len(d) > 1 else 0.0}


def write_certificate_csv(cert: LBCertificate, path, diameter: int | None = None) -> None:
    buf = io.StringIO()
    buf.write("# spherepoly-certificate v1\n")
    n = cert.net.points.shape[1]
    buf.write("i,t," + ",".join(f"x{j}" for j in range(n)) + ",occupied\n")
    for i, ((t, idx), b) in enumerate(zip(cert.sequence, cert.occupied)):
        xs = ",".join(f"{v:.17g}" for v in cert.net.points[idx])
        buf.write(f"{i},{t:.17g},{xs},{int(b)}\n")
    buf.write(f"# pair_count={cert.pair_count} distance={cert.distance} "
              f"diameter={'' if diameter is None else diameter} eps={cert.eps:.17g}\n")
    Path(path).write_text(buf.getvalue())


def certificate_svg(cert: LBCertificate, hull: Hull, path) -> None:
    """Orthographic drawing (n=3) of the curve, the subsequence and its eps/2 caps."""
    from .svg import Figure, view_basis

    A = hull.points
    if A.shape[1] != 3:
        raise ValueError("certificate drawings need n = 3")
    curve = path_to_curve(hull, cert.path)
    F = curve(np.linspace(0, 1, 2001))
    view = F.mean(axis=0)
    if np.linalg.norm(view) < 1e-9:
        view = np.array([0.0, 0.0, 1.0])
    B = view_basis(view)
    front = A @ (view / np.linalg.norm(view)) > 0
    fig = Figure()
    fig.circle([0, 0], 1.0, stroke="lightgray")
    fig.points(A[front] @ B, r=1.0, fill="gray")
    fig.polyline(F @ B, stroke="black", width=1.5)
    for (_, i), occ in zip(cert.sequence, cert.occupied):
        x = cert.net.points[i] @ B
        fig.circle(x, cert.eps / 2.0, stroke="blue", fill="blue" if occ else "none")
    fig.points(A[[cert.a_plus, cert.a_minus]] @ B, r=3.0, fill="red")
    fig.text([-1.0, 1.05], f"pairs={cert.pair_count} distance={cert.distance}")
    fig.save(path)
