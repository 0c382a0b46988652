"""Spherical caps, density radii, nets and geodesics on S^{n-1}.

All cap radii are chordal: C(w, r) = {x in S^{n-1} : ||w - x|| <= r}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import betainc

from . import config

__all__ = [
    "SphericalCap",
    "DensityParams",
    "SphericalNet",
    "InfeasibleTargetError",
    "unit",
    "cap_measure",
    "cap_ratio_bounds",
    "precise_cap_bounds",
    "solve_epsilon",
    "sphere_grid",
    "cap_probes",
    "is_dense_for",
    "occupancy",
    "max_occupancy_bound",
    "greedy_separated_net",
    "geodesic_subdivide",
]

SQRT2 = math.sqrt(2.0)


class InfeasibleTargetError(ValueError):
    """Requested cap measure is not below 1/12."""


def unit(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    nrm = np.linalg.norm(x)
    if nrm == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return x / nrm


def _check_unit(x: np.ndarray, what: str = "vector") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] < 2:
        raise ValueError(f"{what} must be a 1-d array of length >= 2")
    if abs(np.linalg.norm(x) - 1.0) > config.UNIT_TOL * 1e3:
        raise ValueError(f"{what} is not unit norm (norm={np.linalg.norm(x)!r})")
    return x


@dataclass(frozen=True)
class SphericalCap:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = _check_unit(self.center, "cap center")
        if not 0.0 <= self.radius <= 2.0:
            raise ValueError(f"cap radius must lie in [0, 2], got {self.radius}")
        object.__setattr__(self, "center", c)

    @property
    def dimension(self) -> int:
        return self.center.shape[0]

    def measure(self) -> float:
        return cap_measure(self.dimension, self.radius)

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.norm(pts - self.center, axis=1) <= self.radius


@dataclass(frozen=True)
class DensityParams:
    """Radius at which a Poisson(m) sample is dense with failure probability p."""

    m: float
    n: int
    p: float
    epsilon: float

    @property
    def target(self) -> float:
        return 3.0 * math.e * math.log(1.0 / self.p) / self.m

    def caps_sandwich(self) -> tuple[float, float]:
        """Lower and upper bounds on epsilon^(n-1) claimed for this radius."""
        L = math.log(1.0 / self.p)
        lo = 12.0 * math.e * L / self.m
        hi = SQRT2 ** (self.n - 1) * 18.0 * math.sqrt(self.n) * L / self.m
        return lo, hi


@dataclass
class SphericalNet:
    points: np.ndarray
    separation: float
    _tree: cKDTree | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree

    def nearest(self, x) -> int:
        _, idx = self.tree.query(np.asarray(x, dtype=float))
        return int(idx)

    def min_separation(self) -> float:
        if len(self) < 2:
            return math.inf
        d, _ = self.tree.query(self.points, k=2)
        return float(d[:, 1].min())


# -- cap measures -----------------------------------------------------------

def cap_measure(n: int, r: float) -> float:
    """Normalized surface measure of a chordal cap of radius r on S^{n-1}.

    The cap {x : <x,v> >= 1 - r^2/2} has polar angle theta with
    sin^2(theta) = r^2 (1 - r^2/4); its measure is I_{sin^2 theta}((n-1)/2, 1/2) / 2,
    mirrored past the hemisphere.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if not 0.0 <= r <= 2.0:
        raise ValueError(f"radius must lie in [0, 2], got {r}")
    if r == 0.0:
        return 0.0
    if r == 2.0:
        return 1.0
    x = min(r * r * (1.0 - r * r / 4.0), 1.0)
    half = 0.5 * float(betainc((n - 1) / 2.0, 0.5, x))
    return half if r <= SQRT2 else 1.0 - half


def cap_ratio_bounds(n: int, eps: float, s: float) -> tuple[float, float]:
    """Return (sigma((1+s)eps)/(1+s)^(n-1), sigma((1-s)eps)/(1-s)^(n-1)).

    For n >= 3 these bracket sigma(eps). On the circle (n = 2) the ordering
    is reversed because the integrand exponent (n-3)/2 is negative.
    """
    if s < 0 or eps < 0:
        raise ValueError("s and eps must be non-negative")
    if (1.0 + s) * eps > 2.0:
        raise ValueError("(1+s)*eps must not exceed 2")
    if s >= 1.0 or eps > 2.0:
        raise ValueError("need s < 1 and eps <= 2")
    lower = cap_measure(n, (1.0 + s) * eps) / (1.0 + s) ** (n - 1)
    upper = cap_measure(n, (1.0 - s) * eps) / (1.0 - s) ** (n - 1)
    return lower, upper


def precise_cap_bounds(n: int, eps: float) -> tuple[float, float]:
    """Two-sided estimate of sigma(C(v, eps)) valid for eps <= sqrt(2(1 - 2/sqrt(n)))."""
    if n < 4:
        raise ValueError("the estimate has an empty range for n < 4")
    hi = math.sqrt(2.0 * (1.0 - 2.0 / math.sqrt(n)))
    if not 0.0 <= eps <= hi:
        raise ValueError(f"eps must lie in [0, {hi}]")
    base = (eps * math.sqrt(1.0 - eps * eps / 4.0)) ** (n - 1) / ((1.0 - eps * eps / 2.0) * math.sqrt(n))
    return base / 6.0, base / 2.0


def solve_epsilon(m: float, n: int, p: float) -> DensityParams:
    """Radius eps with sigma(C(v, eps)) = 3e log(1/p) / m, by bisection."""
    if m <= 0 or not 0.0 < p < 1.0:
        raise ValueError("need m > 0 and 0 < p < 1")
    target = 3.0 * math.e * math.log(1.0 / p) / m
    if target >= 1.0 / 12.0:
        raise InfeasibleTargetError(f"target cap measure {target:.6g} is not below 1/12")
    lo, hi = 0.0, SQRT2
    # relative stopping rule keeps the target error small even for tiny eps
    for _ in range(400):
        if hi - lo <= config.BISECT_TOL * hi:
            break
        mid = 0.5 * (lo + hi)
        if cap_measure(n, mid) < target:
            lo = mid
        else:
            hi = mid
    return DensityParams(m=m, n=n, p=p, epsilon=0.5 * (lo + hi))


# -- probe grids ------------------------------------------------------------

def sphere_grid(n: int, delta: float, max_points: int = 20_000_000) -> np.ndarray:
    """Deterministic delta-net of S^{n-1}.

    Cell centers of a regular grid on each face of the cube [-1, 1]^n,
    radially projected. Radial projection from outside the ball is
    1-Lipschitz, so the covering radius is at most the half-diagonal of a
    face cell, which is kept <= delta.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    k = max(1, math.ceil(math.sqrt(n - 1) / delta))  # cells per face side
    total = 2 * n * k ** (n - 1)
    if total > max_points:
        raise MemoryError(f"grid would have {total} points (n={n}, delta={delta})")
    ticks = -1.0 + (2.0 * np.arange(k) + 1.0) / k
    face = np.stack(np.meshgrid(*([ticks] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1)
    out = np.empty((total, n))
    row = 0
    for axis in range(n):
        for sign in (1.0, -1.0):
            blk = out[row: row + face.shape[0]]
            blk[:, :axis] = face[:, :axis]
            blk[:, axis] = sign
            blk[:, axis + 1:] = face[:, axis:]
            row += face.shape[0]
    out /= np.linalg.norm(out, axis=1)[:, None]
    return out


def cap_probes(cap: SphericalCap, delta: float) -> np.ndarray:
    """Grid points that delta-cover ``cap`` (some may lie up to delta outside)."""
    grid = sphere_grid(cap.dimension, delta)
    if cap.radius >= 2.0:
        return grid
    keep = np.linalg.norm(grid - cap.center, axis=1) <= cap.radius + delta
    return grid[keep]


def _points(A) -> np.ndarray:
    pts = np.asarray(getattr(A, "points", A), dtype=float)
    return pts if pts.ndim == 2 else pts.reshape(0, 0)


def is_dense_for(A, cap: SphericalCap, eps: float) -> bool:
    """Conservative test that A is eps-dense for ``cap``.

    Every probe of an (eps/10)-grid over the cap must be within 0.9 eps of A.
    A True answer is sound; False may be a false negative near the margin.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    pts = _points(A)
    probes = cap_probes(cap, eps / 10.0)
    if probes.shape[0] == 0:
        return True
    if pts.shape[0] == 0:
        return False
    d, _ = cKDTree(pts).query(probes, distance_upper_bound=0.9 * eps)
    return bool(np.all(np.isfinite(d)))


def occupancy(A, cap: SphericalCap) -> int:
    pts = _points(A)
    if pts.shape[0] == 0:
        return 0
    return int(np.count_nonzero(np.linalg.norm(pts - cap.center, axis=1) <= cap.radius))


def max_occupancy_bound(A, radius: float, n: int, delta: float | None = None) -> int:
    """Upper bound on max_v |A ∩ C(v, radius)| over all centers v.

    Every center is within delta of a grid probe, so the probe cap of radius
    radius + delta contains the original cap.
    """
    pts = _points(A)
    if pts.shape[0] == 0:
        return 0
    delta = radius / 10.0 if delta is None else delta
    probes = sphere_grid(n, delta)
    counts = cKDTree(pts).query_ball_point(probes, min(radius + delta, 2.0), return_length=True)
    return int(np.max(counts))


# -- nets and geodesics -----------------------------------------------------

def greedy_separated_net(
    n: int,
    eps: float,
    seed: int | None = 0,
    pin=None,
    candidates: np.ndarray | None = None,
    resolution: float | None = None,
) -> SphericalNet:
    """Maximal eps-separated subset of a shuffled candidate stream.

    The stream is ``pin`` (kept first) followed by the shuffled candidates,
    a resolution-fine sphere grid by default. Output points are pairwise
    > eps apart and every candidate lies within eps of some output point.
    """
    if not 0.0 < eps <= 2.0:
        raise ValueError("eps must lie in (0, 2]")
    rng = np.random.default_rng(seed)
    if candidates is None:
        candidates = sphere_grid(n, eps / 8.0 if resolution is None else resolution)
    cand = np.array(candidates, dtype=float, copy=True)
    rng.shuffle(cand, axis=0)
    if pin is not None:
        cand = np.vstack([_check_unit(np.asarray(pin, dtype=float), "pin")[None, :], cand])
    if cand.shape[0] == 0:
        return SphericalNet(np.empty((0, n)), eps)
    tree = cKDTree(cand)
    alive = np.ones(cand.shape[0], dtype=bool)
    chosen = []
    # slack absorbs rounding so that e.g. float antipodes count as distance eps=2
    reach = eps * (1.0 + 1e-12)
    for i in range(cand.shape[0]):
        if not alive[i]:
            continue
        chosen.append(i)
        alive[tree.query_ball_point(cand[i], reach)] = False
    return SphericalNet(cand[chosen], eps)


def geodesic_subdivide(w1, w2, k: int) -> list[np.ndarray]:
    """k+1 equally spaced points on the shortest great-circle arc from w1 to w2."""
    w1 = _check_unit(w1, "w1")
    w2 = _check_unit(w2, "w2")
    if k < 1:
        raise ValueError("k must be >= 1")
    if np.linalg.norm(w1 + w2) < 1e3 * config.UNIT_TOL:
        raise ValueError("antipodal endpoints have no unique geodesic")
    c = float(np.clip(w1 @ w2, -1.0, 1.0))
    theta = math.acos(c)
    if theta < 1e-15:
        return [w1.copy() for _ in range(k + 1)]
    ortho = w2 - c * w1
    ortho /= np.linalg.norm(ortho)
    pts = [math.cos(theta * j / k) * w1 + math.sin(theta * j / k) * ortho for j in range(k + 1)]
    pts[0], pts[-1] = w1.copy(), w2.copy()
    return pts
