"""Seeded Poisson point processes on the unit sphere."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import config
from .sphere_geom import SphericalCap

__all__ = [
    "PointCloud",
    "DuplicatePointError",
    "CapOverlapError",
    "derive_seed",
    "sample_poisson_sphere",
    "count_in_disjoint_caps",
    "poisson_tail_exact",
    "write_point_cloud",
    "read_point_cloud",
]

CLOUD_FORMAT = "spherepoly-pointcloud v1"


class DuplicatePointError(ValueError):
    pass


class CapOverlapError(ValueError):
    pass


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    intensity: float
    dimension: int
    seed: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, self.dimension)
        if pts.shape[0]:
            norms = np.linalg.norm(pts, axis=1)
            if np.max(np.abs(norms - 1.0)) > 1e3 * config.UNIT_TOL:
                raise ValueError("point cloud contains non-unit vectors")
        if pts.shape[0] > 1 and cKDTree(pts).query_pairs(config.DUPLICATE_TOL):
            raise DuplicatePointError("two sample points closer than the duplicate tolerance")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def M(self) -> int:
        return self.points.shape[0]


def derive_seed(*keys: int) -> int:
    """Independent 64-bit seed for a substream identified by integer keys."""
    ss = np.random.SeedSequence([int(k) & 0xFFFFFFFFFFFFFFFF for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_poisson_sphere(n: int, m: float, seed: int, fixed_m: bool = False) -> PointCloud:
    """Draw M ~ Poisson(m) uniform points on S^{n-1}.

    ``fixed_m`` forces M = round(m) and is meant for debugging only.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if m <= 0:
        raise ValueError("intensity must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    M = int(round(m)) if fixed_m else int(rng.poisson(m))
    g = rng.standard_normal((M, n))
    g /= np.linalg.norm(g, axis=1)[:, None]
    return PointCloud(g, float(m), n, int(seed))


def count_in_disjoint_caps(A, caps) -> list[int]:
    """Number of points of A in each cap; caps must be pairwise disjoint.

    Disjointness is checked conservatively: centers farther apart than the sum
    of the radii.
    """
    caps = list(caps)
    for i in range(len(caps)):
        for j in range(i + 1, len(caps)):
            d = np.linalg.norm(caps[i].center - caps[j].center)
            if not d > caps[i].radius + caps[j].radius:
                raise CapOverlapError(f"caps {i} and {j} may overlap")
    pts = np.asarray(getattr(A, "points", A), dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        return [0] * len(caps)
    return [int(np.count_nonzero(np.linalg.norm(pts - c.center, axis=1) <= c.radius)) for c in caps]


def _log_pmf(k: int, lam: float) -> float:
    if lam == 0.0:
        return 0.0 if k == 0 else -math.inf
    return k * math.log(lam) - lam - math.lgamma(k + 1)


def poisson_tail_exact(lam: float, x: float) -> tuple[float, float]:
    """(P[X >= lam + x], P[X <= lam - x]) for X ~ Poisson(lam), by summing pmf terms."""
    if lam < 0 or x < 0:
        raise ValueError("need lam >= 0 and x >= 0")
    hi_start = math.ceil(lam + x)
    # upper tail: terms decrease past the mode, stop at relative 1e-14 truncation
    upper = 0.0
    k = hi_start
    while True:
        term = math.exp(_log_pmf(k, lam))
        upper += term
        if k > lam and term <= 1e-17 * max(upper, 1e-300):
            break
        if term == 0.0 and k > lam:
            break
        k += 1
    lo_end = math.floor(lam - x)
    lower = 0.0
    for k in range(lo_end, -1, -1):
        term = math.exp(_log_pmf(k, lam))
        lower += term
        if k < lam and term <= 1e-17 * max(lower, 1e-300):
            break
    return min(upper, 1.0), min(lower, 1.0)


# -- serialization ----------------------------------------------------------

def write_point_cloud(cloud: PointCloud, path) -> None:
    buf = io.StringIO()
    buf.write(f"# {CLOUD_FORMAT}\n")
    buf.write("n,m,seed,M\n")
    buf.write(f"{cloud.dimension},{cloud.intensity!r},{cloud.seed},{cloud.M}\n")
    for row in cloud.points:
        buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
    Path(path).write_text(buf.getvalue())


def read_point_cloud(path) -> PointCloud:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != f"# {CLOUD_FORMAT}":
        raise ValueError("unrecognized point cloud header")
    n_s, m_s, seed_s, M_s = lines[2].split(",")
    n, M = int(n_s), int(M_s)
    rows = [[float(v) for v in ln.split(",")] for ln in lines[3: 3 + M]]
    pts = np.array(rows, dtype=float).reshape(M, n)
    return PointCloud(pts, float(m_s), n, int(seed_s))
