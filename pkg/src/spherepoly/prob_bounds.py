"""Closed-form tail and variance bounds used as analytic baselines."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .sphere_geom import solve_epsilon

__all__ = [
    "TailParams",
    "bernstein_bound",
    "bhatia_davis",
    "poisson_tail_bound",
    "density_thresholds",
    "t_p_eval",
    "shadow_tail_params",
]


def _nonneg(**kw):
    for name, v in kw.items():
        if v < 0 or math.isnan(v):
            raise ValueError(f"{name} must be non-negative, got {v}")


def bernstein_bound(k: float, q: float, M: float, sigma2: float, t: float) -> float:
    """2 exp(-8 t^2 / (25 q (k sigma^2 + M t / 3))) for sums of k dependent
    terms whose dependency graph has fractional chromatic number q."""
    _nonneg(k=k, q=q, M=M, sigma2=sigma2, t=t)
    if t <= 0:
        raise ValueError("t must be positive")
    denom = 25.0 * q * (k * sigma2 + M * t / 3.0)
    if denom == 0.0:
        return 0.0
    return 2.0 * math.exp(-8.0 * t * t / denom)


def bhatia_davis(mu: float, M: float) -> float:
    """Variance bound mu (M - mu) for a variable supported on [0, M] with mean mu."""
    if not 0.0 <= mu <= M:
        raise ValueError("need 0 <= mu <= M")
    return mu * (M - mu)


def poisson_tail_bound(lam: float, x: float) -> float:
    """exp(-x^2 / (2 (lam + x))), a bound on either Poisson tail at distance x."""
    _nonneg(lam=lam, x=x)
    if x == 0.0:
        return 1.0
    return math.exp(-x * x / (2.0 * (lam + x)))


def density_thresholds(m: float, n: int, p: float, t: float) -> tuple[float, float]:
    """Density radius and the occupancy threshold 45 ln(1/p) t^(n-1) for caps of radius t*eps."""
    if t < 1:
        raise ValueError("t must be >= 1")
    eps = solve_epsilon(m, n, p).epsilon
    return eps, 45.0 * math.log(1.0 / p) * t ** (n - 1)


def t_p_eval(m: float, n: int, p: float, U: float, c1: float = 1.0, c2: float = 1.0) -> float:
    """Deviation scale max(sqrt(c1 U n^2 m^(1/(n-1)) ln(1/p)), c2 U ln(1/p))."""
    _nonneg(U=U)
    if c1 <= 0 or c2 <= 0:
        raise ValueError("constants must be positive")
    L = math.log(1.0 / p)
    return max(math.sqrt(c1 * U * n * n * m ** (1.0 / (n - 1)) * L), c2 * U * L)


@dataclass(frozen=True)
class TailParams:
    m: float
    n: int
    p: float
    epsilon: float
    U: float
    t_p: float
    q: float
    k: float
    M_bound: float
    sigma2: float

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        if self.U < 0 or self.t_p < 0:
            raise ValueError("U and t_p must be non-negative")


def shadow_tail_params(m: float, n: int, p: float, cU: float = 1.0, c1: float = 1.0, c2: float = 1.0) -> TailParams:
    """Bundle of the quantities entering the shadow-size concentration statement.

    U = cU n 2^(n^2) ln(1/p)^n bounds each of the k slice counts, where k is
    the smallest multiple of 76 with k >= 2 pi / eps. Slices split into
    q = 76 residue classes of mutually independent terms. The per-term variance bound is (mean / k) U with the mean proxy
    n^2 m^(1/(n-1)) (hidden constant set to 1).
    """
    eps = solve_epsilon(m, n, p).epsilon
    L = math.log(1.0 / p)
    U = cU * n * 2.0 ** (n * n) * L ** n
    k = 76 * math.ceil(2.0 * math.pi / eps / 76.0)
    mean = n * n * m ** (1.0 / (n - 1))
    return TailParams(m, n, p, eps, U, t_p_eval(m, n, p, U, c1, c2), q=76.0, k=k,
                      M_bound=U, sigma2=mean / k * U)
