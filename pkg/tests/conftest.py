import functools

import numpy as np
import pytest

from spherepoly.hull import convex_hull, hull_vertex_graph, polar_vertex_graph
from spherepoly.sampler import sample_poisson_sphere


@functools.lru_cache(maxsize=None)
def instance(n: int, m: float, seed: int):
    """Cached (cloud, hull, P graph, Q graph) for a seeded Poisson sample."""
    cloud = sample_poisson_sphere(n, m, seed)
    h = convex_hull(cloud)
    return cloud, h, polar_vertex_graph(h), hull_vertex_graph(h)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_unit(rng, n, size=None):
    g = rng.standard_normal((size or 1, n))
    g /= np.linalg.norm(g, axis=1)[:, None]
    return g if size else g[0]
