import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spherepoly.hull import (
    DegeneracyError,
    PolarityError,
    contains_origin,
    convex_hull,
    exact_orientation,
    hull_vertex_graph,
    polar_vertex_graph,
    write_facets_csv,
)
from spherepoly.sampler import sample_poisson_sphere

from conftest import instance, random_unit


def brute_force_facets(pts):
    """All n-subsets whose hyperplane has every other point strictly on one side."""
    M, n = pts.shape
    out = set()
    for S in itertools.combinations(range(M), n):
        B = pts[list(S)]
        normal = np.linalg.svd(B[1:] - B[0])[2][-1]
        vals = (pts - B[0]) @ normal
        vals[list(S)] = 0
        if np.all(vals <= 1e-12) or np.all(vals >= -1e-12):
            out.add(S)
    return out


def simplex_vertices(n):
    """Regular simplex inscribed in the unit sphere."""
    E = np.eye(n + 1) - 1.0 / (n + 1)
    basis = np.linalg.svd(E)[2][:n]
    V = E @ basis.T
    return V / np.linalg.norm(V, axis=1)[:, None]


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_simplex(n):
    h = convex_hull(simplex_vertices(n))
    assert len(h.facets) == n + 1
    assert h.check() == []
    P = polar_vertex_graph(h)
    assert all(sorted(a) == [j for j in range(n + 1) if j != i] for i, a in enumerate(P.adjacency))


def test_polygon():
    rng = np.random.default_rng(0)
    ang = np.sort(rng.uniform(0, 2 * np.pi, 40))
    pts = np.column_stack([np.cos(ang), np.sin(ang)])
    h = convex_hull(pts)
    assert len(h.facets) == 40 and len(h.hull_edges) == 40
    expected = {tuple(sorted((i, (i + 1) % 40))) for i in range(40)}
    assert h.facet_set() == expected
    P = polar_vertex_graph(h)
    assert all(len(a) == 2 for a in P.adjacency)


@pytest.mark.parametrize("seed", range(25))
def test_brute_force_oracle(seed):
    rng = np.random.default_rng(seed)
    M = int(rng.integers(4, 13))
    pts = random_unit(rng, 3, M)
    h = convex_hull(pts, seed=seed)
    assert h.facet_set() == brute_force_facets(pts)
    assert h.check() == []


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(4, 11))
def test_brute_force_property(seed, M):
    pts = random_unit(np.random.default_rng(seed), 3, M)
    assert convex_hull(pts, seed=seed).facet_set() == brute_force_facets(pts)


@pytest.mark.parametrize("n,m", [(2, 300), (3, 2000), (4, 600), (5, 300)])
def test_matches_qhull(n, m):
    cloud = sample_poisson_sphere(n, m, 7)
    a = convex_hull(cloud)
    b = convex_hull(cloud, method="qhull")
    assert a.facet_set() == b.facet_set()
    assert a.hull_edges == b.hull_edges


def test_insertion_order_does_not_matter():
    cloud = sample_poisson_sphere(4, 500, 3)
    assert convex_hull(cloud, seed=1).facet_set() == convex_hull(cloud, seed=2).facet_set()


@pytest.mark.parametrize("n,m", [(3, 1500), (4, 400)])
def test_idempotence(n, m):
    cloud, h, _, _ = instance(n, m, 11)
    verts = h.vertices
    sub = convex_hull(cloud.points[verts])
    assert {tuple(int(verts[i]) for i in f) for f in sub.facet_set()} == h.facet_set()


def test_euler_and_double_counting():
    _, h, _, _ = instance(3, 3000, 4)
    V, E, F = len(h.vertices), len(h.hull_edges), len(h.facets)
    assert V - E + F == 2 and 2 * E == 3 * F
    # every point of a Poisson sample on the sphere is a hull vertex
    assert V == h.points.shape[0]


def test_polar_residuals_and_norms():
    _, h, P, _ = instance(4, 800, 5)
    pts = h.points
    worst_basis = 0.0
    for v, basis in zip(P.coords, P.bases):
        worst_basis = max(worst_basis, float(np.max(np.abs(pts[list(basis)] @ v - 1))))
    assert worst_basis < 1e-8
    assert float(np.max(pts @ P.coords.T)) < 1 + 1e-8
    assert np.all(np.linalg.norm(P.coords, axis=1) >= 1 - 1e-12)
    assert P.check() == []


def test_polar_graph_is_simple_and_connected():
    _, _, P, Q = instance(3, 1000, 6)
    assert all(len(a) == 3 for a in P.adjacency)
    assert P.check() == [] and Q.check() == []


def test_hemisphere_not_containing_origin():
    rng = np.random.default_rng(1)
    pts = random_unit(rng, 3, 200)
    pts[:, 2] = np.abs(pts[:, 2]) + 0.01
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    h = convex_hull(pts)
    assert not contains_origin(h)
    with pytest.raises(PolarityError):
        polar_vertex_graph(h)


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_cross_polytope_contains_origin(n):
    # perturb so the facets are simplicial (the octahedron already is for n=3)
    pts = np.vstack([np.eye(n), -np.eye(n)])
    rng = np.random.default_rng(n)
    pts = pts + 1e-3 * rng.standard_normal(pts.shape)
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    h = convex_hull(pts)
    assert contains_origin(h)
    assert len(h.facets) == 2 ** n


def test_poisson_s3_contains_origin():
    assert all(contains_origin(convex_hull(sample_poisson_sphere(4, 500, s))) for s in range(10))


def test_exact_orientation():
    tri = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])
    assert exact_orientation(tri, np.array([0.3, 0.3, 0.0])) == 0
    up = exact_orientation(tri, np.array([0.0, 0, 1e-300]))
    down = exact_orientation(tri, np.array([0.0, 0, -1e-300]))
    assert up == -down != 0


def test_coplanar_facet_raises():
    # cube vertices have exactly coplanar quadruples in floating point
    a = 1 / math.sqrt(3)
    cube = np.array(list(itertools.product([-a, a], repeat=3)))
    with pytest.raises(DegeneracyError):
        convex_hull(cube)


def test_lower_dimensional_input_raises():
    ang = np.linspace(0, 2 * np.pi, 10, endpoint=False)
    ring = np.column_stack([np.cos(ang), np.sin(ang), np.zeros(10)])
    with pytest.raises(DegeneracyError):
        convex_hull(ring)


def test_too_few_points():
    with pytest.raises(ValueError):
        convex_hull(np.eye(3))


def test_hull_vertex_graph_mapping():
    cloud, h, _, Q = instance(3, 500, 8)
    assert all(Q.vertex_of_point(int(v)) == i for i, v in enumerate(h.vertices))
    edges = {(int(h.vertices[a]), int(h.vertices[b])) for a, b in Q.edges()}
    assert edges == h.hull_edges


def test_facets_csv(tmp_path):
    _, h, _, _ = instance(3, 200, 9)
    write_facets_csv(h, tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0].startswith("#") and len(lines) == 2 + len(h.facets)
    row = lines[2].split(",")
    f = h.facets[0]
    assert tuple(int(x) for x in row[:3]) == f.basis
    assert float(row[-1]) == f.support
