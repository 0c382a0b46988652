import math

import numpy as np
import pytest

from spherepoly.hull import convex_hull, hull_vertex_graph
from spherepoly.lower_bound_cert import (
    CurveSample,
    NoAntipodeError,
    NonEdgeError,
    antipodal_distance_experiment,
    certificate_svg,
    certify_lower_bound,
    curve_subsequence,
    path_to_curve,
    write_certificate_csv,
)
from spherepoly.polytope_graph import bfs_distance, bfs_path
from spherepoly.sampler import sample_poisson_sphere
from spherepoly.sphere_geom import greedy_separated_net, sphere_grid

from conftest import instance

E1, E2 = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])


def curve_net(f, eps, pin, seed=0):
    S = f(np.linspace(0, 1, 10001))
    return greedy_separated_net(3, eps, seed=seed, pin=pin, candidates=np.vstack([sphere_grid(3, eps / 8), S]))


def random_q_path(seed, m=800):
    cloud, h, _, Q = instance(3, m, seed)
    rng = np.random.default_rng(seed)
    u, v = (int(x) for x in rng.choice(len(Q), 2, replace=False))
    return cloud, h, [Q.bases[w][0] for w in bfs_path(Q, u, v)]


class TestPathToCurve:
    def test_single_edge(self):
        cloud, h, _, _ = instance(3, 300, 1)
        a, b = sorted(h.hull_edges)[0]
        f = path_to_curve(h, [a, b])
        assert np.array_equal(f.params, [0.0, 0.5, 1.0])
        assert list(f.owner_at([0.25, 0.75])) == [a, b]
        assert np.array_equal(f(0.0)[0], cloud.points[a])
        assert np.array_equal(f(1.0)[0], cloud.points[b])

    def test_endpoints_and_monotone_params(self):
        cloud, h, path = random_q_path(2)
        f = path_to_curve(h, path)
        assert np.array_equal(f(0.0)[0], cloud.points[path[0]])
        assert np.array_equal(f(1.0)[0], cloud.points[path[-1]])
        assert np.all(np.diff(f.params) > 0)
        assert np.allclose(np.linalg.norm(f(np.linspace(0, 1, 999)), axis=1), 1)

    @pytest.mark.parametrize("seed", range(5))
    def test_owner_is_nearest(self, seed):
        cloud, h, path = random_q_path(10 + seed)
        assert path_to_curve(h, path).argmin_violation(cloud.points) <= 1e-9

    def test_non_edge(self):
        _, h, _, _ = instance(3, 300, 1)
        a = int(h.vertices[0])
        b = next(int(v) for v in h.vertices if v != a and (min(a, v), max(a, v)) not in h.hull_edges)
        with pytest.raises(NonEdgeError):
            path_to_curve(h, [a, b])


class TestSubsequence:
    def test_short_curve(self):
        a = E1
        b = np.array([math.cos(0.1), math.sin(0.1), 0.0])
        f = CurveSample(np.array([0.0, 1.0]), np.array([a, b]), [0])
        eps = 0.03
        seq = curve_subsequence(f, curve_net(f, eps, a), eps)
        assert len(seq) == 1

    @pytest.mark.parametrize("eps", [0.05, 0.03, 0.02])
    def test_half_great_circle(self, eps):
        f = CurveSample(np.array([0.0, 0.5, 1.0]), np.array([E1, E2, -E1]), [0, 1])
        N = curve_net(f, eps, E1)
        seq = curve_subsequence(f, N, eps)
        k = len(seq) - 1
        L = math.pi
        assert L / (8 * eps) - 1 <= k <= L / (6 * eps) + 1
        X = N.points[[i for _, i in seq]]
        jumps = np.linalg.norm(np.diff(X, axis=0), axis=1)
        assert np.all((jumps >= 6 * eps - 1e-12) & (jumps <= 8 * eps + 1e-9))
        assert np.linalg.norm(X[-1] + E1) < 7 * eps

    def test_requires_pinned_start(self):
        f = CurveSample(np.array([0.0, 0.5, 1.0]), np.array([E1, E2, -E1]), [0, 1])
        N = greedy_separated_net(3, 0.05, seed=0, pin=np.array([0, 0, 1.0]))
        with pytest.raises(ValueError):
            curve_subsequence(f, N, 0.05)

    def test_subsequence_properties_on_instance_paths(self):
        eps = 0.15
        for seed in range(10):
            cloud, h, path = random_q_path(30 + seed, m=400)
            f = path_to_curve(h, path)
            N = curve_net(f, eps, cloud.points[path[0]], seed)
            seq = curve_subsequence(f, N, eps)
            X = N.points
            ts = np.array([t for t, _ in seq])
            idx = [i for _, i in seq]
            assert len(set(idx)) == len(idx)
            for t, i in seq:
                assert np.linalg.norm(f(t)[0] - X[i]) <= eps + 1e-9
                # after t_i the curve never comes back within eps of x_i (grid check)
                later = np.linspace(min(t + 1e-6, 1.0), 1.0, 400)
                assert np.all(np.linalg.norm(f(later) - X[i], axis=1) >= eps - 1e-6)
            assert np.all(np.diff(ts) > 0)
            assert np.linalg.norm(X[idx[-1]] - f(1.0)[0]) < 7 * eps


class TestCertificate:
    @pytest.mark.parametrize("m", [500, 2000])
    def test_sound_and_well_formed(self, m):
        for seed in range(8):
            cloud, h, _, Q = instance(3, m, 900 + seed)
            cert = certify_lower_bound(cloud, h, Q, c6=6.0, seed=seed)
            d = bfs_distance(Q, Q.vertex_of_point(cert.a_plus), Q.vertex_of_point(cert.a_minus))
            assert cert.distance == d
            assert 0 <= cert.certified_lb <= d
            assert cert.check(path_to_curve(h, cert.path)) == []
            assert np.linalg.norm(cloud.points[cert.a_plus] - cloud.points[cert.a_minus]) >= 1
            assert cert.argmin_violation <= 1e-9
            k0 = math.ceil(1 / (8 * cert.eps))
            assert (cert.k0_minus, cert.k0_plus) == (k0 - 1, k0 + 1)
            assert cert.eps == pytest.approx(6.0 * m ** -0.5)
            assert np.array_equal(cert.net.points[cert.sequence[0][1]], cloud.points[cert.a_plus])

    def test_tiny_instance(self):
        cloud = sample_poisson_sphere(3, 12, 3)
        h = convex_hull(cloud)
        cert = certify_lower_bound(cloud, h, hull_vertex_graph(h), c6=1.0)
        assert 0 <= cert.certified_lb <= cert.distance

    def test_no_antipode(self):
        rng = np.random.default_rng(0)
        pts = np.array([0, 0, 1.0]) + 0.1 * rng.standard_normal((50, 3))
        pts /= np.linalg.norm(pts, axis=1)[:, None]
        h = convex_hull(pts)
        with pytest.raises(NoAntipodeError):
            certify_lower_bound(pts, h, hull_vertex_graph(h))

    def test_eps_too_large(self):
        cloud, h, _, Q = instance(3, 500, 900)
        with pytest.raises(ValueError):
            certify_lower_bound(cloud, h, Q, c6=100.0)

    def test_exports(self, tmp_path):
        cloud, h, _, Q = instance(3, 500, 901)
        cert = certify_lower_bound(cloud, h, Q, c6=6.0, seed=1)
        write_certificate_csv(cert, tmp_path / "c.csv", diameter=40)
        lines = (tmp_path / "c.csv").read_text().splitlines()
        assert len(lines) == 3 + len(cert.sequence)
        assert f"pair_count={cert.pair_count}" in lines[-1] and "diameter=40" in lines[-1]
        assert sum(int(ln.split(",")[-1]) for ln in lines[2:-1]) == sum(cert.occupied)
        certificate_svg(cert, h, tmp_path / "c.svg")
        assert (tmp_path / "c.svg").read_text().startswith("<svg")


class TestAntipodal:
    def test_circle(self):
        res = antipodal_distance_experiment(2, 400, trials=10, seed=2)
        from spherepoly.sampler import derive_seed
        for t, d in enumerate(res["distances"]):
            M = sample_poisson_sphere(2, 400, derive_seed(2, t)).M
            assert M / 2 - 4 * math.sqrt(M) <= d <= M / 2

    def test_summary_fields(self):
        res = antipodal_distance_experiment(3, 300, trials=3, seed=1)
        assert res["mean"] == pytest.approx(np.mean(res["distances"]))
        assert res["median"] == pytest.approx(np.median(res["distances"]))
        with pytest.raises(ValueError):
            antipodal_distance_experiment(3, 300, trials=0)
