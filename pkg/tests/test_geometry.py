import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import spatial, stats

from uavcomp.errors import ConfigError, DegenerateInputError, InsufficientDeploymentError
from uavcomp.geometry import (
    Deployment,
    HeightLaw,
    Triangulation,
    check_empty_circumcircle,
    delaunay,
    deploy,
    formation_target,
    read_deployment_csv,
    sample_heights,
    sample_ppp,
    select_comp_set,
    write_deployment_csv,
)


def brute_force_empty_circle(points, triangles):
    """Independent validator: circumcenter/radius form, every point checked."""
    pts = np.asarray(points, dtype=float)
    scale = float(np.ptp(pts, axis=0).max()) or 1.0
    for t in triangles:
        a, b, c = pts[t]
        d = 2 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
        ux = ((a @ a) * (b[1] - c[1]) + (b @ b) * (c[1] - a[1]) + (c @ c) * (a[1] - b[1])) / d
        uy = ((a @ a) * (c[0] - b[0]) + (b @ b) * (a[0] - c[0]) + (c @ c) * (b[0] - a[0])) / d
        r = math.hypot(a[0] - ux, a[1] - uy)
        dist = np.hypot(pts[:, 0] - ux, pts[:, 1] - uy)
        if np.any(dist < r - 1e-9 * scale):
            return False
    return True


class TestPpp:
    def test_zero_density(self):
        assert sample_ppp(0.0, 3000.0, 1).shape == (0, 2)

    def test_points_inside_disk(self):
        pts = sample_ppp(16e-6, 3000.0, 5)
        assert np.all(np.hypot(pts[:, 0], pts[:, 1]) <= 3000.0)

    def test_count_chi_square(self):
        rng = np.random.default_rng(11)
        lam_area = 16e-6 * math.pi * 3000.0**2  # about 452.4
        counts = np.array([len(sample_ppp(16e-6, 3000.0, rng)) for _ in range(1000)])
        # bin counts into equiprobable Poisson cells and compare frequencies
        edges = stats.poisson.ppf(np.linspace(0, 1, 11)[1:-1], lam_area)
        observed = np.bincount(np.searchsorted(edges, counts, side="right"), minlength=10)
        cdf_edges = np.concatenate([[0.0], stats.poisson.cdf(edges, lam_area), [1.0]])
        expected = np.diff(cdf_edges) * len(counts)
        _, p = stats.chisquare(observed, expected)
        assert p > 0.001
        assert abs(counts.mean() - lam_area) < 4 * math.sqrt(lam_area / len(counts))

    def test_small_mean_count(self):
        rng = np.random.default_rng(3)
        counts = np.array([len(sample_ppp(1e-6, 1000.0, rng)) for _ in range(10_000)])
        assert abs(counts.mean() - math.pi) < 3 * math.sqrt(math.pi / 10_000)
        assert counts.var() == pytest.approx(math.pi, rel=0.1)

    def test_radial_law_uniform_in_area(self):
        pts = sample_ppp(50e-6, 2000.0, 9)
        r2 = (pts**2).sum(1) / 2000.0**2
        assert stats.kstest(r2, "uniform").pvalue > 0.001

    @pytest.mark.parametrize("density, radius", [(-1.0, 10.0), (1e-6, 0.0)])
    def test_bad_inputs(self, density, radius):
        with pytest.raises(ConfigError):
            sample_ppp(density, radius)


class TestHeights:
    def test_fixed(self):
        assert list(sample_heights(3, HeightLaw.fixed(150.0), 0)) == [150.0, 150.0, 150.0]

    def test_uniform_mean(self):
        h = sample_heights(100_000, HeightLaw("uniform", 50.0, 300.0), 4)
        assert abs(h.mean() - 175.0) < 1.0
        assert h.min() >= 50.0 and h.max() <= 300.0

    def test_empty(self):
        assert len(sample_heights(0, HeightLaw(), 0)) == 0

    def test_invalid_law(self):
        with pytest.raises(ConfigError):
            HeightLaw("uniform", 300.0, 50.0)
        with pytest.raises(ConfigError):
            HeightLaw("gaussian")

    def test_quadrature_weights(self):
        x, w = HeightLaw().nodes_weights(20)
        assert w.sum() == pytest.approx(1.0)
        assert x @ w == pytest.approx(175.0)
        assert (x**2) @ w == pytest.approx((300.0**3 - 50.0**3) / (3 * 250.0))


class TestCompSet:
    def _dep(self, pts, hs=None):
        pts = np.asarray(pts, dtype=float)
        hs = np.full(len(pts), 100.0) if hs is None else hs
        return Deployment(pts, hs, 1e4, float("nan"))

    def test_exactly_four(self):
        dep = self._dep([[5, 0], [0, 7], [-100, 3], [40, 40]])
        assert sorted(select_comp_set(dep).uav_indices) == [0, 1, 2, 3]

    def test_matches_brute_force_sort(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            pts = rng.uniform(-500, 500, size=(50, 2))
            dep = self._dep(pts, rng.uniform(50, 300, 50))
            d = np.hypot(pts[:, 0], pts[:, 1])
            expected = sorted(range(50), key=lambda i: (d[i], i))[:4]
            got = select_comp_set(dep)
            assert list(got.uav_indices) == expected
            assert np.allclose(got.horiz_distances, d[expected])

    def test_tie_goes_to_lower_index(self):
        pts = [[1, 0], [0, 2], [3, 0], [0, 10], [10, 0], [50, 50]]
        dep = self._dep(pts)
        for _ in range(3):
            assert select_comp_set(dep).uav_indices == (0, 1, 2, 3)

    def test_too_few(self):
        with pytest.raises(InsufficientDeploymentError):
            select_comp_set(self._dep([[1, 0], [0, 1], [2, 2]]))

    def test_3d_metric_uses_height(self):
        pts = [[10, 0], [20, 0], [30, 0], [40, 0], [50, 0]]
        hs = np.array([500.0, 50.0, 50.0, 50.0, 50.0])
        assert 0 not in select_comp_set(self._dep(pts, hs), metric="3d").uav_indices
        assert 0 in select_comp_set(self._dep(pts, hs)).uav_indices


class TestDelaunay:
    def test_single_triangle(self):
        tri = delaunay([[0, 0], [1, 0], [0, 1]])
        assert tri.triangles.shape == (1, 3)

    def test_unit_square_cocircular(self):
        tri = delaunay([[0, 0], [1, 0], [1, 1], [0, 1]])
        assert len(tri.triangles) == 2
        assert check_empty_circumcircle(tri)
        assert brute_force_empty_circle(tri.vertices, tri.triangles)

    def test_ccw_orientation(self):
        rng = np.random.default_rng(2)
        tri = delaunay(rng.random((60, 2)))
        p = tri.vertices[tri.triangles]
        cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
        assert np.all(cross > 0)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_points_empty_circumcircle(self, seed):
        pts = np.random.default_rng(seed).random((100, 2)) * 3000
        tri = delaunay(pts)
        assert brute_force_empty_circle(pts, tri.triangles)
        assert check_empty_circumcircle(tri)

    def test_same_triangles_as_scipy(self):
        pts = np.random.default_rng(21).random((200, 2))
        ours = {tuple(sorted(t)) for t in delaunay(pts).triangles}
        ref = {tuple(sorted(t)) for t in spatial.Delaunay(pts).simplices}
        assert ours == ref

    def test_triangle_count_euler(self):
        pts = np.random.default_rng(4).random((80, 2))
        hull = len(spatial.ConvexHull(pts).vertices)
        assert len(delaunay(pts).triangles) == 2 * 80 - 2 - hull

    def test_grid_degenerate(self):
        g = np.array([[i, j] for i in range(6) for j in range(6)], dtype=float)
        tri = delaunay(g)
        assert len(tri.triangles) == 2 * 25
        assert check_empty_circumcircle(tri)

    @pytest.mark.parametrize(
        "pts", [[[0, 0], [1, 1]], [[0, 0], [1, 1], [2, 2], [3, 3]], [[0, 0], [1, 0], [0, 1], [1, 0]]]
    )
    def test_degenerate_inputs(self, pts):
        with pytest.raises(DegenerateInputError):
            delaunay(pts)

    def test_validator_rejects_bad_triangulation(self):
        pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]], dtype=float)
        bad = Triangulation(pts, np.array([[0, 1, 2], [0, 2, 3]]))
        assert not check_empty_circumcircle(bad)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.tuples(st.integers(-40, 40), st.integers(-40, 40)), min_size=3, max_size=30, unique=True))
    def test_integer_lattice_property(self, pts):
        arr = np.array(pts, dtype=float)
        u, w = arr[1:] - arr[0], arr[1] - arr[0]
        if np.all(u[:, 0] * w[1] - u[:, 1] * w[0] == 0):
            with pytest.raises(DegenerateInputError):
                delaunay(arr)
            return
        tri = delaunay(arr)
        assert check_empty_circumcircle(tri)
        # every input point is a vertex of some triangle
        assert set(np.unique(tri.triangles)) == set(range(len(arr)))


class TestFormationTarget:
    def _pentagon(self):
        ang = np.linspace(0, 2 * np.pi, 6)[:-1]
        pts = np.vstack([np.column_stack([np.cos(ang), np.sin(ang)]) * 100, [[0.0, 0.0]]])
        dep = Deployment(pts, np.full(6, 120.0), 200.0, float("nan"))
        return dep, delaunay(pts)

    def test_single_triangle_always_chosen(self):
        pts = np.array([[0, 0], [100, 0], [0, 100]], dtype=float)
        dep = Deployment(pts, np.array([60.0, 70.0, 80.0]), 200.0, float("nan"))
        tgt = formation_target(dep, delaunay(pts), 3)
        assert np.allclose(tgt[:3], np.column_stack([pts, [60, 70, 80]]))
        assert np.allclose(tgt[3, :2], pts.mean(0))
        assert 50 <= tgt[3, 2] <= 300

    def test_deterministic(self):
        dep, tri = self._pentagon()
        assert np.array_equal(formation_target(dep, tri, 17), formation_target(dep, tri, 17))

    def test_uniform_choice(self):
        dep, tri = self._pentagon()
        assert len(tri.triangles) == 5
        rng = np.random.default_rng(0)
        picks = []
        for _ in range(10_000):
            tgt = formation_target(dep, tri, rng)
            key = tuple(sorted(map(tuple, np.round(tgt[:3, :2], 6))))
            picks.append(key)
        _, counts = np.unique(np.array([hash(p) for p in picks]), return_counts=True)
        assert len(counts) == 5
        assert np.all(np.abs(counts / 10_000 - 0.2) <= 0.02)


class TestDeploymentIo:
    def test_csv_round_trip(self, tmp_path):
        dep = deploy(16e-6, 3000.0, HeightLaw(), 42)
        path = tmp_path / "dep.csv"
        write_deployment_csv(dep, path)
        back = read_deployment_csv(path, density=16e-6, region_radius=dep.region_radius)
        assert np.array_equal(back.planar_points, dep.planar_points)
        assert np.array_equal(back.heights, dep.heights)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y,h\n1,2,3\n")
        with pytest.raises(ConfigError):
            read_deployment_csv(path)

    def test_deploy_edge_factor(self):
        dep = deploy(16e-6, 3000.0, HeightLaw(), 1)
        assert dep.region_radius == pytest.approx(3600.0)
        assert np.array_equal(deploy(16e-6, 3000.0, HeightLaw(), 1).positions, dep.positions)
