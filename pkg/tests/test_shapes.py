import numpy as np
import pytest

from aniso import (
    EllipseNorm,
    EuclideanNorm,
    GeometryError,
    InvalidArgumentError,
    ShapeSpec,
    SmoothedMaxNorm,
    WulffShape,
    curvature,
    enclosed_volume,
    gen,
    lambda_of,
    lp_deviation,
    norm_sequence,
    parse_shape,
    wulff_volume,
)
from aniso.shapes import (
    perturbation_pattern,
    perturbed_wulff_perimeter,
    radial_perimeter,
    two_bubble_perimeter,
    wulff_radial_rho,
)


class TestSpecValidation:
    def test_kinds(self):
        with pytest.raises(InvalidArgumentError):
            ShapeSpec("blob", EuclideanNorm(2))

    def test_eps_range(self):
        with pytest.raises(InvalidArgumentError):
            ShapeSpec("perturbed-wulff", EuclideanNorm(2), eps=0.5)

    def test_neck_range(self):
        with pytest.raises(InvalidArgumentError):
            ShapeSpec("two-bubble", EuclideanNorm(2), r=1.0, neck_width=0.6)


class TestGenerators:
    def test_wulff_kind_matches_boundary_mesh(self):
        norm = EllipseNorm(np.diag([1.0, 4.0]))
        g = gen(ShapeSpec("wulff", norm, r=1.5), resolution=256)
        m = WulffShape(norm, 1.5).boundary_mesh(resolution=256)
        assert np.max(np.abs(g.mesh.vertices - m.vertices)) < 1e-12

    def test_zero_perturbation_is_exact_wulff(self):
        norm = EllipseNorm(np.diag([1.0, 4.0, 2.0]))
        g = gen(ShapeSpec("perturbed-wulff", norm, r=1.5, eps=0.0), resolution=3)
        m = WulffShape(norm, 1.5).boundary_mesh(resolution=3)
        assert np.max(np.abs(g.mesh.vertices - m.vertices)) < 1e-12
        assert np.max(np.abs(g.mesh.normals - m.normals)) < 1e-10

    def test_perturbed_solid_matches_mesh(self):
        norm = EllipseNorm(np.diag([1.0, 4.0]))
        g = gen(ShapeSpec("perturbed-wulff", norm, r=1.5, eps=0.1, pattern=1),
                resolution=512)
        lvl = g.solid.level_at(g.mesh.vertices)
        assert np.max(np.abs(lvl)) < 1e-10

    def test_perturbed_normals_match_finite_differences(self):
        # oracle: normals from central differences of the radial graph
        norm = EllipseNorm(np.diag([1.0, 4.0]))
        g = gen(ShapeSpec("perturbed-wulff", norm, r=1.0, eps=0.1, pattern=0),
                resolution=4096)
        v = g.mesh.vertices
        t = np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)
        t /= np.linalg.norm(t, axis=-1, keepdims=True)
        dots = np.abs(np.sum(t * g.mesh.normals, axis=-1))
        assert np.max(dots) < 2e-3

    def test_two_bubble_volume_approaches_two_wulff(self):
        # oracle: sum of the parts; the neck adds a strictly shrinking excess
        norm = EuclideanNorm(3)
        vols = []
        for neck in (0.3, 0.15, 0.075):
            g = gen(ShapeSpec("two-bubble", norm, r=1.0, neck_width=neck),
                    resolution=4)
            vols.append(enclosed_volume(g.mesh))
        assert vols[0] > vols[1] > vols[2]
        two_balls = 2 * wulff_volume(WulffShape(norm, 1.0), resolution=5)
        assert abs(vols[2] - two_balls) / two_balls < 0.01

    def test_two_bubble_tangency_distance(self):
        norm = SmoothedMaxNorm(3, 0.2)
        g = gen(ShapeSpec("two-bubble", norm, r=1.2, neck_width=0.2), resolution=3)
        c = g.meta["centers"]
        assert norm.dual().eval(c[1] - c[0]) == pytest.approx(2 * 1.2, rel=1e-12)

    def test_two_bubble_solid_mesh_agreement(self):
        norm = EuclideanNorm(2)
        g = gen(ShapeSpec("two-bubble", norm, r=1.0, neck_width=0.2), resolution=512)
        lvl = g.solid.level_at(g.mesh.vertices)
        assert np.max(np.abs(lvl)) < 1e-9

    def test_tangent_union_center_distances(self):
        norm = EllipseNorm(np.diag([1.0, 4.0]))
        g = gen(ShapeSpec("tangent-union", norm, r=1.0, count=3), resolution=128)
        c = g.meta["centers"]
        dual = norm.dual()
        for i in range(3):
            for j in range(i + 1, 3):
                assert dual.eval(c[i] - c[j]) >= 2.0 - 1e-12

    def test_tangent_union_rejects_close_centers(self):
        with pytest.raises(GeometryError):
            gen(ShapeSpec("tangent-union", EuclideanNorm(2), r=1.0,
                          centers=((0.0, 0.0), (1.0, 0.0))), resolution=64)

    def test_lambda_calibration(self):
        # lambda_of = n/r within 1 percent; the deviation stays below the
        # curvature discretization floor 2% * lambda * sqrt(area)
        norm = EllipseNorm(np.diag([1.0, 4.0, 2.0]))
        g = gen(ShapeSpec("wulff", norm, r=1.5), resolution=4)
        lam = lambda_of(g.mesh, norm)
        assert lam == pytest.approx(2 / 1.5, rel=0.01)
        f = curvature(g.mesh, norm)
        from aniso import aniso_area
        floor = 0.02 * lam * aniso_area(g.mesh, EuclideanNorm(3)) ** 0.5
        assert lp_deviation(f, g.mesh, lam, p=2) < floor

    def test_deviation_strictly_decreasing_in_eps(self):
        norm = EllipseNorm(np.diag([1.0, 4.0]))
        devs = []
        for eps in (0.1, 0.05, 0.025):
            g = gen(ShapeSpec("perturbed-wulff", norm, r=1.5, eps=eps, pattern=0),
                    resolution=1024)
            f = curvature(g.mesh, norm)
            devs.append(lp_deviation(f, g.mesh, lambda_of(g.mesh, norm), p=1))
        assert devs[0] > devs[1] > devs[2]


class TestPatterns:
    @pytest.mark.parametrize("dim,pattern", [(2, 0), (2, 2), (3, 0), (3, 1), (3, 2), (3, 3)])
    def test_tangential_gradient_by_finite_differences(self, dim, pattern, rng):
        from aniso.norms import tangent_basis, unit_sphere_samples
        value, sgrad = perturbation_pattern(dim, pattern)
        u = unit_sphere_samples(dim, 64)
        t = tangent_basis(u)
        g = sgrad(u)
        for k in range(dim - 1):
            d = 1e-6
            up = u + d * t[..., k]
            up /= np.linalg.norm(up, axis=-1, keepdims=True)
            um = u - d * t[..., k]
            um /= np.linalg.norm(um, axis=-1, keepdims=True)
            fd = (value(up) - value(um)) / (2 * d)
            assert np.allclose(np.sum(g * t[..., k], axis=-1), fd, atol=1e-5)

    def test_bounded_by_one(self):
        from aniso.norms import unit_sphere_samples
        for pattern in range(4):
            value, _ = perturbation_pattern(3, pattern)
            assert np.max(np.abs(value(unit_sphere_samples(3, 20000)))) <= 1.0 + 1e-9


class TestRadialPerimeter:
    def test_sphere(self):
        e3 = EuclideanNorm(3)
        p = radial_perimeter(e3, wulff_radial_rho(e3, 1.5), n_dirs=100_000)
        assert p == pytest.approx(4 * np.pi * 1.5**2, rel=1e-6)

    def test_matches_mesh_for_smooth_norms(self):
        norm = EllipseNorm(np.diag([1.0, 4.0, 2.0]))
        p = radial_perimeter(norm, wulff_radial_rho(norm, 1.0), n_dirs=100_000)
        from aniso import wulff_perimeter
        assert p == pytest.approx(wulff_perimeter(WulffShape(norm, 1.0), resolution=5),
                                  rel=2e-3)

    def test_two_bubble_smooth_case_matches_mesh(self):
        from aniso.mesh import aniso_area
        norm = EuclideanNorm(3)
        g = gen(ShapeSpec("two-bubble", norm, r=1.0, neck_width=0.3), resolution=5)
        quad = two_bubble_perimeter(g.solid.profile, n_ball=100_000, n_band=(120, 128))
        mesh_val = aniso_area(g.mesh, norm)
        assert quad == pytest.approx(mesh_val, rel=5e-3)

    def test_perturbed_wulff_smooth_case_matches_mesh(self):
        from aniso.mesh import aniso_area
        norm = EllipseNorm(np.diag([1.0, 4.0, 2.0]))
        spec = ShapeSpec("perturbed-wulff", norm, r=1.5, eps=0.1, pattern=0)
        g = gen(spec, resolution=5)
        assert perturbed_wulff_perimeter(spec, n_dirs=100_000) == pytest.approx(
            aniso_area(g.mesh, norm), rel=5e-3)


class TestNormSequence:
    def test_smoothed_max_pointwise_bound(self):
        # |phi_h(v) - max|v_i|| <= 3 eps_h log 6 at the sampled direction
        v = np.array([1.0, 0.5, -0.2])
        for h in (5, 10, 20):
            norm = norm_sequence("smoothed-max-to-linf", h, dim=3)
            assert abs(norm.eval(v) - 1.0) <= 3 * 2.0**-h * np.log(6)

    def test_lp_monotone_decreasing(self):
        v = np.array([1.0, 1.0])
        vals = [norm_sequence("lp-to-linf", h, dim=2).eval(v) for h in range(1, 12)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[-1] == pytest.approx(1.0, abs=1e-3)

    def test_cauchy_in_h(self):
        # tied leading coordinates keep the correction term visible
        v = np.array([1.0, 1.0, 0.3])
        vals = [norm_sequence("smoothed-max-to-linf", h, dim=3).eval(v)
                for h in (2, 4, 6, 8)]
        diffs = [abs(a - b) for a, b in zip(vals, vals[1:])]
        assert diffs[0] > diffs[1] > diffs[2] > 0

    def test_index_validated(self):
        with pytest.raises(InvalidArgumentError):
            norm_sequence("smoothed-max-to-linf", 0)


class TestShapeGrammar:
    def test_full_spec(self):
        spec = parse_shape("two-bubble norm=smoothmax:0.1 r=1.5 neck=0.1", dim=3)
        assert spec.kind == "two-bubble"
        assert spec.norm.family == "smoothmax"
        assert spec.r == 1.5
        assert spec.neck_width == 0.1

    def test_default_norm(self):
        spec = parse_shape("wulff r=2", dim=2, default_norm=EuclideanNorm(2))
        assert spec.r == 2.0 and spec.norm.family == "euclidean"

    def test_unknown_key_rejected(self):
        with pytest.raises(InvalidArgumentError):
            parse_shape("wulff radius=2", dim=2, default_norm=EuclideanNorm(2))

    def test_missing_norm_rejected(self):
        with pytest.raises(InvalidArgumentError):
            parse_shape("wulff r=2", dim=2)
