import numpy as np
import pytest

from aniso import (
    DualNorm,
    EllipseNorm,
    EuclideanNorm,
    InvalidArgumentError,
    L1Norm,
    LinfNorm,
    NonUniqueMaximizerError,
    SingularPointError,
    SmoothedMaxNorm,
    UnsupportedOperationError,
    convexity_certificate,
    parse_norm,
    unit_sphere_samples,
)

ALL_SPECS_2D = ["euclidean", "ellipse:1,4", "lp:3", "smoothmax:0.1", "l1", "linf"]
ALL_SPECS_3D = ["euclidean", "ellipse:1,4,2", "lp:3", "smoothmax:0.1", "l1", "linf"]


def fd_grad(f, v, h=1e-6):
    v = np.asarray(v, float)
    out = np.zeros_like(v)
    for i in range(len(v)):
        e = np.zeros_like(v)
        e[i] = h
        out[i] = (f(v + e) - f(v - e)) / (2 * h)
    return out


def fd_hess(f, v, h=1e-4):
    d = len(v)
    out = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            ei = np.zeros(d); ej = np.zeros(d)
            ei[i] = h; ej[j] = h
            out[i, j] = (f(v + ei + ej) - f(v + ei - ej)
                         - f(v - ei + ej) + f(v - ei - ej)) / (4 * h * h)
    return out


class TestEval:
    def test_euclidean_pythagorean(self):
        assert EuclideanNorm(2).eval([3, 4]) == pytest.approx(5.0)

    def test_linf_max_abs(self):
        assert LinfNorm(3).eval([1, -2, 0.5]) == pytest.approx(2.0)

    def test_ellipse_direct_formula(self):
        # oracle: sqrt(v^T Q v)
        Q = np.diag([1.0, 4.0])
        v = np.array([1.0, 1.0])
        assert EllipseNorm(Q).eval(v) == pytest.approx(np.sqrt(v @ Q @ v), rel=1e-14)

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidArgumentError):
            EuclideanNorm(2).eval([np.nan, 1.0])

    @pytest.mark.parametrize("spec", ALL_SPECS_3D)
    def test_homogeneity_and_positivity(self, spec, rng):
        norm = parse_norm(spec, 3)
        v = rng.normal(size=(200, 3))
        vals = norm.eval(v)
        assert np.all(vals > 0)
        for t in (0.25, 2.0, 10.0):
            assert np.allclose(norm.eval(t * v), t * vals, rtol=1e-12)

    @pytest.mark.parametrize("spec", ALL_SPECS_2D)
    def test_triangle_inequality(self, spec, rng):
        norm = parse_norm(spec, 2)
        u = rng.normal(size=(500, 2))
        v = rng.normal(size=(500, 2))
        assert np.all(norm.eval(u + v) <= norm.eval(u) + norm.eval(v) + 1e-12)


class TestGrad:
    def test_euclidean_radial(self):
        assert np.allclose(EuclideanNorm(2).grad([0, 1]), [0, 1])
        assert np.allclose(EuclideanNorm(2).grad([0, 2]), [0, 1])

    def test_ellipse_against_finite_differences(self):
        norm = EllipseNorm(np.diag([1.0, 4.0]))
        assert np.allclose(norm.grad([1, 0]), [1, 0], atol=1e-12)
        for v in ([1.0, 0.7], [-0.3, 1.1]):
            assert np.allclose(norm.grad(v), fd_grad(norm.eval, v), atol=1e-8)

    @pytest.mark.parametrize("spec", ["euclidean", "ellipse:1,4,2", "lp:3", "smoothmax:0.1"])
    def test_gradient_matches_finite_differences(self, spec, rng):
        norm = parse_norm(spec, 3)
        for v in rng.normal(size=(10, 3)):
            assert np.allclose(norm.grad(v), fd_grad(norm.eval, v), atol=2e-7)

    @pytest.mark.parametrize("spec", ["euclidean", "ellipse:1,4,2", "lp:3", "smoothmax:0.1", "l1", "linf"])
    def test_euler_identity_and_zero_homogeneity(self, spec, rng):
        norm = parse_norm(spec, 3)
        v = rng.normal(size=(300, 3))
        g = norm.grad(v)
        assert np.max(np.abs(np.sum(g * v, axis=-1) - norm.eval(v))
                      / norm.eval(v)) <= 1e-10
        for t in (0.5, 2.0, 10.0):
            assert np.allclose(norm.grad(t * v), g, atol=1e-10)

    def test_origin_is_singular(self):
        with pytest.raises(SingularPointError):
            EuclideanNorm(3).grad([0.0, 0.0, 0.0])

    def test_l1_singular_on_hyperplanes(self):
        with pytest.raises(SingularPointError):
            L1Norm(3).grad([1.0, 0.0, 2.0])
        assert np.allclose(L1Norm(3).grad([1.0, -2.0, 3.0]), [1, -1, 1])

    def test_linf_singular_on_ties(self):
        with pytest.raises(SingularPointError):
            LinfNorm(2).grad([1.0, 1.0])
        assert np.allclose(LinfNorm(3).grad([1.0, -2.0, 0.5]), [0, -1, 0])


class TestHess:
    def test_euclidean_projector(self):
        h = EuclideanNorm(2).hess([1.0, 0.0])
        assert np.allclose(h, [[0, 0], [0, 1]], atol=1e-14)

    def test_degree_minus_one_homogeneity(self):
        h = EuclideanNorm(2).hess([2.0, 0.0])
        assert np.allclose(h, [[0, 0], [0, 0.5]], atol=1e-14)

    def test_smoothmax_symmetric_annihilates_radial(self):
        norm = SmoothedMaxNorm(3, 0.1)
        v = np.array([1.0, 1.0, 1.0])
        h = norm.hess(v)
        assert np.allclose(h, h.T, atol=1e-12)
        assert np.allclose(h @ v, 0.0, atol=1e-12)
        # finite-difference oracle
        assert np.abs(h - fd_hess(norm.eval, v)).max() < 1e-5

    @pytest.mark.parametrize("spec", ["ellipse:1,4,2", "lp:3", "smoothmax:0.2"])
    def test_hessian_against_finite_differences(self, spec, rng):
        norm = parse_norm(spec, 3)
        for v in rng.normal(size=(5, 3)):
            assert np.abs(norm.hess(v) - fd_hess(norm.eval, v)).max() < 1e-5

    def test_crystalline_unsupported(self):
        with pytest.raises(UnsupportedOperationError):
            L1Norm(2).hess([1.0, 2.0])
        with pytest.raises(UnsupportedOperationError):
            LinfNorm(2).hess([1.0, 2.0])


class TestDual:
    def test_linf_dual_is_l1(self):
        assert LinfNorm(3).dual().eval([1, -2, 0.5]) == pytest.approx(3.5)

    def test_euclidean_self_dual(self):
        assert EuclideanNorm(2).dual().eval([3, 4]) == pytest.approx(5.0)

    def test_ellipse_dual_grid_search_oracle(self):
        # oracle: maximize u . v over a dense sample of { phi(v) = 1 }
        norm = EllipseNorm(np.diag([1.0, 4.0]))
        th = np.linspace(0, 2 * np.pi, 1_000_000, endpoint=False)
        vs = np.stack([np.cos(th), np.sin(th)], axis=-1)
        vs /= norm.eval(vs)[:, None]
        u = np.array([0.0, 1.0])
        oracle = float(np.max(vs @ u))
        assert oracle == pytest.approx(0.5, abs=1e-9)
        assert norm.dual().eval(u) == pytest.approx(0.5, rel=1e-12)

    def test_dual_grad_examples(self):
        assert np.allclose(EuclideanNorm(2).dual().grad([0, 3]), [0, 1])
        d = EllipseNorm(np.diag([1.0, 4.0])).dual()
        # oracle: argmax over dense sample of the unit phi-sphere gives (0, 0.5)
        assert np.allclose(d.grad([0, 1]), [0, 0.5], atol=1e-12)

    def test_dual_grad_lands_on_unit_sphere(self, rng):
        norm = SmoothedMaxNorm(3, 0.1)
        d = norm.dual()
        u = rng.normal(size=(50, 3))
        v = d.grad(u)
        assert np.allclose(norm.eval(v), 1.0, atol=1e-10)
        assert np.allclose(np.sum(u * v, axis=-1), d.eval(u), rtol=1e-10)

    def test_non_unique_maximizer_on_l1_face(self):
        # the whole face of the l1 unit sphere between e1 and e2 attains the sup
        with pytest.raises(NonUniqueMaximizerError):
            L1Norm(2).dual().grad([1.0, 1.0])

    def test_non_unique_maximizer_on_linf_face(self):
        with pytest.raises(NonUniqueMaximizerError):
            LinfNorm(2).dual().grad([1.0, 0.0])

    def test_numeric_engine_matches_closed_forms(self, rng):
        norm = EllipseNorm(np.diag([1.0, 4.0, 2.0]))
        numeric = DualNorm(norm, force_numeric=True)
        u = rng.normal(size=(40, 3))
        assert np.max(np.abs(numeric.eval(u) - norm.dual().eval(u))
                      / norm.dual().eval(u)) < 1e-10

    def test_smoothmax_polar_against_dense_oracle(self, rng):
        norm = SmoothedMaxNorm(3, 0.1)
        us = unit_sphere_samples(3, 100_000)
        vs = us / norm.eval(us)[:, None]
        u = rng.normal(size=(20, 3))
        oracle = np.max(u @ vs.T, axis=1)
        impl = norm.dual().eval(u)
        # a finite sample of the sphere can only underestimate the sup
        assert np.all(impl >= oracle - 1e-12)
        assert np.max((impl - oracle) / oracle) < 5e-4

    @pytest.mark.parametrize("dim,specs", [(2, ALL_SPECS_2D), (3, ALL_SPECS_3D)])
    def test_fenchel_inequality(self, dim, specs, rng):
        for spec in specs:
            norm = parse_norm(spec, dim)
            dual = norm.dual()
            u = rng.normal(size=(2000, dim))
            v = rng.normal(size=(2000, dim))
            lhs = np.sum(u * v, axis=-1)
            rhs = dual.eval(u) * norm.eval(v)
            assert np.all(lhs <= rhs + 1e-10 * np.maximum(rhs, 1.0)), spec

    @pytest.mark.parametrize("spec", ["euclidean", "ellipse:1,4,2", "lp:3", "smoothmax:0.1"])
    def test_involution_closed_forms(self, spec, rng):
        norm = parse_norm(spec, 3)
        v = rng.normal(size=(1000, 3))
        double = norm.dual().dual()
        err = np.abs(double.eval(v) - norm.eval(v)) / norm.eval(v)
        assert np.max(err) <= 1e-8

    def test_involution_numeric_engine(self, rng):
        # force the ascent/Newton path on the polar of the smoothed max norm
        norm = SmoothedMaxNorm(3, 0.1)
        numeric_bidual = DualNorm(norm.dual(), force_numeric=True)
        v = rng.normal(size=(30, 3))
        err = np.abs(numeric_bidual.eval(v) - norm.eval(v)) / norm.eval(v)
        assert np.max(err) <= 1e-8


class TestConvexityCertificate:
    def test_euclidean_gamma_is_one(self):
        cert = convexity_certificate(EuclideanNorm(3), 1000)
        assert cert.gamma == pytest.approx(1.0, abs=1e-9)

    def test_ellipse_positive_gamma_matches_dense_sweep(self):
        norm = EllipseNorm(np.diag([1.0, 4.0]))
        cert = convexity_certificate(norm, 1000)
        dense = convexity_certificate(norm, 65536)
        assert cert.gamma > 0
        assert cert.gamma == pytest.approx(dense.gamma, rel=1e-4)

    def test_smoothmax_gamma_decreases_toward_zero(self):
        gammas = [convexity_certificate(SmoothedMaxNorm(3, eps), 2000).gamma
                  for eps in (0.2, 0.1, 0.05)]
        assert gammas[0] > gammas[1] > gammas[2] > 0

    def test_crystalline_unsupported(self):
        with pytest.raises(UnsupportedOperationError):
            convexity_certificate(L1Norm(2), 1000)

    def test_sample_count_validated(self):
        with pytest.raises(InvalidArgumentError):
            convexity_certificate(EuclideanNorm(2), 10)


class TestGrammar:
    def test_round_trip_families(self):
        for spec, dim in [("euclidean", 2), ("l1", 3), ("linf", 2),
                          ("lp:3", 3), ("lp:2.5:1,2,3", 3),
                          ("ellipse:1,4", 2), ("smoothmax:0.1", 3)]:
            norm = parse_norm(spec, dim)
            assert norm.dim == dim

    def test_ellipse_entry_counts(self):
        assert np.allclose(parse_norm("ellipse:1,4", 2).Q, np.diag([1, 4]))
        tri = parse_norm("ellipse:2,0.5,1", 2).Q
        assert np.allclose(tri, [[2, 0.5], [0.5, 1]])
        full = parse_norm("ellipse:2,0.5,0.5,1", 2).Q
        assert np.allclose(full, [[2, 0.5], [0.5, 1]])

    def test_rejects_unknown_and_invalid(self):
        with pytest.raises(InvalidArgumentError):
            parse_norm("manhattan", 2)
        with pytest.raises(InvalidArgumentError):
            parse_norm("lp:1", 2)            # crystalline cases are l1/linf
        with pytest.raises(InvalidArgumentError):
            parse_norm("ellipse:1,0", 2)     # not positive definite
        with pytest.raises(InvalidArgumentError):
            parse_norm("smoothmax:0.9", 2)   # level set no longer a gauge body


class TestSequenceComparability:
    def test_two_sided_bounds_uniform_in_h(self):
        # pointwise-converging family: the comparability constants stay
        # bounded away from 0 and infinity uniformly in h
        from aniso import norm_sequence
        us = unit_sphere_samples(3, 2000)
        lows, highs = [], []
        for h in range(1, 21):
            norm = norm_sequence("smoothed-max-to-linf", h, dim=3)
            vals = norm.eval(us)
            lows.append(vals.min())
            highs.append(vals.max())
        assert min(lows) > 0.5
        assert max(highs) < 1.1
