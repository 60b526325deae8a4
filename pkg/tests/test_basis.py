"""Tests for B-spline systems, trapezoid quadrature and regression-spline fits."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sofrvem.basis import make_basis, smooth_fit, trapezoid, trapezoid_weights
from sofrvem.errors import InputError


@pytest.fixture
def cubic4():
    return make_basis((0.0, 1.0), 4, 3, np.linspace(0.0, 1.0, 100))


class TestMakeBasis:
    def test_partition_of_unity(self, cubic4):
        np.testing.assert_allclose(cubic4.B.sum(axis=1), 1.0, atol=1e-10)

    def test_gram_symmetric(self, cubic4):
        assert np.max(np.abs(cubic4.J - cubic4.J.T)) <= 1e-12

    def test_gram_psd(self):
        basis = make_basis((0.0, 2.0), 9, 3, np.linspace(0.0, 2.0, 40))
        assert np.linalg.eigvalsh(basis.J).min() >= -1e-10

    def test_gram_matches_fine_grid(self):
        # independent route: scipy's B-spline design matrix on a 10^5-point grid
        from scipy.interpolate import BSpline

        fine = np.linspace(0.0, 1.0, 100_000)
        basis = make_basis((0.0, 1.0), 4, 3, fine)
        Bf = BSpline.design_matrix(fine, basis.knots, 3, extrapolate=True).toarray()
        w = np.full(fine.size, fine[1] - fine[0])
        w[[0, -1]] *= 0.5
        J_ref = Bf.T @ (w[:, None] * Bf)
        np.testing.assert_allclose(basis.J, J_ref, rtol=1e-6)

    def test_coarse_gram_close_to_fine(self, cubic4):
        fine = make_basis((0.0, 1.0), 4, 3, np.linspace(0.0, 1.0, 100_000)).J
        np.testing.assert_allclose(cubic4.J, fine, rtol=1e-3)

    def test_gram_converges_as_grid_doubles(self):
        fine = np.linspace(0.0, 1.0, 100_001)
        ref = make_basis((0.0, 1.0), 6, 3, fine).J
        errors = []
        for n_t in (26, 51, 101, 201, 401):
            J = make_basis((0.0, 1.0), 6, 3, np.linspace(0.0, 1.0, n_t)).J
            errors.append(np.max(np.abs(J - ref)) / np.max(np.abs(ref)))
        assert all(b < a for a, b in zip(errors, errors[1:]))

    def test_knot_count(self):
        basis = make_basis((0.0, 1.0), 7, 3, np.linspace(0, 1, 50))
        interior = basis.knots[4:-4]
        assert basis.K == interior.size + basis.degree + 1
        np.testing.assert_allclose(np.diff(basis.knots[3:-3]), 0.25)

    def test_right_endpoint_last_function_is_one(self, cubic4):
        assert cubic4.B[-1, -1] == pytest.approx(1.0)
        assert np.all(cubic4.B[-1, :-1] == 0.0)

    def test_immutable(self, cubic4):
        with pytest.raises(ValueError):
            cubic4.B[0, 0] = 2.0

    @pytest.mark.parametrize("kwargs, match", [
        (dict(K=3), "too small"),
        (dict(grid=np.array([0.0, 0.5, 0.4])), "increasing"),
        (dict(grid=np.array([])), "non-empty"),
        (dict(grid=np.array([-0.1, 0.5])), "outside"),
    ])
    def test_errors(self, kwargs, match):
        args = dict(domain=(0.0, 1.0), K=4, degree=3, grid=np.linspace(0, 1, 10))
        args.update(kwargs)
        with pytest.raises(InputError, match=match):
            make_basis(**args)

    @settings(max_examples=30, deadline=None)
    @given(K=st.integers(4, 12), n_t=st.integers(20, 200),
           lo=st.floats(-5, 5), width=st.floats(0.1, 10))
    def test_partition_property(self, K, n_t, lo, width):
        grid = np.linspace(lo, lo + width, n_t)
        basis = make_basis((lo, lo + width), K, 3, grid)
        np.testing.assert_allclose(basis.B.sum(axis=1), 1.0, atol=1e-10)
        assert np.max(np.abs(basis.J - basis.J.T)) <= 1e-12
        assert np.linalg.eigvalsh(basis.J).min() >= -1e-10


class TestSmoothFit:
    def test_recovers_representable(self, cubic4):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((5, 4))
        np.testing.assert_allclose(smooth_fit(A @ cubic4.B.T, cubic4), A, atol=1e-8)

    def test_constant_curve(self, cubic4):
        A = smooth_fit(np.ones((1, 100)), cubic4)
        np.testing.assert_allclose(cubic4.curve(A[0]), 1.0, atol=1e-10)

    def test_beats_random_coefficients(self):
        grid = np.linspace(0, 1, 81)
        basis = make_basis((0, 1), 7, 3, grid)
        rng = np.random.default_rng(11)
        curve = np.sin(2 * np.pi * grid) + 0.1 * rng.standard_normal(81)
        a = smooth_fit(curve, basis)[0]
        rss = np.sum((curve - basis.curve(a)) ** 2)
        for _ in range(100):
            other = a + rng.standard_normal(7)
            assert rss <= np.sum((curve - basis.curve(other)) ** 2)

    def test_idempotent(self, cubic4):
        rng = np.random.default_rng(4)
        A = smooth_fit(rng.standard_normal((3, 100)), cubic4)
        A2 = smooth_fit(A @ cubic4.B.T, cubic4)
        np.testing.assert_allclose(A2, A, atol=1e-10)

    def test_rank_deficient(self):
        basis = make_basis((0.0, 1.0), 8, 3, np.array([0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 1.0]))
        with pytest.raises(InputError, match="rank deficient"):
            smooth_fit(np.ones((1, 9)), basis)

    def test_too_few_points(self):
        basis = make_basis((0.0, 1.0), 8, 3, np.linspace(0, 1, 5))
        with pytest.raises(InputError):
            smooth_fit(np.ones((1, 5)), basis)


class TestTrapezoid:
    @pytest.mark.parametrize("grid", [np.linspace(0, 1, 7), np.array([0.0, 0.1, 0.5, 0.55, 1.0])])
    def test_linear_exact(self, grid):
        assert trapezoid(2 * grid, grid) == pytest.approx(1.0, abs=1e-15)

    def test_constant(self):
        grid = np.linspace(0, 2, 13)
        assert trapezoid(np.full(13, 5.0), grid) == pytest.approx(10.0, abs=1e-14)

    def test_quadratic(self):
        grid = np.linspace(0, 1, 100)
        assert abs(trapezoid(grid ** 2, grid) - 1 / 3) < 1e-4

    def test_length_mismatch(self):
        with pytest.raises(InputError, match="mismatch"):
            trapezoid(np.ones(3), np.linspace(0, 1, 4))

    def test_too_short(self):
        with pytest.raises(InputError):
            trapezoid(np.ones(1), np.zeros(1))
