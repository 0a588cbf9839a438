import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from penfpca.errors import GridTooSmall, NegativeAlpha, NonIncreasingGrid
from penfpca.grid_penalty import (
    apply_half_smoother,
    apply_smoother,
    build_band_factors,
    build_grid,
    build_penalty,
    smoother_diag,
    trace_smoother,
)

from conftest import random_grid


class TestGrid:
    def test_gaps(self):
        np.testing.assert_array_equal(build_grid([0, 1, 2]).gaps, [1, 1])
        np.testing.assert_array_equal(build_grid([0, 0.5, 2]).gaps, [0.5, 1.5])

    def test_duplicate_knot(self):
        with pytest.raises(NonIncreasingGrid):
            build_grid([0, 1, 1])

    def test_decreasing(self):
        with pytest.raises(NonIncreasingGrid):
            build_grid([0, 2, 1, 3])

    def test_too_small(self):
        with pytest.raises(GridTooSmall):
            build_grid([0, 1])

    def test_immutable(self):
        g = build_grid([0, 1, 2])
        with pytest.raises(ValueError):
            g.times[0] = 5


class TestBandFactors:
    def test_m3_unit(self):
        b = build_band_factors(build_grid([0, 1, 2]))
        np.testing.assert_array_equal(b.q, [[1], [-2], [1]])
        np.testing.assert_allclose(b.r, [[2 / 3]])

    def test_m4_unit(self):
        b = build_band_factors(build_grid([0, 1, 2, 3]))
        np.testing.assert_allclose(b.r, [[2 / 3, 1 / 6], [1 / 6, 2 / 3]])

    def test_band_structure(self, rng):
        g = random_grid(rng, 9)
        b = build_band_factors(g)
        for k in range(7):
            nz = np.flatnonzero(b.q[:, k])
            np.testing.assert_array_equal(nz, [k, k + 1, k + 2])
        assert np.all(np.linalg.eigvalsh(b.r) > 0)

    def test_lines_annihilated(self, rng):
        g = random_grid(rng, 12)
        b = build_band_factors(g)
        w = 3.0 - 1.7 * g.times
        np.testing.assert_allclose(b.q.T @ w, 0, atol=1e-12 * np.abs(b.q).max() * np.abs(w).max())


class TestPenalty:
    def test_m3_unit(self, unit3):
        expected = 1.5 * np.array([[1, -2, 1], [-2, 4, -2], [1, -2, 1]])
        np.testing.assert_allclose(unit3.omega, expected, rtol=1e-14)

    def test_eigendecomposition(self, rng):
        for _ in range(10):
            p = build_penalty(random_grid(rng, int(rng.integers(3, 40))))
            recon = (p.eigvecs * p.eigvals) @ p.eigvecs.T
            assert np.linalg.norm(recon - p.omega) <= 1e-10 * np.linalg.norm(p.omega)
            np.testing.assert_allclose(p.eigvecs.T @ p.eigvecs, np.eye(p.m), atol=1e-12)
            assert np.all(np.diff(p.eigvals) <= 0)
            assert np.all(p.eigvals[:-2] > 1e-8 * p.eigvals[0])
            np.testing.assert_array_equal(p.eigvals[-2:], 0.0)

    def test_null_space(self, pen20):
        lam = pen20.eigvals[0]
        t = pen20.grid.times
        for w in (np.ones(pen20.m), t):
            assert np.linalg.norm(pen20.omega @ w) <= 1e-8 * lam * np.linalg.norm(w)

    def test_sign_convention(self, pen20):
        g = pen20.eigvecs
        idx = np.argmax(np.abs(g), axis=0)
        assert np.all(g[idx, np.arange(pen20.m)] > 0)

    def test_quadratic_form_trivial(self, pen20):
        assert pen20.omega.dot(np.zeros(pen20.m)).dot(np.zeros(pen20.m)) == 0
        v = 2.0 + 0.3 * pen20.grid.times
        assert abs(v @ pen20.omega @ v) <= 1e-8 * pen20.eigvals[0] * (v @ v)

    def test_deterministic(self, rng):
        g = random_grid(rng, 15)
        a, b = build_penalty(g), build_penalty(g)
        assert a.eigvecs.tobytes() == b.eigvecs.tobytes()


@settings(max_examples=40, deadline=None)
@given(
    gaps=st.lists(st.floats(0.05, 5.0), min_size=2, max_size=25),
    seed=st.integers(0, 2**32 - 1),
)
def test_psd_with_linear_null_space(gaps, seed):
    t = np.concatenate([[0.0], np.cumsum(gaps)])
    p = build_penalty(build_grid(t))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(p.m)
    v /= np.linalg.norm(v)
    q = v @ p.omega @ v
    scale = p.eigvals[0]
    assert q >= -1e-8 * scale
    # distance of v from span{1, t} controls the quadratic form
    basis = np.linalg.qr(np.column_stack([np.ones(p.m), t]))[0]
    resid = v - basis @ (basis.T @ v)
    if np.linalg.norm(resid) > 1e-6:
        assert q > 0
    # projected onto the null space it vanishes
    w = basis @ (basis.T @ v)
    assert abs(w @ p.omega @ w) <= 1e-8 * scale


class TestSmoother:
    def _dense(self, p, alpha):
        return np.eye(p.m) + alpha * p.omega

    def test_alpha_zero(self, pen20, rng):
        w = rng.standard_normal(pen20.m)
        np.testing.assert_allclose(apply_smoother(pen20, 0.0, w), w, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(apply_half_smoother(pen20, 0.0, w), w, rtol=1e-12, atol=1e-12)

    def test_null_space_fixed(self, pen20):
        w = 1.0 - 2.0 * pen20.grid.times
        for a in (0.1, 10.0, 1e6):
            np.testing.assert_allclose(apply_smoother(pen20, a, w), w, rtol=1e-8, atol=1e-8)

    def test_dense_solve(self, pen20, rng):
        for alpha in (0.01, 1.0, 100.0):
            A = self._dense(pen20, alpha)
            for _ in range(20):
                w = rng.standard_normal(pen20.m)
                x = np.linalg.solve(A, w)
                got = apply_smoother(pen20, alpha, w)
                assert np.linalg.norm(got - x) <= 1e-10 * np.linalg.norm(x)

    def test_half_twice_is_full(self, pen20, rng):
        w = rng.standard_normal(pen20.m)
        for alpha in (0.3, 30.0):
            twice = apply_half_smoother(pen20, alpha, apply_half_smoother(pen20, alpha, w))
            full = apply_smoother(pen20, alpha, w)
            assert np.linalg.norm(twice - full) <= 1e-10 * np.linalg.norm(full)

    def test_half_on_eigvec(self, pen20):
        alpha = 2.5
        for k in (0, 5, pen20.m - 1):
            g = pen20.eigvecs[:, k]
            expected = g / np.sqrt(1 + alpha * pen20.eigvals[k])
            np.testing.assert_allclose(apply_half_smoother(pen20, alpha, g), expected, atol=1e-12)

    def test_negative_alpha(self, pen20):
        with pytest.raises(NegativeAlpha):
            apply_smoother(pen20, -1.0, np.zeros(pen20.m))
        with pytest.raises(NegativeAlpha):
            trace_smoother(pen20, -0.5)

    def test_matrix_input(self, pen20, rng):
        W = rng.standard_normal((pen20.m, 3))
        got = apply_smoother(pen20, 1.0, W)
        for j in range(3):
            np.testing.assert_allclose(got[:, j], apply_smoother(pen20, 1.0, W[:, j]))


class TestTrace:
    def test_alpha_zero(self, pen20):
        assert trace_smoother(pen20, 0.0) == pytest.approx(pen20.m, rel=1e-14)
        np.testing.assert_allclose(smoother_diag(pen20, 0.0), 1.0, rtol=1e-12)

    def test_matches_explicit_inverse(self, pen20):
        for alpha in (0.1, 1.0, 10.0):
            S = np.linalg.inv(np.eye(pen20.m) + alpha * pen20.omega)
            assert trace_smoother(pen20, alpha) == pytest.approx(np.trace(S), rel=1e-10)
            np.testing.assert_allclose(smoother_diag(pen20, alpha), np.diag(S), rtol=1e-10)

    def test_large_alpha_limit(self, pen20):
        assert abs(trace_smoother(pen20, 1e12) - 2.0) < 1e-3

    def test_monotone_and_bounded(self, pen20):
        alphas = np.logspace(-4, 8, 60)
        tr = np.array([trace_smoother(pen20, a) for a in alphas])
        assert np.all(np.diff(tr) < 0)
        assert np.all((tr > 2) & (tr <= pen20.m))
        for a in alphas[::7]:
            d = smoother_diag(pen20, a)
            assert np.all((d > 0) & (d <= 1 + 1e-12))
