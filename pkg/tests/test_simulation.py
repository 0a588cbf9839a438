import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from penfpca.errors import AllZeroDiffs, DimensionMismatch
from penfpca.grid_penalty import build_grid
from penfpca.simulation import (
    SimConfig,
    component_mse,
    default_mean_curve,
    generate,
    run_replicate,
    run_study,
    sign_test,
    summarize_ratios,
    true_components,
)


@pytest.fixture(scope="module")
def grid101():
    return build_grid(np.linspace(-1, 1, 101))


class TestConfig:
    def test_defaults(self):
        cfg = SimConfig()
        assert (cfg.n, cfg.m, cfg.sigma1, cfg.sigma2, cfg.sigma) == (101, 101, 20.0, 10.0, 4.0)
        assert cfg.alphas().shape == (32,)

    @pytest.mark.parametrize(
        "kw",
        [dict(n=2), dict(m=2), dict(replicates=0), dict(t_min=1.0, t_max=1.0), dict(sigma1=0.0),
         dict(sigma2=-1.0), dict(sigma=-0.1), dict(base_seed=-1), dict(mean_curve=(1.0, 2.0)),
         dict(alpha_grid=(-1.0, 0.0))],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SimConfig(**kw)


class TestTruth:
    def test_unit_norm_and_signs(self, grid101):
        v1, v2 = true_components(grid101)
        assert np.linalg.norm(v1) == pytest.approx(1, abs=1e-14)
        assert np.linalg.norm(v2) == pytest.approx(1, abs=1e-14)
        assert v1[-1] > 0 and v1[0] < 0 and v2[50] > 0

    def test_orthogonal_by_parity(self, grid101):
        # v1 is odd and v2 even on a symmetric grid
        v1, v2 = true_components(grid101)
        assert abs(v1 @ v2) < 1e-14


class TestGenerate:
    def test_deterministic(self):
        cfg = SimConfig(n=20, m=15)
        assert generate(cfg, 3).tobytes() == generate(cfg, 3).tobytes()
        assert not np.array_equal(generate(cfg, 3), generate(cfg, 4))
        assert not np.array_equal(generate(cfg, 3), generate(SimConfig(n=20, m=15, base_seed=1), 3))

    def test_noise_free_rank_two(self):
        X = generate(SimConfig(n=30, m=21, sigma=0.0), 0)
        s = np.linalg.svd(X, compute_uv=False)
        assert s[2] < 1e-12 * s[0]

    def test_score_variance(self, grid101):
        cfg = SimConfig(n=10_000)
        v1, _ = true_components(grid101)
        var = np.var(generate(cfg, 0) @ v1, ddof=1)
        assert var == pytest.approx(cfg.sigma1**2 + cfg.sigma**2, rel=0.05)

    def test_mean_curve_added(self):
        t = np.linspace(-1, 1, 11)
        mu = default_mean_curve(t)
        a = generate(SimConfig(n=5, m=11), 0)
        b = generate(SimConfig(n=5, m=11, mean_curve=mu), 0)
        np.testing.assert_allclose(b - a, np.tile(mu, (5, 1)), atol=1e-13)


class TestMSE:
    def test_cases(self):
        e = np.eye(4)
        assert component_mse(e[0], e[0]) == 0
        assert component_mse(-e[0], e[0]) == 0
        assert component_mse(e[0], e[1]) == pytest.approx(2 / 4)

    def test_mismatch(self):
        with pytest.raises(DimensionMismatch):
            component_mse(np.ones(3), np.ones(4))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_sign_invariant(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.standard_normal((2, 9))
        a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
        assert component_mse(a, b) == component_mse(-a, b)
        assert 0 <= component_mse(a, b) <= 2 / 9 + 1e-15


class TestSignTest:
    def test_values(self):
        assert sign_test(np.ones(10)) == pytest.approx(1 / 512, rel=1e-12)
        assert sign_test([1] * 5 + [-1] * 5) == 1.0
        assert sign_test([1] * 8 + [-1] * 2) == pytest.approx(0.109375, rel=1e-12)
        assert sign_test([1] * 8 + [-1] * 2 + [0] * 7) == pytest.approx(0.109375, rel=1e-12)

    def test_symmetric(self):
        assert sign_test([1, 1, 1, -1]) == sign_test([-1, -1, -1, 1])

    def test_all_zero(self):
        with pytest.raises(AllZeroDiffs):
            sign_test([0.0, 0.0])


class TestStudy:
    def test_small_study_deterministic(self):
        cfg = SimConfig(n=25, m=31, replicates=2, base_seed=11)
        a = run_study(cfg, workers=1)
        b = run_study(cfg, workers=2)
        assert a.to_dict() == b.to_dict()
        assert not a.failures and len(a.per_replicate) == 2

    def test_summary_recomputes(self):
        rep = run_study(SimConfig(n=25, m=31, replicates=3, base_seed=2), workers=1)
        summary, pvals = summarize_ratios(rep.per_replicate)
        assert summary == rep.ratio_summary and pvals == rep.sign_test_p
        ratios = [r.mse_spdr[0] / r.mse_mpdc[0] for r in rep.per_replicate]
        assert summary["fpc1"]["mean"] == pytest.approx(np.mean(ratios), rel=1e-15)

    def test_noiseless_recovery(self):
        cfg = SimConfig(sigma=0.0, sigma1=20.0, sigma2=0.01, n=60)
        r = run_replicate(cfg, 0)
        assert r.mse_mpdc[0] < 1e-6
