"""时变载荷滤波。"""
import numpy as np
import pytest

from core.errors import ConstraintViolation, DimensionMismatch
from core.filter import default_init, run_filter
from core.restrictions import LoadingRestriction, MaskCode, RestrictionKind, build_mask
from core.schemas import TvMode, TvParams, unvec, vec
from core.tv_filter import (
    default_tv_init,
    run_tv_filter,
    score_g,
    score_l,
    tv_common_component,
    tv_information,
    tv_logdensity,
    tv_one_step_forecast,
)


def _frozen(static):
    """A_l = 0, B_l = 1, c_l = 0：载荷固定在初值。"""
    return TvParams(
        c_l=0.0, A_l=0.0, B_l=1.0,
        c_g=static.c, A_g=static.A, B_g=static.B,
        Sigma=static.Sigma, nu=static.nu, beta=static.beta,
    )


def _central_diff(fun, x, h=1e-6):
    g = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


class TestScores:
    def test_scores_match_finite_differences(self, dgp_params):
        rng = np.random.default_rng(9)
        tv = _frozen(dgp_params)
        for _ in range(50):
            l_t = vec(rng.uniform(-1.0, 1.0, (5, 2)))
            g_t = rng.standard_normal(2)
            y_t = unvec(l_t, 5) @ g_t + rng.standard_normal(5)
            np.testing.assert_allclose(
                score_l(y_t, l_t, g_t, tv),
                _central_diff(lambda x: tv_logdensity(y_t, x, g_t, tv), l_t),
                rtol=1e-6, atol=1e-7,
            )
            np.testing.assert_allclose(
                score_g(y_t, l_t, g_t, tv),
                _central_diff(lambda x: tv_logdensity(y_t, l_t, x, tv), g_t),
                rtol=1e-6, atol=1e-7,
            )

    def test_wrong_sizes(self, dgp_params):
        with pytest.raises(DimensionMismatch):
            score_l(np.zeros(5), np.zeros(9), np.zeros(2), _frozen(dgp_params))


class TestRunTvFilter:
    def test_frozen_loadings_reproduce_static_filter(self, dgp_params, sim_panel):
        static = run_filter(sim_panel, dgp_params)
        tv = run_tv_filter(
            sim_panel, _frozen(dgp_params),
            l_init=vec(dgp_params.Lambda), g_init=default_init(dgp_params),
        )
        np.testing.assert_allclose(tv.factors, static.factors, rtol=1e-10, atol=1e-12)
        assert tv.total_loglik == pytest.approx(static.total_loglik, rel=1e-10)
        np.testing.assert_array_equal(tv.loadings[-1], vec(dgp_params.Lambda))

    def test_information_recorded_per_period(self, sim_panel):
        rng = np.random.default_rng(4)
        target = vec(rng.uniform(0.2, 1.0, (5, 2)))
        tv = TvParams.targeted(
            target, A_l=0.02, B_l=0.95, c_g=[1.0, 0.1], A_g=[0.1, 0.3], B_g=[0.9, 0.7],
            Sigma=np.full(5, 0.5), nu=5.0,
        )
        out = run_tv_filter(sim_panel, tv)
        assert out.information.shape == (500, 2, 2)
        for t in (0, 100, 499):
            np.testing.assert_allclose(out.information[t], tv_information(out.loadings[t], tv), rtol=1e-12)
        assert not np.allclose(out.loadings[0], out.loadings[-1])

    def test_information_is_symmetric_psd_every_period(self, sim_panel):
        rng = np.random.default_rng(6)
        tv = TvParams.targeted(
            vec(rng.uniform(-1.0, 1.0, (5, 2))), A_l=0.05, B_l=0.9, c_g=[1.0, 0.1], A_g=[0.1, 0.3],
            B_g=[0.9, 0.7], Sigma=np.full(5, 0.5), nu=5.0,
        )
        out = run_tv_filter(sim_panel, tv)
        np.testing.assert_array_equal(out.information, np.transpose(out.information, (0, 2, 1)))
        assert np.all(np.linalg.eigvalsh(out.information) >= -1e-12)

    def test_targeted_loadings_return_to_target_geometrically(self, sim_panel):
        rng = np.random.default_rng(8)
        target = vec(rng.uniform(0.2, 1.0, (5, 2)))
        tv = TvParams.targeted(
            target, A_l=0.0, B_l=0.8, c_g=[1.0, 0.1], A_g=[0.1, 0.3], B_g=[0.9, 0.7],
            Sigma=np.full(5, 0.5), nu=5.0,
        )
        start = target + rng.uniform(-1.0, 1.0, target.size)
        out = run_tv_filter(sim_panel, tv, l_init=start)
        gap = np.linalg.norm(out.loadings - target, axis=1)
        np.testing.assert_allclose(gap[1:40] / gap[:39], 0.8, rtol=1e-8)
        np.testing.assert_allclose(out.loadings[30] - target, 0.8 ** 30 * (start - target), atol=1e-12)

    def test_mask_keeps_fixed_and_tied_entries(self, sim_panel):
        restr = LoadingRestriction(RestrictionKind.GROUP_COMMON, groups=(1, 1, 2, 2, 2))
        mask = build_mask(restr, 5, 3)
        start = mask.expand(np.array([0.7, 0.4, 0.9]))
        tv = TvParams.targeted(
            vec(start), A_l=0.03, B_l=0.9, c_g=[1.0, 0.1, 0.1], A_g=[0.1, 0.2, 0.2],
            B_g=[0.9, 0.7, 0.7], Sigma=np.full(5, 0.5), nu=6.0,
        )
        out = run_tv_filter(sim_panel, tv, mask=mask)
        for t in (1, 250, 499):
            lam = out.loading_matrix(t)
            assert np.all(lam[mask.codes == MaskCode.ZERO] == 0.0)
            np.testing.assert_allclose(mask.project(lam), lam, atol=1e-12)

    def test_forecast_and_common_component(self, dgp_params, sim_panel):
        tv = _frozen(dgp_params)
        out = run_tv_filter(sim_panel, tv, l_init=vec(dgp_params.Lambda))
        np.testing.assert_allclose(tv_one_step_forecast(out, tv), dgp_params.Lambda @ out.next_factor)
        cc = tv_common_component(out, tv)
        np.testing.assert_allclose(cc[3], dgp_params.Lambda @ out.factors[3])

    def test_init_size_mismatch(self, dgp_params, sim_panel):
        with pytest.raises(DimensionMismatch):
            run_tv_filter(sim_panel, _frozen(dgp_params), l_init=np.zeros(4))


class TestDefaultInit:
    def test_targeted_starts_at_target(self):
        target = np.arange(1.0, 7.0)
        tv = TvParams.targeted(target, 0.1, 0.9, [1.0, 0.0], [0.1, 0.1], [0.5, 0.5], np.ones(3), 5.0)
        np.testing.assert_array_equal(default_tv_init(tv), target)

    def test_shared_intercept_needs_fallback(self):
        tv = TvParams(
            c_l=0.1, A_l=0.2, B_l=0.9, c_g=[1.0, 0.1], A_g=[0.1, 0.3], B_g=[0.9, 0.7],
            Sigma=np.ones(4), nu=5.0, mode=TvMode.DIAGONAL_SHARED_C,
        )
        with pytest.raises(ConstraintViolation):
            default_tv_init(tv)
        fallback = np.linspace(0.1, 0.8, 8)
        np.testing.assert_array_equal(default_tv_init(tv, fallback), fallback)

    def test_one_factor_shared_intercept_is_fine(self):
        tv = TvParams(c_l=0.1, A_l=0.2, B_l=0.9, c_g=[1.0], A_g=[[0.1]], B_g=[[0.9]], Sigma=np.ones(3), nu=5.0)
        np.testing.assert_allclose(default_tv_init(tv), np.full(3, 1.0))
