"""EM machinery: E-step, baseline update, shape updates, Newton M-step, fit."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from recapture import (
    BehaviorSpec,
    CaptureHistory,
    EmConfig,
    ModelSpec,
    ParamState,
    baseline_update,
    build_context,
    fit,
    moment_frailty_shape,
    oracle_posterior_frailty,
    posterior_frailty,
    score_vector,
)
from recapture.em import m_step, initial_state
from recapture.errors import DataError, IdentifiabilityError
from conftest import random_instance, simulate_dataset

MODES = ("per_draw", "marginal")


class TestPosteriorFrailty:
    @pytest.mark.parametrize("mode", MODES)
    def test_matches_quadrature(self, mode):
        for seed in range(12):
            ctx, params, _ = random_instance(seed, classic=seed % 2 == 0)
            got = posterior_frailty(params, ctx, mode)
            for i in range(min(ctx.n, 3)):
                want = oracle_posterior_frailty(i, params, ctx, mode)
                assert got[i] == pytest.approx(want, abs=1e-8)

    @pytest.mark.parametrize("mode", MODES)
    def test_degenerate_shape_is_unit(self, mode):
        ctx, params, _ = random_instance(4)
        big = params.replace(log_frailty_shape=math.log(1e6))
        vals = posterior_frailty(big, ctx, mode)
        assert np.all(np.abs(vals - 1.0) < 1e-3)

    @pytest.mark.parametrize("mode", MODES)
    def test_more_captures_higher_mean(self, mode):
        # Two subjects identical except for the capture count.
        hists = [
            CaptureHistory("a", (0.3,), ()),
            CaptureHistory("b", (0.3, 0.31, 0.32), ()),
        ]
        spec = ModelSpec(tau=1.0, behavior=None)
        ctx = build_context(hists, spec)
        params = ParamState(
            coef=np.empty(0),
            log_behavior=0.0,
            log_frailty_shape=math.log(1.5),
            log_total_hazard=math.log(1.0),
            jumps=1.0 * ctx.event_mult / ctx.event_mult.sum(),
        )
        rho = posterior_frailty(params, ctx, mode)
        assert rho[1] > rho[0]
        for i in range(2):
            assert rho[i] == pytest.approx(
                oracle_posterior_frailty(i, params, ctx, mode), abs=1e-8
            )


class TestBaselineUpdate:
    def test_single_subject_hand_value(self):
        # One capture, unit rates: the strict first-capture indicator is
        # inactive, so the jump is 1/(1 + A) = 1 - exp(-Omega).
        hists = [CaptureHistory("s", (0.4,), ())]
        spec = ModelSpec(tau=1.0, behavior=BehaviorSpec())
        ctx = build_context(hists, spec)
        omega = 0.9
        params = ParamState(
            coef=np.empty(0),
            log_behavior=math.log(0.3),
            log_frailty_shape=math.log(1e9),
            log_total_hazard=math.log(omega),
            jumps=np.array([0.5]),
        )
        jumps = baseline_update(params, np.array([1.0]), ctx)
        assert jumps[0] == pytest.approx(-math.expm1(-omega), rel=1e-12)

    def test_duplicated_dataset_invariant(self):
        # Doubling every multiplicity doubles both numerator and denominator.
        ctx, params, rho = random_instance(6)
        hists = [
            CaptureHistory(sid, tuple(ctx.event_times[ctx.own_idx[ctx.own_ptr[i]:ctx.own_ptr[i+1]]]), tuple(ctx.Z[i]))
            for i, sid in enumerate(ctx.ids)
        ]
        doubled = hists + [
            CaptureHistory("dup" + h.subject_id, h.times, h.covariates) for h in hists
        ]
        ctx2 = build_context(doubled, ctx.spec)
        by_id = dict(zip(ctx.ids, rho))
        rho2 = np.array([by_id[sid.removeprefix("dup")] for sid in ctx2.ids])
        j1 = baseline_update(params, rho, ctx)
        j2 = baseline_update(params, rho2, ctx2)
        np.testing.assert_allclose(j1, j2, rtol=1e-12)

    def test_unit_rates_closed_form(self):
        # factor 1, no covariates, unit frailty means: dN * (1-e^-Omega)/n.
        hists = simulate_dataset(n_population=300, rate=1.1, seed=5)
        spec = ModelSpec(tau=1.0, behavior=BehaviorSpec())
        ctx = build_context(hists, spec)
        omega = 1.3
        params = ParamState(
            coef=np.empty(0),
            log_behavior=0.0,
            log_frailty_shape=0.0,
            log_total_hazard=math.log(omega),
            jumps=np.ones(ctx.n_events) / ctx.n_events,
        )
        jumps = baseline_update(params, np.ones(ctx.n), ctx)
        want = ctx.event_mult * (-math.expm1(-omega)) / ctx.n
        np.testing.assert_allclose(jumps, want, rtol=1e-12)


class TestFrailtyShapeUpdates:
    def test_constant_means_hit_cap(self):
        alpha, note = moment_frailty_shape(np.ones(50))
        assert alpha == 1e8
        assert note is not None

    def test_gamma_sample_consistency(self):
        rng = np.random.default_rng(12)
        rho = rng.gamma(5.0, 1.0 / 5.0, size=100_000)
        alpha, note = moment_frailty_shape(rho)
        assert note is None
        assert alpha == pytest.approx(5.0, rel=0.05)

    def test_two_point_matches_grid_search(self):
        rho = np.array([0.5, 1.5])
        alpha, _ = moment_frailty_shape(rho)
        grid = np.linspace(0.05, 60.0, 400_000)
        vals = (
            grid * np.log(grid)
            - np.vectorize(math.lgamma)(grid)
            + (grid - 1.0) * np.log(rho).mean()
            - grid * rho.mean()
        )
        assert alpha == pytest.approx(grid[np.argmax(vals)], abs=1e-3)
        # stationarity to high precision
        from recapture import digamma

        resid = math.log(alpha) - digamma(alpha) + np.log(rho).mean() - rho.mean() + 1.0
        assert abs(resid) < 1e-10

    def test_rejects_nonpositive(self):
        with pytest.raises(DataError):
            moment_frailty_shape(np.array([1.0, -0.5]))


class TestMStep:
    def test_fixed_point_is_kept(self):
        ctx, params, rho = random_instance(9)
        cfg = EmConfig()
        solved = m_step(params, rho, ctx, cfg)
        again = m_step(solved, rho, ctx, cfg)
        assert np.allclose(
            [solved.behavior_factor, solved.total_hazard],
            [again.behavior_factor, again.total_hazard],
            rtol=1e-8,
        )
        np.testing.assert_allclose(solved.coef, again.coef, rtol=1e-7, atol=1e-9)

    def test_homogeneous_stationarity(self, plain_poisson_histories):
        # Fully homogeneous restriction reproduces the count-only closed
        # form (1 - e^-mu)/mu = n/K.
        spec = ModelSpec(tau=1.0, frailty=False, time_varying=False, behavior=None)
        ctx = build_context(plain_poisson_histories, spec)
        cfg = EmConfig(conditioning="marginal")
        solved = m_step(initial_state(ctx), np.ones(ctx.n), ctx, cfg)
        n, k_tot = ctx.n, ctx.total_captures
        mu = brentq(lambda m: -np.expm1(-m) / m - n / k_tot, 1e-9, 60, xtol=1e-13)
        assert solved.total_hazard == pytest.approx(mu, abs=1e-8)

    @pytest.mark.parametrize("mode", MODES)
    def test_score_zero_at_solution(self, mode):
        # Solve from the homogeneous starting point on well-posed data, the
        # way the EM loop uses the solver.
        for seed in (14, 15, 16):
            hists = simulate_dataset(
                n_population=400, frailty_shape=2.0, behavior_factor=0.7,
                onset=1, coef=(0.5,), seed=seed,
            )
            spec = ModelSpec(tau=1.0, covariates=("x",), behavior=BehaviorSpec())
            ctx = build_context(hists, spec)
            rho = np.random.default_rng(seed).uniform(0.6, 1.6, ctx.n)
            cfg = EmConfig(conditioning=mode)
            solved = m_step(initial_state(ctx), rho, ctx, cfg)
            s = score_vector(solved, rho, ctx, mode)
            assert np.abs(s).max() < 1e-6


class TestFit:
    @pytest.mark.parametrize("mode", MODES)
    def test_homogeneous_model_closed_form(self, mode, plain_poisson_histories):
        spec = ModelSpec(tau=1.0, frailty=False, time_varying=False, behavior=None)
        cfg = EmConfig(conditioning=mode, compute_information=False)
        res = fit(plain_poisson_histories, spec, cfg)
        n = len(plain_poisson_histories)
        k_tot = sum(h.n_captures for h in plain_poisson_histories)
        mu = brentq(lambda m: -np.expm1(-m) / m - n / k_tot, 1e-9, 60, xtol=1e-13)
        assert res.converged
        assert res.params.total_hazard == pytest.approx(mu, abs=1e-8)

    def test_subject_order_invariance(self):
        hists = simulate_dataset(
            n_population=300, frailty_shape=2.0, behavior_factor=0.6, onset=1,
            coef=(0.5,), seed=33,
        )
        spec = ModelSpec(tau=1.0, covariates=("x",), behavior=BehaviorSpec())
        cfg = EmConfig(compute_information=False)
        res1 = fit(hists, spec, cfg)
        rng = np.random.default_rng(0)
        shuffled = list(hists)
        rng.shuffle(shuffled)
        res2 = fit(shuffled, spec, cfg)
        np.testing.assert_allclose(res1.loglik_trace, res2.loglik_trace, rtol=0, atol=1e-12)
        assert res1.loglik == res2.loglik

    def test_constraint_and_score_at_convergence(self):
        hists = simulate_dataset(
            n_population=500, frailty_shape=2.0, behavior_factor=0.6, onset=2, seed=8,
        )
        spec = ModelSpec(tau=1.0, behavior=BehaviorSpec(onset=2))
        for mode in MODES:
            res = fit(hists, spec, EmConfig(conditioning=mode, compute_information=False))
            assert res.converged
            gap = abs(res.params.jumps.sum() - res.params.total_hazard)
            assert gap < 1e-8
            s = score_vector(res.params, res.frailty_means, res.context, mode)
            assert np.abs(s).max() < 1e-6

    def test_marginal_trace_is_monotone(self):
        hists = simulate_dataset(
            n_population=600, frailty_shape=1.5, behavior_factor=0.5, onset=1,
            coef=(0.7,), seed=21,
        )
        spec = ModelSpec(tau=1.0, covariates=("x",), behavior=BehaviorSpec())
        res = fit(hists, spec, EmConfig(conditioning="marginal", compute_information=False))
        diffs = np.diff(res.loglik_trace)
        assert np.all(diffs >= -1e-10 * (1.0 + np.abs(res.loglik_trace[1:])))
        assert res.converged

    def test_identifiability_gate(self):
        hists = [CaptureHistory(f"s{i}", (0.1 + 0.01 * i,), ()) for i in range(30)]
        spec = ModelSpec(tau=1.0, behavior=BehaviorSpec())
        with pytest.raises(IdentifiabilityError):
            fit(hists, spec)

    def test_constant_covariate_warns(self):
        hists = simulate_dataset(n_population=200, rate=1.5, seed=3)
        hists = [CaptureHistory(h.subject_id, h.times, (1.0,)) for h in hists]
        spec = ModelSpec(tau=1.0, covariates=("const",), behavior=None, frailty=False)
        res = fit(hists, spec, EmConfig(compute_information=False, max_iter=30))
        assert any("constant" in w for w in res.warnings)

    def test_info_matrix_positive_definite(self):
        hists = simulate_dataset(
            n_population=800, frailty_shape=2.0, behavior_factor=0.6, onset=1,
            coef=(0.6,), seed=44,
        )
        spec = ModelSpec(tau=1.0, covariates=("x",), behavior=BehaviorSpec())
        for mode in MODES:
            res = fit(hists, spec, EmConfig(conditioning=mode))
            assert res.info_matrix is not None
            eigs = np.linalg.eigvalsh(res.info_matrix)
            assert eigs.min() > 0
            se = res.standard_errors()
            assert all(v > 0 for v in se.values())

    def test_big_shape_degenerates_to_fixed(self, plain_poisson_histories):
        # Poisson data: the frailty fit should pin the shape at the cap and
        # match the frailty-free likelihood exactly.
        hists = plain_poisson_histories[:800]
        base = ModelSpec(tau=1.0, frailty=False, time_varying=False, behavior=None)
        with_h = ModelSpec(tau=1.0, frailty=True, time_varying=False, behavior=None)
        cfg = EmConfig(conditioning="marginal", compute_information=False)
        r0 = fit(hists, base, cfg)
        rh = fit(hists, with_h, cfg)
        assert rh.loglik >= r0.loglik - 1e-9 * abs(r0.loglik)
