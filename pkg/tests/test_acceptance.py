"""End-to-end acceptance suite.

Each test prints one PASS line with its headline numbers; tolerances are
fixed here, not tuned at runtime.  The replication study (criterion 5) is
computed once and shared across its three sub-criteria.
"""

import json
import math
import re
import time

import numpy as np
import pytest
from scipy import stats

from recapture import (
    BehaviorSpec,
    ConstantRate,
    CountSummary,
    EmConfig,
    ModelSpec,
    SimulationConfig,
    chao_estimate,
    fit,
    fit_model,
    grid_search,
    hurwitz_zeta,
    likelihood_ratio_test,
    m0_estimate,
    oracle_posterior_frailty,
    oracle_total_loglik,
    population_estimate,
    posterior_frailty,
    profile_eccl_loglik,
    score_vector,
    simulate,
    zeta_integral,
)
from recapture.cli import main as cli_main
from conftest import random_instance, simulate_dataset

STREET_COUNTS = CountSummary((50785, 1124, 60, 4))


def test_criterion_1_count_estimators():
    """Chao lower bound and homogeneous estimate from the count fixture."""
    t0 = time.perf_counter()
    chao, chao_se = chao_estimate(STREET_COUNTS)
    m0, mu = m0_estimate(STREET_COUNTS)
    elapsed = time.perf_counter() - t0
    assert abs(chao / 1.20e6 - 1.0) < 0.005
    assert abs(m0 / 1.11e6 - 1.0) < 0.01
    assert elapsed < 1.0
    print(
        f"\nACCEPTANCE 1 PASS: chao={chao:.1f} (within 0.5% of 1.20e6), "
        f"m0={m0:.1f} (within 1% of 1.11e6), mu={mu:.5f}, {elapsed * 1e3:.1f} ms"
    )


def test_criterion_2_closed_form_oracle_equivalence():
    """Closed forms vs direct frailty quadrature on 200 random instances."""
    t0 = time.perf_counter()
    worst_ll = 0.0
    worst_rho = 0.0
    for seed in range(200):
        ctx, params, _ = random_instance(
            seed, classic=seed % 2 == 0, time_varying=seed % 5 != 0
        )
        from recapture import total_loglik

        closed = total_loglik(params, ctx, "per_draw")
        quad = oracle_total_loglik(params, ctx, "per_draw")
        worst_ll = max(worst_ll, abs(closed - quad))
        rho = posterior_frailty(params, ctx, "per_draw")
        for i in range(min(ctx.n, 2)):
            want = oracle_posterior_frailty(i, params, ctx, "per_draw")
            worst_rho = max(worst_rho, abs(rho[i] - want))
    elapsed = time.perf_counter() - t0
    assert worst_ll <= 1e-7
    assert worst_rho <= 1e-8
    assert elapsed < 120.0
    print(
        f"\nACCEPTANCE 2 PASS: max |closed - quadrature| loglik = {worst_ll:.2e} "
        f"(<=1e-7), max E-step gap = {worst_rho:.2e} (<=1e-8), {elapsed:.1f} s"
    )


def _fd_gradient(f, v, h=1e-6):
    out = np.empty(len(v))
    for j in range(len(v)):
        e = np.zeros(len(v))
        e[j] = h * max(1.0, abs(v[j]))
        out[j] = (f(v + e) - f(v - e)) / (2.0 * e[j])
    return out


def test_criterion_3_score_correctness():
    """Analytic score vs central differences; stationarity at converged fits."""
    t0 = time.perf_counter()
    worst_rel = 0.0
    for seed in range(20):
        mode = "per_draw" if seed % 2 == 0 else "marginal"
        ctx, params, rho = random_instance(
            seed + 1000, classic=seed % 3 == 0, time_varying=seed % 4 != 0
        )
        alpha = params.frailty_shape

        def f(v):
            return profile_eccl_loglik(ctx, rho, v[0], v[1], v[2:], alpha, mode)

        v0 = np.concatenate([[params.behavior_factor, params.total_hazard], params.coef])
        fd = _fd_gradient(f, v0)
        an = score_vector(params, rho, ctx, mode)
        rel = np.abs(an - fd) / np.maximum(np.abs(fd), 1e-6)
        worst_rel = max(worst_rel, rel.max())
    assert worst_rel <= 1e-4

    worst_score = 0.0
    n_fits = 0
    for seed, model, onset in [(1, "hotb", 1), (2, "htb", 2), (3, "otb", 1), (4, "hot", 1)]:
        data = simulate_dataset(
            n_population=600, frailty_shape=2.0, behavior_factor=0.6, onset=onset,
            coef=(0.5,), seed=seed,
        )
        base = ModelSpec(
            tau=1.0, covariates=("x",), behavior=BehaviorSpec(onset=onset)
        )
        for mode in ("marginal", "per_draw"):
            res = fit_model(data, model, base, EmConfig(
                conditioning=mode, compute_information=False))
            assert res.converged
            s = score_vector(res.params, res.frailty_means, res.context, mode)
            worst_score = max(worst_score, np.abs(s).max())
            gap = abs(res.params.jumps.sum() - res.params.total_hazard)
            assert gap < 1e-8
            n_fits += 1
    elapsed = time.perf_counter() - t0
    assert worst_score < 1e-6
    print(
        f"\nACCEPTANCE 3 PASS: max FD relative gap = {worst_rel:.2e} (<=1e-4); "
        f"max |score| over {n_fits} converged fits = {worst_score:.2e} (<1e-6), "
        f"{elapsed:.1f} s"
    )


def test_criterion_4_zeta_kernel():
    """Riemann point, recurrence over the grid, integral identity."""
    gap_riemann = abs(hurwitz_zeta(2.0, 1.0) - math.pi**2 / 6.0)
    assert gap_riemann <= 1e-12

    # Values on the grid span ~1e2 to ~1e100, so the recurrence is checked
    # relative to magnitude (1e-11 absolute is below double resolution at
    # the large end).
    worst_rec = 0.0
    for s in np.linspace(1.1, 50.0, 15):
        for a in np.geomspace(0.01, 100.0, 15):
            z0 = hurwitz_zeta(s, a)
            gap = abs(z0 - a**-s - hurwitz_zeta(s, a + 1.0)) / max(1.0, abs(z0))
            worst_rec = max(worst_rec, gap)
    assert worst_rec <= 1e-11

    from scipy.integrate import quad

    rng = np.random.default_rng(2024)
    worst_int = 0.0
    for _ in range(100):
        a_exp = rng.uniform(0.2, 4.0)
        b = rng.uniform(0.3, 5.0)
        c = rng.uniform(0.3, 5.0)

        def f(u):
            x = u / (1 - u)
            return (x**a_exp * np.exp(-b * x) / (-np.expm1(-c * x))) / (1 - u) ** 2

        want, _ = quad(f, 0.0, 1.0, epsabs=1e-13, epsrel=1e-11, limit=400)
        worst_int = max(worst_int, abs(zeta_integral(a_exp, b, c) / want - 1.0))
    assert worst_int <= 1e-8
    print(
        f"\nACCEPTANCE 4 PASS: |zeta(2,1)-pi^2/6| = {gap_riemann:.2e} (<=1e-12), "
        f"recurrence = {worst_rec:.2e} (<=1e-11 scaled), "
        f"integral vs quadrature = {worst_int:.2e} (<=1e-8)"
    )


# ---------------------------------------------------------------------------
# criterion 5: replication study, shared across the three sub-criteria

N_TRUE = 2000
TRUE_PARAMS = {
    "behavior_factor": 0.5,
    "total_hazard": 5.0,
    "frailty_shape": 2.0,
    "x": 0.7,
}


def _one_replicate(seed):
    config = SimulationConfig(
        n_population=N_TRUE,
        tau=1.0,
        baseline=ConstantRate(TRUE_PARAMS["total_hazard"]),
        frailty_shape=TRUE_PARAMS["frailty_shape"],
        coef=(TRUE_PARAMS["x"],),
        covariates=(("x", "bernoulli", 0.5),),
        behavior_factor=TRUE_PARAMS["behavior_factor"],
        behavior=BehaviorSpec(onset=2),
        seed=seed,
    )
    _, observed = simulate(config)
    spec = ModelSpec(
        tau=1.0, frailty=True, covariates=("x",), time_varying=True,
        behavior=BehaviorSpec(onset=2),
    )
    res = fit(observed, spec, EmConfig())
    pop = population_estimate(res)
    grid = grid_search(
        observed, spec, onsets=[1, 2, 3],
        cfg=EmConfig(compute_information=False),
    )
    return {
        "converged": res.converged,
        "behavior_factor": res.params.behavior_factor,
        "total_hazard": res.params.total_hazard,
        "frailty_shape": res.params.frailty_shape,
        "x": float(res.params.coef[0]),
        "cover": pop.ci_low <= N_TRUE <= pop.ci_high,
        "selected_onset": grid.best().onset,
    }


@pytest.fixture(scope="module")
def replication_study():
    t0 = time.perf_counter()
    rows = [_one_replicate(seed) for seed in range(100)]
    elapsed = time.perf_counter() - t0
    assert elapsed < 1800.0
    return rows, elapsed


def test_criterion_5a_parameter_recovery(replication_study):
    rows, elapsed = replication_study
    assert all(r["converged"] for r in rows)
    report = []
    for name, truth in TRUE_PARAMS.items():
        vals = np.array([r[name] for r in rows])
        mc_se = vals.std(ddof=1) / math.sqrt(len(vals))
        gap = abs(vals.mean() - truth)
        assert gap <= 3.0 * mc_se, (name, vals.mean(), truth, mc_se)
        report.append(f"{name}: |mean-truth|/SE={gap / mc_se:.2f}")
    print(
        f"\nACCEPTANCE 5a PASS: {'; '.join(report)} (all <=3 MC SEs over 100 "
        f"replicates; study {elapsed / 60:.1f} min)"
    )


def test_criterion_5b_interval_coverage(replication_study):
    rows, _ = replication_study
    covered = sum(r["cover"] for r in rows)
    assert covered >= 88
    print(f"\nACCEPTANCE 5b PASS: 95% Wald CI covered true N in {covered}/100 replicates (>=88)")


def test_criterion_5c_onset_selection(replication_study):
    rows, _ = replication_study
    hits = sum(r["selected_onset"] == 2 for r in rows)
    assert hits > 50
    print(f"\nACCEPTANCE 5c PASS: grid search selected onset 2 in {hits}/100 replicates (>50)")


def test_criterion_6_degeneracy_ladder():
    """Homogeneous data: nested fits order correctly, null LRT p uniform."""
    t0 = time.perf_counter()
    reps = 120
    pvals = []
    for seed in range(reps):
        config = SimulationConfig(
            n_population=600, tau=1.0, baseline=ConstantRate(1.4),
            coef=(0.0,), covariates=(("x", "bernoulli", 0.5),), seed=10_000 + seed,
        )
        _, observed = simulate(config)
        base = ModelSpec(tau=1.0, covariates=("x",), behavior=BehaviorSpec())
        cfg = EmConfig(compute_information=False)
        fits = {
            name: fit_model(observed, name, base, cfg)
            for name in ("0", "b", "h", "hotb")
        }
        lls = {k: v.loglik for k, v in fits.items()}
        slack = 1e-6 * (1.0 + abs(lls["0"]))
        for small, bigger in [("0", "b"), ("0", "h"), ("b", "hotb"), ("h", "hotb")]:
            assert lls[bigger] >= lls[small] - slack, (seed, small, bigger)
        stat, p = likelihood_ratio_test(fits["b"], fits["0"], df=1)
        pvals.append(p)
    ks = stats.kstest(pvals, "uniform")
    elapsed = time.perf_counter() - t0
    assert ks.pvalue > 0.01
    print(
        f"\nACCEPTANCE 6 PASS: nesting held on all {reps} replicates; null LRT "
        f"p-values KS p = {ks.pvalue:.3f} (>0.01), {elapsed / 60:.1f} min"
    )


def test_criterion_7_determinism(tmp_path):
    """Identical inputs, seed and varying thread counts give identical output."""
    sim_dir = tmp_path / "sim"
    rc = cli_main([
        "simulate", "--out", str(sim_dir), "--n-population", "600",
        "--tau", "1.0", "--baseline-level", "1.6", "--frailty-shape", "2.0",
        "--behavior-factor", "0.6", "--c1", "1",
        "--covariate", "x:bernoulli:0.5:0.5", "--seed", "11",
    ])
    assert rc == 0
    reports = []
    logliks = []
    for tag, threads in (("t1", "1"), ("t4", "4"), ("t1b", "1")):
        out = tmp_path / tag
        rc = cli_main([
            "grid", "--events", str(sim_dir / "events.csv"),
            "--subjects", str(sim_dir / "subjects.csv"), "--tau", "1.0",
            "--model", "hotb", "--c1", "1", "--c1", "2", "--threads", threads,
            "--out", str(out), "--seed", "11",
        ])
        assert rc == 0
        text = (out / "report.json").read_text()
        reports.append(re.sub(r'"timestamp": "[^"]*"', '"timestamp": "-"', text))
        grid = json.loads(text)["grid"]
        logliks.append([row["loglik"] for row in grid])
    assert reports[0] == reports[1] == reports[2]
    for a, b in zip(logliks[0], logliks[1]):
        assert abs(a - b) <= 1e-12 * max(1.0, abs(a))
    print(
        "\nACCEPTANCE 7 PASS: byte-identical reports (modulo timestamp) and "
        "logliks across thread counts {1, 4} and repeated runs"
    )
