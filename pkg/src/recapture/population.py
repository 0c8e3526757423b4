"""Population-size estimation: inverse-probability weighting and variance.

The size estimate sums reciprocal capture probabilities of the observed
subjects.  Its variance splits, by conditioning on the number observed,
into a binomial part with a closed form and a parameter-uncertainty part
obtained by the delta method through the fitted model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, EstimationError
from .em import FitResult, _raw_free_state, self_consistent_frailty
from .likelihood import marginal_capture_probability

__all__ = [
    "PopulationEstimate",
    "ht_estimate",
    "capture_weights",
    "variance_components",
    "population_estimate",
    "scaled_estimate",
]


@dataclass(frozen=True)
class PopulationEstimate:
    """Size estimate with its variance decomposition.

    ``var_binomial`` is the conditional-on-parameters part
    ``sum (1-w)/w^2``; ``var_param`` the delta-method part through the
    observed information.  The confidence interval is normal-theory Wald,
    floored at the observed count.
    """

    n_observed: int
    estimate: float
    var_binomial: float
    var_param: float
    ci_level: float
    ci_low: float
    ci_high: float
    catchable_fraction: float | None = None
    scaled: float | None = None

    @property
    def se(self) -> float:
        return math.sqrt(self.var_binomial + self.var_param)


def ht_estimate(rho, gammas, total_hazard) -> float:
    """Inverse-probability size estimate with plugged frailty means.

    ``sum_i 1 / (1 - exp(-rho_i * gamma_i * Omega))``.
    """
    w = -np.expm1(
        -np.asarray(rho, dtype=float) * np.asarray(gammas, dtype=float) * float(total_hazard)
    )
    if np.any(w <= 0.0):
        raise DataError("degenerate capture weight: zero capture probability")
    return float((1.0 / w).sum())


def capture_weights(fit: FitResult) -> np.ndarray:
    """Per-subject capture probabilities implied by a fit.

    Marginal conditioning integrates the frailty out; per-draw conditioning
    plugs the final posterior means into the exposure, re-running the
    expectation step at the converged parameters first.
    """
    ctx = fit.context
    params = fit.params
    gam = ctx.hazard_ratios(params.coef)
    if fit.conditioning == "marginal" and ctx.spec.frailty:
        return marginal_capture_probability(
            gam, params.frailty_shape, params.total_hazard
        ) * np.ones(ctx.n)
    rho, _ = self_consistent_frailty(params, ctx, fit.conditioning)
    w = -np.expm1(-rho * gam * params.total_hazard)
    return w


def variance_components(fit: FitResult, fd_step: float = 1e-6):
    """(binomial variance, delta-method variance) of the size estimate.

    The binomial part is ``sum (1-w)/w^2``.  The parameter part is
    ``grad' J^{-1} grad`` where the gradient of the size map is taken by
    central differences over the information coordinates (total-hazard
    perturbations rescale the plugged baseline proportionally, and the
    frailty refresh is folded into the map).
    """
    if fit.info_matrix is None:
        raise EstimationError("fit carries no information matrix")
    w = capture_weights(fit)
    var_binom = float(((1.0 - w) / w**2).sum())

    ctx = fit.context
    params = fit.params
    with_alpha = "frailty_shape" in fit.info_names

    def size_at(v):
        if with_alpha:
            state = _raw_free_state(params, ctx, v[:-1])
            state = state.replace(log_frailty_shape=math.log(v[-1]))
        else:
            state = _raw_free_state(params, ctx, v)
        gam = ctx.hazard_ratios(state.coef)
        if fit.conditioning == "marginal" and ctx.spec.frailty:
            wv = marginal_capture_probability(
                gam, state.frailty_shape, state.total_hazard
            ) * np.ones(ctx.n)
        else:
            rho, state = self_consistent_frailty(state, ctx, fit.conditioning)
            wv = -np.expm1(-rho * gam * state.total_hazard)
        return float((1.0 / wv).sum())

    v0 = []
    if ctx.spec.behavior is not None:
        v0.append(params.behavior_factor)
    v0.append(params.total_hazard)
    v0.extend(params.coef)
    if with_alpha:
        v0.append(params.frailty_shape)
    v0 = np.array(v0, dtype=float)
    grad = np.empty(v0.size)
    for j in range(v0.size):
        h = fd_step * max(1.0, abs(v0[j]))
        up, dn = v0.copy(), v0.copy()
        up[j] += h
        dn[j] -= h
        grad[j] = (size_at(up) - size_at(dn)) / (2.0 * h)

    info = fit.info_matrix
    cond = np.linalg.cond(info)
    if not np.isfinite(cond) or cond > 1e12:
        raise EstimationError(
            f"observed information is numerically singular (condition number {cond:.3e})"
        )
    var_param = float(grad @ np.linalg.solve(info, grad))
    return var_binom, max(var_param, 0.0)


def scaled_estimate(n_hat: float, fraction: float) -> float:
    """Rescale a catchable-population estimate by the catchable fraction."""
    if not (0.0 < fraction <= 1.0):
        raise DataError("catchable fraction must lie in (0, 1]")
    return float(n_hat) / float(fraction)


def population_estimate(
    fit: FitResult,
    ci_level: float = 0.95,
    catchable_fraction: float | None = None,
    fd_step: float = 1e-6,
) -> PopulationEstimate:
    """Full population-size estimate from a converged fit."""
    from scipy.stats import norm

    w = capture_weights(fit)
    n_obs = fit.context.n
    n_hat = float((1.0 / w).sum())
    var_binom, var_param = variance_components(fit, fd_step=fd_step)
    se = math.sqrt(var_binom + var_param)
    z = float(norm.ppf(0.5 + ci_level / 2.0))
    lo = max(n_hat - z * se, float(n_obs))
    hi = n_hat + z * se
    scaled = scaled_estimate(n_hat, catchable_fraction) if catchable_fraction else None
    return PopulationEstimate(
        n_observed=n_obs,
        estimate=n_hat,
        var_binomial=var_binom,
        var_param=var_param,
        ci_level=ci_level,
        ci_low=lo,
        ci_high=hi,
        catchable_fraction=catchable_fraction,
        scaled=scaled,
    )
