"""Ground-truth data generation and brute-force likelihood oracles.

Event times are drawn by thinning: candidate points from a homogeneous
process at a per-subject majorant rate, accepted with probability equal to
the current intensity ratio.  The intensity is history-dependent through
the behavioral response, so generation is sequential within a subject;
across subjects each stream is an independent counter-based generator
split from the master seed, making the output reproducible regardless of
evaluation order.

The quadrature oracles integrate the per-draw conditional likelihood and
the posterior frailty mean directly, providing the independent reference
the closed forms are tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln

from .data import CaptureHistory
from .errors import DataError, EstimationError
from .likelihood import ModelContext
from .model import BehaviorSpec, ModelSpec, ParamState

__all__ = [
    "ConstantRate",
    "PiecewiseRate",
    "SinusoidRate",
    "SimulationConfig",
    "simulate",
    "oracle_subject_loglik",
    "oracle_total_loglik",
    "oracle_posterior_frailty",
]


@dataclass(frozen=True)
class ConstantRate:
    """Flat baseline rate: cumulative hazard ``level * t``."""

    level: float

    def rate(self, t: float) -> float:
        return self.level

    def sup_rate(self, tau: float) -> float:
        return self.level

    def cum(self, t: float) -> float:
        return self.level * t


@dataclass(frozen=True)
class PiecewiseRate:
    """Piecewise-constant rate; ``breaks`` are the interior change points."""

    breaks: tuple[float, ...]
    levels: tuple[float, ...]

    def __post_init__(self):
        if len(self.levels) != len(self.breaks) + 1:
            raise DataError("need one more level than break points")
        if any(lv < 0 for lv in self.levels):
            raise DataError("rate levels must be nonnegative")
        if list(self.breaks) != sorted(self.breaks):
            raise DataError("break points must be increasing")

    def rate(self, t: float) -> float:
        idx = np.searchsorted(np.asarray(self.breaks), t, side="right")
        return self.levels[idx]

    def sup_rate(self, tau: float) -> float:
        return max(self.levels)

    def cum(self, t: float) -> float:
        edges = [0.0, *self.breaks, math.inf]
        total = 0.0
        for lv, lo, hi in zip(self.levels, edges[:-1], edges[1:]):
            if t <= lo:
                break
            total += lv * (min(t, hi) - lo)
        return total


@dataclass(frozen=True)
class SinusoidRate:
    """Strictly positive sinusoidal rate ``level * (1 + depth sin(...))``."""

    level: float
    depth: float = 0.5
    period: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if not (0 <= self.depth < 1):
            raise DataError("sinusoid depth must lie in [0, 1) to keep the rate positive")

    def rate(self, t: float) -> float:
        return self.level * (1.0 + self.depth * math.sin(2 * math.pi * t / self.period + self.phase))

    def sup_rate(self, tau: float) -> float:
        return self.level * (1.0 + self.depth)

    def cum(self, t: float) -> float:
        w = 2 * math.pi / self.period
        return self.level * (t + self.depth / w * (math.cos(self.phase) - math.cos(w * t + self.phase)))


@dataclass(frozen=True)
class SimulationConfig:
    """Generative description of a synthetic population.

    ``covariates`` holds generator specs ``(name, kind, *params)`` with
    kinds ``bernoulli`` (p), ``uniform`` (lo, hi) or ``normal`` (mean, sd).
    ``coef`` aligns with the covariate order.  ``frailty_shape=None``
    switches the frailty off.
    """

    n_population: int
    tau: float
    baseline: object = field(default_factory=lambda: ConstantRate(1.0))
    frailty_shape: float | None = None
    coef: tuple[float, ...] = ()
    covariates: tuple = ()
    behavior_factor: float = 1.0
    behavior: BehaviorSpec | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_population < 1 or self.tau <= 0:
            raise DataError("population size and window must be positive")
        if len(self.coef) != len(self.covariates):
            raise DataError("one coefficient per covariate generator")
        if self.behavior_factor <= 0:
            raise DataError("behavior factor must be positive")
        if not np.isfinite(self.baseline.sup_rate(self.tau)):
            raise DataError("baseline rate must be bounded on the window")

    def model_spec(self) -> ModelSpec:
        names = tuple(name for name, *_ in self.covariates)
        return ModelSpec(
            tau=self.tau,
            frailty=self.frailty_shape is not None,
            covariates=names,
            time_varying=not isinstance(self.baseline, ConstantRate),
            behavior=self.behavior,
        )


def _draw_covariates(rng, covariates):
    out = []
    for spec_ in covariates:
        _name, kind, *args = spec_
        if kind == "bernoulli":
            out.append(float(rng.random() < args[0]))
        elif kind == "uniform":
            out.append(float(rng.uniform(args[0], args[1])))
        elif kind == "normal":
            out.append(float(rng.normal(args[0], args[1])))
        else:
            raise DataError(f"unknown covariate generator {kind!r}")
    return tuple(out)


def _subject_stream(seed: int, index: int):
    """Independent counter-based stream for one subject."""
    return np.random.Generator(np.random.Philox(key=seed).jumped(index))


def _thin_events(rng, rate_fn, sup_rate, scale, behavior: BehaviorSpec | None,
                 behavior_factor: float, tau: float):
    """History-dependent thinning with majorant ``scale * max(f,1) * sup``."""
    factor_cap = max(behavior_factor, 1.0)
    majorant = scale * factor_cap * sup_rate
    if majorant <= 0.0:
        return []
    times = []
    onset_time = math.inf
    t = 0.0
    while True:
        t += rng.exponential(1.0 / majorant)
        if t > tau:
            return times
        count = len(times)
        active = False
        if behavior is not None and count >= behavior.onset:
            within_count = behavior.expiry_count is None or count <= behavior.expiry_count
            within_time = behavior.memory_window is None or t <= onset_time + behavior.memory_window
            active = within_count and within_time
        factor = behavior_factor if active else 1.0
        intensity = scale * factor * rate_fn(t)
        if rng.random() * majorant < intensity:
            times.append(t)
            if behavior is not None and len(times) == behavior.onset:
                onset_time = t


def simulate(config: SimulationConfig):
    """Draw a population and its captured subsample.

    Returns ``(all_histories, observed_histories)`` where the first list
    uses empty time tuples for never-captured subjects (as plain tuples of
    times and covariates) and the second holds :class:`CaptureHistory`
    objects for subjects with at least one capture.
    """
    width = len(str(config.n_population - 1)) if config.n_population > 1 else 1
    everyone = []
    observed = []
    for i in range(config.n_population):
        rng = _subject_stream(config.seed, i)
        z = _draw_covariates(rng, config.covariates)
        rho = (
            rng.gamma(config.frailty_shape, 1.0 / config.frailty_shape)
            if config.frailty_shape is not None
            else 1.0
        )
        gamma = math.exp(sum(c * v for c, v in zip(config.coef, z))) if z else 1.0
        times = _thin_events(
            rng,
            config.baseline.rate,
            config.baseline.sup_rate(config.tau),
            rho * gamma,
            config.behavior,
            config.behavior_factor,
            config.tau,
        )
        everyone.append((tuple(times), z, rho))
        if times:
            observed.append(
                CaptureHistory(f"s{i:0{width}d}", tuple(times), z)
            )
    return everyone, observed


# ---------------------------------------------------------------------------
# quadrature oracles


def _oracle_pieces(i: int, params: ParamState, ctx: ModelContext):
    from .likelihood import homogeneous_jumps

    gam = float(ctx.hazard_ratios(params.coef)[i])
    phi = params.behavior_factor
    if ctx.spec.time_varying:
        jumps = np.asarray(params.jumps, dtype=float)
    else:
        jumps = homogeneous_jumps(ctx, params.total_hazard)
    own = ctx.own_idx[ctx.own_ptr[i] : ctx.own_ptr[i + 1]]
    log_prod = float(np.log(jumps[own]).sum())
    s_hat = jumps.sum()
    omst = float(s_hat + (phi - 1.0) * ctx.subject_window_sum(jumps)[i])
    return gam, log_prod, omst


def oracle_subject_loglik(
    i: int, params: ParamState, ctx: ModelContext, conditioning: str = "per_draw"
) -> float:
    """Quadrature evaluation of one subject's conditional log-likelihood.

    Integrates the frailty out numerically (substitution ``x = u/(1-u)``
    onto the unit interval, adaptive Gauss-Kronrod); the per-draw form
    keeps the zero-truncation inside the integrand, the marginal form
    divides by the marginal capture probability afterwards.  Fails loudly
    when the quadrature does not converge.
    """
    alpha = params.frailty_shape
    omega = params.total_hazard
    gam, log_prod, omst = _oracle_pieces(i, params, ctx)
    n_i = float(ctx.counts[i])
    e_i = float(ctx.behavior_counts[i])
    base = e_i * math.log(params.behavior_factor) + n_i * math.log(gam) + log_prod
    if not ctx.spec.frailty:
        return float(base - gam * omst - math.log(-math.expm1(-gam * omega)))

    def integrand(x):
        val = x ** (n_i + alpha - 1.0) * np.exp(-x * (gam * omst + alpha))
        if conditioning == "per_draw":
            val = val / (-np.expm1(-x * gam * omega))
        return val

    def transformed(u):
        x = u / (1.0 - u)
        return integrand(x) / (1.0 - u) ** 2

    value, err = quad(transformed, 0.0, 1.0, epsabs=1e-13, epsrel=1e-11, limit=500)
    if not np.isfinite(value) or value <= 0 or err > max(1e-10, 1e-8 * value):
        raise EstimationError(f"frailty quadrature failed (value={value}, err={err})")
    out = base + alpha * math.log(alpha) - gammaln(alpha) + math.log(value)
    if conditioning == "marginal":
        pbar = -math.expm1(-alpha * math.log1p(gam * omega / alpha))
        out -= math.log(pbar)
    return float(out)


def oracle_total_loglik(
    params: ParamState, ctx: ModelContext, conditioning: str = "per_draw"
) -> float:
    """Quadrature total conditional log-likelihood (small instances only)."""
    if ctx.n > 200:
        raise DataError("quadrature oracle is for small instances")
    return float(
        sum(oracle_subject_loglik(i, params, ctx, conditioning) for i in range(ctx.n))
    )


def oracle_posterior_frailty(
    i: int, params: ParamState, ctx: ModelContext, conditioning: str = "per_draw"
) -> float:
    """Posterior mean frailty for one subject by direct quadrature."""
    alpha = params.frailty_shape
    omega = params.total_hazard
    gam, _, omst = _oracle_pieces(i, params, ctx)
    n_i = float(ctx.counts[i])

    def weight(x):
        val = x ** (n_i + alpha - 1.0) * np.exp(-x * (gam * omst + alpha))
        if conditioning == "per_draw":
            val = val / (-np.expm1(-x * gam * omega))
        return val

    def tf(u, moment):
        x = u / (1.0 - u)
        return weight(x) * x**moment / (1.0 - u) ** 2

    denom, err0 = quad(lambda u: tf(u, 0), 0.0, 1.0, epsabs=1e-14, epsrel=1e-12, limit=500)
    numer, err1 = quad(lambda u: tf(u, 1), 0.0, 1.0, epsabs=1e-14, epsrel=1e-12, limit=500)
    if denom <= 0 or max(err0 / denom, err1 / max(numer, 1e-300)) > 1e-7:
        raise EstimationError("posterior-mean quadrature failed")
    return float(numer / denom)
