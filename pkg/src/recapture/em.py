"""Approximate EM fitting: plug-in E-step, Newton-Raphson M-step.

One sweep updates, in order: the posterior frailty means (closed form), the
free structural parameters by Newton-Raphson on the profiled-ECCL score
system, the baseline jumps, the frailty shape (one-dimensional likelihood
profile by default), and finally the conditional log-likelihood used for
convergence monitoring.

Under marginal zero-truncation the complete-data log-likelihood is linear
in the frailties, so the plug-in E-step is exact and the sweep is a true
EM step (monotone).  Under per-draw truncation the E-step is approximate;
a decreasing likelihood triggers damped re-blending of the frailty means
rather than being fatal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DataError, EstimationError, IdentifiabilityError
from .likelihood import (
    ALPHA_CAP,
    ModelContext,
    build_context,
    frailty_shape_score,
    homogeneous_jumps,
    profile_eccl_loglik,
    profile_jumps,
    score_vector,
    total_loglik,
)
from .model import ModelSpec, ParamState, StepBaseline
from .zeta import digamma, log_zeta_ratio

__all__ = [
    "EmConfig",
    "FitResult",
    "initial_state",
    "posterior_frailty",
    "baseline_update",
    "m_step",
    "moment_frailty_shape",
    "profile_frailty_shape",
    "observed_information",
    "fit",
]


@dataclass(frozen=True)
class EmConfig:
    """Tuning knobs for the EM loop and the inner Newton-Raphson solver.

    ``conditioning`` selects where the zero-truncation is applied:
    ``"marginal"`` (consistent sampling density of observed subjects, the
    default) or ``"per_draw"`` (truncation inside the frailty mixture).
    """

    max_iter: int = 500
    loglik_rel_tol: float = 1e-8
    nr_max_iter: int = 50
    nr_step_tol: float = 1e-10
    fd_step: float = 1e-6
    damping: float = 0.5
    max_damping_retries: int = 5
    alpha_min: float = 1e-3
    alpha_max: float = ALPHA_CAP
    alpha_method: str = "profile"  # or "moment"
    conditioning: str = "marginal"  # or "per_draw"
    compute_information: bool = True

    def __post_init__(self):
        if not (0 < self.damping <= 1):
            raise DataError("damping must lie in (0, 1]")
        if min(self.max_iter, self.nr_max_iter) < 1:
            raise DataError("iteration limits must be positive")
        if min(self.loglik_rel_tol, self.nr_step_tol, self.fd_step) <= 0:
            raise DataError("tolerances must be positive")
        if self.alpha_method not in ("profile", "moment"):
            raise DataError("alpha_method must be 'profile' or 'moment'")
        if self.conditioning not in ("marginal", "per_draw"):
            raise DataError("conditioning must be 'marginal' or 'per_draw'")


@dataclass(frozen=True)
class FitResult:
    """Converged parameters plus diagnostics.

    ``frailty_means`` are the posterior means used by the final accepted
    sweep (the score vanishes with respect to these).  ``info_matrix`` is
    the observed information over ``info_names``, obtained by differencing
    the self-consistent score.
    """

    spec: ModelSpec
    params: ParamState
    frailty_means: np.ndarray
    loglik: float
    loglik_trace: np.ndarray
    converged: bool
    n_iter: int
    conditioning: str
    info_matrix: np.ndarray | None = None
    info_names: tuple[str, ...] = ()
    frailty_shape_se: float | None = None
    warnings: tuple[str, ...] = field(default_factory=tuple)
    context: ModelContext | None = None

    @property
    def baseline(self) -> StepBaseline:
        return StepBaseline(self.context.event_times, self.params.jumps)

    @property
    def free_names(self) -> tuple[str, ...]:
        """Names of the coordinates the M-step actually solved."""
        names = []
        if self.spec.behavior is not None:
            names.append("behavior_factor")
        names.append("total_hazard")
        names.extend(self.spec.covariates)
        return tuple(names)

    def free_values(self) -> np.ndarray:
        out = []
        if self.spec.behavior is not None:
            out.append(self.params.behavior_factor)
        out.append(self.params.total_hazard)
        out.extend(self.params.coef)
        return np.array(out)

    def standard_errors(self) -> dict[str, float]:
        """Wald standard errors keyed by coordinate name."""
        if self.info_matrix is None:
            raise EstimationError("fit was run without information matrix")
        cov = np.linalg.inv(self.info_matrix)
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        out = dict(zip(self.info_names, se))
        if "frailty_shape" not in out and self.frailty_shape_se is not None:
            out["frailty_shape"] = self.frailty_shape_se
        return out


def initial_state(ctx: ModelContext) -> ParamState:
    """Homogeneous-model starting point reachable by every submodel."""
    omega0 = ctx.total_captures / ctx.n
    if ctx.spec.time_varying:
        jumps0 = omega0 * ctx.event_mult / ctx.event_mult.sum()
    else:
        jumps0 = homogeneous_jumps(ctx, omega0)
    return ParamState(
        coef=np.zeros(ctx.p),
        log_behavior=0.0,
        log_frailty_shape=0.0,
        log_total_hazard=math.log(omega0),
        jumps=jumps0,
    )


def _frailty_active(params: ParamState, ctx: ModelContext) -> bool:
    return ctx.spec.frailty and params.frailty_shape < ALPHA_CAP


def _effective_hazard(params: ParamState, ctx: ModelContext) -> np.ndarray:
    phi = params.behavior_factor
    if ctx.spec.time_varying:
        jumps = params.jumps
    else:
        jumps = homogeneous_jumps(ctx, params.total_hazard)
    return jumps.sum() + (phi - 1.0) * ctx.subject_window_sum(jumps)


def posterior_frailty(
    params: ParamState, ctx: ModelContext, conditioning: str = "per_draw"
) -> np.ndarray:
    """Posterior mean frailty per subject given its capture record.

    Per-draw truncation: ``(alpha + N_i) / (gamma_i Omega) *
    zeta(s+1, q)/zeta(s, q)`` with ``s = alpha + N_i`` and ``q = (gamma_i
    Omega*_i + alpha) / (gamma_i Omega)``.  Marginal truncation: the exact
    Gamma posterior mean ``(alpha + N_i) / (alpha + gamma_i Omega*_i)``.
    Degenerate frailty returns all ones.
    """
    if not _frailty_active(params, ctx):
        return np.ones(ctx.n)
    alpha = params.frailty_shape
    gam = ctx.hazard_ratios(params.coef)
    omst = _effective_hazard(params, ctx)
    s = alpha + ctx.counts.astype(float)
    if conditioning == "marginal":
        return s / (alpha + gam * omst)
    omega = params.total_hazard
    q = (gam * omst + alpha) / (gam * omega)
    if np.any(q <= 0.0):  # unreachable for positive parameters
        raise EstimationError("nonpositive zeta shift in E-step")
    return s / (gam * omega) * np.exp(log_zeta_ratio(s, q))


def baseline_update(
    params: ParamState,
    rho: np.ndarray,
    ctx: ModelContext,
    conditioning: str = "per_draw",
) -> np.ndarray:
    """Closed-form jump sizes at the current parameters and frailty means.

    Homogeneous baselines return their constrained (spacing-proportional)
    jumps; time-varying ones the occurrence/exposure ratio.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0.0):
        raise DataError("rho must be strictly positive")
    if not ctx.spec.time_varying:
        return homogeneous_jumps(ctx, params.total_hazard)
    gam = ctx.hazard_ratios(params.coef)
    alpha = params.frailty_shape if _frailty_active(params, ctx) else None
    return profile_jumps(
        ctx, rho, params.behavior_factor, params.total_hazard, gam, alpha, conditioning
    )


def _free_layout(ctx: ModelContext):
    """Names of the unconstrained coordinates solved by the M-step."""
    names = []
    if ctx.spec.behavior is not None:
        names.append("log_behavior")
    names.append("log_total_hazard")
    names.extend(f"coef{j}" for j in range(ctx.p))
    return names


def _unpack(params: ParamState, u: np.ndarray, names) -> ParamState:
    kw = {}
    coef = params.coef.copy()
    for name, val in zip(names, u):
        if name.startswith("coef"):
            coef[int(name[4:])] = val
        else:
            kw[name] = float(val)
    return params.replace(coef=coef, **kw)


def _pack(params: ParamState, names) -> np.ndarray:
    out = []
    for name in names:
        if name.startswith("coef"):
            out.append(params.coef[int(name[4:])])
        else:
            out.append(getattr(params, name))
    return np.array(out, dtype=float)


def _mstep_residual(
    params: ParamState, rho: np.ndarray, ctx: ModelContext, conditioning: str
) -> np.ndarray:
    """Reduced root system in scale-free form.

    Active score components normalized to O(1), with the total-hazard score
    replaced by the equivalent-root relative jump-sum consistency residual
    for time-varying baselines.  The normalization matters: raw scores all
    collapse to zero along the degenerate scale ridge (total hazard to
    zero, behavior factor to infinity), which would otherwise look like a
    root.
    """
    score = score_vector(params, rho, ctx, conditioning)
    k_tot = max(float(ctx.total_captures), 1.0)
    parts = []
    if ctx.spec.behavior is not None:
        parts.append(params.behavior_factor * score[0] / k_tot)
    if ctx.spec.time_varying:
        gam = ctx.hazard_ratios(params.coef)
        alpha = params.frailty_shape if _frailty_active(params, ctx) else None
        s_hat = profile_jumps(
            ctx, rho, params.behavior_factor, params.total_hazard, gam,
            alpha, conditioning,
        ).sum()
        parts.append(s_hat / params.total_hazard - 1.0)
    else:
        parts.append(params.total_hazard * score[1] / k_tot)
    parts.extend(np.asarray(score[2:]) / k_tot)
    return np.array(parts, dtype=float)


def _fd_jacobian(fun, u: np.ndarray, h: float) -> np.ndarray:
    m = len(fun(u))
    jac = np.empty((m, len(u)))
    for j in range(len(u)):
        step = h * max(1.0, abs(u[j]))
        up, dn = u.copy(), u.copy()
        up[j] += step
        dn[j] -= step
        jac[:, j] = (fun(up) - fun(dn)) / (2.0 * step)
    return jac


def _mstep_objective(ctx: ModelContext, rho: np.ndarray, cfg: EmConfig, names):
    """(negative profiled ECCL, gradient in working coordinates)."""

    def fun(u, base: ParamState):
        state = _unpack(base, u, names)
        phi = state.behavior_factor
        omega = state.total_hazard
        alpha = state.frailty_shape if _frailty_active(state, ctx) else None
        with np.errstate(over="ignore", invalid="ignore"):
            val = profile_eccl_loglik(
                ctx, rho, phi, omega, state.coef, alpha, cfg.conditioning
            )
            score = score_vector(state, rho, ctx, cfg.conditioning)
        grad = []
        if ctx.spec.behavior is not None:
            grad.append(phi * score[0])
        grad.append(omega * score[1])
        grad.extend(score[2:])
        grad = np.asarray(grad)
        if not np.isfinite(val) or not np.all(np.isfinite(grad)):
            return np.inf, np.zeros(len(u))
        return -val, -grad

    return fun


def m_step(
    params: ParamState,
    rho: np.ndarray,
    ctx: ModelContext,
    cfg: EmConfig,
) -> ParamState:
    """Maximize the profiled ECCL over the free structural coordinates.

    Quasi-Newton ascent on the profiled objective (which rules out the
    degenerate scale ridge, a flat region of strictly lower likelihood)
    followed by Newton-Raphson polish of the score system; the polish
    Jacobian comes from central differences of the analytic residuals.
    Raises :class:`EstimationError` carrying the best state reached when
    the root cannot be pinned down.
    """
    names = _free_layout(ctx)
    rho = np.asarray(rho, dtype=float)

    def residual(u):
        return _mstep_residual(_unpack(params, u, names), rho, ctx, cfg.conditioning)

    u = _pack(params, names)
    obj = _mstep_objective(ctx, rho, cfg, names)
    res = optimize.minimize(
        lambda v: obj(v, params),
        u,
        jac=True,
        method="L-BFGS-B",
        bounds=[(-30.0, 30.0)] * len(u),
        options={"maxiter": 200, "ftol": 1e-14, "gtol": 1e-10},
    )
    if np.all(np.isfinite(res.x)):
        u = res.x

    r = residual(u)
    best = (float(np.max(np.abs(r))), u)
    for _ in range(cfg.nr_max_iter):
        if np.max(np.abs(r)) < 1e-11:
            break
        jac = _fd_jacobian(residual, u, cfg.fd_step)
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        big = np.max(np.abs(step))
        if big > 2.0:
            step = step * (2.0 / big)
        lam = 1.0
        norm0 = np.linalg.norm(r)
        for _ in range(40):
            u_new = u + lam * step
            with np.errstate(over="ignore", invalid="ignore"):
                r_new = residual(u_new)
            if (
                np.all(np.isfinite(r_new))
                and np.max(np.abs(u_new)) < 35.0
                and np.linalg.norm(r_new) < norm0
            ):
                break
            lam *= 0.5
        else:
            break
        u, r = u_new, r_new
        if np.max(np.abs(r)) < best[0]:
            best = (float(np.max(np.abs(r))), u)
        if np.max(np.abs(lam * step)) < cfg.nr_step_tol:
            break
    if best[0] > 1e-7:
        err = EstimationError(
            f"M-step did not reach the score root (scaled residual {best[0]:.3e})"
        )
        err.last_state = _unpack(params, best[1], names)
        raise err
    return _unpack(params, best[1], names)


def moment_frailty_shape(rho, alpha_max: float = ALPHA_CAP):
    """Stationary frailty shape of the plugged Gamma log-density sum.

    Solves ``log a - psi(a) = mean(rho) - mean(log rho) - 1``; the left side
    decreases from +inf to 0, so when the right side is below its value at
    the cap the update is pinned there (degenerate-frailty regime).

    Returns ``(alpha, warning_or_None)``.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0.0):
        raise DataError("rho must be strictly positive")
    d = float(rho.mean() - np.log(rho).mean() - 1.0)
    at_cap = math.log(alpha_max) - digamma(alpha_max)
    if d <= at_cap:
        return alpha_max, "frailty shape at cap: plugged means carry no heterogeneity"
    fn = lambda a: math.log(a) - digamma(a) - d
    alpha = optimize.brentq(fn, 1e-12, alpha_max, xtol=1e-12, rtol=1e-14)
    return float(alpha), None


def profile_frailty_shape(params: ParamState, ctx: ModelContext, cfg: EmConfig):
    """Frailty shape maximizing the conditional likelihood.

    One-dimensional bounded search on the log scale, with an explicit
    comparison against the degenerate (capped) limit.

    Returns ``(alpha, warning_or_None)``.
    """

    def neg(la):
        return -total_loglik(
            params.replace(log_frailty_shape=la), ctx, cfg.conditioning
        )

    res = optimize.minimize_scalar(
        neg,
        bounds=(math.log(cfg.alpha_min), math.log(cfg.alpha_max)),
        method="bounded",
        options={"xatol": 1e-9},
    )
    cap_val = neg(math.log(cfg.alpha_max))
    if cap_val <= res.fun:
        return cfg.alpha_max, "frailty shape at cap: no evidence of heterogeneity"
    return float(math.exp(res.x)), None


def _rescaled_jumps(params: ParamState, omega_new: float) -> np.ndarray:
    if params.jumps.size == 0:
        return params.jumps
    return params.jumps * (omega_new / params.total_hazard)


def _raw_free_values(params: ParamState, ctx: ModelContext) -> np.ndarray:
    out = []
    if ctx.spec.behavior is not None:
        out.append(params.behavior_factor)
    out.append(params.total_hazard)
    out.extend(params.coef)
    return np.array(out, dtype=float)


def _raw_free_state(params: ParamState, ctx: ModelContext, v: np.ndarray) -> ParamState:
    """Parameter state at raw free-coordinate values ``v``.

    Total-hazard perturbations rescale the plugged baseline proportionally;
    the other coordinates leave it untouched.
    """
    j = 0
    kw = {}
    if ctx.spec.behavior is not None:
        kw["log_behavior"] = math.log(v[j])
        j += 1
    omega = float(v[j])
    kw["log_total_hazard"] = math.log(omega)
    j += 1
    coef = np.asarray(v[j : j + ctx.p], dtype=float)
    return params.replace(coef=coef, jumps=_rescaled_jumps(params, omega), **kw)


def _free_score(
    params: ParamState, rho: np.ndarray, ctx: ModelContext, conditioning: str
) -> np.ndarray:
    score = score_vector(params, rho, ctx, conditioning)
    keep = ([0] if ctx.spec.behavior is not None else []) + [1] + list(range(2, 2 + ctx.p))
    return score[keep]


def self_consistent_frailty(
    params: ParamState,
    ctx: ModelContext,
    conditioning: str,
    max_pass: int = 80,
) -> tuple[np.ndarray, ParamState]:
    """Fixed point of the (frailty means, profiled jumps) pair at ``params``.

    The posterior means depend on the baseline through the effective hazard
    while the profiled jumps depend on the means; differencing the score for
    the observed information needs both refreshed to mutual consistency at
    every perturbed point.
    """
    state = params
    rho = posterior_frailty(state, ctx, conditioning)
    if not (_frailty_active(params, ctx) and ctx.spec.time_varying):
        return rho, state
    for _ in range(max_pass):
        state = state.replace(jumps=baseline_update(state, rho, ctx, conditioning))
        rho_new = posterior_frailty(state, ctx, conditioning)
        gap = np.max(np.abs(rho_new - rho))
        rho = rho_new
        if gap < 1e-13 * (1.0 + np.max(np.abs(rho))):
            break
    return rho, state


def _info_names(ctx: ModelContext, conditioning: str, frail: bool) -> tuple[str, ...]:
    names = []
    if ctx.spec.behavior is not None:
        names.append("behavior_factor")
    names.append("total_hazard")
    names.extend(ctx.spec.covariates)
    if conditioning == "marginal" and frail:
        names.append("frailty_shape")
    return tuple(names)


def observed_information(
    params: ParamState, ctx: ModelContext, cfg: EmConfig
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Observed information and the coordinate names it covers.

    Minus the central-difference Jacobian of the self-consistent score (the
    frailty means are refreshed at every perturbed point, so the differenced
    curvature approximates the observed-data information rather than the
    larger complete-data one), symmetrized.  Under marginal conditioning
    with a proper frailty the shape has an exact closed-form score, so it is
    included as a coordinate.
    """
    frail = _frailty_active(params, ctx)
    with_alpha = cfg.conditioning == "marginal" and frail
    names = _info_names(ctx, cfg.conditioning, frail)

    def fun(v):
        if with_alpha:
            state = _raw_free_state(params, ctx, v[:-1])
            state = state.replace(log_frailty_shape=math.log(v[-1]))
        else:
            state = _raw_free_state(params, ctx, v)
        rho_v, state = self_consistent_frailty(state, ctx, cfg.conditioning)
        parts = _free_score(state, rho_v, ctx, cfg.conditioning)
        if with_alpha:
            parts = np.append(parts, frailty_shape_score(state, rho_v, ctx))
        return parts

    v = _raw_free_values(params, ctx)
    if with_alpha:
        v = np.append(v, params.frailty_shape)
    jac = _fd_jacobian(fun, v, cfg.fd_step)
    return -0.5 * (jac + jac.T), names


def _identifiability_gate(ctx: ModelContext):
    spec = ctx.spec
    b = spec.behavior
    if b is None:
        return
    window = b.memory_window if b.memory_window is not None else math.inf
    ok = False
    for i in range(ctx.n):
        if ctx.counts[i] >= b.onset + 1:
            own = ctx.own_idx[ctx.own_ptr[i] : ctx.own_ptr[i + 1]]
            t_next = ctx.event_times[own[b.onset]]
            start = ctx.window_start[i]
            if start < t_next < start + window:
                ok = True
                break
    if not ok:
        raise IdentifiabilityError(
            f"behavioral factor unidentified: no subject has a capture "
            f"{b.onset + 1} within {window} time units of its onset capture"
        )


def _alpha_se_profile(params: ParamState, ctx: ModelContext, cfg: EmConfig) -> float | None:
    """Profile-curvature standard error for the frailty shape (None at cap)."""
    alpha = params.frailty_shape
    if not ctx.spec.frailty or alpha >= cfg.alpha_max * 0.999:
        return None
    h = 1e-4 * alpha
    vals = [
        total_loglik(
            params.replace(log_frailty_shape=math.log(alpha + d)), ctx, cfg.conditioning
        )
        for d in (-h, 0.0, h)
    ]
    curv = (vals[0] - 2.0 * vals[1] + vals[2]) / h**2
    if curv >= 0:
        return None
    return float(1.0 / math.sqrt(-curv))


def fit(
    data,
    spec: ModelSpec,
    cfg: EmConfig | None = None,
) -> FitResult:
    """Fit the model by the EM loop.

    ``data`` is either a list of :class:`CaptureHistory` or a prebuilt
    :class:`ModelContext` whose spec matches.  Raises
    :class:`IdentifiabilityError` when a behavioral component cannot be
    identified from the data; non-convergence is reported through the
    ``converged`` flag, not an exception.
    """
    cfg = cfg or EmConfig()
    if isinstance(data, ModelContext):
        if data.spec != spec:
            raise DataError("context was built for a different model spec")
        ctx = data
    else:
        ctx = build_context(data, spec)
    _identifiability_gate(ctx)

    warnings: list[str] = []
    if ctx.p:
        var = ctx.Z.var(axis=0)
        for j in np.flatnonzero(var == 0.0):
            warnings.append(
                f"covariate {ctx.spec.covariates[j]!r} is constant: coefficient "
                "not identified (confounded with the total hazard)"
            )

    params = initial_state(ctx)
    rho = np.ones(ctx.n)
    loglik = total_loglik(params, ctx, cfg.conditioning)
    trace = [loglik]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        rho_prop = posterior_frailty(params, ctx, cfg.conditioning)
        blend = 1.0
        best = None
        solver_failed = False
        for attempt in range(cfg.max_damping_retries + 1):
            rho_try = rho + blend * (rho_prop - rho)
            cand = params
            # The shape step precedes the Newton solve: under marginal
            # conditioning the score depends on the shape through the
            # truncation corrections, and this order leaves the reported
            # score exactly zero at the accepted state.
            if ctx.spec.frailty:
                if cfg.alpha_method == "profile":
                    alpha, note = profile_frailty_shape(cand, ctx, cfg)
                else:
                    alpha, note = moment_frailty_shape(rho_try, cfg.alpha_max)
                if note and not warnings.count(note):
                    warnings.append(note)
                cand = cand.replace(log_frailty_shape=math.log(alpha))
            try:
                cand = m_step(cand, rho_try, ctx, cfg)
            except EstimationError as err:
                solver_failed = True
                warnings.append(f"sweep {it}: {err}")
                blend *= cfg.damping
                continue
            cand = cand.replace(jumps=baseline_update(cand, rho_try, ctx, cfg.conditioning))
            ll = total_loglik(cand, ctx, cfg.conditioning)
            slack = 1e-10 * (1.0 + abs(loglik))
            if np.isfinite(ll) and (best is None or ll > best[0]):
                best = (ll, cand, rho_try)
            if np.isfinite(ll) and ll >= loglik - slack:
                break
            blend *= cfg.damping
            warnings.append(
                f"sweep {it}: likelihood decreased; damping frailty update to {blend:g}"
            )
        if best is None:
            warnings.append(
                f"sweep {it}: no usable update candidate"
                + ("; Newton solver failed" if solver_failed else "")
                + "; stopping"
            )
            break
        ll, cand, rho_try = best
        if ll < loglik - 1e-10 * (1.0 + abs(loglik)):
            # No frailty blend improved the likelihood: the previous state
            # is the ascent peak, so keep it and stop.
            warnings.append(
                f"sweep {it}: stopping at the likelihood peak; further plug-in "
                "updates would decrease it"
            )
            converged = True
            break
        params, rho = cand, rho_try
        prev, loglik = loglik, ll
        trace.append(loglik)
        if abs(loglik - prev) <= cfg.loglik_rel_tol * (1.0 + abs(loglik)):
            converged = True
            break

    info = None
    info_names: tuple[str, ...] = ()
    alpha_se = None
    if cfg.compute_information:
        info, info_names = observed_information(params, ctx, cfg)
        eigs = np.linalg.eigvalsh(info)
        if eigs.min() <= 0:
            warnings.append(
                "observed information is not positive definite "
                f"(min eigenvalue {eigs.min():.3e})"
            )
        if "frailty_shape" not in info_names:
            alpha_se = _alpha_se_profile(params, ctx, cfg)

    return FitResult(
        spec=ctx.spec,
        params=params,
        frailty_means=rho,
        loglik=loglik,
        loglik_trace=np.array(trace),
        converged=converged,
        n_iter=it,
        conditioning=cfg.conditioning,
        info_matrix=info,
        info_names=info_names,
        frailty_shape_se=alpha_se,
        warnings=tuple(warnings),
        context=ctx,
    )
