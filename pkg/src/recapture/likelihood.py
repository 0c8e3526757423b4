"""Conditional likelihood, expected complete conditional likelihood, score.

Notation used throughout (arrays over ``n`` subjects and ``K`` distinct
event times):

* ``g_i = rho_i * gamma_i`` combined subject rate factor,
* ``b_ik`` indicator that subject ``i``'s behavioral response is active at
  event time ``t_k``; it is 1 exactly on a contiguous index window, so all
  contractions against it reduce to prefix sums,
* ``B_k`` the risk denominator at ``t_k`` whose reciprocal scales the
  baseline jump there.

Zero-truncation (conditioning on at least one capture) can be applied two
ways, and the package implements both behind a common interface:

``per_draw``
    Each frailty draw's likelihood is divided by its own capture
    probability before mixing over the frailty law.  The frailty integrals
    then reduce to Hurwitz zeta values and the conditioning correction per
    subject is the plugged miss odds ``A_i = exp(-x)/(1-exp(-x))``.

``marginal``
    The mixture likelihood is divided by the marginal capture probability
    ``1 - (a/(a+gamma*Omega))^a``.  This is the sampling density of an
    observed subject, so the resulting estimator is Fisher-consistent; all
    integrals collapse to elementary Gamma forms.  The conditioning
    correction per subject is ``gamma * E[rho | never captured] * miss
    odds``, and the two modes coincide as the frailty degenerates.

The profile log-ECCL plugs the closed-form jumps into every cumulative-
hazard slot (including the conditioning term), which makes its gradient
vanish exactly where the jump-sum consistency equation holds.

Time-homogeneous submodels constrain the jumps to the event-time spacings,
``theta_k = Omega * (t_k - t_{k-1}) / t_K``: the cumulative hazard grows
linearly in time (constant-rate semantics, which keeps behavioral
submodels consistent under their own generative reading) while the
likelihood stays a product of jump masses, so homogeneous fits are a
one-parameter subfamily of the time-varying family and their
log-likelihoods nest exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, psi

from .data import check_histories
from .errors import (
    DataError,
    DegenerateBaselineError,
    DegenerateExposureError,
)
from .model import ModelSpec, ParamState, behavior_window
from .zeta import log_hurwitz_zeta

__all__ = [
    "ModelContext",
    "build_context",
    "miss_odds",
    "marginal_capture_probability",
    "risk_denominator",
    "subject_loglik",
    "total_loglik",
    "eccl_loglik",
    "homogeneous_jumps",
    "profile_jumps",
    "profile_eccl_loglik",
    "score_vector",
    "frailty_shape_score",
    "CONDITIONING_MODES",
]

# Frailty shape at or above this cap is treated as the degenerate (no
# heterogeneity) limit; the likelihood switches to its exact limiting form
# so that restricted and unrestricted fits nest without approximation error.
ALPHA_CAP = 1e8

CONDITIONING_MODES = ("per_draw", "marginal")


def _check_mode(conditioning: str) -> str:
    if conditioning not in CONDITIONING_MODES:
        raise DataError(f"unknown conditioning mode {conditioning!r}")
    return conditioning


@dataclass(frozen=True)
class ModelContext:
    """Immutable per-dataset cache: design arrays and event-time structure.

    Subjects are held in canonical (id-sorted) order so every reduction is
    independent of input ordering.
    """

    spec: ModelSpec
    ids: tuple[str, ...]
    Z: np.ndarray              # (n, p)
    counts: np.ndarray         # (n,) captures per subject
    first_times: np.ndarray    # (n,)
    event_times: np.ndarray    # (K,) ordered distinct capture times
    event_mult: np.ndarray     # (K,) capture multiplicities dN
    own_idx: np.ndarray        # (total,) event index of each capture
    own_ptr: np.ndarray        # (n+1,) CSR offsets into own_idx
    window_start: np.ndarray   # (n,) behavior window (start, end]
    window_end: np.ndarray
    lo: np.ndarray             # (n,) first event index inside the window
    hi: np.ndarray             # (n,) last event index inside the window
    spacing_share: np.ndarray  # (K,) event-time spacings, normalized
    behavior_counts: np.ndarray  # (n,) captures observed in the active state

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def n_events(self) -> int:
        return len(self.event_times)

    @property
    def p(self) -> int:
        return self.Z.shape[1]

    @property
    def total_captures(self) -> int:
        return int(self.event_mult.sum())

    @property
    def total_behavior(self) -> int:
        return int(self.behavior_counts.sum())

    def hazard_ratios(self, coef) -> np.ndarray:
        coef = np.asarray(coef, dtype=float)
        if coef.size != self.p:
            raise DataError(f"expected {self.p} coefficients, got {coef.size}")
        if self.p == 0:
            return np.ones(self.n)
        return np.exp(self.Z @ coef)

    def event_window_sum(self, weights: np.ndarray) -> np.ndarray:
        """For each event time, the sum of subject weights active there.

        weights: (n,) -> (K,) via the difference-array trick on the
        contiguous activity windows.
        """
        diff = np.zeros(self.n_events + 1)
        valid = self.lo <= self.hi
        np.add.at(diff, self.lo[valid], weights[valid])
        np.add.at(diff, self.hi[valid] + 1, -weights[valid])
        return diff.cumsum()[: self.n_events]

    def subject_window_sum(self, values: np.ndarray) -> np.ndarray:
        """For each subject, the sum of per-event values over its window."""
        prefix = np.concatenate([[0.0], np.cumsum(values)])
        valid = self.lo <= self.hi
        out = np.zeros(self.n)
        out[valid] = prefix[self.hi[valid] + 1] - prefix[self.lo[valid]]
        return out


def build_context(histories, spec: ModelSpec) -> ModelContext:
    """Validate histories and assemble the likelihood cache."""
    histories = check_histories(histories, spec.tau, spec.n_covariates or None)
    n = len(histories)
    p = spec.n_covariates
    Z = np.zeros((n, p))
    for i, h in enumerate(histories):
        if p:
            Z[i] = h.covariates
    counts = np.array([h.n_captures for h in histories])
    first_times = np.array([h.times[0] for h in histories])

    all_times = np.concatenate([h.times for h in histories])
    event_times, inverse, event_mult = np.unique(
        all_times, return_inverse=True, return_counts=True
    )
    own_ptr = np.concatenate([[0], np.cumsum(counts)])
    own_idx = inverse.astype(np.int64)

    window_start = np.empty(n)
    window_end = np.empty(n)
    behavior_counts = np.zeros(n, dtype=np.int64)
    for i, h in enumerate(histories):
        start, end = behavior_window(h, spec)
        window_start[i], window_end[i] = start, end
        behavior_counts[i] = sum(1 for t in h.times if start < t <= end)
    lo = np.searchsorted(event_times, window_start, side="right")
    hi = np.searchsorted(event_times, window_end, side="right") - 1
    spacings = np.diff(event_times, prepend=0.0)
    spacing_share = spacings / spacings.sum()

    return ModelContext(
        spec=spec,
        ids=tuple(h.subject_id for h in histories),
        Z=Z,
        counts=counts,
        first_times=first_times,
        event_times=event_times,
        event_mult=event_mult.astype(float),
        own_idx=own_idx,
        own_ptr=own_ptr,
        window_start=window_start,
        window_end=window_end,
        lo=lo,
        hi=hi,
        spacing_share=spacing_share,
        behavior_counts=behavior_counts,
    )


# ---------------------------------------------------------------------------
# conditioning corrections


def miss_odds(rho, gamma, total_hazard):
    """Odds of zero captures given the rate: ``exp(-x)/(1-exp(-x))``.

    Diverges as exposure vanishes, which signals a degenerate model state.
    """
    x = np.asarray(rho, dtype=float) * np.asarray(gamma, dtype=float) * float(total_hazard)
    if np.any(x <= 0.0):
        raise DegenerateExposureError("zero exposure: miss odds diverge")
    out = 1.0 / np.expm1(x)
    return float(out) if out.ndim == 0 else out


def marginal_capture_probability(gamma, alpha, total_hazard):
    """Capture probability with the frailty integrated out.

    ``1 - (alpha / (alpha + gamma * Omega))^alpha``, the zero-truncation
    weight of the marginal model; tends to ``1 - exp(-gamma*Omega)`` as the
    frailty degenerates.
    """
    u = np.asarray(gamma, dtype=float) * float(total_hazard)
    if np.any(u <= 0.0) or alpha <= 0.0:
        raise DegenerateExposureError("marginal capture probability needs positive rates")
    out = -np.expm1(-alpha * np.log1p(u / alpha))
    return float(out) if out.ndim == 0 else out


class _Conditioning:
    """Per-subject zero-truncation corrections and their derivatives.

    ``corr`` enters the jump denominator ``B_k = sum_i g_i w_ik + sum_i
    corr_i``; the derivative hooks feed the profile-score chain terms.
    """

    def __init__(self, mode, rho, gamma, alpha, frail):
        self.mode = mode
        self.rho = rho
        self.gamma = gamma
        self.alpha = alpha
        # Marginal corrections only differ while the frailty is proper.
        self.marginal = mode == "marginal" and frail

    def corr(self, omega):
        if not self.marginal:
            return self.rho * self.gamma * miss_odds(self.rho, self.gamma, omega)
        return self.gamma * self._atilde(omega)

    def _pieces(self, omega):
        a = self.alpha
        u = self.gamma * omega
        c = 1.0 / (1.0 + u / a)
        log_p0 = -a * np.log1p(u / a)
        p0 = np.exp(log_p0)
        pbar = -np.expm1(log_p0)
        return u, c, p0, pbar

    def _atilde(self, omega):
        u, c, p0, pbar = self._pieces(omega)
        return c * p0 / pbar

    def dcorr_domega(self, omega):
        """Elementwise d(corr)/d(omega); strictly negative."""
        if not self.marginal:
            g = self.rho * self.gamma
            a = miss_odds(self.rho, self.gamma, omega)
            return -g * g * a * (1.0 + a)
        a = self.alpha
        u, c, p0, pbar = self._pieces(omega)
        datilde_du = -(c * p0 / ((a + u) * pbar)) * (1.0 + a + a * p0 / pbar)
        return self.gamma * self.gamma * datilde_du

    def corr_coef_coeff(self, omega):
        """Elementwise d(corr)/d(coef_h) divided by Z_ih."""
        if not self.marginal:
            g = self.rho * self.gamma
            x = g * omega
            a = miss_odds(self.rho, self.gamma, omega)
            return g * (a - x * a * (1.0 + a))
        a = self.alpha
        u, c, p0, pbar = self._pieces(omega)
        atilde = c * p0 / pbar
        datilde_du = -(c * p0 / ((a + u) * pbar)) * (1.0 + a + a * p0 / pbar)
        return self.gamma * (atilde + u * datilde_du)

    def loglik_term(self, omega):
        """Per-subject log conditioning denominator (to subtract)."""
        if not self.marginal:
            x = self.rho * self.gamma * omega
            return np.log(-np.expm1(-x))
        u, c, p0, pbar = self._pieces(omega)
        return np.log(pbar)

    def coef_explicit(self, omega):
        """Per-subject conditioning contribution to the coef score.

        d(-log denominator)/d(coef_h) = -coef_explicit * Z_ih.
        """
        if not self.marginal:
            g = self.rho * self.gamma
            return g * omega * miss_odds(self.rho, self.gamma, omega)
        return self.gamma * omega * self._atilde(omega)


def risk_denominator(ctx: ModelContext, phi, rho, gamma, total_hazard, t,
                     conditioning: str = "per_draw", alpha: float | None = None) -> float:
    """Jump-scaling denominator at time ``t``.

    ``sum_i rho_i gamma_i phi^{b_i(t)} + sum_i corr_i``: every subject
    contributes its rate, discounted while its behavioral response is
    active, plus its zero-truncation correction.
    """
    _check_mode(conditioning)
    rho = np.asarray(rho, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    g = rho * gamma
    cond = _Conditioning(conditioning, rho, gamma, alpha, alpha is not None)
    active = (ctx.window_start < t) & (t <= ctx.window_end)
    w = np.where(active, float(phi), 1.0)
    return float((g * w).sum() + cond.corr(float(total_hazard)).sum())


# ---------------------------------------------------------------------------
# baseline plumbing shared by likelihood, ECCL and score


def _check_jumps(ctx: ModelContext, jumps: np.ndarray):
    jumps = np.asarray(jumps, dtype=float)
    if jumps.shape != ctx.event_times.shape:
        raise DataError(
            f"baseline has {jumps.size} jumps but the data have {ctx.n_events} event times"
        )
    if np.any(jumps <= 0.0):
        raise DegenerateBaselineError("zero baseline jump at an observed capture time")
    return jumps


def homogeneous_jumps(ctx: ModelContext, omega_tau: float) -> np.ndarray:
    """Constant-rate baseline as jump masses on the event grid.

    Jumps proportional to the event-time spacings keep the cumulative
    hazard linear in time while staying inside the jump family, so
    homogeneous fits nest exactly inside time-varying ones.
    """
    return omega_tau * ctx.spacing_share


def _state_jumps(ctx: ModelContext, params: ParamState) -> np.ndarray:
    """The jump vector a parameter state denotes.

    Time-varying baselines carry free jumps; homogeneous ones derive them
    from the total hazard (any stored jumps are ignored, keeping the state
    internally consistent by construction).
    """
    if ctx.spec.time_varying:
        return _check_jumps(ctx, params.jumps)
    return homogeneous_jumps(ctx, params.total_hazard)


def _baseline_parts(ctx: ModelContext, params: ParamState):
    """(log product of rates at own captures, effective hazard per subject,
    plugged total hazard)."""
    phi = params.behavior_factor
    jumps = _state_jumps(ctx, params)
    log_prod = (ctx.event_mult * np.log(jumps)).sum()
    s_hat = jumps.sum()
    omst = s_hat + (phi - 1.0) * ctx.subject_window_sum(jumps)
    return log_prod, omst, s_hat


def _frail(params: ParamState, ctx: ModelContext) -> bool:
    return ctx.spec.frailty and params.frailty_shape < ALPHA_CAP


# ---------------------------------------------------------------------------
# observed-data conditional log-likelihood


def _subject_terms(params: ParamState, ctx: ModelContext, conditioning: str):
    """Vector of per-subject conditional log-likelihood contributions."""
    _check_mode(conditioning)
    phi = params.behavior_factor
    omega = params.total_hazard
    gam = ctx.hazard_ratios(params.coef)
    counts = ctx.counts.astype(float)
    jumps = _state_jumps(ctx, params)
    log_jump = np.log(jumps)
    log_prod_i = np.add.reduceat(log_jump[ctx.own_idx], ctx.own_ptr[:-1])
    omst = jumps.sum() + (phi - 1.0) * ctx.subject_window_sum(jumps)
    base = ctx.behavior_counts * np.log(phi) + counts * np.log(gam) + log_prod_i

    if not _frail(params, ctx):
        return base - gam * omst - np.log(-np.expm1(-gam * omega))

    alpha = params.frailty_shape
    common = (
        base
        + alpha * np.log(alpha)
        + gammaln(alpha + counts)
        - gammaln(alpha)
    )
    if conditioning == "per_draw":
        q = (gam * omst + alpha) / (gam * omega)
        return common - (alpha + counts) * np.log(gam * omega) + log_hurwitz_zeta(
            alpha + counts, q
        )
    return (
        common
        - (alpha + counts) * np.log(gam * omst + alpha)
        - np.log(marginal_capture_probability(gam, alpha, omega))
    )


def subject_loglik(
    i: int, params: ParamState, ctx: ModelContext, conditioning: str = "per_draw"
) -> float:
    """Conditional log-likelihood contribution of subject ``i``.

    The default per-draw form is the closed Hurwitz-zeta expression; errors
    on a degenerate baseline (zero jump at an observed capture).
    """
    return float(_subject_terms(params, ctx, conditioning)[i])


def total_loglik(
    params: ParamState, ctx: ModelContext, conditioning: str = "per_draw"
) -> float:
    """Conditional log-likelihood of the whole dataset.

    Returns ``-inf`` when the baseline is degenerate at an observed capture
    time; other input errors propagate.
    """
    try:
        return float(_subject_terms(params, ctx, conditioning).sum())
    except DegenerateBaselineError:
        return -np.inf


# ---------------------------------------------------------------------------
# expected complete conditional log-likelihood and its profile


def eccl_loglik(
    params: ParamState,
    rho: np.ndarray,
    ctx: ModelContext,
    conditioning: str = "per_draw",
) -> float:
    """Expected complete conditional log-likelihood at plugged frailty means.

    The complete-data conditional log-likelihood with each frailty replaced
    by ``rho[i]``: capture terms, the exposure ``-g * Omega*``, the
    zero-truncation correction, and the Gamma log-density of the plugged
    values.  ``params.total_hazard`` feeds the conditioning term; the
    behavior-weighted exposure comes from the baseline itself.
    """
    _check_mode(conditioning)
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (ctx.n,) or np.any(rho <= 0.0):
        raise DataError("rho must be strictly positive, one value per subject")
    phi = params.behavior_factor
    omega = params.total_hazard
    gam = ctx.hazard_ratios(params.coef)
    counts = ctx.counts.astype(float)
    log_prod, omst, _ = _baseline_parts(ctx, params)
    g = rho * gam
    frail = _frail(params, ctx)
    cond = _Conditioning(conditioning, rho, gam, params.frailty_shape, frail)
    val = (
        ctx.total_behavior * np.log(phi)
        + (counts * np.log(gam)).sum()
        + log_prod
        + (counts * np.log(rho)).sum()
        - (g * omst).sum()
        - cond.loglik_term(omega).sum()
    )
    if frail:
        alpha = params.frailty_shape
        val += (
            ctx.n * (alpha * np.log(alpha) - gammaln(alpha))
            + ((alpha - 1.0) * np.log(rho) - alpha * rho).sum()
        )
    return float(val)


def profile_jumps(
    ctx: ModelContext,
    rho: np.ndarray,
    phi: float,
    omega_tau: float,
    gam: np.ndarray,
    alpha: float | None = None,
    conditioning: str = "per_draw",
) -> np.ndarray:
    """Baseline jumps maximizing the ECCL given the other parameters.

    The occurrence/exposure ratio ``dN_k / B_k`` with the conditioning
    correction evaluated at ``omega_tau``.  Only defined for time-varying
    baselines; homogeneous submodels have no free jumps.
    """
    if not ctx.spec.time_varying:
        raise DataError("profile jumps are only defined for time-varying baselines")
    g = rho * gam
    cond = _Conditioning(conditioning, rho, gam, alpha, alpha is not None)
    denom = (
        g.sum()
        + cond.corr(omega_tau).sum()
        + (phi - 1.0) * ctx.event_window_sum(g)
    )
    return ctx.event_mult / denom


def _profile_state(
    ctx: ModelContext,
    rho: np.ndarray,
    phi: float,
    omega_tau: float,
    coef,
    frailty_shape: float | None,
    conditioning: str,
) -> ParamState:
    """Parameter state with the profiled baseline plugged everywhere.

    The conditioning slot is evaluated at the plugged jump total, so the
    state's log-ECCL is the fully-profiled objective whose gradient is
    :func:`score_vector`.
    """
    coef = np.asarray(coef, dtype=float)
    alpha = ALPHA_CAP if frailty_shape is None else float(frailty_shape)
    frail = ctx.spec.frailty and alpha < ALPHA_CAP
    if ctx.spec.time_varying:
        gam = ctx.hazard_ratios(coef)
        jumps = profile_jumps(
            ctx, rho, phi, omega_tau, gam,
            alpha if frail else None,
            conditioning,
        )
        total = jumps.sum()
    else:
        jumps = homogeneous_jumps(ctx, omega_tau)
        total = omega_tau
    return ParamState(
        coef=coef,
        log_behavior=np.log(phi),
        log_frailty_shape=np.log(alpha),
        log_total_hazard=np.log(total),
        jumps=jumps,
    )


def profile_eccl_loglik(
    ctx: ModelContext,
    rho: np.ndarray,
    phi: float,
    omega_tau: float,
    coef,
    frailty_shape: float | None = None,
    conditioning: str = "per_draw",
) -> float:
    """Log-ECCL with the profiled baseline plugged into every hazard slot.

    ``omega_tau`` parameterizes the profile (it scales the conditioning
    correction inside the jump formula); the likelihood itself is evaluated
    at the plugged jump total, so the gradient of this function vanishes
    exactly where the jump-sum consistency equation and the remaining score
    equations hold.
    """
    rho = np.asarray(rho, dtype=float)
    state = _profile_state(ctx, rho, phi, omega_tau, coef, frailty_shape, conditioning)
    return eccl_loglik(state, rho, ctx, conditioning)


def score_vector(
    params: ParamState,
    rho: np.ndarray,
    ctx: ModelContext,
    conditioning: str = "per_draw",
) -> np.ndarray:
    """Analytic gradient of the profiled log-ECCL.

    Components: behavioral factor, total hazard, then one per covariate.
    Matches central finite differences of :func:`profile_eccl_loglik` and
    vanishes (all components) at a converged fit.
    """
    _check_mode(conditioning)
    rho = np.asarray(rho, dtype=float)
    phi = params.behavior_factor
    omega_tau = params.total_hazard
    coef = np.asarray(params.coef, dtype=float)
    gam = ctx.hazard_ratios(coef)
    g = rho * gam
    counts = ctx.counts.astype(float)
    e_tot = float(ctx.total_behavior)
    p = ctx.p
    frail = _frail(params, ctx)
    cond = _Conditioning(conditioning, rho, gam, params.frailty_shape, frail)
    out = np.empty(2 + p)

    if not ctx.spec.time_varying:
        # Jumps are pinned to omega_tau * spacing_share; the total-hazard
        # score is the share-weighted sum of the per-jump gradients.
        share_win = ctx.subject_window_sum(ctx.spacing_share)
        t_win = omega_tau * share_win
        omst = omega_tau + (phi - 1.0) * t_win
        corr = cond.corr(omega_tau)
        out[0] = e_tot / phi - (g * t_win).sum()
        out[1] = (
            ctx.total_captures / omega_tau
            - (g * (1.0 + (phi - 1.0) * share_win)).sum()
            - corr.sum()
        )
        if p:
            expl = counts - g * omst - cond.coef_explicit(omega_tau)
            out[2:] = ctx.Z.T @ expl
        return out

    alpha = params.frailty_shape if frail else None
    jumps = profile_jumps(ctx, rho, phi, omega_tau, gam, alpha, conditioning)
    s_hat = jumps.sum()
    t_win = ctx.subject_window_sum(jumps)
    omst = s_hat + (phi - 1.0) * t_win

    s1 = ctx.event_window_sum(g)
    b_k = g.sum() + cond.corr(omega_tau).sum() + (phi - 1.0) * s1
    d_gap = cond.corr(omega_tau).sum() - cond.corr(s_hat).sum()
    q_scale = -cond.dcorr_domega(omega_tau).sum()

    out[0] = e_tot / phi - (g * t_win).sum() - d_gap * (jumps * s1 / b_k).sum()
    out[1] = d_gap * q_scale * (jumps / b_k).sum()
    if p:
        expl = counts - g * omst - cond.coef_explicit(s_hat)
        c_vec = ctx.Z.T @ (g + cond.corr_coef_coeff(omega_tau))
        s1z = np.stack(
            [ctx.event_window_sum(g * ctx.Z[:, h]) for h in range(p)], axis=1
        )
        r_kh = c_vec[None, :] + (phi - 1.0) * s1z
        out[2:] = ctx.Z.T @ expl - d_gap * ((jumps / b_k)[:, None] * r_kh).sum(axis=0)
    return out


def _atilde_alpha_grad(gam, alpha, omega):
    """Elementwise d(gamma * Atilde)/d(alpha) at exposure gamma*omega."""
    u = gam * omega
    c = 1.0 / (1.0 + u / alpha)
    log_p0 = -alpha * np.log1p(u / alpha)
    p0 = np.exp(log_p0)
    pbar = -np.expm1(log_p0)
    atilde = c * p0 / pbar
    dlogp0 = np.log(c) + 1.0 - c
    return gam * atilde * ((1.0 - c) / alpha + dlogp0 + p0 * dlogp0 / pbar)


def frailty_shape_score(
    params: ParamState, rho: np.ndarray, ctx: ModelContext
) -> float:
    """Gradient of the marginal profiled log-ECCL in the frailty shape.

    Differentiates the same fully-profiled objective as
    :func:`score_vector`, using the exact posterior moments (mean and
    log-mean are both closed form under the marginal conditioning), so by
    the usual EM identity this equals the observed-data profile score for
    the shape.  Only defined for the marginal mode with a proper frailty.
    """
    if not _frail(params, ctx):
        raise DataError("frailty shape score requires an active frailty")
    alpha = params.frailty_shape
    phi = params.behavior_factor
    omega_tau = params.total_hazard
    gam = ctx.hazard_ratios(params.coef)
    rho = np.asarray(rho, dtype=float)
    counts = ctx.counts.astype(float)
    g = rho * gam

    chain = 0.0
    if ctx.spec.time_varying:
        cond = _Conditioning("marginal", rho, gam, alpha, True)
        s1 = ctx.event_window_sum(g)
        b_k = g.sum() + cond.corr(omega_tau).sum() + (phi - 1.0) * s1
        jumps = ctx.event_mult / b_k
        s_hat = jumps.sum()
        omst = s_hat + (phi - 1.0) * ctx.subject_window_sum(jumps)
        d_gap = cond.corr(omega_tau).sum() - cond.corr(s_hat).sum()
        dcorr_dalpha = _atilde_alpha_grad(gam, alpha, omega_tau).sum()
        chain = -d_gap * dcorr_dalpha * (jumps / b_k).sum()
    else:
        s_hat = omega_tau
        jumps = homogeneous_jumps(ctx, omega_tau)
        omst = s_hat + (phi - 1.0) * ctx.subject_window_sum(jumps)

    e_log_rho = psi(alpha + counts) - np.log(alpha + gam * omst)
    u = gam * s_hat
    c = 1.0 / (1.0 + u / alpha)
    log_p0 = -alpha * np.log1p(u / alpha)
    p0 = np.exp(log_p0)
    pbar = -np.expm1(log_p0)
    dlogp0 = np.log(c) + 1.0 - c
    val = (
        ctx.n * (np.log(alpha) + 1.0 - psi(alpha))
        + (e_log_rho - rho).sum()
        + (p0 * dlogp0 / pbar).sum()
    )
    return float(val + chain)
