"""Model specification and intensity-model semantics.

The capture intensity for subject ``i`` is

    lambda_i(t) = rho_i * exp(coef . z_i) * f^{active_i(t)} * omega(t)

where ``rho_i`` is a Gamma frailty, ``f`` the behavioral hazard factor,
``omega`` the baseline hazard, and ``active_i(t)`` the behavioral-response
indicator.  The response switches on once the subject has accumulated
``onset`` captures and expires after ``expiry_count`` total captures or
``memory_window`` time units past onset, whichever comes first.  Counting is
left-continuous: the state just before a capture decides whether that
capture occurs at the modified rate, so a subject's own onset capture never
carries the factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .data import CaptureHistory
from .errors import DataError, DomainError, IdentifiabilityError

__all__ = [
    "BehaviorSpec",
    "ModelSpec",
    "StepBaseline",
    "LinearBaseline",
    "ParamState",
    "behavior_window",
    "behavior_active",
    "behavior_capture_count",
    "hazard_ratio",
    "capture_probability",
    "effective_cum_hazard",
    "identifiability_diagnostic",
    "validate_identifiability",
]

_INF = math.inf


@dataclass(frozen=True)
class BehaviorSpec:
    """Shape of the behavioral response to capture.

    ``onset`` is the number of captures that triggers the response
    (1 = classic trap response).  ``expiry_count`` ends it after that many
    total captures; ``memory_window`` ends it that long after onset.  ``None``
    means unbounded.  ``onset=1`` with both bounds unbounded reproduces the
    classic permanent response.
    """

    onset: int = 1
    expiry_count: int | None = None
    memory_window: float | None = None

    def __post_init__(self):
        if int(self.onset) != self.onset or self.onset < 1:
            raise DataError("behavior onset must be an integer >= 1")
        object.__setattr__(self, "onset", int(self.onset))
        if self.expiry_count is not None:
            c2 = int(self.expiry_count)
            if c2 != self.expiry_count or c2 <= self.onset:
                raise DataError("expiry_count must be an integer > onset")
            object.__setattr__(self, "expiry_count", c2)
        if self.memory_window is not None:
            if not (self.memory_window > 0):
                raise DataError("memory_window must be positive")
            object.__setattr__(self, "memory_window", float(self.memory_window))

    @property
    def is_classic(self) -> bool:
        return (
            self.onset == 1
            and self.expiry_count is None
            and self.memory_window is None
        )


@dataclass(frozen=True)
class ModelSpec:
    """Which effects are active, and the observation window length."""

    tau: float
    frailty: bool = True
    covariates: tuple[str, ...] = ()
    time_varying: bool = True
    behavior: BehaviorSpec | None = field(default_factory=BehaviorSpec)

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise DataError("tau must be a positive real")
        object.__setattr__(self, "covariates", tuple(self.covariates))

    @property
    def n_covariates(self) -> int:
        return len(self.covariates)

    @property
    def flags(self) -> str:
        """Active-effect letters in canonical order (h, o, t, b)."""
        out = ""
        if self.frailty:
            out += "h"
        if self.covariates:
            out += "o"
        if self.time_varying:
            out += "t"
        if self.behavior is not None:
            out += "b"
        return out or "0"

    def with_behavior(self, behavior: BehaviorSpec | None) -> "ModelSpec":
        return replace(self, behavior=behavior)


@dataclass(frozen=True)
class StepBaseline:
    """Right-continuous step cumulative hazard with jumps at capture times.

    Evaluation is clamped to the window: ``cum(t) = cum(tau)`` for ``t``
    beyond the last jump, which also gives the convention value at +inf.
    """

    times: np.ndarray
    jumps: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        j = np.asarray(self.jumps, dtype=float)
        if t.shape != j.shape or t.ndim != 1:
            raise DataError("baseline times and jumps must be 1-d and congruent")
        if t.size and np.any(np.diff(t) <= 0):
            raise DataError("baseline jump times must be strictly increasing")
        if np.any(j < 0):
            raise DataError("baseline jumps must be nonnegative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "jumps", j)

    @property
    def total(self) -> float:
        return float(self.jumps.sum())

    def cum(self, t) -> float | np.ndarray:
        """Cumulative hazard up to and including time ``t``."""
        cumsum = np.concatenate([[0.0], np.cumsum(self.jumps)])
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right")
        out = cumsum[idx]
        return float(out) if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class LinearBaseline:
    """Cumulative hazard growing linearly to ``total`` at the window end.

    The representation of a constant baseline rate ``total / tau``;
    evaluation is clamped to the window, matching the step-baseline
    convention beyond ``tau``.
    """

    total: float
    tau: float

    def cum(self, t) -> float | np.ndarray:
        frac = np.clip(np.asarray(t, dtype=float) / self.tau, 0.0, 1.0)
        out = self.total * frac
        return float(out) if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class ParamState:
    """Model parameters in unconstrained form plus baseline jumps.

    ``coef`` holds log hazard-ratios; the scalar parameters are stored on the
    log scale so positivity is structural.  ``jumps`` are the baseline jump
    sizes at the ordered distinct capture times; their sum tracks
    ``total_hazard`` to within solver tolerance.  Time-homogeneous fits have
    no free jumps (empty array): the baseline is ``total_hazard`` spread
    uniformly over the window.
    """

    coef: np.ndarray
    log_behavior: float
    log_frailty_shape: float
    log_total_hazard: float
    jumps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coef", np.asarray(self.coef, dtype=float))
        object.__setattr__(self, "jumps", np.asarray(self.jumps, dtype=float))

    @property
    def behavior_factor(self) -> float:
        return math.exp(self.log_behavior)

    @property
    def frailty_shape(self) -> float:
        return math.exp(self.log_frailty_shape)

    @property
    def total_hazard(self) -> float:
        return math.exp(self.log_total_hazard)

    def replace(self, **kw) -> "ParamState":
        return replace(self, **kw)


def behavior_window(history: CaptureHistory, spec: ModelSpec):
    """Half-open activity window ``(start, end]`` of the behavioral response.

    ``start`` is the onset capture time (+inf when the subject never reaches
    onset); ``end`` caps it by the expiry capture and the memory window.
    With left-continuous counting, the capture that ends the count-based
    window is the one observed with ``expiry_count`` prior captures.
    """
    b = spec.behavior
    if b is None:
        return _INF, _INF
    times = history.times
    n = len(times)
    start = times[b.onset - 1] if n >= b.onset else _INF
    end = _INF
    if b.expiry_count is not None and n >= b.expiry_count + 1:
        end = times[b.expiry_count]
    if b.memory_window is not None:
        end = min(end, start + b.memory_window)
    return start, end


def behavior_active(history: CaptureHistory, t: float, spec: ModelSpec) -> bool:
    """Whether the behavioral response modifies the intensity at time ``t``.

    True iff the capture count just before ``t`` lies in
    ``[onset, expiry_count]`` and ``t`` is within the memory window of the
    onset capture.  Total function: no behavior spec means never active.
    """
    start, end = behavior_window(history, spec)
    return start < t <= end


def behavior_capture_count(history: CaptureHistory, spec: ModelSpec) -> int:
    """Number of captures that occurred while the response was active.

    This is the exponent of the behavioral factor in the likelihood.  For
    the classic spec it equals ``n_captures - 1``: every capture after the
    first happens in the modified state.
    """
    start, end = behavior_window(history, spec)
    return int(sum(1 for t in history.times if start < t <= end))


def hazard_ratio(z, coef) -> float:
    """Multiplicative covariate effect ``exp(coef . z)``."""
    z = np.asarray(z, dtype=float)
    coef = np.asarray(coef, dtype=float)
    if z.shape != coef.shape:
        raise DataError(f"covariate/coefficient length mismatch: {z.shape} vs {coef.shape}")
    return float(np.exp(coef @ z)) if z.size else 1.0


def capture_probability(rho: float, gamma: float, total_hazard: float) -> float:
    """Probability of at least one capture: ``1 - exp(-rho*gamma*Omega)``."""
    if rho < 0 or gamma < 0 or total_hazard < 0:
        raise DomainError("capture_probability requires nonnegative arguments")
    return float(-np.expm1(-rho * gamma * total_hazard))


def effective_cum_hazard(history, baseline, behavior_factor: float, spec: ModelSpec) -> float:
    """Behavior-weighted cumulative baseline hazard over the window.

    Integrates ``f^{active(s)}`` against the baseline measure: the total
    hazard minus ``(1 - f)`` times the hazard mass of the activity window.
    ``baseline`` is any object with ``cum(t)`` and ``total`` (evaluation
    clamped at the window end); the classic spec reduces this to
    ``f*Omega(tau) + (1-f)*Omega(t_first)``.
    """
    total = baseline.total
    if spec.behavior is None:
        return float(total)
    start, end = behavior_window(history, spec)
    lo = baseline.cum(start) if start < _INF else total
    hi = baseline.cum(end) if end < _INF else total
    return float(total + (1.0 - behavior_factor) * (lo - hi))


def identifiability_diagnostic(histories, spec: ModelSpec) -> str | None:
    """None when the behavioral factor is identified, else a diagnostic.

    Identification needs at least one subject whose capture after onset
    falls strictly inside the memory window: some capture must actually be
    observed at the modified rate.
    """
    histories = list(histories)
    if not histories:
        raise DataError("empty dataset")
    b = spec.behavior
    if b is None:
        return None
    window = b.memory_window if b.memory_window is not None else _INF
    needed = b.onset + 1
    best = 0
    for h in histories:
        best = max(best, h.n_captures)
        if h.n_captures >= needed:
            start = h.times[b.onset - 1]
            if start < h.times[b.onset] < start + window:
                return None
    if best < needed:
        return (
            f"behavioral factor unidentified: no subject has {needed} or more "
            f"captures (max observed {best})"
        )
    return (
        f"behavioral factor unidentified: no subject's capture {needed} falls "
        f"within {window} time units of its onset capture"
    )


def validate_identifiability(histories, spec: ModelSpec) -> None:
    """Raise :class:`IdentifiabilityError` when the behavioral factor is not identified."""
    diag = identifiability_diagnostic(histories, spec)
    if diag is not None:
        raise IdentifiabilityError(diag)
