"""Model-family tooling: the submodel lattice, grid search, tests, and
count-only comparison estimators.

Model names combine the effect letters ``h`` (frailty heterogeneity),
``o`` (observed covariates), ``t`` (time-varying baseline) and ``b``
(behavioral response); ``0`` is the fully homogeneous model.  Fitting a
name applies the corresponding restrictions (frailty off, coefficients
zero, constant baseline rate, behavior factor one) and runs the same EM
machinery on the reduced coordinate set.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize, stats

from .data import CountSummary
from .errors import DataError
from .em import EmConfig, FitResult, fit
from .model import BehaviorSpec, ModelSpec
from .population import capture_weights

__all__ = [
    "MODEL_NAMES",
    "resolve_model",
    "restricted_spec",
    "fit_model",
    "GridCell",
    "GridResult",
    "grid_search",
    "likelihood_ratio_test",
    "wald_test",
    "chao_estimate",
    "m0_estimate",
]

_LETTER_ORDER = "hotb"

MODEL_NAMES = (
    "0", "h", "o", "t", "b",
    "ho", "ht", "hb", "ot", "ob", "tb",
    "hot", "hob", "htb", "otb", "hotb",
)


def resolve_model(name: str) -> str:
    """Canonical effect letters for a model name (case/prefix tolerant)."""
    raw = name.strip().lower()
    if raw.startswith("m"):
        raw = raw[1:]
    raw = raw.replace("_", "")
    if raw in ("", "0"):
        return "0"
    letters = set(raw)
    if not letters.issubset(set(_LETTER_ORDER)):
        raise DataError(f"unknown model name {name!r}; expected letters from 'hotb' or '0'")
    return "".join(ch for ch in _LETTER_ORDER if ch in letters)


def restricted_spec(base: ModelSpec, name: str) -> ModelSpec:
    """Model spec with the named effects active and the rest frozen."""
    letters = resolve_model(name)
    if "o" in letters and not base.covariates:
        raise DataError(f"model {name!r} uses covariates but the base spec has none")
    return ModelSpec(
        tau=base.tau,
        frailty="h" in letters,
        covariates=base.covariates if "o" in letters else (),
        time_varying="t" in letters,
        behavior=(base.behavior or BehaviorSpec()) if "b" in letters else None,
    )


def fit_model(
    histories,
    model: str,
    base: ModelSpec,
    cfg: EmConfig | None = None,
) -> FitResult:
    """Fit one member of the lattice by name."""
    spec = restricted_spec(base, model)
    return fit(histories, spec, cfg)


@dataclass(frozen=True)
class GridCell:
    """One behavioral-configuration fit in a grid search."""

    onset: int
    expiry_count: int | None
    memory_window: float | None
    loglik: float
    delta_loglik: float
    n_hat: float
    converged: bool
    message: str | None = None
    result: FitResult | None = None

    @property
    def fitted(self) -> bool:
        return self.result is not None


@dataclass(frozen=True)
class GridResult:
    """All cells of a behavioral-parameter grid, in evaluation order."""

    cells: tuple[GridCell, ...]

    def best(self) -> GridCell:
        fitted = [c for c in self.cells if c.fitted and c.converged]
        if not fitted:
            raise DataError("no grid cell converged")
        return max(fitted, key=lambda c: c.loglik)


def _fit_cell(histories, base, cfg, onset, expiry, window):
    from .model import identifiability_diagnostic

    if expiry is not None and expiry <= onset:
        return GridCell(onset, expiry, window, math.nan, math.nan, math.nan,
                        False, "invalid: expiry_count must exceed onset")
    behavior = BehaviorSpec(onset=onset, expiry_count=expiry, memory_window=window)
    spec = replace(base, behavior=behavior)
    diag = identifiability_diagnostic(histories, spec)
    if diag is not None:
        return GridCell(onset, expiry, window, math.nan, math.nan, math.nan, False, diag)
    res = fit(histories, spec, cfg)
    w = capture_weights(res)
    n_hat = float((1.0 / w).sum())
    return GridCell(onset, expiry, window, res.loglik, math.nan, n_hat,
                    res.converged, None, res)


def grid_search(
    histories,
    base: ModelSpec,
    onsets,
    expiry_counts=(None,),
    memory_windows=(None,),
    cfg: EmConfig | None = None,
    threads: int = 1,
) -> GridResult:
    """Fit the model over a grid of behavioral configurations.

    Cells that fail the identifiability precheck (or are structurally
    invalid) are marked, not fitted.  ``delta_loglik`` is reported against
    the first fitted cell, and results do not depend on evaluation order.
    """
    histories = list(histories)
    combos = [
        (onset, expiry, window)
        for onset in onsets
        for expiry in expiry_counts
        for window in memory_windows
    ]
    if not combos:
        raise DataError("empty behavioral grid")
    cfg = cfg or EmConfig(compute_information=False)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(
                pool.map(lambda c: _fit_cell(histories, base, cfg, *c), combos)
            )
    else:
        cells = [_fit_cell(histories, base, cfg, *c) for c in combos]
    ref = next((c.loglik for c in cells if c.fitted), math.nan)
    cells = [replace(c, delta_loglik=c.loglik - ref) if c.fitted else c for c in cells]
    return GridResult(tuple(cells))


def likelihood_ratio_test(full: FitResult, nested: FitResult, df: int):
    """Likelihood-ratio statistic and chi-square upper-tail p-value."""
    if df < 1:
        raise DataError("degrees of freedom must be >= 1")
    stat = 2.0 * (full.loglik - nested.loglik)
    if stat < -1e-7 * (1.0 + abs(full.loglik)):
        raise DataError(
            f"negative likelihood-ratio statistic ({stat:.3e}): models are not nested "
            "or the nested fit did not converge"
        )
    stat = max(stat, 0.0)
    return stat, float(stats.chi2.sf(stat, df))


def wald_test(fit_result: FitResult, coordinate: str, null_value: float = 0.0):
    """Two-sided Wald z-test for one fitted coordinate."""
    se = fit_result.standard_errors()
    if coordinate not in se:
        raise DataError(f"no standard error available for {coordinate!r}")
    values = dict(zip(fit_result.free_names, fit_result.free_values()))
    values["frailty_shape"] = fit_result.params.frailty_shape
    if coordinate not in values:
        raise DataError(f"unknown coordinate {coordinate!r}")
    if se[coordinate] == 0.0:
        raise DataError(f"zero standard error for {coordinate!r}")
    z = (values[coordinate] - null_value) / se[coordinate]
    return float(z), float(2.0 * stats.norm.sf(abs(z)))


def chao_estimate(counts: CountSummary):
    """Lower-bound population size from singleton and doubleton counts.

    ``n + f1^2 / (2 f2)``, with the bias-corrected form
    ``n + f1 (f1 - 1) / (2 (f2 + 1))`` when no doubletons are observed.
    The standard error uses the classical asymptotic variance for the
    matching form (Chao 1987 / EstimateS).

    Returns ``(estimate, se)``.
    """
    n = counts.n_observed
    f1 = counts.f(1)
    f2 = counts.f(2)
    if f1 == 0:
        return float(n), 0.0
    if f2 > 0:
        est = n + f1**2 / (2.0 * f2)
        r = f1 / f2
        var = f2 * (0.25 * r**4 + r**3 + 0.5 * r**2)
    else:
        est = n + f1 * (f1 - 1.0) / (2.0 * (f2 + 1.0))
        var = (
            f1 * (f1 - 1.0) / 2.0
            + f1 * (2.0 * f1 - 1.0) ** 2 / 4.0
            - f1**4 / (4.0 * est)
        )
    return float(est), float(math.sqrt(max(var, 0.0)))


def m0_estimate(counts: CountSummary):
    """Homogeneous-model size estimate from the count distribution.

    Solves the zero-truncated Poisson stationarity
    ``(1 - exp(-mu)) / mu = n / K`` for the per-subject expected count
    ``mu`` and returns ``(K / mu, mu)``.
    """
    n = counts.n_observed
    k_tot = counts.total_captures
    if k_tot <= n:
        raise DataError("no recaptures: homogeneous estimate diverges")
    ratio = n / k_tot

    def f(mu):
        return -np.expm1(-mu) / mu - ratio

    # (1-e^-mu)/mu decreases from 1 to 0; bracket the root generously.
    lo, hi = 1e-12, 1.0
    while f(hi) > 0:
        hi *= 2.0
        if hi > 1e6:  # pragma: no cover - defensive
            raise DataError("failed to bracket the homogeneous-model root")
    mu = optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-15)
    return float(k_tot / mu), float(mu)
