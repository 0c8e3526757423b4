"""Scikit-learn style estimator facade over the functional core.

``RecaptureModel`` carries the model choice in its constructor arguments
(so ``get_params`` / ``set_params`` / ``clone`` compose with scikit-learn
tooling), validates its input histories on ``fit``, and exposes the fitted
state through trailing-underscore attributes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .data import CaptureHistory, check_histories
from .em import EmConfig, fit as _fit
from .errors import DataError, EstimationError
from .likelihood import marginal_capture_probability
from .model import BehaviorSpec, ModelSpec
from .population import PopulationEstimate, population_estimate
from .selection import restricted_spec

__all__ = ["RecaptureModel"]


class RecaptureModel(BaseEstimator):
    """Continuous-time capture-recapture estimator.

    Parameters
    ----------
    tau : float
        Length of the observation window; capture times live in ``(0, tau]``.
    model : str
        Effect letters among ``h`` (frailty), ``o`` (covariates), ``t``
        (time-varying baseline), ``b`` (behavioral response), or ``"0"``
        for the fully homogeneous model.
    covariates : tuple of str
        Covariate names, aligned with each history's covariate vector;
        required when ``model`` contains ``o``.
    onset, expiry_count, memory_window
        Behavioral-response shape (see :class:`BehaviorSpec`); ignored
        unless ``model`` contains ``b``.
    conditioning : {"marginal", "per_draw"}
        Where the zero-truncation is applied.  ``"marginal"`` is the
        consistent sampling density of observed subjects; ``"per_draw"``
        applies the correction inside the frailty mixture.
    max_iter, tol
        EM sweep limit and relative log-likelihood tolerance.

    Attributes
    ----------
    result_ : FitResult
        Full fit diagnostics.
    params_ : dict
        Point estimates keyed by coordinate name.
    loglik_ : float
    converged_ : bool
    frailty_means_ : ndarray
    """

    def __init__(
        self,
        tau: float = 1.0,
        model: str = "hotb",
        covariates: tuple = (),
        onset: int = 1,
        expiry_count: int | None = None,
        memory_window: float | None = None,
        conditioning: str = "marginal",
        max_iter: int = 500,
        tol: float = 1e-8,
    ):
        self.tau = tau
        self.model = model
        self.covariates = covariates
        self.onset = onset
        self.expiry_count = expiry_count
        self.memory_window = memory_window
        self.conditioning = conditioning
        self.max_iter = max_iter
        self.tol = tol

    def _spec(self) -> ModelSpec:
        base = ModelSpec(
            tau=self.tau,
            frailty=True,
            covariates=tuple(self.covariates),
            time_varying=True,
            behavior=BehaviorSpec(
                onset=self.onset,
                expiry_count=self.expiry_count,
                memory_window=self.memory_window,
            ),
        )
        return restricted_spec(base, self.model)

    def _config(self) -> EmConfig:
        return EmConfig(
            max_iter=self.max_iter,
            loglik_rel_tol=self.tol,
            conditioning=self.conditioning,
        )

    def fit(self, X, y=None):
        """Fit the model to a sequence of :class:`CaptureHistory`.

        ``y`` is ignored; it exists for scikit-learn API compatibility.
        """
        spec = self._spec()
        histories = check_histories(X, spec.tau, spec.n_covariates or None)
        self.result_ = _fit(histories, spec, self._config())
        self.params_ = dict(
            zip(self.result_.free_names, self.result_.free_values())
        )
        if spec.frailty:
            self.params_["frailty_shape"] = self.result_.params.frailty_shape
        self.loglik_ = self.result_.loglik
        self.converged_ = self.result_.converged
        self.frailty_means_ = self.result_.frailty_means
        self.n_observed_ = self.result_.context.n
        return self

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise EstimationError("estimator is not fitted")

    def predict_capture_probability(self, X) -> np.ndarray:
        """Marginal probability of at least one capture for new subjects.

        Uses the fitted total hazard, coefficients and (when present)
        frailty law; subjects are described by their covariate vectors, so
        ``X`` may hold histories or bare covariate tuples.
        """
        self._check_fitted()
        res = self.result_
        p = res.spec.n_covariates
        rows = []
        for x in X:
            z = np.asarray(x.covariates if isinstance(x, CaptureHistory) else x, dtype=float)
            if z.size != p:
                raise DataError(f"expected {p} covariates, got {z.size}")
            rows.append(z)
        Z = np.asarray(rows, dtype=float).reshape(len(rows), p)
        gam = np.exp(Z @ res.params.coef) if p else np.ones(len(rows))
        omega = res.params.total_hazard
        if res.spec.frailty:
            return marginal_capture_probability(gam, res.params.frailty_shape, omega)
        return -np.expm1(-gam * omega)

    def population(
        self, ci_level: float = 0.95, catchable_fraction: float | None = None
    ) -> PopulationEstimate:
        """Population-size estimate with variance decomposition and CI."""
        self._check_fitted()
        return population_estimate(
            self.result_, ci_level=ci_level, catchable_fraction=catchable_fraction
        )

    def standard_errors(self) -> dict:
        self._check_fitted()
        return self.result_.standard_errors()
