"""Core data containers and input validation helpers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

__all__ = ["CaptureHistory", "CountSummary", "check_histories", "count_summary"]


@dataclass(frozen=True)
class CaptureHistory:
    """One subject's capture record on the observation window ``(0, tau]``.

    Parameters
    ----------
    subject_id : str
        Opaque identifier; used only for reporting and deterministic ordering.
    times : tuple of float
        Strictly increasing capture instants, all in ``(0, tau]``.
    covariates : tuple of float
        Covariate vector; may be empty for covariate-free models.
    """

    subject_id: str
    times: tuple[float, ...]
    covariates: tuple[float, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(
            self, "covariates", tuple(float(z) for z in self.covariates)
        )
        if len(self.times) == 0:
            raise DataError(
                f"subject {self.subject_id!r} has no captures; data are "
                "conditional on at least one"
            )
        t = np.asarray(self.times)
        if np.any(~np.isfinite(t)) or np.any(t <= 0.0):
            raise DataError(f"subject {self.subject_id!r} has a non-positive capture time")
        if np.any(np.diff(t) <= 0.0):
            raise DataError(
                f"subject {self.subject_id!r} has duplicate or unordered capture times"
            )

    @property
    def n_captures(self) -> int:
        return len(self.times)


def check_histories(histories, tau: float, n_covariates: int | None = None):
    """Validate a dataset of capture histories against a window length.

    Returns the histories sorted by ``subject_id`` (the canonical internal
    order, making every downstream reduction independent of input order).
    """
    histories = list(histories)
    if not histories:
        raise DataError("empty dataset")
    if not (np.isfinite(tau) and tau > 0):
        raise DataError("tau must be a positive real")
    seen = set()
    p = n_covariates
    for h in histories:
        if not isinstance(h, CaptureHistory):
            raise DataError(f"expected CaptureHistory, got {type(h).__name__}")
        if h.subject_id in seen:
            raise DataError(f"duplicate subject id {h.subject_id!r}")
        seen.add(h.subject_id)
        if h.times[-1] > tau:
            raise DataError(
                f"subject {h.subject_id!r} captured at {h.times[-1]} after tau={tau}"
            )
        if p is None:
            p = len(h.covariates)
        elif len(h.covariates) != p:
            raise DataError(
                f"subject {h.subject_id!r} has {len(h.covariates)} covariates, expected {p}"
            )
    return sorted(histories, key=lambda h: h.subject_id)


@dataclass(frozen=True)
class CountSummary:
    """Frequency-of-frequencies summary: ``freq[j]`` subjects with j+1 captures."""

    freq: tuple[int, ...]

    def __post_init__(self):
        f = tuple(int(v) for v in self.freq)
        if not f or any(v < 0 for v in f):
            raise DataError("count summary needs nonnegative frequencies f_1, f_2, ...")
        if sum(f) < 1:
            raise DataError("count summary is empty")
        object.__setattr__(self, "freq", f)

    @property
    def n_observed(self) -> int:
        return sum(self.freq)

    @property
    def total_captures(self) -> int:
        return sum((j + 1) * f for j, f in enumerate(self.freq))

    def f(self, j: int) -> int:
        """Number of subjects captured exactly ``j`` times."""
        if j < 1:
            raise DataError("capture count must be >= 1")
        return self.freq[j - 1] if j <= len(self.freq) else 0


def count_summary(histories) -> CountSummary:
    """Tabulate the capture-count distribution of a dataset."""
    counts = [h.n_captures for h in histories]
    if not counts:
        raise DataError("empty dataset")
    top = max(counts)
    freq = [0] * top
    for c in counts:
        freq[c - 1] += 1
    return CountSummary(tuple(freq))
