"""Hurwitz zeta evaluation and related special functions.

The conditional likelihood of the Gamma-frailty model reduces to products of
``zeta(s, a) = sum_{n>=0} (n+a)^(-s)`` with ``s > 1`` and ``a > 0``.  The
shift ``a`` routinely exceeds 1e4 (small total hazard) while ``s`` can reach
the degenerate-frailty cap, so everything is computed in log space with the
leading term ``a^(-s)`` factored out.

Evaluation strategy, chosen per argument pair:

* ``a`` much larger than ``s``: pure asymptotic (Euler-Maclaurin tail with
  zero summed terms).
* very large ``s`` with comparable ``a``: direct scaled summation; the terms
  decay like ``exp(-s*n/a)`` so only ``O(a/s)`` terms contribute.
* otherwise: Euler-Maclaurin with an adaptively chosen split point ``M`` so
  that the first omitted tail correction is below 1e-16 relative.

All entry points accept arrays; the inner loops are vectorized over the
batch because the E-step evaluates one zeta ratio per subject per sweep.
"""

from __future__ import annotations

import numpy as np
from scipy import special as _sp

from .errors import DomainError

__all__ = [
    "hurwitz_zeta",
    "log_hurwitz_zeta",
    "log_zeta_ratio",
    "zeta_integral",
    "log_gamma",
    "digamma",
]

# Bernoulli(2k)/(2k)! for k = 1..13, the Euler-Maclaurin correction weights.
_EM_COEF = (
    8.333333333333333e-02, -1.388888888888889e-03, 3.306878306878307e-05,
    -8.267195767195768e-07, 2.0876756987868098e-08, -5.284190138687493e-10,
    1.3382536530684679e-11, -3.3896802963225832e-13, 8.586062056277845e-15,
    -2.1748686985580617e-16, 5.509002828360229e-18, -1.3954464685812522e-19,
    3.534707039629467e-21,
)

# Above this order a direct scaled sum beats choosing an Euler-Maclaurin
# split point of comparable size.
_BIG_S = 1e4
# Chunk size bounding the (split point x batch) work matrix.
_HEAD_CHUNK = 8192


def _check_args(s, a):
    s = np.asarray(s, dtype=float)
    a = np.asarray(a, dtype=float)
    if np.any(~np.isfinite(s)) or np.any(~np.isfinite(a)):
        raise DomainError("zeta arguments must be finite")
    if np.any(s <= 1.0):
        raise DomainError("zeta order must satisfy s > 1")
    if np.any(a <= 0.0):
        raise DomainError("zeta shift must satisfy a > 0")
    return s, a


def _scaled_direct_sum(s, a):
    """sum_n ((n+a)/a)^(-s) with terms decaying like exp(-s*n/a)."""
    total = np.ones_like(s)
    alive = np.ones(s.shape, dtype=bool)
    n = 1
    while alive.any():
        sa, aa = s[alive], a[alive]
        term = np.exp(-sa * np.log1p(n / aa))
        total[alive] += term
        # Remaining tail is under a geometric envelope of ratio
        # exp(-s/(a+n)); drop elements whose bound is negligible.
        still = term * (aa + n) / sa >= 1e-18 * total[alive]
        alive[alive] = still
        n += 1
        if n > 50_000_000:  # pragma: no cover - defensive
            raise ArithmeticError("zeta direct sum failed to converge")
    return total


def _scaled_em_sum(s, a, m):
    """Euler-Maclaurin value of zeta(s, a) * a^s with split point ``m``.

    ``m`` is shared across the batch.  Elements whose asymptotic correction
    series has not converged after all tabulated orders are recomputed with
    a doubled split point.
    """
    total = np.zeros_like(s)
    for start in range(0, m, _HEAD_CHUNK):
        n = np.arange(start, min(start + _HEAD_CHUNK, m), dtype=float)
        total += np.exp(-s[None, :] * np.log1p(n[:, None] / a[None, :])).sum(axis=0)
    base = np.exp(-s * np.log1p(m / a))
    u = 1.0 / (m + a)
    total += base * ((m + a) / (s - 1.0) + 0.5)
    rising = s.copy()
    active = np.ones(s.shape, dtype=bool)
    for k, coef in enumerate(_EM_COEF, start=1):
        term = coef * rising * base * u ** (2 * k - 1)
        # The correction series is asymptotic: stop adding terms to an
        # element once its term has dipped below roundoff, or accuracy
        # degrades again as the terms turn around and grow.
        total = np.where(active, total + term, total)
        active &= np.abs(term) > 1e-16 * np.abs(total)
        if not active.any():
            return total
        rising = rising * (s + 2 * k - 1) * (s + 2 * k)
    redo = active
    m_next = max(2 * m, 16)
    if m_next > 50_000_000:  # pragma: no cover - defensive
        raise ArithmeticError("zeta Euler-Maclaurin failed to converge")
    total[redo] = _scaled_em_sum(s[redo], a[redo], m_next)
    return total


def _log_zeta_flat(s, a):
    out = np.empty(s.shape, dtype=float)
    asymptotic = a >= 30.0 * s + 30.0
    huge_s = ~asymptotic & (s >= _BIG_S)
    general = ~asymptotic & ~huge_s
    if asymptotic.any():
        sa, aa = s[asymptotic], a[asymptotic]
        out[asymptotic] = np.log(_scaled_em_sum(sa, aa, 0)) - sa * np.log(aa)
    if huge_s.any():
        sa, aa = s[huge_s], a[huge_s]
        out[huge_s] = np.log(_scaled_direct_sum(sa, aa)) - sa * np.log(aa)
    if general.any():
        sa, aa = s[general], a[general]
        m = max(8, int(np.ceil(1.2 * sa.max())) - int(aa.min()))
        out[general] = np.log(_scaled_em_sum(sa, aa, max(m, 0))) - sa * np.log(aa)
    return out


def log_hurwitz_zeta(s, a):
    """Natural log of the Hurwitz zeta function ``zeta(s, a)``.

    Accepts scalars or arrays (broadcast together).  Stable for the extreme
    argument ranges produced by the frailty likelihood, where the value
    itself under- or overflows double precision.
    """
    s, a = _check_args(s, a)
    scalar = s.ndim == 0 and a.ndim == 0
    s_b, a_b = np.broadcast_arrays(np.atleast_1d(s), np.atleast_1d(a))
    out = _log_zeta_flat(s_b.ravel().astype(float), a_b.ravel().astype(float))
    if scalar:
        return float(out[0])
    return out.reshape(s_b.shape)


def hurwitz_zeta(s, a):
    """Hurwitz zeta ``zeta(s, a) = sum_{n>=0} (n+a)^(-s)`` for s > 1, a > 0."""
    return np.exp(log_hurwitz_zeta(s, a))


def log_zeta_ratio(s, a):
    """log of ``zeta(s+1, a) / zeta(s, a)``, fused to avoid overflow.

    Both values can lie far outside double range while their ratio is of
    order ``1/a``; evaluating the pair in log space keeps full relative
    accuracy.
    """
    s, a = _check_args(s, a)
    return log_hurwitz_zeta(s + 1.0, a) - log_hurwitz_zeta(s, a)


def zeta_integral(a_exp, b, c):
    """``int_0^inf x^a_exp * exp(-b x) / (1 - exp(-c x)) dx``.

    Equals ``Gamma(a_exp + 1) / c^(a_exp + 1) * zeta(a_exp + 1, b / c)``;
    requires ``a_exp > 0`` so the integrand is integrable at the origin and
    ``b, c > 0`` for convergence at infinity.
    """
    a_exp = float(a_exp)
    b = float(b)
    c = float(c)
    if not (a_exp > 0.0 and b > 0.0 and c > 0.0):
        raise DomainError("zeta_integral requires strictly positive arguments")
    log_val = (
        _sp.gammaln(a_exp + 1.0)
        - (a_exp + 1.0) * np.log(c)
        + log_hurwitz_zeta(a_exp + 1.0, b / c)
    )
    return float(np.exp(log_val))


def log_gamma(x):
    """log Gamma(x) for x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise DomainError("log_gamma requires x > 0")
    out = _sp.gammaln(x)
    return float(out) if out.ndim == 0 else out


def digamma(x):
    """Digamma (psi) function for x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise DomainError("digamma requires x > 0")
    out = _sp.psi(x)
    return float(out) if out.ndim == 0 else out
