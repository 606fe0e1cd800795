"""Closed-form shrinkage estimators for a multivariate normal mean.

Implements the classical zero-target estimator, the grand-mean-target
(Lindley) variant, the same form driven by a known marginal variance, and
the unbiased error-variance estimates that plug into the empirical-Bayes
versions.  All functions are pure and operate on 1-D numpy arrays.

Shrink factors are reported raw, exactly as the closed forms produce them,
including negative values.  Pass ``positive_part=True`` to clamp the factor
into [0, 1].
"""
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ShrinkageResult",
    "js_estimate",
    "jsl_estimate",
    "covariance_shrink",
    "error_variance",
    "eb_estimate",
]


@dataclass(frozen=True)
class ShrinkageResult:
    """Outcome of a shrinkage estimate.

    Attributes
    ----------
    estimate : np.ndarray
        The shrunk mean vector, ``target + shrink_factor * (input - target)``.
    shrink_factor : float
        Multiplier applied to the deviation from the target.  May be
        negative unless positive-part clamping was requested.
    target : np.ndarray
        The vector the input was shrunk towards.
    degenerate : bool
        True when the data-dependent denominator was zero; the estimate
        then equals the target and ``shrink_factor`` is reported as 0.
    """

    estimate: np.ndarray
    shrink_factor: float
    target: np.ndarray
    degenerate: bool


def _as_mean_vector(ybar) -> np.ndarray:
    y = np.asarray(ybar, dtype=float)
    if y.ndim != 1 or y.size < 1:
        raise ValueError("mean vector must be 1-D and nonempty")
    if not np.all(np.isfinite(y)):
        raise ValueError("mean vector entries must be finite")
    return y


def _finish(y, target, factor, degenerate, positive_part):
    if positive_part:
        factor = min(max(factor, 0.0), 1.0)
    estimate = target + factor * (y - target)
    return ShrinkageResult(estimate, float(factor), target, degenerate)


def js_estimate(ybar, sigma2e_over_n, positive_part=False) -> ShrinkageResult:
    """Shrink sample means towards the zero vector.

    Parameters
    ----------
    ybar : array_like, shape (t,)
        Sample mean vector, t >= 3.
    sigma2e_over_n : float
        Known (or estimated) variance of each component, >= 0.
    positive_part : bool
        Clamp the shrink factor into [0, 1].

    Returns
    -------
    ShrinkageResult
        Factor ``1 - sigma2e_over_n / (S0 / (t - 2))`` with
        ``S0 = ||ybar||^2`` and target zero.
    """
    y = _as_mean_vector(ybar)
    t = y.size
    if t < 3:
        raise ValueError(f"zero-target shrinkage requires t >= 3, got t = {t}")
    if sigma2e_over_n < 0:
        raise ValueError("sigma2e_over_n must be nonnegative")
    target = np.zeros(t)
    if sigma2e_over_n == 0.0:
        return _finish(y, target, 1.0, False, positive_part)
    s0 = float(y @ y)
    if s0 == 0.0:
        return _finish(y, target, 0.0, True, positive_part)
    factor = 1.0 - sigma2e_over_n / (s0 / (t - 2))
    return _finish(y, target, factor, False, positive_part)


def jsl_estimate(ybar, sigma2e_over_n, positive_part=False) -> ShrinkageResult:
    """Shrink sample means towards their grand mean (Lindley variant).

    Requires t >= 4.  Factor is ``1 - sigma2e_over_n / (S / (t - 3))`` with
    ``S`` the squared norm of the centred input; a zero spread (constant
    input) is reported as degenerate with the grand-mean vector returned.
    """
    y = _as_mean_vector(ybar)
    t = y.size
    if t < 4:
        raise ValueError(f"grand-mean shrinkage requires t >= 4, got t = {t}")
    if sigma2e_over_n < 0:
        raise ValueError("sigma2e_over_n must be nonnegative")
    target = np.full(t, y.mean())
    centred = y - target
    s = float(centred @ centred)
    if s == 0.0:
        return _finish(y, target, 0.0, True, positive_part)
    factor = 1.0 - sigma2e_over_n / (s / (t - 3))
    return _finish(y, target, factor, False, positive_part)


def covariance_shrink(ybar, a, positive_part=False) -> ShrinkageResult:
    """Grand-mean shrinkage for a mean observed with covariance a*I + b*J.

    Identical in form to :func:`jsl_estimate` with the marginal variance
    parameter ``a`` in place of the per-component noise variance; the
    compound-symmetric part ``b`` drops out of the centred statistic, so it
    never enters the formula.  Requires t >= 4 and a > 0.
    """
    if a <= 0:
        raise ValueError("marginal variance a must be positive")
    y = _as_mean_vector(ybar)
    if y.size < 4:
        raise ValueError(f"grand-mean shrinkage requires t >= 4, got t = {y.size}")
    return jsl_estimate(y, a, positive_part=positive_part)


def error_variance(Y, mode: str) -> float:
    """Unbiased estimate of the per-observation error variance.

    Parameters
    ----------
    Y : array_like, shape (t, n)
        Complete data table, one row per group/treatment.
    mode : {"within_rows", "interaction"}
        ``within_rows`` pools squared deviations from row means and divides
        by t(n-1); ``interaction`` double-centres the table and divides by
        (t-1)(n-1), which is the right estimator when columns carry an
        additive block effect.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ValueError("Y must be a 2-D table")
    if not np.all(np.isfinite(Y)):
        raise ValueError("incomplete table: non-finite entries present; "
                         "incomplete-block data must go through the lmm module")
    t, n = Y.shape
    if mode == "within_rows":
        if n < 2:
            raise ValueError("within_rows requires n >= 2 columns")
        resid = Y - Y.mean(axis=1, keepdims=True)
        return float((resid ** 2).sum() / (t * (n - 1)))
    if mode == "interaction":
        if t < 2 or n < 2:
            raise ValueError("interaction requires t >= 2 and n >= 2")
        resid = (Y - Y.mean(axis=1, keepdims=True) - Y.mean(axis=0, keepdims=True)
                 + Y.mean())
        return float((resid ** 2).sum() / ((t - 1) * (n - 1)))
    raise ValueError(f"unknown mode {mode!r}")


def eb_estimate(Y, center: str, positive_part=False) -> ShrinkageResult:
    """Empirical-Bayes shrinkage computed from the raw data table.

    Estimates the error variance from within-row spread, then applies the
    posterior-mean form with the moment estimate of the marginal variance:
    ``S0 / t`` for ``center="zero"`` or ``S / (t - 1)`` for
    ``center="grand_mean"``.  These divisors replace the t-2 and t-3 of the
    closed-form estimators.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ValueError("Y must be a 2-D table")
    t, n = Y.shape
    sigma2e = error_variance(Y, "within_rows")
    v = sigma2e / n
    ybar = Y.mean(axis=1)
    if center == "zero":
        target = np.zeros(t)
        if v == 0.0:
            return _finish(ybar, target, 1.0, False, positive_part)
        s0 = float(ybar @ ybar)
        if s0 == 0.0:
            return _finish(ybar, target, 0.0, True, positive_part)
        factor = 1.0 - v / (s0 / t)
        return _finish(ybar, target, factor, False, positive_part)
    if center == "grand_mean":
        target = np.full(t, ybar.mean())
        centred = ybar - target
        s = float(centred @ centred)
        if s == 0.0:
            return _finish(ybar, target, 0.0, True, positive_part)
        factor = 1.0 - v / (s / (t - 1))
        return _finish(ybar, target, factor, False, positive_part)
    raise ValueError(f"unknown center {center!r}")
