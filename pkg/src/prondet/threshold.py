"""Two-class Gaussian decision thresholds over eigenspace distances.

Class 1 is the accept side (distances expected small), class 2 the
reject side. Both classes are modeled as Gaussians; the threshold is
the root of the weighted-density difference

    g(x) = P1 p(x | class 1) - P2 p(x | class 2)

that lies between the class means, which is where classification error
is minimized. When variances differ, g(x) = 0 is a quadratic with two
roots and the between-means root is the decision boundary; if neither
root falls between the means the classes overlap too heavily for the
Gaussian boundary to make sense, so the fit falls back to the
empirical-error-minimizing cut and is flagged non-separable.

Moments use the population (1/n) variance. The point is replication
invariance: duplicating the class-1 list to rebalance priors, as
done when one class has nine times fewer samples, leaves mean and
variance bit-identical, so rebalancing by replication and rebalancing
by the priors argument give the same threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import DataError, NumericalError


@dataclass(frozen=True)
class ThresholdModel:
    mu1: float
    sigma1: float
    mu2: float
    sigma2: float
    p1: float
    p2: float
    threshold: float
    theoretical_error: float
    non_separable: bool = False
    means_inverted: bool = False

    def as_dict(self) -> dict:
        return {
            "mu1": self.mu1, "sigma1": self.sigma1,
            "mu2": self.mu2, "sigma2": self.sigma2,
            "p1": self.p1, "p2": self.p2,
            "threshold": self.threshold,
            "theoretical_error": self.theoretical_error,
            "non_separable": self.non_separable,
            "means_inverted": self.means_inverted,
        }


def model_from_dict(d: dict) -> ThresholdModel:
    return ThresholdModel(**d)


def _error_at(mu1, sigma1, mu2, sigma2, p1, p2, t) -> float:
    return float(p1 * norm.sf(t, mu1, sigma1) + p2 * norm.cdf(t, mu2, sigma2))


def theoretical_error_at(model: ThresholdModel, t) -> float:
    """Bayes error of the cut at t: accept below, reject at or above."""
    return _error_at(model.mu1, model.sigma1, model.mu2, model.sigma2,
                     model.p1, model.p2, t)


def discriminant(model: ThresholdModel, x) -> float:
    """g(x) = P1 p(x|1) - P2 p(x|2); accept where positive."""
    return (model.p1 * norm.pdf(x, model.mu1, model.sigma1)
            - model.p2 * norm.pdf(x, model.mu2, model.sigma2))


def _between_means_root(mu1, s1, mu2, s2, p1, p2):
    """Root of g(x) = 0 between the means, or None if no root lies there."""
    lo, hi = min(mu1, mu2), max(mu1, mu2)
    if abs(s1 - s2) <= 1e-12 * max(s1, s2):
        s = 0.5 * (s1 + s2)
        if mu1 == mu2:
            return None
        t = 0.5 * (mu1 + mu2) + s * s * np.log(p1 / p2) / (mu2 - mu1)
        return t if lo <= t <= hi else None
    # unequal variances: g(x) = 0 reduces to a quadratic in x
    a = s1 * s1 - s2 * s2
    b = -2.0 * (s1 * s1 * mu2 - s2 * s2 * mu1)
    c = (s1 * s1 * mu2 * mu2 - s2 * s2 * mu1 * mu1
         + 2.0 * s1 * s1 * s2 * s2 * np.log(p1 * s2 / (p2 * s1)))
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return None
    roots = ((-b - np.sqrt(disc)) / (2.0 * a), (-b + np.sqrt(disc)) / (2.0 * a))
    inside = [r for r in roots if lo <= r <= hi]
    if not inside:
        return None
    # with both roots between the means, pick the one where error is lower
    if len(inside) == 2:
        errs = [_error_at(mu1, s1, mu2, s2, p1, p2, r) for r in inside]
        return inside[int(np.argmin(errs))]
    return inside[0]


def _empirical_cut(d1, d2, p1, p2):
    """Grid threshold minimizing the prior-weighted empirical error."""
    merged = np.unique(np.concatenate([d1, d2]))
    candidates = np.concatenate([
        [merged[0] - 1.0],
        0.5 * (merged[:-1] + merged[1:]),
        [merged[-1] + 1.0]])
    best_t, best_e = candidates[0], np.inf
    for t in candidates:
        e = p1 * np.mean(d1 >= t) + p2 * np.mean(d2 < t)
        if e < best_e - 1e-15:
            best_t, best_e = t, e
    return float(best_t)


def fit_threshold(d1, d2, priors=None) -> ThresholdModel:
    """Fit Gaussians to the two distance lists and place the threshold.

    priors default to the empirical class frequencies; pass (0.5, 0.5)
    for the balanced fit.
    """
    d1 = np.asarray(d1, dtype=np.float64)
    d2 = np.asarray(d2, dtype=np.float64)
    if d1.size < 2 or d2.size < 2:
        raise DataError("need at least 2 distances per class")
    if priors is None:
        n = d1.size + d2.size
        priors = (d1.size / n, d2.size / n)
    p1, p2 = float(priors[0]), float(priors[1])
    if not (0.0 < p1 < 1.0 and 0.0 < p2 < 1.0) or abs(p1 + p2 - 1.0) > 1e-9:
        raise DataError("priors must lie in (0, 1) and sum to 1")

    mu1, mu2 = float(d1.mean()), float(d2.mean())
    s1, s2 = float(d1.std()), float(d2.std())
    if s1 <= 0.0 or s2 <= 0.0:
        raise NumericalError("degenerate class variance")

    root = _between_means_root(mu1, s1, mu2, s2, p1, p2)
    if root is None:
        t = _empirical_cut(d1, d2, p1, p2)
        non_separable = True
    else:
        t = float(root)
        non_separable = False
    return ThresholdModel(
        mu1=mu1, sigma1=s1, mu2=mu2, sigma2=s2, p1=p1, p2=p2,
        threshold=t,
        theoretical_error=_error_at(mu1, s1, mu2, s2, p1, p2, t),
        non_separable=non_separable,
        means_inverted=mu1 > mu2)


def balance_by_repetition(d1, factor: int):
    """Concatenate the list with itself factor times.

    Kept for fidelity to the original rebalancing procedure; equivalent
    to adjusting the priors argument of fit_threshold, which is the
    preferred path.
    """
    if factor < 1:
        raise DataError("replication factor must be >= 1")
    d1 = list(d1)
    return d1 * factor


def classify(model: ThresholdModel, d: float) -> bool:
    """True (accept) iff d < threshold; the boundary itself rejects."""
    if not np.isfinite(d):
        raise NumericalError(f"non-finite distance {d!r}")
    return bool(d < model.threshold)
