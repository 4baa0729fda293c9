"""Fit the two-class Gaussian gate on simulated distance samples.

Class 1 is "accept" (small distances), class 2 is "reject". The gate
fits one Gaussian per class and places the threshold where the
weighted densities cross, which minimizes the expected error. A brute
force sweep over candidate thresholds confirms the closed form, and a
quick Monte Carlo run confirms the predicted error rate.
"""

import numpy as np

from prondet import classify, fit_threshold

rng = np.random.default_rng(42)

mu1, s1, n1 = 2.0, 0.6, 40
mu2, s2, n2 = 5.5, 1.1, 160
d1 = rng.normal(mu1, s1, n1)
d2 = rng.normal(mu2, s2, n2)

model = fit_threshold(d1, d2)
print(f"fitted class 1: mu={model.mu1:.3f} sigma={model.sigma1:.3f} "
      f"p={model.p1:.2f}")
print(f"fitted class 2: mu={model.mu2:.3f} sigma={model.sigma2:.3f} "
      f"p={model.p2:.2f}")
print(f"threshold T = {model.threshold:.4f}")
print(f"predicted error = {100.0 * model.theoretical_error:.3f}%")

# sweep: no candidate should beat the closed-form placement
from scipy.stats import norm

ts = np.linspace(model.mu1, model.mu2, 20001)
errs = (model.p1 * norm.sf(ts, model.mu1, model.sigma1)
        + model.p2 * norm.cdf(ts, model.mu2, model.sigma2))
print(f"sweep minimum    = {100.0 * errs.min():.3f}% "
      f"at T = {ts[errs.argmin()]:.4f}")

# Monte Carlo on fresh draws from the fitted model
trials = 200000
fresh1 = rng.normal(model.mu1, model.sigma1, int(model.p1 * trials))
fresh2 = rng.normal(model.mu2, model.sigma2, trials - fresh1.size)
wrong = np.sum(fresh1 >= model.threshold) + np.sum(fresh2 < model.threshold)
print(f"Monte Carlo error = {100.0 * wrong / trials:.3f}%")

# unbalanced training sets are handled through the priors, not the data
balanced = fit_threshold(d1, d2, priors=(0.5, 0.5))
print(f"\nwith equal priors the threshold moves to {balanced.threshold:.4f}")
print(f"classify(3.0) accept={classify(balanced, 3.0)}, "
      f"classify(4.5) accept={classify(balanced, 4.5)}")
