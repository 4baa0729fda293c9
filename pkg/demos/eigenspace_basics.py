"""Eigenspace geometry on a synthetic cluster.

Trains a subspace from a handful of high-dimensional samples, then
shows the two distances the detector lives on: the residual distance
off the subspace, and the in-space distance to a class centroid.
Points drawn from the cluster sit close to the subspace; a point
pushed off it keeps a small in-space distance but a large residual,
which is exactly the case the residual gate exists for.
"""

import numpy as np

from prondet import class_centroid, dfes, dies, project, train_eigenspace

rng = np.random.default_rng(5)

# cluster: 3 latent directions embedded in 40 dimensions, plus noise
dim, latent, n = 40, 3, 15
basis = np.linalg.qr(rng.normal(size=(dim, latent)))[0]
center = rng.normal(0.0, 2.0, dim)
samples = np.array([center + basis @ rng.normal(0.0, 4.0, latent)
                    + rng.normal(0.0, 0.05, dim) for _ in range(n)])

es = train_eigenspace(samples, variance_fraction=0.9)
print(f"kept {es.n_components} of {n - 1} nonzero components")
for k, lam in enumerate(es.eigenvalues, start=1):
    print(f"  lambda_{k} = {lam:10.2f}")

# in-cluster points have tiny residuals, random points do not
inside = center + basis @ rng.normal(0.0, 4.0, latent)
outside = rng.normal(0.0, 2.0, dim)
print(f"\nresidual distance, in-cluster point:  {dfes(es, inside):8.4f}")
print(f"residual distance, unrelated point:   {dfes(es, outside):8.4f}")

# energy splits between the projection and the residual
v = samples[0] + rng.normal(0.0, 1.0, dim)
phi2 = np.sum((v - es.mean) ** 2)
omega2 = np.sum(project(es, v) ** 2)
print(f"\nenergy split: |phi|^2 = {phi2:.4f}, "
      f"|omega|^2 + residual^2 = {omega2 + dfes(es, v) ** 2:.4f}")

# a point moved off the subspace fools the in-space distance
centroid = class_centroid(es, samples)
off_axis = np.linalg.qr(np.column_stack([basis, rng.normal(size=dim)]))[0][:, -1]
impostor = es.mean + 6.0 * off_axis
d_in, _ = dies(es, impostor, [centroid])
print(f"\nimpostor off the subspace: in-space distance {d_in:.4f}, "
      f"residual {dfes(es, impostor):.4f}")
print("the in-space metric barely notices; the residual flags it")
