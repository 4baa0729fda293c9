"""Eigenspace construction and the two distance metrics.

Training uses the snapshot method: with M training vectors of dimension
D and M far below D, the M x M Gram matrix A'A shares its nonzero
eigenvalues with the D x D scatter AA', and each Gram eigenvector v maps
to a scatter eigenvector A v / ||A v||. The basis keeps the smallest
leading set of eigenvectors whose eigenvalues cover the requested
fraction of total variance.

Two distances: the residual norm after projecting onto the basis
(distance from the eigenspace), and the minimum distance to class
centroids measured inside the span (distance in the eigenspace). The
detector uses only the residual; the centroid distance exists because
the two behave differently and the difference is worth demonstrating:
a vector far off the span can still land near a foreign centroid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError

EIGENVALUE_DISCARD = 1e-12  # relative to the largest eigenvalue
VECTOR_ORDER = "frame-major"


@dataclass(frozen=True)
class Eigenspace:
    mean: np.ndarray          # Psi, length D
    basis: np.ndarray         # U, D x M' with orthonormal columns
    eigenvalues: np.ndarray   # M' values, descending, >= 0
    variance_fraction: float

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def n_components(self) -> int:
        return self.basis.shape[1]


def _as_matrix(vectors) -> np.ndarray:
    rows = []
    for v in vectors:
        arr = np.asarray(getattr(v, "values", v), dtype=np.float64)
        if arr.ndim != 1:
            raise DataError("training vectors must be one-dimensional")
        rows.append(arr)
    lengths = {r.size for r in rows}
    if len(lengths) != 1:
        raise DataError(f"training vectors disagree in length: {sorted(lengths)}")
    return np.vstack(rows)


def train_eigenspace(vectors, variance_fraction: float = 0.8) -> Eigenspace:
    """Snapshot PCA over >= 2 equal-length vectors.

    Keeps the smallest leading eigenvector count whose eigenvalue sum
    reaches variance_fraction of the total. Eigenvalues are those of the
    unnormalized scatter AA'. Each basis column's largest-magnitude
    entry is made positive so serialized models do not depend on the
    eigensolver's sign choices.
    """
    if not 0.0 < variance_fraction <= 1.0:
        raise DataError("variance fraction must lie in (0, 1]")
    gamma = _as_matrix(vectors)
    m = gamma.shape[0]
    if m < 2:
        raise DataError("need at least 2 training vectors")
    mean = gamma.mean(axis=0)
    a = gamma - mean  # rows are the mean-shifted Phi_i
    gram = a @ a.T
    evals, evecs = np.linalg.eigh(gram)
    evals = evals[::-1].copy()
    evecs = evecs[:, ::-1]
    evals = np.maximum(evals, 0.0)
    total = evals.sum()
    if total <= 0.0:
        raise NumericalError("zero total variance: all training vectors equal")

    keep = evals > EIGENVALUE_DISCARD * evals[0]
    evals_kept = evals[keep]
    cover = np.searchsorted(np.cumsum(evals_kept), variance_fraction * total) + 1
    m_prime = min(int(cover), evals_kept.size)

    lam = evals_kept[:m_prime]
    basis = a.T @ evecs[:, keep][:, :m_prime]
    basis /= np.sqrt(lam)
    flip = basis[np.argmax(np.abs(basis), axis=0), np.arange(m_prime)] < 0
    basis[:, flip] *= -1.0
    return Eigenspace(mean=mean, basis=np.ascontiguousarray(basis),
                      eigenvalues=lam, variance_fraction=variance_fraction)


def _as_vector(es: Eigenspace, v) -> np.ndarray:
    arr = np.asarray(getattr(v, "values", v), dtype=np.float64)
    if arr.shape != (es.dim,):
        raise DataError(
            f"vector length {arr.size} does not match eigenspace dim {es.dim}")
    return arr


def project(es: Eigenspace, v) -> np.ndarray:
    """Coordinates Omega = U'(v - Psi) in the eigenspace."""
    return es.basis.T @ (_as_vector(es, v) - es.mean)


def dfes(es: Eigenspace, v) -> float:
    """Distance from the eigenspace: residual norm after projection."""
    phi = _as_vector(es, v) - es.mean
    residual = phi - es.basis @ (es.basis.T @ phi)
    return float(np.linalg.norm(residual))


def dfes_many(es: Eigenspace, matrix: np.ndarray) -> np.ndarray:
    """dfes for each row of a (count, D) matrix in one pass."""
    phi = np.asarray(matrix, dtype=np.float64) - es.mean
    residual = phi - (phi @ es.basis) @ es.basis.T
    return np.linalg.norm(residual, axis=1)


def dies(es: Eigenspace, vector, centroids) -> tuple[float, int]:
    """Distance in the eigenspace: nearest class centroid and its index.

    The vector is projected first; centroids live in component
    coordinates (see class_centroid). Ties resolve to the lowest index.
    """
    if len(centroids) == 0:
        raise DataError("need at least one class centroid")
    omega = project(es, vector)
    mat = np.vstack([np.asarray(c, dtype=np.float64) for c in centroids])
    if mat.shape[1] != omega.size:
        raise DataError("centroid length does not match component count")
    dists = np.linalg.norm(mat - omega, axis=1)
    k = int(np.argmin(dists))
    return float(dists[k]), k


def class_centroid(es: Eigenspace, vectors) -> np.ndarray:
    """Mean projection of a set of vectors."""
    return np.mean([project(es, v) for v in vectors], axis=0)


def eigenspace_to_payload(es: Eigenspace) -> tuple[dict, dict]:
    """(descriptor, arrays) pair for the bundle serializer."""
    meta = {
        "dim": es.dim,
        "components": es.n_components,
        "variance_fraction": es.variance_fraction,
        "vector_order": VECTOR_ORDER,
    }
    arrays = {
        "mean": es.mean,
        "basis": es.basis,
        "eigenvalues": es.eigenvalues,
    }
    return meta, arrays


def eigenspace_from_payload(meta: dict, arrays: dict) -> Eigenspace:
    es = Eigenspace(
        mean=arrays["mean"],
        basis=arrays["basis"].reshape(meta["dim"], meta["components"]),
        eigenvalues=arrays["eigenvalues"],
        variance_fraction=meta["variance_fraction"],
    )
    if meta.get("vector_order", VECTOR_ORDER) != VECTOR_ORDER:
        raise DataError(f"unsupported vector order {meta['vector_order']!r}")
    return es
