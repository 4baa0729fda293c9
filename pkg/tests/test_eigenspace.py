"""Eigenspace training and distance computations.

The brute-force oracle builds the scatter matrix outright and
eigendecomposes it in sample space, which is exactly what the
Gram-matrix route is supposed to reproduce for the leading
eigenpairs.
"""

import numpy as np
import pytest

from prondet.eigenspace import (
    Eigenspace,
    class_centroid,
    dfes,
    dfes_many,
    dies,
    eigenspace_from_payload,
    eigenspace_to_payload,
    project,
    train_eigenspace,
)
from prondet.errors import DataError, NumericalError


def brute_force_eigenspace(vectors, variance_fraction=1.0):
    """Direct scatter-matrix eigendecomposition in sample space."""
    x = np.asarray(vectors, dtype=np.float64)
    mean = x.mean(axis=0)
    a = x - mean
    scatter = a.T @ a
    evals, evecs = np.linalg.eigh(scatter)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    keep = evals > 1e-12 * evals[0]
    evals, evecs = evals[keep], evecs[:, keep]
    total = evals.sum()
    m = int(np.searchsorted(np.cumsum(evals), variance_fraction * total) + 1)
    m = min(m, evals.size)
    return mean, evecs[:, :m], evals[:m]


def principal_angles(u, v):
    """Largest principal angle between two orthonormal column spans."""
    s = np.linalg.svd(u.T @ v, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0)).max()


def random_instance(rng, d_max=40, m_max=10):
    d = int(rng.integers(3, d_max + 1))
    m = int(rng.integers(2, min(m_max, d) + 1))
    base = rng.normal(size=(m, d))
    return base * rng.uniform(0.5, 5.0)


class TestAgainstBruteForce:
    def test_matches_direct_scatter_eigendecomposition(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            x = random_instance(rng)
            space = train_eigenspace(x, variance_fraction=1.0)
            mean, basis, evals = brute_force_eigenspace(x)
            assert np.allclose(space.mean, mean)
            assert space.eigenvalues.size == evals.size
            rel = np.abs(space.eigenvalues - evals) / evals[0]
            assert rel.max() < 1e-8
            assert principal_angles(space.basis, basis) < 1e-6

    def test_variance_fraction_prefix(self):
        rng = np.random.default_rng(12)
        x = random_instance(rng)
        full = train_eigenspace(x, variance_fraction=1.0)
        part = train_eigenspace(x, variance_fraction=0.8)
        assert part.n_components <= full.n_components
        # kept variance actually reaches the requested fraction
        total = full.eigenvalues.sum()
        kept = part.eigenvalues.sum()
        assert kept >= 0.8 * total - 1e-12
        # and the cut is minimal: one fewer component would fall short
        if part.n_components > 1:
            assert part.eigenvalues[:-1].sum() < 0.8 * total

    def test_basis_is_orthonormal(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            x = random_instance(rng)
            space = train_eigenspace(x, variance_fraction=1.0)
            gram = space.basis.T @ space.basis
            assert np.allclose(gram, np.eye(space.n_components), atol=1e-10)

    def test_sign_convention_largest_entry_positive(self):
        rng = np.random.default_rng(14)
        x = random_instance(rng)
        space = train_eigenspace(x)
        for j in range(space.n_components):
            col = space.basis[:, j]
            assert col[np.argmax(np.abs(col))] > 0


class TestDistances:
    def test_pythagorean_identity(self):
        # ||v - mean||^2 == ||projection||^2 + dfes^2 for vectors inside
        # and outside the span
        rng = np.random.default_rng(21)
        x = rng.normal(size=(9, 30))
        space = train_eigenspace(x, variance_fraction=1.0)
        for _ in range(200):
            v = rng.normal(size=30) * rng.uniform(0.1, 10.0)
            lhs = float(np.dot(v - space.mean, v - space.mean))
            w = project(space, v)
            rhs = float(w @ w) + dfes(space, v) ** 2
            assert abs(lhs - rhs) <= 5e-6 * max(lhs, 1.0)

    def test_member_vectors_have_zero_residual(self):
        rng = np.random.default_rng(22)
        x = rng.normal(size=(6, 25))
        space = train_eigenspace(x, variance_fraction=1.0)
        for row in x:
            assert dfes(space, row) < 1e-8

    def test_dfes_many_matches_scalar(self):
        rng = np.random.default_rng(23)
        x = rng.normal(size=(8, 40))
        space = train_eigenspace(x, variance_fraction=0.9)
        queries = rng.normal(size=(17, 40))
        batch = dfes_many(space, queries)
        singles = np.array([dfes(space, q) for q in queries])
        assert np.allclose(batch, singles)

    def test_dies_picks_nearest_centroid(self):
        rng = np.random.default_rng(24)
        x = rng.normal(size=(10, 20))
        space = train_eigenspace(x, variance_fraction=1.0)
        c1 = class_centroid(space, x[:5])
        c2 = class_centroid(space, x[5:])
        probe = x[1]
        d, idx = dies(space, probe, [c1, c2])
        w = project(space, probe)
        d1 = np.linalg.norm(w - c1)
        d2 = np.linalg.norm(w - c2)
        assert np.isclose(d, min(d1, d2))
        assert idx == (0 if d1 <= d2 else 1)

    def test_dies_tie_breaks_to_lowest_index(self):
        rng = np.random.default_rng(25)
        x = rng.normal(size=(5, 12))
        space = train_eigenspace(x, variance_fraction=1.0)
        c = class_centroid(space, x[:3])
        d, idx = dies(space, x[0], [c, c.copy()])
        assert idx == 0

    def test_dies_requires_centroids(self):
        rng = np.random.default_rng(26)
        x = rng.normal(size=(5, 12))
        space = train_eigenspace(x)
        with pytest.raises(DataError):
            dies(space, x[0], [])


class TestValidation:
    def test_rejects_single_vector(self):
        with pytest.raises(DataError):
            train_eigenspace(np.ones((1, 5)))

    def test_rejects_bad_variance_fraction(self):
        x = np.random.default_rng(0).normal(size=(4, 6))
        for bad in (0.0, -0.2, 1.5):
            with pytest.raises(DataError):
                train_eigenspace(x, variance_fraction=bad)

    def test_rejects_zero_variance(self):
        x = np.ones((4, 6))
        with pytest.raises(NumericalError):
            train_eigenspace(x)

    def test_rejects_length_mismatch(self):
        rng = np.random.default_rng(27)
        x = rng.normal(size=(4, 6))
        space = train_eigenspace(x)
        with pytest.raises(DataError):
            dfes(space, np.zeros(7))

    def test_near_duplicate_vectors_drop_rank(self):
        rng = np.random.default_rng(28)
        row = rng.normal(size=10)
        x = np.vstack([row, row + 1e-14, rng.normal(size=10)])
        space = train_eigenspace(x, variance_fraction=1.0)
        # three samples span at most rank 2 after centering; the
        # duplicate collapses one more direction
        assert space.n_components == 1 or space.eigenvalues.min() > 0


class TestSerialization:
    def test_payload_round_trip(self):
        rng = np.random.default_rng(31)
        x = rng.normal(size=(7, 15))
        space = train_eigenspace(x, variance_fraction=0.85)
        meta, arrays = eigenspace_to_payload(space)
        back = eigenspace_from_payload(meta, arrays)
        assert np.array_equal(back.mean, space.mean)
        assert np.array_equal(back.basis, space.basis)
        assert np.array_equal(back.eigenvalues, space.eigenvalues)
        assert back.variance_fraction == space.variance_fraction

    def test_payload_rejects_wrong_vector_order(self):
        rng = np.random.default_rng(32)
        x = rng.normal(size=(5, 8))
        space = train_eigenspace(x)
        meta, arrays = eigenspace_to_payload(space)
        meta = dict(meta, vector_order="time-major")
        with pytest.raises(DataError):
            eigenspace_from_payload(meta, arrays)
