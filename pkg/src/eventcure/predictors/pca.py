from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DegenerateCovariance, DimensionMismatch


@dataclass(frozen=True, eq=False)
class PcaTransform:
    mean: np.ndarray
    basis: np.ndarray  # d x d', orthonormal columns, descending variance
    explained_variance: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def reduced_dim(self) -> int:
        return self.basis.shape[1]

    def to_dict(self):
        return {
            "mean": self.mean.tolist(),
            "basis": self.basis.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        mean = np.asarray(d["mean"], dtype=np.float64)
        basis = np.asarray(d["basis"], dtype=np.float64)
        var = np.asarray(d["explained_variance"], dtype=np.float64)
        if basis.ndim != 2 or mean.shape != (basis.shape[0],) or var.shape != (basis.shape[1],):
            raise DimensionMismatch("inconsistent PCA shapes")
        return cls(mean, basis, var)


def pca_fit(features, reduced_dim: int) -> PcaTransform:
    """Fit the top ``reduced_dim`` principal directions of ``features``.

    Uses the SVD of the centred data; each basis column's sign is fixed so
    that its largest-magnitude entry is positive.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch("features must be an M x d matrix")
    M, d = X.shape
    if not 1 <= reduced_dim <= d:
        raise ConfigError(f"reduced_dim must be in [1, {d}], got {reduced_dim}")
    if M < reduced_dim:
        raise ConfigError(f"need at least {reduced_dim} rows, got {M}")
    mean = X.mean(axis=0)
    Xc = X - mean
    if M < 2 or not np.any(Xc):
        raise DegenerateCovariance("all rows are identical")

    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    basis = vt[:reduced_dim].T.copy()
    pivot = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[pivot, np.arange(reduced_dim)])
    basis *= signs
    var = np.zeros(reduced_dim)
    k = min(reduced_dim, s.size)
    var[:k] = s[:k] ** 2 / (M - 1)
    return PcaTransform(mean, basis, var)


def pca_apply(t: PcaTransform, features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != t.input_dim:
        raise DimensionMismatch(f"expected {t.input_dim} columns, got {X.shape[1]}")
    return (X - t.mean) @ t.basis
