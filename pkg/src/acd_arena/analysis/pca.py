"""Principal component analysis via thin SVD of the centred data."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class ZeroVarianceWarning(UserWarning):
    pass


@dataclass
class PcaResult:
    projected: np.ndarray
    basis: np.ndarray
    explained_variance: np.ndarray
    explained_ratio: np.ndarray
    mean: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.projected @ self.basis.T + self.mean


def pca(matrix, components: int) -> PcaResult:
    """Project onto the top ``components`` directions (centred, not scaled).

    Each basis column is sign-fixed so its largest-magnitude entry is positive,
    which makes results reproducible across LAPACK builds.
    """
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2:
        raise ValueError("pca expects a 2-D matrix")
    n, d = x.shape
    if not 1 <= components <= min(n, d):
        raise ValueError(f"components must be in [1, {min(n, d)}], got {components}")
    mean = x.mean(axis=0)
    xc = x - mean
    denom = max(n - 1, 1)
    total = float((xc ** 2).sum() / denom)
    if total <= 1e-300:
        warnings.warn("data has zero variance; projection is all zeros", ZeroVarianceWarning, stacklevel=2)
        basis = np.eye(d)[:, :components]
        zeros = np.zeros(components)
        return PcaResult(np.zeros((n, components)), basis, zeros, zeros.copy(), mean)

    _, s, vt = np.linalg.svd(xc, full_matrices=False)
    basis = vt[:components].T.copy()
    pivot = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[pivot, np.arange(components)])
    signs[signs == 0] = 1.0
    basis *= signs
    var = s[:components] ** 2 / denom
    return PcaResult(xc @ basis, basis, var, var / total, mean)
