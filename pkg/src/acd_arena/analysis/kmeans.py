"""K-Means (k-means++ seeding, Lloyd iterations), silhouette and K selection."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)


class DegenerateDataWarning(UserWarning):
    pass


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    silhouette: Optional[float] = None
    inertia_history: list = field(default_factory=list)
    iterations: int = 0


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d = (x ** 2).sum(1)[:, None] - 2 * x @ c.T + (c ** 2).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _inertia(x: np.ndarray, c: np.ndarray, labels: np.ndarray) -> float:
    return float(((x - c[labels]) ** 2).sum())


def _plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centres = [x[rng.integers(n)]]
    closest = ((x - centres[0]) ** 2).sum(1)
    for _ in range(1, k):
        total = closest.sum()
        idx = rng.choice(n, p=closest / total) if total > 0 else rng.integers(n)
        centres.append(x[idx])
        closest = np.minimum(closest, ((x - x[idx]) ** 2).sum(1))
    return np.array(centres, dtype=float)


def _lloyd(x: np.ndarray, centroids: np.ndarray, max_iter: int) -> ClusterModel:
    k = len(centroids)
    labels = _sq_dists(x, centroids).argmin(1)
    history = [_inertia(x, centroids, labels)]
    it = 0
    for it in range(1, max_iter + 1):
        new = np.empty_like(centroids)
        for j in range(k):
            members = x[labels == j]
            new[j] = members.mean(0) if len(members) else centroids[j]
        empty = [j for j in range(k) if not np.any(labels == j)]
        if empty:
            # reseed each empty cluster at the point worst served by its centroid
            far = ((x - new[labels]) ** 2).sum(1)
            for j in empty:
                i = int(far.argmax())
                new[j] = x[i]
                far[i] = -1.0
        centroids = new
        new_labels = _sq_dists(x, centroids).argmin(1)
        history.append(_inertia(x, centroids, new_labels))
        if history[-1] > history[-2] * (1 + 1e-12) + 1e-12:
            raise AssertionError(f"inertia increased at iteration {it}: {history[-2]} -> {history[-1]}")
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    return ClusterModel(k, centroids, labels, history[-1], None, history, it)


def kmeans(matrix, k: int, seed: int = 0, max_iter: int = 300, n_init: int = 1) -> ClusterModel:
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2:
        raise ValueError("kmeans expects a 2-D matrix")
    if k < 1:
        raise ValueError("K must be at least 1")
    if k > len(x):
        raise ValueError(f"K={k} exceeds the number of rows ({len(x)})")
    rng = np.random.default_rng(seed)
    best: Optional[ClusterModel] = None
    for _ in range(max(1, n_init)):
        model = _lloyd(x, _plus_plus(x, k, rng), max_iter)
        if best is None or model.inertia < best.inertia:
            best = model
    if 1 < k < len(x) and len(np.unique(best.assignments)) > 1:
        best.silhouette = silhouette(x, best.assignments)
    return best


def _pairwise(x: np.ndarray, block: int = 256) -> np.ndarray:
    n = len(x)
    out = np.empty((n, n))
    for start in range(0, n, block):
        chunk = x[start:start + block]
        out[start:start + block] = np.sqrt(((chunk[:, None, :] - x[None, :, :]) ** 2).sum(-1)) \
            if x.shape[1] <= 64 else np.sqrt(_sq_dists(chunk, x))
    np.fill_diagonal(out, 0.0)
    return out


def silhouette_samples(matrix, labels) -> np.ndarray:
    x = np.asarray(matrix, dtype=float)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if len(uniq) < 2 or len(uniq) >= len(x):
        raise ValueError("silhouette needs 2 <= clusters < samples")
    dist = _pairwise(x)
    sums = np.stack([dist[:, labels == u].sum(1) for u in uniq], axis=1)
    sizes = np.array([(labels == u).sum() for u in uniq])
    own = np.searchsorted(uniq, labels)
    own_size = sizes[own]
    a = np.where(own_size > 1, sums[np.arange(len(x)), own] / np.maximum(own_size - 1, 1), 0.0)
    other = sums / sizes
    other[np.arange(len(x)), own] = np.inf
    b = other.min(1)
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, (b - a) / denom, 0.0)
    s[own_size == 1] = 0.0
    return np.clip(np.nan_to_num(s), -1.0, 1.0)


def silhouette(matrix, labels) -> float:
    return float(silhouette_samples(matrix, labels).mean())


def elbow(ks: Sequence[int], inertias: Sequence[float]) -> Optional[int]:
    """K with the largest second difference of the inertia curve."""
    if len(ks) < 3:
        return None
    second = [inertias[i - 1] - 2 * inertias[i] + inertias[i + 1] for i in range(1, len(ks) - 1)]
    return int(ks[1 + int(np.argmax(second))])


def select_k(matrix, k_range: Sequence[int] = range(2, 11), seed: int = 0, n_init: int = 3):
    """Pick K by mean silhouette (ties to the smaller K); the elbow is diagnostic only."""
    x = np.asarray(matrix, dtype=float)
    ks = list(k_range)
    if len(x) and np.ptp(x, axis=0).max(initial=0.0) == 0.0:
        warnings.warn("all rows are identical; returning K=1", DegenerateDataWarning, stacklevel=2)
        return 1, {"k_range": ks, "inertia": {}, "silhouette": {}, "elbow": None, "degenerate": True}
    if not ks or min(ks) < 2 or max(ks) > len(x) - 1:
        raise ValueError(f"k range must lie within [2, {len(x) - 1}]")
    inertia, sil = {}, {}
    for k in ks:
        model = kmeans(x, k, seed=seed, n_init=n_init)
        inertia[k] = model.inertia
        sil[k] = model.silhouette if model.silhouette is not None else -1.0
    best = max(ks, key=lambda k: (sil[k], -k))
    return best, {
        "k_range": ks,
        "inertia": inertia,
        "silhouette": sil,
        "elbow": elbow(ks, [inertia[k] for k in ks]),
        "degenerate": False,
    }
