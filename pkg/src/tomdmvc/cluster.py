"""Spectral clustering of an affinity matrix, with a small seeded k-means."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError
from .linalg import sym_eig_smallest


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    k: int
    inertia: float
    history: list[float] = field(default_factory=list)


def _sq_dist(points, centers):
    d = (
        np.sum(points**2, axis=1)[:, None]
        + np.sum(centers**2, axis=1)[None, :]
        - 2 * points @ centers.T
    )
    return np.maximum(d, 0)


def _plus_plus(points, k, rng):
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = _sq_dist(points, points[chosen])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(free))
        chosen.append(idx)
        closest = np.minimum(closest, _sq_dist(points, points[[idx]])[:, 0])
    return points[chosen].copy()


def _lloyd(points, centers, max_iter):
    k = centers.shape[0]
    labels = None
    history = []
    for _ in range(max_iter):
        d = _sq_dist(points, centers)
        new = np.argmin(d, axis=1)
        history.append(float(d[np.arange(len(new)), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = points[members].mean(axis=0)
            else:
                # reseed an empty cluster at the point farthest from its centre
                far = int(np.argmax(d[np.arange(len(labels)), labels]))
                centers[j] = points[far]
                labels[far] = j
    d = _sq_dist(points, centers)
    labels = np.argmin(d, axis=1)
    inertia = float(d[np.arange(len(labels)), labels].sum())
    return labels, inertia, history


def kmeans(points: np.ndarray, k: int, seed: int = 0, n_init: int = 10,
           max_iter: int = 300) -> ClusterAssignment:
    """Lloyd's algorithm with k-means++ seeding; best of ``n_init`` starts.

    Deterministic for a given ``seed``.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"k={k} out of range for {n} points")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        labels, inertia, history = _lloyd(points, _plus_plus(points, k, rng), max_iter)
        if best is None or inertia < best.inertia:
            best = ClusterAssignment(labels, k, inertia, history)
    return best


def normalized_laplacian(M: np.ndarray) -> np.ndarray:
    """``I - D^-1/2 W D^-1/2`` for ``W = (M + M')/2``; isolated nodes keep identity rows."""
    W = (np.asarray(M, dtype=np.float64) + np.asarray(M, dtype=np.float64).T) / 2
    deg = W.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    inv_sqrt[deg > 0] = 1.0 / np.sqrt(deg[deg > 0])
    return np.eye(len(deg)) - inv_sqrt[:, None] * W * inv_sqrt[None, :]


def spectral_embedding(M: np.ndarray, k: int) -> np.ndarray:
    _, vectors = sym_eig_smallest(normalized_laplacian(M), k)
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    return np.divide(vectors, norms, out=vectors.copy(), where=norms > 0)


def spectral_clustering(M: np.ndarray, k: int, seed: int = 0) -> ClusterAssignment:
    """Normalized spectral clustering (row-normalized eigenvectors, then k-means)."""
    M = np.asarray(M, dtype=np.float64)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValidationError(f"affinity must be square, got {M.shape}")
    if not 1 <= k <= n:
        raise ValidationError(f"k={k} out of range for N={n}")
    if k == 1:
        return ClusterAssignment(np.zeros(n, dtype=np.int64), 1, 0.0)
    return kmeans(spectral_embedding(M, k), k, seed=seed)
