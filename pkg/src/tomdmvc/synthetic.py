"""Synthetic data generators for tests, demos and the acceptance suite."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .mvc import MultiViewDataset, sample_split_factorization


def union_of_subspaces(
    n_clusters: int = 3,
    per_cluster: int = 20,
    dims: Sequence[int] = (30, 40),
    subspace_rank: int = 3,
    corruption: float = 0.05,
    magnitude: float = 3.0,
    mode: str = "columns",
    seed: int = 0,
    reshape_dims=None,
) -> MultiViewDataset:
    """Views drawn from a union of independent low-rank subspaces.

    Each view ``v`` gets its own random ``subspace_rank``-dimensional basis
    per cluster; a sample's coordinates are shared across views.  Columns are
    unit-normalized, then corrupted with gross uniform noise of amplitude
    ``magnitude`` times the data scale.  With ``mode="columns"`` a fraction
    ``corruption`` of the samples of each view is overwritten entirely
    (sample-specific outliers); any other mode corrupts that fraction of
    individual entries.

    ``reshape_dims`` defaults to ``(N, a, b)`` with ``a * b = N``.
    """
    rng = np.random.default_rng(seed)
    n = n_clusters * per_cluster
    labels = rng.permutation(np.repeat(np.arange(n_clusters), per_cluster))
    coords = rng.standard_normal((subspace_rank, n))
    views = []
    for c_v in dims:
        X = np.empty((c_v, n))
        for c in range(n_clusters):
            basis = np.linalg.qr(rng.standard_normal((c_v, subspace_rank)))[0]
            X[:, labels == c] = basis @ coords[:, labels == c]
        X /= np.linalg.norm(X, axis=0, keepdims=True)
        if mode == "columns":
            mask = np.zeros(X.shape, dtype=bool)
            mask[:, rng.choice(n, int(round(corruption * n)), replace=False)] = True
        else:
            mask = rng.random(X.shape) < corruption
        scale = magnitude * np.max(np.abs(X))
        X[mask] = rng.uniform(-scale, scale, size=mask.sum())
        views.append(X)
    if reshape_dims is None:
        reshape_dims = sample_split_factorization(n)
    return MultiViewDataset(views, labels, reshape_dims, name="synthetic-subspaces")
