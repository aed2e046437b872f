"""Low-rank multi-view subspace clustering with a TOMD-constrained representation.

Model, for views ``X_v`` (``C_v x N``)::

    min  mu * sum_v tr(Z_v' L Z_v) + lambda ||M||_F^2 + ||E||_{2,1}
    s.t. X_v = X_v Z_v + E_v,  M' 1 = 1,  0 <= M <= 1,
         reshape(Z, (N1, N2, N3, V)) has a TOMD of the configured rank

solved by ADMM with a splitting variable ``S = Z``.  ``lambda`` is implied
by the adaptive-neighbour count ``K`` and never stored.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

from .bundle import load_bundle, save_bundle
from .exceptions import AffinityError, NumericalError, RankError, ShapeError, ValidationError
from .tensor_core import reshape_phi
from .tomd import AlsConfig, TomdFactors, TomdRank, tomd_als

log = logging.getLogger(__name__)


@dataclass
class MultiViewDataset:
    views: list[np.ndarray]
    labels: np.ndarray | None = None
    reshape_dims: tuple[int, int, int] | None = None
    name: str = "dataset"
    k: int | None = None

    def __post_init__(self):
        self.views = [np.asarray(X, dtype=np.float64) for X in self.views]
        if not self.views:
            raise ShapeError("dataset needs at least one view")
        n = self.views[0].shape[1]
        for v, X in enumerate(self.views):
            if X.ndim != 2 or X.shape[1] != n:
                raise ShapeError(f"view {v} has shape {X.shape}, expected N={n} columns")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise ShapeError(f"labels have length {self.labels.size}, expected {n}")
            if self.k is None:
                self.k = int(np.unique(self.labels).size)
        if self.reshape_dims is None:
            self.reshape_dims = near_cubic_factorization(n * n)
        self.reshape_dims = tuple(int(d) for d in self.reshape_dims)
        if len(self.reshape_dims) != 3 or np.prod(self.reshape_dims) != n * n:
            raise ShapeError(f"reshape dims {self.reshape_dims} must multiply to N^2={n * n}")

    @property
    def n_samples(self) -> int:
        return self.views[0].shape[1]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def tensor_shape(self) -> tuple[int, int, int, int]:
        return (*self.reshape_dims, self.n_views)


def sample_split_factorization(n: int) -> tuple[int, int, int]:
    """``(n, a, b)`` with ``a * b = n`` and ``a <= b`` as close as possible.

    Keeps one full sample index as the first mode and splits the other.
    """
    a = max(d for d in range(1, int(np.sqrt(n)) + 1) if n % d == 0)
    return (n, a, n // a)


def near_cubic_factorization(m: int) -> tuple[int, int, int]:
    """Factor ``m = a*b*c`` with ``a <= b <= c`` as close to a cube as possible."""
    best = None
    a = 1
    while a * a * a <= m:
        if m % a == 0:
            rest = m // a
            b = a
            while b * b <= rest:
                if rest % b == 0:
                    c = rest // b
                    key = (c - a, c)
                    if best is None or key < best[0]:
                        best = (key, (a, b, c))
                b += 1
        a += 1
    return best[1]


@dataclass
class AdmmConfig:
    mu: float = 1.0
    K: int = 10
    rank: TomdRank = field(default_factory=lambda: TomdRank((30, 15, 11, 3), (4,) * 6))
    tau0: float = 1.0
    beta: float = 1.5
    tau_max: float = 1e10
    tol: float = 1e-7
    iter_max: int = 150
    als: AlsConfig = field(default_factory=lambda: AlsConfig(iter_max=50, tol_als=1e-12))
    include_self: bool = False
    warm_start: bool = True

    def __post_init__(self):
        if isinstance(self.rank, str):
            self.rank = TomdRank.parse(self.rank)
        if isinstance(self.als, dict):
            self.als = AlsConfig(**self.als)
        if self.mu < 0:
            raise ValidationError("mu must be nonnegative")
        if self.K < 1:
            raise ValidationError("K must be >= 1")
        if not self.beta > 1:
            raise ValidationError("beta must exceed 1")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if not 0 < self.tau0 <= self.tau_max:
            raise ValidationError("need 0 < tau0 <= tau_max")
        if self.iter_max < 1:
            raise ValidationError("iter_max must be >= 1")

    def check(self, dataset: MultiViewDataset) -> None:
        if self.K >= dataset.n_samples:
            raise ValidationError(f"K={self.K} must be below N={dataset.n_samples}")
        try:
            self.rank.check_shape(dataset.tensor_shape)
        except RankError as exc:
            raise RankError(f"rank {self.rank} invalid for {dataset.tensor_shape}: {exc}") from exc

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rank"] = str(self.rank)
        return out


@dataclass
class AdmmState:
    Z: np.ndarray
    S: np.ndarray
    E: np.ndarray
    M: np.ndarray
    W: np.ndarray
    Y: np.ndarray
    tau: float
    iter: int = 0
    residuals: tuple[float, float] = (np.inf, np.inf)
    converged: bool = False
    factors: TomdFactors | None = None

    @classmethod
    def zeros(cls, dataset: MultiViewDataset, tau0: float = 1.0) -> "AdmmState":
        n, V = dataset.n_samples, dataset.n_views
        c = sum(X.shape[0] for X in dataset.views)
        return cls(
            Z=np.zeros((n, n, V)),
            S=np.zeros((n, n, V)),
            E=np.zeros((c, n)),
            M=np.zeros((n, n)),
            W=np.zeros((c, n)),
            Y=np.zeros((n, n, V)),
            tau=float(tau0),
        )

    def save(self, directory, trace=None) -> None:
        """Checkpoint: the iterates as text tensors plus a JSON header."""
        arrays = {k: getattr(self, k) for k in ("Z", "S", "E", "M", "W", "Y")}
        header = {
            "format": "admm-state",
            "tau": self.tau,
            "iter": self.iter,
            "residuals": list(self.residuals),
            "converged": self.converged,
        }
        if trace is not None:
            header["trace"] = [list(map(float, row)) for row in trace]
        save_bundle(directory, arrays, header)
        if self.factors is not None:
            self.factors.save(Path(directory) / "factors")

    @classmethod
    def load(cls, directory) -> "AdmmState":
        arrays, header = load_bundle(directory)
        factors = None
        if (Path(directory) / "factors").is_dir():
            factors = TomdFactors.load(Path(directory) / "factors")
        return cls(
            **arrays,
            tau=header["tau"],
            iter=header["iter"],
            residuals=tuple(header["residuals"]),
            converged=header["converged"],
            factors=factors,
        )


def _view_slices(dataset: MultiViewDataset) -> list[slice]:
    out, start = [], 0
    for X in dataset.views:
        out.append(slice(start, start + X.shape[0]))
        start += X.shape[0]
    return out


def update_z(state: AdmmState, dataset: MultiViewDataset, cfg: AdmmConfig) -> np.ndarray:
    """Project ``S - Y/tau`` onto the TOMD format by ALS.

    Sets ``state.factors`` to the fitted factors (used as the next warm start).
    """
    n, V = dataset.n_samples, dataset.n_views
    target = reshape_phi(state.S - state.Y / state.tau, dataset.tensor_shape)
    init = None
    if cfg.warm_start and state.factors is not None and np.any(state.factors.cores[4]):
        init = state.factors
    factors, _ = tomd_als(target, cfg.rank, cfg.als, init=init)
    state.factors = factors
    return reshape_phi(factors.full(cfg.als.schedule), (n, n, V))


def update_s(state: AdmmState, dataset: MultiViewDataset, cfg: AdmmConfig) -> np.ndarray:
    """Per-view linear solve for the splitting variable.

    ``(tau (I + X'X) + 2 mu L) S_v = tau Z_v + Y_v + tau X'(X - E_v + W_v / tau)``
    with ``L`` the Laplacian of the current affinity ``M``.
    """
    tau, n = state.tau, dataset.n_samples
    L = graph_laplacian(state.M)
    S = np.empty_like(state.S)
    for v, (X, rows) in enumerate(zip(dataset.views, _view_slices(dataset))):
        A = tau * (np.eye(n) + X.T @ X) + 2 * cfg.mu * L
        A = (A + A.T) / 2
        rhs = tau * state.Z[:, :, v] + state.Y[:, :, v] + tau * X.T @ (
            X - state.E[rows] + state.W[rows] / tau
        )
        S_v = scipy.linalg.solve(A, rhs, assume_a="pos")
        resid = np.linalg.norm(A @ S_v - rhs) / max(np.linalg.norm(rhs), 1e-300)
        if resid > 1e-6:
            raise NumericalError(f"S-update solve for view {v} has residual {resid:.2e}")
        S[:, :, v] = S_v
    return S


def shrink_columns(H: np.ndarray, threshold: float) -> np.ndarray:
    """Column-wise l2 shrinkage: the proximal map of ``threshold * ||.||_{2,1}``."""
    norms = np.linalg.norm(H, axis=0)
    scale = np.zeros_like(norms)
    keep = norms > threshold
    scale[keep] = (norms[keep] - threshold) / norms[keep]
    return H * scale


def update_e(state: AdmmState, dataset: MultiViewDataset) -> np.ndarray:
    H = np.vstack([
        X - X @ state.S[:, :, v] + state.W[rows] / state.tau
        for v, (X, rows) in enumerate(zip(dataset.views, _view_slices(dataset)))
    ])
    return shrink_columns(H, 1.0 / state.tau)


def pairwise_distances(S: np.ndarray) -> np.ndarray:
    """``p[i, j] = sum_v ||S_v[:, i] - S_v[:, j]||^2`` for an ``N x N x V`` stack."""
    n = S.shape[0]
    p = np.zeros((n, n))
    for v in range(S.shape[2]):
        cols = S[:, :, v]
        sq = np.sum(cols * cols, axis=0)
        p += sq[:, None] + sq[None, :] - 2 * cols.T @ cols
    np.maximum(p, 0, out=p)
    np.fill_diagonal(p, 0)
    return p


def adaptive_neighbors(p: np.ndarray, K: int, include_self: bool = False) -> np.ndarray:
    """Column-stochastic affinity from distances by the adaptive-neighbour rule.

    Column ``i`` puts weight ``(p_(K+1) - p_(j)) / (K p_(K+1) - sum_k p_(k))``
    on its ``K`` nearest samples (sorted distances ``p_(1) <= p_(2) <= ...``)
    and zero elsewhere.  A vanishing denominator, or no ``(K+1)``-th
    candidate, gives uniform weights ``1/K``.
    """
    n = p.shape[0]
    M = np.zeros((n, n))
    for i in range(n):
        cand = np.arange(n) if include_self else np.delete(np.arange(n), i)
        if K > cand.size:
            raise ValidationError(f"K={K} exceeds the {cand.size} candidate neighbours")
        order = cand[np.argsort(p[cand, i], kind="stable")]
        near = order[:K]
        d = p[near, i]
        if K < order.size:
            far = p[order[K], i]
            denom = K * far - d.sum()
        else:
            denom = 0.0
        if denom > 0:
            M[near, i] = (far - d) / denom
        else:
            M[near, i] = 1.0 / K
    return M


def update_m(state: AdmmState, cfg: AdmmConfig) -> np.ndarray:
    return adaptive_neighbors(pairwise_distances(state.S), cfg.K, cfg.include_self)


def graph_laplacian(M: np.ndarray) -> np.ndarray:
    """``L = D - (M + M')/2`` with ``D`` the degree matrix of the symmetrized graph."""
    M = np.asarray(M, dtype=np.float64)
    if np.any(M < 0):
        raise AffinityError("affinity matrix has negative entries")
    sym = (M + M.T) / 2
    return np.diag(sym.sum(axis=1)) - sym


def update_multipliers(state: AdmmState, dataset: MultiViewDataset, cfg: AdmmConfig):
    """Dual ascent on ``W`` and ``Y`` and the penalty increase; returns ``(W, Y, tau)``."""
    tau = state.tau
    W = state.W.copy()
    for v, (X, rows) in enumerate(zip(dataset.views, _view_slices(dataset))):
        W[rows] += tau * (X - X @ state.S[:, :, v] - state.E[rows])
    Y = state.Y + tau * (state.Z - state.S)
    return W, Y, min(cfg.beta * tau, cfg.tau_max)


def residuals(state: AdmmState, dataset: MultiViewDataset) -> dict[str, float]:
    """Stopping quantities (max over views) and their per-view averages."""
    recon = [
        np.max(np.abs(X - X @ state.S[:, :, v] - state.E[rows]), initial=0.0)
        for v, (X, rows) in enumerate(zip(dataset.views, _view_slices(dataset)))
    ]
    match = [np.max(np.abs(state.Z[:, :, v] - state.S[:, :, v])) for v in range(dataset.n_views)]
    return {
        "reconstruction": float(max(recon)),
        "match": float(max(match)),
        "reconstruction_mean": float(np.mean(recon)),
        "match_mean": float(np.mean(match)),
    }


def affinity_from_z(Z: np.ndarray) -> np.ndarray:
    """Symmetric affinity ``(1/V) sum_v (|Z_v| + |Z_v'|)``."""
    V = Z.shape[2]
    A = np.abs(Z)
    return (A.sum(axis=2) + A.sum(axis=2).T) / V


def admm_solve(
    dataset: MultiViewDataset,
    cfg: AdmmConfig,
    state: AdmmState | None = None,
) -> tuple[AdmmState, list[dict[str, float]]]:
    """Run the ADMM iterations; pass ``state`` to resume from a checkpoint.

    Returns the final state and one residual record per iteration.
    """
    cfg.check(dataset)
    if state is None:
        state = AdmmState.zeros(dataset, cfg.tau0)
    trace = []
    while state.iter < cfg.iter_max and not state.converged:
        state.Z = update_z(state, dataset, cfg)
        state.S = update_s(state, dataset, cfg)
        state.E = update_e(state, dataset)
        state.M = update_m(state, cfg)
        state.W, state.Y, state.tau = update_multipliers(state, dataset, cfg)
        state.iter += 1
        res = residuals(state, dataset)
        trace.append(res)
        state.residuals = (res["reconstruction"], res["match"])
        state.converged = max(state.residuals) <= cfg.tol
        log.debug("iter %d: recon %.3e match %.3e tau %.3g", state.iter, *state.residuals, state.tau)
    return state, trace
