"""Comparison decompositions: Tucker, Tucker with a ring core, bare O-minus.

``tutr`` is TOMD with the bridge removed (a four-core ring inside Tucker
factors) and ``ominus`` is TOMD with identity factor matrices, so the open
modes sit directly on the ring cores.  Both reuse the TOMD ALS engine.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence

import numpy as np

from .exceptions import RankError, ShapeError
from .linalg import truncated_svd
from .tensor_core import mode_n_unfold, multi_mode_product
from .tomd import (
    TOMD_LAYOUT,
    AlsConfig,
    init_network,
    layout_shapes,
    network_als,
    network_contract,
    network_full,
)

TUTR_LAYOUT = (
    ("d4", "r1", "d1"),
    ("d1", "r2", "d2"),
    ("d2", "r3", "d3"),
    ("d3", "r4", "d4"),
)

VARIANTS = ("tucker", "tutr", "ominus")


@dataclass(frozen=True)
class BaselineRank:
    """Rank of a baseline decomposition.

    ``tucker``: ``R1..R4``; ``tutr``: ``R1..R4`` then ring bonds ``D1..D4``;
    ``ominus``: bonds ``D1..D6``.
    """

    variant: str
    ranks: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        expected = {"tucker": 4, "tutr": 8, "ominus": 6}
        if self.variant not in expected:
            raise RankError(f"unknown baseline {self.variant!r}")
        if len(self.ranks) != expected[self.variant]:
            raise RankError(
                f"{self.variant} rank needs {expected[self.variant]} values, got {self.ranks}"
            )
        if min(self.ranks) < 1:
            raise RankError(f"ranks must be >= 1, got {self.ranks}")

    @classmethod
    def parse(cls, variant: str, text: str) -> "BaselineRank":
        try:
            values = [int(v) for v in text.replace("|", ",").split(",") if v.strip()]
        except ValueError as exc:
            raise RankError(f"cannot parse {variant} rank {text!r}") from exc
        return cls(variant, tuple(values))

    @property
    def outer(self) -> tuple[int, ...] | None:
        return self.ranks[:4] if self.variant != "ominus" else None

    def dims(self, shape: Sequence[int]) -> dict[str, int]:
        if self.variant == "ominus":
            out = {f"r{n + 1}": i for n, i in enumerate(shape)}
            out.update({f"d{k + 1}": d for k, d in enumerate(self.ranks)})
        else:
            out = {f"r{n + 1}": r for n, r in enumerate(self.ranks[:4])}
            out.update({f"d{k + 1}": d for k, d in enumerate(self.ranks[4:])})
        return out

    def check_shape(self, shape: Sequence[int]) -> None:
        if len(shape) != 4:
            raise ShapeError(f"expected a 4-way tensor, got shape {tuple(shape)}")
        if self.outer is not None:
            for n, (r, i) in enumerate(zip(self.outer, shape)):
                if r > i:
                    raise RankError(f"R{n + 1}={r} exceeds extent I{n + 1}={i}")
        if self.variant == "tucker":
            # HOOI needs each R_n reachable from the product of the others
            for n, r in enumerate(self.ranks):
                others = prod(self.ranks) // r
                if r > others:
                    raise RankError(f"R{n + 1}={r} exceeds the product {others} of the other ranks")

    def __str__(self):
        return ",".join(map(str, self.ranks))


@dataclass
class Decomposition:
    """Fitted baseline: ``cores`` (a single core for Tucker) and factor matrices.

    ``factors`` is empty for ``ominus``.
    """

    variant: str
    cores: list[np.ndarray]
    factors: list[np.ndarray]

    def full(self) -> np.ndarray:
        if self.variant == "tucker":
            return multi_mode_product(self.cores[0], dict(enumerate(self.factors)))
        if self.variant == "tutr":
            return network_full(self.cores, self.factors, TUTR_LAYOUT)
        return network_contract(self.cores, TOMD_LAYOUT)

    @property
    def size(self) -> int:
        return sum(a.size for a in self.cores + self.factors)


def storage_cost(shape: Sequence[int], rank: BaselineRank) -> int:
    """Scalars stored by a baseline decomposition of ``shape``."""
    if rank.variant == "tucker":
        return sum(i * r for i, r in zip(shape, rank.ranks)) + prod(rank.ranks)
    if rank.variant == "tutr":
        R, D = rank.ranks[:4], rank.ranks[4:]
        ring = sum(D[n - 1] * R[n] * D[n] for n in range(4))
        return sum(i * r for i, r in zip(shape, R)) + ring
    D1, D2, D3, D4, D5, D6 = rank.ranks
    I1, I2, I3, I4 = shape
    return D4 * I1 * D1 * D5 + D1 * I2 * D2 + D2 * I3 * D3 * D6 + D3 * I4 * D4 + D5 * D6


def _relative_change(last, new):
    norm = np.linalg.norm(last)
    diff = np.linalg.norm(last - new)
    return diff / norm if norm > 0 else (0.0 if diff == 0 else np.inf)


def tucker_als(x: np.ndarray, ranks, cfg: AlsConfig | None = None):
    """Higher-order orthogonal iteration, initialized by truncated HOSVD.

    Returns ``(Decomposition, trace)`` with the relative error per sweep.
    """
    cfg = cfg or AlsConfig()
    if not isinstance(ranks, BaselineRank):
        ranks = BaselineRank("tucker", ranks)
    x = np.asarray(x, dtype=np.float64)
    ranks.check_shape(x.shape)
    norm_x = np.linalg.norm(x)
    if norm_x == 0:
        factors = [np.zeros((i, r)) for i, r in zip(x.shape, ranks.ranks)]
        return Decomposition("tucker", [np.zeros(ranks.ranks)], factors), [0.0]

    factors = [truncated_svd(mode_n_unfold(x, n), r).U for n, r in enumerate(ranks.ranks)]
    core = multi_mode_product(x, {n: U.T for n, U in enumerate(factors)})
    current = multi_mode_product(core, dict(enumerate(factors)))
    trace = []
    for _ in range(cfg.iter_max):
        last = current
        for n, r in enumerate(ranks.ranks):
            y = multi_mode_product(x, {m: U.T for m, U in enumerate(factors) if m != n})
            factors[n] = truncated_svd(mode_n_unfold(y, n), r).U
        core = multi_mode_product(x, {n: U.T for n, U in enumerate(factors)})
        current = multi_mode_product(core, dict(enumerate(factors)))
        trace.append(float(np.linalg.norm(x - current) / norm_x))
        if _relative_change(last, current) <= cfg.tol_als:
            break
    return Decomposition("tucker", [core], factors), trace


def tutr_als(x: np.ndarray, ranks, cfg: AlsConfig | None = None, callback=None):
    """ALS for Tucker factors around a four-core tensor ring."""
    cfg = cfg or AlsConfig()
    if not isinstance(ranks, BaselineRank):
        ranks = BaselineRank("tutr", ranks)
    x = np.asarray(x, dtype=np.float64)
    ranks.check_shape(x.shape)
    cores, factors = init_network(x, TUTR_LAYOUT, ranks.dims(x.shape), cfg.seed)
    out = network_als(x, TUTR_LAYOUT, cores, factors, cfg, callback=callback)
    return Decomposition("tutr", out.cores, out.factors), out.trace


def ominus_als(x: np.ndarray, bonds, cfg: AlsConfig | None = None, callback=None):
    """ALS for the five O-minus cores with the data modes left open."""
    cfg = cfg or AlsConfig()
    if not isinstance(bonds, BaselineRank):
        bonds = BaselineRank("ominus", bonds)
    x = np.asarray(x, dtype=np.float64)
    bonds.check_shape(x.shape)
    dims = bonds.dims(x.shape)
    cores, factors = init_network(x, TOMD_LAYOUT, dims, cfg.seed, fit_factors=False)
    out = network_als(x, TOMD_LAYOUT, cores, factors, cfg, fit_factors=False, callback=callback)
    return Decomposition("ominus", out.cores, []), out.trace


def random_baseline(shape: Sequence[int], rank: BaselineRank, seed=None) -> Decomposition:
    """Random factors of a baseline format (exactly representable test data)."""
    rng = np.random.default_rng(seed)
    if rank.variant == "tucker":
        cores = [rng.standard_normal(rank.ranks)]
        layout = None
    else:
        layout = TUTR_LAYOUT if rank.variant == "tutr" else TOMD_LAYOUT
        cores = [rng.standard_normal(s) for s in layout_shapes(layout, rank.dims(shape))]
    factors = []
    if rank.variant != "ominus":
        factors = [rng.standard_normal((i, r)) for i, r in zip(shape, rank.ranks[:4])]
    return Decomposition(rank.variant, cores, factors)
