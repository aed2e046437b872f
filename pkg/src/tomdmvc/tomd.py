"""Tucker-O-Minus decomposition (TOMD) and its alternating least squares fit.

A TOMD of a 4-way tensor ``X`` (``I1 x I2 x I3 x I4``) is

    X = core x_1 U1 x_2 U2 x_3 U3 x_4 U4,

where the ``R1 x R2 x R3 x R4`` core is the contraction of an O-minus
network: a ring of four cores ``G1..G4`` plus a bridge matrix ``G5`` that
links ``G1`` and ``G3``::

    G1: (D4, R1, D1, D5)    G2: (D1, R2, D2)
    G3: (D2, R3, D3, D6)    G4: (D3, R4, D4)    G5: (D5, D6)

The fitting engine in this module is written for any "cores inside Tucker
factors" network described by a *layout* (one tuple of axis labels per core,
``"r<n>"`` for the open mode ``n`` and ``"d<k>"`` for bonds).  The baselines
reuse it with other layouts.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import prod
from typing import Callable, Sequence

import numpy as np

from .bundle import load_bundle, save_bundle
from .exceptions import RankError, ShapeError, ValidationError
from .linalg import least_squares, truncated_svd
from .tensor_core import (
    ContractionNetwork,
    contract,
    mode_n_fold,
    mode_n_unfold,
    multi_mode_product,
    n_unfold,
)

log = logging.getLogger(__name__)

Layout = tuple[tuple[str, ...], ...]

TOMD_LAYOUT: Layout = (
    ("d4", "r1", "d1", "d5"),
    ("d1", "r2", "d2"),
    ("d2", "r3", "d3", "d6"),
    ("d3", "r4", "d4"),
    ("d5", "d6"),
)


def _mode_of(label: str) -> int | None:
    return int(label[1:]) - 1 if label[0] == "r" else None


@dataclass(frozen=True)
class TomdRank:
    """Outer ranks ``R = (R1..R4)`` and bond dimensions ``D = (D1..D6)``."""

    R: tuple[int, int, int, int]
    D: tuple[int, int, int, int, int, int]

    def __post_init__(self):
        object.__setattr__(self, "R", tuple(int(r) for r in self.R))
        object.__setattr__(self, "D", tuple(int(d) for d in self.D))
        if len(self.R) != 4 or len(self.D) != 6:
            raise RankError(f"TOMD rank needs 4 outer ranks and 6 bonds, got {self}")
        if min(self.R + self.D) < 1:
            raise RankError(f"all TOMD ranks must be >= 1, got {self}")

    @classmethod
    def parse(cls, text: str) -> "TomdRank":
        """Parse ``"R1,R2,R3,R4|D1,...,D6"``; a flat list of ten values also works."""
        try:
            values = [int(v) for v in text.replace("|", ",").split(",") if v.strip()]
        except ValueError as exc:
            raise RankError(f"cannot parse TOMD rank {text!r}") from exc
        if len(values) != 10:
            raise RankError(f"TOMD rank needs 10 integers, got {text!r}")
        return cls(tuple(values[:4]), tuple(values[4:]))

    @classmethod
    def uniform(cls, r: int, d: int | None = None) -> "TomdRank":
        return cls((r,) * 4, ((r if d is None else d),) * 6)

    def dims(self) -> dict[str, int]:
        out = {f"r{i + 1}": r for i, r in enumerate(self.R)}
        out.update({f"d{k + 1}": d for k, d in enumerate(self.D)})
        return out

    def check_shape(self, shape: Sequence[int]) -> None:
        if len(shape) != 4:
            raise ShapeError(f"TOMD needs a 4-way tensor, got shape {tuple(shape)}")
        for n, (r, i) in enumerate(zip(self.R, shape)):
            if r > i:
                raise RankError(f"R{n + 1}={r} exceeds extent I{n + 1}={i}")

    def __str__(self):
        return ",".join(map(str, self.R)) + "|" + ",".join(map(str, self.D))


@dataclass
class AlsConfig:
    iter_max: int = 500
    tol_als: float = 1e-12
    seed: int = 0
    schedule: str = "greedy"

    def __post_init__(self):
        if self.iter_max < 1:
            raise ValidationError("iter_max must be >= 1")
        if not self.tol_als > 0:
            raise ValidationError("tol_als must be positive")


# ---------------------------------------------------------------------------
# generic network machinery


def layout_shapes(layout: Layout, dims: dict[str, int]) -> list[tuple[int, ...]]:
    return [tuple(dims[l] for l in labels) for labels in layout]


def network_contract(
    cores: Sequence[np.ndarray],
    layout: Layout,
    skip: int | None = None,
    schedule: str = "greedy",
) -> np.ndarray:
    """Contract every core except ``skip``.

    Output modes are the bonds of the skipped core (in its axis order)
    followed by the open modes ``r<n>`` of the contracted cores, ascending.
    """
    keep = [k for k in range(len(cores)) if k != skip]
    where: dict[str, list[tuple[int, int]]] = {}
    for pos, k in enumerate(keep):
        for axis, label in enumerate(layout[k]):
            where.setdefault(label, []).append((pos, axis))
    edges, dangling = [], {}
    for label, ends in where.items():
        if len(ends) == 2:
            edges.append((*ends[0], *ends[1]))
        else:
            dangling[label] = ends[0]
    bonds = [l for l in layout[skip] if _mode_of(l) is None] if skip is not None else []
    opens = sorted((l for l in dangling if _mode_of(l) is not None), key=_mode_of)
    net = ContractionNetwork(
        nodes=[cores[k] for k in keep],
        edges=edges,
        open_axes=[dangling[l] for l in bonds + opens],
    )
    return contract(net, schedule=schedule)


def network_full(cores, factors, layout, schedule="greedy") -> np.ndarray:
    core = network_contract(cores, layout, schedule=schedule)
    return multi_mode_product(core, dict(enumerate(factors)))


def mode_matrices(cores, factors, layout, n, schedule="greedy"):
    """Matrices of the unfolding identities for mode ``n``.

    Returns ``(A_n, G_n, A_not_n, k)`` such that::

        unfold(X, n) == U_n @ A_n == U_n @ G_n @ A_not_n

    where ``A_n`` is the mode-``n`` unfolding of the core times every factor
    except ``U_n``, ``k`` is the core carrying mode ``n``, ``G_n`` its
    mode-``r<n>`` unfolding and ``A_not_n`` the split unfolding of the
    remaining network (bond rows, data-mode columns).
    """
    others = {m: U for m, U in enumerate(factors) if m != n}
    core = network_contract(cores, layout, schedule=schedule)
    A_n = mode_n_unfold(multi_mode_product(core, others), n)
    A_rest, k = carrier_matrix(cores, factors, layout, n, schedule)
    G_n = mode_n_unfold(cores[k], layout[k].index(f"r{n + 1}"))
    return A_n, G_n, A_rest, k


def carrier_matrix(cores, factors, layout, n, schedule="greedy"):
    """Split unfolding of the network without the core carrying mode ``n``."""
    k = next(i for i, labels in enumerate(layout) if f"r{n + 1}" in labels)
    nb = len(layout[k]) - 1
    others = [U for m, U in enumerate(factors) if m != n]
    rest = network_contract(cores, layout, skip=k, schedule=schedule)
    rest = multi_mode_product(rest, {nb + j: U for j, U in enumerate(others)})
    return n_unfold(rest, nb), k


def bridge_matrix(cores, factors, layout, k, schedule="greedy") -> np.ndarray:
    """Split unfolding of everything but bridge core ``k``.

    ``vec(X) == vec(cores[k]) @ result`` with column-major vectorization.
    """
    nb = len(layout[k])
    rest = network_contract(cores, layout, skip=k, schedule=schedule)
    rest = multi_mode_product(rest, {nb + m: U for m, U in enumerate(factors)})
    return n_unfold(rest, nb)


def init_network(
    x: np.ndarray,
    layout: Layout,
    dims: dict[str, int],
    seed: int,
    fit_factors: bool = True,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Truncated-SVD factors plus seeded Gaussian cores scaled to ``||x||``."""
    ranks = [dims[f"r{n + 1}"] for n in range(x.ndim)]
    for n, (r, i) in enumerate(zip(ranks, x.shape)):
        if r > i:
            raise RankError(f"R{n + 1}={r} exceeds extent I{n + 1}={i}")
    shapes = layout_shapes(layout, dims)
    if not np.any(x):
        factors = [np.zeros((i, r)) for i, r in zip(x.shape, ranks)]
        if not fit_factors:
            factors = [np.eye(i) for i in x.shape]
        return [np.zeros(s) for s in shapes], factors

    if fit_factors:
        factors = [truncated_svd(mode_n_unfold(x, n), r).U for n, r in enumerate(ranks)]
    else:
        factors = [np.eye(i) for i in x.shape]
    rng = np.random.default_rng(seed)
    cores = [rng.standard_normal(s) for s in shapes]
    approx = np.linalg.norm(network_full(cores, factors, layout))
    if approx > 0:
        scale = (np.linalg.norm(x) / approx) ** (1.0 / len(cores))
        cores = [scale * c for c in cores]
    return cores, factors


@dataclass
class AlsOutcome:
    cores: list[np.ndarray]
    factors: list[np.ndarray]
    trace: list[float]
    converged: bool
    sweeps: int


def network_als(
    x: np.ndarray,
    layout: Layout,
    cores: list[np.ndarray],
    factors: list[np.ndarray],
    cfg: AlsConfig,
    fit_factors: bool = True,
    callback: Callable[[str, list, list], None] | None = None,
) -> AlsOutcome:
    """Block coordinate descent over the factors and cores of a layout.

    One sweep updates ``U1..U4`` (if ``fit_factors``), then every core that
    carries an open mode in mode order, then the bridge cores.  Each block
    is an exact (minimum-norm) least-squares solve.  ``callback(block,
    cores, factors)`` runs after every block update.
    """
    x = np.asarray(x, dtype=np.float64)
    cores = [np.array(c, dtype=np.float64) for c in cores]
    factors = [np.array(U, dtype=np.float64) for U in factors]
    norm_x = np.linalg.norm(x)
    if norm_x == 0:
        cores = [np.zeros_like(c) for c in cores]
        if fit_factors:
            factors = [np.zeros_like(U) for U in factors]
        return AlsOutcome(cores, factors, [0.0], True, 0)

    sch = cfg.schedule
    unfolded = [mode_n_unfold(x, n) for n in range(x.ndim)]
    x_row = np.ravel(x, order="F")
    carriers = sorted(
        (_mode_of(l), k) for k, labels in enumerate(layout) for l in labels if _mode_of(l) is not None
    )
    bridges = [k for k, labels in enumerate(layout) if all(_mode_of(l) is None for l in labels)]
    notify = callback or (lambda *a: None)

    current = network_full(cores, factors, layout, sch)
    trace: list[float] = []
    converged = False
    sweep = 0
    for sweep in range(1, cfg.iter_max + 1):
        last = current
        if fit_factors:
            for n in range(x.ndim):
                others = {m: U for m, U in enumerate(factors) if m != n}
                core = network_contract(cores, layout, schedule=sch)
                A_n = mode_n_unfold(multi_mode_product(core, others), n)
                factors[n] = least_squares(A_n.T, unfolded[n].T).T
                notify(f"U{n + 1}", cores, factors)
        for n, k in carriers:
            A_rest, _ = carrier_matrix(cores, factors, layout, n, sch)
            left = least_squares(factors[n], unfolded[n])
            G = least_squares(A_rest.T, left.T).T
            cores[k] = mode_n_fold(G, layout[k].index(f"r{n + 1}"), cores[k].shape)
            notify(f"G{k + 1}", cores, factors)
        for k in bridges:
            B = bridge_matrix(cores, factors, layout, k, sch)
            g = least_squares(B.T, x_row)
            cores[k] = np.reshape(g, cores[k].shape, order="F")
            notify(f"G{k + 1}", cores, factors)

        current = network_full(cores, factors, layout, sch)
        trace.append(float(np.linalg.norm(x - current) / norm_x))
        last_norm = np.linalg.norm(last)
        change = np.linalg.norm(last - current)
        f1 = change / last_norm if last_norm > 0 else (0.0 if change == 0 else np.inf)
        if f1 <= cfg.tol_als:
            converged = True
            break
    log.debug("ALS stopped after %d sweeps, rse=%.3e", sweep, trace[-1])
    return AlsOutcome(cores, factors, trace, converged, sweep)


# ---------------------------------------------------------------------------
# TOMD proper


@dataclass
class TomdFactors:
    """The nine TOMD factors: cores ``G1..G5`` and factor matrices ``U1..U4``."""

    cores: list[np.ndarray]
    factors: list[np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.cores) != 5 or len(self.factors) != 4:
            raise ShapeError("TOMD needs five cores and four factor matrices")
        dims: dict[str, int] = {}
        for core, labels in zip(self.cores, TOMD_LAYOUT):
            if np.ndim(core) != len(labels):
                raise ShapeError(f"core with labels {labels} has shape {np.shape(core)}")
            for label, s in zip(labels, np.shape(core)):
                if dims.setdefault(label, s) != s:
                    raise ShapeError(f"inconsistent extent for index {label}")
        for n, U in enumerate(self.factors):
            if np.ndim(U) != 2 or np.shape(U)[1] != dims[f"r{n + 1}"]:
                raise ShapeError(f"U{n + 1} of shape {np.shape(U)} does not match R{n + 1}")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(U.shape[0] for U in self.factors)

    @property
    def rank(self) -> TomdRank:
        G1, G2, G3, G4, _ = self.cores
        R = tuple(U.shape[1] for U in self.factors)
        D = (G1.shape[2], G2.shape[2], G3.shape[2], G4.shape[2], G1.shape[3], G3.shape[3])
        return TomdRank(R, D)

    @property
    def size(self) -> int:
        return sum(a.size for a in self.cores + self.factors)

    def full(self, schedule: str = "greedy") -> np.ndarray:
        return tomd_reconstruct(self, schedule)

    def save(self, directory, **header) -> None:
        arrays = {f"G{k + 1}": c for k, c in enumerate(self.cores)}
        arrays.update({f"U{n + 1}": U for n, U in enumerate(self.factors)})
        header = dict(self.meta, **header)
        header.update(format="tomd", shape=list(self.shape), rank=str(self.rank))
        save_bundle(directory, arrays, header)

    @classmethod
    def load(cls, directory) -> "TomdFactors":
        arrays, header = load_bundle(directory)
        rank = TomdRank.parse(header["rank"])
        dims = rank.dims()
        cores = [
            np.ascontiguousarray(np.reshape(arrays[f"G{k + 1}"], s, order="F"))
            for k, s in enumerate(layout_shapes(TOMD_LAYOUT, dims))
        ]
        factors = [
            np.ascontiguousarray(np.reshape(arrays[f"U{n + 1}"], (i, r), order="F"))
            for n, (i, r) in enumerate(zip(header["shape"], rank.R))
        ]
        return cls(cores, factors, meta={k: v for k, v in header.items() if k != "arrays"})


def tomd_core(f: TomdFactors, schedule: str = "greedy") -> np.ndarray:
    """Contract ``G1..G5`` over the six bonds into the ``R1 x R2 x R3 x R4`` core."""
    return network_contract(f.cores, TOMD_LAYOUT, schedule=schedule)


def tomd_reconstruct(f: TomdFactors, schedule: str = "greedy") -> np.ndarray:
    return multi_mode_product(tomd_core(f, schedule), dict(enumerate(f.factors)))


def storage_cost(shape: Sequence[int], rank: TomdRank) -> int:
    """Number of scalars stored by a TOMD of the given shape and rank."""
    R1, R2, R3, R4 = rank.R
    D1, D2, D3, D4, D5, D6 = rank.D
    outer = sum(i * r for i, r in zip(shape, rank.R))
    return outer + D4 * R1 * D1 * D5 + D1 * R2 * D2 + D2 * R3 * D3 * D6 + D3 * R4 * D4 + D5 * D6


def random_tomd(shape: Sequence[int], rank: TomdRank, seed=None) -> TomdFactors:
    """Gaussian random factors; handy for building exactly representable data."""
    rng = np.random.default_rng(seed)
    dims = rank.dims()
    cores = [rng.standard_normal(s) for s in layout_shapes(TOMD_LAYOUT, dims)]
    factors = [rng.standard_normal((i, r)) for i, r in zip(shape, rank.R)]
    return TomdFactors(cores, factors)


def tomd_init(x: np.ndarray, rank: TomdRank, seed: int = 0) -> TomdFactors:
    """SVD-initialized factor matrices and seeded random cores.

    The cores are rescaled so that the initial reconstruction has the same
    Frobenius norm as ``x``.  A zero tensor gives all-zero factors.
    """
    x = np.asarray(x, dtype=np.float64)
    rank.check_shape(x.shape)
    cores, factors = init_network(x, TOMD_LAYOUT, rank.dims(), seed)
    return TomdFactors(cores, factors)


def tomd_mode_matrices(f: TomdFactors, n: int, schedule: str = "greedy"):
    """``(U_n, A_n, G_n, A_not_n)`` with ``X_(n) = U_n A_n = U_n G_n A_not_n``."""
    A_n, G_n, A_rest, _ = mode_matrices(f.cores, f.factors, TOMD_LAYOUT, n, schedule)
    return f.factors[n], A_n, G_n, A_rest


def tomd_bridge_matrix(f: TomdFactors, schedule: str = "greedy") -> np.ndarray:
    """Matrix ``B`` with ``vec(X) = vec(G5) @ B`` (column-major vectorization)."""
    return bridge_matrix(f.cores, f.factors, TOMD_LAYOUT, 4, schedule)


def tomd_als(
    x: np.ndarray,
    rank: TomdRank,
    cfg: AlsConfig | None = None,
    init: TomdFactors | None = None,
    callback=None,
) -> tuple[TomdFactors, list[float]]:
    """Fit a TOMD to ``x`` by alternating least squares.

    Returns the fitted factors and the relative error after every sweep.
    ``init`` overrides the SVD/random initialization (warm start).
    """
    cfg = cfg or AlsConfig()
    x = np.asarray(x, dtype=np.float64)
    rank.check_shape(x.shape)
    if init is None:
        init = tomd_init(x, rank, cfg.seed)
    elif init.rank != rank or init.shape != x.shape:
        raise RankError(f"warm start has rank {init.rank}/shape {init.shape}")
    out = network_als(x, TOMD_LAYOUT, init.cores, init.factors, cfg, callback=callback)
    meta = {"seed": cfg.seed, "sweeps": out.sweeps, "converged": out.converged,
            "final_rse": out.trace[-1]}
    return TomdFactors(out.cores, out.factors, meta=meta), out.trace
