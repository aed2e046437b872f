"""Dense tensor primitives: unfoldings, mode products, network contraction.

Tensors are plain ``numpy.ndarray`` objects of dtype float64.  Every place a
tensor is linearized (unfoldings, reshapes, the text format) uses the
first-index-fastest (column-major, ``order="F"``) convention.  Mode indexes
are zero-based, as in numpy.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import prod
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import (
    DegenerateReferenceError,
    ModeIndexError,
    NetworkError,
    ShapeError,
)

__all__ = [
    "as_tensor",
    "mode_n_unfold",
    "mode_n_fold",
    "n_unfold",
    "mode_n_product",
    "multi_mode_product",
    "ContractionNetwork",
    "contract",
    "reshape_phi",
    "rse",
    "read_tensor",
    "write_tensor",
]


def as_tensor(data, shape: Sequence[int] | None = None) -> np.ndarray:
    """Return ``data`` as a float64 array, optionally from a column-major buffer."""
    arr = np.asarray(data, dtype=np.float64)
    if shape is not None:
        shape = tuple(int(s) for s in shape)
        if any(s < 1 for s in shape):
            raise ShapeError(f"extents must be >= 1, got {shape}")
        if arr.size != prod(shape):
            raise ShapeError(f"buffer of length {arr.size} does not fit shape {shape}")
        arr = arr.reshape(shape, order="F")
    return arr


def _check_mode(ndim: int, n: int) -> int:
    if not 0 <= n < ndim:
        raise ModeIndexError(f"mode {n} out of range for a {ndim}-way tensor")
    return n


def mode_n_unfold(t: np.ndarray, n: int) -> np.ndarray:
    """Mode-``n`` matricization, shape ``(I_n, prod_{m != n} I_m)``.

    Columns run over the remaining modes in increasing order with the lowest
    mode varying fastest (Kolda & Bader).
    """
    t = np.asarray(t, dtype=np.float64)
    _check_mode(t.ndim, n)
    return np.reshape(np.moveaxis(t, n, 0), (t.shape[n], -1), order="F")


def mode_n_fold(m: np.ndarray, n: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`mode_n_unfold`."""
    m = np.asarray(m, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    _check_mode(len(shape), n)
    rest = [s for i, s in enumerate(shape) if i != n]
    if m.ndim != 2 or m.shape != (shape[n], prod(rest)):
        raise ShapeError(
            f"matrix of shape {m.shape} cannot be folded along mode {n} into {shape}"
        )
    t = np.reshape(m, [shape[n]] + rest, order="F")
    return np.moveaxis(t, 0, n)


def n_unfold(t: np.ndarray, n: int) -> np.ndarray:
    """Split-point unfolding: rows index modes ``0..n-1``, columns the rest."""
    t = np.asarray(t, dtype=np.float64)
    if not 1 <= n < t.ndim:
        raise ModeIndexError(f"split point {n} out of range for a {t.ndim}-way tensor")
    return np.reshape(t, (prod(t.shape[:n]), -1), order="F")


def mode_n_product(t: np.ndarray, m: np.ndarray, n: int) -> np.ndarray:
    """Multiply tensor ``t`` by matrix ``m`` (``J x I_n``) along mode ``n``."""
    t = np.asarray(t, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    _check_mode(t.ndim, n)
    if m.ndim != 2 or m.shape[1] != t.shape[n]:
        raise ShapeError(
            f"matrix of shape {m.shape} cannot multiply mode {n} of extent {t.shape[n]}"
        )
    out = np.tensordot(m, t, axes=(1, n))
    return np.moveaxis(out, 0, n)


def multi_mode_product(t: np.ndarray, matrices: dict[int, np.ndarray]) -> np.ndarray:
    """Apply several mode products; ``matrices`` maps mode -> matrix."""
    for n, m in sorted(matrices.items()):
        t = mode_n_product(t, m, n)
    return t


@dataclass
class ContractionNetwork:
    """A set of tensors joined by shared axes.

    ``edges`` holds ``(node_a, axis_a, node_b, axis_b)`` tuples; ``open_axes``
    lists the ``(node, axis)`` pairs that survive, in output order.
    """

    nodes: list
    edges: list = field(default_factory=list)
    open_axes: list = field(default_factory=list)

    def validate(self) -> None:
        seen: dict[tuple[int, int], str] = {}

        def claim(node: int, axis: int, what: str) -> None:
            if not 0 <= node < len(self.nodes):
                raise NetworkError(f"{what} refers to missing node {node}")
            if not 0 <= axis < np.ndim(self.nodes[node]):
                raise NetworkError(f"{what} refers to missing axis {axis} of node {node}")
            if (node, axis) in seen:
                raise NetworkError(f"axis {axis} of node {node} used twice")
            seen[(node, axis)] = what

        for a, ia, b, ib in self.edges:
            claim(a, ia, "edge")
            claim(b, ib, "edge")
            if np.shape(self.nodes[a])[ia] != np.shape(self.nodes[b])[ib]:
                raise ShapeError(
                    f"edge ({a},{ia})-({b},{ib}) joins extents "
                    f"{np.shape(self.nodes[a])[ia]} and {np.shape(self.nodes[b])[ib]}"
                )
        for node, axis in self.open_axes:
            claim(node, axis, "open axis")
        for node, t in enumerate(self.nodes):
            for axis in range(np.ndim(t)):
                if (node, axis) not in seen:
                    raise NetworkError(f"axis {axis} of node {node} is dangling")


def _trace_self_edges(t: np.ndarray, labels: list[int]) -> tuple[np.ndarray, list[int]]:
    # a label that appears twice on one operand is a self-loop
    repeated = {l for l in labels if labels.count(l) > 1}
    if not repeated:
        return t, labels
    out = [l for l in labels if l not in repeated]
    remap = {l: i for i, l in enumerate(dict.fromkeys(labels))}
    t = np.einsum(t, [remap[l] for l in labels], [remap[l] for l in out])
    return t, out


def _pair(a, la, b, lb):
    shared = [l for l in la if l in lb]
    axes_a = [la.index(l) for l in shared]
    axes_b = [lb.index(l) for l in shared]
    out = np.tensordot(a, b, axes=(axes_a, axes_b))
    labels = [l for l in la if l not in shared] + [l for l in lb if l not in shared]
    return out, labels


def _plan(shapes, edges, open_axes, schedule):
    """Labels per node and the sequence of pairwise merges."""
    labels = [[None] * len(shape) for shape in shapes]
    next_label = 0
    for a, ia, b, ib in edges:
        labels[a][ia] = labels[b][ib] = next_label
        next_label += 1
    open_labels = []
    for node, axis in open_axes:
        labels[node][axis] = next_label
        open_labels.append(next_label)
        next_label += 1

    extent = {}
    for ls, shape in zip(labels, shapes):
        extent.update(zip(ls, shape))
    ops = [[l for l in ls if ls.count(l) == 1] for ls in labels]
    steps = []
    while len(ops) > 1:
        if schedule == "sequential":
            i, j = 0, 1
        else:
            best = None
            for i_, j_ in combinations(range(len(ops)), 2):
                la, lb = ops[i_], ops[j_]
                connected = any(l in lb for l in la)
                size = prod(extent[l] for l in set(la) ^ set(lb))
                key = (not connected, size, i_, j_)
                if best is None or key < best:
                    best = key
            i, j = best[2], best[3]
        steps.append((i, j))
        la, lb = ops[i], ops[j]
        merged = [l for l in la if l not in lb] + [l for l in lb if l not in la]
        ops = [op for k, op in enumerate(ops) if k not in (i, j)]
        ops.insert(min(i, j), merged)
    return labels, open_labels, steps


_PLANS: dict = {}


def contract(net: ContractionNetwork, schedule: str = "greedy") -> np.ndarray:
    """Sum over all shared indexes of the product of the node tensors.

    ``schedule`` selects the pairwise contraction order: ``"greedy"`` always
    merges the connected pair whose result is smallest, ``"sequential"``
    folds the nodes in list order.  The value does not depend on the choice.
    """
    if schedule not in ("greedy", "sequential"):
        raise ValueError(f"unknown contraction schedule {schedule!r}")
    shapes = tuple(np.shape(t) for t in net.nodes)
    key = (shapes, tuple(map(tuple, net.edges)), tuple(map(tuple, net.open_axes)), schedule)
    plan = _PLANS.get(key)
    if plan is None:
        net.validate()
        plan = _PLANS[key] = _plan(shapes, net.edges, net.open_axes, schedule)
    labels, open_labels, steps = plan

    ops = [
        _trace_self_edges(np.asarray(t, dtype=np.float64), list(ls))
        for t, ls in zip(net.nodes, labels)
    ]
    for i, j in steps:
        merged = _pair(*ops[i], *ops[j])
        ops = [op for k, op in enumerate(ops) if k not in (i, j)]
        ops.insert(min(i, j), merged)

    t, ls = ops[0]
    return np.transpose(t, [ls.index(l) for l in open_labels]) if ls else t


def reshape_phi(t: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    """Relabel the column-major buffer of ``t`` with new extents."""
    t = np.asarray(t, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    if prod(shape) != t.size:
        raise ShapeError(f"cannot reshape {t.size} elements into {shape}")
    return np.reshape(t, shape, order="F")


def rse(approx: np.ndarray, ref: np.ndarray) -> float:
    """Relative error ``||approx - ref||_F / ||ref||_F``."""
    approx = np.asarray(approx, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if approx.shape != ref.shape:
        raise ShapeError(f"shape mismatch {approx.shape} vs {ref.shape}")
    denom = np.linalg.norm(ref)
    if denom == 0:
        raise DegenerateReferenceError("reference tensor has zero norm")
    return float(np.linalg.norm(approx - ref) / denom)


def write_tensor(path, t: np.ndarray) -> None:
    """Write the plain-text tensor format (extents line, then one value per line)."""
    t = np.asarray(t, dtype=np.float64)
    shape = t.shape if t.ndim else (1,)
    lines = [" ".join(str(s) for s in shape)]
    lines.extend(repr(float(v)) for v in np.ravel(t, order="F"))
    Path(path).write_text("\n".join(lines) + "\n")


def read_tensor(path) -> np.ndarray:
    text = Path(path).read_text().split("\n")
    try:
        shape = tuple(int(s) for s in text[0].split())
    except ValueError as exc:
        raise ShapeError(f"{path}: line 1 must hold integer extents") from exc
    if not shape:
        raise ShapeError(f"{path}: missing extents line")
    values = []
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise ShapeError(f"{path}: line {lineno} is not a number: {line!r}") from exc
    return as_tensor(values, shape)
