"""Shared builders for the test suite."""
import numpy as np

from tomdmvc.mvc import graph_laplacian


def random_network(rng, max_nodes=5, max_extent=3, max_labels=8):
    """Random tensor network: nodes, edges (self-loops included) and open axes."""
    while True:
        n_nodes = int(rng.integers(1, max_nodes + 1))
        ndims = [int(rng.integers(0, 4)) for _ in range(n_nodes)]
        slots = [(a, i) for a, d in enumerate(ndims) for i in range(d)]
        rng.shuffle(slots)
        n_edges = int(rng.integers(0, len(slots) // 2 + 1))
        edges = [(*slots[2 * k], *slots[2 * k + 1]) for k in range(n_edges)]
        open_axes = [tuple(s) for s in slots[2 * n_edges:]]
        if n_edges + len(open_axes) <= max_labels:
            break
    extent = {}
    for a, ia, b, ib in edges:
        extent[(a, ia)] = extent[(b, ib)] = int(rng.integers(1, max_extent + 1))
    for s in open_axes:
        extent[s] = int(rng.integers(1, max_extent + 1))
    nodes = [
        rng.standard_normal([extent[(a, i)] for i in range(d)]) for a, d in enumerate(ndims)
    ]
    edges = [tuple(int(v) for v in e) for e in edges]
    open_axes = [tuple(int(v) for v in s) for s in open_axes]
    return nodes, edges, open_axes


def s_objective(S, state, dataset, mu):
    """The part of the augmented Lagrangian that depends on ``S``."""
    L = graph_laplacian(state.M)
    tau, total, start = state.tau, 0.0, 0
    for v, X in enumerate(dataset.views):
        rows = slice(start, start + X.shape[0])
        start += X.shape[0]
        S_v = S[:, :, v]
        fit = X - X @ S_v - state.E[rows] + state.W[rows] / tau
        match = state.Z[:, :, v] - S_v + state.Y[:, :, v] / tau
        total += mu * np.trace(S_v.T @ L @ S_v)
        total += tau / 2 * np.sum(fit**2) + tau / 2 * np.sum(match**2)
    return total


def numeric_gradient(f, x, h=1e-3):
    """Central differences; exact up to rounding for quadratics."""
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        step = np.zeros_like(x)
        step[idx] = h
        g[idx] = (f(x + step) - f(x - step)) / (2 * h)
    return g
