"""Dataset ingestion, experiment runners and report files.

Every runner returns a plain ``dict`` report that is a deterministic function
of its inputs and seeds.  Wall-clock timings are the one exception, so they
are only recorded when ``timing=True``.
"""
from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Sequence

import numpy as np

from .baselines import BaselineRank, ominus_als, storage_cost as baseline_cost, tucker_als, tutr_als
from .cluster import spectral_clustering
from .exceptions import IngestionError, ShapeError, ValidationError
from .metrics import METRIC_NAMES, evaluate
from .mvc import (
    AdmmConfig,
    MultiViewDataset,
    admm_solve,
    affinity_from_z,
)
from .tensor_core import read_tensor, reshape_phi
from .tomd import AlsConfig, TomdRank, storage_cost as tomd_cost, tomd_als

SCHEMA_VERSION = 1
METHODS = ("tucker", "tutr", "ominus", "tomd")

# (K, mu) per dataset; the TOMD rank defaults to (30, 15, 11, V | 4 x 6)
PRESETS = {
    "yale": (10, 1.0),
    "msrcv1": (5, 50.0),
    "extendyaleb": (15, 50.0),
    "orl": (10, 30.0),
    "reuters": (20, 50.0),
    "handwritten": (20, 40.0),
}


def preset_config(name: str, n_views: int, **overrides) -> AdmmConfig:
    try:
        K, mu = PRESETS[name.lower()]
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    params = dict(K=K, mu=mu, rank=TomdRank((30, 15, 11, n_views), (4,) * 6))
    params.update(overrides)
    return AdmmConfig(**params)


@dataclass
class ExperimentConfig:
    admm: AdmmConfig = field(default_factory=AdmmConfig)
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    report_path: str | None = None

    def __post_init__(self):
        if isinstance(self.admm, dict):
            self.admm = AdmmConfig(**self.admm)
        self.seeds = [int(s) for s in self.seeds]
        if not self.seeds:
            raise ValidationError("at least one seed is required")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        data = _read_json(path)
        if not isinstance(data, dict):
            raise ValidationError(f"{path}: experiment config must be a JSON object")
        unknown = set(data) - {"admm", "seeds", "report_path"}
        if unknown:
            raise ValidationError(f"{path}: unknown keys {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ValidationError(f"{path}: {exc}") from exc


def _read_json(path):
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"{path}: file not found")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{path}: invalid JSON ({exc})") from exc


def read_matrix_csv(path) -> np.ndarray:
    """Read a numeric CSV; errors name the file and the 1-based row."""
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"{path}: file not found")
    rows = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                bad = next(c for c in row if not _is_number(c))
                raise IngestionError(f"{path}: row {lineno}: non-numeric cell {bad!r}") from None
            if len(rows[-1]) != len(rows[0]):
                raise IngestionError(
                    f"{path}: row {lineno} has {len(rows[-1])} cells, expected {len(rows[0])}"
                )
    if not rows:
        raise IngestionError(f"{path}: no data")
    return np.array(rows)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def read_labels(path) -> np.ndarray:
    values = read_matrix_csv(path).ravel()
    if not np.all(values == np.round(values)):
        raise IngestionError(f"{path}: labels must be integers")
    return values.astype(np.int64)


def ingest_dataset(manifest_path) -> MultiViewDataset:
    """Load a dataset manifest (JSON) and the CSV files it points to.

    Paths in the manifest are relative to the manifest's directory.  Each view
    CSV holds a ``C_v x N`` matrix (features by samples).
    """
    manifest_path = Path(manifest_path)
    m = _read_json(manifest_path)
    base = manifest_path.parent
    if not isinstance(m, dict) or not m.get("views"):
        raise IngestionError(f"{manifest_path}: manifest needs a non-empty 'views' list")

    views = []
    for v, spec in enumerate(m["views"]):
        spec = {"path": spec} if isinstance(spec, str) else spec
        if "path" not in spec:
            raise IngestionError(f"{manifest_path}: view {v} has no 'path'")
        X = read_matrix_csv(base / spec["path"])
        features = spec.get("features")
        if features is not None and X.shape[0] != int(features):
            raise ShapeError(
                f"view {v} ({spec['path']}): {X.shape[0]} rows, manifest declares {features}"
            )
        if "N" in m and X.shape[1] != int(m["N"]):
            raise ShapeError(f"view {v} ({spec['path']}): {X.shape[1]} columns, N={m['N']}")
        if views and X.shape[1] != views[0].shape[1]:
            raise ShapeError(
                f"view {v} ({spec['path']}) has N={X.shape[1]}, view 0 has N={views[0].shape[1]}"
            )
        if m.get("normalize", False):
            norms = np.linalg.norm(X, axis=0)
            X = np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)
        views.append(X)

    labels = None
    if m.get("labels_path"):
        labels = read_labels(base / m["labels_path"])
        if labels.size != views[0].shape[1]:
            raise ShapeError(
                f"{m['labels_path']}: {labels.size} labels for N={views[0].shape[1]} samples"
            )
    if "V" in m and int(m["V"]) != len(views):
        raise ShapeError(f"manifest declares V={m['V']} but lists {len(views)} views")
    return MultiViewDataset(
        views,
        labels=labels,
        reshape_dims=m.get("reshape_dims"),
        name=m.get("name", manifest_path.stem),
        k=m.get("k"),
    )


def write_manifest(directory, dataset: MultiViewDataset) -> Path:
    """Write ``dataset`` as CSV files plus a manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    views = []
    for v, X in enumerate(dataset.views):
        name = f"view{v + 1}.csv"
        np.savetxt(directory / name, X, delimiter=",", fmt="%.17g")
        views.append({"path": name, "features": int(X.shape[0])})
    manifest = {
        "name": dataset.name,
        "views": views,
        "N": dataset.n_samples,
        "V": dataset.n_views,
        "reshape_dims": list(dataset.reshape_dims),
    }
    if dataset.labels is not None:
        np.savetxt(directory / "labels.csv", dataset.labels, fmt="%d")
        manifest["labels_path"] = "labels.csv"
    if dataset.k is not None:
        manifest["k"] = int(dataset.k)
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def fit_method(method: str, x: np.ndarray, rank_text: str, cfg: AlsConfig):
    if method == "tomd":
        rank = TomdRank.parse(rank_text)
        rank.check_shape(x.shape)
        f, trace = tomd_als(x, rank, cfg)
        return f, trace, tomd_cost(x.shape, rank), str(rank)
    rank = BaselineRank.parse(method, rank_text)
    fit = {"tucker": tucker_als, "tutr": tutr_als, "ominus": ominus_als}[method]
    d, trace = fit(x, rank, cfg)
    return d, trace, baseline_cost(x.shape, rank), str(rank)


def run_reconstruction_bench(
    tensor,
    methods: Sequence[str],
    ranks: dict[str, str],
    cfg: AlsConfig | None = None,
    rse_target: float | None = None,
    reshape_dims: Sequence[int] | None = None,
    timing: bool = True,
) -> dict:
    """Fit each method at its rank and tabulate error and storage.

    ``tensor`` is an array or a path in the plain-text tensor format;
    ``reshape_dims`` relabels it (column-major) before fitting, e.g. an image
    of 256 x 256 pixels as 16 x 16 x 16 x 16.
    """
    cfg = cfg or AlsConfig()
    x = read_tensor(tensor) if isinstance(tensor, (str, Path)) else np.asarray(tensor, float)
    if reshape_dims is not None:
        x = reshape_phi(x, reshape_dims)
    if x.ndim != 4:
        raise ShapeError(f"benchmark needs a 4-way tensor, got shape {x.shape}")
    rows = []
    for method in methods:
        if method not in METHODS:
            raise ValidationError(f"unknown method {method!r}; choose from {METHODS}")
        if method not in ranks:
            raise ValidationError(f"no rank given for {method}")
        start = time.perf_counter()
        _, trace, cost, rank = fit_method(method, x, ranks[method], cfg)
        row = {
            "method": method,
            "rank": rank,
            "rse": float(trace[-1]),
            "sweeps": len(trace),
            "storage_cost": int(cost),
            "compression_ratio": float(x.size / cost),
        }
        if rse_target is not None:
            row["meets_target"] = bool(trace[-1] <= rse_target)
        if timing:
            row["seconds"] = time.perf_counter() - start
        rows.append(row)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "reconstruction-bench",
        "shape": list(x.shape),
        "als": {"iter_max": cfg.iter_max, "tol_als": cfg.tol_als, "seed": cfg.seed},
        "rse_target": rse_target,
        "rows": rows,
    }


def _cluster_once(args):
    affinity, k, seed, labels = args
    assignment = spectral_clustering(affinity, k, seed=seed)
    run = {"seed": seed, "labels": assignment.labels.tolist(), "inertia": assignment.inertia}
    if labels is not None:
        run["metrics"] = evaluate(assignment.labels, labels).as_dict()
    return run


def _pool_map(fn, items, workers: int):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def run_cluster(
    dataset: MultiViewDataset,
    cfg: AdmmConfig,
    seeds: Sequence[int] = tuple(range(10)),
    k: int | None = None,
    timing: bool = True,
    include_affinity: bool = True,
    workers: int = 1,
) -> dict:
    """Solve the ADMM model once, then spectral-cluster the affinity per seed.

    The solver itself is deterministic, so seeds only vary the k-means starts.
    Metrics appear when the dataset carries labels.
    """
    k = k if k is not None else dataset.k
    if k is None:
        raise ValidationError("cluster count k is required when the dataset has no labels")
    if not seeds:
        raise ValidationError("at least one seed is required")
    start = time.perf_counter()
    state, trace = admm_solve(dataset, cfg)
    affinity = affinity_from_z(state.Z)
    runs = _pool_map(
        _cluster_once, [(affinity, k, int(s), dataset.labels) for s in seeds], workers
    )
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "cluster",
        "dataset": {
            "name": dataset.name,
            "N": dataset.n_samples,
            "V": dataset.n_views,
            "reshape_dims": list(dataset.reshape_dims),
            "k": int(k),
        },
        "config": cfg.to_dict(),
        "seeds": [int(s) for s in seeds],
        "admm": {
            "iterations": state.iter,
            "converged": state.converged,
            "final_residuals": {"reconstruction": state.residuals[0], "match": state.residuals[1]},
            "final_tau": state.tau,
            "trace": trace,
        },
        "runs": runs,
    }
    if dataset.labels is not None:
        report["summary"] = summarize([r["metrics"] for r in runs])
    if include_affinity:
        report["affinity"] = affinity.tolist()
    if timing:
        report["seconds"] = time.perf_counter() - start
    return report


def summarize(metric_rows: list[dict]) -> dict:
    """Mean and (population) standard deviation of each metric over runs."""
    out = {}
    for name in METRIC_NAMES:
        values = np.array([row[name] for row in metric_rows])
        out[name] = {"mean": float(values.mean()), "std": float(values.std())}
    return out


def _sweep_point(args):
    dataset, cfg, seeds = args
    report = run_cluster(dataset, cfg, seeds, timing=False, include_affinity=False)
    return report


def run_param_sweep(
    dataset: MultiViewDataset,
    base: AdmmConfig,
    mus: Sequence[float],
    Ks: Sequence[int],
    ranks: Sequence[str | TomdRank] | None = None,
    seeds: Sequence[int] = tuple(range(10)),
    workers: int = 1,
    timing: bool = True,
) -> dict:
    """Clustering quality over the grid ``mus x Ks x ranks``.

    ``rows`` has one entry per grid point in grid order; ``surface`` gives
    the mean ACC and NMI as ``mu x K`` tables for each rank.
    """
    ranks = [base.rank] if not ranks else [
        TomdRank.parse(r) if isinstance(r, str) else r for r in ranks
    ]
    if not mus or not Ks:
        raise ValidationError("sweep grid must be nonempty")
    if dataset.labels is None:
        raise ValidationError("a parameter sweep needs ground-truth labels")
    grid = list(product(ranks, mus, Ks))
    configs = []
    for rank, mu, K in grid:
        params = base.to_dict()
        params.update(rank=str(rank), mu=float(mu), K=int(K))
        configs.append(AdmmConfig(**params))
    start = time.perf_counter()
    reports = _pool_map(_sweep_point, [(dataset, c, list(seeds)) for c in configs], workers)

    rows = []
    for (rank, mu, K), rep in zip(grid, reports):
        row = {"rank": str(rank), "mu": float(mu), "K": int(K)}
        for name in METRIC_NAMES:
            row[f"{name}_mean"] = rep["summary"][name]["mean"]
            row[f"{name}_std"] = rep["summary"][name]["std"]
        row["iterations"] = rep["admm"]["iterations"]
        row["converged"] = rep["admm"]["converged"]
        rows.append(row)
    best = max(range(len(rows)), key=lambda i: (rows[i]["acc_mean"], -i))
    surface = []
    for rank in ranks:
        cells = {(r["mu"], r["K"]): r for r in rows if r["rank"] == str(rank)}
        surface.append({
            "rank": str(rank),
            "mu": [float(m) for m in mus],
            "K": [int(k) for k in Ks],
            "acc": [[cells[(float(m), int(k))]["acc_mean"] for k in Ks] for m in mus],
            "nmi": [[cells[(float(m), int(k))]["nmi_mean"] for k in Ks] for m in mus],
        })
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "sweep",
        "dataset": {"name": dataset.name, "N": dataset.n_samples, "V": dataset.n_views},
        "base_config": base.to_dict(),
        "seeds": [int(s) for s in seeds],
        "rows": rows,
        "best": best,
        "surface": surface,
    }
    if timing:
        report["seconds"] = time.perf_counter() - start
    return report


def report_table(report: dict) -> list[dict]:
    """Flat rows for the CSV form of a report."""
    if report["kind"] in ("reconstruction-bench", "sweep"):
        return report["rows"]
    if report["kind"] == "cluster":
        rows = []
        for run in report["runs"]:
            row = {"seed": run["seed"], "inertia": run["inertia"]}
            row.update(run.get("metrics", {}))
            rows.append(row)
        return rows
    raise ValidationError(f"no table form for report kind {report['kind']!r}")


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def table_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        fields = list(dict.fromkeys(k for row in rows for k in row))
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def write_report(report: dict, path, csv_path=None) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(dumps_report(report))
    if csv_path is not None:
        Path(csv_path).parent.mkdir(parents=True, exist_ok=True)
        Path(csv_path).write_text(table_csv(report_table(report)))


__all__ = [
    "SCHEMA_VERSION",
    "METHODS",
    "PRESETS",
    "preset_config",
    "ExperimentConfig",
    "read_matrix_csv",
    "read_labels",
    "ingest_dataset",
    "fit_method",
    "write_manifest",
    "run_reconstruction_bench",
    "run_cluster",
    "run_param_sweep",
    "summarize",
    "report_table",
    "dumps_report",
    "table_csv",
    "write_report",
]
