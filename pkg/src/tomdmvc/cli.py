"""Command-line entry point: ``tomdmvc <command> ...``.

Exit status is 0 on success, 2 for invalid input and 3 for numerical failure.
A ``--config`` JSON file overrides the corresponding flags.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .bundle import save_bundle
from .exceptions import NumericalError, ValidationError
from .experiments import (
    METHODS,
    PRESETS,
    SCHEMA_VERSION,
    dumps_report,
    fit_method,
    ingest_dataset,
    preset_config,
    read_labels,
    report_table,
    run_cluster,
    run_param_sweep,
    run_reconstruction_bench,
    table_csv,
    write_manifest,
    write_report,
)
from .metrics import evaluate, nmi
from .mvc import AdmmConfig, MultiViewDataset, near_cubic_factorization, sample_split_factorization
from .synthetic import union_of_subspaces
from .tensor_core import read_tensor, reshape_phi
from .tomd import AlsConfig, TomdFactors

log = logging.getLogger("tomdmvc")

ADMM_FLAGS = ("mu", "K", "rank", "tau0", "beta", "tau_max", "tol", "iter_max", "include_self")


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.replace("x", ",").split(",") if v.strip()]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _seeds(text: str) -> list[int]:
    """``"0-9"`` or ``"1,4,7"``."""
    if "-" in text.strip("-"):
        lo, hi = text.split("-")
        return list(range(int(lo), int(hi) + 1))
    return _ints(text)


def _apply_config(args: argparse.Namespace) -> None:
    """Overwrite flag values with those in the ``--config`` JSON file."""
    if not getattr(args, "config", None):
        return
    path = Path(args.config)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: cannot read config ({exc})") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    flat = dict(data)
    admm = flat.pop("admm", {}) or {}
    als = dict(admm.pop("als", {}) or {})
    flat.update(admm)
    if "iter_max" in als:
        flat["als_iter_max"] = als.pop("iter_max")
    if "tol_als" in als:
        flat["als_tol"] = als.pop("tol_als")
    for key in ("seed", "schedule"):
        if key in als:
            flat[f"als_{key}"] = als.pop(key)
    if als:
        raise ValidationError(f"{path}: unknown als keys {sorted(als)}")
    known = vars(args)
    for key, value in flat.items():
        dest = "report" if key == "report_path" else key.replace("-", "_")
        if dest not in known or dest in ("command", "func", "config"):
            raise ValidationError(f"{path}: unknown option {key!r}")
        if isinstance(value, list) and dest != "rank_spec":
            value = ",".join(map(str, value))
        setattr(args, dest, value)


def _als_config(args) -> AlsConfig:
    return AlsConfig(
        iter_max=int(args.als_iter_max),
        tol_als=float(args.als_tol),
        seed=int(args.als_seed),
        schedule=args.als_schedule,
    )


def _admm_config(args, n_views: int) -> AdmmConfig:
    if args.preset:
        cfg = preset_config(args.preset, n_views).to_dict()
    else:
        cfg = AdmmConfig().to_dict()
    for name in ADMM_FLAGS:
        value = getattr(args, name)
        if value is not None:
            cfg[name] = value
    als = cfg["als"]
    if args.als_iter_max is not None:
        als["iter_max"] = int(args.als_iter_max)
    if args.als_tol is not None:
        als["tol_als"] = float(args.als_tol)
    if args.als_seed is not None:
        als["seed"] = int(args.als_seed)
    if args.als_schedule is not None:
        als["schedule"] = args.als_schedule
    return AdmmConfig(**cfg)


def _reshaped(dataset: MultiViewDataset, how: str | None) -> MultiViewDataset:
    if how is None:
        return dataset
    n = dataset.n_samples
    if how == "cubic":
        dims = near_cubic_factorization(n * n)
    elif how == "split":
        dims = sample_split_factorization(n)
    else:
        dims = tuple(_ints(how))
    return MultiViewDataset(dataset.views, dataset.labels, dims, dataset.name, dataset.k)


def _emit(report: dict, args) -> None:
    if args.report:
        write_report(report, args.report)
        log.info("report written to %s", args.report)
    else:
        sys.stdout.write(dumps_report(report))
    if getattr(args, "csv", None):
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        Path(args.csv).write_text(table_csv(report_table(report)))


def cmd_decompose(args) -> None:
    x = read_tensor(args.tensor)
    if args.reshape:
        x = reshape_phi(x, _ints(args.reshape))
    cfg = _als_config(args)
    start = time.perf_counter()
    fitted, trace, cost, rank = fit_method(args.method, x, args.rank, cfg)
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "decompose",
        "method": args.method,
        "shape": list(x.shape),
        "rank": rank,
        "rse": float(trace[-1]),
        "sweeps": len(trace),
        "storage_cost": int(cost),
        "trace": [float(t) for t in trace],
    }
    if not args.no_timing:
        report["seconds"] = time.perf_counter() - start
    if args.out:
        if isinstance(fitted, TomdFactors):
            fitted.save(args.out)
        else:
            arrays = {f"G{k + 1}": c for k, c in enumerate(fitted.cores)}
            arrays.update({f"U{n + 1}": U for n, U in enumerate(fitted.factors)})
            save_bundle(args.out, arrays, {"format": args.method, "shape": list(x.shape),
                                           "rank": rank})
    _emit(report, args)


def cmd_bench(args) -> None:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    ranks = {}
    for item in args.rank_spec:
        if "=" not in item:
            raise ValidationError(f"rank spec {item!r} must look like method=ranks")
        method, text = item.split("=", 1)
        ranks[method.strip()] = text.strip()
    report = run_reconstruction_bench(
        args.tensor,
        methods,
        ranks,
        _als_config(args),
        rse_target=args.rse_target,
        reshape_dims=_ints(args.reshape) if args.reshape else None,
        timing=not args.no_timing,
    )
    _emit(report, args)


def cmd_cluster(args) -> None:
    dataset = _reshaped(ingest_dataset(args.manifest), args.reshape)
    cfg = _admm_config(args, dataset.n_views)
    report = run_cluster(
        dataset,
        cfg,
        seeds=_seeds(str(args.seeds)),
        k=args.k,
        timing=not args.no_timing,
        include_affinity=not args.no_affinity,
        workers=args.workers,
    )
    _emit(report, args)


def cmd_sweep(args) -> None:
    dataset = _reshaped(ingest_dataset(args.manifest), args.reshape)
    base = _admm_config(args, dataset.n_views)
    ranks = [r for r in args.ranks.split(";") if r.strip()] if args.ranks else None
    report = run_param_sweep(
        dataset,
        base,
        mus=_floats(str(args.mus)),
        Ks=_ints(str(args.Ks)),
        ranks=ranks,
        seeds=_seeds(str(args.seeds)),
        workers=args.workers,
        timing=not args.no_timing,
    )
    _emit(report, args)


def cmd_metrics(args) -> None:
    pred, truth = read_labels(args.pred), read_labels(args.truth)
    scores = evaluate(pred, truth).as_dict()
    if args.nmi_average != "geometric":
        scores["nmi"] = nmi(pred, truth, average=args.nmi_average)
    report = {"schema_version": SCHEMA_VERSION, "kind": "metrics", "n": int(pred.size),
              "metrics": scores}
    _emit(report, args)


def cmd_synth(args) -> None:
    dataset = union_of_subspaces(
        n_clusters=args.clusters,
        per_cluster=args.per_cluster,
        dims=_ints(args.dims),
        subspace_rank=args.subspace_rank,
        corruption=args.corruption,
        seed=args.seed,
    )
    path = write_manifest(args.out, dataset)
    print(path)


def _add_als_flags(p, defaults: bool) -> None:
    base = AlsConfig()
    g = p.add_argument_group("inner ALS")
    g.add_argument("--als-iter-max", type=int, default=base.iter_max if defaults else None)
    g.add_argument("--als-tol", type=float, default=base.tol_als if defaults else None)
    g.add_argument("--als-seed", type=int, default=base.seed if defaults else None)
    g.add_argument("--als-schedule", choices=("greedy", "sequential"),
                   default=base.schedule if defaults else None)


def _add_admm_flags(p) -> None:
    g = p.add_argument_group("ADMM (unset flags keep the preset or built-in default)")
    g.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--mu", type=float)
    g.add_argument("--K", type=int)
    g.add_argument("--rank", help='TOMD rank "R1,R2,R3,R4|D1,...,D6"')
    g.add_argument("--tau0", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--tau-max", type=float)
    g.add_argument("--tol", type=float)
    g.add_argument("--iter-max", type=int)
    g.add_argument("--include-self", action="store_true", default=None)
    _add_als_flags(p, defaults=False)
    p.add_argument("--reshape", help='"cubic", "split" or "N1,N2,N3" (default: manifest)')
    p.add_argument("--seeds", default="0-9", help='"0-9" or "0,3,5"')
    p.add_argument("--workers", type=int, default=1)


def _add_output_flags(p, csv: bool = True) -> None:
    p.add_argument("--report", help="JSON report path (default: stdout)")
    if csv:
        p.add_argument("--csv", help="also write the report table as CSV")
    p.add_argument("--no-timing", action="store_true",
                   help="omit wall times so reports are bit-reproducible")
    p.add_argument("--config", help="JSON file whose keys override flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tomdmvc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="fit one decomposition to a tensor file")
    p.add_argument("tensor")
    p.add_argument("--method", choices=METHODS, default="tomd")
    p.add_argument("--rank", required=True)
    p.add_argument("--reshape", help="relabel the tensor to these extents first")
    p.add_argument("--out", help="directory for the fitted factors")
    _add_als_flags(p, defaults=True)
    _add_output_flags(p, csv=False)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("reconstruct-bench", help="compare decompositions on one tensor")
    p.add_argument("tensor")
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--rank", dest="rank_spec", action="append", default=[],
                   metavar="METHOD=RANKS", help="repeat once per method")
    p.add_argument("--rse-target", type=float)
    p.add_argument("--reshape")
    _add_als_flags(p, defaults=True)
    _add_output_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("cluster", help="multi-view clustering of a manifest dataset")
    p.add_argument("manifest")
    p.add_argument("--k", type=int, help="cluster count (default: manifest or labels)")
    p.add_argument("--no-affinity", action="store_true")
    _add_admm_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("sweep", help="grid over mu, K and TOMD rank")
    p.add_argument("manifest")
    p.add_argument("--mus", required=True, help="comma-separated")
    p.add_argument("--Ks", required=True, help="comma-separated")
    p.add_argument("--ranks", help="semicolon-separated rank strings")
    _add_admm_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("metrics", help="score a predicted label file against the truth")
    p.add_argument("pred")
    p.add_argument("truth")
    p.add_argument("--nmi-average", choices=("geometric", "arithmetic"), default="geometric")
    _add_output_flags(p, csv=False)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("synth", help="write a synthetic union-of-subspaces dataset")
    p.add_argument("out")
    p.add_argument("--clusters", type=int, default=3)
    p.add_argument("--per-cluster", type=int, default=20)
    p.add_argument("--dims", default="30,40", help="feature count per view")
    p.add_argument("--subspace-rank", type=int, default=3)
    p.add_argument("--corruption", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _apply_config(args)
        args.func(args)
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, ValueError) as exc:
        # ValidationError is a ValueError; bare ValueErrors come from flag parsing
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
