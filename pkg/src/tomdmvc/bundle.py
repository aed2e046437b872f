"""Directory bundles: named tensors in the text format plus a JSON header."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .exceptions import IngestionError
from .tensor_core import read_tensor, write_tensor

HEADER = "header.json"


def save_bundle(directory, arrays: dict[str, np.ndarray], header: dict) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for name, arr in arrays.items():
        write_tensor(directory / f"{name}.txt", arr)
        names.append(name)
    header = dict(header, arrays=names)
    (directory / HEADER).write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return directory


def load_bundle(directory) -> tuple[dict[str, np.ndarray], dict]:
    directory = Path(directory)
    try:
        header = json.loads((directory / HEADER).read_text())
    except FileNotFoundError as exc:
        raise IngestionError(f"{directory}: no {HEADER}") from exc
    arrays = {}
    for name in header.get("arrays", []):
        # C-contiguous copies so resumed runs hit the same BLAS code paths
        arrays[name] = np.ascontiguousarray(read_tensor(directory / f"{name}.txt"))
    return arrays, header
