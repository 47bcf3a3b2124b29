"""On-disk formats: dataset CSVs, manifests, and fit artifacts.

One CSV per population with header ``time,status,x1,...,xp``; a manifest
JSON names the populations, their files (paths relative to the manifest)
and the shared predictor order. Floats are written with 17 significant
digits so write -> read -> write round trips are byte identical. All writes
go through a temp file and an atomic rename.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from .coxph import SurvivalDataset, build_dataset
from .errors import DataError
from .linalg import Factorization

__all__ = [
    "atomic_write",
    "format_float",
    "load_coefficients_csv",
    "load_dataset",
    "load_dataset_csv",
    "load_factor_weights_csv",
    "load_manifest",
    "read_json",
    "write_coefficients_csv",
    "write_dataset_csv",
    "write_factorization_csvs",
    "write_json",
    "write_manifest",
]


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def atomic_write(path: Path | str, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path | str, payload: dict) -> None:
    atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path: Path | str) -> dict:
    try:
        with open(path) as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read JSON {path}: {exc}") from exc


def write_dataset_csv(
    path: Path | str,
    times: np.ndarray,
    status: np.ndarray,
    covariates: np.ndarray,
    predictor_names: Sequence[str],
) -> None:
    lines = ["time,status," + ",".join(predictor_names)]
    for t, d, row in zip(times, status, covariates):
        lines.append(
            ",".join([format_float(t), str(int(d))] + [format_float(v) for v in row])
        )
    atomic_write(path, "\n".join(lines) + "\n")


def load_dataset_csv(path: Path | str) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[str]]:
    try:
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader)
            rows = list(reader)
    except (OSError, StopIteration) as exc:
        raise DataError(f"cannot read dataset CSV {path}: {exc}") from exc
    if header[:2] != ["time", "status"]:
        raise DataError(f"{path}: header must start with time,status")
    names = header[2:]
    if not rows:
        raise DataError(f"{path}: no subjects")
    try:
        data = np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric cell: {exc}") from exc
    if data.shape[1] != len(header):
        raise DataError(f"{path}: ragged rows")
    return data[:, 0], data[:, 1].astype(np.int8), data[:, 2:], names


def write_manifest(
    path: Path | str,
    populations: Sequence[dict],
    predictor_names: Sequence[str],
) -> None:
    write_json(path, {"populations": list(populations), "predictors": list(predictor_names)})


def load_manifest(path: Path | str) -> dict:
    manifest = read_json(path)
    if "populations" not in manifest or "predictors" not in manifest:
        raise DataError(f"{path}: manifest needs 'populations' and 'predictors'")
    return manifest


def load_dataset(manifest_path: Path | str, split: str = "train") -> SurvivalDataset:
    """Read one split of every population listed in a manifest."""
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    predictors = list(manifest["predictors"])
    pops = []
    for entry in manifest["populations"]:
        if split not in entry or entry[split] is None:
            raise DataError(
                f"population {entry.get('name', '?')!r} has no {split!r} file"
            )
        csv_path = manifest_path.parent / entry[split]
        times, status, X, names = load_dataset_csv(csv_path)
        if names != predictors:
            raise DataError(
                f"{csv_path}: predictor header deviates from the manifest: "
                f"{_name_diff(predictors, names)}"
            )
        pops.append((entry["name"], times, status, X))
    return build_dataset(pops, predictors)


def _name_diff(expected: Sequence[str], got: Sequence[str]) -> str:
    diffs = [
        f"position {i}: expected {a!r}, got {b!r}"
        for i, (a, b) in enumerate(zip(expected, got))
        if a != b
    ]
    if len(expected) != len(got):
        diffs.append(f"expected {len(expected)} predictors, got {len(got)}")
    return "; ".join(diffs) or "order identical (internal error)"


def write_coefficients_csv(
    path: Path | str,
    B: np.ndarray,
    predictor_names: Sequence[str],
    population_names: Sequence[str],
) -> None:
    lines = ["predictor," + ",".join(population_names)]
    for name, row in zip(predictor_names, np.asarray(B, dtype=float)):
        lines.append(name + "," + ",".join(format_float(v) for v in row))
    atomic_write(path, "\n".join(lines) + "\n")


def load_coefficients_csv(path: Path | str) -> tuple[np.ndarray, list[str], list[str]]:
    try:
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader)
            rows = list(reader)
    except (OSError, StopIteration) as exc:
        raise DataError(f"cannot read coefficients CSV {path}: {exc}") from exc
    if not header or header[0] != "predictor":
        raise DataError(f"{path}: first column must be 'predictor'")
    population_names = header[1:]
    predictor_names = [row[0] for row in rows]
    B = np.array([[float(v) for v in row[1:]] for row in rows])
    return B, predictor_names, population_names


def write_factorization_csvs(
    outdir: Path | str,
    fact: Factorization,
    predictor_names: Sequence[str],
    population_names: Sequence[str],
) -> dict[str, str]:
    outdir = Path(outdir)
    r = fact.rank
    factor_cols = [f"f{i + 1}" for i in range(r)]

    lines = ["predictor," + ",".join(factor_cols)]
    for name, row in zip(predictor_names, fact.left_factors):
        lines.append(name + "," + ",".join(format_float(v) for v in row))
    atomic_write(outdir / "factors_U.csv", "\n".join(lines) + "\n")

    lines = ["factor,singular_value"]
    for col, v in zip(factor_cols, fact.singular_values):
        lines.append(f"{col},{format_float(v)}")
    atomic_write(outdir / "factors_D.csv", "\n".join(lines) + "\n")

    lines = ["population," + ",".join(factor_cols)]
    for name, row in zip(population_names, fact.right_factors):
        lines.append(name + "," + ",".join(format_float(v) for v in row))
    atomic_write(outdir / "factors_W.csv", "\n".join(lines) + "\n")

    return {
        "factors_u": "factors_U.csv",
        "factors_d": "factors_D.csv",
        "factors_w": "factors_W.csv",
    }


def load_factor_weights_csv(path: Path | str) -> tuple[np.ndarray, list[str]]:
    """Read a factors_U-style CSV: predictor names plus factor weight columns."""
    try:
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader)
            rows = list(reader)
    except (OSError, StopIteration) as exc:
        raise DataError(f"cannot read factor CSV {path}: {exc}") from exc
    if not header or header[0] != "predictor":
        raise DataError(f"{path}: first column must be 'predictor'")
    names = [row[0] for row in rows]
    U = np.array([[float(v) for v in row[1:]] for row in rows])
    return U, names
