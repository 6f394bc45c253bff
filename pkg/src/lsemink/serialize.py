"""Objective serialization: a JSON manifest referencing operator binaries.

The manifest records the unknown dimension, term count, Tikhonov
coefficient, and per-term operator specification, offset, target, and
weight.  Dense operators go to sibling ``.lsop`` binaries; structured
operators are described inline.
"""

from __future__ import annotations

import json
from pathlib import Path

from .objective import LinearTerm, LseObjective
from .operators import (
    DenseOperator,
    KroneckerLeftOperator,
    LinearOperator,
    ScaledOperator,
    load_dense,
    save_dense,
)

__all__ = ["save_objective", "load_objective", "MANIFEST_NAME"]

MANIFEST_NAME = "objective.json"


def _operator_spec(op: LinearOperator, directory: Path, stem: str):
    if isinstance(op, DenseOperator):
        filename = f"{stem}.lsop"
        save_dense(op, directory / filename)
        return {"format": "lsop", "file": filename}
    if isinstance(op, KroneckerLeftOperator):
        return {
            "format": "kronecker",
            "feature": [float(v) for v in op.feature],
            "block_dim": op.block_dim,
        }
    if isinstance(op, ScaledOperator):
        return {
            "format": "scaled",
            "scale": op.scale,
            "inner": _operator_spec(op.inner, directory, stem),
        }
    raise ValueError(f"cannot serialize operator of type {type(op).__name__}")


def _operator_from_spec(spec, directory: Path) -> LinearOperator:
    fmt = spec["format"]
    if fmt == "lsop":
        return load_dense(directory / spec["file"])
    if fmt == "kronecker":
        return KroneckerLeftOperator(spec["feature"], spec["block_dim"])
    if fmt == "scaled":
        return ScaledOperator(_operator_from_spec(spec["inner"], directory), spec["scale"])
    raise ValueError(f"unknown operator format {fmt!r}")


def save_objective(obj: LseObjective, directory) -> Path:
    """Write the manifest and operator files; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "n": obj.n,
        "num_terms": obj.num_terms,
        "tikhonov_alpha": obj.tikhonov_alpha,
        "terms": [
            {
                "operator": _operator_spec(term.op, directory, f"term{k:04d}"),
                "offset": [float(v) for v in term.offset],
                "target": [float(v) for v in term.target],
                "weight": term.weight,
            }
            for k, term in enumerate(obj.terms)
        ],
    }
    path = directory / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2))
    return path


def load_objective(directory) -> LseObjective:
    """Rebuild an objective from a manifest directory."""
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST_NAME).read_text())
    terms = [
        LinearTerm(
            _operator_from_spec(entry["operator"], directory),
            offset=entry["offset"],
            target=entry["target"],
            weight=entry["weight"],
        )
        for entry in manifest["terms"]
    ]
    return LseObjective(terms, tikhonov_alpha=manifest["tikhonov_alpha"])
