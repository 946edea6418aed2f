"""JSON run reports, CSV traces and bit output files."""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Union

import jsonschema
import numpy as np

from .errors import FormatError, OutputError
from .protocol import RunReport
from .sanity import SanityResult

PathLike = Union[str, os.PathLike]

_NUM = {"type": ["number", "null"]}

BLOCK_SCHEMA = {
    "type": "object",
    "required": ["index", "length", "n_q", "t_bits", "h_max", "h_low", "r_sec", "c"],
    "properties": {
        "index": {"type": "integer", "minimum": 0},
        "start": {"type": "integer", "minimum": 0},
        "length": {"type": "integer", "minimum": 1},
        "n_q": {"type": "integer", "minimum": 1},
        "t_bits": {"type": "integer", "minimum": 0},
        "h_inf": _NUM,
        "h_max": {"type": "number", "minimum": 0},
        "h_low": {"type": "number"},
        "c": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "r_sec": {"type": "number", "minimum": 0},
        "tail_error": {"type": "number", "minimum": 0},
        "extracted_bits": {"type": "integer", "minimum": 0},
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["config", "h_inf", "h_max", "estimator", "c", "h_low", "tail_error",
                 "t_bits", "r_sec", "blocks", "sanity"],
    "properties": {
        "config": {"type": "object"},
        "h_inf": _NUM,
        "h_max": _NUM,
        "estimator": {"enum": ["plugin", "bayesian", "exact", None]},
        "c": _NUM,
        "h_low": _NUM,
        "tail_error": _NUM,
        "t_bits": {"type": "integer", "minimum": 0},
        "r_sec": {"type": "number", "minimum": 0},
        "extracted_bits": {"type": "integer", "minimum": 0},
        "partial": {"type": "boolean"},
        "blocks": {"type": "array", "items": BLOCK_SCHEMA},
        "sanity": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "statistic", "threshold", "passed"],
                "properties": {
                    "name": {"type": "string"},
                    "statistic": {"type": ["number", "string"]},
                    "threshold": {"type": "number"},
                    "passed": {"type": "boolean"},
                },
            },
        },
    },
}


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    if isinstance(value, bytes):
        return value.hex()
    return value


def report_dict(run: RunReport, sanity: Sequence[SanityResult] = ()) -> dict:
    out = run.to_dict()
    out["sanity"] = [s.to_dict() for s in sanity]
    out = _jsonable(out)
    jsonschema.validate(out, REPORT_SCHEMA)
    return out


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                                 for v in row])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


BLOCK_COLUMNS = ("index", "start", "length", "n_q", "t_bits", "h_inf", "h_max", "h_low",
                 "c", "r_sec", "tail_error", "extracted_bits")


def emit_report(
    run: RunReport,
    path: PathLike,
    *,
    sanity: Sequence[SanityResult] = (),
    autocorrelation: Optional[Sequence[float]] = None,
    bits_path: Optional[PathLike] = None,
) -> Dict[str, Path]:
    """Write ``<path>`` (JSON), ``<stem>.blocks.csv`` and optional extras.

    Returns a mapping from artefact kind to the written path.
    """
    path = Path(path)
    data = report_dict(run, sanity)
    written = {}
    try:
        path.write_text(json.dumps(data, indent=2))
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    written["report"] = path
    stem = path.with_suffix("")
    blocks = data["blocks"]
    written["blocks"] = write_csv(
        stem.with_name(stem.name + ".blocks.csv"),
        BLOCK_COLUMNS,
        ([b.get(k) for k in BLOCK_COLUMNS] for b in blocks),
    )
    if autocorrelation is not None:
        written["autocorrelation"] = write_csv(
            stem.with_name(stem.name + ".acf.csv"),
            ("lag", "value"),
            enumerate(autocorrelation),
        )
    if bits_path is not None and run.output is not None:
        bits_path = Path(bits_path)
        try:
            bits_path.write_bytes(run.output.packed)
        except OSError as exc:
            raise OutputError(f"cannot write {bits_path}: {exc}") from exc
        written["bits"] = bits_path
    return written


def load_report(path: PathLike) -> dict:
    """Read a JSON report and validate it against :data:`REPORT_SCHEMA`."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(data, REPORT_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise FormatError(f"{path} does not match the report schema: {exc.message}") from exc
    return data
