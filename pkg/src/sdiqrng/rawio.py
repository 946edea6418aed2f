"""Raw sample files: little-endian int16 data with a JSON sidecar.

``capture.i16`` is accompanied by ``capture.i16.json``::

    {"sample_rate_hz": 5e9, "full_scale": 1.0, "adc_bits": 16,
     "dtype": "i16", "endianness": "little"}

A code ``k`` maps to the amplitude ``k / 2**(adc_bits - 1) * full_scale``.
An optional ``n_samples`` field is checked against the file size.
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .dsp import SignalStream
from .errors import FormatError, InvalidParameterError, OutputError, PartialReadError
from .states import Partition

PathLike = Union[str, os.PathLike]
REQUIRED = ("sample_rate_hz", "full_scale", "adc_bits", "dtype", "endianness")


def sidecar_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def _validate_meta(meta: dict) -> dict:
    missing = [k for k in REQUIRED if k not in meta]
    if missing:
        raise FormatError(f"sidecar lacks {', '.join(missing)}")
    if meta["dtype"] != "i16" or meta["endianness"] != "little":
        raise FormatError("only little-endian i16 samples are supported")
    rate, scale, bits = meta["sample_rate_hz"], meta["full_scale"], meta["adc_bits"]
    if not isinstance(rate, (int, float)) or not (rate > 0 and math.isfinite(rate)):
        raise FormatError(f"sample_rate_hz must be positive, got {rate!r}")
    if not isinstance(scale, (int, float)) or not (scale > 0 and math.isfinite(scale)):
        raise FormatError(f"full_scale must be positive, got {scale!r}")
    if not isinstance(bits, int) or not 1 <= bits <= 16:
        raise FormatError(f"adc_bits must be an integer in 1..16, got {bits!r}")
    return meta


def write_raw(
    path: PathLike,
    codes,
    sample_rate_hz: float,
    full_scale: float = 1.0,
    adc_bits: int = 16,
    extra: Optional[dict] = None,
) -> Path:
    """Write integer ADC codes and their sidecar; returns the data path."""
    codes = np.asarray(codes)
    if not np.issubdtype(codes.dtype, np.integer):
        raise InvalidParameterError("codes must be integers; see quantize_amplitudes")
    lim = 2 ** (adc_bits - 1)
    if codes.size and (codes.min() < -lim or codes.max() > lim - 1):
        raise InvalidParameterError(f"codes exceed the {adc_bits}-bit range")
    meta = {
        "sample_rate_hz": float(sample_rate_hz),
        "full_scale": float(full_scale),
        "adc_bits": int(adc_bits),
        "dtype": "i16",
        "endianness": "little",
        "n_samples": int(codes.size),
    }
    if extra:
        meta.update(extra)
    _validate_meta(meta)
    path = Path(path)
    try:
        codes.astype("<i2").tofile(path)
        sidecar_path(path).write_text(json.dumps(meta, indent=2))
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def quantize_amplitudes(samples, full_scale: float = 1.0, adc_bits: int = 16) -> np.ndarray:
    """Round amplitudes to ADC codes, saturating at the range limits."""
    lim = 2 ** (adc_bits - 1)
    codes = np.rint(np.asarray(samples, dtype=float) / full_scale * lim)
    return np.clip(codes, -lim, lim - 1).astype(np.int16)


def read_sidecar(path: PathLike) -> dict:
    side = sidecar_path(path)
    try:
        meta = json.loads(side.read_text())
    except FileNotFoundError as exc:
        raise FormatError(f"missing sidecar {side}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"sidecar {side} is not valid JSON: {exc}") from exc
    if not isinstance(meta, dict):
        raise FormatError("sidecar must hold a JSON object")
    return _validate_meta(meta)


def ingest_raw(path: PathLike) -> SignalStream:
    """Load a raw capture as a :class:`SignalStream` of amplitudes.

    Raises
    ------
    FormatError
        Missing or inconsistent sidecar, or codes outside the ADC range.
    PartialReadError
        Odd byte count, or fewer samples than ``n_samples``.
    """
    path = Path(path)
    meta = read_sidecar(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError as exc:
        raise FormatError(f"missing data file {path}") from exc
    if len(raw) % 2:
        raise PartialReadError(f"{path} ends in the middle of a sample")
    codes = np.frombuffer(raw, dtype="<i2")
    expected = meta.get("n_samples")
    if expected is not None and codes.size != expected:
        if codes.size < expected:
            raise PartialReadError(f"{path} holds {codes.size} of {expected} samples")
        raise FormatError(f"{path} holds {codes.size} samples, sidecar says {expected}")
    lim = 2 ** (meta["adc_bits"] - 1)
    if codes.size and (codes.min() < -lim or codes.max() > lim - 1):
        raise FormatError(f"codes exceed the declared {meta['adc_bits']}-bit range")
    amplitudes = codes.astype(np.float64) * (meta["full_scale"] / lim)
    origin = {"kind": "ingested", "path": str(path), **meta}
    return SignalStream(amplitudes, float(meta["sample_rate_hz"]), origin)


def symbols_from_stream(stream: SignalStream, partition: Partition,
                        vacuum_variance: Optional[float] = None) -> np.ndarray:
    """Digitise amplitudes with ``partition``.

    With ``vacuum_variance`` (the shot-noise variance in the stream's units)
    the amplitudes are first rescaled to vacuum units, where the vacuum
    variance is 1/2.
    """
    x = stream.samples
    if vacuum_variance is not None:
        if not vacuum_variance > 0:
            raise InvalidParameterError("vacuum_variance must be positive")
        x = x * math.sqrt(0.5 / vacuum_variance)
    return partition.digitize(x).astype(np.int32)
