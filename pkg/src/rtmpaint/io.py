"""File formats: WAV audio, headered binary tensors, CSV with provenance.

Audio arrays follow the package convention (channels, samples); WAV files
store (samples, channels) per the format, so this module transposes at the
boundary. Tensor files carry one JSON header line followed by raw
little-endian bytes in C order.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.io import wavfile

from .errors import DataError

_TENSOR_MAGIC = "rtmpaint-tensor-v1"


def write_wav(path: str | Path, samples: np.ndarray, sample_rate: int, dtype: str = "float32") -> None:
    """Write mono (S,) or multichannel (N, S) audio as PCM16 or float32."""
    x = np.asarray(samples)
    if x.ndim == 1:
        data = x
    elif x.ndim == 2:
        data = x.T
    else:
        raise ValueError("audio must be (S,) or (channels, samples)")
    if dtype == "float32":
        wavfile.write(path, sample_rate, data.astype(np.float32))
    elif dtype == "pcm16":
        peak = np.max(np.abs(data)) if data.size else 0.0
        if peak > 1.0:
            data = data / peak
        wavfile.write(path, sample_rate, np.round(data * 32767.0).astype(np.int16))
    else:
        raise ValueError(f"unsupported WAV dtype {dtype!r}")


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a WAV file; returns float64 (channels, samples) and the rate.

    Integer PCM is scaled to [-1, 1).
    """
    try:
        rate, data = wavfile.read(path)
    except (FileNotFoundError, ValueError) as exc:
        raise DataError(f"cannot read WAV file {path}: {exc}") from exc
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        x = data.astype(np.float64)
    elif data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    else:
        raise DataError(f"unsupported WAV sample format {data.dtype} in {path}")
    if x.ndim == 1:
        x = x[None, :]
    else:
        x = x.T
    return x, int(rate)


def write_tensor(path: str | Path, array: np.ndarray, axes: Sequence[str], meta: dict | None = None) -> None:
    """Binary tensor with a self-describing JSON text header."""
    a = np.ascontiguousarray(array)
    if len(axes) != a.ndim:
        raise ValueError("need one axis name per tensor dimension")
    header = {
        "magic": _TENSOR_MAGIC,
        "dims": list(a.shape),
        "dtype": a.dtype.str,  # little-endian numpy type string
        "axes": list(axes),
    }
    if meta:
        header["meta"] = meta
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(a.tobytes(order="C"))


def read_tensor(path: str | Path) -> tuple[np.ndarray, dict]:
    """Read a tensor written by :func:`write_tensor`; returns (array, header)."""
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DataError(f"{path} is not a tensor file: bad header") from exc
        if header.get("magic") != _TENSOR_MAGIC:
            raise DataError(f"{path} is not a tensor file: wrong magic")
        raw = fh.read()
    a = np.frombuffer(raw, dtype=np.dtype(header["dtype"])).reshape(header["dims"])
    return a, header


def fmt(value: float) -> str:
    """Stable decimal formatting used in all CSV output."""
    return f"{float(value):.12g}"


def write_csv(
    path: str | Path,
    columns: Sequence[str],
    rows: Iterable[Sequence],
    header_comments: dict | None = None,
) -> None:
    """CSV with optional ``# key=value`` provenance comment lines on top."""
    with open(path, "w", newline="") as fh:
        if header_comments:
            for k in sorted(header_comments):
                fh.write(f"# {k}={header_comments[k]}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, float) else v for v in row])


def read_csv(path: str | Path) -> tuple[list[str], list[dict], dict]:
    """Read a CSV written by :func:`write_csv`; returns (columns, rows, comments)."""
    comments: dict = {}
    with open(path, newline="") as fh:
        pos = fh.tell()
        line = fh.readline()
        while line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                comments[k.strip()] = v.strip()
            pos = fh.tell()
            line = fh.readline()
        fh.seek(pos)
        reader = csv.DictReader(fh)
        rows = list(reader)
        columns = list(reader.fieldnames or [])
    return columns, rows, comments
