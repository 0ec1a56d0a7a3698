"""File formats: little-endian float64 blocks with JSON sidecars, and CSV spectra."""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Any, Dict, Tuple

import numpy as np

from .errors import ValidationError
from .filters import get_family
from .synth import PathMatrix
from .wavelet import WaveletPyramid

FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def write_json(path, payload: Dict[str, Any]) -> None:
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def read_json(path) -> Dict[str, Any]:
    with open(path) as fh:
        return json.load(fh)


def _check_version(meta, path):
    if meta.get("format_version") != FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported format_version {meta.get('format_version')!r}")


def write_paths(path, paths: PathMatrix, **meta) -> None:
    """Row-major ``p x n`` block plus sidecar ``{n, p, format_version, **meta}``."""
    np.ascontiguousarray(paths.data, dtype=_DTYPE).tofile(path)
    write_json(sidecar_path(path), {"n": paths.n, "p": paths.p, "format_version": FORMAT_VERSION, **meta})


def read_paths(path) -> Tuple[PathMatrix, Dict[str, Any]]:
    meta = read_json(sidecar_path(path))
    _check_version(meta, path)
    raw = np.fromfile(path, dtype=_DTYPE)
    p, n = int(meta["p"]), int(meta["n"])
    if raw.size != p * n:
        raise ValidationError(f"{path}: expected {p * n} values for p={p}, n={n}, found {raw.size}")
    return PathMatrix(raw.reshape(p, n).astype(float)), meta


def write_pyramid(path, pyramid: WaveletPyramid, **meta) -> None:
    """Octave blocks concatenated in ascending order; the sidecar records the
    octaves, counts, family and shape."""
    with open(path, "wb") as fh:
        for j in pyramid.octaves:
            fh.write(np.ascontiguousarray(pyramid.details[j], dtype=_DTYPE).tobytes())
    write_json(sidecar_path(path), {
        "octaves": list(pyramid.octaves),
        "counts": [pyramid.counts[j] for j in pyramid.octaves],
        "family": pyramid.family.name,
        "n": pyramid.n,
        "p": pyramid.p,
        "format_version": FORMAT_VERSION,
        **meta,
    })


def read_pyramid(path) -> Tuple[WaveletPyramid, Dict[str, Any]]:
    meta = read_json(sidecar_path(path))
    _check_version(meta, path)
    raw = np.fromfile(path, dtype=_DTYPE)
    p = int(meta["p"])
    details, counts, ranges = {}, {}, {}
    offset = 0
    for j, n_j in zip(meta["octaves"], meta["counts"]):
        size = p * n_j
        if offset + size > raw.size:
            raise ValidationError(f"{path}: truncated block for octave {j}")
        details[j] = raw[offset:offset + size].reshape(p, n_j).astype(float)
        counts[j] = n_j
        ranges[j] = (0, n_j)
        offset += size
    if offset != raw.size:
        raise ValidationError(f"{path}: {raw.size - offset} trailing values")
    pyramid = WaveletPyramid(get_family(meta["family"]), int(meta["n"]), p,
                             tuple(meta["octaves"]), details, counts, ranges)
    return pyramid, meta


SPECTRUM_COLUMNS = ("rank", "lambda", "rescaled_log", "scale", "octave")


def write_spectrum_csv(path, spectrum) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(SPECTRUM_COLUMNS)
        for rank, (lam, val) in enumerate(zip(spectrum.eigenvalues, spectrum.values), start=1):
            out.writerow([rank, repr(float(lam)), repr(float(val)), spectrum.scale, spectrum.octave])


def read_spectrum_csv(path) -> Dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {
        "rank": np.array([int(r["rank"]) for r in rows]),
        "lambda": np.array([float(r["lambda"]) for r in rows]),
        "rescaled_log": np.array([float(r["rescaled_log"]) for r in rows]),
    }
