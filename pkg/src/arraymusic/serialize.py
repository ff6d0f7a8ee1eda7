"""File formats: binary matrix containers, 16-bit PGM export, CSV helpers.

Binary containers (little-endian throughout):

``DataMatrix``   magic ``AMDM``, version byte, kind tag byte, rows and cols
as uint64, then the row-major payload with each complex entry stored as two
float64 (real, imag), then three length-prefixed (uint32) UTF-8 strings:
scene hash, illumination labels joined by ``;``, noise descriptor.

``ModelMatrixFamily``   magic ``AMMF``, version byte, kind tag byte,
exactness byte, rows/columns/excitations as uint64, grid shape as two uint64
(zeros when absent), the A payload, the excitation-diagonal payload, then a
length-prefixed note string.  Column norms are recomputed on load.

Pseudospectrum images are 16-bit binary PGM (P5, maxval 65535, big-endian
samples as the format requires), min-max scaled; the scale and grid shape
land in a ``<name>.scale.txt`` sidecar.
"""

from __future__ import annotations

import csv
import hashlib
import struct
from pathlib import Path

import numpy as np

from .robustness import BOUND_REPORT_FIELDS, BoundReport
from .structures import (
    DataMatrix,
    DataMatrixKind,
    Exactness,
    ModelMatrixFamily,
    Provenance,
)

_DM_MAGIC = b"AMDM"
_MF_MAGIC = b"AMMF"
_VERSION = 1

_KIND_TAGS = {kind: i + 1 for i, kind in enumerate(DataMatrixKind)}
_KIND_FROM_TAG = {v: k for k, v in _KIND_TAGS.items()}
_EXACT_TAGS = {Exactness.EXACT: 1, Exactness.PARAXIAL_APPROX: 2}
_EXACT_FROM_TAG = {v: k for k, v in _EXACT_TAGS.items()}


def _write_string(fh, text: str) -> None:
    raw = text.encode("utf-8")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)


def _read_string(fh) -> str:
    (length,) = struct.unpack("<I", fh.read(4))
    return fh.read(length).decode("utf-8")


def _write_payload(fh, matrix: np.ndarray) -> None:
    flat = np.ascontiguousarray(matrix, dtype=complex)
    pairs = np.empty(flat.size * 2, dtype="<f8")
    pairs[0::2] = flat.real.ravel()
    pairs[1::2] = flat.imag.ravel()
    fh.write(pairs.tobytes())


def _read_payload(fh, rows: int, cols: int) -> np.ndarray:
    pairs = np.frombuffer(fh.read(rows * cols * 16), dtype="<f8")
    return (pairs[0::2] + 1j * pairs[1::2]).reshape(rows, cols)


def save_data_matrix(data: DataMatrix, path) -> None:
    rows, cols = data.shape
    with open(path, "wb") as fh:
        fh.write(_DM_MAGIC)
        fh.write(bytes([_VERSION, _KIND_TAGS[data.kind]]))
        fh.write(struct.pack("<QQ", rows, cols))
        _write_payload(fh, data.entries)
        _write_string(fh, data.provenance.scene_hash)
        _write_string(fh, ";".join(data.provenance.illuminations))
        _write_string(fh, data.provenance.noise)


def load_data_matrix(path) -> DataMatrix:
    with open(path, "rb") as fh:
        if fh.read(4) != _DM_MAGIC:
            raise ValueError(f"{path}: not a data-matrix container")
        version, tag = fh.read(2)
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        entries = _read_payload(fh, rows, cols)
        scene_hash = _read_string(fh)
        illuminations = _read_string(fh)
        noise = _read_string(fh)
    prov = Provenance(scene_hash,
                      tuple(illuminations.split(";")) if illuminations else (),
                      noise)
    return DataMatrix(entries, _KIND_FROM_TAG[tag], prov)


def save_family(family: ModelMatrixFamily, path) -> None:
    rows, k = family.matrix.shape
    grid = family.grid_shape or (0, 0)
    with open(path, "wb") as fh:
        fh.write(_MF_MAGIC)
        fh.write(bytes([_VERSION, _KIND_TAGS[family.kind],
                        _EXACT_TAGS[family.exactness]]))
        fh.write(struct.pack("<QQQQQ", rows, k, family.excitation_count, *grid))
        _write_payload(fh, family.matrix)
        _write_payload(fh, family.excitation_diagonals)
        _write_string(fh, family.note)


def load_family(path) -> ModelMatrixFamily:
    with open(path, "rb") as fh:
        if fh.read(4) != _MF_MAGIC:
            raise ValueError(f"{path}: not a model-family container")
        version, kind_tag, exact_tag = fh.read(3)
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        rows, k, aleph, g0, g1 = struct.unpack("<QQQQQ", fh.read(40))
        matrix = _read_payload(fh, rows, k)
        diagonals = _read_payload(fh, k, aleph)
        note = _read_string(fh)
    return ModelMatrixFamily(
        matrix=matrix,
        excitation_diagonals=diagonals,
        kind=_KIND_FROM_TAG[kind_tag],
        exactness=_EXACT_FROM_TAG[exact_tag],
        grid_shape=(g0, g1) if (g0, g1) != (0, 0) else None,
        note=note,
    )


def write_pgm16(values: np.ndarray, path) -> None:
    """Min-max scaled 16-bit PGM plus a ``.scale.txt`` sidecar."""
    img = np.asarray(values, dtype=float)
    if img.ndim != 2:
        raise ValueError("PGM export needs a 2-d array")
    lo, hi = float(img.min()), float(img.max())
    if hi > lo:
        scaled = np.round((img - lo) / (hi - lo) * 65535.0)
    else:
        scaled = np.zeros_like(img)
    raster = scaled.astype(">u2")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n65535\n".encode("ascii"))
        fh.write(raster.tobytes())
    sidecar = path.with_suffix(path.suffix + ".scale.txt")
    sidecar.write_text(
        f"min {lo!r}\nmax {hi!r}\nrows {img.shape[0]}\ncols {img.shape[1]}\n"
    )


def read_pgm16(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"P5":
            raise ValueError(f"{path}: not a binary PGM")
        dims = fh.readline().split()
        cols, rows = int(dims[0]), int(dims[1])
        maxval = int(fh.readline())
        if maxval != 65535:
            raise ValueError(f"{path}: expected 16-bit PGM, maxval {maxval}")
        raster = np.frombuffer(fh.read(rows * cols * 2), dtype=">u2")
    return raster.reshape(rows, cols).astype(np.uint16)


def write_pseudospectrum_csv(values: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "value"])
        for k, v in enumerate(np.asarray(values, float)):
            writer.writerow([k, repr(float(v))])


def export_bound_reports(reports: list[BoundReport], path) -> None:
    """One CSV row per seed trial."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BOUND_REPORT_FIELDS)
        for rep in reports:
            writer.writerow([getattr(rep, f) for f in BOUND_REPORT_FIELDS])


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def git_blob_sha1(payload: bytes) -> str:
    """Content hash in git's blob format: sha1 over 'blob <len>\\0<payload>'."""
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(payload))
    h.update(payload)
    return h.hexdigest()
