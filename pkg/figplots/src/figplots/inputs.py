"""Readers for the documented arraymusic output formats.

A run directory holds ``manifest.cfg`` (INI: [run], [metrics], [files] and a
``[config:<section>]`` echo of the resolved configuration), ``scene.csv``
(true scatterer positions), ``metrics.csv`` and the 16-bit binary PGM
pseudospectrum with its ``.scale.txt`` sidecar.  A sweep directory holds a
top-level manifest with [sweep] / [jobs] sections pointing at per-job run
manifests, plus a merged ``metrics.csv`` prefixed with job/param/value
columns.
"""

from __future__ import annotations

import configparser
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MissingInputError


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingInputError(f"missing input file: {path}")
    return path


def read_pgm16(path) -> np.ndarray:
    """Binary 16-bit PGM (P5, maxval 65535, big-endian samples)."""
    with open(_require(Path(path)), "rb") as fh:
        if fh.readline().strip() != b"P5":
            raise MissingInputError(f"{path}: not a binary PGM")
        cols, rows = (int(v) for v in fh.readline().split())
        maxval = int(fh.readline())
        if maxval != 65535:
            raise MissingInputError(f"{path}: expected 16-bit samples")
        raster = np.frombuffer(fh.read(rows * cols * 2), dtype=">u2")
    if raster.size != rows * cols:
        raise MissingInputError(f"{path}: truncated raster")
    return raster.reshape(rows, cols).astype(float)


def read_scale_sidecar(path) -> dict:
    out = {}
    for line in _require(Path(path)).read_text().splitlines():
        key, value = line.split(maxsplit=1)
        out[key] = float(value)
    return out


def read_csv_rows(path) -> list[dict]:
    with open(_require(Path(path)), newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise MissingInputError(f"{path}: no data rows")
    return rows


@dataclass(frozen=True)
class RunInputs:
    directory: Path
    config: dict[str, dict[str, str]]   # config echo, section -> key -> value
    files: dict[str, str]               # name -> sha256

    @property
    def pseudospectrum(self) -> np.ndarray:
        return read_pgm16(self.directory / "pseudospectrum.pgm")

    @property
    def scale(self) -> dict:
        return read_scale_sidecar(
            self.directory / "pseudospectrum.pgm.scale.txt")

    def scene_positions(self) -> np.ndarray:
        """True scatterer (cross, range) positions, shape (M, 2)."""
        rows = read_csv_rows(self.directory / "scene.csv")
        if "cross" in rows[0]:
            return np.array([[float(r["cross"]), float(r["range"])]
                             for r in rows])
        return np.array([[float(r["delay"]), 0.0] for r in rows])

    def metrics(self) -> list[dict]:
        return read_csv_rows(self.directory / "metrics.csv")

    def window_extent(self) -> tuple[float, float, float, float]:
        """Heatmap extent (cross_lo, cross_hi, range_lo, range_hi) in lambda0."""
        scene = self.config["scene"]
        array_size = float(scene["array_size"])
        standoff = float(scene["standoff"])
        fb = float(self.config["frequencies"]["fractional_bandwidth"])
        iw_cross = scene["iw_cross"]
        iw_range = scene["iw_range"]
        cross = 5.0 * standoff / array_size if iw_cross == "auto" \
            else float(iw_cross)
        rng = 5.0 / fb if iw_range == "auto" else float(iw_range)
        return (-cross / 2.0, cross / 2.0,
                standoff - rng / 2.0, standoff + rng / 2.0)

    def aspect_ratio(self) -> float:
        """a / L of the configuration."""
        scene = self.config["scene"]
        return float(scene["array_size"]) / float(scene["standoff"])


def load_run(manifest_path) -> RunInputs:
    path = _require(Path(manifest_path))
    parser = configparser.ConfigParser()
    parser.read_string(path.read_text())
    if not parser.has_section("run"):
        raise MissingInputError(f"{path}: not a run manifest")
    config = {
        section.split(":", 1)[1]: dict(parser[section])
        for section in parser.sections() if section.startswith("config:")
    }
    files = dict(parser["files"]) if parser.has_section("files") else {}
    run = RunInputs(path.parent, config, files)
    for name in files:
        _require(path.parent / name)
    return run


@dataclass(frozen=True)
class SweepInputs:
    directory: Path
    param: str
    values: list[str]
    jobs: list[RunInputs]

    def merged_metrics(self) -> list[dict]:
        return read_csv_rows(self.directory / "metrics.csv")


def load_sweep(manifest_path) -> SweepInputs:
    path = _require(Path(manifest_path))
    parser = configparser.ConfigParser()
    parser.read_string(path.read_text())
    if not parser.has_section("sweep"):
        raise MissingInputError(f"{path}: not a sweep manifest")
    job_names = parser["sweep"]["jobs"].split()
    jobs = [load_run(path.parent / parser["jobs"][name]) for name in job_names]
    return SweepInputs(
        directory=path.parent,
        param=parser["sweep"]["param"],
        values=parser["sweep"]["values"].split(","),
        jobs=jobs,
    )
