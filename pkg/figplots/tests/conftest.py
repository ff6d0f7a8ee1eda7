import hashlib

import numpy as np
import pytest


def write_pgm16(values: np.ndarray, path) -> None:
    lo, hi = float(values.min()), float(values.max())
    scaled = np.zeros_like(values) if hi == lo else \
        np.round((values - lo) / (hi - lo) * 65535.0)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{values.shape[1]} {values.shape[0]}\n65535\n".encode())
        fh.write(scaled.astype(">u2").tobytes())
    sidecar = path.with_suffix(path.suffix + ".scale.txt")
    sidecar.write_text(f"min {lo!r}\nmax {hi!r}\n"
                       f"rows {values.shape[0]}\ncols {values.shape[1]}\n")


def make_run_dir(root, *, image=None, array_size=500.0, standoff=10000.0,
                 gamma="", metrics_rows=None, scatterers=((5.0, 9990.0),)):
    root.mkdir(parents=True, exist_ok=True)
    if image is None:
        rng = np.random.default_rng(0)
        image = rng.uniform(size=(9, 9))
    write_pgm16(image, root / "pseudospectrum.pgm")

    with open(root / "scene.csv", "w") as fh:
        fh.write("cross,range,re,im\n")
        for c, z in scatterers:
            fh.write(f"{c},{z},1.0,0.0\n")

    if metrics_rows is None:
        metrics_rows = [f"0,,{gamma},1,1,0.0,0.0,0,0"]
    with open(root / "metrics.csv", "w") as fh:
        fh.write("seed,snr_db,gamma,rank_est,exact_match,"
                 "mean_cell_error,max_cell_error,misses,false_alarms\n")
        for row in metrics_rows:
            fh.write(row + "\n")

    files = ["scene.csv", "metrics.csv", "pseudospectrum.pgm",
             "pseudospectrum.pgm.scale.txt"]
    lines = ["[run]", "tool = arraymusic 0.1.0",
             "config_hash = 0" * 1, "kind = MC_STACK", "seeds = 0", "",
             "[metrics]", f"rows = {len(metrics_rows)}", "", "[files]"]
    for name in files:
        digest = hashlib.sha256((root / name).read_bytes()).hexdigest()
        lines.append(f"{name} = {digest}")
    lines += [
        "",
        "[config:scene]",
        f"array_size = {array_size}",
        f"standoff = {standoff}",
        "iw_cross = 100.0",
        "iw_range = 100.0",
        "grid_cross = 9",
        "grid_range = 9",
        "",
        "[config:frequencies]",
        "count = 12",
        "fractional_bandwidth = 0.05",
    ]
    (root / "manifest.cfg").write_text("\n".join(lines) + "\n")
    return root / "manifest.cfg"


def make_sweep_dir(root, job_specs):
    """job_specs: list of dicts forwarded to make_run_dir."""
    root.mkdir(parents=True, exist_ok=True)
    names = []
    merged = ["job,param,value,seed,snr_db,gamma,rank_est,exact_match,"
              "mean_cell_error,max_cell_error,misses,false_alarms"]
    for i, spec in enumerate(job_specs):
        name = f"job_{i:02d}"
        make_run_dir(root / name, **spec)
        names.append(name)
        for row in (root / name / "metrics.csv").read_text().splitlines()[1:]:
            merged.append(f"{name},scene.standoff,"
                          f"{spec.get('standoff', 10000.0)},{row}")
    (root / "metrics.csv").write_text("\n".join(merged) + "\n")
    lines = ["[sweep]", "tool = arraymusic 0.1.0", "param = scene.standoff",
             f"values = {','.join(str(s.get('standoff', 10000.0)) for s in job_specs)}",
             f"jobs = {' '.join(names)}", "", "[files]",
             "metrics.csv = x", "", "[jobs]"]
    for name in names:
        lines.append(f"{name} = {name}/manifest.cfg")
    (root / "manifest.cfg").write_text("\n".join(lines) + "\n")
    return root / "manifest.cfg"


@pytest.fixture
def run_manifest(tmp_path):
    return make_run_dir(tmp_path / "run")


@pytest.fixture
def sweep_manifest(tmp_path):
    specs = [
        {"standoff": 50000.0, "gamma": "0.004"},
        {"standoff": 10000.0, "gamma": "0.003"},
        {"standoff": 2000.0, "gamma": "0.002"},
        {"standoff": 500.0, "gamma": "0.001"},
    ]
    return make_sweep_dir(tmp_path / "sweep", specs)
