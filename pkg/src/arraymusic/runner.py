"""Config-driven experiment pipeline: scene -> data -> MUSIC -> metrics -> files.

A run writes into its output directory:

    config.resolved.cfg        resolved configuration (hash input)
    scene.csv                  true scatterer positions (cross, range, re, im)
    pseudospectrum.pgm(+.scale.txt), pseudospectrum.csv   first seed's image
    metrics.csv                one row per noise seed
    manifest.cfg               run manifest (config echo, hashes, summary)

Outputs carry no timestamps; identical configs and seeds give byte-identical
CSVs (and PGMs under an identical floating-point environment).
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .errors import ConfigError
from .forward import (
    Illumination,
    complex_gaussian,
    green_vector,
    noise_scale,
    point_illuminations,
    response_matrix,
    response_tensor,
)
from .music import (
    Gap,
    Known,
    Pseudospectrum,
    RankPolicy,
    Threshold,
    decompose,
    extract_support,
    pseudospectrum,
)
from .phaseless import (
    add_intensity_noise,
    assemble_mc_from_intensities,
    measure_cross_links,
    measure_intensities,
    recover_interferometric,
)
from .robustness import compute_gamma, optimal_illuminations, random_illuminations
from .scene import (
    DelayScene,
    Scatterer,
    Scene,
    discretize_delays,
    discretize_reflectivity,
    random_delay_scene,
    random_scene,
)
from .serialize import (
    file_sha256,
    git_blob_sha1,
    write_pgm16,
    write_pseudospectrum_csv,
)
from .structures import (
    DataMatrix,
    DataMatrixKind,
    ModelMatrixFamily,
    Provenance,
    build_m_single,
    build_mc,
    build_pc,
    build_pd,
    build_prony,
    build_single_freq,
    default_conjugation,
)

METRIC_FIELDS = ("seed", "snr_db", "gamma", "rank_est", "exact_match",
                 "mean_cell_error", "max_cell_error", "misses", "false_alarms")

#: Matching radius (grid cells, infinity norm) for miss / false-alarm counts.
MATCH_RADIUS_CELLS = 1.0


@dataclass(frozen=True)
class MetricRecord:
    seed: int
    snr_db: float | None
    gamma: float | None
    rank_est: int
    exact_match: bool
    mean_cell_error: float
    max_cell_error: float
    misses: int
    false_alarms: int


def support_metrics(true_cells: np.ndarray, recovered_cells: np.ndarray,
                    true_support: set[int], recovered: set[int],
                    radius: float = MATCH_RADIUS_CELLS) -> dict:
    """Localization quality of a recovered index set, in grid-cell units."""
    per_true = np.array([
        np.min(np.max(np.abs(recovered_cells - t[None, :]), axis=1))
        for t in true_cells
    ])
    per_rec = np.array([
        np.min(np.max(np.abs(true_cells - r[None, :]), axis=1))
        for r in recovered_cells
    ])
    return {
        "exact_match": recovered == true_support,
        "mean_cell_error": float(per_true.mean()),
        "max_cell_error": float(per_true.max()),
        "misses": int(np.sum(per_true > radius)),
        "false_alarms": int(np.sum(per_rec > radius)),
        "per_true": per_true,
        "per_recovered": per_rec,
    }


def _build_scene(cfg: ExperimentConfig) -> Scene:
    if cfg.scatterers is not None:
        from .scene import FrequencySet, ImagingGrid, linear_array

        iw_cross = cfg.resolved_iw_cross()
        iw_range = cfg.resolved_iw_range()
        grid = ImagingGrid(
            origin=np.array([-iw_cross / 2.0, 0.0,
                             cfg.standoff - iw_range / 2.0]),
            cross_extent=iw_cross,
            range_extent=iw_range,
            cross_count=cfg.grid_cross,
            range_count=cfg.grid_range,
        )
        scats = tuple(
            Scatterer(np.array([c, 0.0, z]), a) for c, z, a in cfg.scatterers
        )
        scene = Scene(
            linear_array(cfg.transducers, cfg.array_size), scats, grid,
            FrequencySet.centered(cfg.freq_count, cfg.fractional_bandwidth),
        )
    else:
        scene = random_scene(
            transducers=cfg.transducers,
            aperture=cfg.array_size,
            standoff=cfg.standoff,
            iw_cross=cfg.resolved_iw_cross(),
            iw_range=cfg.resolved_iw_range(),
            grid_cross=cfg.grid_cross,
            grid_range=cfg.grid_range,
            num_scatterers=cfg.num_scatterers,
            seed=cfg.scene_seed,
            freq_count=cfg.freq_count,
            fractional_bandwidth=cfg.fractional_bandwidth,
            min_separation=cfg.resolved_min_separation(),
            amplitude_range=(cfg.amplitude_min, cfg.amplitude_max),
            offgrid_shift=cfg.offgrid_shift,
        )
    if cfg.equalize_power:
        kappa = scene.frequencies.kappa_central
        scats = tuple(
            Scatterer(s.position, s.reflectivity /
                      np.linalg.norm(green_vector(s.position, kappa,
                                                  scene.array)) ** 2)
            for s in scene.scatterers
        )
        scene = Scene(scene.array, scats, scene.grid, scene.frequencies)
    return scene


def _illuminations(cfg: ExperimentConfig, scene: Scene,
                   n_support: int) -> list[Illumination]:
    n = scene.array.count
    if cfg.illum_policy == "point":
        count = cfg.illum_count or n
        return point_illuminations(n)[:count]
    if cfg.illum_policy == "optimal":
        count = cfg.illum_count or n_support
        return optimal_illuminations(response_matrix(scene, 0), count)
    count = cfg.illum_count or 12
    return random_illuminations(n, count, cfg.illum_seed)


def _rank_policy(cfg: ExperimentConfig, n_support: int, s: int) -> RankPolicy:
    if cfg.rank_policy == "known":
        known = cfg.rank_known if cfg.rank_known is not None else n_support
        if cfg.kind is DataMatrixKind.PD_BLOCK:
            known *= s  # each frequency block contributes a signal subspace
        return Known(known)
    if cfg.rank_policy == "threshold":
        return Threshold(cfg.rank_threshold)
    return Gap()


def _support_count(cfg: ExperimentConfig, rank_est: int, s: int,
                   n_true: int) -> int:
    if cfg.rank_policy == "known":
        return cfg.rank_known if cfg.rank_known is not None else n_true
    if cfg.kind is DataMatrixKind.PD_BLOCK:
        return max(1, rank_est // s)
    return rank_est


@dataclass
class _Assembled:
    """Noise-free data plus everything needed to re-assemble noisy copies."""

    data: DataMatrix
    family: ModelMatrixFamily
    scene: Scene | DelayScene
    true_support: tuple[int, ...]
    true_cells: np.ndarray
    gamma: float | None
    conjugate: bool
    illum_matrix: np.ndarray | None = None


def _assemble(cfg: ExperimentConfig) -> _Assembled:
    if cfg.kind is DataMatrixKind.PRONY_TOEPLITZ:
        scene1d = random_delay_scene(
            candidate_count=cfg.candidate_count,
            span=cfg.span,
            offset=cfg.offset,
            num_scatterers=cfg.delay_count,
            seed=cfg.delay_seed,
            on_grid=cfg.on_grid,
        )
        from .scene import FrequencySet

        freqs = FrequencySet.centered(cfg.freq_count, cfg.fractional_bandwidth)
        data, family = build_prony(scene1d, freqs)
        rho = discretize_delays(scene1d)
        cells = np.column_stack([
            (scene1d.true_delays - scene1d.candidate_delays[0])
            / (scene1d.spacing if np.isfinite(scene1d.spacing) else 1.0),
            np.zeros(scene1d.true_delays.size),
        ])
        return _Assembled(data, family, scene1d, rho.support, cells,
                          None, False)

    scene = _build_scene(cfg)
    rho = discretize_reflectivity(scene)
    true_cells = scene.grid.cell_coordinates(scene.scatterer_positions())
    conjugate_flag = {"auto": default_conjugation(cfg.kind),
                 "on": True, "off": False}[cfg.conjugate]

    if cfg.kind is DataMatrixKind.SINGLE_FREQ:
        illums = _illuminations(cfg, scene, rho.sparsity)
        data, family = build_single_freq(scene, illums)
        gamma = compute_gamma(family.parameter_matrix(), rho.support)
        f_mat = np.column_stack([f.vector for f in illums])
        return _Assembled(data, family, scene, rho.support, true_cells,
                          gamma, conjugate_flag, illum_matrix=f_mat)

    tensor = response_tensor(scene)
    if cfg.kind is DataMatrixKind.PC_STACK:
        data, family = build_pc(scene, tensor)
    elif cfg.kind is DataMatrixKind.PD_BLOCK:
        data = build_pd(scene, tensor)
        _, family = build_pc(scene, tensor)
    elif cfg.kind is DataMatrixKind.M_SINGLE:
        data = build_m_single(tensor.matrix(0),
                              Provenance(scene.content_hash()))
        _, family = build_single_freq(scene, point_illuminations(scene.array.count))
    elif cfg.kind is DataMatrixKind.MC_STACK:
        data = build_mc(scene, tensor)
        _, family = build_pc(scene, tensor)
    else:
        raise ConfigError(f"unhandled kind {cfg.kind}")
    return _Assembled(data, family, scene, rho.support, true_cells,
                      None, conjugate_flag)


def _noisy_entries(cfg: ExperimentConfig, asm: _Assembled,
                   seed: int) -> np.ndarray:
    """Re-assemble the data matrix with noise injected per ``noise_mode``."""
    if cfg.snr_db is None:
        return asm.data.entries
    scene = asm.scene

    if cfg.noise_mode == "data":
        sigma = noise_scale(asm.data.entries, cfg.snr_db)
        rng = np.random.default_rng(seed)
        return asm.data.entries + complex_gaussian(asm.data.shape, sigma, rng)

    if cfg.noise_mode == "entries":
        # fixed receiver-noise level calibrated on the response data itself
        assert isinstance(scene, Scene)
        rng = np.random.default_rng(seed)
        s = scene.frequencies.count
        noisy = []
        for l in range(s):
            p = response_matrix(scene, l)
            sigma = noise_scale(p, cfg.snr_db)
            noisy.append(p + complex_gaussian(p.shape, sigma, rng))
        if cfg.kind is DataMatrixKind.SINGLE_FREQ:
            return noisy[0] @ asm.illum_matrix
        if cfg.kind is DataMatrixKind.PC_STACK:
            return np.vstack([m.T for m in noisy])
        if cfg.kind is DataMatrixKind.PD_BLOCK:
            n = scene.array.count
            out = np.zeros((n * s, n * s), dtype=complex)
            for l, m in enumerate(noisy):
                out[l * n:(l + 1) * n, l * n:(l + 1) * n] = m
            return out
        if cfg.kind is DataMatrixKind.M_SINGLE:
            return noisy[0].conj().T @ noisy[0]
        if cfg.kind is DataMatrixKind.MC_STACK:
            return np.vstack([m.conj().T @ noisy[0] for m in noisy])
        raise ConfigError(f"entries noise unsupported for {cfg.kind}")

    # phaseless noise modes re-run the acquisition
    assert isinstance(scene, Scene)
    return _phaseless_entries(cfg, scene, seed)


def _phaseless_entries(cfg: ExperimentConfig, scene: Scene,
                       seed: int | None) -> np.ndarray:
    """Assemble M(w) or the frequency stack from (possibly noisy) intensities."""
    s = scene.frequencies.count
    overrides: list[np.ndarray | None] = [None] * s
    if cfg.snr_db is not None and cfg.noise_mode == "field" and seed is not None:
        rng = np.random.default_rng(seed)
        overrides = []
        for l in range(s):
            p = response_matrix(scene, l)
            sigma = noise_scale(p, cfg.snr_db)
            overrides.append(p + complex_gaussian(p.shape, sigma, rng))

    sets = []
    for l in range(s):
        iset = measure_intensities(scene, [], freq_index=l,
                                   pair_mode="reference",
                                   response_override=overrides[l])
        sets.append(iset)
    if cfg.snr_db is not None and cfg.noise_mode == "intensity" and seed is not None:
        sets = [add_intensity_noise(iset, cfg.snr_db, seed * 1000 + l)[0]
                for l, iset in enumerate(sets)]

    if cfg.kind is DataMatrixKind.M_SINGLE:
        return recover_interferometric(sets[0], freq_index=0)
    links = None
    for l in range(s):
        pair = None
        if overrides[0] is not None:
            pair = (overrides[l], overrides[0])
        part = measure_cross_links(scene, l, 0, response_pair=pair)
        links = part if links is None else links.merge(part)
    return assemble_mc_from_intensities(sets, links)


def _noise_descriptor(cfg: ExperimentConfig, seed: int) -> str:
    if cfg.snr_db is None:
        return "none"
    return f"{cfg.noise_mode}:snr={cfg.snr_db}dB:seed={seed}"


@dataclass(frozen=True)
class RunManifest:
    config_hash: str
    out_dir: Path
    metrics: tuple[MetricRecord, ...]
    files: tuple[str, ...]

    @property
    def exact_match_rate(self) -> float:
        return float(np.mean([m.exact_match for m in self.metrics]))

    @property
    def mean_cell_error(self) -> float:
        return float(np.mean([m.mean_cell_error for m in self.metrics]))


def run(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunManifest:
    """Execute one experiment and write its artifact directory."""
    out = Path(out_dir) if out_dir is not None else Path(cfg.directory)
    out.mkdir(parents=True, exist_ok=True)

    asm = _assemble(cfg)
    if cfg.phaseless and cfg.snr_db is None:
        # noise-free phaseless runs still image the recovered matrix
        assert isinstance(asm.scene, Scene)
        entries = _phaseless_entries(cfg, asm.scene, None)
        asm.data = DataMatrix(entries, cfg.kind, asm.data.provenance)

    seeds = cfg.noise_seeds if cfg.snr_db is not None else (cfg.noise_seeds[:1] or (0,))
    s = getattr(getattr(asm.scene, "frequencies", None), "count", cfg.freq_count)
    n_true = len(asm.true_support)

    records: list[MetricRecord] = []
    first_ps: Pseudospectrum | None = None
    for seed in seeds:
        entries = _noisy_entries(cfg, asm, seed)
        data = asm.data.with_noise(entries, _noise_descriptor(cfg, seed))
        decomp = decompose(data, _rank_policy(cfg, n_true, s))
        ps = pseudospectrum(decomp, asm.family, conjugate=asm.conjugate,
                            normalized_numerator=cfg.normalized_numerator)
        count = _support_count(cfg, decomp.rank, s, n_true)
        est = extract_support(ps, count)
        if first_ps is None:
            first_ps = ps
        grid_shape = asm.family.grid_shape
        rec_cells = np.array([
            (k % grid_shape[1], k // grid_shape[1]) for k in est.indices
        ], dtype=float)
        m = support_metrics(asm.true_cells, rec_cells,
                            set(asm.true_support), set(est.indices))
        records.append(MetricRecord(
            seed=seed,
            snr_db=cfg.snr_db,
            gamma=asm.gamma,
            rank_est=decomp.rank,
            exact_match=m["exact_match"],
            mean_cell_error=m["mean_cell_error"],
            max_cell_error=m["max_cell_error"],
            misses=m["misses"],
            false_alarms=m["false_alarms"],
        ))

    files = _write_outputs(cfg, asm, records, first_ps, out)
    config_text = cfg.canonical_text()
    manifest = RunManifest(
        config_hash=git_blob_sha1(config_text.encode()),
        out_dir=out,
        metrics=tuple(records),
        files=tuple(files),
    )
    _write_manifest(cfg, manifest, out)
    return manifest


def _write_outputs(cfg, asm, records, first_ps, out: Path) -> list[str]:
    files = []

    config_text = cfg.canonical_text()
    (out / "config.resolved.cfg").write_text(config_text)
    files.append("config.resolved.cfg")

    with open(out / "scene.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        if isinstance(asm.scene, Scene):
            writer.writerow(["cross", "range", "re", "im"])
            for sc in asm.scene.scatterers:
                writer.writerow([repr(float(sc.position[0])),
                                 repr(float(sc.position[2])),
                                 repr(sc.reflectivity.real),
                                 repr(sc.reflectivity.imag)])
        else:
            writer.writerow(["delay", "re", "im"])
            for y, r in zip(asm.scene.true_delays, asm.scene.reflectivities):
                writer.writerow([repr(float(y)), repr(r.real), repr(r.imag)])
    files.append("scene.csv")

    grid_shape = asm.family.grid_shape
    write_pgm16(first_ps.values.reshape(grid_shape), out / "pseudospectrum.pgm")
    files += ["pseudospectrum.pgm", "pseudospectrum.pgm.scale.txt"]
    write_pseudospectrum_csv(first_ps.values, out / "pseudospectrum.csv")
    files.append("pseudospectrum.csv")

    with open(out / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_FIELDS)
        for rec in records:
            writer.writerow([
                rec.seed,
                "" if rec.snr_db is None else repr(rec.snr_db),
                "" if rec.gamma is None else repr(rec.gamma),
                rec.rank_est,
                int(rec.exact_match),
                repr(rec.mean_cell_error),
                repr(rec.max_cell_error),
                rec.misses,
                rec.false_alarms,
            ])
    files.append("metrics.csv")
    return files


def _write_manifest(cfg: ExperimentConfig, manifest: RunManifest,
                    out: Path) -> None:
    buf = io.StringIO()
    buf.write("[run]\n")
    buf.write(f"tool = arraymusic {__version__}\n")
    buf.write(f"config_hash = {manifest.config_hash}\n")
    buf.write(f"kind = {cfg.kind.name}\n")
    buf.write(f"seeds = {' '.join(str(s) for s in cfg.noise_seeds)}\n\n")
    buf.write("[metrics]\n")
    buf.write(f"rows = {len(manifest.metrics)}\n")
    buf.write(f"exact_match_rate = {manifest.exact_match_rate!r}\n")
    buf.write(f"mean_cell_error = {manifest.mean_cell_error!r}\n\n")
    buf.write("[files]\n")
    for name in manifest.files:
        buf.write(f"{name} = {file_sha256(out / name)}\n")
    buf.write("\n")
    for line in cfg.canonical_text().splitlines():
        if line.startswith("["):
            buf.write(f"[config:{line[1:]}\n")
        else:
            buf.write(line + "\n")
    (out / "manifest.cfg").write_text(buf.getvalue())


def sweep(cfg: ExperimentConfig, param: str, values: list[str],
          out_dir: str | Path, threads: int = 1) -> Path:
    """Fan a config out over one parameter; jobs land in job_NN subdirectories."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for i, value in enumerate(values):
        derived = cfg.derived(param, value)
        jobs.append((i, value, derived, out / f"job_{i:02d}"))

    def _execute(job):
        i, value, derived, job_dir = job
        return i, value, run(derived, job_dir)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_execute, jobs))
    else:
        results = [_execute(j) for j in jobs]
    results.sort(key=lambda r: r[0])

    with open(out / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("job", "param", "value") + METRIC_FIELDS)
        for i, value, manifest in results:
            job_csv = out / f"job_{i:02d}" / "metrics.csv"
            with open(job_csv, newline="") as jfh:
                reader = csv.reader(jfh)
                next(reader)
                for row in reader:
                    writer.writerow([f"job_{i:02d}", param, value] + row)

    buf = io.StringIO()
    buf.write("[sweep]\n")
    buf.write(f"tool = arraymusic {__version__}\n")
    buf.write(f"param = {param}\n")
    buf.write(f"values = {','.join(values)}\n")
    buf.write(f"jobs = {' '.join(f'job_{i:02d}' for i, _, _ in results)}\n\n")
    buf.write("[files]\n")
    buf.write(f"metrics.csv = {file_sha256(out / 'metrics.csv')}\n\n")
    buf.write("[jobs]\n")
    for i, value, manifest in results:
        buf.write(f"job_{i:02d} = job_{i:02d}/manifest.cfg\n")
        buf.write(f"job_{i:02d}.value = {value}\n")
    (out / "manifest.cfg").write_text(buf.getvalue())
    return out
