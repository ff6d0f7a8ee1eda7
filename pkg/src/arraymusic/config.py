"""Experiment configuration: INI-style key/value sections, validated exhaustively.

Schema (all lengths in lambda_0 units)::

    [scene]                # 2D array imaging kinds
    transducers   = 81
    array_size    = 500.0
    standoff      = 10000.0
    iw_cross      = 100.0   # or "auto" = 5 * standoff / array_size
    iw_range      = 100.0   # or "auto" = 5 / fractional_bandwidth
    grid_cross    = 51
    grid_range    = 51
    scatterers    =         # optional explicit rows: cross range re im
        -10.0 9990.0 1.0 0.0
    scene_seed    = 7       # random scene when no explicit scatterers
    num_scatterers = 3
    min_separation = 25.0   # or "auto" = cross-range resolution
    amplitude_min  = 0.5
    amplitude_max  = 2.0
    equalize_power = false  # rescale reflectivities by 1/||g||^2
    offgrid_shift  = 0.0    # fraction of a cell, both axes (0.5 = half cell)

    [scene1d]              # PRONY_TOEPLITZ only
    candidate_count = 101
    span            = 200.0
    offset          = 100.0
    num_scatterers  = 3
    scene_seed      = 1
    on_grid         = true

    [frequencies]
    count                = 12
    fractional_bandwidth = 0.05

    [data]
    kind       = MC_STACK   # SINGLE_FREQ PRONY_TOEPLITZ PC_STACK PD_BLOCK M_SINGLE MC_STACK
    phaseless  = false      # M_SINGLE / MC_STACK: assemble from intensities
    noise_mode = data       # data | entries | intensity | field

    [illumination]         # SINGLE_FREQ only
    policy = point          # point | optimal | random
    count  = 81
    seed   = 0

    [noise]
    snr_db =                # empty = noise-free
    seeds  = 0

    [rank]
    policy    = known       # known | threshold | gap
    known     = auto        # auto = number of scatterers
    threshold = 1e-8

    [music]
    conjugate            = auto   # auto | on | off
    normalized_numerator = false

    [output]
    directory = out

Unknown sections or keys are rejected; every value is validated with a
``section.key`` diagnostic before any computation starts.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .structures import DataMatrixKind

PRESETS = ("fig2", "fig3", "fig4", "fig5")

_SCHEMA: dict[str, tuple[str, ...]] = {
    "scene": ("transducers", "array_size", "standoff", "iw_cross", "iw_range",
              "grid_cross", "grid_range", "scatterers", "scene_seed",
              "num_scatterers", "min_separation", "amplitude_min",
              "amplitude_max", "equalize_power", "offgrid_shift"),
    "scene1d": ("candidate_count", "span", "offset", "num_scatterers",
                "scene_seed", "on_grid"),
    "frequencies": ("count", "fractional_bandwidth"),
    "data": ("kind", "phaseless", "noise_mode"),
    "illumination": ("policy", "count", "seed"),
    "noise": ("snr_db", "seeds"),
    "rank": ("policy", "known", "threshold"),
    "music": ("conjugate", "normalized_numerator"),
    "output": ("directory",),
}


@dataclass(frozen=True)
class ExperimentConfig:
    # scene ("auto" values resolve against array_size/standoff/bandwidth
    # when the scene is built, so sweeps over those fields re-derive them)
    transducers: int = 81
    array_size: float = 500.0
    standoff: float = 10000.0
    iw_cross: float | str = 100.0
    iw_range: float | str = 100.0
    grid_cross: int = 51
    grid_range: int = 51
    scatterers: tuple[tuple[float, float, complex], ...] | None = None
    scene_seed: int = 0
    num_scatterers: int = 3
    min_separation: float | str | None = None
    amplitude_min: float = 0.5
    amplitude_max: float = 2.0
    equalize_power: bool = False
    offgrid_shift: float = 0.0
    # scene1d
    candidate_count: int = 101
    span: float = 200.0
    offset: float = 100.0
    delay_count: int = 3
    delay_seed: int = 1
    on_grid: bool = True
    # frequencies
    freq_count: int = 1
    fractional_bandwidth: float = 0.0
    # data
    kind: DataMatrixKind = DataMatrixKind.SINGLE_FREQ
    phaseless: bool = False
    noise_mode: str = "data"
    # illumination
    illum_policy: str = "point"
    illum_count: int | None = None
    illum_seed: int = 0
    # noise
    snr_db: float | None = None
    noise_seeds: tuple[int, ...] = (0,)
    # rank
    rank_policy: str = "known"
    rank_known: int | None = None  # None = number of scatterers
    rank_threshold: float = 1e-8
    # music
    conjugate: str = "auto"
    normalized_numerator: bool = False
    # output
    directory: str = "out"

    def resolved_iw_cross(self) -> float:
        if self.iw_cross == "auto":
            return 5.0 * self.standoff / self.array_size
        return float(self.iw_cross)

    def resolved_iw_range(self) -> float:
        if self.iw_range == "auto":
            if self.fractional_bandwidth <= 0:
                raise ConfigError(
                    "scene.iw_range: auto needs a positive fractional_bandwidth")
            return 5.0 / self.fractional_bandwidth
        return float(self.iw_range)

    def resolved_min_separation(self) -> float:
        if self.min_separation is None:
            return 0.0
        if self.min_separation == "auto":
            return self.standoff / self.array_size
        return float(self.min_separation)

    def derived(self, dotted_key: str, raw_value: str) -> "ExperimentConfig":
        """New config with one ``section.key`` overridden (sweep support)."""
        parser = _to_parser(self)
        try:
            section, key = dotted_key.split(".", 1)
        except ValueError:
            raise ConfigError(f"sweep parameter {dotted_key!r} must be section.key")
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(f"{dotted_key}: unknown configuration field")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, raw_value)
        return _from_parser(parser)

    def canonical_text(self) -> str:
        """Deterministic INI rendering (hash input and manifest echo)."""
        parser = _to_parser(self)
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()


def _fail(section: str, key: str, message: str) -> ConfigError:
    return ConfigError(f"{section}.{key}: {message}")


def _get(parser, section, key, cast, default, empty_is_default=True):
    if not parser.has_section(section) or not parser.has_option(section, key):
        return default
    raw = parser.get(section, key).strip()
    if raw == "" and empty_is_default:
        return default
    try:
        return cast(raw)
    except ConfigError:
        raise
    except Exception as exc:
        raise _fail(section, key, f"invalid value {raw!r} ({exc})") from None


def _bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected a boolean")


def _seeds(raw: str) -> tuple[int, ...]:
    parts = raw.replace(",", " ").split()
    if not parts:
        raise ValueError("expected at least one seed")
    return tuple(int(p) for p in parts)


def _scatterer_rows(raw: str) -> tuple[tuple[float, float, complex], ...]:
    rows = []
    for line in raw.splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"row {line!r} needs: cross range re im")
        cross, range_z, re, im = (float(p) for p in parts)
        rows.append((cross, range_z, complex(re, im)))
    if not rows:
        raise ValueError("no scatterer rows")
    return tuple(rows)


def _kind(raw: str) -> DataMatrixKind:
    try:
        return DataMatrixKind[raw.strip().upper()]
    except KeyError:
        names = ", ".join(k.name for k in DataMatrixKind)
        raise ValueError(f"expected one of {names}")


def _choice(*options: str):
    def cast(raw: str) -> str:
        lowered = raw.strip().lower()
        if lowered not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return lowered
    return cast


def _from_parser(parser: configparser.ConfigParser) -> ExperimentConfig:
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser.options(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}: unknown field")

    kind = _get(parser, "data", "kind", _kind, DataMatrixKind.SINGLE_FREQ)
    freq_count = _get(parser, "frequencies", "count", int, 1)
    fb = _get(parser, "frequencies", "fractional_bandwidth", float, 0.0)
    if freq_count < 1:
        raise _fail("frequencies", "count", "must be >= 1")
    if freq_count > 1 and fb <= 0:
        raise _fail("frequencies", "fractional_bandwidth",
                    "must be positive for more than one frequency")

    array_size = _get(parser, "scene", "array_size", float, 500.0)
    standoff = _get(parser, "scene", "standoff", float, 10000.0)
    if array_size <= 0:
        raise _fail("scene", "array_size", "must be positive")
    if standoff <= 0:
        raise _fail("scene", "standoff", "must be positive")

    def _auto_or_float(raw: str) -> float | str:
        if raw.strip().lower() == "auto":
            return "auto"
        return float(raw)

    cfg = ExperimentConfig(
        transducers=_get(parser, "scene", "transducers", int, 81),
        array_size=array_size,
        standoff=standoff,
        iw_cross=_get(parser, "scene", "iw_cross", _auto_or_float, 100.0),
        iw_range=_get(parser, "scene", "iw_range", _auto_or_float, 100.0),
        grid_cross=_get(parser, "scene", "grid_cross", int, 51),
        grid_range=_get(parser, "scene", "grid_range", int, 51),
        scatterers=_get(parser, "scene", "scatterers", _scatterer_rows, None,
                        empty_is_default=False),
        scene_seed=_get(parser, "scene", "scene_seed", int, 0),
        num_scatterers=_get(parser, "scene", "num_scatterers", int, 3),
        min_separation=_get(parser, "scene", "min_separation", _auto_or_float,
                            None),
        amplitude_min=_get(parser, "scene", "amplitude_min", float, 0.5),
        amplitude_max=_get(parser, "scene", "amplitude_max", float, 2.0),
        equalize_power=_get(parser, "scene", "equalize_power", _bool, False),
        offgrid_shift=_get(parser, "scene", "offgrid_shift", float, 0.0),
        candidate_count=_get(parser, "scene1d", "candidate_count", int, 101),
        span=_get(parser, "scene1d", "span", float, 200.0),
        offset=_get(parser, "scene1d", "offset", float, 100.0),
        delay_count=_get(parser, "scene1d", "num_scatterers", int, 3),
        delay_seed=_get(parser, "scene1d", "scene_seed", int, 1),
        on_grid=_get(parser, "scene1d", "on_grid", _bool, True),
        freq_count=freq_count,
        fractional_bandwidth=fb,
        kind=kind,
        phaseless=_get(parser, "data", "phaseless", _bool, False),
        noise_mode=_get(parser, "data", "noise_mode",
                        _choice("data", "entries", "intensity", "field"), "data"),
        illum_policy=_get(parser, "illumination", "policy",
                          _choice("point", "optimal", "random"), "point"),
        illum_count=_get(parser, "illumination", "count", int, None),
        illum_seed=_get(parser, "illumination", "seed", int, 0),
        snr_db=_get(parser, "noise", "snr_db", float, None),
        noise_seeds=_get(parser, "noise", "seeds", _seeds, (0,)),
        rank_policy=_get(parser, "rank", "policy",
                         _choice("known", "threshold", "gap"), "known"),
        rank_known=_get(parser, "rank", "known",
                        lambda r: None if r.lower() == "auto" else int(r), None),
        rank_threshold=_get(parser, "rank", "threshold", float, 1e-8),
        conjugate=_get(parser, "music", "conjugate",
                       _choice("auto", "on", "off"), "auto"),
        normalized_numerator=_get(parser, "music", "normalized_numerator",
                                  _bool, False),
        directory=_get(parser, "output", "directory", str, "out"),
    )
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.kind is not DataMatrixKind.PRONY_TOEPLITZ:
        # force early resolution errors (e.g. auto window without bandwidth)
        cfg.resolved_iw_cross()
        cfg.resolved_iw_range()
        cfg.resolved_min_separation()
    if cfg.kind is DataMatrixKind.PRONY_TOEPLITZ:
        if cfg.freq_count % 2 == 0:
            raise _fail("frequencies", "count",
                        "PRONY_TOEPLITZ needs an odd frequency count")
        if cfg.candidate_count < 1:
            raise _fail("scene1d", "candidate_count", "must be >= 1")
        if cfg.delay_count < 1:
            raise _fail("scene1d", "num_scatterers", "must be >= 1")
    else:
        if cfg.transducers < 1:
            raise _fail("scene", "transducers", "must be >= 1")
        if cfg.grid_cross < 1 or cfg.grid_range < 1:
            raise _fail("scene", "grid_cross", "grid counts must be >= 1")
        if cfg.scatterers is None and cfg.num_scatterers < 1:
            raise _fail("scene", "num_scatterers", "must be >= 1")
        if not 0.0 <= cfg.offgrid_shift <= 0.5:
            raise _fail("scene", "offgrid_shift", "must lie in [0, 0.5]")
    if cfg.kind in (DataMatrixKind.SINGLE_FREQ, DataMatrixKind.M_SINGLE) \
            and cfg.freq_count != 1:
        raise _fail("frequencies", "count", f"{cfg.kind.name} needs count = 1")
    if cfg.phaseless and cfg.kind not in (DataMatrixKind.M_SINGLE,
                                          DataMatrixKind.MC_STACK):
        raise _fail("data", "phaseless",
                    "phaseless assembly applies to M_SINGLE / MC_STACK only")
    if cfg.noise_mode in ("intensity", "field") and not cfg.phaseless:
        raise _fail("data", "noise_mode",
                    f"{cfg.noise_mode!r} noise needs phaseless = true")
    if cfg.noise_mode == "entries" and cfg.kind is DataMatrixKind.PRONY_TOEPLITZ:
        raise _fail("data", "noise_mode",
                    "entries noise is undefined for the 1D problem")
    if cfg.illum_policy == "random" and cfg.kind is DataMatrixKind.SINGLE_FREQ \
            and (cfg.illum_count or 1) < 1:
        raise _fail("illumination", "count", "must be >= 1")
    if cfg.rank_policy == "threshold" and not 0 < cfg.rank_threshold < 1:
        raise _fail("rank", "threshold", "must lie in (0, 1)")


def _to_parser(cfg: ExperimentConfig) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    scat = ""
    if cfg.scatterers is not None:
        scat = "\n" + "\n".join(
            f"{c} {z} {a.real} {a.imag}" for c, z, a in cfg.scatterers
        )
    def render(value) -> str:
        return value if isinstance(value, str) else repr(value)

    parser["scene"] = {
        "transducers": str(cfg.transducers),
        "array_size": repr(cfg.array_size),
        "standoff": repr(cfg.standoff),
        "iw_cross": render(cfg.iw_cross),
        "iw_range": render(cfg.iw_range),
        "grid_cross": str(cfg.grid_cross),
        "grid_range": str(cfg.grid_range),
        "scene_seed": str(cfg.scene_seed),
        "num_scatterers": str(cfg.num_scatterers),
        "amplitude_min": repr(cfg.amplitude_min),
        "amplitude_max": repr(cfg.amplitude_max),
        "equalize_power": str(cfg.equalize_power).lower(),
        "offgrid_shift": repr(cfg.offgrid_shift),
    }
    if cfg.min_separation is not None:
        parser["scene"]["min_separation"] = render(cfg.min_separation)
    if scat:
        parser["scene"]["scatterers"] = scat
    parser["scene1d"] = {
        "candidate_count": str(cfg.candidate_count),
        "span": repr(cfg.span),
        "offset": repr(cfg.offset),
        "num_scatterers": str(cfg.delay_count),
        "scene_seed": str(cfg.delay_seed),
        "on_grid": str(cfg.on_grid).lower(),
    }
    parser["frequencies"] = {
        "count": str(cfg.freq_count),
        "fractional_bandwidth": repr(cfg.fractional_bandwidth),
    }
    parser["data"] = {
        "kind": cfg.kind.name,
        "phaseless": str(cfg.phaseless).lower(),
        "noise_mode": cfg.noise_mode,
    }
    parser["illumination"] = {
        "policy": cfg.illum_policy,
        "seed": str(cfg.illum_seed),
    }
    if cfg.illum_count is not None:
        parser["illumination"]["count"] = str(cfg.illum_count)
    parser["noise"] = {
        "snr_db": "" if cfg.snr_db is None else repr(cfg.snr_db),
        "seeds": " ".join(str(s) for s in cfg.noise_seeds),
    }
    parser["rank"] = {
        "policy": cfg.rank_policy,
        "known": "auto" if cfg.rank_known is None else str(cfg.rank_known),
        "threshold": repr(cfg.rank_threshold),
    }
    parser["music"] = {
        "conjugate": cfg.conjugate,
        "normalized_numerator": str(cfg.normalized_numerator).lower(),
    }
    parser["output"] = {"directory": cfg.directory}
    return parser


def parse_config_text(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    return _from_parser(parser)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    return parse_config_text(path.read_text())


def load_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("arraymusic.presets").joinpath(f"{name}.cfg").read_text()
    return parse_config_text(text)
