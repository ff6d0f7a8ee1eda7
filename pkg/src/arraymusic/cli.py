"""Command-line interface.

    arraymusic run (CONFIG | --preset NAME) [--out DIR] [--threads N]
    arraymusic sweep (CONFIG | --preset NAME) --param section.key \
        --values v1,v2,... [--out DIR] [--threads N]

Exit codes: 0 success, 2 configuration error, 3 computation error,
1 unexpected failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import PRESETS, load_config, load_preset
from .errors import ArrayMusicError, ConfigError
from .runner import run, sweep


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("config", nargs="?", help="path to an INI config file")
    sub.add_argument("--preset", choices=PRESETS,
                     help="use a packaged preset instead of a config file")
    sub.add_argument("--out", help="output directory (overrides the config)")
    sub.add_argument("--threads", type=int, default=1,
                     help="worker threads for sweeps")


def _load(args) -> "ExperimentConfig":
    if args.preset and args.config:
        raise ConfigError("give either a config file or --preset, not both")
    if args.preset:
        return load_preset(args.preset)
    if not args.config:
        raise ConfigError("missing config file (or --preset)")
    return load_config(args.config)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="arraymusic",
        description="array-imaging experiments with MUSIC support recovery",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    run_p = subs.add_parser("run", help="execute one experiment")
    _add_common(run_p)

    sweep_p = subs.add_parser("sweep", help="fan one parameter over values")
    _add_common(sweep_p)
    sweep_p.add_argument("--param", required=True,
                         help="dotted parameter name, e.g. scene.standoff")
    sweep_p.add_argument("--values", required=True,
                         help="comma-separated parameter values")

    args = parser.parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "run":
            manifest = run(cfg, args.out)
            print(f"run complete: {manifest.out_dir} "
                  f"(exact-match rate {manifest.exact_match_rate:.2f})")
        else:
            values = [v for v in args.values.split(",") if v]
            out = args.out or cfg.directory
            sweep_dir = sweep(cfg, args.param, values, out,
                              threads=max(1, args.threads))
            print(f"sweep complete: {sweep_dir} ({len(values)} jobs)")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ArrayMusicError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
