"""Command-line front end: ``paradiag {run,stability-region,roundoff-sweep,list-presets}``.

Exit status is 0 on success, 1 for configuration or output-path problems and
2 for numerical failures (divergence, singular systems, roundoff guard).  The
failing stage is named on standard error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time

from .errors import ConfigError, ParadiagError
from .experiments import (
    OUTPUT_ENV,
    PRESETS,
    ExperimentConfig,
    load_config,
    parse_overrides,
    preset,
    roundoff_sweep,
    run,
    stability_region_scan,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paradiag", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--preset", help="start from a named preset (see list-presets)")
        p.add_argument("--config", help="key = value config file applied after the preset")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a single config key (repeatable)")
        p.add_argument("--alpha", type=float, action="append",
                       help="alpha value(s); replaces the configured list (repeatable)")
        p.add_argument("--workers", type=int, help="frequency-solve threads (0 = auto)")
        p.add_argument("--output", help=f"output directory (overrides ${OUTPUT_ENV})")
        p.add_argument("--no-plots", action="store_true", help="skip SVG output")
        p.add_argument("--print-config", action="store_true",
                       help="print the resolved config and exit")

    common(sub.add_parser("run", help="run the preconditioned iteration, write convergence.csv"))
    common(sub.add_parser("stability-region", help="scan |R(z)| or the root modulus, write region.csv"))
    common(sub.add_parser("roundoff-sweep", help="stagnation level versus alpha, write floors.csv"))
    sub.add_parser("list-presets", help="show the shipped presets")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = preset(args.preset) if args.preset else ExperimentConfig()
    if args.config:
        try:
            cfg = load_config(args.config, cfg)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}", key="config") from exc
    changes = parse_overrides(args.set)
    if args.alpha:
        changes["alpha"] = tuple(args.alpha)
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.no_plots:
        changes["emit_plots"] = False
    if args.output:
        changes["outputs"] = args.output
    elif os.environ.get(OUTPUT_ENV):
        changes["outputs"] = os.environ[OUTPUT_ENV]
    return cfg.replace(**changes) if changes else cfg


def _report_run(result, elapsed):
    for h in result.histories:
        ratios = h.ratios("transformed_err_inf" if not math.isnan(h.transformed_err_inf[0]) else "err_inf")
        first = ", ".join(f"{x:.4f}" for x in ratios[:4])
        print(f"alpha={h.alpha:g}: {h.iterations} sweeps ({h.stop_reason}), "
              f"bound {h.bound:.4f}, first ratios [{first}], floor {h.floor():.3e}")
    print(f"wrote {', '.join(str(f) for f in result.files)} in {elapsed:.2f} s")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "list-presets":
        for name, (desc, _) in PRESETS.items():
            print(f"{name:14s} {desc}")
        return 0

    stage = "config"
    try:
        cfg = resolve_config(args)
        if args.print_config:
            sys.stdout.write(cfg.serialize())
            return 0
        stage = args.command
        start = time.perf_counter()
        if args.command == "run":
            _report_run(run(cfg), time.perf_counter() - start)
        elif args.command == "stability-region":
            grid, spectrum = stability_region_scan(cfg)
            worst = max((m for _, _, m in spectrum), default=float("nan"))
            print(f"{len(grid)} samples; max modulus over dt*spectrum {worst:.12g}; "
                  f"wrote {cfg.outputs}/region.csv")
        else:
            rows, exponent = roundoff_sweep(cfg)
            for a, f in rows:
                print(f"alpha={a:g}: floor {f:.3e}")
            print("fitted exponent: " + ("n/a" if exponent is None else f"{exponent:.3f}"))
    except ConfigError as exc:
        print(f"paradiag: {stage} failed: {exc}", file=sys.stderr)
        return 1
    except ParadiagError as exc:
        print(f"paradiag: {stage} failed (numerical): {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
