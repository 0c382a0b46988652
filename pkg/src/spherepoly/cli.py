"""Command line entry point: one subcommand per experiment kind plus ``run --config``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiments import KINDS, ExperimentConfig, load_config, run

__all__ = ["main", "build_parser"]


def _m_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, help="ambient dimension")
    p.add_argument("--m", type=_m_list, help="comma separated intensities, ascending")
    p.add_argument("--trials", type=int)
    p.add_argument("--p", type=float, help="failure probability")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--svg", action="store_true", default=None, help="emit figures for trial 0")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--c1", type=float)
    p.add_argument("--c2", type=float)
    p.add_argument("--cU", type=float)
    p.add_argument("--c6", type=float, help="net scale for lb-certify")
    p.add_argument("--objectives", type=int, help="sampled objectives for stitch")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spherepoly", description="Random spherical polytope experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment described by an INI file")
    r.add_argument("--config", type=Path, required=True)
    r.add_argument("--experiment", choices=KINDS, help="override the kind in the config")
    _common(r)
    for kind in KINDS:
        _common(sub.add_parser(kind, help=f"run the {kind} experiment"))
    return parser


_FIELDS = {"n": "n", "m": "m_list", "trials": "trials", "p": "p", "seed": "seed", "out": "out",
           "svg": "svg", "jobs": "jobs", "c1": "c1", "c2": "c2", "cU": "cU", "c6": "c6",
           "objectives": "objectives"}


def _overrides(args) -> dict:
    return {dst: getattr(args, src) for src, dst in _FIELDS.items() if getattr(args, src) is not None}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    kw = _overrides(args)
    if args.command == "run":
        if args.experiment:
            kw["kind"] = args.experiment
        cfg = load_config(args.config, **kw)
    else:
        cfg = ExperimentConfig(kind=args.command, **kw).validate()
    res = run(cfg)
    print(f"{cfg.kind}: {len(res.records)} records, {len(res.failures)} failed trials, "
          f"{res.violations} invariant violations -> {Path(cfg.out) / 'records.csv'}")
    for name, fit in res.fits.items():
        print(f"  fit {name}: slope={fit.slope:.4f} r2={fit.r2:.4f}")
    return 1 if res.violations else 0


if __name__ == "__main__":
    sys.exit(main())
