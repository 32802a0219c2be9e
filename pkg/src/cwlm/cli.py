"""Command-line front end.

    cwlm distribution --config scenario.yaml --out results/
    cwlm sweep        --config scenario.yaml --out results/ [--quantity mean]
    cwlm validate     --config scenario.yaml --out results/ [--strict]
    cwlm trajectories --config scenario.yaml --out results/ [--seed N --threads N]
    cwlm preset fig3  --out results/ [--t-a 92] [--show]

Exit codes: 0 success, 2 config error, 3 physics validation failure under
--strict, 4 numerical-quality failure (normalization or decay checks).
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from . import __version__
from .config import dumps_config, load_config, parse_config
from .errors import ConfigError, CWLMError, PhysicalityViolation, PhysicsWarning
from .presets import PRESETS, T_A, preset
from .runner import (
    RunResult,
    run_distribution,
    run_fig1_extras,
    run_sweep,
    run_trajectories,
    run_validate,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_NUMERICS = 4


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cwlm", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, type=Path, help="scenario file (YAML/JSON)")
        p.add_argument("--out", type=Path, default=Path("cwlm_out"), help="output directory")
        p.add_argument("--strict", action="store_true",
                       help="treat physicality violations as errors")
        p.add_argument("--seed", type=int, default=None, help="override the trajectory seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for trajectories")
        return p

    common(sub.add_parser("distribution", help="conditioned output distributions per T"))
    sw = common(sub.add_parser("sweep", help="a quantity tabulated against T"))
    sw.add_argument("--quantity", choices=("mean", "cumulants", "difference_max"), default=None)
    common(sub.add_parser("validate", help="inequality margins and derived parameters"))
    common(sub.add_parser("trajectories", help="Monte Carlo unraveling vs the CF pipeline"))
    pr = common(sub.add_parser("preset", help="run a figure preset"), config=False)
    pr.add_argument("name", choices=sorted(PRESETS))
    pr.add_argument("--t-a", type=float, default=T_A, dest="t_a",
                    help="acquisition time reading in us for the experimental presets")
    pr.add_argument("--show", action="store_true",
                    help="print the preset configs as YAML and exit")
    return ap


def _with_seed(cfg, seed):
    if seed is None or cfg.trajectories is None:
        return cfg
    cfg.trajectories["seed"] = seed
    cfg.echo["trajectories"]["seed"] = seed
    return cfg


def _report(res: RunResult, out) -> None:
    for f in res.files:
        print(f, file=out)


def _status(results: list[RunResult]) -> int:
    return EXIT_NUMERICS if any(r.degraded for r in results) else EXIT_OK


def _run_preset(args) -> list[RunResult]:
    dists, sweeps = preset(args.name, args.t_a)
    if args.show:
        print(dumps_config({"distribution": dists, "sweep": sweeps}), end="")
        return []
    results = []
    for raw in dists:
        cfg = parse_config(raw)
        results.append(run_validate(cfg, args.out))
        res = run_distribution(cfg, args.out, strict=args.strict)
        if args.name == "fig1":
            res.files += run_fig1_extras(cfg, args.out)
        results.append(res)
    for raw in sweeps:
        cfg = parse_config(raw)
        results.append(run_sweep(cfg, args.out, strict=args.strict))
    return results


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default", PhysicsWarning)
            if args.command == "preset":
                results = _run_preset(args)
            else:
                cfg = _with_seed(load_config(args.config), args.seed)
                if args.command == "distribution":
                    results = [run_distribution(cfg, args.out, strict=args.strict)]
                elif args.command == "sweep":
                    results = [run_sweep(cfg, args.out, args.quantity, strict=args.strict)]
                elif args.command == "validate":
                    res = run_validate(cfg, args.out)
                    results = [res]
                    if args.strict and not res.physics_ok:
                        _report(res, sys.stdout)
                        print("physics validation failed", file=sys.stderr)
                        return EXIT_PHYSICS
                else:
                    results = [run_trajectories(cfg, args.out, strict=args.strict,
                                                threads=args.threads)]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhysicalityViolation as exc:
        print(f"physics validation failed: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except (CWLMError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICS if isinstance(exc, CWLMError) else EXIT_CONFIG
    for r in results:
        _report(r, sys.stdout)
    code = _status(results)
    if code:
        print("numerical-quality checks failed; outputs marked degraded", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
