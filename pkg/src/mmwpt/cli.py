"""Command-line entry point: ``mmwpt {fig1,fig2,selftest,eval}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .checks import run_selftest
from .config import load_config
from .harness import DEFAULT_ANTENNAS, DEFAULT_TRIALS, default_densities, evaluate_point, run_fig1, run_fig2
from .params import ConfigError

log = logging.getLogger("mmwpt")


def _floats(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _ints(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML file of flat parameter keys (defaults if omitted)")
    common.add_argument("--out", help="output path (stdout if omitted)")
    common.add_argument("--trials", type=int, default=None, help="Monte Carlo trials per point")
    common.add_argument("--seed", type=int, default=0, help="global seed")
    common.add_argument("--json", action="store_true", help="emit JSON instead of CSV/text")
    common.add_argument("-v", "--verbose", action="store_true")

    sweep = argparse.ArgumentParser(add_help=False)
    sweep.add_argument("--densities", type=_floats, default=None,
                       help="comma-separated BS densities per m^2 (default: 9-point log grid 1e-6..1e-2)")
    sweep.add_argument("--antennas", type=_ints, default=list(DEFAULT_ANTENNAS),
                       help="comma-separated BS antenna counts M (default: 16,64)")
    sweep.add_argument("--no-mc", action="store_true", help="analytic columns only")

    ap = argparse.ArgumentParser(prog="mmwpt", description=__doc__)
    ap.add_argument("--version", action="version", version=f"mmwpt {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("fig1", parents=[common, sweep], help="harvested / stable transmit power vs density")
    sub.add_parser("fig2", parents=[common, sweep], help="average uplink rate vs density")
    sub.add_parser("selftest", parents=[common], help="run the invariant suite at reduced trials")
    ev = sub.add_parser("eval", parents=[common], help="evaluate every engine at one parameter set")
    ev.add_argument("--no-mc", action="store_true", help="skip Monte Carlo")
    return ap


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "selftest":
        try:
            params = load_config(args.config)
        except ConfigError as exc:
            report = {"passed": False, "failures": ["config"], "error": str(exc), "checks": []}
            _emit(json.dumps(report, indent=2), args.out)
            return 2
        report = run_selftest(params, n_trials=args.trials or 20_000, seed=args.seed)
        _emit(json.dumps(report, indent=2), args.out)
        if not report["passed"]:
            print("selftest failed: " + ", ".join(report["failures"]), file=sys.stderr)
        return 0 if report["passed"] else 1

    try:
        params = load_config(args.config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "eval":
            res = evaluate_point(params, n_trials=args.trials or 20_000, seed=args.seed, mc=not args.no_mc)
            if args.json:
                _emit(json.dumps(res, indent=2, sort_keys=True), args.out)
            else:
                lines = [f"{k}: {v!r}" for k, v in res.items() if k != "params"]
                _emit("\n".join(lines), args.out)
            return 0

        run = run_fig1 if args.command == "fig1" else run_fig2
        result = run(params, args.densities or default_densities(), args.antennas, args.out,
                     n_trials=args.trials or DEFAULT_TRIALS, seed=args.seed,
                     mc=not args.no_mc, as_json=args.json)
        if not args.out:
            _emit(result.to_json() if args.json else result.to_csv(), None)
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - engine failure => nonzero exit
        log.debug("engine failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
