"""
Command line entry point: ``mobiletraps <command> --seed N [options]``.

Exit status: 0 success (or verdict passed), 1 verdict failed, 2 usage
error, 3 invalid parameters, 4 certification failure (a truncated domain
cannot meet its error budget).
"""
from __future__ import annotations

import argparse
import json
import sys

from .experiments import COMMANDS, ExperimentConfig, run, write_result
from .lattice_kernels import ModelParams
from .trap_field import OutOfWindowError
from .volterra_annealed import CertificationError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_PARAMS, EXIT_CERT = 0, 1, 2, 3, 4


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _tolerance(text):
    key, _, val = text.partition("=")
    if not key or not val:
        raise argparse.ArgumentTypeError("expected KEY=VALUE")
    return key, float(val)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mobiletraps",
                                 description="Random walk survival among moving Poisson traps.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON file; its entries override the flags")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--d", type=int, default=1)
    ap.add_argument("--kappa", type=float, default=0.0)
    ap.add_argument("--rho", type=float, default=1.0)
    ap.add_argument("--nu", type=float, default=1.0)
    ap.add_argument("--gamma", type=float, default=1.0, help="'inf' for hard traps")
    ap.add_argument("--gammas", type=_floats, help="comma-separated list (annealed-exact)")
    ap.add_argument("--horizons", type=_floats, help="comma-separated times")
    ap.add_argument("--h", type=float, help="time step")
    ap.add_argument("--box", dest="box_radius", type=int, help="box radius")
    ap.add_argument("--replicates", type=int, help="fields / instances")
    ap.add_argument("--paths", type=int, help="walker paths per field")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--steps", type=int, help="discrete steps n (pascal-sweep, range-sweep)")
    ap.add_argument("--qs", type=_floats, help="trapping probabilities (pascal-sweep)")
    ap.add_argument("--speeds", type=_floats, help="speeds (shape-profile)")
    ap.add_argument("--sample-paths", type=int, help="annealed-exact: continuous Pascal check on N paths")
    ap.add_argument("--tol", action="append", type=_tolerance, default=[], metavar="KEY=VALUE")
    ap.add_argument("--out", help="CSV output path (a .meta.json sidecar is written next to it)")
    return ap


_PARAM_KEYS = ("d", "kappa", "rho", "nu", "gamma")


def config_from_args(args) -> ExperimentConfig:
    values = vars(args).copy()
    values["tolerances"] = dict(values.pop("tol"))
    path = values.pop("config")
    if path:
        with open(path) as fh:
            override = json.load(fh)
        params = override.pop("params", {})
        values.update({k: v for k, v in params.items()})
        if "tolerances" in override:
            values["tolerances"].update(override.pop("tolerances"))
        values.update(override)
    p = {k: values.pop(k) for k in _PARAM_KEYS}
    p["gamma"] = float(p["gamma"])
    output = values.pop("out", None) or values.pop("output", None)
    return ExperimentConfig(params=ModelParams(**p), output=output, **values)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    if args.seed is None and not args.config:
        print("error: --seed is required (no wall-clock default)", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = config_from_args(args)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, TypeError) as e:
        print(f"invalid parameters: {e}", file=sys.stderr)
        return EXIT_PARAMS
    try:
        rec = run(cfg)
    except (CertificationError, OutOfWindowError) as e:
        print(f"certification error: {e}", file=sys.stderr)
        return EXIT_CERT
    except ValueError as e:
        print(f"invalid parameters: {e}", file=sys.stderr)
        return EXIT_PARAMS
    if cfg.output:
        write_result(rec, cfg.output)
    else:
        sys.stdout.write(rec.csv_text())
    for note in rec.notes:
        print(f"# {note}", file=sys.stderr)
    if rec.verdict is not None:
        print(f"# verdict: {'pass' if rec.verdict else 'FAIL'}", file=sys.stderr)
    return EXIT_FAIL if rec.verdict is False else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
