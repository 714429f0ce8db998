"""Command line interface.

Subcommands::

    fanocal simulate    --config CFG --out DIR [--seed N]
    fanocal calibrate   --dark DARK.shots [--config CFG] [--ols] --out DIR SHOTS...
    fanocal reconstruct REPORT [--eta-max X] [--fixed-iters N] [--absolute-eta] --out DIR
    fanocal pipeline    --config CFG --out DIR [--seed N] [--ols] [--fixed-iters N] [--absolute-eta]
    fanocal theory      FAMILY [PARAM=VALUE ...] [--n-max N]

Exit status: 0 success, 1 usage or configuration error, 2 numerical
failure (fit, reconstruction, truncation), 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config
from .errors import ConfigError, FanocalError, NumericalError
from .io import ReportFile, read_shot_file, write_shot_file
from .pipeline import (ReconstructionInput, calibrate, calibration_to_report, reconstruct,
                       reconstruction_to_report, run_pipeline, simulate_experiment)
from .states import auto_nmax, make_state, pmf_values

log = logging.getLogger("fanocal")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _override(config: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "ols", False):
        changes["ols"] = True
    if getattr(args, "fixed_iters", None) is not None:
        changes["fixed_iters"] = args.fixed_iters
    if getattr(args, "absolute_eta", False):
        changes["absolute_eta"] = True
    if getattr(args, "max_iters", None) is not None:
        changes["max_iters"] = args.max_iters
    return dataclasses.replace(config, **changes) if changes else config


def cmd_simulate(args) -> int:
    config = _override(load_config(args.config), args)
    out = _out_dir(args.out)
    dark, series = simulate_experiment(config)
    write_shot_file(out / "dark.shots", dark)
    for s in series:
        write_shot_file(out / f"{s.setting_id}.shots", s)
    print(f"wrote {len(series)} setting files and dark.shots to {out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    if not args.shots:
        raise UsageError("calibrate: at least one shot file is required")
    config = load_config(args.config) if args.config else None
    dark = read_shot_file(args.dark)
    if not dark.is_dark:
        raise ConfigError(f"{args.dark} is not marked as a dark run", "--dark")
    series = [read_shot_file(p) for p in args.shots]
    cal = calibrate(series, dark,
                    state=None if config is None else config.state,
                    weighted=not args.ols,
                    eta_max=None if config is None else config.eta_max)
    out = _out_dir(args.out)
    rep = calibration_to_report(cal)
    rep.header = {"kind": "calibration", **rep.header}
    rep.write(out / "calibration.report")
    print(f"gamma={cal.gamma:.6g} V slope={cal.fit.slope:.6g} "
          f"(+/- {cal.fit.slope_se:.2g}) -> {out / 'calibration.report'}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    rep = ReportFile.read(args.report)
    inp = ReconstructionInput.from_report(rep)
    max_iters = args.max_iters if args.max_iters is not None else None
    kwargs = {} if max_iters is None else {"max_iters": max_iters}
    rr = reconstruct(inp, args.eta_max, relative=not args.absolute_eta,
                     fixed_iters=args.fixed_iters, **kwargs)
    out_rep = ReportFile()
    out_rep.set("kind", "reconstruction")
    out_rep.set("source", Path(args.report).name)
    out_rep.set("gamma", inp.gamma)
    if inp.state is not None:
        for k, v in rep.header.items():
            if k.startswith("state."):
                out_rep.header[k] = v
    reconstruction_to_report(rr, out_rep)
    out = _out_dir(args.out)
    out_rep.write(out / "reconstruction.report")
    msg = (f"iterations={rr.result.iterations} mean={rr.result.achieved_mean:.4g} "
           f"(target {rr.result.target_mean:.4g})")
    if rr.fidelity is not None:
        msg += f" fidelity={rr.fidelity:.5f}"
    print(msg + f" -> {out / 'reconstruction.report'}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    config = _override(load_config(args.config), args)
    run = run_pipeline(config)
    out = _out_dir(args.out)
    run.to_report().write(out / "pipeline.report")
    msg = f"gamma={run.calibration.gamma:.6g} slope={run.calibration.fit.slope:.6g}"
    if run.reconstruction is not None and run.reconstruction.fidelity is not None:
        msg += f" reconstruction fidelity={run.reconstruction.fidelity:.5f}"
    print(msg + f" -> {out / 'pipeline.report'}")
    return EXIT_OK


def cmd_theory(args) -> int:
    params = {}
    for item in args.params:
        if "=" not in item:
            raise UsageError(f"theory: expected PARAM=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        try:
            params[k] = float(v)
        except ValueError:
            raise ConfigError(f"cannot parse {v!r}", k) from None
    try:
        model = make_state(args.family, **params)
    except ValueError as exc:
        raise ConfigError(str(exc), "state") from None
    n_max = auto_nmax(model) if args.n_max is None else args.n_max
    for n, p in enumerate(pmf_values(model, n_max)):
        print(f"{n} {float(p)!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fanocal", description="Fano-factor self-calibration of linear "
                "photodetectors and photon-statistics reconstruction.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="write synthetic shot files")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("calibrate", help="fit the Fano line and rebin photoelectrons")
    s.add_argument("shots", nargs="*")
    s.add_argument("--dark", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--ols", action="store_true", help="ordinary instead of weighted fit")
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("reconstruct", help="on/off ML reconstruction from a calibration report")
    s.add_argument("report")
    s.add_argument("--eta-max", type=float)
    s.add_argument("--out", required=True)
    s.add_argument("--fixed-iters", type=int)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--absolute-eta", action="store_true")
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("pipeline", help="simulate, calibrate and reconstruct in one go")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--ols", action="store_true")
    s.add_argument("--fixed-iters", type=int)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--absolute-eta", action="store_true")
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("theory", help="tabulate a state's photon-number pmf")
    s.add_argument("family")
    s.add_argument("params", nargs="*", metavar="PARAM=VALUE")
    s.add_argument("--n-max", type=int)
    s.set_defaults(func=cmd_theory)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        return args.func(args)
    except (UsageError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, FanocalError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
