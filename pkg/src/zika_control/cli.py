"""Command-line entry point: ``zika-control {simulate,optimize,compare,sweep,verify,write-config}``.

Exit codes: 0 success, 1 usage/validation/solver error, 2 non-convergence under ``--strict``.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import verify as verify_mod
from .errors import ConfigParseError, ValidationError, ZikaControlError
from .io import dump_config, effective_parameters, emit_plots, load_config, write_csv
from .io.config import RunConfig
from .scenarios import MODES, comparison_table, format_table, run_many, weight_sweep

log = logging.getLogger("zika_control")

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="zika-control", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="INI run configuration")
        p.add_argument("--out", help="output directory (overrides [run] output_dir)")
        p.add_argument("--steps", type=int, help="grid intervals n_steps")
        p.add_argument("--tol", type=float, help="FBSM relative tolerance")
        p.add_argument("--max-iters", type=int, help="FBSM iteration cap")
        p.add_argument("--seed", type=int, default=0, help="seed for verification sampling")
        p.add_argument("--strict", action="store_true", help="exit 2 if any FBSM run does not converge")
        p.add_argument("--workers", type=int, default=None, help="parallel scenario workers")

    common(sub.add_parser("simulate", help="uncontrolled forward run"))
    p = sub.add_parser("optimize", help="forward-backward sweep for one control mode")
    common(p)
    p.add_argument("--mode", choices=[m for m in MODES if m != "none"], default="both")
    common(sub.add_parser("compare", help="none / u1_only / u2_only / both"))
    p = sub.add_parser("sweep", help="cost-weight sweeps")
    common(p)
    p.add_argument("--mode", choices=[m for m in MODES if m != "none"],
                   help="sweep a single mode (default: [run] sweep_modes)")
    p = sub.add_parser("verify", help="adjoint, minimality and integrator-order checks")
    common(p, config_required=False)
    p.add_argument("--fd-samples", type=int, default=1000)
    p.add_argument("--min-samples", type=int, default=200)
    p.add_argument("--grid-resolution", type=int, default=201)
    p = sub.add_parser("write-config", help="print the default configuration")
    p.add_argument("--out", help="write to this file instead of standard output")
    return parser


def _effective_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    changes = {}
    if args.steps is not None:
        changes["grid"] = dataclasses.replace(cfg.grid, n_steps=args.steps)
    fb = {}
    if args.tol is not None:
        fb["rel_tol"] = args.tol
    if args.max_iters is not None:
        fb["max_iters"] = args.max_iters
    if fb:
        changes["fbsm"] = dataclasses.replace(cfg.fbsm, **fb)
    if args.out:
        changes["output_dir"] = args.out
    return cfg.replace(**changes) if changes else cfg


def _announce(cfg: RunConfig, out: Path) -> None:
    text = effective_parameters(cfg)
    sys.stderr.write(text)
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective_parameters.txt").write_text(text, encoding="utf-8")


def _report(results, out: Path, name: str) -> None:
    table = format_table(comparison_table(results))
    print(table)
    (out / f"{name}.txt").write_text(table + "\n", encoding="utf-8")


def _exit_status(results, strict: bool) -> int:
    if any(not r.ok for r in results):
        return EXIT_ERROR
    if strict and any(not r.solution.converged for r in results):
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _run_modes(cfg: RunConfig, modes, out: Path, args, name: str) -> int:
    results = run_many([cfg.scenario(m) for m in modes], max_workers=args.workers)
    for r in results:
        write_csv(r, out / f"{r.label}.csv")
    emit_plots(results, out)
    _report(results, out, name)
    return _exit_status(results, args.strict)


def cmd_simulate(cfg, out, args):
    return _run_modes(cfg, ["none"], out, args, "simulate")


def cmd_optimize(cfg, out, args):
    return _run_modes(cfg, [args.mode], out, args, "optimize")


def cmd_compare(cfg, out, args):
    return _run_modes(cfg, list(cfg.modes), out, args, "comparison")


def cmd_sweep(cfg, out, args):
    modes = [args.mode] if args.mode else list(cfg.sweep_modes)
    everything = []
    for mode in modes:
        results = weight_sweep(cfg.scenario(mode, label=f"sweep_{mode}"), cfg.sweep_w34,
                               max_workers=args.workers)
        for r in results:
            if r.ok:
                write_csv(r, out / f"{r.label}.csv")
        if any(r.ok for r in results):
            emit_plots(results, out, prefix=f"sweep_{mode}_")
        everything += results
    _report(everything, out, "sweep")
    return _exit_status(everything, args.strict)


def cmd_verify(cfg, out, args):
    reports = verify_mod.run_all(samples_fd=args.fd_samples, samples_min=args.min_samples,
                                 grid_resolution=args.grid_resolution, seed=args.seed,
                                 p=cfg.params, w=cfg.weights, u_max=cfg.fbsm.u_max)
    for r in reports:
        print(r.line())
    verify_mod.write_summary(reports, out / "verify_summary.json")
    ok = all(r.passed for r in reports)
    print("verification:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_ERROR


COMMANDS = {
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "write-config":
        text = dump_config(RunConfig())
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        return EXIT_OK
    try:
        cfg = _effective_config(args)
        out = Path(cfg.output_dir)
        _announce(cfg, out)
        return COMMANDS[args.command](cfg, out, args)
    except (ConfigParseError, ValidationError) as exc:
        parser.print_usage(sys.stderr)
        print(f"zika-control: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ZikaControlError as exc:
        print(f"zika-control: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
