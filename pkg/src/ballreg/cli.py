"""Command line interface.

    ballreg [--config FILE] [--output-dir DIR] [--KEY VALUE ...] COMMAND ...

Commands: ``simulate``, ``degrade``, ``solve``, ``uq test``, ``uq lci``,
``run`` and ``bench``.  Every ExperimentConfig field is a flag (``--snr-db-in
20``); flags override the ``key=value`` config file.  The output directory
falls back to ``$BALLREG_OUTPUT_DIR`` and then ``./ballreg_out``.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from .ball import BallSamples
from .experiment import (OUTPUT_ENV, ExperimentConfig, bench, make_objective,
                         run_experiment, simulate_ground_truth, solve)
from .io import BallFileError, read_ballfile, write_ballfile
from .operators import make_kernel, make_sensing
from .solver import objective_value, write_trace_csv
from .uncertainty import (Region, format_report, hypothesis_test, local_credible_intervals,
                          write_lci_csv)

__all__ = ["main", "build_parser", "UsageError", "EXIT_OK", "EXIT_USAGE", "EXIT_NUMERIC", "EXIT_IO"]

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3
DEFAULT_OUT = "ballreg_out"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise UsageError(message)


def _flag(name):
    return "--" + name.replace("_", "-")


def _add_config_flags(p):
    for f in dataclasses.fields(ExperimentConfig):
        if f.name == "output_dir":
            continue
        p.add_argument(_flag(f.name), dest=f"cfg_{f.name}", default=argparse.SUPPRESS, metavar="VALUE")


def build_parser():
    p = _Parser(prog="ballreg", description="Sparse deconvolution and uncertainty on the ball.")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--output-dir", dest="output_dir", default=None, help=f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUT})")
    _add_config_flags(p)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    simulate = sub.add_parser("simulate", help="write the simulated ground truth")
    leaves = [simulate]

    d = sub.add_parser("degrade", help="blur, mask and add noise to a field")
    d.add_argument("--truth", help="samples BallFile (default: simulate)")
    leaves.append(d)

    s = sub.add_parser("solve", help="MAP estimate from degraded data")
    s.add_argument("--observed", required=True)
    s.add_argument("--mask", required=True)
    s.add_argument("--sigma", type=float, required=True)
    leaves.append(s)

    uq = sub.add_parser("uq", help="uncertainty quantification")
    uqs = uq.add_subparsers(dest="uq_command", parser_class=_Parser)
    for name in ("test", "lci"):
        q = uqs.add_parser(name)
        q.add_argument("--xmap", required=True)
        q.add_argument("--observed", required=True)
        q.add_argument("--mask", required=True)
        q.add_argument("--sigma", type=float, required=True)
        q.add_argument("--region", action="append", required=True,
                       help="block p0:p1,t0:t1,f0:f1 or a file of flat voxel indices")
        leaves.append(q)

    leaves.append(sub.add_parser("run", help="full pipeline"))

    b = sub.add_parser("bench", help="transform timing and fitted exponent")
    b.add_argument("--sizes", default="8,16,32")
    b.add_argument("--runs", type=int, default=5)
    b.add_argument("--method", default="direct", choices=("direct", "fft"))
    for q in leaves + [b]:
        _add_config_flags(q)
        q.add_argument("--config", default=argparse.SUPPRESS, help="key=value config file")
        q.add_argument("--output-dir", dest="output_dir", default=argparse.SUPPRESS)
    return p


def _config(args):
    text = ""
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    overrides = {f.name: getattr(args, f"cfg_{f.name}", None) for f in dataclasses.fields(ExperimentConfig)
                 if f.name != "output_dir"}
    try:
        cfg = ExperimentConfig.from_text(text, **overrides)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    out = args.output_dir or cfg.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUT
    cfg.output_dir = out
    return cfg


def _parse_region(spec, shape, label):
    if os.path.exists(spec):
        idx = np.loadtxt(spec, dtype=np.int64, ndmin=1)
        return Region(idx, label)
    try:
        parts = [tuple(int(v) for v in part.split(":")) for part in spec.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad region {spec!r}") from exc
    if len(parts) != 3 or any(len(q) != 2 for q in parts):
        raise UsageError(f"region must look like p0:p1,t0:t1,f0:f1, got {spec!r}")
    try:
        return Region.block(shape, *parts, label=label)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _check_profile(obj, cfg, what):
    if (obj.profile.L, obj.profile.P) != (cfg.L, cfg.P):
        raise UsageError(f"{what} has L={obj.profile.L}, P={obj.profile.P}; config has "
                         f"L={cfg.L}, P={cfg.P}")


class _Data:
    # light stand-in for the degraded bundle used by solve()
    def __init__(self, cfg, y, mask, sigma):
        kernel = make_kernel(cfg.profile, cfg.sigma_ell, cfg.sigma_p, cfg.skew)
        self.y, self.mask, self.sigma = y, mask, sigma
        self.sensing = make_sensing(cfg.profile, kernel, mask, cfg.data_metric)


def _load_data(cfg, args):
    obs = read_ballfile(args.observed, expect="samples")
    _check_profile(obs, cfg, "observed file")
    mask = read_ballfile(args.mask, expect="mask")
    if mask.keep.shape != obs.values.shape:
        raise UsageError("mask and observations differ in shape")
    if not args.sigma > 0:
        raise UsageError("--sigma must be positive")
    return _Data(cfg, np.real(obs.values), mask, args.sigma)


def _cmd_simulate(cfg, args):
    x = simulate_ground_truth(cfg)
    path = os.path.join(cfg.output_dir, "truth.blc")
    write_ballfile(x, path)
    print(f"truth: {path}")


def _cmd_degrade(cfg, args):
    from .experiment import degrade

    truth = None
    if args.truth:
        truth = read_ballfile(args.truth, expect="samples")
        _check_profile(truth, cfg, "truth file")
    deg = degrade(cfg, truth)
    write_ballfile(BallSamples(cfg.profile, deg.y, reality=True), os.path.join(cfg.output_dir, "observed.blc"))
    write_ballfile(deg.mask, os.path.join(cfg.output_dir, "mask.blc"), profile=cfg.profile)
    if truth is None:
        write_ballfile(BallSamples(cfg.profile, deg.truth, reality=True),
                       os.path.join(cfg.output_dir, "truth.blc"))
    with open(os.path.join(cfg.output_dir, "degrade.txt"), "w") as fh:
        fh.write(format_report({"sigma": repr(deg.sigma), "n_kept": deg.mask.n_kept}))
    print(f"sigma: {deg.sigma!r}")


def _cmd_solve(cfg, args):
    data = _load_data(cfg, args)
    obj, rep = solve(cfg, data)
    write_ballfile(rep.x_map, os.path.join(cfg.output_dir, "x_map.blc"))
    write_trace_csv(rep, os.path.join(cfg.output_dir, "trace.csv"))
    info = {"lambda": repr(rep.lambda_final), "iterations": rep.iterations,
            "converged": rep.converged, "h_map": repr(float(rep.objective_trace[-1]))}
    with open(os.path.join(cfg.output_dir, "solve.txt"), "w") as fh:
        fh.write(format_report(info))
    sys.stdout.write(format_report(info))
    if not rep.converged:
        raise RuntimeError("solver did not converge")


def _uq_setup(cfg, args):
    data = _load_data(cfg, args)
    xm = read_ballfile(args.xmap, expect="samples")
    _check_profile(xm, cfg, "x_map file")
    if cfg.lam is None:
        raise UsageError("uq needs --lam, the regularization used for x_map")
    obj = make_objective(cfg, data, cfg.lam)
    x = np.real(xm.values)
    shape = cfg.profile.sample_shape
    regions = [_parse_region(s, shape, f"region{i}") for i, s in enumerate(args.region)]
    return obj, x, regions


def _cmd_uq_test(cfg, args):
    obj, x, regions = _uq_setup(cfg, args)
    h_map = objective_value(x, obj)
    lines = {}
    for r in regions:
        t = hypothesis_test(x, r, obj, cfg.alpha, h_map=h_map)
        lines[f"{r.label}"] = t.outcome
        lines[f"{r.label}_h_surrogate"] = repr(t.h_surrogate)
        lines[f"{r.label}_epsilon_prime"] = repr(t.epsilon_prime)
        lines[f"{r.label}_margin"] = repr(t.margin)
    text = format_report(lines)
    with open(os.path.join(cfg.output_dir, "uq_test.txt"), "w") as fh:
        fh.write(text)
    sys.stdout.write(text)


def _cmd_uq_lci(cfg, args):
    obj, x, regions = _uq_setup(cfg, args)
    ivs = local_credible_intervals(x, regions, obj, cfg.alpha)
    path = os.path.join(cfg.output_dir, f"lci_alpha{cfg.alpha}.csv")
    write_lci_csv(regions, ivs, path)
    for r, (lo, hi) in zip(regions, ivs):
        print(f"{r.label}: [{lo!r}, {hi!r}]")


def _cmd_run(cfg, args):
    rep = run_experiment(cfg)
    sys.stdout.write(rep.text())
    if not rep.solve.converged:
        raise RuntimeError("solver did not converge")


def _cmd_bench(cfg, args):
    try:
        sizes = tuple(int(v) for v in args.sizes.split(","))
    except ValueError as exc:
        raise UsageError(f"bad --sizes {args.sizes!r}") from exc
    meds, k = bench(sizes, args.runs, args.method)
    for L, t in zip(sizes, meds):
        print(f"L={L}: {t:.6e} s")
    print(f"exponent: {k:.3f}")


_COMMANDS = {"simulate": _cmd_simulate, "degrade": _cmd_degrade, "solve": _cmd_solve,
             "run": _cmd_run, "bench": _cmd_bench}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        if args.command == "uq":
            if args.uq_command is None:
                raise UsageError("uq needs 'test' or 'lci'")
            fn = _cmd_uq_test if args.uq_command == "test" else _cmd_uq_lci
        else:
            fn = _COMMANDS[args.command]
        cfg = _config(args)
        if args.command != "bench":
            os.makedirs(cfg.output_dir, exist_ok=True)
        fn(cfg, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BallFileError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (RuntimeError, FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
