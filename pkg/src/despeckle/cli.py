"""Command-line front end: ``despeckle add-noise | denoise | bench | psnr``."""
import argparse
import logging
import sys

import numpy as np

from . import bench
from .noise import GammaNoise, apply_multiplicative_noise, psnr
from .pgm import PGMError, read_image, write_image
from .solvers import CONVERGED, SOLVERS, SolverConfig, SolverDivergedError, run


def _on_off(value):
    v = value.lower()
    if v not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return v == "on"


def _cbar(value):
    if value in ("auto", "large-m", "low-m", "digamma"):
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError("expected auto, large-m, low-m, digamma or a number") from None


def _every(value):
    if value.lower() in ("inf", "never", "none"):
        return None
    return int(value)


def _fmt_psnr(value):
    return "identical" if np.isinf(value) else f"{value:.2f}"


def cmd_add_noise(args):
    clean = read_image(args.input, floor=None)
    noisy = apply_multiplicative_noise(clean, GammaNoise(args.M, args.seed))
    write_image(args.output, noisy)
    print(_fmt_psnr(psnr(np.clip(noisy, 0, 255), clean)))
    return 0


def _config(args):
    return SolverConfig(
        model=args.model,
        solver=args.solver,
        M=args.M,
        rho=args.rho,
        delta0=args.delta0,
        tau0=args.tau0,
        lam=args.lam,
        tol=args.tol,
        max_iter=args.max_iter,
        newton_every=args.newton_every,
        newton_iters=args.newton_iters,
        window=args.window,
        cbar=args.cbar,
        variable_step=args.variable_step,
        project=args.project,
        strict=args.strict_step,
    )


def cmd_denoise(args):
    cfg = _config(args)
    if args.synthesize:
        reference = read_image(args.input, floor=None)
        if args.M is None:
            raise ValueError("--synthesize needs --M")
        f = apply_multiplicative_noise(reference, GammaNoise(args.M, args.seed))
    else:
        f = read_image(args.input)
        reference = read_image(args.reference, floor=None) if args.reference else None
    result = run(f, cfg, reference=reference)
    write_image(args.output, result.image)
    if args.trace:
        result.trace.write_csv(args.trace)
    tau = np.asarray(result.tau, dtype=float)
    row = bench.MetricsRow(
        case_id=args.case_id or args.input,
        psnr=float(psnr(result.image, reference)) if reference is not None else float("nan"),
        noisy_psnr=float(psnr(np.clip(f, 0, 255), reference)) if reference is not None else float("nan"),
        iterations=result.trace.iterations,
        tau_min=float(tau.min()),
        tau_mean=float(tau.mean()),
        tau_max=float(tau.max()),
        status=result.trace.status,
    )
    sys.stdout.write(bench.format_rows([row], header=args.header))
    if args.strict and result.trace.status != CONVERGED:
        return 3
    return 0


def cmd_bench(args):
    cases = bench.load_cases(args.cases, image_dir=args.image_dir)
    rows = bench.run_cases(cases, tolerance=args.tolerance, jobs=args.jobs)
    bench.write_rows(args.output, rows)
    failed = sum(r.status.startswith("error") for r in rows)
    if failed:
        print(f"{failed} of {len(rows)} cases failed", file=sys.stderr)
    return 0


def cmd_psnr(args):
    a = read_image(args.a, floor=None)
    b = read_image(args.b, floor=None)
    print(_fmt_psnr(psnr(a, b)))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="despeckle", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("add-noise", help="multiply a clean PGM by Gamma noise")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--M", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_add_noise)

    p = sub.add_parser("denoise", help="remove speckle from a PGM")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--model", choices=("exp", "div"), default="exp")
    p.add_argument("--solver", choices=SOLVERS, default="dp-ladm")
    p.add_argument("--M", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--delta0", type=float)
    p.add_argument("--tau0", type=float, default=0.1)
    p.add_argument("--lambda", dest="lam", type=float, help="TV weight (PLAD only)")
    p.add_argument("--tol", type=float, default=3e-4)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--newton-every", type=_every, default=3)
    p.add_argument("--newton-iters", type=int, default=3)
    p.add_argument("--window", type=int, default=17)
    p.add_argument("--cbar", type=_cbar, default="auto")
    p.add_argument("--variable-step", type=_on_off, default=True)
    p.add_argument("--project", type=_on_off, default=True)
    p.add_argument("--strict-step", action="store_true", help="enforce the convergence step bound")
    p.add_argument("--reference", help="clean PGM for PSNR reporting")
    p.add_argument("--synthesize", action="store_true", help="treat input as clean and add noise first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", help="write per-iteration CSV here")
    p.add_argument("--case-id")
    p.add_argument("--header", action="store_true", help="print the CSV header before the row")
    p.add_argument("--strict", action="store_true", help="exit nonzero unless the run converged")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("bench", help="run a benchmark case file")
    p.add_argument("cases")
    p.add_argument("output")
    p.add_argument("--image-dir")
    p.add_argument("--tolerance", type=float, default=0.3)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("psnr", help="PSNR between two PGMs")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_psnr)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, PGMError, ValueError, SolverDivergedError) as exc:
        print(f"despeckle: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
