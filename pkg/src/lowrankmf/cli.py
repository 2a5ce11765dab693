"""Command-line front end.

Subcommands: ``denoise``, ``complete``, ``nmf`` run the solvers on a file
or a freshly generated synthetic instance; ``synth`` writes instances to
disk; ``verify`` runs the numerical oracle checks on small instances;
``bench`` sweeps a lambda grid and reports the value with the lowest
reconstruction error.

Exit codes: 0 converged/iteration cap, 1 runtime error, 2 usage error,
3 degenerate (all columns pruned).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace

import numpy as np

from . import data as dio
from .common import STATUS_DEGENERATE, NmfOptions, SolverConfig
from .completion import solve_mc
from .core import FactorPair, ObservedMask, ProblemKind, nmae, nre
from .denoise import solve_denoise
from .nmf import solve_nmf
from . import oracles

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_DEGENERATE = 3


def _positive_float(text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if val <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return val


def _positive_int(text: str) -> int:
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if val <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return val


def _add_solver_flags(p: argparse.ArgumentParser, lambda_required: bool = True):
    p.add_argument("--input", help="input matrix file")
    p.add_argument("--format", choices=["mm", "csv", "movielens"], default="mm")
    p.add_argument("--lambda", dest="lam", type=_positive_float, required=lambda_required, default=1.0)
    p.add_argument("--eta", type=_positive_float, default=1e-6)
    p.add_argument("--rank-init", type=_positive_int, default=None)
    p.add_argument("--tol", type=_positive_float, default=1e-4)
    p.add_argument("--max-iter", type=_positive_int, default=500)
    p.add_argument("--prune-tol", type=_positive_float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="factor output prefix (writes .u.mtx/.v.mtx)")
    p.add_argument("--trace", help="write the iteration trace as JSON")
    _add_synth_flags(p)


def _add_synth_flags(p: argparse.ArgumentParser):
    p.add_argument("--rows", type=_positive_int)
    p.add_argument("--cols", type=_positive_int)
    p.add_argument("--rank", type=_positive_int)
    p.add_argument("--snr-db", type=float, default=float("inf"))
    p.add_argument("--dist", choices=["gaussian", "uniform01"])
    p.add_argument("--mask-card", type=_positive_int)


def _add_nmf_flags(p: argparse.ArgumentParser):
    p.add_argument("--beta-u", type=float, default=0.1)
    p.add_argument("--beta-v", type=float, default=0.1)
    p.add_argument("--sigma-armijo", type=_positive_float, default=1e-2)
    p.add_argument("--eps-active", type=_positive_float, default=1e-6)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lowrankmf",
        description="Alternating reweighted low-rank matrix factorization solvers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("denoise", "complete", "nmf"):
        p = sub.add_parser(name)
        _add_solver_flags(p)
        if name == "nmf":
            _add_nmf_flags(p)

    p = sub.add_parser("synth")
    _add_synth_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["mm", "csv"], default="mm")
    p.add_argument("--output", required=True)

    p = sub.add_parser("verify")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bench")
    _add_solver_flags(p, lambda_required=False)
    _add_nmf_flags(p)
    p.add_argument("--lambda-grid", required=True, help="comma-separated lambda values")
    p.add_argument(
        "--problem", choices=["denoise", "complete", "nmf"], default="denoise"
    )
    return parser


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("denoise", "complete", "nmf", "bench"):
        synth = args.rows is not None or args.cols is not None or args.rank is not None
        if args.input is None and not synth:
            parser.error(f"{args.command}: provide --input or synthetic --rows/--cols/--rank")
        if args.input is None and not (args.rows and args.cols and args.rank):
            parser.error("synthetic instances need --rows, --cols and --rank")
    if args.command == "synth" and not (args.rows and args.cols and args.rank):
        parser.error("synth needs --rows, --cols and --rank")
    return args


def _config_from_args(args, d_init: int) -> SolverConfig:
    nmf = NmfOptions(
        beta_u=getattr(args, "beta_u", 0.1),
        beta_v=getattr(args, "beta_v", 0.1),
        sigma=getattr(args, "sigma_armijo", 1e-2),
        eps_active=getattr(args, "eps_active", 1e-6),
    )
    return SolverConfig(
        lam=args.lam,
        eta=args.eta,
        d_init=d_init,
        tol=args.tol,
        max_iter=args.max_iter,
        prune_tol=args.prune_tol,
        seed=args.seed,
        nmf=nmf,
    )


def _load_instance(args, kind: ProblemKind):
    """Returns (y, mask, x0): mask only for completion, x0 only for synth."""
    if args.input is not None:
        if args.format == "movielens":
            ml = dio.read_movielens(args.input)
            y = ml.y if isinstance(ml.y, np.ndarray) else None
            if y is None:
                raise dio.ParseError("dataset too large to densify", args.input)
            return y, ml.mask, None
        if kind is ProblemKind.COMPLETE and args.format == "mm":
            y, mask = dio.read_coordinate(args.input)
            return y, mask, None
        y = dio.read_matrix(args.input, args.format)
        mask = ObservedMask.full(*y.shape) if kind is ProblemKind.COMPLETE else None
        return y, mask, None
    dist = args.dist or ("uniform01" if kind is ProblemKind.NMF else "gaussian")
    x0 = dio.gen_lowrank(args.rows, args.cols, args.rank, dist, args.seed)
    y = dio.add_noise_snr(x0, args.snr_db, args.seed + 1)
    mask = None
    if kind is ProblemKind.COMPLETE:
        card = args.mask_card or args.rows * args.cols
        mask = dio.sample_mask(args.rows, args.cols, card, args.seed + 2)
    if kind is ProblemKind.NMF:
        y = np.maximum(y, 0.0)
    return y, mask, x0


def _solve(kind: ProblemKind, y, mask, cfg: SolverConfig):
    if kind is ProblemKind.DENOISE:
        return solve_denoise(y, cfg)
    if kind is ProblemKind.COMPLETE:
        return solve_mc(y, mask, cfg)
    return solve_nmf(y, cfg)


def _run_solver(args, kind: ProblemKind) -> int:
    y, mask, x0 = _load_instance(args, kind)
    d_init = args.rank_init or min(y.shape)
    cfg = _config_from_args(args, d_init)
    t0 = time.perf_counter()
    fp, trace = _solve(kind, y, mask, cfg)
    wall = time.perf_counter() - t0
    metrics: dict = {}
    if x0 is not None:
        metrics["nre"] = nre(x0, fp)
    if mask is not None:
        metrics["nmae"] = nmae(y, mask, fp)
    if args.output:
        dio.write_matrix(f"{args.output}.u.mtx", fp.u, "mm")
        dio.write_matrix(f"{args.output}.v.mtx", fp.v, "mm")
    if args.trace:
        with open(args.trace, "w") as fh:
            json.dump(trace.to_json_dict(metrics), fh, indent=1, sort_keys=True)
            fh.write("\n")
    last = trace.records[-1]
    parts = [
        f"iters={last.k}",
        f"d={last.d}",
        f"objective={last.objective:.6g}",
    ]
    if "nre" in metrics:
        parts.append(f"nre={metrics['nre']:.4g}")
    if "nmae" in metrics:
        parts.append(f"nmae={metrics['nmae']:.4g}")
    parts.append(f"status={trace.status}")
    parts.append(f"time={wall:.2f}s")
    print(" ".join(parts))
    return EXIT_DEGENERATE if trace.status == STATUS_DEGENERATE else EXIT_OK


def _run_synth(args) -> int:
    dist = args.dist or "gaussian"
    x0 = dio.gen_lowrank(args.rows, args.cols, args.rank, dist, args.seed)
    y = dio.add_noise_snr(x0, args.snr_db, args.seed + 1)
    dio.write_matrix(args.output, y, args.format)
    print(f"wrote {args.rows}x{args.cols} rank-{args.rank} instance to {args.output}")
    if args.mask_card:
        mask = dio.sample_mask(args.rows, args.cols, args.mask_card, args.seed + 2)
        mask_path = f"{args.output}.mask.mtx"
        dio.write_mask_coordinate(mask_path, y, mask)
        print(f"wrote mask ({mask.card} entries) to {mask_path}")
    return EXIT_OK


def _run_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    failures = 0

    def check(label: str, ok: bool, detail: str = ""):
        nonlocal failures
        mark = "PASS" if ok else "FAIL"
        print(f"[{mark}] {label}" + (f" ({detail})" if detail else ""))
        failures += 0 if ok else 1

    for trial in range(3):
        m, n, d = 4, 3, 2
        fp = FactorPair(rng.standard_normal((m, d)), rng.standard_normal((n, d)))
        y = rng.standard_normal((m, n))
        mask = dio.sample_mask(m, n, 8, args.seed + trial)
        for kind, msk in ((ProblemKind.DENOISE, None), (ProblemKind.COMPLETE, mask)):
            gap = oracles.psd_gap(kind, "u", y, msk, fp, 1.0, 1e-3)
            check(f"psd gap {kind.value} trial {trial}", gap >= -1e-8, f"min eig {gap:.2e}")
        nuc, bound = oracles.nuclear_bound_check(fp)
        check(
            f"nuclear bound trial {trial}",
            nuc <= bound + 1e-9,
            f"{nuc:.4f} <= {bound:.4f}",
        )
    return EXIT_OK if failures == 0 else EXIT_ERROR


def _run_bench(args) -> int:
    try:
        grid = [float(t) for t in args.lambda_grid.split(",") if t.strip()]
    except ValueError:
        print("bench: unparseable --lambda-grid", file=sys.stderr)
        return EXIT_USAGE
    if not grid or any(g <= 0 for g in grid):
        print("bench: lambda grid values must be positive", file=sys.stderr)
        return EXIT_USAGE
    kind = {
        "denoise": ProblemKind.DENOISE,
        "complete": ProblemKind.COMPLETE,
        "nmf": ProblemKind.NMF,
    }[args.problem]
    y, mask, x0 = _load_instance(args, kind)
    if x0 is None:
        print("bench: needs a synthetic instance (ground truth)", file=sys.stderr)
        return EXIT_USAGE
    d_init = args.rank_init or min(y.shape)
    base_cfg = _config_from_args(args, d_init)
    best = None
    for lam in grid:
        cfg = replace(base_cfg, lam=lam)
        fp, trace = _solve(kind, y, mask, cfg)
        err = nre(x0, fp)
        print(f"lambda={lam:g} nre={err:.4g} d={fp.d} status={trace.status}")
        if best is None or err < best[1]:
            best = (lam, err)
    print(f"best lambda={best[0]:g} nre={best[1]:.4g}")
    return EXIT_OK


def main(argv=None) -> int:
    args = parse_args(sys.argv[1:] if argv is None else list(argv))
    try:
        if args.command in ("denoise", "complete", "nmf"):
            kind = {
                "denoise": ProblemKind.DENOISE,
                "complete": ProblemKind.COMPLETE,
                "nmf": ProblemKind.NMF,
            }[args.command]
            return _run_solver(args, kind)
        if args.command == "synth":
            return _run_synth(args)
        if args.command == "verify":
            return _run_verify(args)
        return _run_bench(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
