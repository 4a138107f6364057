"""Command line front end.

Four subcommands cover the round trip: ``generate`` writes a reproducible
test problem, ``solve`` produces a low-rank covariance factorization plus
a JSON report, ``validate`` replays the problem against the brute-force
oracles, and ``analyze`` extracts dominant directions. Every command that
writes files also writes a manifest.json capturing inputs, options and
outputs, and all randomness is seeded, so reruns are byte-identical.

Exit codes: 0 success, 1 non-convergence or failed validation, 2 usage or
malformed input, 3 I/O failure, 4 structural solver error, 5 oracle asked
beyond its size cap.

The RAILS_THREADS environment variable caps BLAS threading (default: all
cores); it must take effect before the numeric libraries load, which is
why the heavy imports in this module sit inside the handlers.
"""

import argparse
import json
import os
import sys

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_STRUCTURAL = 4
EXIT_ORACLE_SCALE = 5

_PATTERNS = {
    "uncorrelated": "uncorrelated_columns",
    "row-sum": "row_sum_vector",
    "diagonal": "diagonal_surface",
}

_SPACES = {
    "random": "random",
    "b": "columns_of_b",
    "inverse-b": "inverse_applied_to_b",
}


def _apply_thread_cap():
    cap = os.environ.get("RAILS_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, cap)


def _write_manifest(out_dir, command, inputs, options, outputs):
    from . import __version__

    manifest = {
        "command": command,
        "inputs": inputs,
        "options": options,
        "outputs": sorted(outputs),
        "package_version": __version__,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="rails",
        description="Low-rank stationary covariance solver for generalized "
        "Lyapunov equations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded test problem")
    g.add_argument("--kind", choices=["diffusion", "dae"], required=True)
    g.add_argument("--n", type=int, help="size (diffusion)")
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--n-diff", type=int, help="differential size (dae)")
    g.add_argument("--n-alg", type=int, help="algebraic size (dae)")
    g.add_argument("--coupling", type=float, default=0.3)
    g.add_argument("--shift", type=float, default=1.0)
    g.add_argument("--pattern", choices=sorted(_PATTERNS), default="uncorrelated")
    g.add_argument("--sigma", type=float, default=1.0, help="forcing magnitude")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="solve a problem given as Matrix Market files")
    s.add_argument("--a", required=True, help="A.mtx path")
    s.add_argument("--m", required=True, help="M.mtx path")
    s.add_argument("--b", required=True, help="B.mtx path")
    s.add_argument("--out", required=True)
    s.add_argument("--expand-m", type=int, default=3)
    s.add_argument("--tol", type=float, default=1e-2)
    s.add_argument("--restart-period", type=int, default=50)
    s.add_argument("--restart-tol", type=float, default=0.0)
    s.add_argument("--restart-tol-growth", type=float, default=1.0)
    s.add_argument("--max-iters", type=int, default=1000)
    s.add_argument("--variant", choices=["standard", "inverse"], default="standard")
    s.add_argument("--initial-space", choices=sorted(_SPACES))
    s.add_argument("--seed", type=int, default=0)

    v = sub.add_parser("validate", help="check a solution against the oracles")
    v.add_argument("--problem", required=True, help="directory with A/M/B.mtx")
    v.add_argument("--solution", required=True, help="directory with V/T.mtx")
    v.add_argument("--oracle", choices=["kron", "none"], default="kron")
    v.add_argument("--check-tol", type=float, default=1e-6)
    v.add_argument("--simulate", action="store_true")
    v.add_argument("--sim-tol", type=float, default=0.15)
    v.add_argument("--dt", type=float, default=1e-3)
    v.add_argument("--steps", type=int, default=1_000_000)
    v.add_argument("--burn-in", type=int, default=10_000)
    v.add_argument("--stride", type=int, default=10)
    v.add_argument("--seed", type=int, default=0)

    a = sub.add_parser("analyze", help="dominant directions of a solution")
    a.add_argument("--solution", required=True)
    a.add_argument("-k", type=int, default=4)
    a.add_argument("--out", required=True)

    return parser


def _cmd_generate(args):
    from . import mmio, testproblems

    if args.kind == "diffusion":
        if args.n is None:
            raise ValueError("--kind diffusion requires --n")
        a, m, sites = testproblems.gen_diffusion(args.n, args.scale)
        n = args.n
    else:
        if args.n_diff is None or args.n_alg is None:
            raise ValueError("--kind dae requires --n-diff and --n-alg")
        a, m, sites = testproblems.gen_dae(
            args.n_diff, args.n_alg, args.coupling, args.shift, args.seed
        )
        n = args.n_diff + args.n_alg
    forcing = testproblems.gen_forcing(
        sites, n, _PATTERNS[args.pattern], args.sigma, rng_seed=args.seed
    )
    os.makedirs(args.out, exist_ok=True)
    mmio.save_sparse(os.path.join(args.out, "A.mtx"), a)
    mmio.save_sparse(os.path.join(args.out, "M.mtx"), m)
    mmio.save_dense(os.path.join(args.out, "B.mtx"), forcing.b)
    _write_manifest(
        args.out,
        "generate",
        {},
        {
            "kind": args.kind,
            "n": args.n,
            "scale": args.scale,
            "n_diff": args.n_diff,
            "n_alg": args.n_alg,
            "coupling": args.coupling,
            "shift": args.shift,
            "pattern": _PATTERNS[args.pattern],
            "sigma": args.sigma,
            "seed": args.seed,
        },
        ["A.mtx", "M.mtx", "B.mtx", "manifest.json"],
    )
    print(f"wrote {args.kind} problem (n={n}, {forcing.b.shape[1]} forcing columns) to {args.out}")
    return EXIT_OK


def _cmd_solve(args):
    from . import mmio
    from .solver import SolverOptions, solve_dae

    a = mmio.load_sparse(args.a)
    m = mmio.load_sparse(args.m)
    b = mmio.load_dense(args.b)
    space = _SPACES[args.initial_space] if args.initial_space else (
        "inverse_applied_to_b" if args.variant == "inverse" else "random"
    )
    opts = SolverOptions(
        expand_m=args.expand_m,
        max_iters=args.max_iters,
        tol=args.tol,
        restart_period=args.restart_period,
        restart_tol=args.restart_tol,
        restart_tol_growth=args.restart_tol_growth,
        variant=args.variant,
        initial_space=space,
        rng_seed=args.seed,
    )
    sol, report = solve_dae(a, m, b, opts)
    os.makedirs(args.out, exist_ok=True)
    mmio.save_solution(args.out, sol)
    with open(os.path.join(args.out, "report.json"), "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(
        args.out,
        "solve",
        {"a": args.a, "m": args.m, "b": args.b},
        {
            "expand_m": args.expand_m,
            "tol": args.tol,
            "restart_period": args.restart_period,
            "restart_tol": args.restart_tol,
            "restart_tol_growth": args.restart_tol_growth,
            "max_iters": args.max_iters,
            "variant": args.variant,
            "initial_space": space,
            "seed": args.seed,
        },
        ["V.mtx", "T.mtx", "report.json", "manifest.json"],
    )
    rho = report.residual_history[-1][1] if report.residual_history else float("nan")
    print(
        f"{'converged' if report.converged else 'NOT converged'} "
        f"rho={rho:.3e} iterations={report.iterations} rank={report.final_rank} "
        f"max_dim={report.max_space_dim} mvps={report.mvp_count} "
        f"imvps={report.imvp_count} ({report.termination_reason})"
    )
    return EXIT_OK if report.converged else EXIT_FAILED


def _cmd_validate(args):
    import numpy as np

    from . import mmio
    from .dae import partition
    from .oracles import (
        KRON_SIZE_CAP,
        SimulationConfig,
        euler_maruyama_covariance,
        kron_solve_dae,
    )

    a = mmio.load_sparse(os.path.join(args.problem, "A.mtx"))
    m = mmio.load_sparse(os.path.join(args.problem, "M.mtx"))
    b = mmio.load_dense(os.path.join(args.problem, "B.mtx"))
    sol = mmio.load_solution(args.solution)
    n = a.shape[0]
    if sol.dimension != n:
        raise ValueError(
            f"solution dimension {sol.dimension} does not match problem size {n}"
        )
    ok = True
    checked = False
    if args.oracle == "kron":
        # OracleSizeError propagates (exit 5) when n is past the cap
        c_ref = kron_solve_dae(a, m, b, size_cap=KRON_SIZE_CAP)
        err = np.linalg.norm(sol.to_dense() - c_ref, "fro") / max(
            np.linalg.norm(c_ref, "fro"), np.finfo(float).tiny
        )
        passed = err <= args.check_tol
        ok &= passed
        checked = True
        print(
            f"oracle check: relative error {err:.3e} "
            f"{'<=' if passed else '>'} {args.check_tol:.3e} "
            f"[{'pass' if passed else 'FAIL'}]"
        )
    if args.simulate:
        sys_ = partition(a, m, b)
        cfg = SimulationConfig(
            dt=args.dt,
            n_steps=args.steps,
            burn_in=args.burn_in,
            sample_stride=args.stride,
            rng_seed=args.seed,
        )
        c_emp, used = euler_maruyama_covariance(sys_, cfg)
        c22 = sol.to_dense()[np.ix_(sys_.differential_rows, sys_.differential_rows)]
        lam_emp = np.linalg.eigvalsh(c_emp).max()
        lam_sol = np.linalg.eigvalsh(c22).max()
        err = abs(lam_emp - lam_sol) / max(abs(lam_sol), np.finfo(float).tiny)
        passed = err <= args.sim_tol
        ok &= passed
        checked = True
        print(
            f"simulation check: leading eigenvalue {lam_emp:.6e} vs {lam_sol:.6e} "
            f"({used} samples), discrepancy {err:.3e} "
            f"{'<=' if passed else '>'} {args.sim_tol:.3e} "
            f"[{'pass' if passed else 'FAIL'}]"
        )
    if not checked:
        raise ValueError("nothing to validate: oracle disabled and --simulate not set")
    return EXIT_OK if ok else EXIT_FAILED


def _cmd_analyze(args):
    from . import mmio
    from .analysis import eofs, write_eigenvalue_csv, write_eof_csv

    sol = mmio.load_solution(args.solution)
    eof_set = eofs(sol, args.k)
    os.makedirs(args.out, exist_ok=True)
    write_eof_csv(os.path.join(args.out, "eofs.csv"), eof_set)
    write_eigenvalue_csv(os.path.join(args.out, "eigenvalues.csv"), sol)
    _write_manifest(
        args.out,
        "analyze",
        {"solution": args.solution},
        {"k": args.k},
        ["eofs.csv", "eigenvalues.csv", "manifest.json"],
    )
    shares = " ".join(f"{w:.4f}" for w in eof_set.weights)
    print(f"leading {args.k} weighted eigenvalues: {shares}")
    return EXIT_OK


def main(argv=None):
    _apply_thread_cap()
    parser = _build_parser()
    args = parser.parse_args(argv)
    from .errors import (
        ForcingOnConstraintError,
        GenerationError,
        InvalidCovarianceError,
        NoUniqueSolutionError,
        OracleSizeError,
        RailsError,
        ReductionImpossibleError,
        SimulationBlowupError,
        SingularMatrixError,
        StabilityError,
    )

    handlers = {
        "generate": _cmd_generate,
        "solve": _cmd_solve,
        "validate": _cmd_validate,
        "analyze": _cmd_analyze,
    }
    try:
        return handlers[args.command](args)
    except OracleSizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE_SCALE
    except (
        StabilityError,
        SingularMatrixError,
        ReductionImpossibleError,
        ForcingOnConstraintError,
        NoUniqueSolutionError,
        GenerationError,
        SimulationBlowupError,
        InvalidCovarianceError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STRUCTURAL
    except RailsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STRUCTURAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
