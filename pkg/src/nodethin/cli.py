"""Command-line front-end: node generation, subsampling, quality metrics,
multilevel solves, and subsampler timing, all emitting delimited data files
(plus rendered figures with --plot).

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import figures
from .errors import (
    FileFormatError,
    NodeThinError,
    NumericalError,
    ValidationError,
)
from .multilevel import MlSettings
from .nodeset import NodeSet, SortOrder, read_nodes, write_nodes
from .problems import PROBLEMS, DensityProfile, generate_disk_nodes
from .quality import clr
from .solve import solve_problem
from .subsample import (
    BoundaryPipelineParams,
    MovingFrontParams,
    PoissonDiskParams,
    WeightedParams,
    moving_front,
    moving_front_to_count,
    poisson_disk,
    poisson_disk_to_count,
    subsample_with_boundary,
    weighted,
)


def _apply_thread_cap():
    cap = os.environ.get("NODETHIN_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def _write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_direction(text):
    try:
        dx, dy = (float(v) for v in text.split(","))
    except ValueError:
        raise ValidationError(f"bad direction {text!r}, expected 'dx,dy'") from None
    return SortOrder(np.array([dx, dy]))


def _profile_from_args(args):
    return DensityProfile(
        rho1=args.rho1, rho2=args.rho2, d_lim=args.d_lim, d_bl=args.d_bl
    )


def cmd_gen(args):
    profile = _profile_from_args(args)
    domain, boundary = generate_disk_nodes(profile, args.seed, max_nodes=args.max_nodes)
    os.makedirs(args.out_dir, exist_ok=True)
    dom_path = os.path.join(args.out_dir, "domain.csv")
    bnd_path = os.path.join(args.out_dir, "boundary.csv")
    write_nodes(domain, dom_path)
    write_nodes(boundary, bnd_path)
    if args.plot:
        figures.save_nodes_figure(
            domain.merged_with(boundary),
            os.path.join(args.out_dir, "nodes.png"),
            title=f"{len(domain)} interior + {len(boundary)} boundary nodes",
        )
    print(f"wrote {dom_path} ({len(domain)} nodes), {bnd_path} ({len(boundary)} nodes)")
    return 0


def _subsample_whole(nodes, args):
    if args.method == "mf":
        if args.target is not None:
            return moving_front_to_count(
                nodes, args.target, k=args.k, order=_parse_direction(args.direction)
            )[0]
        return moving_front(
            nodes,
            MovingFrontParams(c=args.c, k=args.k, order=_parse_direction(args.direction)),
        )
    if args.method == "pd":
        if args.target is not None:
            return poisson_disk_to_count(nodes, args.target, seed=args.seed)[0]
        return poisson_disk(nodes, PoissonDiskParams(c=args.c, seed=args.seed))
    if args.target is None:
        raise ValidationError("--method w requires --target")
    return weighted(nodes, WeightedParams(target_count=args.target, k=args.k))


def cmd_subsample(args):
    nodes = read_nodes(args.input)
    if args.boundary_mode is not None:
        if args.method != "mf":
            raise ValidationError("--boundary-mode applies to --method mf only")
        dom = nodes.take(np.flatnonzero(~nodes.boundary))
        bnd = nodes.take(np.flatnonzero(nodes.boundary))
        pipeline = BoundaryPipelineParams(
            mode=args.boundary_mode,
            clearance_factor=args.clearance,
            alternate_direction=args.alternate,
        )
        mf = MovingFrontParams(c=args.c, k=args.k, order=_parse_direction(args.direction))
        cd, cb = subsample_with_boundary(dom, bnd, pipeline, mf)
        out = cd.merged_with(cb)
    else:
        out = _subsample_whole(nodes, args)
    write_nodes(out, args.output)
    summary = {
        "method": args.method,
        "input": args.input,
        "output": args.output,
        "n_in": len(nodes),
        "n_out": len(out),
    }
    _write_text(args.output + ".summary.json", json.dumps(summary, indent=2) + "\n")
    if args.plot:
        figures.save_nodes_figure(
            out, args.output + ".png", title=f"{len(nodes)} -> {len(out)} nodes"
        )
    print(f"{len(nodes)} -> {len(out)} nodes ({args.method})")
    return 0


def _k_values(args):
    if args.k_range:
        try:
            a, b = (int(v) for v in args.k_range.split(":"))
        except ValueError:
            raise ValidationError(f"bad --k-range {args.k_range!r}, expected a:b") from None
        if a < 1 or b < a:
            raise ValidationError("--k-range must be 1 <= a <= b")
        return list(range(a, b + 1))
    return [args.k]


def cmd_metrics(args):
    fine = read_nodes(args.fine)
    coarse = read_nodes(args.coarse)
    records = []
    for k in _k_values(args):
        rep = clr(fine, coarse, k)
        records.append({"k": k, "clr_avg": rep.clr_avg, "clr_sd": rep.clr_sd})
    payload = records[0] if len(records) == 1 else {"records": records}
    text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        _write_text(args.out, text)
        if args.plot and len(records) > 1:
            figures.save_clr_figure(records, args.out + ".png")
    else:
        sys.stdout.write(text)
    return 0


def cmd_solve(args):
    problem = PROBLEMS[args.problem]()
    if not 2 <= args.m_l <= 8:
        print(f"warning: m_l={args.m_l} is outside the tested range 2..8", file=sys.stderr)
    if args.domain and args.boundary:
        domain = read_nodes(args.domain)
        boundary = read_nodes(args.boundary)
    else:
        profile = problem.default_profile.scaled(args.scale)
        if args.rho1 is not None:
            profile = DensityProfile(args.rho1, args.rho2, args.d_lim, args.d_bl)
        domain, boundary = generate_disk_nodes(profile, args.seed)
    settings = MlSettings(nu1=args.nu1, nu2=args.nu2, i_max=args.i_max, tol=args.tol)
    mf = MovingFrontParams(c=args.c, k=args.k, order=_parse_direction(args.direction))
    u, report, ops = solve_problem(
        problem, domain, boundary,
        m_l=args.m_l, n_min=args.n_min, settings=settings, mf=mf,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    finest = ops.hierarchy.levels[0]
    lines = ["x,y,u"]
    for (x, y), v in zip(finest.coords, u):
        lines.append(f"{x:.17g},{y:.17g},{v:.17g}")
    _write_text(os.path.join(args.out_dir, "solution.csv"), "\n".join(lines) + "\n")
    _write_text(os.path.join(args.out_dir, "report.json"), report.to_json() + "\n")
    _write_text(os.path.join(args.out_dir, "residuals.csv"), report.residual_csv())
    if args.plot:
        figures.save_residual_figure(report, os.path.join(args.out_dir, "residuals.png"))
        figures.save_solution_figure(
            finest, u, os.path.join(args.out_dir, "solution.png"),
            title=f"{args.problem}, m_L={args.m_l}, N={len(finest)}",
        )
    print(
        f"{args.problem}: N={len(finest)}, levels={ops.depth}, "
        f"iterations={report.iterations}, status={report.status}, "
        f"max_rel_error={report.max_relative_error:.3e}"
    )
    return 0


def _bench_timed(fn, reps):
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times)), float(np.mean(times))


def cmd_bench(args):
    sizes = [int(s) for s in args.sizes.split(",")]
    if len(sizes) < 2 or any(b >= a for a, b in zip(sizes, sizes[1:])):
        raise ValidationError("--sizes must be a strictly decreasing list like 20000,5000")
    # the disk integral of 1/rho^2 for this profile shape is ~0.17/h^2,
    # so this h makes the generated set come out near sizes[0]
    h = float(np.sqrt(0.17 / sizes[0]))
    profile = DensityProfile(rho1=h, rho2=4 * h, d_lim=0.15, d_bl=0.2)
    domain, boundary = generate_disk_nodes(profile, args.seed)
    fine = domain.merged_with(boundary)
    rows = []
    for method in ("mf", "pd", "w"):
        cur = fine
        for target in sizes[1:]:
            target = min(target, len(cur))
            if method == "mf":
                out, c = moving_front_to_count(cur, target)
                fn = lambda: moving_front(cur, MovingFrontParams(c=c))
            elif method == "pd":
                out, c = poisson_disk_to_count(cur, target, seed=args.seed)
                fn = lambda: poisson_disk(cur, PoissonDiskParams(c=c, seed=args.seed))
            else:
                out = weighted(cur, WeightedParams(target_count=target))
                fn = lambda: weighted(cur, WeightedParams(target_count=target))
            med, mean = _bench_timed(fn, args.repetitions)
            rows.append(
                {
                    "method": method,
                    "n_in": len(cur),
                    "n_out": len(out),
                    "seconds": med,
                    "seconds_mean": mean,
                }
            )
            cur = out
    lines = ["method,n_in,n_out,seconds,seconds_mean"]
    for r in rows:
        lines.append(
            f"{r['method']},{r['n_in']},{r['n_out']},{r['seconds']:.6g},{r['seconds_mean']:.6g}"
        )
    _write_text(args.out, "\n".join(lines) + "\n")
    if args.plot:
        figures.save_timing_figure(rows, args.out + ".png")
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def build_parser():
    parser = _Parser(prog="nodethin", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a variable-density disk node set")
    p.add_argument("--rho1", type=float, required=True)
    p.add_argument("--rho2", type=float, required=True)
    p.add_argument("--d-lim", type=float, required=True)
    p.add_argument("--d-bl", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-nodes", type=int, default=2_000_000)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("subsample", help="coarsen a node file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--method", choices=("mf", "pd", "w"), default="mf")
    p.add_argument("--c", type=float, default=1.5)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--target", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--direction", default="0,1")
    p.add_argument("--alternate", action="store_true")
    p.add_argument("--boundary-mode", choices=("naive", "separate"), default=None)
    p.add_argument("--clearance", type=float, default=0.7)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_subsample)

    p = sub.add_parser("metrics", help="comparative local regularity of a subsample")
    p.add_argument("fine")
    p.add_argument("coarse")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--k-range", default=None, help="sweep k over a:b inclusive")
    p.add_argument("--out", default=None)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("solve", help="multilevel RBF-FD solve of a disk test problem")
    p.add_argument("--problem", choices=sorted(PROBLEMS), default="poisson")
    p.add_argument("--m-l", type=int, default=2)
    p.add_argument("--n-min", type=int, default=60)
    p.add_argument("--nu1", type=int, default=2)
    p.add_argument("--nu2", type=int, default=1)
    p.add_argument("--i-max", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-16)
    p.add_argument("--c", type=float, default=1.5)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--direction", default="0,1")
    p.add_argument("--domain", default=None, help="interior node CSV (else generated)")
    p.add_argument("--boundary", default=None, help="boundary node CSV (else generated)")
    p.add_argument("--scale", type=float, default=1.0, help="density scale for generation")
    p.add_argument("--rho1", type=float, default=None)
    p.add_argument("--rho2", type=float, default=None)
    p.add_argument("--d-lim", type=float, default=None)
    p.add_argument("--d-bl", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="time the subsamplers over a coarsening chain")
    p.add_argument("--sizes", required=True, help="decreasing sizes, e.g. 20000,5000,1250")
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="bench.csv")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    _apply_thread_cap()
    argv = list(sys.argv[1:] if argv is None else argv)
    if "--config" in argv:
        i = argv.index("--config")
        try:
            with open(argv[i + 1]) as fh:
                config = json.load(fh)
        except IndexError:
            print("error: --config needs a path", file=sys.stderr)
            return 1
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 3
        del argv[i : i + 2]
        extra = []
        for key, value in config.items():
            flag = "--" + key.replace("_", "-")
            if flag in argv or any(a.startswith(flag + "=") for a in argv):
                continue  # explicit flags win over the config file
            if isinstance(value, bool):
                if value:
                    extra.append(flag)
            else:
                extra.extend([flag, str(value)])
        argv = argv + extra
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except FileFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NodeThinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
