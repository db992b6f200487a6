"""Command-line entry points.

    sephydro simulate --config exp.yaml
    sephydro compare --config exp.yaml
    sephydro duality-check --interior-sites 3 --m 2 --alpha 0.7 --t 1.0 \
        --s 0,1,2,0,0 --s-prime 0,1,0,1,0
    sephydro hitting --d 3 --r 2 --tau 1 [--table 1.1:4:0.1] [--out x.csv]
    sephydro pde --equation density --d 3 --alpha 1 --tau-end 1 --out x.csv
    sephydro pde --residual --d 2 --alpha 1 --r-range 1.2:4:8 \
        --tau-range 0.2:2:6 --out res.csv

Exit code 0 iff every enabled check passes (compare honors the config's
`thresholds` block; the other commands fail only on errors).
"""

import argparse
import json
import sys

import numpy as np

from . import duality, harness, hitting, hydro
from ._backend import backend_name


def _parse_range(spec):
    lo, hi, step = spec.split(":")
    return float(lo), float(hi), float(step)


def _parse_grid(spec):
    lo, hi, n = spec.split(":")
    return np.linspace(float(lo), float(hi), int(n))


def _cmd_simulate(args):
    cfg = harness.ExperimentConfig.from_yaml(args.config)
    paths = harness.simulate_to_csv(cfg)
    for p in paths:
        print(p)
    return 0


def _cmd_compare(args):
    cfg = harness.ExperimentConfig.from_yaml(args.config)
    report = harness.compare_from_artifacts(cfg)
    ok, msgs = harness.thresholds_pass(cfg, report)
    print(json.dumps({
        "nominal_scale": report.nominal_scale,
        "fitted_scales": {str(k): v for k, v in report.fitted_scales.items()},
        "max_gaps": {str(e["L"]): e["max_gap"] for e in report.entries},
        "checks": msgs,
    }, indent=2, sort_keys=True))
    return 0 if ok else 1


def _cmd_duality_check(args):
    graph = duality.LatticeGraph.segment(args.interior_sites)
    s = [int(x) for x in args.s.split(",")]
    sp = [int(x) for x in args.s_prime.split(",")]
    if len(s) != graph.n_sites or len(sp) != graph.n_sites:
        print(f"occupancy vectors must have length {graph.n_sites} "
              f"(boundary, {args.interior_sites} interior, boundary)",
              file=sys.stderr)
        return 2
    lhs, rhs, gap = duality.check_duality(graph, args.m, args.alpha, s, sp,
                                          args.t)
    print(json.dumps({"lhs": lhs, "rhs": rhs, "gap": gap}))
    return 0


def _cmd_hitting(args):
    rows = []
    if args.table:
        lo, hi, step = _parse_range(args.table)
        rs = np.arange(lo, hi + 0.5 * step, step)
    else:
        rs = [args.r]
    cdfs = hitting.hitting_cdf_profile(args.d, rs, args.tau)
    for r, c in zip(rs, cdfs):
        rows.append(f"{r:.10g},{args.tau:.10g},{c:.10g}")
    text = "r,tau,cdf\n" + "\n".join(rows) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_pde(args):
    if args.residual:
        r_grid = _parse_grid(args.r_range)
        tau_grid = _parse_grid(args.tau_range)
        grid = hydro.pde_residual_grid(args.d, args.alpha, r_grid, tau_grid)
        lines = ["r,tau,residual"]
        for i, tau in enumerate(tau_grid):
            for j, r in enumerate(r_grid):
                lines.append(f"{r:.10g},{tau:.10g},{grid[i, j]:.10g}")
        text = "\n".join(lines) + "\n"
        meta = {"kind": "residual", "d": args.d, "alpha": args.alpha,
                "max_residual": float(grid.max())}
    else:
        solve = (hydro.solve_radial_heat if args.equation == "density"
                 else hydro.solve_height_pde)
        fld = solve(args.d, args.alpha, r_max=args.r_max, dr=args.dr,
                    dtau=args.dtau, tau_end=args.tau_end)
        lines = ["r,tau,value"]
        for r, v in zip(fld.r_grid, fld.values):
            lines.append(f"{r:.10g},{fld.tau:.10g},{v:.10g}")
        text = "\n".join(lines) + "\n"
        meta = dict(fld.meta, kind=args.equation, d=args.d, alpha=args.alpha)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        with open(args.out + ".meta.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
        print(args.out)
    else:
        sys.stdout.write(text)
        print(json.dumps(meta), file=sys.stderr)
    return 0


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="sephydro",
        description="Open exclusion-process simulation and hydrodynamic "
                    "cross-validation")
    ap.add_argument("--backend", action="store_true",
                    help="print the kernel backend and exit")
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("simulate", help="run replicas, write density CSVs")
    p.add_argument("--config", required=True)

    p = sub.add_parser("compare", help="compare density CSVs against phi")
    p.add_argument("--config", required=True)

    p = sub.add_parser("duality-check",
                       help="lhs/rhs/gap of the duality identity as JSON")
    p.add_argument("--interior-sites", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--s", required=True,
                   help="comma-separated occupancies over all graph sites")
    p.add_argument("--s-prime", required=True)

    p = sub.add_parser("hitting", help="hitting-time CDF table as CSV")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--table", help="rmin:rmax:step")
    p.add_argument("--out")

    p = sub.add_parser("pde", help="radial PDE solutions / residual grids")
    p.add_argument("--equation", choices=["density", "height"],
                   default="density")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--tau-end", type=float, default=1.0)
    p.add_argument("--dr", type=float, default=0.01)
    p.add_argument("--dtau", type=float, default=0.001)
    p.add_argument("--r-max", type=float, default=None)
    p.add_argument("--residual", action="store_true",
                   help="emit the phi residual grid instead of a solve")
    p.add_argument("--r-range", default="1.2:4:8", help="lo:hi:n")
    p.add_argument("--tau-range", default="0.2:2:6", help="lo:hi:n")
    p.add_argument("--out")

    args = ap.parse_args(argv)
    if args.backend:
        print(backend_name())
        return 0
    handlers = {
        "simulate": _cmd_simulate,
        "compare": _cmd_compare,
        "duality-check": _cmd_duality_check,
        "hitting": _cmd_hitting,
        "pde": _cmd_pde,
    }
    if args.command is None:
        ap.print_help()
        return 2
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
