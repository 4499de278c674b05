"""Command-line front end.

Subcommands: forge, encode, solve, bound, degree, regularity, pipeline,
plot, validate. Exit codes: 0 ok, 1 invariant failure, 2 I/O or config error.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .assignment import (
    AnnealSchedule,
    counting_lower_bound,
    solve_exact,
    solve_heuristic,
)
from .densities import ChessboardSpec, chessboard, min_chessboard_resolution, perturb_density
from .dichotomy import build_nested_families
from .encoder import encode_stage, normalize_density, plan_stage
from .geometry import GridDensity
from .io import (
    fmt12,
    load_density,
    load_separated_set,
    save_assignment,
    save_density,
    save_families,
    save_piecewise_linear,
    save_separated_set,
    validate_artifacts,
    write_bounds_csv,
)
from .pipeline import ExperimentConfig, PipelineError, render_plot, run_pipeline
from .regularity import (
    FatCantorSpec,
    covering_regularity,
    identity_map_2d,
    iterated_fold_detail,
    plane_fold_map,
    preimage_count,
    reflection_map_2d,
    topological_degree,
)


def porosity_radius(eps: float, C: float, L: float, phi_sup: float, d: int) -> float:
    """The guaranteed porosity hole radius around a regular mapping.

    b = 1/(2 C^2) is the lower bilipschitz constant the convexity argument
    yields; the radius is eps / (2 (4 + C (phi_sup + 1 + 6 (L/b)^d))).
    """
    if min(eps, C, L) <= 0 or phi_sup < 0 or d < 1:
        raise ValueError("need eps, C, L > 0, phi_sup >= 0, d >= 1")
    b = 1.0 / (2.0 * C * C)
    return eps / (2.0 * (4.0 + C * (phi_sup + 1.0 + 6.0 * (L / b) ** d)))


def _cmd_forge(args) -> int:
    if args.kind == "constant":
        rho = GridDensity(2, args.resolution, np.ones((args.resolution,) * 2))
        save_density(args.out, rho)
        print(f"wrote constant density m={args.resolution} -> {args.out}")
        return 0
    families = build_nested_families(
        d=2, N=args.cubes, M=args.ratio, r=args.levels, c=1
    )
    base = min_chessboard_resolution(families)
    m = base * max(1, -(-args.resolution // base))
    phi = chessboard(families, ChessboardSpec(eps=Fraction(args.eps)), m)
    rho = perturb_density(GridDensity(2, m, np.ones((m,) * 2)), phi)
    save_density(args.out, rho)
    print(f"wrote chessboard density m={m}, eps={args.eps} -> {args.out}")
    if args.families_out:
        save_families(args.families_out, families, M=args.ratio)
        print(f"wrote {len(families)} family levels -> {args.families_out}")
    return 0


def _cmd_encode(args) -> int:
    rho = normalize_density(load_density(args.density))
    stage = plan_stage(rho, args.m, args.p, l_override=args.l)
    sset = encode_stage(stage)
    save_separated_set(args.out, sset)
    print(
        f"encoded m={args.m}: {sset.cardinality} points "
        f"(n={sset.grid_side()}), r={fmt12(sset.separation)}, "
        f"min distance {fmt12(sset.min_pairwise_distance())} -> {args.out}"
    )
    return 0


def _append_csv(path, report, record_timing: bool) -> None:
    path = Path(path)
    if path.exists():
        import csv as _csv

        from .io import bounds_csv_row

        with open(path, "a", newline="") as fh:
            _csv.writer(fh).writerow(bounds_csv_row(report, record_timing))
    else:
        write_bounds_csv(path, [report], record_timing=record_timing)


def _cmd_solve(args) -> int:
    sset = load_separated_set(args.set)
    n = sset.grid_side()
    pts = sset.points
    if args.method == "counting":
        print(f"counting lower bound: {fmt12(counting_lower_bound(pts, n))}")
        return 0
    if args.method == "exact":
        report = solve_exact(pts, n, node_budget=args.node_budget)
    else:
        schedule = AnnealSchedule(proposals=args.proposals)
        report = solve_heuristic(pts, n, seed=args.seed, schedule=schedule)
    exact_txt = "-" if report.exact is None else fmt12(report.exact)
    print(
        f"n={report.n}: lower {fmt12(report.lower)}, upper {fmt12(report.upper)}, "
        f"exact {exact_txt}"
    )
    if args.out:
        save_assignment(args.out, report.assignment, bottleneck=report.upper)
        print(f"wrote assignment -> {args.out}")
    if args.csv:
        _append_csv(args.csv, report, args.record_timing)
        print(f"appended row -> {args.csv}")
    return 0


def _cmd_bound(args) -> int:
    if args.bound_kind == "porosity-radius":
        zeta = porosity_radius(args.eps, args.C, args.L, args.phi_sup, args.d)
        print(fmt12(zeta))
        return 0
    sset = load_separated_set(args.set)
    print(fmt12(counting_lower_bound(sset.points, sset.grid_side())))
    return 0


_EXAMPLE_MAPS = {
    "identity": identity_map_2d,
    "reflection": reflection_map_2d,
    "plane-fold": plane_fold_map,
}


def _cmd_degree(args) -> int:
    map_like = _EXAMPLE_MAPS[args.map]()
    y = tuple(float(v) for v in args.y.split(","))
    region = (tuple(args.lo for _ in y), tuple(args.hi for _ in y))
    deg = topological_degree(map_like, region, y)
    print(f"deg({args.map}, [{args.lo},{args.hi}]^{len(y)}, {y}) = {deg}")
    return 0


def _cmd_regularity(args) -> int:
    detail = iterated_fold_detail(FatCantorSpec(eps=Fraction(args.eps)), args.n_max)
    f = detail.map
    print(f"folds applied: {len(detail.folds)}")
    print(f"sup |f - id| = {fmt12(float(f.sup_distance_to_identity()))} "
          f"(cap {args.eps})")
    print(f"non-expansive: {f.is_nonexpansive()}")
    probes = []
    for scale in range(2, 2 + args.scales):
        step = Fraction(1, 2 ** scale)
        probes.extend(
            (k * step, (k + 1) * step) for k in range(2 ** scale)
        )
    C = covering_regularity(f, probes, c_max=8)
    print(f"covering constant over {len(probes)} dyadic probes: {C}")
    if detail.folds:
        rec = detail.folds[0]
        y = f(rec.midpoint + rec.c / 2)
        print(f"preimage count at a fold value: {preimage_count(f, y)}")
    if args.out:
        save_piecewise_linear(args.out, f)
        print(f"wrote map -> {args.out}")
    return 0


def _cmd_pipeline(args) -> int:
    if args.config:
        cfg = ExperimentConfig.from_json(args.config)
    else:
        cfg = ExperimentConfig()
    overrides = {}
    for field_name in (
        "density", "resolution", "chess_eps", "chess_levels", "chess_n",
        "chess_m", "p", "seed", "exact_limit", "node_budget", "proposals",
        "outdir",
    ):
        value = getattr(args, field_name)
        if value is not None:
            overrides[field_name] = value
    if args.m_sequence is not None:
        overrides["m_sequence"] = tuple(
            int(tok) for tok in args.m_sequence.split(",") if tok
        )
    if args.record_timing:
        overrides["record_timing"] = True
    cfg = cfg.replace(**overrides)
    result = run_pipeline(cfg)
    for rep in result.reports:
        exact_txt = "-" if rep.exact is None else fmt12(rep.exact)
        print(f"n={rep.n}: lower {fmt12(rep.lower)}, upper {fmt12(rep.upper)}, "
              f"exact {exact_txt}")
    print(f"wrote {result.csv_path} and {result.summary_path}")
    for failure in result.failures:
        print(f"INVARIANT FAIL: {failure}", file=sys.stderr)
    return result.exit_code


def _cmd_plot(args) -> int:
    try:
        out = render_plot(args.csv, args.out)
    except ValueError as exc:  # malformed or empty CSV: an input error
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


def _cmd_validate(args) -> int:
    try:
        reports = validate_artifacts(args.paths, eps=args.eps)
    except ValueError as exc:  # unrecognized artifact kind: a config error
        print(f"error: {exc}", file=sys.stderr)
        return 2
    all_ok = True
    for rep in reports:
        for check in rep.checks:
            status = "PASS" if check.passed else "FAIL"
            detail = f" ({check.detail})" if check.detail else ""
            print(f"{status} {rep.path} [{rep.kind}] {check.name}{detail}")
            all_ok &= check.passed
    return 0 if all_ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridlip",
        description="Forge densities, encode separated sets, and bracket "
                    "bottleneck assignment constants on grids.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forge", help="create a density (and optional families)")
    p.add_argument("--kind", choices=["constant", "chessboard"], default="constant")
    p.add_argument("--resolution", type=int, default=4)
    p.add_argument("--eps", type=str, default="0.9",
                   help="chessboard amplitude (rational string ok)")
    p.add_argument("--levels", type=int, default=1)
    p.add_argument("--cubes", type=int, default=4, help="cubes per level")
    p.add_argument("--ratio", type=int, default=2, help="scale ratio between levels")
    p.add_argument("--out", required=True)
    p.add_argument("--families-out", default=None)
    p.set_defaults(fn=_cmd_forge)

    p = sub.add_parser("encode", help="plan + place one separated-set stage")
    p.add_argument("--density", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--p", type=float, default=0.45)
    p.add_argument("--l", type=float, default=None, help="blow-up override")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_encode)

    p = sub.add_parser("solve", help="bracket the bottleneck constant of a set")
    p.add_argument("--set", required=True)
    p.add_argument("--method", choices=["heuristic", "exact", "counting"],
                   default="heuristic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--proposals", type=int, default=None)
    p.add_argument("--node-budget", type=int, default=2_000_000)
    p.add_argument("--out", default=None, help="assignment JSON")
    p.add_argument("--csv", default=None, help="append a bounds row here")
    p.add_argument("--record-timing", action="store_true")
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("bound", help="closed-form and counting bounds")
    bsub = p.add_subparsers(dest="bound_kind", required=True)
    pq = bsub.add_parser("porosity-radius",
                         help="hole radius guaranteed near a regular map")
    pq.add_argument("--eps", type=float, required=True)
    pq.add_argument("--C", type=float, required=True)
    pq.add_argument("--L", type=float, required=True)
    pq.add_argument("--phi-sup", dest="phi_sup", type=float, required=True)
    pq.add_argument("--d", type=int, required=True)
    pc = bsub.add_parser("counting", help="ball-counting lower bound of a set")
    pc.add_argument("--set", required=True)
    p.set_defaults(fn=_cmd_bound)

    p = sub.add_parser("degree", help="topological degree of an example map")
    p.add_argument("--map", choices=sorted(_EXAMPLE_MAPS), required=True)
    p.add_argument("--y", required=True, help="comma-separated target point")
    p.add_argument("--lo", type=float, default=-1.0)
    p.add_argument("--hi", type=float, default=1.0)
    p.set_defaults(fn=_cmd_degree)

    p = sub.add_parser("regularity", help="iterated fold + covering audit")
    p.add_argument("--eps", type=str, default="0.1")
    p.add_argument("--n-max", dest="n_max", type=int, default=4)
    p.add_argument("--scales", type=int, default=3, help="dyadic probe scales")
    p.add_argument("--out", default=None, help="piecewise-linear JSON")
    p.set_defaults(fn=_cmd_regularity)

    p = sub.add_parser("pipeline", help="full forge/encode/solve experiment")
    p.add_argument("--config", default=None)
    p.add_argument("--density", default=None)
    p.add_argument("--resolution", type=int, default=None)
    p.add_argument("--chess-eps", dest="chess_eps", type=float, default=None)
    p.add_argument("--chess-levels", dest="chess_levels", type=int, default=None)
    p.add_argument("--chess-n", dest="chess_n", type=int, default=None)
    p.add_argument("--chess-m", dest="chess_m", type=int, default=None)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--m-sequence", dest="m_sequence", default=None,
                   help="comma-separated stage resolutions")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--exact-limit", dest="exact_limit", type=int, default=None)
    p.add_argument("--node-budget", dest="node_budget", type=int, default=None)
    p.add_argument("--proposals", type=int, default=None)
    p.add_argument("--outdir", default=None)
    p.add_argument("--record-timing", action="store_true")
    p.set_defaults(fn=_cmd_pipeline)

    p = sub.add_parser("plot", help="render a bounds CSV as an SVG chart")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_plot)

    p = sub.add_parser("validate", help="check artifact files against invariants")
    p.add_argument("paths", nargs="+")
    p.add_argument("--eps", type=float, default=None,
                   help="required adjacent-average gap for density+families")
    p.set_defaults(fn=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, AssertionError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
