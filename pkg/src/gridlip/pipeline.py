"""End-to-end experiment driver: forge a density, encode it stage by stage,
bracket the bottleneck constant per stage, and emit CSV/JSON/SVG artifacts.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assignment import AnnealSchedule, BoundsReport, solve_exact, solve_heuristic
from .densities import ChessboardSpec, chessboard, min_chessboard_resolution, perturb_density
from .dichotomy import build_nested_families
from .encoder import encode_stage, normalize_density, plan_stage
from .geometry import GridDensity
from .io import (
    load_density,
    read_bounds_csv,
    save_assignment,
    save_density,
    save_families,
    save_separated_set,
    validate_artifacts,
    write_bounds_csv,
)


class PipelineError(RuntimeError):
    """Pipeline failure carrying the process exit code (1 invariant, 2 config/I-O)."""

    def __init__(self, message: str, exit_code: int = 2):
        super().__init__(message)
        self.exit_code = exit_code


@dataclass
class ExperimentConfig:
    """Everything one run needs; JSON keys and CLI flags share these names."""

    density: str = "constant"      # "constant" | "chessboard" | path to a density file
    resolution: int = 4
    chess_eps: float = 0.9
    chess_levels: int = 1
    chess_n: int = 4               # cubes per family level
    chess_m: int = 2               # scale ratio between levels
    p: float = 0.45
    m_sequence: tuple = (2,)
    seed: int = 0
    exact_limit: int = 12          # exact solver cap on |S|
    node_budget: int = 2_000_000
    proposals: int | None = None
    outdir: str = "out"
    record_timing: bool = False

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise PipelineError(f"config file not found: {path}", exit_code=2)
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise PipelineError(f"config {path}: {exc}", exit_code=2) from None
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise PipelineError(
                f"config {path}: unknown fields {sorted(unknown)}", exit_code=2
            )
        return cls(**raw)

    def replace(self, **kwargs) -> "ExperimentConfig":
        return dataclasses.replace(self, **kwargs)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["m_sequence"] = list(self.m_sequence)
        return out


@dataclass
class PipelineResult:
    reports: list[BoundsReport]
    csv_path: str
    summary_path: str
    failures: list[str] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 0 if not self.failures else 1


def _forge(cfg: ExperimentConfig):
    """Return (density, families-or-None) per the configured source."""
    if cfg.density == "constant":
        cells = np.ones((cfg.resolution,) * 2)
        return GridDensity(2, cfg.resolution, cells), None
    if cfg.density == "chessboard":
        families = build_nested_families(
            d=2, N=cfg.chess_n, M=cfg.chess_m, r=cfg.chess_levels, c=1
        )
        base = min_chessboard_resolution(families)
        m = base * max(1, math.ceil(cfg.resolution / base))
        phi = chessboard(families, ChessboardSpec(eps=cfg.chess_eps), m)
        one = GridDensity(2, m, np.ones((m,) * 2))
        return perturb_density(one, phi), families
    path = Path(cfg.density)
    if not path.exists():
        raise PipelineError(f"density file not found: {path}", exit_code=2)
    return load_density(path), None


def _merged_report(heur: BoundsReport, exact: BoundsReport, seed: int) -> BoundsReport:
    lower = max(heur.lower, exact.lower)
    upper = min(heur.upper, exact.upper)
    assignment = heur.assignment
    if exact.upper <= heur.upper:
        assignment = exact.assignment
    return BoundsReport(
        n=heur.n, lower=lower, upper=upper, exact=exact.exact,
        assignment=assignment, seed=seed, nodes=exact.nodes,
        completed=exact.completed,
        wall_time_ms={**heur.wall_time_ms, **exact.wall_time_ms},
    )


def run_pipeline(cfg: ExperimentConfig) -> PipelineResult:
    """Forge/load, normalize, encode each stage, bracket L_S, emit artifacts.

    Exact search runs only when the stage's point count stays within
    cfg.exact_limit. All emitted artifacts are re-validated before returning;
    every validation miss lands in result.failures (exit code 1).
    """
    outdir = Path(cfg.outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PipelineError(f"cannot create {outdir}: {exc}", exit_code=2) from None

    rho_raw, families = _forge(cfg)
    d = rho_raw.dimension
    if not 0 < cfg.p < 1.0 / max(d - 1, 1):
        raise PipelineError(
            f"p={cfg.p} outside (0, {1.0 / max(d - 1, 1)}) for d={d}", exit_code=2
        )
    if not cfg.m_sequence:
        raise PipelineError("empty m_sequence", exit_code=2)
    rho = normalize_density(rho_raw)

    artifacts = []
    density_path = outdir / "density.json"
    save_density(density_path, rho)
    artifacts.append(density_path)
    if families is not None:
        fam_path = outdir / "families.json"
        save_families(fam_path, families, M=cfg.chess_m)
        artifacts.append(fam_path)

    failures: list[str] = []
    reports: list[BoundsReport] = []
    stage_rows = []
    for m in cfg.m_sequence:
        try:
            stage = plan_stage(rho, int(m), cfg.p)
            sset = encode_stage(stage)
            n = sset.grid_side()
            set_path = outdir / f"stage_m{m}.set.json"
            save_separated_set(set_path, sset)
            artifacts.append(set_path)

            schedule = AnnealSchedule(proposals=cfg.proposals)
            rep = solve_heuristic(sset.points, n, seed=cfg.seed, schedule=schedule)
            if sset.cardinality <= cfg.exact_limit:
                rep = _merged_report(
                    rep,
                    solve_exact(sset.points, n, node_budget=cfg.node_budget),
                    cfg.seed,
                )
            asg_path = outdir / f"stage_m{m}.assignment.json"
            save_assignment(asg_path, rep.assignment, bottleneck=rep.upper)
            artifacts.append(asg_path)

            if rep.lower > rep.upper + 1e-12:
                failures.append(f"stage m={m}: lower {rep.lower} exceeds upper {rep.upper}")
            if not sset.min_pairwise_distance() > sset.separation:
                failures.append(f"stage m={m}: separation audit failed")
            reports.append(rep)
            stage_rows.append({
                "m": int(m), "l": stage.l, "n": n, "count": sset.cardinality,
                "r": float(sset.separation),
                "lower": rep.lower, "upper": rep.upper, "exact": rep.exact,
            })
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(f"stage m={m}: {exc}", exit_code=1) from exc

    csv_path = outdir / "bounds.csv"
    write_bounds_csv(csv_path, reports, record_timing=cfg.record_timing)
    artifacts.append(csv_path)

    summary_path = outdir / "summary.json"
    summary = {"config": cfg.to_dict(), "stages": stage_rows}
    summary_path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")

    for rep_file in validate_artifacts([str(p) for p in artifacts]):
        for check in rep_file.checks:
            if not check.passed:
                failures.append(f"{rep_file.path}: {check.name}: {check.detail}")

    return PipelineResult(reports=reports, csv_path=str(csv_path),
                          summary_path=str(summary_path), failures=failures)


# ------------------------------------------------------------------- plotting

_SERIES = (("lower", "#1f77b4"), ("upper", "#d62728"), ("exact", "#2ca02c"))
_W, _H = 800, 600
_MARGIN = 70


def _scale(vals_min, vals_max, lo_px, hi_px):
    span = vals_max - vals_min
    if span == 0:
        vals_min -= 1.0
        span = 2.0

    def to_px(v):
        return lo_px + (v - vals_min) / span * (hi_px - lo_px)

    return to_px, vals_min, vals_min + span


def render_plot(csv_path, svg_path) -> str:
    """Deterministic 800x600 SVG line chart of lower/upper/exact against n."""
    rows = read_bounds_csv(csv_path)
    if not rows:
        raise ValueError(f"{csv_path}: empty CSV body, nothing to plot")
    xs = [float(r["n"]) for r in rows]
    ys = [r[name] for r in rows for name, _ in _SERIES if r[name] is not None]
    x_px, x0, x1 = _scale(min(xs), max(xs), _MARGIN, _W - _MARGIN)
    y_vals_min, y_vals_max = min(ys), max(ys)
    y_px, y0, y1 = _scale(y_vals_min, y_vals_max, _H - _MARGIN, _MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_MARGIN}" y1="{_H - _MARGIN}" x2="{_W - _MARGIN}" '
        f'y2="{_H - _MARGIN}" stroke="black"/>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" '
        f'y2="{_H - _MARGIN}" stroke="black"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = x0 + frac * (x1 - x0)
        yv = y0 + frac * (y1 - y0)
        parts.append(
            f'<text x="{x_px(xv):.6g}" y="{_H - _MARGIN + 20}" font-size="12" '
            f'text-anchor="middle">{xv:.6g}</text>'
        )
        parts.append(
            f'<text x="{_MARGIN - 8}" y="{y_px(yv):.6g}" font-size="12" '
            f'text-anchor="end">{yv:.6g}</text>'
        )
    for idx, (name, color) in enumerate(_SERIES):
        pts = [(x_px(float(r["n"])), y_px(r[name]))
               for r in rows if r[name] is not None]
        if not pts:
            continue
        coord = " ".join(f"{x:.6g},{y:.6g}" for x, y in pts)
        parts.append(
            f'<polyline points="{coord}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        for x, y in pts:
            parts.append(f'<circle cx="{x:.6g}" cy="{y:.6g}" r="4" fill="{color}"/>')
        parts.append(
            f'<text x="{_W - _MARGIN + 6}" y="{_MARGIN + 18 * idx}" font-size="13" '
            f'fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    text = "\n".join(parts) + "\n"
    Path(svg_path).write_text(text)
    return str(svg_path)
