"""Flat-file artifact formats.

Rationals are serialized as "p/q" strings (or "p" when the denominator is 1)
so files round-trip exactly; plain JSON numbers are accepted on input.
JSON output is deterministic: sorted keys, two-space indent, trailing newline.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .assignment import Assignment, BoundsReport
from .encoder import SeparatedSet, int_root
from .geometry import Cube, GridDensity, TiledFamily, as_fraction
from .regularity import PiecewiseLinear1D

CSV_HEADER = ["n", "lower", "upper", "exact", "seed", "time_ms"]


def frac_str(x) -> str:
    return str(as_fraction(x))


def parse_frac(v) -> Fraction:
    if isinstance(v, str):
        return Fraction(v)
    return as_fraction(v)


def fmt12(x: float) -> str:
    return f"{float(x):.12g}"


def _dump(path, obj) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2)
    Path(path).write_text(text + "\n")


def _load(path) -> dict:
    obj = json.loads(Path(path).read_text())
    if not isinstance(obj, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return obj


# ---------------------------------------------------------------- densities

def save_density(path, rho: GridDensity) -> None:
    _dump(path, {
        "d": rho.dimension,
        "m": rho.resolution,
        "cells": [float(v) for v in rho.cells.flat],
        "inf": rho.inf_value,
        "sup": rho.sup_value,
    })


def load_density(path) -> GridDensity:
    obj = _load(path)
    rho = GridDensity(dimension=int(obj["d"]), resolution=int(obj["m"]),
                      cells=[float(v) for v in obj["cells"]])
    for key, stored, actual in (("inf", obj.get("inf"), rho.inf_value),
                                ("sup", obj.get("sup"), rho.sup_value)):
        if stored is not None and float(stored) != actual:
            raise ValueError(f"{path}: stored {key}={stored} != recomputed {actual}")
    return rho


# ------------------------------------------------------------ separated sets

def save_separated_set(path, s: SeparatedSet) -> None:
    _dump(path, {
        "d": s.dimension,
        "r": float(s.separation),
        "n": s.grid_side(),
        "points": [[float(c) for c in p] for p in s.points],
    })


def load_separated_set(path) -> SeparatedSet:
    obj = _load(path)
    s = SeparatedSet(dimension=int(obj["d"]), separation=float(obj["r"]),
                     points=np.array(obj["points"], dtype=float))
    n = int(obj["n"])
    if n ** s.dimension != s.cardinality:
        raise ValueError(
            f"{path}: n={n} inconsistent with {s.cardinality} points in d={s.dimension}"
        )
    return s


# ---------------------------------------------------------------- assignments

def save_assignment(path, a: Assignment, bottleneck: float) -> None:
    _dump(path, {
        "n": a.grid_n,
        "permutation": [int(v) for v in a.permutation],
        "bottleneck": float(bottleneck),
    })


def load_assignment(path, dimension: int | None = None) -> tuple[dict, Assignment | None]:
    obj = _load(path)
    perm = np.array(obj["permutation"], dtype=np.int64)
    a = None
    if dimension is not None:
        a = Assignment(dimension=dimension, grid_n=int(obj["n"]), permutation=perm)
    return obj, a


# ------------------------------------------------------------- tiled families

def save_families(path, families: Sequence[TiledFamily], M: int) -> None:
    fams = list(families)
    if not fams:
        raise ValueError("no families to save")
    d = fams[0].dimension
    N = len(fams[0])
    c = N * fams[0].side  # level-1 scale
    levels = []
    prev_lo = None
    for fam in fams:
        lo = tuple(min(cb.anchor[j] for cb in fam.cubes) for j in range(d))
        offset = (tuple(Fraction(0) for _ in range(d)) if prev_lo is None
                  else tuple(a - b for a, b in zip(lo, prev_lo)))
        prev_lo = lo
        levels.append({
            "side": frac_str(fam.side),
            "anchors": [[frac_str(x) for x in cb.anchor] for cb in fam.cubes],
            "offsets": [frac_str(x) for x in offset],
        })
    _dump(path, {"d": d, "N": N, "M": M, "c": frac_str(c), "levels": levels})


def load_families(path) -> tuple[list[TiledFamily], dict]:
    obj = _load(path)
    families = []
    for level in obj["levels"]:
        side = parse_frac(level["side"])
        cubes = tuple(
            Cube(side=side, anchor=tuple(parse_frac(x) for x in anchor))
            for anchor in level["anchors"]
        )
        families.append(TiledFamily(cubes=cubes))
    meta = {"d": int(obj["d"]), "N": int(obj["N"]), "M": int(obj["M"]),
            "c": parse_frac(obj["c"])}
    return families, meta


# ----------------------------------------------------- piecewise-linear maps

def save_piecewise_linear(path, pl: PiecewiseLinear1D) -> None:
    _dump(path, {
        "breakpoints": [frac_str(b) for b in pl.breakpoints],
        "values": [frac_str(v) for v in pl.values],
    })


def load_piecewise_linear(path) -> PiecewiseLinear1D:
    obj = _load(path)
    return PiecewiseLinear1D(
        breakpoints=tuple(parse_frac(b) for b in obj["breakpoints"]),
        values=tuple(parse_frac(v) for v in obj["values"]),
    )


# ------------------------------------------------------------------ schedules

def save_schedule(path, p: float, m_sequence: Sequence[int], density_file: str) -> None:
    _dump(path, {"p": p, "m_sequence": [int(m) for m in m_sequence],
                 "density_file": density_file})


def load_schedule(path) -> dict:
    obj = _load(path)
    return {"p": float(obj["p"]),
            "m_sequence": [int(m) for m in obj["m_sequence"]],
            "density_file": str(obj["density_file"])}


# ------------------------------------------------------------------ CSV table

def write_bounds_csv(path, reports: Sequence[BoundsReport],
                     record_timing: bool = True) -> None:
    """One row per report; floats at 12 significant digits, exact blank when
    unknown. With record_timing off the time column is a constant 0 so that
    identical runs give identical bytes."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rep in reports:
            writer.writerow(bounds_csv_row(rep, record_timing))


def bounds_csv_row(rep: BoundsReport, record_timing: bool = True) -> list:
    return [
        rep.n,
        fmt12(rep.lower),
        fmt12(rep.upper),
        "" if rep.exact is None else fmt12(rep.exact),
        0 if rep.seed is None else rep.seed,
        rep.total_time_ms() if record_timing else 0,
    ]


def read_bounds_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: bad header {header}, want {CSV_HEADER}")
        for i, raw in enumerate(reader, start=2):
            if len(raw) != len(CSV_HEADER):
                raise ValueError(f"{path}: row {i} has {len(raw)} fields")
            try:
                rows.append({
                    "n": int(raw[0]),
                    "lower": float(raw[1]),
                    "upper": float(raw[2]),
                    "exact": None if raw[3] == "" else float(raw[3]),
                    "seed": int(raw[4]),
                    "time_ms": float(raw[5]),
                })
            except ValueError as exc:
                raise ValueError(f"{path}: row {i}: {exc}") from None
    return rows


# ----------------------------------------------------------------- validation

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class FileReport:
    path: str
    kind: str
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)


def detect_kind(obj: dict) -> str:
    if "breakpoints" in obj:
        return "piecewise_linear"
    if "cells" in obj:
        return "density"
    if "points" in obj and "r" in obj:
        return "separated_set"
    if "permutation" in obj:
        return "assignment"
    if "levels" in obj:
        return "families"
    if "m_sequence" in obj:
        return "schedule"
    raise ValueError(f"unknown artifact kind (keys: {sorted(obj)})")


def _check(report: FileReport, name: str, fn) -> None:
    try:
        detail = fn()
        report.checks.append(CheckResult(name, True, detail or ""))
    except Exception as exc:  # noqa: BLE001 - any failure is a finding
        report.checks.append(CheckResult(name, False, str(exc)))


def validate_artifacts(paths: Sequence, eps: float | None = None) -> list[FileReport]:
    """Run each module's applicable invariant checks per file.

    When exactly one density and one families file are both given, the
    adjacent-average gap check runs across them (against eps if provided).
    """
    reports = []
    densities: list[GridDensity] = []
    family_sets: list[list[TiledFamily]] = []
    for path in paths:
        path = str(path)
        if path.endswith(".csv"):
            rep = FileReport(path=path, kind="bounds_csv")
            rows_box: list = []

            def parse(p=path, box=rows_box):
                box.extend(read_bounds_csv(p))
                return f"{len(box)} rows"

            _check(rep, "csv-schema", parse)
            if rows_box:
                def order(rows=rows_box):
                    for r in rows:
                        if r["lower"] > r["upper"] + 1e-12:
                            raise ValueError(f"n={r['n']}: lower > upper")
                        if r["exact"] is not None and not (
                            r["lower"] - 1e-12 <= r["exact"] <= r["upper"] + 1e-12
                        ):
                            raise ValueError(f"n={r['n']}: exact outside [lower, upper]")
                    return "lower <= exact <= upper"

                _check(rep, "bounds-order", order)
            reports.append(rep)
            continue

        obj = _load(path)
        kind = detect_kind(obj)
        rep = FileReport(path=path, kind=kind)
        if kind == "density":
            def load_d(p=path, sink=densities):
                rho = load_density(p)
                sink.append(rho)
                return f"m={rho.resolution}, d={rho.dimension}"

            _check(rep, "density-shape+extrema", load_d)
        elif kind == "separated_set":
            holder: list[SeparatedSet] = []

            def load_s(p=path, sink=holder):
                sink.append(load_separated_set(p))
                return f"{sink[0].cardinality} points"

            _check(rep, "cardinality-perfect-power", load_s)
            if holder:
                s = holder[0]
                _check(rep, "separation", lambda s=s: _sep_check(s))
        elif kind == "assignment":
            _check(rep, "permutation-bijective", lambda o=obj: _perm_check(o))
        elif kind == "piecewise_linear":
            def load_pl(p=path):
                pl = load_piecewise_linear(p)
                return f"{len(pl.breakpoints)} breakpoints"

            _check(rep, "breakpoint-order", load_pl)
        elif kind == "families":
            def load_f(p=path, sink=family_sets):
                fams, meta = load_families(p)
                sink.append(fams)
                _nesting_check(fams)
                return f"{len(fams)} levels, N={meta['N']}"

            _check(rep, "levels-nested", load_f)
        elif kind == "schedule":
            _check(rep, "schedule-fields", lambda p=path: _schedule_check(p))
        reports.append(rep)

    if len(densities) == 1 and len(family_sets) == 1:
        from .densities import adjacent_average_gap

        rho = densities[0]
        rep = FileReport(path="(density x families)", kind="cross")

        def gaps():
            worst = math.inf
            for fam in family_sets[0]:
                worst = min(worst, adjacent_average_gap(rho, fam))
            if eps is not None and worst < eps:
                raise ValueError(f"min adjacent gap {worst:.6g} < eps={eps}")
            return f"min adjacent gap {worst:.6g}"

        _check(rep, "adjacent-average-gap", gaps)
        reports.append(rep)
    return reports


def _sep_check(s: SeparatedSet) -> str:
    dist = s.min_pairwise_distance()
    if not dist > s.separation:
        raise ValueError(f"min distance {dist:.6g} <= r={s.separation:.6g}")
    return f"min distance {dist:.6g} > r={s.separation:.6g}"


def _perm_check(obj: dict) -> str:
    perm = list(obj["permutation"])
    size = len(perm)
    if sorted(perm) != list(range(size)):
        raise ValueError("permutation is not a bijection onto its range")
    n = int(obj["n"])
    if n < 1 or not any(n ** d == size for d in range(1, 9)):
        raise ValueError(f"size {size} is not a power of n={n}")
    if float(obj.get("bottleneck", 1.0)) <= 0:
        raise ValueError("bottleneck must be positive")
    return f"{size} targets"


def _nesting_check(fams: Sequence[TiledFamily]) -> None:
    for coarse, fine in zip(fams, fams[1:]):
        d = coarse.dimension
        n = len(coarse)
        lo_c = tuple(min(cb.anchor[j] for cb in coarse.cubes) for j in range(d))
        lo_f = tuple(min(cb.anchor[j] for cb in fine.cubes) for j in range(d))
        hi_c = (lo_c[0] + n * coarse.side,) + tuple(a + coarse.side for a in lo_c[1:])
        hi_f = (lo_f[0] + len(fine) * fine.side,) + tuple(a + fine.side for a in lo_f[1:])
        if not all(lo_f[j] >= lo_c[j] and hi_f[j] <= hi_c[j] for j in range(d)):
            raise ValueError("finer level escapes its coarse level")


def _schedule_check(path) -> str:
    sched = load_schedule(path)
    if not sched["m_sequence"]:
        raise ValueError("empty m_sequence")
    if any(m < 2 for m in sched["m_sequence"]):
        raise ValueError("stages need m >= 2")
    if not 0 < sched["p"]:
        raise ValueError("p must be positive")
    return f"{len(sched['m_sequence'])} stages"
