"""Density constructions: multi-level chessboards and the L-infinity sweep."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .geometry import (
    Cube,
    GridDensity,
    TiledFamily,
    as_fraction,
    cell_average,
    family_grid_aligned,
)


@dataclass(frozen=True)
class ChessboardSpec:
    """Parameters of the alternating-average perturbation.

    eps bounds |psi| in sup norm; taper is the fraction of each cube side
    spent ramping to 0 at the cube boundary (keeps the construction
    continuous in spirit even though the stored object is cellwise constant).
    (1-taper)^d >= 8/9 is required so the plateau solving the exact +-8eps/9
    cube average never exceeds eps.
    """

    eps: float
    taper: Fraction = Fraction(1, 32)

    def __post_init__(self):
        object.__setattr__(self, "taper", as_fraction(self.taper))
        if not (0 < self.eps):
            raise ValueError("eps must be positive")
        if not (0 < self.taper < 1):
            raise ValueError("taper must lie in (0, 1)")

    def plateau(self, d: int) -> Fraction:
        profile_mean = (1 - self.taper) ** d
        if profile_mean < Fraction(8, 9):
            raise ValueError(
                f"taper {self.taper} too wide in dimension {d}: the plateau "
                f"8eps/9 / {profile_mean} would exceed eps"
            )
        return Fraction(8, 9) * as_fraction(self.eps) / profile_mean


def min_chessboard_resolution(families: Sequence[TiledFamily], cells_per_side: int = 4) -> int:
    """Smallest resolution aligned with every cube boundary and giving the
    finest cubes at least cells_per_side cells per axis."""
    finest = min(f.side for f in families)
    p, q = finest.numerator, finest.denominator
    k = max(1, -(-cells_per_side // p))
    return k * q


def _axis_profile(anchor: Fraction, side: Fraction, taper: Fraction, m: int) -> list[tuple[int, Fraction]]:
    """Exact per-cell averages of the 1-D ramp profile over one cube side.

    The profile is min(1, dist(x, cube boundary)/(taper*side)) on
    [anchor, anchor+side]; cells are the aligned grid cells covering it.
    Cell averages are exact trapezoid integrals divided by the cell width.
    """
    w = taper * side

    def ramp_integral(a: Fraction, b: Fraction) -> Fraction:
        """Integral of the profile over [a, b] within the cube."""
        total = Fraction(0)
        # left ramp on [anchor, anchor + w]: (x - anchor)/w
        lo, hi = max(a, anchor), min(b, anchor + w)
        if hi > lo:
            total += ((hi - anchor) ** 2 - (lo - anchor) ** 2) / (2 * w)
        # plateau on [anchor + w, anchor + side - w]
        lo, hi = max(a, anchor + w), min(b, anchor + side - w)
        if hi > lo:
            total += hi - lo
        # right ramp on [anchor + side - w, anchor + side]
        lo, hi = max(a, anchor + side - w), min(b, anchor + side)
        if hi > lo:
            top = anchor + side
            total += ((top - lo) ** 2 - (top - hi) ** 2) / (2 * w)
        return total

    start = int(anchor * m)
    stop = int((anchor + side) * m)
    out = []
    for k in range(start, stop):
        a, b = Fraction(k, m), Fraction(k + 1, m)
        out.append((k, ramp_integral(a, b) * m))
    return out


def _paint_cube(cells: np.ndarray, cube: Cube, value: Fraction,
                taper: Fraction, m: int) -> None:
    """Overwrite the cube's cells with value * product taper profile."""
    d = cube.dimension
    axis_profiles = [
        _axis_profile(cube.anchor[j], cube.side, taper, m) for j in range(d)
    ]
    idx = [np.array([k for k, _ in prof]) for prof in axis_profiles]
    weights = [np.array([float(wgt) for _, wgt in prof]) for prof in axis_profiles]
    # outer product of the per-axis profiles, scaled by the signed plateau
    prof = weights[0]
    for j in range(1, d):
        prof = np.multiply.outer(prof, weights[j])
    cells[np.ix_(*idx)] = float(value) * prof


def chessboard(families: Sequence[TiledFamily], spec: ChessboardSpec,
               resolution: int) -> GridDensity:
    """Cellwise perturbation with exactly alternating +-8eps/9 cube averages.

    Levels are painted coarse to fine; each level overwrites only inside its
    own union, so the finest family's averages are exact and coarser ones are
    polluted by at most 2*eps times their exact overlap fraction. Along every
    e1-chain the sign alternates starting at +.
    """
    if not families:
        raise ValueError("at least one family required")
    d = families[0].dimension
    for fam in families:
        if fam.dimension != d:
            raise ValueError("families must share one dimension")
        if not family_grid_aligned(fam, resolution):
            raise ValueError(
                f"resolution {resolution} does not align with the family of side "
                f"{fam.side}; use min_chessboard_resolution"
            )
    finest = min(f.side for f in families)
    if finest * resolution < 4:
        raise ValueError(
            "resolution too coarse: the finest cubes need >= 4 cells per axis"
        )
    plateau = spec.plateau(d)
    cells = np.zeros((resolution,) * d, dtype=float)
    for fam in families:
        for chain in fam.e1_chains():
            sign = 1
            for cube in chain:
                _paint_cube(cells, cube, sign * plateau, spec.taper, resolution)
                sign = -sign
    return GridDensity(d, resolution, cells)


def perturb_density(base: GridDensity, psi: GridDensity) -> GridDensity:
    """Cellwise sum phi + psi."""
    if (base.dimension, base.resolution) != (psi.dimension, psi.resolution):
        raise ValueError("densities must share dimension and resolution")
    return GridDensity(base.dimension, base.resolution, base.cells + psi.cells)


def linf_chessboard(family: TiledFamily, rho: GridDensity, eps: float) -> GridDensity:
    """Sup-norm-eps perturbation of rho with adjacent cube averages >= eps apart.

    Cubes are visited along e1-chains (fresh chains start at the remaining
    cube minimizing the first coordinate); each cube gets rho, rho+eps or
    rho-eps depending on the sign of the average difference with its
    predecessor. A difference of exactly 0 takes the +eps branch.
    """
    if not family_grid_aligned(family, rho.resolution):
        raise ValueError("family does not align with the density grid")
    if eps <= 0:
        raise ValueError("eps must be positive")
    psi = rho.cells.copy()
    m = rho.resolution

    def cube_slice(cube: Cube):
        idx = []
        for j in range(cube.dimension):
            a, b = cube.interval(j)
            idx.append(slice(int(a * m), int(b * m)))
        return tuple(idx)

    remaining = {c.anchor: c for c in family.cubes}
    side = family.side
    prev_avg = None
    next_anchor = None
    while remaining:
        # continue the chain if the predecessor had a successor; else restart
        if prev_avg is not None and next_anchor in remaining:
            cube = remaining.pop(next_anchor)
            diff = float(cell_average(rho, cube)) - prev_avg
            if abs(diff) >= eps:
                shift = 0.0
            elif diff >= 0.0:  # covers the exact-0 tie
                shift = eps
            else:
                shift = -eps
        else:
            anchor = min(remaining, key=lambda a: (a[0],) + a)
            cube = remaining.pop(anchor)
            shift = 0.0
        if shift:
            psi[cube_slice(cube)] += shift
        prev_avg = float(cell_average(GridDensity(rho.dimension, m, psi), cube))
        next_anchor = (cube.anchor[0] + side,) + cube.anchor[1:]
    return GridDensity(rho.dimension, m, psi)


def adjacent_average_gap(rho: GridDensity, family: TiledFamily) -> float:
    """Minimum |average difference| over e1-adjacent cube pairs (inf if none)."""
    side = family.side
    by_anchor = {c.anchor: c for c in family.cubes}
    best = math.inf
    for cube in family.cubes:
        succ = (cube.anchor[0] + side,) + cube.anchor[1:]
        if succ in by_anchor:
            gap = abs(float(cell_average(rho, cube) - cell_average(rho, by_anchor[succ])))
            best = min(best, gap)
    return best
