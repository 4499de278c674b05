"""Exact rational geometry: axis-aligned cubes, tiled families, grid densities.

Everything that feeds an equality or inequality assertion elsewhere in the
package is computed here in `fractions.Fraction` arithmetic; floats only
appear as cell *values* (weights and measures stay rational).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

RationalLike = int | float | str | Fraction


def as_fraction(x: RationalLike) -> Fraction:
    """Coerce to an exact Fraction.

    Floats convert exactly (binary64 values are rationals); strings accept
    "p/q" and decimal literals.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(float(x))


@dataclass(frozen=True)
class Cube:
    """Half-open axis-aligned cube anchor + [0, side)^d on a side-aligned lattice.

    The anchor must be a componentwise integer multiple of the side — this is
    what makes a collection of same-side cubes a sub-collection of the standard
    tiling of R^d.
    """

    side: Fraction
    anchor: tuple[Fraction, ...]

    def __post_init__(self):
        side = as_fraction(self.side)
        anchor = tuple(as_fraction(a) for a in self.anchor)
        object.__setattr__(self, "side", side)
        object.__setattr__(self, "anchor", anchor)
        if side <= 0:
            raise ValueError("cube side must be positive")
        for a in anchor:
            if (a / side).denominator != 1:
                raise ValueError(
                    f"anchor {a} is not an integer multiple of side {side}"
                )

    @property
    def dimension(self) -> int:
        return len(self.anchor)

    @property
    def upper(self) -> tuple[Fraction, ...]:
        return tuple(a + self.side for a in self.anchor)

    def measure(self) -> Fraction:
        return self.side ** self.dimension

    def interval(self, axis: int) -> tuple[Fraction, Fraction]:
        return self.anchor[axis], self.anchor[axis] + self.side

    def contains_box(self, other: "Cube") -> bool:
        return all(
            self.anchor[j] <= other.anchor[j]
            and other.anchor[j] + other.side <= self.anchor[j] + self.side
            for j in range(self.dimension)
        )


@dataclass(frozen=True)
class Box:
    """Loose axis-aligned box (probe regions, test windows).

    Unlike Cube it carries no lattice-alignment invariant and may have
    unequal extents per axis.
    """

    lo: tuple[Fraction, ...]
    hi: tuple[Fraction, ...]

    def __post_init__(self):
        lo = tuple(as_fraction(a) for a in self.lo)
        hi = tuple(as_fraction(a) for a in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi):
            raise ValueError("lo/hi dimension mismatch")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError("box must have positive extent on every axis")

    @property
    def dimension(self) -> int:
        return len(self.lo)

    def measure(self) -> Fraction:
        m = Fraction(1)
        for l, h in zip(self.lo, self.hi):
            m *= h - l
        return m

    def interval(self, axis: int) -> tuple[Fraction, Fraction]:
        return self.lo[axis], self.hi[axis]

    def contains_point(self, p: Sequence[float]) -> bool:
        return all(l <= x <= h for x, l, h in zip(p, self.lo, self.hi))


def box_of(region) -> Box:
    """Normalize a Cube, Box, or (lo, hi) pair to a Box."""
    if isinstance(region, Box):
        return region
    if isinstance(region, Cube):
        return Box(lo=region.anchor, hi=region.upper)
    if isinstance(region, (tuple, list)) and len(region) == 2:
        return Box(lo=tuple(region[0]), hi=tuple(region[1]))
    raise TypeError(f"expected Cube, Box or (lo, hi), got {type(region).__name__}")


@dataclass(frozen=True)
class TiledFamily:
    """Finite set of equal-side tiling cubes with pairwise disjoint interiors."""

    cubes: tuple[Cube, ...]

    def __post_init__(self):
        cubes = tuple(self.cubes)
        object.__setattr__(self, "cubes", cubes)
        if not cubes:
            raise ValueError("a tiled family needs at least one cube")
        side = cubes[0].side
        dim = cubes[0].dimension
        seen = set()
        for c in cubes:
            if c.side != side:
                raise ValueError("all cubes in a family must share one side length")
            if c.dimension != dim:
                raise ValueError("mixed dimensions in family")
            if c.anchor in seen:
                raise ValueError(f"duplicate cube anchored at {c.anchor}")
            seen.add(c.anchor)
        # same side + distinct anchors on the side-lattice => interiors disjoint

    @property
    def side(self) -> Fraction:
        return self.cubes[0].side

    @property
    def dimension(self) -> int:
        return self.cubes[0].dimension

    def __len__(self) -> int:
        return len(self.cubes)

    def __iter__(self):
        return iter(self.cubes)

    def union_measure(self) -> Fraction:
        return len(self.cubes) * self.cubes[0].measure()

    def anchor_set(self) -> set[tuple[Fraction, ...]]:
        return {c.anchor for c in self.cubes}

    def e1_chains(self) -> list[list[Cube]]:
        """Split the family into maximal chains of consecutive e1-neighbours.

        Chains are returned left-to-right; chain starts are ordered by
        (first coordinate, then full anchor) so traversal is deterministic.
        """
        anchors = self.anchor_set()
        side = self.side
        starts = []
        for c in self.cubes:
            pred = (c.anchor[0] - side,) + c.anchor[1:]
            if pred not in anchors:
                starts.append(c)
        starts.sort(key=lambda c: c.anchor)
        by_anchor = {c.anchor: c for c in self.cubes}
        chains = []
        for s in starts:
            chain = [s]
            nxt = (s.anchor[0] + side,) + s.anchor[1:]
            while nxt in by_anchor:
                chain.append(by_anchor[nxt])
                nxt = (nxt[0] + side,) + nxt[1:]
            chains.append(chain)
        return chains


def e1_adjacent(a: Cube, b: Cube) -> bool:
    """True iff b is a's successor along the first coordinate axis (b = a + side*e1)."""
    if a.side != b.side:
        raise ValueError("e1-adjacency is only defined for equal-side cubes")
    if a.dimension != b.dimension:
        raise ValueError("dimension mismatch")
    expected = (a.anchor[0] + a.side,) + a.anchor[1:]
    return b.anchor == expected


class GridDensity:
    """Piecewise-constant density on the unit cube: m^d equal cells, float values.

    Cell (k_1, ..., k_d) covers prod_j [k_j/m, (k_j+1)/m); storage is row-major
    with the last axis fastest.
    """

    def __init__(self, dimension: int, resolution: int, cells: np.ndarray | Sequence[float]):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        if resolution < 1:
            raise ValueError("resolution must be >= 1")
        arr = np.asarray(cells, dtype=float)
        if arr.size != resolution ** dimension:
            raise ValueError(
                f"expected {resolution ** dimension} cells, got {arr.size}"
            )
        self.dimension = dimension
        self.resolution = resolution
        self.cells = arr.reshape((resolution,) * dimension)
        self.inf_value = float(self.cells.min())
        self.sup_value = float(self.cells.max())

    def copy(self) -> "GridDensity":
        return GridDensity(self.dimension, self.resolution, self.cells.copy())

    def value_at_cell(self, index: tuple[int, ...]) -> float:
        return float(self.cells[index])

    def average(self) -> Fraction:
        """Exact mean of all cells (cells have equal volume)."""
        total = Fraction(0)
        for v in self.cells.flat:
            total += Fraction(float(v))
        return total / self.cells.size

    def cell_index_range(self, axis_interval: tuple[Fraction, Fraction]) -> range:
        """Indices of cells meeting the interval with positive length."""
        a, b = axis_interval
        m = self.resolution
        lo = max(0, math.floor(a * m))
        hi = min(m, math.ceil(b * m))
        return range(lo, hi)


def _axis_overlaps(
    interval: tuple[Fraction, Fraction], m: int
) -> list[tuple[int, Fraction]]:
    """Per-axis (cell index, exact overlap length) pairs with positive overlap."""
    a, b = interval
    out = []
    lo = max(0, math.floor(a * m))
    hi = min(m, math.ceil(b * m))
    for k in range(lo, hi):
        left = max(a, Fraction(k, m))
        right = min(b, Fraction(k + 1, m))
        if right > left:
            out.append((k, right - left))
    return out


def cube_intersection_measure(first, second) -> Fraction:
    """Exact Lebesgue measure of the intersection of two cubes/boxes."""
    a, b = box_of(first), box_of(second)
    if a.dimension != b.dimension:
        raise ValueError("dimension mismatch")
    m = Fraction(1)
    for j in range(a.dimension):
        lo = max(a.lo[j], b.lo[j])
        hi = min(a.hi[j], b.hi[j])
        if hi <= lo:
            return Fraction(0)
        m *= hi - lo
    return m


def density_cell_overlaps(rho: GridDensity, region) -> dict[tuple[int, ...], Fraction]:
    """Exact Lebesgue overlap of the region with every density cell it meets."""
    box = box_of(region)
    if box.dimension != rho.dimension:
        raise ValueError("dimension mismatch between density and region")
    per_axis = [_axis_overlaps(box.interval(j), rho.resolution) for j in range(rho.dimension)]
    weights: dict[tuple[int, ...], Fraction] = {}
    for combo in itertools.product(*per_axis):
        idx = tuple(k for k, _ in combo)
        w = Fraction(1)
        for _, length in combo:
            w *= length
        weights[idx] = w
    return weights


def cell_average(rho: GridDensity, region) -> Fraction:
    """Exact average of the density over a cube/box.

    The result is the rational combination of cell values (floats converted
    exactly) weighted by exact intersection volumes; round with float() at the
    call site if a binary64 is wanted.
    """
    box = box_of(region)
    weights = density_cell_overlaps(rho, box)
    total = Fraction(0)
    covered = Fraction(0)
    for idx, w in weights.items():
        total += Fraction(float(rho.cells[idx])) * w
        covered += w
    vol = box.measure()
    if covered != vol:
        raise ValueError("region is not contained in the unit cube")
    return total / vol


def region_integral(rho: GridDensity, region) -> Fraction:
    """Exact integral of the density over a region inside the unit cube."""
    box = box_of(region)
    weights = density_cell_overlaps(rho, box)
    total = Fraction(0)
    covered = Fraction(0)
    for idx, w in weights.items():
        total += Fraction(float(rho.cells[idx])) * w
        covered += w
    if covered != box.measure():
        raise ValueError("region is not contained in the unit cube")
    return total


def _box_intersection_measure(boxes: Sequence[Cube]) -> Fraction:
    """Measure of the common intersection of cubes (0 if empty)."""
    d = boxes[0].dimension
    m = Fraction(1)
    for j in range(d):
        lo = max(b.anchor[j] for b in boxes)
        hi = min(b.anchor[j] + b.side for b in boxes)
        if hi <= lo:
            return Fraction(0)
        m *= hi - lo
    return m


def overlap_fraction(cube: Cube, finer: Sequence[TiledFamily]) -> Fraction:
    """Exact L(S ∩ union of finer families) / L(S).

    Within one family cubes have disjoint interiors, so the union measure over
    several families follows from inclusion-exclusion across families, with
    one cube chosen per participating family.
    """
    if not finer:
        return Fraction(0)
    relevant: list[list[Cube]] = []
    for fam in finer:
        hits = [c for c in fam if _box_intersection_measure([cube, c]) > 0]
        if hits:
            relevant.append(hits)
    if not relevant:
        return Fraction(0)
    total = Fraction(0)
    k = len(relevant)
    for size in range(1, k + 1):
        sign = 1 if size % 2 == 1 else -1
        for families in itertools.combinations(relevant, size):
            for combo in itertools.product(*families):
                total += sign * _box_intersection_measure([cube, *combo])
    return total / cube.measure()


def aligned_resolution(side: Fraction, minimum_cells: int = 1) -> int:
    """Smallest grid resolution m with m*side integral and >= minimum_cells per side."""
    side = as_fraction(side)
    if side <= 0:
        raise ValueError("side must be positive")
    q = side.denominator
    p = side.numerator
    k = max(1, -(-minimum_cells // p))  # ceil(minimum_cells / p)
    return k * q


def grid_aligned(side_or_anchor: Fraction, resolution: int) -> bool:
    """True iff the rational coordinate lies on the 1/resolution grid."""
    return (as_fraction(side_or_anchor) * resolution).denominator == 1


def family_grid_aligned(family: TiledFamily, resolution: int) -> bool:
    if not grid_aligned(family.side, resolution):
        return False
    return all(
        grid_aligned(a, resolution) for c in family for a in c.anchor
    )
