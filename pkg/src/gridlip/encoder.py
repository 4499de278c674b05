"""Staged encoding of a grid density into separated point sets.

Each stage blows the unit cube up by l = m^(1+p), splits it into m^d cells,
rounds the exact cell masses to integer point counts summing to a perfect
d-th power, and realizes the counts as r-separated points with an r/2 margin
to every cell boundary.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .geometry import Box, GridDensity, region_integral


def int_root(x: int, d: int) -> int:
    """Exact floor of the d-th root of a non-negative integer."""
    if x < 0:
        raise ValueError("x must be non-negative")
    if d < 1:
        raise ValueError("d must be >= 1")
    if x in (0, 1) or d == 1:
        return x
    r = int(round(x ** (1.0 / d)))
    while r > 0 and r ** d > x:
        r -= 1
    while (r + 1) ** d <= x:
        r += 1
    return r


def normalize_density(rho: GridDensity) -> GridDensity:
    """Divide by the exact mean so the result averages 1."""
    if rho.inf_value <= 0:
        raise ValueError("density must be strictly positive to normalize")
    avg = rho.average()
    cells = np.array(
        [float(Fraction(float(v)) / avg) for v in rho.cells.flat]
    ).reshape(rho.cells.shape)
    return GridDensity(rho.dimension, rho.resolution, cells)


def choose_power_target(floor_sum: int, slack: int, d: int) -> int:
    """Smallest a with floor_sum <= a^d <= floor_sum + slack."""
    if floor_sum < 0 or slack < 0:
        raise ValueError("floor_sum and slack must be non-negative")
    a = int_root(max(floor_sum - 1, 0), d)
    while a ** d < floor_sum:
        a += 1
    if a ** d > floor_sum + slack:
        raise ValueError(
            f"no d-th power in [{floor_sum}, {floor_sum + slack}]: "
            f"nearest candidate {a}^{d} = {a ** d}"
        )
    return a


@dataclass
class EncoderStage:
    """Plan for one encoding stage.

    counts[k] is floor of the exact cell mass l^d * integral(rho over cell k),
    plus one on the cells with the largest fractional parts, so the total is
    target^d. r = 1/(4 * sup(rho)^(1/d)) is the separation radius in the
    blown-up coordinates.
    """

    dimension: int
    m: int
    l: float
    p: float
    target: int
    r: float
    cell_integrals: np.ndarray
    floors: np.ndarray
    plus_one: frozenset
    exact_masses: list = field(default_factory=list, repr=False)

    def count(self, k: tuple[int, ...]) -> int:
        return int(self.floors[k]) + (1 if k in self.plus_one else 0)

    def cell_box(self, k: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        side = self.l / self.m
        lo = np.array(k, dtype=float) * side
        return lo, lo + side


def plan_stage(rho: GridDensity, m: int, p: float, l_override: float | None = None) -> EncoderStage:
    """Round the exact cell masses of the blown-up density to integer counts.

    Requires rho normalized (mean 1 within 1e-9) and strictly positive.
    Floors are taken on exact rational masses, the plus-one cells are the
    target^d - sum(floors) cells with the largest fractional parts (ties to
    the smaller row-major index), and every count must be >= 1.
    """
    d = rho.dimension
    if not 0 < p:
        raise ValueError("p must be positive")
    if p >= 1.0 / max(d - 1, 1):
        raise ValueError(f"p must be < 1/(d-1) = {1.0 / max(d - 1, 1)}")
    if rho.inf_value <= 0:
        raise ValueError("density must be strictly positive")
    if abs(float(rho.average()) - 1.0) > 1e-9:
        raise ValueError("density must be normalized (mean 1); see normalize_density")
    l = float(l_override) if l_override is not None else float(m) ** (1.0 + p)
    if l <= m:
        raise ValueError("blow-up factor l must exceed m")
    lfrac = Fraction(l) ** d

    masses = {}
    floors = np.zeros((m,) * d, dtype=np.int64)
    fracs = []
    for k in itertools.product(range(m), repeat=d):
        cell = Box(
            lo=tuple(Fraction(k[j], m) for j in range(d)),
            hi=tuple(Fraction(k[j] + 1, m) for j in range(d)),
        )
        mass = lfrac * region_integral(rho, cell)
        masses[k] = mass
        fl = mass.numerator // mass.denominator
        floors[k] = fl
        fracs.append((mass - fl, k))

    floor_sum = int(floors.sum())
    target = choose_power_target(floor_sum, m ** d, d)
    extra = target ** d - floor_sum
    fracs.sort(key=lambda pair: (-pair[0], pair[1]))
    plus_one = frozenset(k for _, k in fracs[:extra])

    sup = rho.sup_value
    inf = rho.inf_value
    r = 1.0 / (4.0 * sup ** (1.0 / d))
    stage = EncoderStage(
        dimension=d, m=m, l=l, p=p, target=target, r=r,
        cell_integrals=np.array(
            [float(masses[k]) for k in itertools.product(range(m), repeat=d)]
        ).reshape((m,) * d),
        floors=floors, plus_one=plus_one,
        exact_masses=[masses[k] for k in itertools.product(range(m), repeat=d)],
    )
    cell_vol_blown = (Fraction(l) / m) ** d
    lo_bound = math.floor(Fraction(inf) * cell_vol_blown)
    hi_bound = math.floor(Fraction(sup) * cell_vol_blown) + 1
    for k in itertools.product(range(m), repeat=d):
        n_k = stage.count(k)
        if n_k < 1:
            raise ValueError(
                f"cell {k} would receive 0 points: resolution/contrast mismatch "
                f"(mass {float(masses[k]):.6g})"
            )
        if not (lo_bound <= n_k <= hi_bound):
            raise AssertionError(f"count {n_k} at {k} escapes the density bounds")
    return stage


@dataclass(frozen=True)
class SeparatedSet:
    """Finite point set with a certified pairwise separation radius."""

    dimension: int
    separation: float
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 2 or pts.shape[1] != self.dimension:
            raise ValueError("points must be a (k, d) array")

    @property
    def cardinality(self) -> int:
        return self.points.shape[0]

    def grid_side(self) -> int:
        """n with n^d = cardinality; errors if the count is not a d-th power."""
        n = int_root(self.cardinality, self.dimension)
        if n ** self.dimension != self.cardinality:
            raise ValueError(f"cardinality {self.cardinality} is not a perfect "
                             f"{self.dimension}-th power")
        return n

    def min_pairwise_distance(self) -> float:
        return _min_distance(self.points)


def _min_distance(points: np.ndarray) -> float:
    """Minimum pairwise distance; bucket grid beyond 2000 points."""
    n = len(points)
    if n < 2:
        return math.inf
    if n <= 2000:
        best = math.inf
        for i in range(n - 1):
            d = np.linalg.norm(points[i + 1:] - points[i], axis=1)
            best = min(best, float(d.min()))
        return best
    # bucket by a cell size that any closer-than-current pair must straddle
    best = math.inf
    cell = None
    buckets: dict[tuple, list[int]] = {}
    # initial guess: mean nearest-neighbour scale
    span = points.max(axis=0) - points.min(axis=0)
    cell = float(max(span.max(), 1e-12)) / max(int(round(n ** (1.0 / points.shape[1]))), 1)
    for i, pt in enumerate(points):
        key = tuple((pt // cell).astype(int))
        buckets.setdefault(key, []).append(i)
    d_ = points.shape[1]
    for key, idxs in buckets.items():
        neigh = []
        for offs in itertools.product((-1, 0, 1), repeat=d_):
            neigh.extend(buckets.get(tuple(k + o for k, o in zip(key, offs)), []))
        arr = points[neigh]
        for i in idxs:
            dist = np.linalg.norm(arr - points[i], axis=1)
            dist = dist[dist > 0]
            if dist.size:
                best = min(best, float(dist.min()))
    return best


def encode_stage(stage: EncoderStage) -> SeparatedSet:
    """Realize the stage counts as points at subcell centers.

    Cell k is split into g^d equal subcells with g = ceil(count^(1/d)); the
    first count subcell centers in lexicographic order are taken. Centers
    keep distance side/(2g) >= r/2 to the cell boundary, which makes the
    whole set r-separated (and exactly the regular grid when rho is constant
    with l/m integral).
    """
    d = stage.dimension
    side = stage.l / stage.m
    pts = []
    for k in itertools.product(range(stage.m), repeat=d):
        n_k = stage.count(k)
        g = int_root(n_k, d)
        if g ** d < n_k:
            g += 1
        if side / g < stage.r:
            raise AssertionError(
                f"cell {k}: subgrid pitch {side / g:.6g} under the separation "
                f"radius {stage.r:.6g}"
            )
        lo = np.array(k, dtype=float) * side
        step = side / g
        for sub in itertools.islice(itertools.product(range(g), repeat=d), n_k):
            pts.append(lo + (np.array(sub, dtype=float) + 0.5) * step)
    points = np.array(pts)
    if len(points) != stage.target ** d:
        raise AssertionError("cardinality does not match the planned d-th power")
    sep = _min_distance(points)
    if not sep > stage.r:
        raise AssertionError(
            f"separation audit failed: min distance {sep:.6g} <= r = {stage.r:.6g}"
        )
    return SeparatedSet(dimension=d, separation=stage.r, points=points)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Uniform atoms 1/total on the stage points pulled back to the unit cube."""

    support: np.ndarray
    atom_weight: Fraction
    cell_counts: dict

    @classmethod
    def from_stage(cls, stage: EncoderStage, points: SeparatedSet) -> "DiscreteMeasure":
        total = points.cardinality
        support = points.points / stage.l
        counts: dict[tuple[int, ...], int] = {}
        for pt in points.points:
            k = tuple(
                min(int(c // (stage.l / stage.m)), stage.m - 1) for c in pt
            )
            counts[k] = counts.get(k, 0) + 1
        return cls(support=support, atom_weight=Fraction(1, total), cell_counts=counts)

    def cell_measure(self, k: tuple[int, ...]) -> Fraction:
        return self.cell_counts.get(k, 0) * self.atom_weight


def discrete_measure_deviation(stage: EncoderStage, points: SeparatedSet,
                               rho: GridDensity) -> float:
    """Max over cells of |mu(cell) - integral(rho over cell)|.

    Each cell deviation is also asserted against its a-priori bound
    1/n^d + rho_cell_integral * |l^d/n^d - 1|.
    """
    d = stage.dimension
    mu = DiscreteMeasure.from_stage(stage, points)
    n_total = points.cardinality
    lfrac = Fraction(stage.l) ** d
    worst = Fraction(0)
    for flat_idx, k in enumerate(itertools.product(range(stage.m), repeat=d)):
        mass = stage.exact_masses[flat_idx]  # l^d * integral over cell k
        integral = mass / lfrac
        dev = abs(mu.cell_measure(k) - integral)
        bound = Fraction(1, n_total) + integral * abs(lfrac / n_total - 1)
        if dev > bound:
            raise AssertionError(
                f"cell {k}: deviation {float(dev):.3g} exceeds bound {float(bound):.3g}"
            )
        worst = max(worst, dev)
    return float(worst)


def integerize(points: SeparatedSet) -> np.ndarray:
    """Scale by d/r and round to the nearest lattice point, ties toward -inf.

    Injective because the scaled set is d-separated and rounding moves each
    point by at most sqrt(d)/2.
    """
    d = points.dimension
    scale = d / points.separation
    scaled = points.points * scale
    rounded = np.ceil(scaled - 0.5).astype(np.int64)
    seen = set()
    for row in rounded:
        key = tuple(int(v) for v in row)
        if key in seen:
            raise AssertionError("integerization collided; input separation violated")
        seen.add(key)
    return rounded
