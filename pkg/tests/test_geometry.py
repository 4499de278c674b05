"""Exact-arithmetic checks for cubes, tilings and grid densities."""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from gridlip.geometry import (
    Box,
    Cube,
    GridDensity,
    TiledFamily,
    aligned_resolution,
    box_of,
    cell_average,
    cube_intersection_measure,
    density_cell_overlaps,
    e1_adjacent,
    family_grid_aligned,
    grid_aligned,
    overlap_fraction,
    region_integral,
)

F = Fraction


def unit_row(n, side, d=2):
    # n cubes of given side in a row along the first axis, anchored at 0
    cubes = []
    for k in range(n):
        anchor = (k * side,) + (F(0),) * (d - 1)
        cubes.append(Cube(side=side, anchor=anchor))
    return TiledFamily(cubes=tuple(cubes))


def test_cube_anchor_must_sit_on_its_own_lattice():
    Cube(side=F(1, 4), anchor=(F(1, 2), F(3, 4)))  # fine: multiples of 1/4
    with pytest.raises(ValueError):
        Cube(side=F(1, 4), anchor=(F(1, 3), F(0)))
    with pytest.raises(ValueError):
        Cube(side=F(0), anchor=(F(0),))


def test_cube_basic_geometry():
    c = Cube(side=F(1, 4), anchor=(F(1, 2), F(1, 4)))
    assert c.dimension == 2
    assert c.upper == (F(3, 4), F(1, 2))
    assert c.measure() == F(1, 16)
    assert c.interval(1) == (F(1, 4), F(1, 2))


def test_box_validation():
    with pytest.raises(ValueError):
        Box(lo=(F(0), F(0)), hi=(F(0), F(1)))  # empty on axis 0
    b = Box(lo=(F(0),), hi=(F(1, 3),))
    assert b.measure() == F(1, 3)


def test_box_of_accepts_plain_pairs():
    b = box_of(((0, 0), (1, 1)))
    assert isinstance(b, Box)
    assert b.measure() == 1


def test_e1_adjacency():
    s = F(1, 4)
    a = Cube(side=s, anchor=(F(0), F(0)))
    assert e1_adjacent(a, Cube(side=s, anchor=(s, F(0))))
    # diagonal and e2 translates do not count
    assert not e1_adjacent(a, Cube(side=s, anchor=(s, s)))
    assert not e1_adjacent(a, Cube(side=s, anchor=(F(0), s)))
    # order matters: successor only
    assert not e1_adjacent(Cube(side=s, anchor=(s, F(0))), a)


def test_tiled_family_rejects_mixed_sides_and_duplicates():
    a = Cube(side=F(1, 4), anchor=(F(0), F(0)))
    b = Cube(side=F(1, 2), anchor=(F(1, 2), F(0)))
    with pytest.raises(ValueError):
        TiledFamily(cubes=(a, b))
    with pytest.raises(ValueError):
        TiledFamily(cubes=(a, a))


def test_e1_chains_split_on_gaps():
    s = F(1, 8)
    anchors = [0, 1, 2, 4, 5, 7]  # runs {0,1,2}, {4,5}, {7}
    fam = TiledFamily(cubes=tuple(
        Cube(side=s, anchor=(k * s, F(0))) for k in anchors
    ))
    chains = fam.e1_chains()
    assert [len(ch) for ch in chains] == [3, 2, 1]
    for ch in chains:
        for prev, nxt in zip(ch, ch[1:]):
            assert e1_adjacent(prev, nxt)


def test_cube_intersection_measure_values():
    a = Cube(side=F(1), anchor=(F(0), F(0)))
    b = Box(lo=(F(1, 2), F(1, 2)), hi=(F(3, 2), F(3, 2)))
    assert cube_intersection_measure(a, b) == F(1, 4)
    far = Cube(side=F(1), anchor=(F(2), F(0)))
    assert cube_intersection_measure(a, far) == 0
    assert cube_intersection_measure(a, a) == 1


def test_cube_intersection_measure_symmetric_and_bounded():
    rng = np.random.RandomState(0)
    for _ in range(50):
        lo = [F(int(v), 16) for v in rng.randint(0, 12, size=2)]
        hi = [a + F(int(v), 16) for a, v in zip(lo, rng.randint(1, 5, size=2))]
        b1 = Box(lo=tuple(lo), hi=tuple(hi))
        lo2 = [F(int(v), 16) for v in rng.randint(0, 12, size=2)]
        hi2 = [a + F(int(v), 16) for a, v in zip(lo2, rng.randint(1, 5, size=2))]
        b2 = Box(lo=tuple(lo2), hi=tuple(hi2))
        m = cube_intersection_measure(b1, b2)
        assert m == cube_intersection_measure(b2, b1)
        assert 0 <= m <= min(b1.measure(), b2.measure())


def brute_average(rho, box):
    # independent oracle: clip every cell against the box, O(m^d)
    m = rho.resolution
    total = F(0)
    weight = F(0)
    for idx in itertools.product(range(m), repeat=rho.dimension):
        w = F(1)
        for axis, k in enumerate(idx):
            lo = max(box.lo[axis], F(k, m))
            hi = min(box.hi[axis], F(k + 1, m))
            w *= max(F(0), hi - lo)
        if w > 0:
            total += w * F(rho.cells[idx]).limit_denominator(10**12)
            weight += w
    return total / weight


def test_cell_average_constant_density():
    rho = GridDensity(2, 4, np.full((4, 4), 3.0))
    region = Cube(side=F(1, 2), anchor=(F(1, 2), F(0)))
    assert cell_average(rho, region) == 3


def test_cell_average_quadrants():
    rho = GridDensity(2, 2, np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert cell_average(rho, Box(lo=(F(0), F(0)), hi=(F(1), F(1)))) == F(5, 2)
    # left half in the first coordinate picks up cells (0,0) and (0,1)
    assert cell_average(rho, Box(lo=(F(0), F(0)), hi=(F(1, 2), F(1)))) == F(3, 2)


def test_cell_average_partial_overlap_1d():
    rho = GridDensity(1, 2, np.array([0.0, 1.0]))
    got = cell_average(rho, Box(lo=(F(1, 4),), hi=(F(3, 4),)))
    assert got == F(1, 2)


def test_cell_average_region_outside_unit_cube():
    rho = GridDensity(2, 2, np.ones((2, 2)))
    with pytest.raises(ValueError):
        cell_average(rho, Box(lo=(F(1, 2), F(0)), hi=(F(3, 2), F(1))))


def test_cell_average_matches_bruteforce_oracle():
    rng = np.random.RandomState(1)
    for trial in range(20):
        m = int(rng.randint(2, 6))
        cells = rng.randint(1, 9, size=(m, m)).astype(float)
        rho = GridDensity(2, m, cells)
        denom = 24
        lo = [F(int(v), denom) for v in rng.randint(0, denom - 1, size=2)]
        hi = [
            min(F(1), a + F(int(v), denom))
            for a, v in zip(lo, rng.randint(1, denom, size=2))
        ]
        box = Box(lo=tuple(lo), hi=tuple(hi))
        assert cell_average(rho, box) == brute_average(rho, box)


def test_region_integral_additivity():
    rng = np.random.RandomState(2)
    cells = rng.rand(4, 4) + 0.5
    rho = GridDensity(2, 4, cells)
    left = Box(lo=(F(0), F(0)), hi=(F(1, 2), F(1)))
    right = Box(lo=(F(1, 2), F(0)), hi=(F(1), F(1)))
    whole = Box(lo=(F(0), F(0)), hi=(F(1), F(1)))
    total = region_integral(rho, left) + region_integral(rho, right)
    assert total == region_integral(rho, whole)
    assert region_integral(rho, whole) == rho.average()


def test_density_cell_overlaps_weights_sum_to_region_measure():
    rho = GridDensity(2, 8, np.ones((8, 8)))
    box = Box(lo=(F(1, 3), F(1, 5)), hi=(F(2, 3), F(4, 5)))
    weights = density_cell_overlaps(rho, box)
    assert sum(weights.values()) == box.measure()
    assert all(w > 0 for w in weights.values())


def rasterized_overlap(cube, families, grid):
    # oracle: rasterize everything on a common refinement of resolution `grid`
    step = F(1, grid)
    covered = 0
    total = 0
    lo = cube.anchor
    span = int(cube.side / step)
    for idx in itertools.product(range(span), repeat=cube.dimension):
        center = tuple(lo[a] + (idx[a] + F(1, 2)) * step for a in range(cube.dimension))
        total += 1
        hit = False
        for fam in families:
            for c in fam:
                if all(c.anchor[a] <= center[a] < c.anchor[a] + c.side
                       for a in range(cube.dimension)):
                    hit = True
                    break
            if hit:
                break
        if hit:
            covered += 1
    return F(covered, total)


def test_overlap_fraction_zero_offset_two_levels():
    # one coarse cube of side 1/4, one finer family of 4 cubes of side 1/32
    coarse = Cube(side=F(1, 4), anchor=(F(0), F(0)))
    fine = TiledFamily(cubes=tuple(
        Cube(side=F(1, 32), anchor=(k * F(1, 32), F(0))) for k in range(4)
    ))
    got = overlap_fraction(coarse, [fine])
    assert got == F(4 * 1, 32 * 32) / F(1, 16)
    assert got == rasterized_overlap(coarse, [fine], 32)


def test_overlap_fraction_empty_and_full():
    coarse = Cube(side=F(1, 4), anchor=(F(0), F(0)))
    assert overlap_fraction(coarse, []) == 0
    elsewhere = TiledFamily(cubes=(Cube(side=F(1, 8), anchor=(F(1, 2), F(0))),))
    assert overlap_fraction(coarse, [elsewhere]) == 0
    same = TiledFamily(cubes=(coarse,))
    assert overlap_fraction(coarse, [same]) == 1


def test_overlap_fraction_inclusion_exclusion_across_families():
    # two overlapping families inside one coarse cube; oracle by rasterizing
    coarse = Cube(side=F(1, 2), anchor=(F(0), F(0)))
    famA = TiledFamily(cubes=(
        Cube(side=F(1, 8), anchor=(F(0), F(0))),
        Cube(side=F(1, 8), anchor=(F(1, 8), F(0))),
    ))
    famB = TiledFamily(cubes=(
        Cube(side=F(1, 16), anchor=(F(1, 16), F(0))),
    ))
    got = overlap_fraction(coarse, [famA, famB])
    assert got == rasterized_overlap(coarse, [famA, famB], 16)
    # famB is swallowed by famA so the union is famA alone
    assert got == F(2, 64) / F(1, 4)


def test_grid_density_average_and_index_range():
    rho = GridDensity(1, 4, np.array([1.0, 2.0, 3.0, 4.0]))
    assert rho.average() == F(5, 2)
    assert list(rho.cell_index_range((F(1, 4), F(3, 4)))) == [1, 2]
    assert rho.value_at_cell((3,)) == 4.0


def test_grid_density_shape_validation():
    with pytest.raises(ValueError):
        GridDensity(2, 4, np.ones((4, 3)))
    with pytest.raises(ValueError):
        GridDensity(2, 0, np.ones((0, 0)))


def test_alignment_helpers():
    assert grid_aligned(F(1, 4), 8)
    assert not grid_aligned(F(1, 3), 8)
    assert aligned_resolution(F(1, 4)) == 4
    assert aligned_resolution(F(1, 4), minimum_cells=3) == 12
    fam = unit_row(2, F(1, 4))
    assert family_grid_aligned(fam, 8)
    assert not family_grid_aligned(fam, 6)
