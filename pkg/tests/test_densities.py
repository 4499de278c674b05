"""Chessboard perturbations: exact cube averages, gaps, sup-norm budgets."""

import math
from fractions import Fraction

import numpy as np
import pytest

from gridlip.densities import (
    ChessboardSpec,
    adjacent_average_gap,
    chessboard,
    linf_chessboard,
    min_chessboard_resolution,
    perturb_density,
)
from gridlip.dichotomy import build_nested_families
from gridlip.geometry import (
    Cube,
    GridDensity,
    TiledFamily,
    cell_average,
    overlap_fraction,
)

F = Fraction


def row_family(n, side, d=2):
    return TiledFamily(cubes=tuple(
        Cube(side=side, anchor=(k * side,) + (F(0),) * (d - 1))
        for k in range(n)
    ))


def test_plateau_value():
    spec = ChessboardSpec(eps=F(9, 10))
    assert spec.plateau(2) == F(4096, 4805)
    # plateau stays below eps whenever the taper constraint holds
    assert spec.plateau(2) <= F(9, 10)


def test_spec_validation():
    with pytest.raises(ValueError):
        ChessboardSpec(eps=0)
    with pytest.raises(ValueError):
        ChessboardSpec(eps=0.5, taper=F(3, 2))
    # too much taper: the mean profile drops below 8/9 and the plateau
    # would have to exceed eps
    with pytest.raises(ValueError):
        ChessboardSpec(eps=0.5, taper=F(1, 2)).plateau(2)


def test_min_chessboard_resolution():
    fam = row_family(4, F(1, 4))
    assert min_chessboard_resolution([fam]) == 16
    fams = build_nested_families(d=2, N=4, M=2, r=2, c=1)
    assert min_chessboard_resolution(fams) == 128
    assert min_chessboard_resolution(fams, cells_per_side=1) == 32


@pytest.mark.parametrize("eps", [F(9, 10), F(1, 3), F(1, 10)])
def test_single_level_chessboard_exact_averages(eps):
    fam = row_family(4, F(1, 4))
    spec = ChessboardSpec(eps=eps)
    rho = chessboard([fam], spec, 16)
    want = F(8, 9) * eps
    for k, cube in enumerate(fam.cubes):
        avg = float(cell_average(rho, cube))
        sign = 1 if k % 2 == 0 else -1
        # float cells: exact up to one rounding of the plateau value
        assert avg == pytest.approx(sign * float(want), abs=1e-12)
    # e1-adjacent averages differ by 16 eps / 9 (well inside the 1e-9 budget)
    assert adjacent_average_gap(rho, fam) == pytest.approx(float(2 * want), abs=1e-12)
    # sup norm budget: |psi| <= plateau <= eps everywhere
    assert np.abs(rho.cells).max() <= float(spec.plateau(2)) + 1e-15
    assert spec.plateau(2) <= eps


def test_chessboard_support_and_fresh_chain_signs():
    # two separated rows: each e1-chain restarts with a + cube
    s = F(1, 8)
    cubes = tuple(Cube(side=s, anchor=(k * s, F(0))) for k in range(2))
    cubes += tuple(Cube(side=s, anchor=(k * s, F(1, 2))) for k in range(2))
    fam = TiledFamily(cubes=cubes)
    rho = chessboard([fam], ChessboardSpec(eps=F(1, 2)), 32)
    for cube in fam.cubes:
        avg = float(cell_average(rho, cube))
        sign = 1.0 if cube.anchor[0] == 0 else -1.0
        assert avg == pytest.approx(sign * 4.0 / 9.0, abs=1e-12)
    # cells outside the union stay exactly zero
    mask = np.ones((32, 32), dtype=bool)
    mask[0:8, 0:4] = False
    mask[0:8, 16:20] = False
    assert np.all(rho.cells[mask] == 0.0)


def test_two_level_chessboard_gap_bounds():
    eps = F(9, 10)
    fams = build_nested_families(d=2, N=4, M=2, r=2, c=1)
    rho = chessboard(fams, ChessboardSpec(eps=eps), 128)
    # finest level is painted last, so its averages stay exact
    fine_gap = adjacent_average_gap(rho, fams[1])
    assert fine_gap == pytest.approx(float(16 * eps / 9))
    # the coarse level is polluted by at most 2 eps times the overlap fraction
    eta = max(overlap_fraction(c, fams[1:]) for c in fams[0])
    assert eta == F(1, 16)
    coarse_gap = adjacent_average_gap(rho, fams[0])
    assert coarse_gap >= float(16 * eps / 9 - 4 * eps * eta) - 1e-12
    assert coarse_gap >= float(eps)


def test_chessboard_input_validation():
    fam = row_family(4, F(1, 4))
    spec = ChessboardSpec(eps=F(1, 2))
    with pytest.raises(ValueError):
        chessboard([], spec, 16)
    with pytest.raises(ValueError):  # 15 is not a multiple of 4
        chessboard([fam], spec, 15)
    with pytest.raises(ValueError):  # aligned but only 2 cells per cube side
        chessboard([fam], spec, 8)


def test_perturb_density():
    base = GridDensity(2, 16, np.ones((16, 16)))
    fam = row_family(4, F(1, 4))
    spec = ChessboardSpec(eps=F(9, 10))
    psi = chessboard([fam], spec, 16)
    rho = perturb_density(base, psi)
    assert rho.cells.min() >= 1.0 - float(spec.plateau(2)) - 1e-15
    # psi integrates to zero: the chain pairs cancel
    assert float(rho.average()) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        perturb_density(base, GridDensity(2, 8, np.ones((8, 8))))


def test_linf_chessboard_zero_density_trace():
    # hand trace: averages 0, +eps, 0 along a 3-cube chain
    fam = TiledFamily(cubes=tuple(
        Cube(side=F(1, 4), anchor=(k * F(1, 4),)) for k in range(3)
    ))
    rho = GridDensity(1, 4, np.zeros(4))
    psi = linf_chessboard(fam, rho, eps=1.0)
    avgs = [float(cell_average(psi, c)) for c in fam.cubes]
    assert avgs == [0.0, 1.0, 0.0]
    assert adjacent_average_gap(psi, fam) == pytest.approx(1.0)


def test_linf_chessboard_keeps_preexisting_gaps():
    fam = TiledFamily(cubes=(
        Cube(side=F(1, 2), anchor=(F(0),)),
        Cube(side=F(1, 2), anchor=(F(1, 2),)),
    ))
    rho = GridDensity(1, 2, np.array([0.0, 1.0]))
    psi = linf_chessboard(fam, rho, eps=0.5)
    np.testing.assert_array_equal(psi.cells, rho.cells)
    # descending data takes the -eps branch instead
    rho2 = GridDensity(1, 2, np.array([0.2, 0.0]))
    psi2 = linf_chessboard(fam, rho2, eps=0.5)
    np.testing.assert_allclose(psi2.cells, [0.2, -0.5])


def test_linf_chessboard_single_cube_is_identity():
    fam = TiledFamily(cubes=(Cube(side=F(1, 2), anchor=(F(0), F(0))),))
    rho = GridDensity(2, 4, np.arange(16, dtype=float).reshape(4, 4))
    psi = linf_chessboard(fam, rho, eps=0.3)
    np.testing.assert_array_equal(psi.cells, rho.cells)


def test_linf_chessboard_invariants_random_density():
    rng = np.random.RandomState(7)
    side = F(1, 10)
    fam = TiledFamily(cubes=tuple(
        Cube(side=side, anchor=(k * side, F(0))) for k in range(10)
    ))
    rho = GridDensity(2, 20, rng.rand(20, 20))
    eps = 0.5
    psi = linf_chessboard(fam, rho, eps)
    assert np.abs(psi.cells - rho.cells).max() <= eps + 1e-12
    assert adjacent_average_gap(psi, fam) >= eps - 1e-9
    # every cell is either untouched or shifted by exactly +-eps
    delta = psi.cells - rho.cells
    assert np.all((delta == 0) | np.isclose(np.abs(delta), eps, atol=1e-15))


def test_linf_chessboard_validation():
    fam = row_family(3, F(1, 3))
    rho = GridDensity(2, 8, np.ones((8, 8)))  # 8 not divisible by 3
    with pytest.raises(ValueError):
        linf_chessboard(fam, rho, 0.5)
    rho9 = GridDensity(2, 9, np.ones((9, 9)))
    with pytest.raises(ValueError):
        linf_chessboard(fam, rho9, 0.0)


def test_adjacent_average_gap_edges():
    fam = row_family(3, F(1, 4))
    flat = GridDensity(2, 4, np.ones((4, 4)))
    assert adjacent_average_gap(flat, fam) == 0.0
    lonely = TiledFamily(cubes=(Cube(side=F(1, 4), anchor=(F(0), F(0))),))
    assert adjacent_average_gap(flat, lonely) == math.inf
