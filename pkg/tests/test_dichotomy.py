"""Parameter schedules, nested families and the translation/stretch probe."""

import dataclasses
import itertools
from fractions import Fraction

import numpy as np
import pytest

from gridlip.dichotomy import (
    DichotomyParams,
    ProbeInconclusive,
    build_nested_families,
    dichotomy_probe,
    iteration_bound,
    min_resolution,
    params_1d,
    params_nd,
    sample_translation_cuboid,
)
from gridlip.geometry import overlap_fraction

F = Fraction


def test_params_1d_small_case():
    p = params_1d(1, F(3, 10))
    assert p.t == F(1, 500)
    assert p.M == 20
    assert p.phi == F(1, 19000)
    p.validate()  # idempotent


def test_params_1d_exact_rationals_beat_floats():
    # 6/0.3 rounds just above 20 in binary, forcing one extra slab
    assert params_1d(1, F(3, 10)).M == 20
    assert params_1d(1, 0.3).M == 21


def test_params_1d_more_cases():
    assert params_1d(2, F(1, 2)).M == 24
    rng = np.random.RandomState(5)
    for _ in range(20):
        L = F(int(rng.randint(1, 5)), int(rng.randint(1, 3)))
        if L < 1:
            L = 1 / L
        eps = F(int(rng.randint(1, 9)), 10)
        p = params_1d(L, eps)
        # closed forms hold exactly
        assert 45 * p.t * L * L == eps * eps
        assert 2 * p.phi * (6 - eps) == eps * p.t
        assert p.M >= 6 * L / eps
        assert 0 < p.phi < p.t
        p.validate()


def test_params_1d_input_validation():
    with pytest.raises(ValueError):
        params_1d(1, F(3, 2))
    with pytest.raises(ValueError):
        params_1d(1, 0)
    with pytest.raises(ValueError):
        params_1d(F(1, 2), F(1, 2))


def test_validate_catches_tampering():
    p = params_1d(1, F(3, 10))
    bad_level = dict(p.levels[0])
    bad_level["t"] = p.t * 2
    broken = dataclasses.replace(p, levels=(bad_level,))
    with pytest.raises(AssertionError):
        broken.validate()


def test_params_nd_structure():
    p = params_nd(2, 1, F(1, 2))
    assert p.dimension == 2
    assert [lvl["dim"] for lvl in p.levels] == [1, 2]
    assert len(p.theta_chain) == 1
    top = p.levels[1]
    # theta is an exact 2d-th power of the rational q
    assert top["q"] ** 4 == p.theta_chain[0]
    # the top-level rate margin is a quarter of the 1-D one computed at theta
    sub = params_1d(1, p.theta_chain[0])
    assert p.phi == sub.phi / 4
    assert p.M % sub.M == 0
    p.validate()


def test_params_nd_phi_shrinks_with_dimension():
    p1 = params_1d(1, F(1, 2))
    p2 = params_nd(2, 1, F(1, 2))
    p3 = params_nd(3, 1, F(1, 2))
    assert p3.phi < p2.phi < p1.phi
    assert [lvl["dim"] for lvl in p3.levels] == [1, 2, 3]
    p3.validate()


def test_params_nd_d1_delegates():
    assert params_nd(1, 2, F(1, 2)) == params_1d(2, F(1, 2))
    with pytest.raises(ValueError):
        params_nd(0, 1, F(1, 2))


def exact_iteration_count(L, phi):
    # independent oracle in pure rational arithmetic
    acc, r = F(1), 0
    target = F(L) ** 2
    while acc <= target:
        acc *= 1 + F(phi)
        r += 1
    return r


def test_iteration_bound_values():
    assert iteration_bound(1, F(1, 2)) == 1
    assert iteration_bound(2, F(1, 10)) == 15
    assert iteration_bound(10, F(1, 100)) == 463
    for L, phi in [(2, F(1, 10)), (3, F(1, 7)), (2, F(1, 3)), (5, F(2, 5))]:
        assert iteration_bound(L, phi) == exact_iteration_count(L, phi)
    with pytest.raises(ValueError):
        iteration_bound(F(1, 2), F(1, 10))
    with pytest.raises(ValueError):
        iteration_bound(2, 0)


def test_min_resolution_values_and_minimality():
    assert min_resolution(2, 2, F(1, 9)) == 21
    assert min_resolution(3, 1, 1) == 3
    assert min_resolution(2, 2, F(1, 4)) == 9
    for d, M, eta in itertools.product((2, 3), (1, 2, 5), (F(1, 9), F(1, 2), 1)):
        N = min_resolution(d, M, eta)
        bound = lambda n: F((M + 1) ** d, M ** d * n ** (d - 1))
        assert bound(N) <= eta
        if N > 2:
            assert bound(N - 1) > eta
    with pytest.raises(ValueError):
        min_resolution(1, 2, F(1, 9))


def test_build_nested_families_zero_offsets():
    fams = build_nested_families(d=2, N=4, M=2, r=3, c=1)
    assert [f.side for f in fams] == [F(1, 4), F(1, 32), F(1, 256)]
    assert all(len(f) == 4 for f in fams)
    for f in fams:
        chains = f.e1_chains()
        assert len(chains) == 1 and len(chains[0]) == 4
    # with zero offsets every level shares the lower-left corner
    for f in fams:
        assert min(c.anchor for c in f.cubes) == (F(0), F(0))
    # the finer union sits inside the first coarse cube
    assert overlap_fraction(fams[0].cubes[0], [fams[1]]) == F(1, 16)
    for cube in fams[0].cubes[1:]:
        assert overlap_fraction(cube, [fams[1]]) == 0


def test_build_nested_families_max_offsets():
    fams = build_nested_families(d=2, N=4, M=2, r=2, c=1, offsets="max")
    c1, c2 = F(1), F(1, 8)
    want = (c1 - c2, c1 / 4 - c2)
    assert min(c.anchor for c in fams[1].cubes) == want
    # nesting survived the construction-time audit; double check the box
    hi = (want[0] + 4 * fams[1].side, want[1] + fams[1].side)
    assert hi[0] <= 1 and hi[1] <= F(1, 4)


def test_build_nested_families_explicit_offsets_validation():
    # level-2 scale is c/(NM) = 1/4, so offsets live on the quarter lattice
    ok = build_nested_families(d=2, N=4, M=1, r=2, c=1, offsets=[(F(1, 4), F(0))])
    assert len(ok) == 2
    with pytest.raises(ValueError):  # off the fine lattice
        build_nested_families(d=2, N=4, M=1, r=2, c=1, offsets=[(F(1, 3), F(0))])
    with pytest.raises(ValueError):  # pushes the fine family outside
        build_nested_families(d=2, N=4, M=1, r=2, c=1, offsets=[(F(1), F(0))])
    with pytest.raises(ValueError):  # wrong number of vectors
        build_nested_families(d=2, N=4, M=1, r=3, c=1, offsets=[(F(0), F(0))])
    with pytest.raises(ValueError):
        build_nested_families(d=2, N=1, M=1, r=1, c=1)


def test_overlap_stays_below_eta_at_min_resolution():
    d, M, eta = 2, 2, F(1, 4)
    N = min_resolution(d, M, eta)
    for offs in ("zero", "max"):
        fams = build_nested_families(d=d, N=N, M=M, r=2, c=1, offsets=offs)
        for cube in fams[0]:
            assert overlap_fraction(cube, fams[1:]) <= eta


def test_sample_translation_cuboid_lattice():
    f = lambda x: 2 * x
    h = sample_translation_cuboid(f, c=0.5, N=4, M=3, d=2)
    assert h.node_counts == (13, 4)
    # same lattice pitch on every axis
    np.testing.assert_allclose(h.spacing, 0.5 / 12)
    np.testing.assert_allclose(h.node_value((12, 0)), [1.0, 0.0])
    np.testing.assert_allclose(h.node_value((0, 3)), [0.0, 0.25])


def test_probe_statement1_identity():
    p = params_1d(1, F(3, 10))
    h = sample_translation_cuboid(lambda x: x, c=1.0, N=4, M=p.M, d=1)
    verdict = dichotomy_probe(h, p, N=4, eps=F(3, 10))
    assert verdict.statement == 1
    assert verdict.omega == frozenset({1, 2, 3})
    assert verdict.base_rate == pytest.approx(1.0)


def test_probe_statement1_affine_2d():
    p = params_1d(1, F(3, 10))  # the probe only consumes M and phi
    A = np.array([[1.0, 0.2], [-0.1, 1.0]])
    h = sample_translation_cuboid(lambda x: A @ x, c=1.0, N=4, M=p.M, d=2)
    verdict = dichotomy_probe(h, p, N=4, eps=F(3, 10))
    assert verdict.statement == 1
    assert verdict.omega == frozenset({1, 2, 3})


def test_probe_statement2_local_bump():
    p = params_1d(1, F(3, 10))
    h = sample_translation_cuboid(lambda x: x, c=1.0, N=4, M=p.M, d=1)
    step = 1.0 / (4 * p.M)
    bumped = h.values.copy()
    bumped[7] += 0.6 * step  # stretches exactly one lattice pair
    h2 = type(h)(lo=h.lo, hi=h.hi, values=bumped)
    verdict = dichotomy_probe(h2, p, N=4, eps=F(3, 10))
    assert verdict.statement == 2
    assert verdict.witness_index == (6,)  # lexicographically first
    assert verdict.witness_rate == pytest.approx(1.6)
    assert verdict.base_rate == pytest.approx(1.0)


def test_probe_statement2_curved_map():
    p = params_1d(1, F(3, 10))
    h = sample_translation_cuboid(lambda x: x * x, c=1.0, N=4, M=p.M, d=1)
    verdict = dichotomy_probe(h, p, N=4, eps=F(3, 10))
    assert verdict.statement == 2
    # first pair whose stretch (2j+1)/80 beats (1+phi): j = 40
    assert verdict.witness_index == (40,)
    assert verdict.witness_point == pytest.approx((0.5,))
    assert verdict.witness_rate == pytest.approx(81.0 / 80.0)


def test_probe_inconclusive_slope_blocks():
    # slopes 1.0 / 0.4 per slab: no pair beats the (artificially large) phi
    # threshold, and no slab translates within the tight eps tolerance
    level = {"dim": 1, "eps": F(1, 5), "t": F(1, 100), "M": 4,
             "phi": F(1, 2), "N0": 2}
    p = DichotomyParams(dimension=1, lipschitz_bound=F(2), slack=F(1, 5),
                        t=F(1, 100), M=4, phi=F(1, 2), N0=2,
                        theta_chain=(), levels=(level,))
    N, M, c = 4, 4, 1.0
    step = c / (N * M)
    slopes = [1.0, 0.4, 1.0, 0.4]
    vals = np.zeros((N * M + 1, 1))
    for j in range(N * M):
        vals[j + 1] = vals[j] + slopes[j // M] * step
    h = sample_translation_cuboid(lambda x: x, c=c, N=N, M=M, d=1)
    h = type(h)(lo=h.lo, hi=h.hi, values=vals)
    with pytest.raises(ProbeInconclusive) as exc:
        dichotomy_probe(h, p, N=N, eps=F(1, 5))
    assert exc.value.omega == frozenset()
    assert exc.value.best_excess[0] < 0


def test_probe_rejects_wrong_lattice():
    p = params_1d(1, F(3, 10))
    h = sample_translation_cuboid(lambda x: x, c=1.0, N=4, M=p.M + 1, d=1)
    with pytest.raises(ValueError):
        dichotomy_probe(h, p, N=4, eps=F(3, 10))
