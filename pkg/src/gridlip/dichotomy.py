"""Slab-dichotomy parameter schedules, nested tiled families, and the probe.

The parameter schedules are computed and re-verified in exact rational
arithmetic; the quantities involved blow up fast with dimension (that is
expected — they certify an asymptotic argument), so integers are unbounded
and callers should treat the d >= 2 outputs as symbolic certificates rather
than samplable sizes.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from math import isqrt
from typing import Sequence

import numpy as np

from .geometry import Cube, TiledFamily, as_fraction
from .maps import SampledMap

_DOUBLING_CAP = 20_000


class ProbeInconclusive(RuntimeError):
    """Neither probe statement could be certified from the samples."""

    def __init__(self, message, omega=None, best_excess=None):
        super().__init__(message)
        self.omega = omega
        self.best_excess = best_excess


@dataclass(frozen=True)
class DichotomyParams:
    """Verified parameter bundle for the translation/stretch dichotomy.

    t is the 1-D slack parameter surviving from the base of the recursion;
    theta_chain lists the per-dimension slacks used on the way up (empty for
    d = 1). All rationals are exact; float() them for display.
    """

    dimension: int
    lipschitz_bound: Fraction
    slack: Fraction
    t: Fraction
    M: int
    phi: Fraction
    N0: int
    theta_chain: tuple[Fraction, ...]
    levels: tuple[dict, ...] = ()

    def validate(self) -> None:
        """Re-check every defining inequality in exact arithmetic."""
        L = self.lipschitz_bound
        base = self.levels[0]
        eps1, t, M1, phi1 = base["eps"], base["t"], base["M"], base["phi"]
        # sqrt(5t)*L is exactly rational by construction: 5*t*L^2 == (eps1/3)^2
        if 5 * t * L * L != (eps1 / 3) ** 2:
            raise AssertionError("1-D slack does not satisfy 5tL^2 = (eps/3)^2")
        if not (eps1 / 3 + 2 * L / M1 < eps1):
            raise AssertionError("1-D translation inequality fails")
        if not (0 < phi1 < t):
            raise AssertionError("phi must lie in (0, t)")
        if not (6 * phi1 / (phi1 + t) < eps1):
            raise AssertionError("1-D stretch inequality fails")
        prev = base
        for lvl in self.levels[1:]:
            eps, theta, q, s = lvl["eps"], lvl["theta"], lvl["q"], lvl["sqrt_d_upper"]
            M, phi, N0 = lvl["M"], lvl["phi"], lvl["N0"]
            if q ** (2 * lvl["dim"]) != theta:
                raise AssertionError("theta is not the stored 2d-th power")
            if theta > eps * eps:
                raise AssertionError("(1 - sqrt(theta)) >= 1 - eps fails")
            if not (4 * L * s * q + theta + Fraction(2) * L / N0 < eps):
                raise AssertionError("d-dimensional translation inequality fails")
            if M % prev["M"] != 0:
                raise AssertionError("M must be a multiple of the lower-level M")
            if not (0 < phi < prev["phi"] / 2):
                raise AssertionError("phi must be below half the lower-level phi")
            lhs = 1 + 2 * phi - 2 * (1 + 2 * phi) * L * L / N0 \
                - 2 * L * L * prev["M"] / M
            if not (lhs > 1 + phi):
                raise AssertionError("stretch chain inequality fails")
            prev = lvl
        # the top-level convenience forms also hold (inequalities only improve)
        if not (self.slack / 1 > 0 and self.phi < self.t):
            raise AssertionError("phi < t fails at the top level")
        if not (6 * self.phi / (self.phi + self.t) < self.slack):
            raise AssertionError("top-level stretch inequality fails")


def _sqrt_upper(d: int) -> Fraction:
    """Rational upper bound on sqrt(d), within 1e-6."""
    scale = 10 ** 6
    return Fraction(isqrt(d * scale * scale) + 1, scale)


def params_1d(L, eps) -> DichotomyParams:
    """Closed-form 1-D schedule: t = eps^2/(45 L^2), M = ceil(6L/eps),
    phi = eps*t/(2(6-eps))."""
    L = as_fraction(L)
    eps = as_fraction(eps)
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")
    if L < 1:
        raise ValueError("L must be >= 1")
    t = eps * eps / (45 * L * L)
    M = math.ceil(6 * L / eps)
    phi = eps * t / (2 * (6 - eps))
    level = {"dim": 1, "eps": eps, "t": t, "M": M, "phi": phi, "N0": 2}
    out = DichotomyParams(
        dimension=1, lipschitz_bound=L, slack=eps, t=t, M=M, phi=phi,
        N0=2, theta_chain=(), levels=(level,),
    )
    out.validate()
    return out


def params_nd(d: int, L, eps) -> DichotomyParams:
    """Recursive d-dimensional schedule.

    theta = (eps / (12 L sqrt(d)))^(2d) with a rational upper bound standing
    in for sqrt(d) (for eps < 1 this branch always undercuts eps^2, keeping
    theta^(1/2d) exactly rational); M and N0 are doubled until the
    translation and stretch-chain inequalities hold.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if d == 1:
        return params_1d(L, eps)
    L = as_fraction(L)
    eps = as_fraction(eps)
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")
    if L < 1:
        raise ValueError("L must be >= 1")
    s = _sqrt_upper(d)
    q = eps / (12 * L * s)
    theta = q ** (2 * d)
    if theta > eps * eps:  # cannot happen for eps < 1, d >= 2; guard anyway
        raise ValueError("slack too large for the rational theta branch")
    sub = params_nd(d - 1, L, theta)
    phi = sub.phi / 4
    M = sub.M
    N0 = max(sub.N0, 2)
    for _ in range(_DOUBLING_CAP):
        if 4 * L * s * q + theta + Fraction(2) * L / N0 < eps:
            break
        N0 *= 2
    else:
        raise RuntimeError("N0 doubling did not converge")
    for _ in range(_DOUBLING_CAP):
        lhs = 1 + 2 * phi - 2 * (1 + 2 * phi) * L * L / N0 - 2 * L * L * sub.M / M
        if lhs > 1 + phi:
            break
        M *= 2
        N0 *= 2
    else:
        raise RuntimeError("chain-inequality doubling did not converge")
    level = {
        "dim": d, "eps": eps, "theta": theta, "q": q, "sqrt_d_upper": s,
        "M": M, "phi": phi, "N0": N0,
    }
    out = DichotomyParams(
        dimension=d, lipschitz_bound=L, slack=eps, t=sub.t, M=M, phi=phi,
        N0=N0, theta_chain=sub.theta_chain + (theta,),
        levels=sub.levels + (level,),
    )
    out.validate()
    return out


def iteration_bound(L, phi) -> int:
    """Smallest integer r with (1+phi)^r > L^2."""
    Lf = float(L)
    pf = float(phi)
    if Lf < 1:
        raise ValueError("L must be >= 1")
    if pf <= 0:
        raise ValueError("phi must be positive")
    target = 2.0 * math.log(Lf)
    step = math.log1p(pf)
    r = math.floor(target / step) + 1 if target > 0 else 1
    while r * step <= target:  # guard against float rounding at the boundary
        r += 1
    return r


def min_resolution(d: int, M: int, eta) -> int:
    """Smallest N >= 2 with (M+1)^d / (M^d N^(d-1)) <= eta, exactly."""
    if d < 2:
        raise ValueError("the overlap bound needs d >= 2")
    if M < 1:
        raise ValueError("M must be >= 1")
    eta = as_fraction(eta)
    if eta <= 0:
        raise ValueError("eta must be positive")
    need = Fraction((M + 1) ** d, M ** d) / eta  # N^(d-1) >= need
    N = max(2, int(round(float(need) ** (1.0 / (d - 1)))) - 2)
    N = max(2, N)
    while Fraction(N) ** (d - 1) < need:
        N += 1
    return N


def build_nested_families(
    d: int, N: int, M: int, r: int, c, offsets="zero"
) -> list[TiledFamily]:
    """Nested families S_1, ..., S_r of N tiling cubes each.

    Family i consists of the cubes  z_1+...+z_i + [(l-1)c_i/N, l c_i/N] x
    [0, c_i/N]^(d-1),  l = 1..N, with c_i = c/(NM)^(i-1). Offsets z_(i+1)
    live on the c_(i+1)-lattice inside [0, c_i - c_(i+1)] x
    [0, c_i/N - c_(i+1)]^(d-1); "zero"/"max" pick the two corners, or pass an
    explicit list of r-1 vectors.
    """
    if d < 1 or N < 2 or M < 1 or r < 1:
        raise ValueError("need d >= 1, N >= 2, M >= 1, r >= 1")
    c = as_fraction(c)
    if c <= 0:
        raise ValueError("c must be positive")
    scales = [c / (N * M) ** i for i in range(r)]  # c_1, ..., c_r

    if offsets == "zero":
        offset_list = [tuple(Fraction(0) for _ in range(d)) for _ in range(r - 1)]
    elif offsets == "max":
        offset_list = []
        for i in range(1, r):
            prev, cur = scales[i - 1], scales[i]
            vec = [prev - cur] + [prev / N - cur] * (d - 1)
            offset_list.append(tuple(vec))
    else:
        offset_list = [tuple(as_fraction(x) for x in z) for z in offsets]
        if len(offset_list) != r - 1:
            raise ValueError(f"expected {r - 1} offset vectors")

    for i, z in enumerate(offset_list, start=2):
        cur, prev = scales[i - 1], scales[i - 2]
        if len(z) != d:
            raise ValueError("offset dimension mismatch")
        for j, comp in enumerate(z):
            if (comp / cur).denominator != 1:
                raise ValueError(f"offset {comp} not on the level-{i} lattice")
            hi = prev - cur if j == 0 else prev / N - cur
            if not (0 <= comp <= hi):
                raise ValueError(f"offset component {comp} outside [0, {hi}]")

    families = []
    shift = tuple(Fraction(0) for _ in range(d))
    for i in range(1, r + 1):
        if i >= 2:
            z = offset_list[i - 2]
            shift = tuple(a + b for a, b in zip(shift, z))
        side = scales[i - 1] / N
        assert side == c / (Fraction(N) ** i * Fraction(M) ** (i - 1))
        cubes = []
        for l in range(1, N + 1):
            anchor = ((l - 1) * side + shift[0],) + tuple(shift[1:])
            cubes.append(Cube(side=side, anchor=anchor))
        families.append(TiledFamily(cubes=tuple(cubes)))

    for i in range(r - 1):
        coarse, fine = families[i], families[i + 1]
        lo_c = min(c.anchor for c in coarse.cubes)
        lo_f = min(c.anchor for c in fine.cubes)
        hi_c = [lo_c[0] + N * coarse.side] + [a + coarse.side for a in lo_c[1:]]
        hi_f = [lo_f[0] + N * fine.side] + [a + fine.side for a in lo_f[1:]]
        ok = all(lo_f[j] >= lo_c[j] and hi_f[j] <= hi_c[j] for j in range(d))
        if not ok:
            raise AssertionError("families are not nested")
    return families


@dataclass(frozen=True)
class ProbeVerdict:
    """Outcome of the dichotomy probe.

    statement is 1 or 2; omega is populated exactly when statement == 1 and
    the witness fields exactly when statement == 2.
    """

    statement: int
    omega: frozenset[int] | None = None
    witness_index: tuple[int, ...] | None = None
    witness_point: tuple[float, ...] | None = None
    base_rate: float = 0.0
    witness_rate: float | None = None


def sample_translation_cuboid(f, c: float, N: int, M: int, d: int) -> SampledMap:
    """Sample a map on the c/(NM)-lattice of [0,c] x [0,c/N]^(d-1)."""
    counts = (N * M + 1,) + (M + 1,) * (d - 1)
    hi = [c] + [c / N] * (d - 1)
    return SampledMap.from_callable(f, lo=[0.0] * d, hi=hi, node_counts=counts)


def dichotomy_probe(h: SampledMap, params: DichotomyParams, N: int, eps) -> ProbeVerdict:
    """Test the stretch statement first, then the translation statement.

    Statement 2: some lattice pair z, z + (c/NM)e1 stretches by more than
    (1+phi) times the endpoint rate; the lexicographically smallest witness
    is reported. Statement 1: at least (1-eps)(N-1) slabs i translate by
    (h(c e1) - h(0))/N up to c*eps/N on every sample. Anything else raises
    ProbeInconclusive with partial findings.
    """
    M = int(params.M)
    phi = float(params.phi)
    epsf = float(eps)
    d = h.dimension
    expected = (N * M + 1,) + (M + 1,) * (d - 1)
    if h.node_counts != expected:
        raise ValueError(
            f"sampled map has node counts {h.node_counts}; the c/(NM)-lattice "
            f"of the probe cuboid needs {expected}"
        )
    c = float(h.hi[0] - h.lo[0])
    V = h.values
    end_diff = V[(N * M,) + (0,) * (d - 1)] - V[(0,) * d]
    base_rate = float(np.linalg.norm(end_diff)) / c
    step = c / (N * M)

    witness = None
    best_excess = (-np.inf, None)
    z_ranges = [range(N * M)] + [range(M)] * (d - 1)
    for j in itertools.product(*z_ranges):
        succ = (j[0] + 1,) + j[1:]
        rate = float(np.linalg.norm(V[succ] - V[j])) / step
        if rate > (1.0 + phi) * base_rate:
            witness = (j, rate)
            break
        excess = rate - (1.0 + phi) * base_rate
        if excess > best_excess[0]:
            best_excess = (excess, j)
    if witness is not None:
        j, rate = witness
        return ProbeVerdict(
            statement=2,
            witness_index=j,
            witness_point=tuple(float(h.lo[k] + j[k] * h.spacing[k]) for k in range(d)),
            base_rate=base_rate,
            witness_rate=rate,
        )

    shift = end_diff / N
    tol = c * epsf / N
    omega = set()
    trans_ranges = [range(M + 1)] * (d - 1)
    for i in range(1, N):
        ok = True
        for j1 in range((i - 1) * M, i * M + 1):
            for jt in itertools.product(*trans_ranges):
                idx = (j1,) + jt
                tgt = (j1 + M,) + jt
                if float(np.linalg.norm(V[tgt] - V[idx] - shift)) > tol:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            omega.add(i)
    if len(omega) >= (1.0 - epsf) * (N - 1):
        return ProbeVerdict(statement=1, omega=frozenset(omega), base_rate=base_rate)
    raise ProbeInconclusive(
        f"only {len(omega)} of {N - 1} slabs translate within tolerance and no "
        f"stretch witness exceeds the (1+phi) threshold",
        omega=frozenset(omega),
        best_excess=best_excess,
    )
