"""1-D fold constructions and regularity/degree instruments.

The fold pipeline is exact: piecewise-linear maps over Fraction breakpoints,
composed symbolically, so every audit (non-expansiveness, distance to the
identity, triple-image equality) is an equality/inequality of rationals.
"""
from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .geometry import Box, as_fraction, box_of
from .maps import AffinePiece, SampledMap, TriangulatedMap


class AmbiguousPreimage(ValueError):
    """The query value touches a piece boundary or a flat piece."""


@dataclass(frozen=True)
class PiecewiseLinear1D:
    """Continuous piecewise-linear self-map of [0, 1] with rational data."""

    breakpoints: tuple[Fraction, ...]
    values: tuple[Fraction, ...]

    def __post_init__(self):
        bps = tuple(as_fraction(b) for b in self.breakpoints)
        vals = tuple(as_fraction(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)
        if len(bps) != len(vals) or len(bps) < 2:
            raise ValueError("need matching breakpoints/values, at least two")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if bps[0] != 0 or bps[-1] != 1:
            raise ValueError("the map must be defined on [0, 1]")

    def __call__(self, x) -> Fraction:
        x = as_fraction(x)
        if not (0 <= x <= 1):
            raise ValueError("argument outside [0, 1]")
        i = bisect.bisect_right(self.breakpoints, x) - 1
        i = min(i, len(self.breakpoints) - 2)
        x0, x1 = self.breakpoints[i], self.breakpoints[i + 1]
        y0, y1 = self.values[i], self.values[i + 1]
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0)

    def slopes(self) -> list[Fraction]:
        return [
            (y1 - y0) / (x1 - x0)
            for (x0, x1, y0, y1) in zip(
                self.breakpoints, self.breakpoints[1:], self.values, self.values[1:]
            )
        ]

    def is_nonexpansive(self) -> bool:
        return all(abs(s) <= 1 for s in self.slopes())

    def sup_distance(self, other: "PiecewiseLinear1D") -> Fraction:
        """Exact sup |self - other|: attained on the union of breakpoints."""
        pts = sorted(set(self.breakpoints) | set(other.breakpoints))
        return max(abs(self(x) - other(x)) for x in pts)

    def sup_distance_to_identity(self) -> Fraction:
        return max(abs(self(x) - x) for x in self.breakpoints)

    def image_interval(self) -> tuple[Fraction, Fraction]:
        return min(self.values), max(self.values)

    def preimage_of_interval(self, lo, hi) -> list[tuple[Fraction, Fraction]]:
        """Exact preimage of [lo, hi] as a sorted list of disjoint intervals."""
        lo, hi = as_fraction(lo), as_fraction(hi)
        if hi < lo:
            raise ValueError("empty interval")
        pieces = []
        for i in range(len(self.breakpoints) - 1):
            x0, x1 = self.breakpoints[i], self.breakpoints[i + 1]
            y0, y1 = self.values[i], self.values[i + 1]
            if y0 == y1:
                if lo <= y0 <= hi:
                    pieces.append((x0, x1))
                continue
            slope = (y1 - y0) / (x1 - x0)
            ta = x0 + (lo - y0) / slope
            tb = x0 + (hi - y0) / slope
            a, b = min(ta, tb), max(ta, tb)
            a, b = max(a, x0), min(b, x1)
            if a <= b:
                pieces.append((a, b))
        pieces.sort()
        merged: list[tuple[Fraction, Fraction]] = []
        for a, b in pieces:
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        return merged


def identity_pl() -> PiecewiseLinear1D:
    return PiecewiseLinear1D(breakpoints=(Fraction(0), Fraction(1)),
                             values=(Fraction(0), Fraction(1)))


def compose_pl(outer: PiecewiseLinear1D, inner: PiecewiseLinear1D) -> PiecewiseLinear1D:
    """Exact composition outer∘inner.

    Breakpoints are inner's own plus every inner-preimage of an outer
    breakpoint; between consecutive ones both maps are affine.
    """
    cuts = set(inner.breakpoints)
    for i in range(len(inner.breakpoints) - 1):
        x0, x1 = inner.breakpoints[i], inner.breakpoints[i + 1]
        y0, y1 = inner.values[i], inner.values[i + 1]
        if y0 == y1:
            continue
        slope = (y1 - y0) / (x1 - x0)
        for t in outer.breakpoints:
            if min(y0, y1) < t < max(y0, y1):
                cuts.add(x0 + (t - y0) / slope)
    bps = tuple(sorted(cuts))
    vals = tuple(outer(inner(x)) for x in bps)
    return PiecewiseLinear1D(breakpoints=bps, values=vals)


def fold_map(a, c) -> PiecewiseLinear1D:
    """Elementary fold: identity below a+c, reversal on [a+c, a+2c], shift
    x - 2c above. Non-expansive, moves no point by more than 2c."""
    a, c = as_fraction(a), as_fraction(c)
    if not (0 < a and c > 0 and a + 3 * c < 1):
        raise ValueError("need 0 < a and a + 3c < 1")
    g = PiecewiseLinear1D(
        breakpoints=(Fraction(0), a + c, a + 2 * c, Fraction(1)),
        values=(Fraction(0), a + c, a, 1 - 2 * c),
    )
    assert g.is_nonexpansive()
    assert g.sup_distance_to_identity() == 2 * c
    return g


@dataclass(frozen=True)
class FatCantorSpec:
    """Fat Cantor set C(eps): at construction level k (k = 0, 1, ...) remove
    the central open interval of length eps/4^(k+1) from each of the 2^k
    remaining intervals. Total removed = eps/2, so the set keeps measure
    1 - eps/2 >= 1 - eps."""

    eps: Fraction

    def __post_init__(self):
        object.__setattr__(self, "eps", as_fraction(self.eps))
        if not (0 < self.eps < 1):
            raise ValueError("eps must lie in (0, 1)")

    def removed_intervals(self, count: int) -> list[tuple[Fraction, Fraction]]:
        """First `count` removed intervals in construction order."""
        out = []
        level = [(Fraction(0), Fraction(1))]
        k = 0
        while len(out) < count:
            gap = self.eps / 4 ** (k + 1)
            nxt = []
            for (x, y) in level:
                mid = (x + y) / 2
                lo, hi = mid - gap / 2, mid + gap / 2
                if not (x < lo and hi < y):
                    raise ValueError("eps too large: removal exceeds its interval")
                out.append((lo, hi))
                nxt.extend([(x, lo), (hi, y)])
            level = nxt
            k += 1
        return out[:count]


@dataclass(frozen=True)
class FoldRecord:
    index: int
    interval: tuple[Fraction, Fraction]
    midpoint: Fraction
    c: Fraction
    D: Fraction
    image_anchor: Fraction


@dataclass(frozen=True)
class IteratedFold:
    """Composition of elementary folds over the removed Cantor intervals."""

    map: PiecewiseLinear1D
    folds: tuple[FoldRecord, ...]
    spec: FatCantorSpec

    def triple_points(self, record: FoldRecord) -> list[tuple[Fraction, Fraction, Fraction]]:
        """Domain triples (x, x', x'') in [a, a+3c] sharing one image."""
        a, c = record.midpoint, record.c
        out = []
        for u in (Fraction(0), c / 2, c):
            out.append((a + u, a + 2 * c - u, a + 2 * c + u))
        return out


def _covering_slack_bound(delta: Fraction, d_prev: Fraction, d_cur: Fraction,
                          length: Fraction) -> Fraction:
    # D_{n-1} (L(U) + 4c) <= D_n L(U) for every L(U) >= length/2 - 3c
    # resolves to c * (4 D_{n-1} + 3 (D_n - D_{n-1})) <= (D_n - D_{n-1}) length / 2
    return delta * length / (2 * (4 * d_prev + 3 * delta))


def iterated_fold(spec: FatCantorSpec, n_max: int) -> PiecewiseLinear1D:
    """Fold the identity over the first n_max removed intervals; returns the
    final map. `iterated_fold_detail` keeps the per-fold records."""
    return iterated_fold_detail(spec, n_max).map


def iterated_fold_detail(spec: FatCantorSpec, n_max: int) -> IteratedFold:
    """Fold the identity over the first n_max removed intervals.

    Fold n sits at the current image of the midpoint a_n of removed interval
    A_n with amplitude c_n = min(eps/2^(n+1), L(A_n)/8, slack bound from the
    covering constants D_n = 3 - 2/(n+1)); this keeps the final map
    non-expansive, within eps of the identity, and coverable by 3 intervals
    in the regularity sense.
    """
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    if n_max == 0:
        return IteratedFold(map=identity_pl(), folds=(), spec=spec)
    eps = spec.eps
    intervals = spec.removed_intervals(n_max)
    f = identity_pl()
    records = []
    d_prev = Fraction(1)  # D_0
    for n, (lo, hi) in enumerate(intervals, start=1):
        length = hi - lo
        a = (lo + hi) / 2
        d_cur = 3 - Fraction(2, n + 1)
        delta = d_cur - d_prev
        c = min(
            eps / 2 ** (n + 1),
            length / 8,
            _covering_slack_bound(delta, d_prev, d_cur, length),
        )
        assert d_prev * 4 * c <= delta * (length / 2 - 3 * c)
        b = f(a)
        g = fold_map(b, c)
        f_next = compose_pl(g, f)
        assert f_next.sup_distance(f) <= eps / 2 ** n
        assert f_next.is_nonexpansive()
        records.append(FoldRecord(index=n, interval=(lo, hi), midpoint=a,
                                  c=c, D=d_cur, image_anchor=b))
        f = f_next
        d_prev = d_cur
    assert f.sup_distance_to_identity() <= eps
    result = IteratedFold(map=f, folds=tuple(records), spec=spec)
    for rec in records:
        for (x1, x2, x3) in result.triple_points(rec):
            if not (f(x1) == f(x2) == f(x3)):
                raise AssertionError(
                    f"fold {rec.index}: triple {x1}, {x2}, {x3} lost its common image"
                )
    return result


def covering_regularity(pl: PiecewiseLinear1D,
                        probe_intervals: Sequence[tuple],
                        c_max: int = 16) -> int:
    """Smallest C <= c_max such that every probe interval of radius r has its
    exact preimage coverable by at most C intervals of radius C*r."""
    probes = [(as_fraction(lo), as_fraction(hi)) for lo, hi in probe_intervals]
    img_lo, img_hi = pl.image_interval()
    for lo, hi in probes:
        if hi <= lo:
            raise ValueError("probe intervals need positive length")
        if hi < img_lo or lo > img_hi:
            raise ValueError(f"probe [{lo}, {hi}] misses the image entirely")
    preimages = [pl.preimage_of_interval(lo, hi) for lo, hi in probes]
    for C in range(1, c_max + 1):
        if all(
            _cover_count(pieces, C * (hi - lo))  # length 2*C*r = C*(hi-lo)
            <= C
            for (lo, hi), pieces in zip(probes, preimages)
        ):
            return C
    return c_max + 1  # sentinel: nothing up to c_max certifies


def _cover_count(pieces: Sequence[tuple[Fraction, Fraction]], length: Fraction) -> int:
    """Greedy number of closed length-`length` intervals covering the union."""
    count = 0
    cover_end = None
    for a, b in pieces:
        uncovered = cover_end is None or cover_end < a
        pos = a if uncovered else cover_end
        if uncovered:
            count += 1
            pos = a + length
        while pos < b:
            count += 1
            pos += length
        cover_end = pos
    return count


def preimage_count_1d(pl: PiecewiseLinear1D, y) -> int:
    """Number of preimages of a regular value; errors on tangencies/plateaus."""
    y = as_fraction(y)
    count = 0
    for i in range(len(pl.breakpoints) - 1):
        y0, y1 = pl.values[i], pl.values[i + 1]
        if y0 == y1:
            if y == y0:
                raise AmbiguousPreimage(f"value {y} sits on a flat piece")
            continue
        if y == y0 or y == y1:
            raise AmbiguousPreimage(f"value {y} hits a breakpoint image")
        if min(y0, y1) < y < max(y0, y1):
            count += 1
    return count


def _piece_preimages(pieces: Sequence[AffinePiece], y: np.ndarray,
                     boundary_tol: float = 1e-12):
    """Strictly interior preimages of y across affine pieces."""
    sols = []
    for piece in pieces:
        det = piece.det
        vals = piece.values
        lo, hi = vals.min(axis=0), vals.max(axis=0)
        if np.any(y < lo - boundary_tol) or np.any(y > hi + boundary_tol):
            continue
        if abs(det) < 1e-14:
            raise AmbiguousPreimage(
                "query value meets a singular affine piece"
            )
        x = np.linalg.solve(piece.matrix, y - piece.offset)
        lam = piece.barycentric(x)
        if np.all(lam > boundary_tol):
            sols.append((x, 1 if det > 0 else -1))
        elif np.all(lam > -boundary_tol):
            raise AmbiguousPreimage(
                f"preimage {x} of {y} lies on a piece boundary"
            )
    return sols


def preimage_count(map_like, y) -> int:
    """Preimage count for piecewise-affine maps (1-D exact or d-D sampled)."""
    if isinstance(map_like, PiecewiseLinear1D):
        return preimage_count_1d(map_like, y)
    pieces = map_like.affine_pieces()
    return len(_piece_preimages(pieces, np.asarray(y, dtype=float)))


def _boundary_samples(box: Box, per_edge: int = 256) -> np.ndarray:
    """Points covering the boundary of an axis box (dense for the margin check)."""
    lo = np.array([float(x) for x in box.lo])
    hi = np.array([float(x) for x in box.hi])
    d = len(lo)
    pts = []
    for axis in range(d):
        for side_val in (lo[axis], hi[axis]):
            free = [j for j in range(d) if j != axis]
            grids = [np.linspace(lo[j], hi[j], per_edge) for j in free]
            for combo in itertools.product(*grids):
                p = np.empty(d)
                p[axis] = side_val
                for j, v in zip(free, combo):
                    p[j] = v
                pts.append(p)
    return np.array(pts)


def _boundary_loop_2d(box: Box, per_edge: int) -> np.ndarray:
    """Counterclockwise ordered samples of a rectangle boundary."""
    lo = np.array([float(x) for x in box.lo])
    hi = np.array([float(x) for x in box.hi])
    corners = [lo, np.array([hi[0], lo[1]]), hi, np.array([lo[0], hi[1]])]
    pts = []
    for i in range(4):
        a, b = corners[i], corners[(i + 1) % 4]
        for t in np.linspace(0.0, 1.0, per_edge, endpoint=False):
            pts.append(a + t * (b - a))
    return np.array(pts)


def topological_degree(map_like, region, y, margin: float = 1e-9) -> int:
    """Signed preimage count of y over the region: sum of sign(det).

    Errors when y comes within `margin` (times the region diameter) of the
    image of the region boundary, or when a singular piece could hit y.
    """
    box = box_of(region)
    yv = np.asarray(y, dtype=float)
    lo = np.array([float(x) for x in box.lo])
    hi = np.array([float(x) for x in box.hi])
    diam = float(np.linalg.norm(hi - lo))
    if len(lo) == 2:
        # the boundary image of a PL map is a polyline: measure the distance
        # to its segments, not just to the sampled vertices
        loop = _boundary_loop_2d(box, per_edge=256)
        images = np.array([map_like(p) for p in loop])
        P = images
        Q = np.roll(images, -1, axis=0)
        PQ = Q - P
        denom = np.einsum("ij,ij->i", PQ, PQ)
        denom[denom == 0] = 1.0
        t = np.clip(np.einsum("ij,ij->i", yv - P, PQ) / denom, 0.0, 1.0)
        closest = P + t[:, None] * PQ
        gap = float(np.linalg.norm(closest - yv, axis=1).min())
    else:
        bnd = _boundary_samples(box, 48)
        images = np.array([map_like(p) for p in bnd])
        gap = float(np.linalg.norm(images - yv, axis=1).min())
    if gap <= margin * diam:
        raise ValueError(
            f"query value within {gap:.3g} of the boundary image; degree undefined"
        )
    pieces = map_like.affine_pieces()
    total = 0
    eps_in = 1e-12
    for x, sign in _piece_preimages(pieces, yv):
        if np.all(x > lo + eps_in) and np.all(x < hi - eps_in):
            total += sign
    return total


def measure_regularity_probe(map_samples: SampledMap,
                             balls: Sequence[tuple[Sequence[float], float]],
                             C: float, tol: float = 0.05) -> bool:
    """Check L(f^{-1}(B(x, r))) <= C * r^d (1 + tol) on sampled cells.

    Preimage measures are estimated by counting sample cells whose mapped
    centers (corner means — exact on affine pieces) land in the ball.
    """
    d = map_samples.dimension
    cell_vol = map_samples.cell_volume()
    centers = []
    for cell in map_samples.cell_indices():
        corner_vals = map_samples.cell_corner_values(cell)
        centers.append(corner_vals.mean(axis=0))
    centers = np.array(centers)
    for center, radius in balls:
        cv = np.asarray(center, dtype=float)
        inside = np.linalg.norm(centers - cv, axis=1) <= radius
        estimate = float(inside.sum()) * cell_vol
        if estimate > C * radius ** d * (1.0 + tol):
            return False
    return True


def plane_fold_map() -> TriangulatedMap:
    """The plane fold (x1, x2) -> (|x1|, x2) on [-1,1]^2 as an explicit
    triangulation (Steiner points keep generic probe values off the edges)."""
    pts = np.array([
        [-1.0, -1.0], [0.0, -1.0], [1.0, -1.0],
        [-1.0, 1.0], [0.0, 1.0], [1.0, 1.0],
        [-0.7, 0.123], [0.7, 0.123],
    ])
    simplices = [
        (0, 1, 6), (1, 4, 6), (4, 3, 6), (3, 0, 6),   # left half
        (1, 2, 7), (2, 5, 7), (5, 4, 7), (4, 1, 7),   # right half
    ]
    values = np.column_stack([np.abs(pts[:, 0]), pts[:, 1]])
    return TriangulatedMap(points=pts, simplices=simplices, values=values)


def identity_map_2d() -> TriangulatedMap:
    pts = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0],
                    [0.1, 0.2]])
    simplices = [(0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4)]
    return TriangulatedMap(points=pts, simplices=simplices, values=pts.copy())


def reflection_map_2d() -> TriangulatedMap:
    pts = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0],
                    [0.1, 0.2]])
    values = np.column_stack([-pts[:, 0], pts[:, 1]])
    simplices = [(0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4)]
    return TriangulatedMap(points=pts, simplices=simplices, values=values)
