"""Sampled and piecewise-affine maps shared by the probe/degree instruments."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class AffinePiece:
    """One simplex with the affine map interpolating its vertex values."""

    vertices: np.ndarray  # (d+1, d) simplex corners in the source
    values: np.ndarray    # (d+1, k) mapped corners
    matrix: np.ndarray    # (k, d) linear part
    offset: np.ndarray    # (k,)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    def barycentric(self, x: np.ndarray) -> np.ndarray:
        d = self.vertices.shape[1]
        T = (self.vertices[1:] - self.vertices[0]).T
        lam = np.linalg.solve(T, np.asarray(x, dtype=float) - self.vertices[0])
        return np.concatenate([[1.0 - lam.sum()], lam])

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        try:
            lam = self.barycentric(x)
        except np.linalg.LinAlgError:
            return False
        return bool(np.all(lam >= -tol))

    def apply(self, x: Sequence[float]) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float) + self.offset


def _affine_from_simplex(vertices: np.ndarray, values: np.ndarray) -> AffinePiece:
    d = vertices.shape[1]
    T = (vertices[1:] - vertices[0]).T  # (d, d)
    V = (values[1:] - values[0]).T      # (k, d)
    A = V @ np.linalg.inv(T)
    b = values[0] - A @ vertices[0]
    return AffinePiece(vertices=vertices, values=values, matrix=A, offset=b)


class TriangulatedMap:
    """Piecewise-affine map given by an explicit simplicial complex."""

    def __init__(self, points: np.ndarray, simplices: Sequence[Sequence[int]],
                 values: np.ndarray):
        self.points = np.asarray(points, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.simplices = [tuple(s) for s in simplices]
        if self.points.shape[0] != self.values.shape[0]:
            raise ValueError("one mapped value per vertex required")
        self.dimension = self.points.shape[1]
        self._pieces = None

    def affine_pieces(self) -> list[AffinePiece]:
        if self._pieces is None:
            self._pieces = [
                _affine_from_simplex(self.points[list(s)], self.values[list(s)])
                for s in self.simplices
            ]
        return self._pieces

    def __call__(self, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        best = None
        best_viol = np.inf
        for piece in self.affine_pieces():
            try:
                lam = piece.barycentric(x)
            except np.linalg.LinAlgError:
                continue
            viol = float(-(lam.min()))
            if viol <= 1e-12:
                return piece.apply(x)
            if viol < best_viol:
                best_viol, best = viol, piece
        if best is not None and best_viol < 1e-9:
            return best.apply(x)
        raise ValueError(f"point {x} lies outside the triangulated domain")


class SampledMap:
    """Map sampled on a regular node grid of an axis-aligned box.

    values has shape (*node_counts, out_dim); node (j_1, ..., j_d) sits at
    lo + j * spacing, spacing_i = (hi_i - lo_i) / (node_counts_i - 1).
    """

    def __init__(self, lo: Sequence[float], hi: Sequence[float], values: np.ndarray):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.dimension = len(self.lo)
        if self.values.ndim != self.dimension + 1:
            raise ValueError("values must have one axis per input dim plus the output axis")
        self.node_counts = self.values.shape[:-1]
        if any(n < 2 for n in self.node_counts):
            raise ValueError("need at least 2 nodes per axis")
        self.spacing = (self.hi - self.lo) / (np.array(self.node_counts) - 1)

    @classmethod
    def from_callable(cls, f: Callable, lo: Sequence[float], hi: Sequence[float],
                      node_counts: Sequence[int]) -> "SampledMap":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        counts = tuple(int(n) for n in node_counts)
        axes = [np.linspace(lo[j], hi[j], counts[j]) for j in range(len(lo))]
        probe = np.asarray(f(lo), dtype=float)
        out_dim = probe.size
        values = np.empty(counts + (out_dim,), dtype=float)
        for idx in itertools.product(*(range(n) for n in counts)):
            x = np.array([axes[j][idx[j]] for j in range(len(lo))])
            values[idx] = np.asarray(f(x), dtype=float)
        return cls(lo, hi, values)

    def node_point(self, idx: tuple[int, ...]) -> np.ndarray:
        return self.lo + np.array(idx, dtype=float) * self.spacing

    def node_value(self, idx: tuple[int, ...]) -> np.ndarray:
        return self.values[idx]

    def cell_indices(self):
        return itertools.product(*(range(n - 1) for n in self.node_counts))

    def cell_corner_values(self, cell: tuple[int, ...]) -> np.ndarray:
        corners = []
        for offs in itertools.product((0, 1), repeat=self.dimension):
            corners.append(self.values[tuple(c + o for c, o in zip(cell, offs))])
        return np.asarray(corners)

    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def affine_pieces(self) -> list[AffinePiece]:
        """Kuhn triangulation of every grid cell (d! simplices per cell)."""
        pieces = []
        d = self.dimension
        for cell in self.cell_indices():
            base = np.array(cell, dtype=int)
            for perm in itertools.permutations(range(d)):
                idxs = [tuple(base)]
                cur = base.copy()
                for axis in perm:
                    cur = cur.copy()
                    cur[axis] += 1
                    idxs.append(tuple(cur))
                verts = np.array([self.node_point(i) for i in idxs])
                vals = np.array([self.values[i] for i in idxs])
                pieces.append(_affine_from_simplex(verts, vals))
        return pieces

    def __call__(self, x: Sequence[float]) -> np.ndarray:
        """Multilinear interpolation (agrees with the samples at nodes)."""
        x = np.asarray(x, dtype=float)
        t = (x - self.lo) / (self.hi - self.lo) * (np.array(self.node_counts) - 1)
        base = np.clip(np.floor(t).astype(int), 0, np.array(self.node_counts) - 2)
        frac = t - base
        out = 0.0
        for offs in itertools.product((0, 1), repeat=self.dimension):
            w = 1.0
            for j, o in enumerate(offs):
                w *= frac[j] if o else (1.0 - frac[j])
            out = out + w * self.values[tuple(base + np.array(offs))]
        return out


def bilipschitz_constants(points: np.ndarray, images: np.ndarray) -> tuple[float, float]:
    """(largest lower, smallest upper) stretch over all sample pairs.

    Returns (b, L) with b*|x-y| <= |f(x)-f(y)| <= L*|x-y| tight on the samples.
    """
    pts = np.asarray(points, dtype=float)
    img = np.asarray(images, dtype=float)
    n = len(pts)
    lo, hi = np.inf, 0.0
    for i in range(n):
        src = np.linalg.norm(pts[i + 1:] - pts[i], axis=1)
        dst = np.linalg.norm(img[i + 1:] - img[i], axis=1)
        if np.any(src == 0):
            raise ValueError("sample points must be pairwise distinct")
        ratios = dst / src
        if ratios.size:
            lo = min(lo, float(ratios.min()))
            hi = max(hi, float(ratios.max()))
    return lo, hi
