"""Shared test helpers."""

import numpy as np


def winding_degree(mp, lo, hi, y, samples_per_edge=400):
    """Independent degree oracle: winding number of the mapped boundary loop.

    Walks the rectangle boundary counterclockwise, maps each sample, and sums
    the signed angle increments seen from y. For piecewise-linear maps the
    boundary image is a polygon, so with dense enough sampling the total is an
    exact multiple of 2*pi.
    """
    corners = [(lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1])]
    pts = []
    for i in range(4):
        a = np.array(corners[i], dtype=float)
        b = np.array(corners[(i + 1) % 4], dtype=float)
        for t in np.linspace(0.0, 1.0, samples_per_edge, endpoint=False):
            pts.append(a + t * (b - a))
    img = np.array([np.asarray(mp(p), dtype=float) for p in pts])
    img = img - np.asarray(y, dtype=float)
    ang = np.arctan2(img[:, 1], img[:, 0])
    inc = np.diff(np.concatenate([ang, ang[:1]]))
    inc = (inc + np.pi) % (2 * np.pi) - np.pi
    if np.abs(inc).max() > 3.0:
        raise ValueError("boundary sampling too coarse near y")
    total = float(inc.sum()) / (2 * np.pi)
    rounded = int(round(total))
    if abs(total - rounded) > 1e-6:
        raise ValueError(f"winding sum {total} is not an integer")
    return rounded
