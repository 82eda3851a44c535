"""Marching squares on a cell-centred grid.

Saddle squares are resolved by comparing the mean of the four corner values
with the level. The field is padded with a below-level border so every
returned polyline is closed (first vertex repeated at the end).
"""

from __future__ import annotations

import numpy as np

from .geometry import Grid2D

# corner bits: 1 = (j, i), 2 = (j, i+1), 4 = (j+1, i+1), 8 = (j+1, i)
# edges: 0 bottom, 1 right, 2 top, 3 left
_SEGMENTS = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)], 6: [(0, 2)], 7: [(3, 2)],
    8: [(2, 3)], 9: [(2, 0)], 11: [(2, 1)], 12: [(1, 3)], 13: [(1, 0)], 14: [(0, 3)],
}


def _edge_key(j, i, e):
    # canonical id of a square edge, shared by the two squares touching it
    if e == 0:
        return ("h", j, i)
    if e == 2:
        return ("h", j + 1, i)
    if e == 3:
        return ("v", j, i)
    return ("v", j, i + 1)


def marching_squares(values: np.ndarray, grid: Grid2D, level: float) -> list[np.ndarray]:
    """Closed polylines (arrays of shape (m, 2)) approximating ``{values = level}``."""
    v = np.asarray(values, dtype=float)
    if v.shape != grid.shape:
        raise ValueError("values do not match grid shape")
    low = min(float(np.nanmin(v)), level) - 1.0
    v = np.pad(v, 1, constant_values=low)
    above = v > level
    code = (
        above[:-1, :-1] * 1 + above[:-1, 1:] * 2 + above[1:, 1:] * 4 + above[1:, :-1] * 8
    ).astype(np.int8)
    js, is_ = np.nonzero((code != 0) & (code != 15))

    ox = grid.origin[0] - grid.spacing
    oy = grid.origin[1] - grid.spacing
    s = grid.spacing

    def point(key):
        kind, j, i = key
        if kind == "h":
            a, b = v[j, i], v[j, i + 1]
            t = (level - a) / (b - a)
            return (ox + (i + t) * s, oy + j * s)
        a, b = v[j, i], v[j + 1, i]
        t = (level - a) / (b - a)
        return (ox + i * s, oy + (j + t) * s)

    links: dict = {}
    for j, i in zip(js.tolist(), is_.tolist()):
        c = int(code[j, i])
        if c == 5 or c == 10:
            centre_above = (v[j, i] + v[j, i + 1] + v[j + 1, i + 1] + v[j + 1, i]) / 4.0 > level
            if c == 5:
                segs = [(3, 2), (1, 0)] if centre_above else [(3, 0), (1, 2)]
            else:
                segs = [(0, 3), (2, 1)] if centre_above else [(0, 1), (2, 3)]
        else:
            segs = _SEGMENTS[c]
        for e0, e1 in segs:
            k0, k1 = _edge_key(j, i, e0), _edge_key(j, i, e1)
            links.setdefault(k0, []).append(k1)
            links.setdefault(k1, []).append(k0)

    polylines = []
    seen = set()
    for start in links:
        if start in seen:
            continue
        chain = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nbrs = links[cur]
            n = nbrs[1] if nbrs[0] == prev and len(nbrs) > 1 else nbrs[0]
            if n == start or n in seen:
                break
            chain.append(n)
            seen.add(n)
            prev, cur = cur, n
        pts = np.array([point(k) for k in chain] + [point(chain[0])])
        polylines.append(pts)
    return polylines
