"""Point location by walking the approximate Delaunay graph.

To find the nearest vertex to a target point p, walk the segment from a
known start vertex (the deepest copy of p's greedy predecessor) toward p.
From the cell of the current vertex, find the closest crossing of the
remaining segment with a bisector against a graph neighbor, step through it,
and repeat; when no bisector crossing remains, the segment ends inside the
current cell and its vertex is the nearest neighbor. Because the graph
contains every Delaunay edge of the layer, the closest crossing is always a
true cell boundary; superfluous edges produce crossings that lie farther
along the segment and never win.
"""

from __future__ import annotations

import numpy as np

from .errors import InternalInvariantError
from .geometry import segment_bisector_crossing

__all__ = ["greedy_walk"]

# A step must advance the segment parameter by at least this fraction of the
# whole segment to count as progress; below it, only the cycle guard protects
# against revisiting a vertex through a degenerate (shared) crossing point.
PROGRESS_MIN = 1e-12


def greedy_walk(store, target, start: int):
    """Walk from vertex ``start`` to the alive vertex nearest ``target``.

    Returns ``(vid, steps)``. The walk stays inside start's layer. Raises
    InternalInvariantError on a cycle (a vertex revisited with no progress,
    which a Delaunay-containing graph cannot produce) or when the step count
    exceeds the configured cap.
    """
    target = np.asarray(target, dtype=np.float64)
    sv = store.vertices[start]
    if not sv.alive:
        raise ValueError(f"walk start {start} is not alive")
    if target.shape != sv.point.shape:
        raise ValueError("target dimension does not match the store")

    cap = store.config.walk_step_cap
    cur = start
    prev = -1
    w = sv.point
    beta = 0.0
    steps = 0
    visited_since_progress = {cur}
    while True:
        cur_rec = store.vertices[cur]
        best_alpha = None
        best_q = -1
        best_point = None
        for q in sorted(cur_rec.neighbors):
            if q == prev:
                continue
            hit = segment_bisector_crossing(
                w, target, cur_rec.point, store.vertices[q].point
            )
            if hit is None:
                continue
            point, alpha = hit
            if best_alpha is None or alpha < best_alpha:
                best_alpha, best_q, best_point = alpha, q, point
        if best_alpha is None:
            return cur, steps

        steps += 1
        if steps > cap:
            raise InternalInvariantError(
                f"walk exceeded {cap} steps; graph or geometry is inconsistent"
            )
        # Progress along the whole segment; a crossing on the remaining
        # sub-segment at parameter alpha advances beta by alpha*(1-beta).
        advance = best_alpha * (1.0 - beta)
        if advance >= PROGRESS_MIN:
            visited_since_progress = set()
        elif best_q in visited_since_progress:
            raise InternalInvariantError(
                f"walk cycled through vertex {best_q} without progress"
            )
        visited_since_progress.add(best_q)
        beta += advance
        w = best_point
        prev = cur
        cur = best_q
