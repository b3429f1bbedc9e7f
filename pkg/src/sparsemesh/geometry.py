"""Vector primitives shared by the walk, the LP bounds, and the refinement driver.

Points are flat float64 numpy arrays. Every predicate reduces to inner
products, so one code path serves all dimensions.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "as_point",
    "distance",
    "closer_to",
    "segment_bisector_crossing",
    "diameter_estimate",
]

# A segment direction whose component against the bisector normal is below
# this (relative) threshold is treated as parallel to the bisector.
PARALLEL_RTOL = 1e-15


def as_point(x) -> np.ndarray:
    """Coerce ``x`` to a float64 coordinate vector, rejecting bad shapes and NaN/inf."""
    p = np.asarray(x, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError(f"point must be a non-empty flat vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point has non-finite coordinates")
    return p


def _same_dim(*pts):
    d = pts[0].shape[-1]
    for p in pts[1:]:
        if p.shape[-1] != d:
            raise ValueError(f"dimension mismatch: {d} vs {p.shape[-1]}")


def distance(u, v) -> float:
    """Euclidean distance between two points."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _same_dim(u, v)
    return float(np.linalg.norm(u - v))


def closer_to(x, p, q) -> float:
    """Signed bisector test: positive iff ``x`` is strictly closer to ``p`` than to ``q``.

    Returns d(x,q)^2 - d(x,p)^2 evaluated in the linear form
    2<x, p-q> - (<p,p> - <q,q>). The linear form keeps the zero set exactly
    on the bisector of p and q instead of subtracting two large squared
    distances.
    """
    x = np.asarray(x, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    _same_dim(x, p, q)
    return float(2.0 * np.dot(x, p - q) - (np.dot(p, p) - np.dot(q, q)))


def segment_bisector_crossing(w, target, v, q):
    """Intersect the segment from ``w`` to ``target`` with the bisector of ``v`` and ``q``.

    Returns ``(point, alpha)`` with ``alpha`` the segment parameter in [0, 1],
    or ``None`` when there is no usable crossing. A crossing is usable when

    * the segment actually reaches the bisector within its span, and
    * it leaves v's side, i.e. <target - w, q - v> >= 0.

    A segment parallel to (or lying within) the bisector yields ``None``.
    """
    w = np.asarray(w, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    _same_dim(w, target, v, q)

    direction = target - w
    n = q - v
    # closer_to(w + a*direction, v, q) is linear in a with slope -2<direction, n>;
    # the leaving-direction test and the non-parallel test share this quantity.
    denom = 2.0 * float(np.dot(direction, n))
    scale = 2.0 * float(np.linalg.norm(direction) * np.linalg.norm(n))
    if denom <= PARALLEL_RTOL * scale:
        return None
    alpha = closer_to(w, v, q) / denom
    if alpha < 0.0 or alpha > 1.0:
        return None
    return w + alpha * direction, float(alpha)


def diameter_estimate(points) -> float:
    """Twice the farthest distance from the first point.

    Never underestimates the true diameter and overestimates it by at most
    a factor of two. Returns 0.0 for a single point.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError(f"expected an (n, d) array, got shape {pts.shape}")
    if pts.shape[0] <= 1:
        return 0.0
    return 2.0 * float(np.max(np.linalg.norm(pts - pts[0], axis=1)))
