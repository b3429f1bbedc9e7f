"""Greedy permutations.

The greedy permutation of a point set starts anywhere and repeatedly appends
the point farthest from everything chosen so far. Its prefixes are nets: the
i-th insertion radius lambda_i bounds the distance from any point to the
prefix before it. The refinement driver inserts points in this order, and
each point's predecessor (its nearest neighbor among earlier points) seeds
the point-location walk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = ["GreedyOrder", "greedy_permutation"]


@dataclass
class GreedyOrder:
    """A greedy permutation over the original point indices.

    ``order[0]`` is the start point. ``predecessor[i]`` and
    ``predecessor_radius[i]`` are defined for every original index except the
    start: the nearest earlier point and the distance to it at insertion time.
    """

    order: list = field(default_factory=list)
    predecessor: dict = field(default_factory=dict)
    predecessor_radius: dict = field(default_factory=dict)
    start: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "start": self.start,
                "order": self.order,
                "predecessor": {str(k): v for k, v in self.predecessor.items()},
                "predecessor_radius": {
                    str(k): v for k, v in self.predecessor_radius.items()
                },
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "GreedyOrder":
        obj = json.loads(text)
        return cls(
            order=[int(i) for i in obj["order"]],
            predecessor={int(k): int(v) for k, v in obj["predecessor"].items()},
            predecessor_radius={
                int(k): float(v) for k, v in obj["predecessor_radius"].items()
            },
            start=int(obj["start"]),
        )


def greedy_permutation(points, start: int = 0) -> GreedyOrder:
    """Exact O(n^2) greedy permutation with deterministic tie-breaking.

    Ties in the farthest-point argmax and in the predecessor nearest-neighbor
    are broken toward the smallest original index. Exact duplicate points are
    rejected.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError(f"expected an (n, d) array, got shape {pts.shape}")
    n = pts.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 points, got {n}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain non-finite coordinates")
    if not 0 <= start < n:
        raise ValueError(f"start index {start} out of range for {n} points")

    dist = np.linalg.norm(pts - pts[start], axis=1)
    nn = np.full(n, start, dtype=np.int64)
    dist[start] = -np.inf

    out = GreedyOrder(start=start)
    out.order.append(start)
    for _ in range(n - 1):
        nxt = int(np.argmax(dist))  # first occurrence = smallest index on ties
        lam = float(dist[nxt])
        if lam == 0.0:
            raise ValueError(
                f"duplicate points: index {nxt} coincides with index {int(nn[nxt])}"
            )
        out.order.append(nxt)
        out.predecessor[nxt] = int(nn[nxt])
        out.predecessor_radius[nxt] = lam
        dist[nxt] = -np.inf
        newd = np.linalg.norm(pts - pts[nxt], axis=1)
        closer = (newd < dist) | ((newd == dist) & (nxt < nn))
        nn[closer] = nxt
        # min(-inf, x) = -inf, so already-used slots stay excluded.
        np.minimum(dist, newd, out=dist)
    return out
