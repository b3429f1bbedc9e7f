"""Mutable store for the layered approximate Delaunay graph.

Each layer holds a point set and an undirected graph over it that is
maintained as a supergraph of that set's Delaunay edges. Vertices carry the
measured in-radius r (half the distance to the nearest neighbor), the
measured out-radius R (distance to the approximate farthest corner of the
Voronoi cell), and the corner itself. Edges strictly longer than
2*min(R(p), R(q)) can never be Delaunay and are pruned; candidate neighbors
of a new vertex are collected by a graph search bounded by the same radii.

Layers form a tree: a child layer shares exactly one point with its parent
(stored as a copy; the two copies never interact). No edge ever crosses
layers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import Config
from .errors import InternalInvariantError
from . import lp

__all__ = [
    "KIND_INPUT",
    "KIND_STEINER",
    "KIND_CAGE",
    "VertexRecord",
    "Layer",
    "Hierarchy",
    "MeshStore",
]

KIND_INPUT = "input"
KIND_STEINER = "steiner"
KIND_CAGE = "cage"
_KINDS = (KIND_INPUT, KIND_STEINER, KIND_CAGE)


@dataclass
class VertexRecord:
    vid: int
    point: np.ndarray
    kind: str
    layer: int
    orig: int | None = None  # original input index for input-kind copies
    r: float = 0.0
    R: float = 0.0
    farthest_corner: np.ndarray | None = None
    alive: bool = True
    neighbors: set = field(default_factory=set)

    @property
    def aspect(self) -> float:
        return self.R / self.r if self.r > 0.0 else 0.0


@dataclass
class Layer:
    lid: int
    parent: int | None
    cage_center: np.ndarray
    cage_radius: float
    parent_vertex: int | None = None  # vid of the shared point in the parent layer
    shared_vertex: int | None = None  # vid of the shared point's copy in this layer
    vertex_ids: set = field(default_factory=set)
    cage_ids: list = field(default_factory=list)
    points_index: dict = field(default_factory=dict)


class Hierarchy:
    """Layer tree plus the map from input index to its deepest copy."""

    def __init__(self):
        self.layers: dict[int, Layer] = {}
        self.input_copy: dict[int, int] = {}
        self.root: int | None = None

    def layer_tree(self) -> list:
        return [
            {
                "id": lay.lid,
                "parent": lay.parent,
                "shared_vertex": lay.shared_vertex,
            }
            for lay in sorted(self.layers.values(), key=lambda l: l.lid)
        ]


class MeshStore:
    """Vertices, per-layer graphs, and the structural operations on them."""

    def __init__(self, dim: int, config: Config, cage, refine_queue=None):
        if dim < 1:
            raise ValueError(f"dimension must be at least 1, got {dim}")
        self.dim = dim
        self.config = config
        self.cage = cage
        self.vertices: list[VertexRecord] = []
        self.hierarchy = Hierarchy()
        # Vertices whose measured aspect newly crossed the refinement
        # threshold are pushed here; any object with push(vid) works.
        self.refine_queue = refine_queue

    # -- structure ----------------------------------------------------------

    def create_layer(self, center, radius: float, parent=None, parent_vertex=None) -> Layer:
        center = np.asarray(center, dtype=np.float64)
        if center.shape != (self.dim,):
            raise ValueError("cage center has the wrong dimension")
        if not radius > 0.0:
            raise ValueError(f"cage radius must be positive, got {radius}")
        lid = len(self.hierarchy.layers)
        lay = Layer(
            lid=lid,
            parent=parent,
            cage_center=center,
            cage_radius=float(radius),
            parent_vertex=parent_vertex,
        )
        self.hierarchy.layers[lid] = lay
        if parent is None:
            if self.hierarchy.root is not None:
                raise InternalInvariantError("second root layer requested")
            self.hierarchy.root = lid
        return lay

    def add_vertex(self, point, kind: str, lid: int, orig=None) -> int:
        if kind not in _KINDS:
            raise ValueError(f"unknown vertex kind {kind!r}")
        point = np.ascontiguousarray(point, dtype=np.float64)
        if point.shape != (self.dim,):
            raise ValueError(
                f"point dimension {point.shape} does not match store dimension {self.dim}"
            )
        if not np.all(np.isfinite(point)):
            raise ValueError("point has non-finite coordinates")
        lay = self.hierarchy.layers[lid]
        key = point.tobytes()
        if key in lay.points_index:
            raise ValueError(
                f"duplicate point in layer {lid}: vertex {lay.points_index[key]} "
                f"already at {point.tolist()}"
            )
        vid = len(self.vertices)
        self.vertices.append(
            VertexRecord(vid=vid, point=point, kind=kind, layer=lid, orig=orig)
        )
        lay.vertex_ids.add(vid)
        lay.points_index[key] = vid
        if kind == KIND_CAGE:
            lay.cage_ids.append(vid)
        return vid

    def insert_edge(self, u: int, v: int):
        if u == v:
            raise ValueError("self-loops are not allowed")
        a, b = self.vertices[u], self.vertices[v]
        if not (a.alive and b.alive):
            raise InternalInvariantError("edge endpoint is not alive")
        if a.layer != b.layer:
            raise InternalInvariantError(
                f"cross-layer edge {u}-{v} ({a.layer} vs {b.layer})"
            )
        a.neighbors.add(v)
        b.neighbors.add(u)

    def delete_edge(self, u: int, v: int):
        self.vertices[u].neighbors.discard(v)
        self.vertices[v].neighbors.discard(u)

    # -- queries ------------------------------------------------------------

    def alive_ids(self, lid: int) -> list:
        return sorted(
            vid for vid in self.hierarchy.layers[lid].vertex_ids
            if self.vertices[vid].alive
        )

    def layer_points(self, lid: int):
        ids = self.alive_ids(lid)
        return ids, np.array([self.vertices[v].point for v in ids])

    def max_degree(self) -> int:
        return max(
            (len(v.neighbors) for v in self.vertices if v.alive), default=0
        )

    # -- the maintained-graph operations -------------------------------------

    def neighbor_search(self, pvid: int, start: int) -> list:
        """Candidate neighbors for a fresh vertex p, found from ``start``.

        Breadth-first over the existing layer graph, accepting v iff
        d(p, v) <= 2*min(R(v)/corner_discount, tau_prune*r(p)) and expanding
        only through accepted vertices, in ascending-id order. p's
        provisional r must be set.

        A Delaunay edge (p, v) satisfies d(p, v) <= 2*(true outradius of v),
        and the stored R underestimates the true outradius by at most the
        corner-query discount, so widening by that factor keeps the accepted
        set a superset of p's Delaunay neighbors while the search stays local.
        """
        p = self.vertices[pvid]
        if not p.r > 0.0:
            raise ValueError("provisional r(p) must be set before the search")
        sv = self.vertices[start]
        if sv.layer != p.layer or not sv.alive:
            raise ValueError("search start must be alive in p's layer")
        cap = 2.0 * self.config.tau_prune * p.r
        widen = 1.0 / self.config.corner_discount
        accepted = []
        seen = {start, pvid}
        frontier = [start]
        while frontier:
            pts = np.array([self.vertices[v].point for v in frontier])
            dists = np.linalg.norm(pts - p.point[None, :], axis=1)
            nxt = []
            for v, d in zip(frontier, dists):
                rec = self.vertices[v]
                if d <= min(2.0 * rec.R * widen, cap):
                    accepted.append(v)
                    for w in sorted(rec.neighbors):
                        if w not in seen:
                            seen.add(w)
                            nxt.append(w)
            frontier = sorted(set(nxt))
        return sorted(accepted)

    def prune_edges(self, pvid: int):
        """Drop incident edges certified longer than any Delaunay edge can be.

        A Delaunay edge is at most twice the shorter of the two true
        outradii; the stored R underestimates truth by at most the
        corner-query discount, so the retention radius is widened by its
        inverse before the strict comparison. Without the widening a
        fraction-of-a-percent underestimate can cut a genuine Delaunay edge,
        and a lost edge lets a cell's linear description go unbounded.
        """
        p = self.vertices[pvid]
        widen = 1.0 / self.config.corner_discount
        nbrs = sorted(p.neighbors)
        if not nbrs:
            return
        pts = np.array([self.vertices[q].point for q in nbrs])
        dists = np.linalg.norm(pts - p.point[None, :], axis=1)
        for q, d in zip(nbrs, dists):
            if d > 2.0 * min(p.R, self.vertices[q].R) * widen:
                self.delete_edge(pvid, q)

    def update_aspect(self, pvid: int, shrunk: bool = False):
        """Refresh r, R, and the farthest corner of p; enqueue on a threshold crossing.

        r becomes half the distance to the nearest neighbor; R the distance
        to the approximate farthest corner of the cell cut out by the current
        neighbors. p is pushed onto the refinement queue iff its measured
        aspect exceeds tau_threshold while the previous value did not (cage
        vertices are never enqueued; their cells are unbounded by design).

        ``shrunk`` asserts the cell only gained constraints since the last
        update, so the previous estimate (widened back to a true outradius
        bound) caps the corner search ball. Never pass it after a deletion.
        """
        p = self.vertices[pvid]
        nbrs = sorted(p.neighbors)
        if not nbrs:
            raise InternalInvariantError(f"vertex {pvid} has no neighbors to measure")
        old_ratio = p.aspect
        pts = np.array([self.vertices[q].point for q in nbrs])
        dists = np.linalg.norm(pts - p.point[None, :], axis=1)
        p.r = float(np.min(dists)) / 2.0
        if not p.r > 0.0:
            raise InternalInvariantError(f"vertex {pvid} coincides with a neighbor")
        cell = lp.HalfspaceSet.from_cell(p.point, pts)
        # Cells near the cage sphere can poke past it, but a corner chased
        # beyond twice the cage ball would seed points outside the bounding
        # domain and let scales escalate without bound, so the search is
        # truncated there. Within the truncation the usual approximation
        # guarantee applies; a cell reaching past it saturates and keeps
        # getting refined at the layer's own scale.
        lay = self.hierarchy.layers[p.layer]
        reach = 2.0 * lay.cage_radius + float(
            np.linalg.norm(p.point - lay.cage_center)
        )
        if shrunk and p.R > 0.0:
            hint = p.R * (1.0 + 1e-9) / self.config.corner_discount
            # A saturated estimate sits pinned at the spatial cap; shrinking
            # the ball from it would decay the estimate on every refresh.
            if hint < 0.98 * reach:
                reach = min(reach, hint)
        corner = lp.approximate_farthest_corner(
            cell, p.point, p.r, self.cage.directions, self.config, max_reach=reach
        )
        p.farthest_corner = corner
        p.R = float(np.linalg.norm(corner - p.point))
        if (
            p.kind != KIND_CAGE
            and self.refine_queue is not None
            and p.aspect > self.config.tau_threshold >= old_ratio
        ):
            self.refine_queue.push(pvid)

    def tighten_inradius(self, pvid: int, r_new: float):
        """Lower r after a new neighbor appeared without re-querying the corner.

        Valid only when the stored farthest corner survives the new bisector:
        the cell kept the corner, so the stored R still satisfies its
        guarantee for the (shrunken) cell, and the inradius is exactly
        min(old r, half the new edge length). Queue gating matches
        update_aspect.
        """
        p = self.vertices[pvid]
        if not r_new > 0.0:
            raise InternalInvariantError(f"vertex {pvid} coincides with a neighbor")
        if r_new >= p.r:
            return
        old_ratio = p.aspect
        p.r = r_new
        if (
            p.kind != KIND_CAGE
            and self.refine_queue is not None
            and p.aspect > self.config.tau_threshold >= old_ratio
        ):
            self.refine_queue.push(pvid)

    def delete_with_reconnection(self, pvid: int):
        """Remove a Steiner vertex, cliquing its neighborhood to preserve containment.

        Deleting p can only create Delaunay edges among p's former neighbors,
        so the clique over them restores the supergraph property; the
        subsequent aspect refresh and prune passes (ascending id, two passes)
        shrink it back.
        """
        p = self.vertices[pvid]
        if p.kind != KIND_STEINER:
            raise ValueError(f"only steiner vertices are deletable, {pvid} is {p.kind}")
        if not p.alive:
            raise ValueError(f"vertex {pvid} is already deleted")
        nbrs = sorted(p.neighbors)
        for i, u in enumerate(nbrs):
            for v in nbrs[i + 1 :]:
                self.insert_edge(u, v)
        for q in nbrs:
            self.delete_edge(pvid, q)
        p.alive = False
        lay = self.hierarchy.layers[p.layer]
        lay.vertex_ids.discard(pvid)
        del lay.points_index[p.point.tobytes()]
        for q in nbrs:
            self.update_aspect(q)
        for q in nbrs:
            self.prune_edges(q)

    # -- serialization -------------------------------------------------------

    def graph_dump(self) -> dict:
        """Deterministic JSON-ready dump of the alive graph and the layer tree."""
        verts = []
        edges = []
        for rec in self.vertices:
            if not rec.alive:
                continue
            verts.append(
                {
                    "id": rec.vid,
                    "coords": [float(x) for x in rec.point],
                    "kind": rec.kind,
                    "layer": rec.layer,
                }
            )
            for q in rec.neighbors:
                if rec.vid < q and self.vertices[q].alive:
                    edges.append([rec.vid, q])
        edges.sort()
        return {
            "dimension": self.dim,
            "vertices": verts,
            "edges": edges,
            "layer_tree": self.hierarchy.layer_tree(),
        }
