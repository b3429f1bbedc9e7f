"""The refinement driver: hierarchically well-spaced supersets.

Inputs are inserted in greedy-permutation order into a layered mesh. Each
insertion is located by a graph walk seeded at the point's greedy
predecessor, then dispatched:

* nearest vertex is a Steiner point: snap, i.e. delete the Steiner point and
  insert the input in its place;
* nearest vertex is an input and the new point lands within r(q)/K of it:
  the gap between the point's scale and the local feature size is too large
  to refine across, so open a new layer at q (a cage two insertion-distances
  wide around a copy of q) and insert there;
* otherwise: plain insertion into the nearest vertex's layer.

After every insertion the refinement queue is drained: any cell whose
measured aspect exceeds tau_threshold gets its approximate farthest corner
inserted as a Steiner point until every cell is round again. Termination
leaves every layer tau-well-spaced while only ever touching neighborhoods of
the maintained graph, never a full triangulation.
"""

from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .adg import KIND_CAGE, KIND_INPUT, KIND_STEINER, Hierarchy, MeshStore
from .cage import get_cage, place_cage
from .config import Config
from .errors import InternalInvariantError, ResourceLimitError
from .geometry import distance
from .greedy import GreedyOrder, greedy_permutation
from .locate import greedy_walk

__all__ = [
    "RefinementQueue",
    "RunResult",
    "Refiner",
    "well_spaced_points",
    "flatten",
]

log = logging.getLogger(__name__)


class RefinementQueue:
    """FIFO of vertex ids pending an aspect re-check.

    Duplicate entries are allowed; every popped id is re-checked against the
    threshold before triggering an insertion, so stale entries are harmless.
    """

    def __init__(self):
        self._dq = deque()

    def push(self, vid: int):
        self._dq.append(vid)

    def pop(self) -> int:
        return self._dq.popleft()

    def __len__(self):
        return len(self._dq)

    def __bool__(self):
        return bool(self._dq)


@dataclass
class RunResult:
    store: MeshStore
    hierarchy: Hierarchy
    order: GreedyOrder
    stats: dict
    flattened_graph: dict | None = None


class Refiner:
    """One refinement run over a fixed input point set.

    ``hooks`` may contain:

    * ``"mutation"``: fn(store, layer_id, event) fired after each complete
      graph mutation (event in {"new_layer", "insert", "delete"});
    * ``"walk"``: fn(store, layer_id, target_point, result_vid) fired after
      each point-location walk.
    """

    def __init__(self, points, config: Config | None = None, hooks: dict | None = None):
        self.config = config if config is not None else Config()
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError(f"expected an (n, d) array, got shape {pts.shape}")
        self.points = pts
        self.order = greedy_permutation(pts)  # also validates n, finiteness, duplicates
        self.hooks = hooks or {}
        cage = get_cage(
            pts.shape[1],
            self.config.eta,
            seed=self.config.seed,
            size_cap=self.config.cage_size_cap,
        )
        self._cage = cage
        self.queue = RefinementQueue()
        self.store = MeshStore(
            pts.shape[1], self.config, cage, refine_queue=self.queue
        )
        self.steiner_count = 0
        self.snap_count = 0
        self.insertions = 0
        self.max_walk_steps = 0

    # -- plumbing -------------------------------------------------------------

    def _fire_mutation(self, lid: int, event: str):
        hook = self.hooks.get("mutation")
        if hook is not None:
            hook(self.store, lid, event)

    def _add_vertex(self, point, kind, lid, orig=None) -> int:
        self.insertions += 1
        if self.insertions > self.config.max_insertions:
            err = ResourceLimitError(
                f"insertion cap {self.config.max_insertions} exceeded"
            )
            err.stats = self._stats(wall_time=None)
            raise err
        return self.store.add_vertex(point, kind, lid, orig=orig)

    def _stats(self, wall_time) -> dict:
        alive = sum(1 for v in self.store.vertices if v.alive)
        return {
            "n_input": int(self.points.shape[0]),
            "m_output": alive,
            "steiner_count": self.steiner_count,
            "snap_count": self.snap_count,
            "layer_count": len(self.store.hierarchy.layers),
            "max_degree": self.store.max_degree(),
            "max_walk_steps": self.max_walk_steps,
            "wall_time": wall_time,
        }

    # -- layer bring-up ---------------------------------------------------------

    def _spawn_layer(self, center, radius, parent_lid, parent_vid, anchor_orig) -> int:
        """Create a layer: anchor copy at the center, cage around it, complete graph."""
        lay = self.store.create_layer(
            center, radius, parent=parent_lid, parent_vertex=parent_vid
        )
        anchor = self._add_vertex(center, KIND_INPUT, lay.lid, orig=anchor_orig)
        ids = [anchor]
        for pt in place_cage(self._cage, center, radius):
            ids.append(self._add_vertex(pt, KIND_CAGE, lay.lid))
        for i, u in enumerate(ids):
            for v in ids[i + 1 :]:
                self.store.insert_edge(u, v)
        for u in sorted(ids):
            self.store.update_aspect(u)
        if parent_lid is not None:
            lay.shared_vertex = anchor
        if anchor_orig is not None:
            self.store.hierarchy.input_copy[anchor_orig] = anchor
        self._fire_mutation(lay.lid, "new_layer")
        return anchor

    # -- the operations ---------------------------------------------------------

    def regular_insert(self, point, qvid: int, kind: str, orig=None) -> int:
        """Insert a point whose nearest alive vertex is q, into q's layer."""
        point = np.asarray(point, dtype=np.float64)
        q = self.store.vertices[qvid]
        lid = q.layer
        lay = self.store.hierarchy.layers[lid]
        if kind == KIND_INPUT:
            # Inputs are confined to the cage ball: the root cage contains the
            # whole input set and child layers are entered only at half their
            # radius. Steiner corners carry no such guarantee (boundary cells
            # poke past the sphere, and aggressive pruning at low tau can open
            # a cell wide), so for them a distant landing is only a diagnostic.
            if distance(point, lay.cage_center) >= lay.cage_radius:
                raise InternalInvariantError(
                    f"input at {point.tolist()} falls outside layer {lid}'s cage"
                )
        elif distance(point, q.point) > q.r * self.config.tau_prune * (1.0 + 1e-9):
            log.warning(
                "steiner corner at distance %.3g from vertex %d exceeds its "
                "search ball (r=%.3g); cell likely lost a defining constraint",
                distance(point, q.point), qvid, q.r,
            )
        vid = self._add_vertex(point, kind, lid, orig=orig)
        rec = self.store.vertices[vid]
        rec.r = distance(point, q.point) / 2.0
        for v in self.store.neighbor_search(vid, qvid):
            self.store.insert_edge(vid, v)
        self.store.update_aspect(vid)
        self.store.prune_edges(vid)
        for v in sorted(rec.neighbors):
            nrec = self.store.vertices[v]
            corner = nrec.farthest_corner
            if corner is not None:
                u = point - nrec.point
                # Corner strictly on v's side of the new bisector: the cell
                # keeps it, the stored R estimate stands for the shrunken
                # cell, and only the inradius can move (exactly to d/2 if
                # that is smaller).
                if (corner - nrec.point) @ u < 0.5 * (u @ u) * (1.0 - 1e-12):
                    self.store.tighten_inradius(v, distance(point, nrec.point) / 2.0)
                    self.store.prune_edges(v)
                    continue
            self.store.update_aspect(v, shrunk=True)
            self.store.prune_edges(v)
        if kind == KIND_INPUT and orig is not None:
            self.store.hierarchy.input_copy[orig] = vid
        self._fire_mutation(lid, "insert")
        return vid

    def snap(self, point, qvid: int, orig) -> int:
        """Replace the Steiner vertex q by the input ``point`` landing next to it."""
        q = self.store.vertices[qvid]
        if q.kind != KIND_STEINER:
            raise ValueError(f"snap target {qvid} is {q.kind}, not steiner")
        lid = q.layer
        nbrs = sorted(q.neighbors)
        dists = [distance(point, self.store.vertices[v].point) for v in nbrs]
        q2 = nbrs[int(np.argmin(dists))]  # ties fall to the smallest id
        self.store.delete_with_reconnection(qvid)
        self._fire_mutation(lid, "delete")
        self.snap_count += 1
        return self.regular_insert(point, q2, KIND_INPUT, orig=orig)

    def new_layer(self, point, qvid: int, orig) -> int:
        """Open a child layer at input vertex q and insert ``point`` into it."""
        q = self.store.vertices[qvid]
        d = distance(point, q.point)
        radius = 2.0 * d
        if not radius < q.r:
            # Dispatch said d < r(q)/K with K >= 4, so this is unreachable
            # short of a floating-point edge; degrade to a plain insertion.
            log.warning(
                "new_layer fallback: radius %g not inside r(q)=%g at vertex %d",
                radius, q.r, qvid,
            )
            return self.regular_insert(point, qvid, KIND_INPUT, orig=orig)
        anchor = self._spawn_layer(
            q.point, radius, parent_lid=q.layer, parent_vid=qvid, anchor_orig=q.orig
        )
        return self.regular_insert(point, anchor, KIND_INPUT, orig=orig)

    def insert(self, point, orig: int) -> int:
        """Locate and insert one input point (greedy order, not the first two)."""
        point = np.asarray(point, dtype=np.float64)
        phi = self.order.predecessor[orig]
        start = self.store.hierarchy.input_copy[phi]
        qvid, steps = greedy_walk(self.store, point, start)
        if steps > self.max_walk_steps:
            self.max_walk_steps = steps
        q = self.store.vertices[qvid]
        walk_hook = self.hooks.get("walk")
        if walk_hook is not None:
            walk_hook(self.store, q.layer, point, qvid)
        if q.kind == KIND_STEINER:
            return self.snap(point, qvid, orig)
        if q.kind == KIND_INPUT and distance(point, q.point) < q.r / self.config.K:
            return self.new_layer(point, qvid, orig)
        return self.regular_insert(point, qvid, KIND_INPUT, orig=orig)

    def refine_loop(self):
        """Drain the queue: insert farthest corners until every cell is round.

        Every popped id is re-checked before acting. A vertex still above the
        threshold after its corner insertion goes back on the queue; the push
        gating inside update_aspect only fires on upward threshold crossings
        and would otherwise lose it.
        """
        thr = self.config.tau_threshold
        while self.queue:
            vid = self.queue.pop()
            v = self.store.vertices[vid]
            if not v.alive or v.kind == KIND_CAGE:
                continue
            if not v.aspect > thr:
                continue
            corner = np.array(v.farthest_corner, copy=True)
            lay = self.store.hierarchy.layers[v.layer]
            existing = lay.points_index.get(corner.tobytes())
            if existing is not None:
                # Two adjacent bad cells can share their farthest Voronoi
                # vertex; the second arrival means the bisector to the vertex
                # already standing there is missing from v's cell. Restore
                # the edge instead of inserting a duplicate point.
                if existing != vid and existing not in v.neighbors:
                    self.store.insert_edge(vid, existing)
                    self.store.update_aspect(vid, shrunk=True)
                    self.store.prune_edges(vid)
                    if v.alive and v.aspect > thr:
                        self.queue.push(vid)
                else:
                    log.warning(
                        "refinement stalled at vertex %d: farthest corner "
                        "coincides with vertex %d", vid, existing,
                    )
                continue
            self.regular_insert(corner, vid, KIND_STEINER)
            self.steiner_count += 1
            if v.alive and v.aspect > thr:
                self.queue.push(vid)

    # -- the driver ---------------------------------------------------------------

    def run(self, flatten_output: bool = False) -> RunResult:
        t0 = time.perf_counter()
        order = self.order.order
        p1 = self.points[order[0]]
        p2 = self.points[order[1]]
        root_radius = self.config.root_cage_scale * distance(p1, p2)
        anchor = self._spawn_layer(
            p1, root_radius, parent_lid=None, parent_vid=None, anchor_orig=order[0]
        )
        self.regular_insert(p2, anchor, KIND_INPUT, orig=order[1])
        self.refine_loop()
        for orig in order[2:]:
            self.insert(self.points[orig], orig)
            self.refine_loop()
        self.refine_loop()  # the queue is already empty; keep the drain explicit
        wall = time.perf_counter() - t0
        flattened = flatten(self.store) if flatten_output else None
        return RunResult(
            store=self.store,
            hierarchy=self.store.hierarchy,
            order=self.order,
            stats=self._stats(wall),
            flattened_graph=flattened,
        )


def well_spaced_points(
    points,
    config: Config | None = None,
    *,
    flatten_output: bool = False,
    hooks: dict | None = None,
) -> RunResult:
    """Refine ``points`` into a hierarchically well-spaced superset.

    Returns a RunResult whose store holds the layered point set and its
    approximate Delaunay graph; ``stats`` summarizes the run. Raises on
    duplicate or non-finite inputs, fewer than two points, or a blown
    insertion budget.
    """
    return Refiner(points, config=config, hooks=hooks).run(flatten_output=flatten_output)


def flatten(store: MeshStore) -> dict:
    """Contract the layer tree into a single graph dump.

    Deepest layers first, each child is merged into its parent: the two
    copies of the shared vertex are identified (the parent's id survives) and
    a complete bipartite graph is added between the child's cage vertices and
    the former neighbors of the shared vertex in the child, which restores
    edge containment across the old cage boundary. The result uses the same
    dump schema with a single layer.
    """
    hier = store.hierarchy
    adj: dict[int, set] = {}
    for rec in store.vertices:
        if rec.alive:
            adj[rec.vid] = {q for q in rec.neighbors if store.vertices[q].alive}
    merged = set()
    for lay in sorted(hier.layers.values(), key=lambda l: -l.lid):
        if lay.parent is None:
            continue
        child = lay.shared_vertex
        target = lay.parent_vertex
        if child is None or target is None:
            raise InternalInvariantError(f"layer {lay.lid} lacks its shared vertex")
        spokes = sorted(adj[child])
        for c in lay.cage_ids:
            for u in spokes:
                if c != u:
                    adj[c].add(u)
                    adj[u].add(c)
        for u in list(adj[child]):
            adj[u].discard(child)
            if u != target:
                adj[u].add(target)
                adj[target].add(u)
        adj[target].discard(child)
        del adj[child]
        merged.add(child)

    root = hier.root
    verts = []
    edges = []
    for rec in store.vertices:
        if not rec.alive or rec.vid in merged:
            continue
        verts.append(
            {
                "id": rec.vid,
                "coords": [float(x) for x in rec.point],
                "kind": rec.kind,
                "layer": root,
            }
        )
        for q in adj[rec.vid]:
            if rec.vid < q:
                edges.append([rec.vid, q])
    edges.sort()
    return {
        "dimension": store.dim,
        "vertices": verts,
        "edges": edges,
        "layer_tree": [{"id": root, "parent": None, "shared_vertex": None}],
    }
