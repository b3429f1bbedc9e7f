"""Exact geometric oracles, independent of the incremental structures.

Brute force and small LPs only. Tests use these to check the maintained
graph (edge containment, cell quality, spacing) without trusting any of the
code under test; everything here favors transparency over speed. The one
concession is candidate pruning in the Voronoi vertex enumeration, which is
certified exact before anything is returned.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import Delaunay, QhullError

from .adg import KIND_CAGE, KIND_INPUT, KIND_STEINER
from .errors import InternalInvariantError
from .lp import HalfspaceSet

__all__ = [
    "brute_nn",
    "feature_size",
    "delaunay_witness_slack",
    "exact_delaunay_edges",
    "required_missing_edges",
    "polytope_vertices",
    "voronoi_cell_vertices",
    "exact_aspect",
    "layer_sites",
    "layer_graph_edges",
    "check_layer_containment",
    "check_layer_quality",
    "feature_size_violations",
    "check_store",
]


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError(f"expected an (n, d) array, got shape {pts.shape}")
    return pts


def _diameter(pts: np.ndarray) -> float:
    if pts.shape[0] < 2:
        return 0.0
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    return float(np.linalg.norm(hi - lo))


def brute_nn(p, S) -> int:
    """Index of the row of S nearest to p, smallest index on ties.

    Rows coinciding with p are excluded, so for p taken from S this is the
    nearest *other* point.
    """
    pts = _as_points(S)
    p = np.asarray(p, dtype=np.float64)
    d2 = ((pts - p) ** 2).sum(axis=1)
    d2[d2 == 0.0] = np.inf
    if not np.isfinite(d2.min()):
        raise ValueError("no candidate rows distinct from p")
    return int(np.argmin(d2))


def feature_size(x, S) -> float:
    """Distance from x to its second-nearest row of S.

    For x equal to a row, the zero distance counts as the smallest, so this
    is the distance to the nearest other row.
    """
    pts = _as_points(S)
    if pts.shape[0] < 2:
        raise ValueError("feature size needs at least two points")
    x = np.asarray(x, dtype=np.float64)
    d2 = np.sort(((pts - x) ** 2).sum(axis=1))
    return float(np.sqrt(d2[1]))


# -- Delaunay -----------------------------------------------------------------


def delaunay_witness_slack(points, i, j, box_factor=4.0) -> float:
    """Best witness margin for the edge (i, j), in distance units.

    Maximizes the signed distance from a point x of bisector(p_i, p_j) to
    every other bisector plane facing p_i. Strictly positive means a point
    equidistant to p_i and p_j is strictly closer to them than to every other
    site, so the edge is in every Delaunay triangulation; a value near zero
    means the witness is degenerate (cospherical); negative means no witness.
    The search is capped to a box of ``box_factor`` diameters around p_i,
    which can only understate the margin.
    """
    pts = _as_points(points)
    n, d = pts.shape
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise ValueError(f"bad edge indices ({i}, {j}) for {n} points")
    p, q = pts[i], pts[j]
    diam = max(_diameter(pts), 1e-300)
    rows = []
    rhs = []
    for k in range(n):
        if k == i or k == j:
            continue
        u = pts[k] - p
        nu = float(np.linalg.norm(u))
        if nu == 0.0:
            raise ValueError(f"rows {i} and {k} coincide")
        rows.append(np.append(u / nu, 1.0))
        rhs.append((pts[k] @ pts[k] - p @ p) / (2.0 * nu))
    a_eq = np.append(2.0 * (q - p), 0.0).reshape(1, -1)
    b_eq = [float(q @ q - p @ p)]
    bounds = [(p[t] - box_factor * diam, p[t] + box_factor * diam) for t in range(d)]
    bounds.append((None, 2.0 * diam))
    c = np.zeros(d + 1)
    c[-1] = -1.0
    res = linprog(
        c,
        A_ub=np.array(rows) if rows else None,
        b_ub=np.array(rhs) if rhs else None,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
    )
    if not res.success:
        return -np.inf
    return float(-res.fun)


def exact_delaunay_edges(points, tol_rel=1e-9) -> set:
    """All Delaunay edges of the rows, as sorted index pairs.

    An edge is kept when its best empty-sphere witness has slack at least
    -tol_rel * diameter, so degenerate (cospherical) edges are included.
    Every pair goes through the witness LP; nothing here depends on a
    triangulation library.
    """
    pts = _as_points(points)
    n = pts.shape[0]
    if n < 2:
        return set()
    tol = tol_rel * max(1.0, _diameter(pts))
    edges = set()
    for i, j in combinations(range(n), 2):
        if delaunay_witness_slack(pts, i, j) >= -tol:
            edges.add((i, j))
    return edges


def _edges_of_some_triangulation(pts: np.ndarray):
    """Edge set of one Delaunay triangulation, or None when qhull declines.

    Any single triangulation contains every strict (positive-slack) Delaunay
    edge, so its edge set is a sound candidate filter for containment checks.
    """
    n, d = pts.shape
    if n < d + 2 or d < 2:
        return None
    try:
        tri = Delaunay(pts)
    except QhullError:
        return None
    if len(tri.coplanar):
        return None
    edges = set()
    for simplex in tri.simplices:
        for a, b in combinations(sorted(int(v) for v in simplex), 2):
            edges.add((a, b))
    return edges


def required_missing_edges(points, graph_edges, tol_rel=1e-9) -> list:
    """Delaunay edges with strictly positive margin absent from graph_edges.

    graph_edges is any iterable of index pairs. Edges whose best witness is
    degenerate are optional for a supergraph and never reported. Returns
    [(i, j, slack)] sorted by index pair.
    """
    pts = _as_points(points)
    tol = tol_rel * max(1.0, _diameter(pts))
    have = {(min(a, b), max(a, b)) for a, b in graph_edges}
    candidates = _edges_of_some_triangulation(pts)
    if candidates is None:
        candidates = exact_delaunay_edges(pts, tol_rel)
    out = []
    for i, j in sorted(candidates - have):
        slack = delaunay_witness_slack(pts, i, j)
        if slack > tol:
            out.append((i, j, slack))
    return out


# -- polytope vertex enumeration ------------------------------------------------


def _normalized(hs: HalfspaceSet):
    norms = np.linalg.norm(hs.normals, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero normal in halfspace set")
    return hs.normals / norms[:, None], hs.offsets / norms


def _subset_solutions(a: np.ndarray, b: np.ndarray, d: int, max_subsets: int):
    """Solutions of all d-subsets of rows of (a, b), batched; singular skipped."""
    k = a.shape[0]
    if k < d:
        return np.empty((0, d))
    combs = np.fromiter(
        (t for c in combinations(range(k), d) for t in c), dtype=np.intp
    ).reshape(-1, d)
    if combs.shape[0] > max_subsets:
        raise ValueError(
            f"{combs.shape[0]} subsets exceeds the enumeration cap {max_subsets}"
        )
    sols = []
    for lo in range(0, combs.shape[0], 65536):
        idx = combs[lo : lo + 65536]
        mats = a[idx]
        rhs = b[idx]
        dets = np.abs(np.linalg.det(mats))
        ok = dets > 1e-12
        if not ok.any():
            continue
        sols.append(np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0])
    if not sols:
        return np.empty((0, d))
    return np.vstack(sols)


def _dedupe_sorted(verts: np.ndarray, tol: float) -> np.ndarray:
    if verts.shape[0] == 0:
        return verts
    order = np.lexsort(verts.T[::-1])
    verts = verts[order]
    kept = [verts[0]]
    for v in verts[1:]:
        if np.linalg.norm(v - kept[-1]) > tol and not any(
            np.linalg.norm(v - w) <= tol for w in kept
        ):
            kept.append(v)
    return np.array(kept)


def polytope_vertices(halfspaces: HalfspaceSet, tol_rel=1e-9, max_subsets=2_000_000):
    """Vertices of the polytope {x : normals . x <= offsets}.

    Enumerates all d-subsets of the boundary planes, solves each d x d
    system, and keeps solutions satisfying every constraint within
    tolerance. Duplicates within tolerance collapse; rows come back sorted
    lexicographically. Exponential in d; intended for small systems.
    """
    a, b = _normalized(halfspaces)
    d = a.shape[1]
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    tol = tol_rel * scale
    sols = _subset_solutions(a, b, d, max_subsets)
    if sols.shape[0] == 0:
        return np.empty((0, d))
    feas = sols[np.all(sols @ a.T <= b[None, :] + tol, axis=1)]
    return _dedupe_sorted(feas, tol)


# -- Voronoi ------------------------------------------------------------------


def _cell_constraints(pts: np.ndarray, i: int, others, clip: HalfspaceSet | None):
    """Unit-normal halfspace rows for cell(i) against ``others`` plus the clip."""
    hs = HalfspaceSet.from_cell(pts[i], pts[others])
    a, b = _normalized(hs)
    if clip is not None:
        ca, cb = _normalized(clip)
        a = np.vstack([a, ca])
        b = np.concatenate([b, cb])
    return a, b


def _enumerate_cell(pts, i, others, clip, tol):
    """Vertices of cell(i) cut by the bisectors to ``others`` and the clip.

    Feasibility is checked against *all* sites, so a vertex of a
    pruned-candidate cell that a non-candidate site would cut is rejected
    here; pruning only has to guarantee no vertex is missed.
    """
    a, b = _cell_constraints(pts, i, others, clip)
    d = pts.shape[1]
    sols = _subset_solutions(a, b, d, max_subsets=4_000_000)
    if sols.shape[0] == 0:
        return np.empty((0, d))
    keep = np.ones(sols.shape[0], dtype=bool)
    di = np.linalg.norm(sols - pts[i], axis=1)
    for lo in range(0, sols.shape[0], 20000):
        hi = min(lo + 20000, sols.shape[0])
        dall = np.linalg.norm(sols[lo:hi, None, :] - pts[None, :, :], axis=2)
        keep[lo:hi] &= di[lo:hi] <= dall.min(axis=1) + tol
    if clip is not None:
        ca, cb = _normalized(clip)
        keep &= np.all(sols @ ca.T <= cb[None, :] + tol, axis=1)
    return _dedupe_sorted(sols[keep], tol)


def _cell_is_unbounded(pts: np.ndarray, i: int) -> bool:
    """True when row i's unclipped Voronoi cell is unbounded (LP per direction)."""
    n, d = pts.shape
    rows = []
    rhs = []
    p = pts[i]
    for k in range(n):
        if k == i:
            continue
        u = pts[k] - p
        rows.append(u)
        rhs.append((pts[k] @ pts[k] - p @ p) / 2.0)
    a_ub = np.array(rows)
    b_ub = np.array(rhs)
    for axis in range(d):
        for sign in (1.0, -1.0):
            c = np.zeros(d)
            c[axis] = sign  # linprog minimizes, so this probes direction -sign*e_axis
            res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * d, method="highs")
            if res.status == 3:
                return True
    return False


def voronoi_cell_vertices(p, S, clip: HalfspaceSet | None = None, tol_rel=1e-9):
    """Vertices of row p's Voronoi cell, optionally cut by clip halfspaces.

    Enumerates d-subsets of the bisector-plus-clip boundaries and keeps
    solutions no other site beats within tolerance. For larger S the
    bisectors considered are pruned to nearby sites, then the result is
    certified: with R the farthest kept vertex, any site beyond 2R has its
    bisector strictly outside the cell, so leaving it out loses nothing.
    Rows come back sorted lexicographically.

    With a clip the cell is bounded by assumption and an empty result is an
    internal error; without one an empty result just means no bisector
    d-subset closes a corner (the cell may be unbounded).
    """
    pts = _as_points(S)
    n, d = pts.shape
    i = int(p)
    if not 0 <= i < n:
        raise ValueError(f"row index {i} out of range for {n} points")
    tol = tol_rel * max(1.0, _diameter(pts))
    dist = np.linalg.norm(pts - pts[i], axis=1)
    others = np.array([k for k in range(n) if k != i], dtype=np.intp)
    by_dist = others[np.argsort(dist[others], kind="stable")]

    exhaustive = n - 1 <= max(24, 4 * d + 8)
    cand_count = len(by_dist) if exhaustive else min(len(by_dist), 4 * d + 8)
    while True:
        cand = by_dist[:cand_count]
        verts = _enumerate_cell(pts, i, cand, clip, tol)
        if cand_count == len(by_dist):
            break
        if verts.shape[0] == 0:
            cand_count = min(2 * cand_count, len(by_dist))
            continue
        radius = float(np.linalg.norm(verts - pts[i], axis=1).max())
        needed = by_dist[dist[by_dist] <= 2.0 * radius + tol]
        if len(needed) <= cand_count:
            # Certificate needs the candidate cell bounded, else it has rays
            # the vertex list cannot describe.
            if clip is not None or not _cell_is_unbounded(pts[np.append(cand, i)], len(cand)):
                break
        cand_count = min(max(2 * cand_count, len(needed)), len(by_dist))

    if verts.shape[0] == 0 and clip is not None:
        raise InternalInvariantError(
            f"no vertices found for the clipped (hence bounded) cell of row {i}"
        )
    return verts


def exact_aspect(p, S, clip: HalfspaceSet | None = None, tol_rel=1e-9) -> float:
    """Voronoi aspect R/r of row p's cell, optionally cut by clip halfspaces.

    r is half the distance to the nearest other site; R is the distance to
    the farthest cell vertex. An unbounded cell (no clip to cut it) is an
    error: the caller decides whether to skip it or to clip.
    """
    pts = _as_points(S)
    n, d = pts.shape
    if n < 2:
        raise ValueError("aspect needs at least two points")
    i = int(p)
    dist = np.linalg.norm(pts - pts[i], axis=1)
    dist[i] = np.inf
    r = float(dist.min()) / 2.0
    if r == 0.0:
        raise ValueError(f"row {i} coincides with another row")
    if clip is None:
        if d == 1:
            x = pts[:, 0]
            if x[i] <= x.min() or x[i] >= x.max():
                raise ValueError(f"cell of row {i} is unbounded")
            left = (x[i] + x[x < x[i]].max()) / 2.0
            right = (x[i] + x[x > x[i]].min()) / 2.0
            return max(x[i] - left, right - x[i]) / r
        if _cell_is_unbounded(pts, i):
            raise ValueError(f"cell of row {i} is unbounded; pass a clip")
    verts = voronoi_cell_vertices(i, pts, clip, tol_rel)
    if verts.shape[0] == 0:
        raise InternalInvariantError(
            f"bounded cell of row {i} produced no vertices"
        )
    rr = float(np.linalg.norm(verts - pts[i], axis=1).max())
    return rr / r


# -- adapters over a MeshStore --------------------------------------------------


def layer_sites(store, lid):
    """Sorted alive vertex ids of one layer with their coordinate matrix."""
    lay = store.hierarchy.layers[lid]
    ids = sorted(v for v in lay.vertex_ids if store.vertices[v].alive)
    pts = np.array([store.vertices[v].point for v in ids])
    return ids, pts


def layer_graph_edges(store, lid, ids=None) -> set:
    """The layer's graph edges translated to row indices of layer_sites."""
    if ids is None:
        ids, _ = layer_sites(store, lid)
    pos = {vid: t for t, vid in enumerate(ids)}
    edges = set()
    for vid in ids:
        for q in store.vertices[vid].neighbors:
            if q in pos and vid < q:
                edges.add((pos[vid], pos[q]))
    return edges


def check_layer_containment(store, lid, tol_rel=1e-9) -> list:
    """Required Delaunay edges of the layer missing from its graph.

    Returns [(vid_a, vid_b, slack)]; empty means the graph is a supergraph of
    every non-degenerate Delaunay edge.
    """
    ids, pts = layer_sites(store, lid)
    missing = required_missing_edges(pts, layer_graph_edges(store, lid, ids), tol_rel)
    return [(ids[i], ids[j], slack) for i, j, slack in missing]


def check_layer_quality(store, lid, bound) -> list:
    """Bounded non-cage cells of the layer whose exact aspect exceeds the bound.

    Cells that are unbounded (which happens for cells touching the cage
    sphere) are skipped: the guarantee under test is about bounded cells.
    Returns [(vid, aspect)].
    """
    ids, pts = layer_sites(store, lid)
    out = []
    for row, vid in enumerate(ids):
        if store.vertices[vid].kind == KIND_CAGE:
            continue
        try:
            aspect = exact_aspect(row, pts)
        except ValueError:
            continue
        if aspect > bound:
            out.append((vid, aspect))
    return out


def feature_size_violations(store, ratio, slack=1.05) -> list:
    """Alive vertices whose input-set feature size beats ratio times the mesh's.

    Per layer, with P the alive input copies and M every alive vertex of the
    layer, each alive v must satisfy f_P(v) <= ratio * f_M(v) * slack: the
    mesh never gets locally finer than the inputs warrant. Returns
    [(vid, f_P, f_M)].
    """
    out = []
    for lid in sorted(store.hierarchy.layers):
        ids, pts = layer_sites(store, lid)
        rows_p = [t for t, vid in enumerate(ids) if store.vertices[vid].kind == KIND_INPUT]
        if len(rows_p) < 2:
            raise InternalInvariantError(
                f"layer {lid} has {len(rows_p)} input copies; every layer keeps 2+"
            )
        P = pts[rows_p]
        for row, vid in enumerate(ids):
            f_p = feature_size(pts[row], P)
            f_m = feature_size(pts[row], pts)
            if f_p > ratio * f_m * slack:
                out.append((vid, f_p, f_m))
    return out


def check_store(store, quality_bound, fsi_ratio=None, tol_rel=1e-9) -> dict:
    """Run containment, quality, and optional feature-size checks per layer.

    Returns {"containment": [...], "quality": [...], "feature_size": [...]};
    all empty on success. The feature-size list stays empty when fsi_ratio
    is None.
    """
    containment = []
    quality = []
    for lid in sorted(store.hierarchy.layers):
        containment.extend(check_layer_containment(store, lid, tol_rel))
        quality.extend(check_layer_quality(store, lid, quality_bound))
    feature = feature_size_violations(store, fsi_ratio) if fsi_ratio is not None else []
    return {"containment": containment, "quality": quality, "feature_size": feature}
