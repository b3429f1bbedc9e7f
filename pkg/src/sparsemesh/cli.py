"""Command line front end.

Reads a point set from CSV or JSON, refines it, and writes the graph dump.
Exit codes: 0 success, 2 bad input data, 3 bad configuration, 4 resource
limit hit, 5 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import __version__
from .adg import KIND_CAGE
from .config import Config
from .errors import ConfigurationError, IngestionError, ResourceLimitError
from .geometry import diameter_estimate
from .refine import well_spaced_points

NEAR_DUPLICATE_REL = 1e-12
VERIFY_MAX_POINTS = 60
VERIFY_MAX_DIM = 3


def _parse_rows(rows, source: str) -> np.ndarray:
    pts = []
    width = None
    for lineno, row in rows:
        try:
            vals = [float(tok) for tok in row]
        except (TypeError, ValueError):
            raise IngestionError(f"{source}: not a numeric point", row=lineno)
        if width is None:
            if not vals:
                raise IngestionError(f"{source}: empty point", row=lineno)
            width = len(vals)
        elif len(vals) != width:
            raise IngestionError(
                f"{source}: expected {width} coordinates, got {len(vals)}", row=lineno
            )
        if not all(np.isfinite(v) for v in vals):
            raise IngestionError(f"{source}: non-finite coordinate", row=lineno)
        pts.append(vals)
    if len(pts) < 2:
        raise IngestionError(f"{source}: need at least two points, got {len(pts)}")
    return np.array(pts, dtype=np.float64)


def _reject_duplicates(pts: np.ndarray):
    seen: dict[bytes, int] = {}
    for idx in range(pts.shape[0]):
        key = pts[idx].tobytes()
        if key in seen:
            raise IngestionError(
                f"duplicate point, same as row {seen[key] + 1}", row=idx + 1
            )
        seen[key] = idx
    thresh = NEAR_DUPLICATE_REL * diameter_estimate(pts)
    if thresh <= 0.0:
        return
    pairs = cKDTree(pts).query_pairs(r=thresh, output_type="ndarray")
    for a, b in pairs:
        if np.linalg.norm(pts[a] - pts[b]) < thresh:
            a, b = sorted((int(a), int(b)))
            raise IngestionError(
                f"points in rows {a + 1} and {b + 1} are closer than "
                f"{NEAR_DUPLICATE_REL:g} of the diameter"
            )


def ingest(path: str, max_points: int | None = None) -> np.ndarray:
    """Load points from a .csv or .json file, validating as we go."""
    p = Path(path)
    if not p.exists():
        raise IngestionError(f"no such file: {path}")
    text = p.read_text()
    if p.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise IngestionError(f"{path}: invalid JSON ({e})") from e
        if isinstance(data, dict):
            data = data.get("points")
        if not isinstance(data, list):
            raise IngestionError(f"{path}: expected a list of points or {{'points': [...]}}")
        rows = [(i + 1, row if isinstance(row, list) else [row]) for i, row in enumerate(data)]
        pts = _parse_rows(rows, path)
    else:
        rows = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            rows.append((lineno, [tok.strip() for tok in line.split(",")]))
        pts = _parse_rows(rows, path)
    if max_points is not None and pts.shape[0] > max_points:
        raise IngestionError(
            f"{path}: {pts.shape[0]} points exceeds --max-points {max_points}"
        )
    _reject_duplicates(pts)
    return pts


def _aspect_histogram(store) -> dict:
    edges = list(range(11))
    counts = [0] * 11
    for rec in store.vertices:
        if not rec.alive or rec.kind == KIND_CAGE:
            continue
        a = rec.aspect
        counts[10 if a >= 10.0 else int(a)] += 1
    return {"bin_edges": edges + ["inf"], "counts": counts}


def _verify(result, cfg: Config) -> list[str]:
    problems = []
    thr = cfg.tau_threshold
    store = result.store
    for rec in store.vertices:
        if rec.alive and rec.kind != KIND_CAGE and rec.aspect > thr:
            problems.append(
                f"vertex {rec.vid}: measured aspect {rec.aspect:.6g} above {thr:.6g}"
            )
    n, d = result.stats["n_input"], store.dim
    if n <= VERIFY_MAX_POINTS and d <= VERIFY_MAX_DIM:
        from . import oracle

        bound = cfg.tau / cfg.corner_discount
        t_eff = cfg.tau_threshold
        fsi = 4.0 * t_eff / (t_eff - 4.0) if t_eff > 4.0 else None
        report = oracle.check_store(store, bound, fsi_ratio=fsi)
        for a, b, slack in report["containment"]:
            problems.append(
                f"layer edge ({a}, {b}) missing from graph (witness margin {slack:.3g})"
            )
        for vid, aspect in report["quality"]:
            problems.append(f"vertex {vid}: exact aspect {aspect:.6g} above {bound:.6g}")
        for vid, f_p, f_m in report["feature_size"]:
            problems.append(
                f"vertex {vid}: input feature size {f_p:.6g} over "
                f"{fsi:.4g} x mesh feature size {f_m:.6g}"
            )
    else:
        print(
            f"verify: skipping exact oracle checks (n={n}, d={d} beyond "
            f"n<={VERIFY_MAX_POINTS}, d<={VERIFY_MAX_DIM})",
            file=sys.stderr,
        )
    return problems


def _flat_path(output: str) -> Path:
    p = Path(output)
    return p.with_name(p.stem + ".flat.json")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sparsemesh",
        description="Refine a point set into a hierarchically well-spaced superset "
        "with its approximate Delaunay graph.",
    )
    ap.add_argument("--input", required=True, help="points file (.csv or .json)")
    ap.add_argument("--output", help="write the graph dump (JSON) here")
    ap.add_argument("--tau", type=float, default=8.0, help="aspect bound per cell (> 4)")
    ap.add_argument("--epsilon", type=float, default=0.1, help="corner query slack in (0, 1)")
    ap.add_argument("--eta", type=float, default=0.5, help="cage direction density in (0, 1]")
    ap.add_argument("--tau-prune", type=float, default=64.0, help="edge retention ratio (>= tau)")
    ap.add_argument(
        "--root-cage-scale", type=float, default=3.0, help="root cage radius multiplier (>= 2)"
    )
    ap.add_argument("--seed", type=int, default=0, help="seed for cage construction")
    ap.add_argument("--max-points", type=int, default=None, help="refuse larger inputs")
    ap.add_argument(
        "--flatten",
        action="store_true",
        help="also contract the layer tree and write <output stem>.flat.json",
    )
    ap.add_argument("--stats", action="store_true", help="print run statistics as JSON")
    ap.add_argument(
        "--dump-order", metavar="PATH", help="write the insertion order (JSON) here"
    )
    ap.add_argument(
        "--verify",
        action="store_true",
        help="check the result against exact oracles (small inputs only)",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.flatten and not args.output:
        ap.error("--flatten requires --output")

    try:
        pts = ingest(args.input, max_points=args.max_points)
    except IngestionError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    try:
        cfg = Config(
            tau=args.tau,
            epsilon=args.epsilon,
            eta=args.eta,
            tau_prune=args.tau_prune,
            root_cage_scale=args.root_cage_scale,
            seed=args.seed,
        )
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3

    try:
        result = well_spaced_points(pts, cfg, flatten_output=args.flatten)
    except ResourceLimitError as e:
        print(f"error: {e}", file=sys.stderr)
        if getattr(e, "stats", None):
            print(json.dumps(e.stats, sort_keys=True), file=sys.stderr)
        return 4

    if args.output:
        dump = result.store.graph_dump()
        Path(args.output).write_text(json.dumps(dump, sort_keys=True) + "\n")
    if args.flatten:
        _flat_path(args.output).write_text(
            json.dumps(result.flattened_graph, sort_keys=True) + "\n"
        )
    if args.dump_order:
        Path(args.dump_order).write_text(result.order.to_json() + "\n")

    if args.stats:
        stats = dict(result.stats)
        stats["aspect_histogram"] = _aspect_histogram(result.store)
        print(json.dumps(stats, sort_keys=True))
    else:
        s = result.stats
        print(
            f"refined {s['n_input']} points into {s['m_output']} vertices "
            f"({s['steiner_count']} steiner, {s['layer_count']} layers) "
            f"in {s['wall_time']:.2f}s"
        )

    if args.verify:
        problems = _verify(result, cfg)
        if problems:
            for line in problems:
                print(f"verify: {line}", file=sys.stderr)
            return 5
        print("verify: ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
