"""Direction cages: finite covers of the unit sphere.

A cage with parameter eta is a set of unit vectors such that every direction
is within (chordal) distance eta of some cage direction. Sweeping the
farthest-corner search over a cage loses at most a (1 - eta^2/2) factor of
the true out-radius. Cage vertices placed on a sphere around a layer's
anchor also serve as the bounding scaffold of that layer.

Construction is a greedy farthest-point net over a dense quasi-random sample
of the sphere, which is deterministic for a fixed (dim, eta, seed) triple.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .errors import InternalInvariantError, ResourceLimitError

__all__ = ["Cage", "build_cage", "get_cage", "place_cage"]

# Stop the greedy net as soon as the sample is covered at radius
# eta * (1 - NET_SLACK); the slack leaves headroom so that fresh directions,
# not just the construction sample, are covered at radius eta.
NET_SLACK = 1e-3

_cache: dict = {}
_cache_lock = threading.Lock()


@dataclass(frozen=True)
class Cage:
    """An eta-cover of the unit sphere in ``dim`` dimensions."""

    dim: int
    eta: float
    directions: np.ndarray  # (k, dim), unit rows

    def __len__(self):
        return self.directions.shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "dim": self.dim,
                "eta": self.eta,
                "directions": self.directions.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Cage":
        obj = json.loads(text)
        dirs = np.asarray(obj["directions"], dtype=np.float64)
        if dirs.ndim != 2 or dirs.shape[1] != obj["dim"]:
            raise ValueError("malformed cage serialization")
        return cls(dim=int(obj["dim"]), eta=float(obj["eta"]), directions=dirs)


def _sphere_sample(dim: int, count: int, seed: int) -> np.ndarray:
    """Quasi-random points on the unit sphere (scrambled Sobol, Gaussian map)."""
    from scipy.stats import norm

    m = max(8, 1 << int(math.ceil(math.log2(count))))
    sob = qmc.Sobol(d=dim, scramble=True, seed=seed)
    u = sob.random(m)
    # Clip away exact 0/1 so the inverse CDF stays finite.
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    g = norm.ppf(u)
    norms = np.linalg.norm(g, axis=1)
    good = norms > 1e-12
    g = g[good] / norms[good, None]
    return g


def build_cage(dim: int, eta: float, seed: int = 0, size_cap: int = 10**6) -> Cage:
    """Build an eta-cover of the unit sphere in ``dim`` dimensions.

    The result has at most ceil((4/eta)^dim) directions, pairwise separated
    by more than eta/2, and every unit vector lies within chordal distance
    eta of some direction (verified on a fresh sample before returning).

    Raises ResourceLimitError when the predicted size exceeds ``size_cap``.
    """
    if dim < 1:
        raise ValueError(f"dimension must be at least 1, got {dim}")
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")

    predicted = int(math.ceil((4.0 / eta) ** dim))
    if predicted > size_cap:
        raise ResourceLimitError(
            f"predicted cage size {predicted} exceeds cap {size_cap} (dim={dim}, eta={eta})"
        )

    if dim == 1:
        dirs = np.array([[1.0], [-1.0]])
        return Cage(dim=1, eta=eta, directions=dirs)

    sample_count = min(max(10_000, 100 * predicted), 200_000)
    sample = _sphere_sample(dim, sample_count, seed)

    stop_radius = eta * (1.0 - NET_SLACK)
    chosen = [0]
    # Squared chordal distance from each sample point to the nearest chosen one.
    mind2 = np.sum((sample - sample[0]) ** 2, axis=1)
    stop2 = stop_radius * stop_radius
    while True:
        far = int(np.argmax(mind2))
        if mind2[far] <= stop2:
            break
        chosen.append(far)
        if len(chosen) > predicted:
            raise InternalInvariantError(
                "greedy net exceeded its packing bound; sphere sample too sparse"
            )
        d2 = np.sum((sample - sample[far]) ** 2, axis=1)
        np.minimum(mind2, d2, out=mind2)

    dirs = sample[chosen]

    # Coverage audit on an independent sample.
    probe = _fresh_unit_sample(dim, 10_000 * dim, seed + 1)
    worst = _coverage_radius(probe, dirs)
    if worst > eta:
        raise InternalInvariantError(
            f"cage coverage audit failed: radius {worst:.6g} > eta {eta}"
        )
    return Cage(dim=dim, eta=eta, directions=dirs)


def _fresh_unit_sample(dim: int, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, dim))
    norms = np.linalg.norm(g, axis=1)
    good = norms > 1e-12
    return g[good] / norms[good, None]


def _coverage_radius(probe: np.ndarray, dirs: np.ndarray) -> float:
    """Max over probe points of the chordal distance to the nearest direction."""
    # |u - v|^2 = 2 - 2 u.v for unit vectors; blockwise to bound memory.
    worst2 = 0.0
    for lo in range(0, probe.shape[0], 4096):
        block = probe[lo : lo + 4096]
        dots = block @ dirs.T
        d2 = 2.0 - 2.0 * np.max(dots, axis=1)
        worst2 = max(worst2, float(np.max(d2)))
    return math.sqrt(max(worst2, 0.0))


def get_cage(dim: int, eta: float, seed: int = 0, size_cap: int = 10**6) -> Cage:
    """Cached ``build_cage``; construction cost is paid once per parameter triple."""
    key = (dim, float(eta), int(seed))
    with _cache_lock:
        hit = _cache.get(key)
    if hit is not None:
        return hit
    cage = build_cage(dim, eta, seed=seed, size_cap=size_cap)
    with _cache_lock:
        _cache.setdefault(key, cage)
    return cage


def place_cage(cage: Cage, center, radius: float) -> np.ndarray:
    """Concrete cage vertices: ``center + radius * c`` for each direction ``c``."""
    center = np.asarray(center, dtype=np.float64)
    if center.shape != (cage.dim,):
        raise ValueError(
            f"center has dimension {center.shape}, cage is {cage.dim}-dimensional"
        )
    if not radius > 0.0:
        raise ValueError(f"radius must be positive, got {radius}")
    return center[None, :] + radius * cage.directions
