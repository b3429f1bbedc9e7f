"""Farthest-corner queries on Voronoi cells via the ellipsoid method.

A vertex's cell is the intersection of bisector halfspaces against its graph
neighbors. The farthest corner in a direction c is found by a binary search
over a distance grid, each probe asking the central-cut ellipsoid method
whether the cell contains a point at least that far along c. Sweeping a
direction cage and keeping the farthest hit approximates the cell's true
out-radius within a (1-eps)(1-eta^2/2) factor.

Feasibility probes obey two hard rules. With s the true maximum of c.(x-p)
over the cell:

* t < s*(1-eps/2) and s >= r/(1-eps): a feasible point is always returned
  (the iteration budget is sized so the truncated-cone volume bound makes
  failure impossible);
* t > s: never returns a point (every returned point is verified feasible).

In between, either outcome is allowed.

The inner loops are compiled with numba; the update arithmetic is mirrored
by `ellipsoid_step` for auditing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import InternalInvariantError

__all__ = [
    "HalfspaceSet",
    "ellipsoid_feasible",
    "extremal_in_direction",
    "approximate_farthest_corner",
    "cone_volume_lower_bound",
    "unit_ball_volume",
    "iteration_budget",
    "ellipsoid_step",
]

# Ellipsoid matrix collapse threshold, relative to the squared start radius.
EIGEN_FLOOR_REL = 1e-24
# Volume-shrink safety factor on top of the 2(d+1)ln(V0/Vlow) iteration count.
BUDGET_SAFETY = 2.0
# Feasibility of returned points is re-verified to this relative tolerance.
VERIFY_RTOL = 1e-9


@dataclass
class HalfspaceSet:
    """Halfspaces a_i . x <= b_i, rows in a fixed (caller-chosen) order."""

    normals: np.ndarray  # (k, d)
    offsets: np.ndarray  # (k,)

    def __post_init__(self):
        self.normals = np.ascontiguousarray(self.normals, dtype=np.float64)
        self.offsets = np.ascontiguousarray(self.offsets, dtype=np.float64)
        if self.normals.ndim != 2 or self.offsets.shape != (self.normals.shape[0],):
            raise ValueError("normals must be (k, d) with matching offsets (k,)")

    @classmethod
    def from_cell(cls, p, neighbor_points) -> "HalfspaceSet":
        """Bisector halfspaces of p against each neighbor q, in the given order.

        Row for q: (q - p) . x <= (q - p) . (q + p) / 2, whose boundary is the
        p/q bisector and whose interior contains p.
        """
        p = np.asarray(p, dtype=np.float64)
        qs = np.asarray(neighbor_points, dtype=np.float64)
        if qs.ndim != 2 or qs.shape[1] != p.shape[0]:
            raise ValueError("neighbor points must be (k, d) matching p")
        normals = qs - p[None, :]
        offsets = np.einsum("kd,kd->k", normals, (qs + p[None, :]) * 0.5)
        return cls(normals, offsets)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    def __len__(self):
        return self.normals.shape[0]

    def shifted(self, p):
        """Constraint data in coordinates centered at p: a_i . y <= b_i - a_i . p."""
        p = np.asarray(p, dtype=np.float64)
        return self.normals, self.offsets - self.normals @ p

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(self.normals @ x <= self.offsets + tol))


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in d dimensions (1.0 for d = 0)."""
    if d < 0:
        raise ValueError("dimension must be non-negative")
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def cone_volume_lower_bound(r: float, s: float, t: float, d: int) -> float:
    """Lower bound on the volume of a truncated cone inside a Voronoi cell.

    The cone joins an apex at height s (along some unit direction, measured
    from the cell's center p) to the inscribed ball of radius r, truncated to
    heights at least t. Its volume is at least

        (1/d) * C_{d-1} * r^(d-1) * (s-t)^d / (s^2 - r^2)^((d-1)/2)

    with C_{d-1} the unit-ball volume one dimension down. This is what makes
    the feasibility rule above a certainty rather than a probability: a cell
    reaching height s must contain at least this much volume above height t.
    """
    if d < 2:
        raise ValueError(f"dimension must be at least 2, got {d}")
    if not (s > r > 0.0):
        raise ValueError(f"need s > r > 0, got r={r}, s={s}")
    if not (r <= t < s):
        raise ValueError(f"need r <= t < s, got t={t}")
    c = unit_ball_volume(d - 1)
    return (
        c * r ** (d - 1) * (s - t) ** d / (s * s - r * r) ** ((d - 1) / 2.0) / d
    )


def iteration_budget(d: int, config) -> int:
    """Central-cut iteration count sufficient for the feasibility guarantee.

    Shrinking from the start ball of radius r*tau_prune down to the truncated
    cone volume (1/d)*C_{d-1}*(eps*r/2)^d needs 2(d+1)*ln(V0/Vlow) cuts; the
    ratio is independent of r. A 2x safety factor absorbs rounding.
    """
    T = config.tau_prune
    eps = config.epsilon
    cd = unit_ball_volume(d)
    cdm1 = unit_ball_volume(d - 1)
    ln_ratio = math.log(d) + math.log(cd / cdm1) + d * math.log(2.0 * T / eps)
    return max(16, int(math.ceil(BUDGET_SAFETY * 2.0 * (d + 1) * ln_ratio)))


def ellipsoid_step(center, matrix, normal):
    """One central cut: halve the ellipsoid (center, matrix) along ``normal``.

    Keeps the halfspace {y : normal . y <= normal . center}. Returns the new
    (center, matrix). The compiled kernels inline exactly this arithmetic,
    including the 1-d interval-halving special case and re-symmetrization.
    """
    center = np.asarray(center, dtype=np.float64)
    matrix = np.asarray(matrix, dtype=np.float64)
    a = np.asarray(normal, dtype=np.float64)
    d = center.shape[0]
    Ea = matrix @ a
    aEa = float(a @ Ea)
    if aEa <= 0.0:
        raise InternalInvariantError("ellipsoid collapsed along the cut direction")
    g = Ea / math.sqrt(aEa)
    if d == 1:
        return center - g / 2.0, matrix / 4.0
    dd = float(d)
    new_center = center - g / (dd + 1.0)
    new_matrix = (dd * dd / (dd * dd - 1.0)) * (
        matrix - (2.0 / (dd + 1.0)) * np.outer(g, g)
    )
    return new_center, (new_matrix + new_matrix.T) / 2.0


# ---------------------------------------------------------------------------
# Compiled kernels. All work in coordinates centered at the cell's vertex p:
# cell rows a_i . y <= b_i, threshold constraint c . y >= t, start ellipsoid
# the ball of radius B = r * tau_prune.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _center_feasible(A, b, c, t, x):
    s = 0.0
    for i in range(c.shape[0]):
        s += c[i] * x[i]
    if s < t:
        return False
    for row in range(A.shape[0]):
        s = 0.0
        for i in range(c.shape[0]):
            s += A[row, i] * x[i]
        if s > b[row]:
            return False
    return True


@njit(cache=True)
def _feasible_kernel(A, b, c, t, B, budget, floor):
    """Central-cut ellipsoid feasibility probe.

    Returns (1, y) with y feasible, or (0, y) when the budget ran out or the
    ellipsoid collapsed below the eigenvalue floor. The separation oracle
    checks the threshold constraint first, then cell rows in order; the first
    violated constraint cuts.
    """
    d = c.shape[0]
    k = A.shape[0]
    x = np.zeros(d)
    E = np.zeros((d, d))
    for i in range(d):
        E[i, i] = B * B
    a = np.empty(d)
    Ea = np.empty(d)
    dd = float(d)
    for _ in range(budget):
        # Separation oracle: threshold first, then cell rows ascending.
        viol = False
        s = 0.0
        for i in range(d):
            s += c[i] * x[i]
        if s < t:
            for i in range(d):
                a[i] = -c[i]
            viol = True
        else:
            for row in range(k):
                s = 0.0
                for i in range(d):
                    s += A[row, i] * x[i]
                if s > b[row]:
                    for i in range(d):
                        a[i] = A[row, i]
                    viol = True
                    break
        if not viol:
            return 1, x
        aEa = 0.0
        an = 0.0
        for i in range(d):
            s = 0.0
            for j in range(d):
                s += E[i, j] * a[j]
            Ea[i] = s
            aEa += a[i] * s
            an += a[i] * a[i]
        # Collapse or non-finite: give up gracefully instead of dividing by ~0.
        if not (aEa > floor * an):
            return 0, x
        inv = 1.0 / np.sqrt(aEa)
        if d == 1:
            x[0] -= Ea[0] * inv / 2.0
            E[0, 0] /= 4.0
        else:
            sc = dd * dd / (dd * dd - 1.0)
            cf = 2.0 / (dd + 1.0)
            for i in range(d):
                x[i] -= Ea[i] * inv / (dd + 1.0)
            for i in range(d):
                gi = Ea[i] * inv
                for j in range(d):
                    E[i, j] = sc * (E[i, j] - cf * gi * (Ea[j] * inv))
            for i in range(d):
                for j in range(i + 1, d):
                    m = 0.5 * (E[i, j] + E[j, i])
                    E[i, j] = m
                    E[j, i] = m
    if _center_feasible(A, b, c, t, x):
        return 1, x
    return 0, x


@njit(cache=True)
def _direction_upper_bound(A, b, c, B):
    """Cheap certified upper bound on max c . y over the cell within ball(0, B).

    Intersecting the ball with one halfspace at a time gives a spherical-cap
    maximum per constraint; the minimum over constraints bounds the cell's
    true maximum, so any threshold above it is certifiably infeasible.
    """
    d = c.shape[0]
    s_ub = B
    for row in range(A.shape[0]):
        an = 0.0
        ac = 0.0
        for i in range(d):
            an += A[row, i] * A[row, i]
            ac += A[row, i] * c[i]
        if an <= 0.0:
            continue
        norm = np.sqrt(an)
        h = b[row] / norm
        if h < 0.0:
            h = 0.0
        if h >= B:
            continue
        gamma = ac / norm
        if B * gamma <= h:
            continue
        rest = (B * B - h * h) * max(0.0, 1.0 - gamma * gamma)
        cap = h * gamma + np.sqrt(max(0.0, rest))
        if cap < s_ub:
            s_ub = cap
    return s_ub


@njit(cache=True)
def _extremal_kernel(A, b, c, r, B, L, step, budget, floor):
    """Binary search for the farthest feasible grid height along c.

    Grid t_i = r + step*i for i in 0..L. Maintains j (feasible with witness,
    or 0 untested) and k (infeasible by probe or certificate, or L+1). A
    found witness fast-forwards j to the highest grid index its own height
    certifies, capped below k. Falls back to the inscribed-ball point r*c.
    """
    d = c.shape[0]
    w = np.empty(d)
    for i in range(d):
        w[i] = r * c[i]
    # Certificate prunes the top of the grid outright.
    s_ub = _direction_upper_bound(A, b, c, B)
    k = L + 1
    if s_ub < r + step * L:
        k0 = int((s_ub - r) / step) + 1
        if k0 < 1:
            k0 = 1
        if k0 < k:
            k = k0
    j = 0
    while k - j > 1:
        i = (j + k + 1) // 2
        t = r + step * i
        status, y = _feasible_kernel(A, b, c, t, B, budget, floor)
        if status == 1:
            v = 0.0
            for q in range(d):
                v += c[q] * y[q]
            jj = int((v - r) / step)
            if jj < i:
                jj = i
            if jj > k - 1:
                jj = k - 1
            j = jj
            for q in range(d):
                w[q] = y[q]
        else:
            k = i
    return w


@njit(cache=True)
def _afc_kernel(A, b, dirs, r, B, L, step, budget, floor):
    """Sweep every cage direction; keep the point farthest from the center."""
    d = dirs.shape[1]
    z = np.zeros(d)
    best = 0.0
    c = np.empty(d)
    for m in range(dirs.shape[0]):
        for i in range(d):
            c[i] = dirs[m, i]
        w = _extremal_kernel(A, b, c, r, B, L, step, budget, floor)
        dist2 = 0.0
        for i in range(d):
            dist2 += w[i] * w[i]
        if dist2 > best:
            best = dist2
            for i in range(d):
                z[i] = w[i]
    return z


# ---------------------------------------------------------------------------
# Public wrappers.
# ---------------------------------------------------------------------------


def _verify_tol(p, B) -> float:
    return VERIFY_RTOL * max(1.0, B, float(np.max(np.abs(p))))


def _check_direction(c) -> np.ndarray:
    c = np.ascontiguousarray(c, dtype=np.float64)
    n = float(np.linalg.norm(c))
    if not 0.99 <= n <= 1.01:
        raise ValueError(f"direction must be a unit vector, |c| = {n}")
    return c


def _verify_in_cell(cell: HalfspaceSet, p, x, tol: float, what: str):
    if not cell.contains(x, tol=tol):
        worst = float(np.max(cell.normals @ x - cell.offsets))
        raise InternalInvariantError(
            f"{what} returned a point violating its cell by {worst:.3e}"
        )


def ellipsoid_feasible(cell: HalfspaceSet, p, r: float, c, t: float, config):
    """Point of the cell with c . (x - p) >= t, or None.

    Runs the central-cut ellipsoid method from the ball of radius
    r*tau_prune around p for at most `iteration_budget` iterations. Subject
    to the feasibility rules in the module docstring; every returned point is
    re-verified against the cell before returning.
    """
    p = np.ascontiguousarray(p, dtype=np.float64)
    c = _check_direction(c)
    if not r > 0.0:
        raise ValueError(f"inradius must be positive, got {r}")
    B = r * config.tau_prune
    if not r <= t <= B * (1.0 + 1e-12):
        raise ValueError(f"threshold {t} outside [r, r*tau_prune] = [{r}, {B}]")
    A, b = cell.shifted(p)
    budget = iteration_budget(p.shape[0], config)
    floor = EIGEN_FLOOR_REL * B * B
    status, y = _feasible_kernel(A, b, c, t, B, budget, floor)
    if status != 1:
        return None
    x = p + y
    tol = _verify_tol(p, B)
    _verify_in_cell(cell, p, x, tol, "ellipsoid_feasible")
    if float(c @ (x - p)) < t - tol:
        raise InternalInvariantError("ellipsoid_feasible returned a sub-threshold point")
    return x


def _grid(r: float, config):
    T = config.tau_prune
    L = int(math.ceil(2.0 * (T - 1.0) / config.epsilon))
    step = r * (T - 1.0) / L
    return L, step


def extremal_in_direction(
    cell: HalfspaceSet, p, r: float, c, config, max_reach: float | None = None
) -> np.ndarray:
    """Far point of the cell along direction c, within a (1 - eps) factor.

    Binary search over the grid r + i*step, i in 0..L with L = ceil(2*(T-1)/eps),
    T = tau_prune. If the true maximum s of c . (x - p) satisfies
    s >= r/(1-eps), the returned point z satisfies c . (z - p) >= (1-eps)*s;
    the inscribed-ball point p + r*c is the fallback, so the height is never
    below r.

    ``max_reach`` truncates the search ball below r*tau_prune. The truncation
    leaves the (1-eps) guarantee intact for cells that fit inside it; for
    cells reaching past it the answer saturates at the cap, which keeps the
    search (and everything downstream) at the caller's scale.
    """
    p = np.ascontiguousarray(p, dtype=np.float64)
    c = _check_direction(c)
    if not r > 0.0:
        raise ValueError(f"inradius must be positive, got {r}")
    A, b = cell.shifted(p)
    B = _ball_radius(r, config, max_reach)
    L, step = _grid(r, config)
    budget = iteration_budget(p.shape[0], config)
    floor = EIGEN_FLOOR_REL * B * B
    y = _extremal_kernel(A, b, c, r, B, L, step, budget, floor)
    x = p + y
    _verify_in_cell(cell, p, x, _verify_tol(p, B), "extremal_in_direction")
    return x


def _ball_radius(r: float, config, max_reach: float | None) -> float:
    B = r * config.tau_prune
    if max_reach is not None:
        B = min(B, max(max_reach, r))
    return B


def approximate_farthest_corner(
    cell: HalfspaceSet, p, r: float, cage, config, max_reach: float | None = None
) -> np.ndarray:
    """Approximate farthest point of the cell from p.

    Sweeps every cage direction with `extremal_in_direction` and returns the
    farthest hit z: d(p, z) >= (1-eps)(1-eta^2/2) * d(p, true farthest corner)
    whenever the cell's out-radius is at least r/(1-eps) and the cell fits in
    the search ball (see ``max_reach`` above).
    """
    p = np.ascontiguousarray(p, dtype=np.float64)
    dirs = getattr(cage, "directions", cage)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    if dirs.ndim != 2 or dirs.shape[1] != p.shape[0]:
        raise ValueError("cage directions must be (k, d) matching p")
    if not r > 0.0:
        raise ValueError(f"inradius must be positive, got {r}")
    A, b = cell.shifted(p)
    B = _ball_radius(r, config, max_reach)
    L, step = _grid(r, config)
    budget = iteration_budget(p.shape[0], config)
    floor = EIGEN_FLOOR_REL * B * B
    z = p + _afc_kernel(A, b, dirs, r, B, L, step, budget, floor)
    _verify_in_cell(cell, p, z, _verify_tol(p, B), "approximate_farthest_corner")
    return z
