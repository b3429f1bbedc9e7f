"""Run parameters and the constants derived from them.

The aspect bound ``tau`` drives everything else: the layering threshold uses
K = 4*tau/(tau-4), and the refinement loop compares measured (not exact)
aspect ratios against ``tau_threshold``, which discounts ``tau`` by the two
approximation losses of the farthest-corner search. ``tau_prune`` is the
operational edge-length/search cap; the theoretical cap 32*K*tau_prime^2 is
astronomically loose, so a small constant is used and monitored instead.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import ConfigurationError

__all__ = ["Config"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Config:
    tau: float = 8.0
    epsilon: float = 0.1
    eta: float = 0.5
    tau_prune: float = 64.0
    root_cage_scale: float = 3.0
    seed: int = 0
    max_insertions: int = 10**6
    walk_step_cap: int = 10**5
    cage_size_cap: int = 10**6

    def __post_init__(self):
        if not self.tau > 4.0:
            raise ConfigurationError(f"tau must exceed 4, got {self.tau}")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigurationError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0.0 < self.eta <= 1.0:
            raise ConfigurationError(f"eta must lie in (0, 1], got {self.eta}")
        if not self.tau_prune >= self.tau:
            raise ConfigurationError(
                f"tau_prune must be at least tau ({self.tau}), got {self.tau_prune}"
            )
        if not self.root_cage_scale >= 2.0:
            raise ConfigurationError(
                f"root_cage_scale must be at least 2, got {self.root_cage_scale}"
            )
        if self.seed < 0:
            raise ConfigurationError(f"seed must be non-negative, got {self.seed}")
        for name in ("max_insertions", "walk_step_cap", "cage_size_cap"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.tau_threshold <= 4.0:
            # Refinement compares measured (discounted) ratios, so the
            # discounted threshold is the one that must clear 4 for the
            # spacing argument to hold; below it, refinement can fail to
            # terminate and only the insertion cap stops the run.
            log.warning(
                "effective aspect threshold %.4g is at or below 4; refinement "
                "may not converge (raise tau, or lower epsilon/eta)",
                self.tau_threshold,
            )

    @property
    def K(self) -> float:
        """Layering constant: an input landing within r(q)/K of q opens a new layer."""
        return 4.0 * self.tau / (self.tau - 4.0)

    @property
    def K_S(self) -> float:
        """Steiner-point feature-size constant, (tau+4)/(tau-4)."""
        return (self.tau + 4.0) / (self.tau - 4.0)

    @property
    def K_P(self) -> float:
        """Input-point feature-size constant, (3*tau+4)/(tau-4); equals K-1 and 2*K_S+1."""
        return (3.0 * self.tau + 4.0) / (self.tau - 4.0)

    @property
    def tau_prime(self) -> float:
        """Worst-case transient aspect ratio right after an input insertion, 2*K*tau."""
        return 2.0 * self.K * self.tau

    @property
    def corner_discount(self) -> float:
        """Worst-case underestimation factor of the farthest-corner search.

        The corner query returns a distance at least (1-eps)*(1-eta^2/2)
        times the true outradius. Comparisons of measured R against true
        geometric quantities must absorb this factor on one side or the
        other.
        """
        return (1.0 - self.epsilon) * (1.0 - self.eta * self.eta / 2.0)

    @property
    def tau_threshold(self) -> float:
        """Refinement trigger for measured aspect: tau*(1-eps)*(1-eta^2/2).

        Enforcing the discounted threshold on measured ratios enforces tau
        on true ones.
        """
        return self.tau * self.corner_discount
