"""Single-period newsvendor cost and its optimal order."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .distributions import DemandDistribution


@dataclass(frozen=True)
class CostParameters:
    """Per-unit underage cost ``b`` and overage cost ``h``."""

    b: float
    h: float
    rho: float = field(init=False)

    def __post_init__(self):
        for name in ("b", "h"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"cost parameter {name} must be positive and finite, got {v!r}")
        object.__setattr__(self, "rho", self.b / (self.b + self.h))


def cost(d: DemandDistribution, cp: CostParameters, q):
    """Expected cost ``E[b (D - q)^+ + h (q - D)^+]``.

    Evaluated as ``b (E[D] - q) + (b + h) E[(q - D) 1{D <= q}]``.
    """
    return cp.b * (d.mean() - q) + (cp.b + cp.h) * d.partial_expectation(q)


def optimal_quantity(d: DemandDistribution, cp: CostParameters) -> float:
    return float(d.quantile(cp.rho))


def cost_difference(d: DemandDistribution, cp: CostParameters, q1, q2):
    """``cost(q1) - cost(q2)`` without forming either cost."""
    return cp.b * (q2 - q1) + (cp.b + cp.h) * (
        d.partial_expectation(q1) - d.partial_expectation(q2)
    )


def vanilla_regret(d: DemandDistribution, cp: CostParameters, q):
    return cost_difference(d, cp, q, optimal_quantity(d, cp))
