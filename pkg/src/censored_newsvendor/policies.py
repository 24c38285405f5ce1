"""Ordering policies that learn from censored sales.

A dataset is a list of groups; each group was stocked at a fixed order
quantity, and its sales are demands clipped at that quantity.  A sale equal
to its order quantity is treated as censored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .distributions import PROB_TOL
from .newsvendor import CostParameters

LIKELY_IDENTIFIABLE = "likely-identifiable"
LIKELY_UNIDENTIFIABLE = "likely-unidentifiable"
KNIFE_EDGE = "knife-edge"

DEFAULT_DELTA = 0.3

# guards ceil(rho * n) against products like 0.7 * 10 = 7.000000000000001
_RANK_TOL = 1e-9


@dataclass(frozen=True)
class Group:
    order_quantity: float
    sales: np.ndarray


class CensoredDataset:
    """Groups of censored sales, each tagged with its order quantity."""

    def __init__(self, groups: Iterable[tuple[float, Sequence[float]]]):
        built = []
        for q, sales in groups:
            q = float(q)
            sales = np.asarray(sales, dtype=float)
            if not (math.isfinite(q) and q >= 0):
                raise ValueError(f"order quantity must be finite and nonnegative, got {q}")
            if sales.ndim != 1 or sales.size == 0:
                raise ValueError(f"group at order quantity {q} has no sales")
            if np.any(~np.isfinite(sales)) or np.any(sales < 0) or np.any(sales > q):
                raise ValueError(f"sales of the group at {q} must lie in [0, {q}]")
            sales.setflags(write=False)
            built.append(Group(q, sales))
        if not built:
            raise ValueError("dataset needs at least one group")
        self.groups: tuple[Group, ...] = tuple(built)

    def __len__(self):
        return len(self.groups)

    def __repr__(self):
        sizes = [g.sales.size for g in self.groups]
        return f"CensoredDataset(order_quantities={self.order_quantities}, sizes={sizes})"

    @property
    def order_quantities(self) -> list[float]:
        return [g.order_quantity for g in self.groups]

    @property
    def boundary(self) -> float:
        """Largest order quantity seen in the data."""
        return max(self.order_quantities)

    @property
    def min_group_size(self) -> int:
        return min(g.sales.size for g in self.groups)

    def pooled(self, at: float) -> np.ndarray:
        """All sales from groups stocked at exactly ``at``."""
        parts = [g.sales for g in self.groups if g.order_quantity == at]
        if not parts:
            raise ValueError(f"no group has order quantity {at}")
        return np.concatenate(parts)

    def distinct_quantities(self) -> list[float]:
        return sorted(set(self.order_quantities), reverse=True)

    def all_sales(self) -> np.ndarray:
        return np.concatenate([g.sales for g in self.groups])


@dataclass
class PolicyDecision:
    policy: str
    q: float
    branch: str = ""
    diagnostics: dict = field(default_factory=dict)


def sample_quantile(values, rho: float) -> float:
    """``inf{x : fraction of values <= x >= rho}``, the ceil(rho n)-th order statistic."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("quantile of an empty sample")
    if not 0 < rho <= 1:
        raise ValueError("quantile level must lie in (0, 1]")
    k = max(math.ceil(rho * v.size - _RANK_TOL), 1)
    return float(v[k - 1])


def g_minus_hat(ds: CensoredDataset, at: float) -> float:
    """Fraction of sales strictly below ``at`` among groups stocked at ``at``."""
    s = ds.pooled(at)
    return float(np.count_nonzero(s < at)) / s.size


def censored_saa_quantile(ds: CensoredDataset, rho: float, over: Iterable[float] | None = None) -> float:
    """Sample quantile of sales pooled over the groups with the given order quantities.

    ``over=None`` selects the boundary group.
    """
    qs = [ds.boundary] if over is None else list(over)
    if not qs:
        raise ValueError("no groups selected")
    return sample_quantile(np.concatenate([ds.pooled(q) for q in qs]), rho)


def q_dagger_hat(ghat: float, cp: CostParameters, lam: float, cap: float) -> float:
    """Plug-in hedge between ``lam`` and ``cap`` for an estimated ``G^-``."""
    if ghat >= 1:
        raise ValueError("estimated G^- must be below 1")
    b, h = cp.b, cp.h
    return (b * cap + h * lam - (b + h) * ghat * cap) / ((b + h) * (1.0 - ghat))


def _check_delta(delta: float):
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")


def _unidentifiable_or_edge(name, ghat, zeta, cp, lam, cap, diag) -> PolicyDecision:
    if ghat < cp.rho - zeta:
        return PolicyDecision(name, q_dagger_hat(ghat, cp, lam, cap), LIKELY_UNIDENTIFIABLE, diag)
    return PolicyDecision(name, lam, KNIFE_EDGE, diag)


def rcn(ds: CensoredDataset, cp: CostParameters, cap: float, delta: float = DEFAULT_DELTA) -> PolicyDecision:
    """Test identifiability on the boundary group, then order accordingly."""
    _check_delta(delta)
    lam = ds.boundary
    n = ds.pooled(lam).size
    zeta = math.sqrt(math.log(2 / delta) / (2 * n))
    ghat = g_minus_hat(ds, lam)
    diag = {"ghat": ghat, "zeta": zeta}
    if ghat >= cp.rho + zeta:
        return PolicyDecision("rcn", censored_saa_quantile(ds, cp.rho), LIKELY_IDENTIFIABLE, diag)
    return _unidentifiable_or_edge("rcn", ghat, zeta, cp, lam, cap, diag)


def rcn_plus(ds: CensoredDataset, cp: CostParameters, cap: float, delta: float = DEFAULT_DELTA) -> PolicyDecision:
    """Like :func:`rcn` but pools every group that passes its own identifiability test.

    Groups sharing an order quantity are merged, so ``K`` counts distinct
    order quantities.
    """
    _check_delta(delta)
    qs = ds.distinct_quantities()
    K = len(qs)
    passing, stats = [], {}
    for q in qs:
        n = ds.pooled(q).size
        zeta = math.sqrt(math.log(2 * K / delta) / (2 * n))
        ghat = g_minus_hat(ds, q)
        stats[q] = (ghat, zeta)
        if ghat >= cp.rho + zeta:
            passing.append(q)
    lam = ds.boundary
    ghat, zeta = stats[lam]
    diag = {"ghat": ghat, "zeta": zeta, "passing": passing}
    if passing:
        q = censored_saa_quantile(ds, cp.rho, over=passing)
        return PolicyDecision("rcn-plus", q, LIKELY_IDENTIFIABLE, diag)
    return _unidentifiable_or_edge("rcn-plus", ghat, zeta, cp, lam, cap, diag)


def naive_saa(ds: CensoredDataset, rho: float) -> float:
    """Sample quantile of every sale, censored or not."""
    return sample_quantile(ds.all_sales(), rho)


def _uncensored(ds: CensoredDataset) -> np.ndarray:
    return np.concatenate([g.sales[g.sales < g.order_quantity] for g in ds.groups])


def subsample_saa(ds: CensoredDataset, rho: float) -> float:
    """Sample quantile of the uncensored sales only; the boundary if there are none."""
    kept = _uncensored(ds)
    if kept.size == 0:
        return ds.boundary
    return sample_quantile(kept, rho)


def kaplan_meier(ds: CensoredDataset, rho: float) -> float:
    """Quantile of the product-limit CDF estimate; the boundary if it never reaches ``rho``."""
    times = ds.all_sales()
    events = np.concatenate([g.sales < g.order_quantity for g in ds.groups])
    event_times = np.unique(times[events])
    order = np.sort(times)
    surv = 1.0
    for t in event_times:
        # censored observations tied with t are still at risk at t
        at_risk = order.size - np.searchsorted(order, t, side="left")
        died = np.count_nonzero(events & (times == t))
        surv *= 1.0 - died / at_risk
        if 1.0 - surv >= rho - PROB_TOL:
            return float(t)
    return ds.boundary


def true_saa(uncensored: Sequence[Sequence[float]] | None, rho: float) -> float:
    """Sample quantile of the true demands; available only in simulation."""
    if uncensored is None or len(uncensored) == 0:
        raise ValueError("true SAA needs the uncensored demands")
    return sample_quantile(np.concatenate([np.asarray(u, dtype=float) for u in uncensored]), rho)


# ------------------------------------------------------------------ registry

PolicyFn = Callable[..., PolicyDecision]


def _wrap(name: str, fn) -> PolicyFn:
    def run(ds, cp, cap, delta=DEFAULT_DELTA, uncensored=None):
        return PolicyDecision(name, float(fn(ds, cp.rho)))

    return run


def _true(ds, cp, cap, delta=DEFAULT_DELTA, uncensored=None):
    return PolicyDecision("true-saa", true_saa(uncensored, cp.rho))


def _reserved(ds, cp, cap, delta=DEFAULT_DELTA, uncensored=None):
    raise ValueError("censored-saa-fan is a reserved slot with no implementation")


POLICIES: dict[str, PolicyFn] = {
    "rcn": lambda ds, cp, cap, delta=DEFAULT_DELTA, uncensored=None: rcn(ds, cp, cap, delta),
    "rcn-plus": lambda ds, cp, cap, delta=DEFAULT_DELTA, uncensored=None: rcn_plus(ds, cp, cap, delta),
    "naive-saa": _wrap("naive-saa", naive_saa),
    "subsample-saa": _wrap("subsample-saa", subsample_saa),
    "kaplan-meier": _wrap("kaplan-meier", kaplan_meier),
    "true-saa": _true,
}
RESERVED_POLICIES = {"censored-saa-fan": _reserved}


def get_policy(name: str) -> PolicyFn:
    if name in POLICIES:
        return POLICIES[name]
    if name in RESERVED_POLICIES:
        raise ValueError(f"policy {name!r} is reserved and not implemented")
    raise ValueError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}")


def decide(name: str, ds: CensoredDataset, cp: CostParameters, cap: float,
           delta: float = DEFAULT_DELTA, uncensored=None) -> PolicyDecision:
    """Run the named policy."""
    return get_policy(name)(ds, cp, cap, delta, uncensored)
