"""Worst-case regret over the censoring ambiguity set.

Demand is observed only below the boundary ``lam``; above it any tail is
consistent with the data.  Everything here is closed form except
``worst_case_regret_oracle``, which brute-forces the supremum over a
one-parameter family of extremal tails and serves as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import (
    DemandDistribution,
    DiscreteDistribution,
    Exponential,
    Poisson,
    RngStream,
    TruncatedNormal,
    _out,
    discrete_uniform,
    empirical_from_samples,
)
from .newsvendor import CostParameters, optimal_quantity, vanilla_regret

IDENTIFIABLE = "identifiable"
UNIDENTIFIABLE = "unidentifiable"

# regime labels for the lower-bound constructions
STRICTLY_IDENTIFIABLE = "strictly-identifiable"
KNIFE_EDGE = "knife-edge"
STRICTLY_UNIDENTIFIABLE = "strictly-unidentifiable"
_REGIME_ALIASES = {
    "id": STRICTLY_IDENTIFIABLE,
    "ke": KNIFE_EDGE,
    "ui": STRICTLY_UNIDENTIFIABLE,
    STRICTLY_IDENTIFIABLE: STRICTLY_IDENTIFIABLE,
    KNIFE_EDGE: KNIFE_EDGE,
    STRICTLY_UNIDENTIFIABLE: STRICTLY_UNIDENTIFIABLE,
}

# slack allowed when checking q against the cap
CAP_TOL = 1e-9


@dataclass(frozen=True)
class Instance:
    """True demand, observable boundary ``lam``, cap ``cap`` and costs."""

    demand: DemandDistribution
    lam: float
    cap: float
    cost: CostParameters

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError("boundary lambda must be finite and nonnegative")
        if not math.isfinite(self.cap):
            raise ValueError("cap must be finite")
        q_star = optimal_quantity(self.demand, self.cost)
        if q_star > self.cap + CAP_TOL:
            raise ValueError(f"cap {self.cap} lies below the optimal quantity {q_star:.6g}")
        if self.g_minus < self.cost.rho and not self.lam < self.cap:
            raise ValueError("an unidentifiable instance needs lambda < cap")

    @property
    def g_minus(self) -> float:
        """Probability that demand falls strictly below the boundary."""
        return float(self.demand.cdf_strict(self.lam))

    @property
    def identifiable(self) -> bool:
        return self.g_minus >= self.cost.rho


@dataclass(frozen=True)
class MinimaxSolution:
    regime: str
    q_delta: float
    delta: float


def q_dagger(inst: Instance) -> float:
    """Order quantity that equalizes the two worst cases when unidentifiable."""
    if inst.identifiable:
        raise ValueError("q_dagger is defined only when G^-(lambda) < rho")
    return _q_dagger_formula(inst.g_minus, inst.cost, inst.lam, inst.cap)


def _q_dagger_formula(g, cp: CostParameters, lam: float, cap: float) -> float:
    b, h = cp.b, cp.h
    return (b * cap + h * lam - (b + h) * g * cap) / ((b + h) * (1.0 - g))


def minimax_risk(inst: Instance) -> MinimaxSolution:
    if inst.identifiable:
        return MinimaxSolution(IDENTIFIABLE, optimal_quantity(inst.demand, inst.cost), 0.0)
    b, h = inst.cost.b, inst.cost.h
    g = inst.g_minus
    delta = h * (b - (b + h) * g) * (inst.cap - inst.lam) / ((b + h) * (1.0 - g))
    return MinimaxSolution(UNIDENTIFIABLE, q_dagger(inst), delta)


def worst_case_regret(inst: Instance, q):
    """Supremum of the regret of ordering ``q`` over the ambiguity set."""
    qa = np.asarray(q, dtype=float)
    if np.any(qa < 0) or np.any(qa > inst.cap + CAP_TOL):
        raise ValueError(f"q must lie in [0, {inst.cap}]")
    G, cp, lam, M = inst.demand, inst.cost, inst.lam, inst.cap
    b, h = cp.b, cp.h
    g = inst.g_minus
    below = G.strict_partial_expectation(lam)  # E[(lam - D) 1{D < lam}]
    if inst.identifiable:
        q_star = optimal_quantity(G, cp)
        left = vanilla_regret(G, cp, qa)
        right = b * (q_star - qa) + (b + h) * (
            (qa - lam) + below - G.partial_expectation(q_star)
        )
        return _out(np.where(qa < lam, left, right))
    qd = q_dagger(inst)
    tail = below + (M - lam) * g  # E[(M - D) 1{D < lam}]
    left = b * (M - qa) + (b + h) * (G.partial_expectation(np.minimum(qa, lam)) - tail)
    middle = (b - (b + h) * g) * (M - qa)
    right = h * (qa - lam)
    return _out(np.where(qa < lam, left, np.where(qa <= qd, middle, right)))


class RestrictedFamilyMember(DemandDistribution):
    """Copy of ``G`` below ``lam`` with mass ``p`` at ``lam`` and the rest at ``cap``.

    ``p`` may be a numpy array, in which case the functionals broadcast over it.
    """

    family = "restricted-family"

    def __init__(self, base: DemandDistribution, lam: float, cap: float, p):
        g = float(base.cdf_strict(lam))
        p = np.asarray(p, dtype=float)
        if np.any(p < -1e-15) or np.any(p > 1.0 - g + 1e-12):
            raise ValueError("mass at the boundary must lie in [0, 1 - G^-(lambda)]")
        self.base, self.lam, self.cap, self.p, self.g = base, float(lam), float(cap), p, g
        self.top = np.maximum(1.0 - g - p, 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(
            np.where(x < self.lam, self.base.cdf(np.minimum(x, self.lam)),
                     np.where(x < self.cap, self.g + self.p, 1.0))
        )

    def cdf_strict(self, x):
        x = np.asarray(x, dtype=float)
        return _out(
            np.where(x <= self.lam, self.base.cdf_strict(np.minimum(x, self.lam)),
                     np.where(x <= self.cap, self.g + self.p, 1.0))
        )

    def quantile(self, level):
        level = self._check_p(level)
        inner = self.base.quantile(np.minimum(level, max(self.g, 1e-300)))
        return _out(
            np.where(level <= self.g, inner,
                     np.where(level <= self.g + self.p, self.lam, self.cap))
        )

    def mean(self):
        lam, g = self.lam, self.g
        return _out(lam * g - self.base.strict_partial_expectation(lam) + self.p * lam
                    + self.top * self.cap)

    def partial_expectation(self, x):
        x = np.asarray(x, dtype=float)
        lam = self.lam
        xs = np.maximum(x, lam)
        upper = (
            self.base.strict_partial_expectation(lam)
            + (self.g + self.p) * (xs - lam)
            + np.where(xs >= self.cap, self.top * (xs - self.cap), 0.0)
        )
        return _out(np.where(x < lam, self.base.partial_expectation(np.minimum(x, lam)), upper))


def _restricted_optimum(inst: Instance, p):
    """Optimal order of each restricted-family member."""
    g, rho = inst.g_minus, inst.cost.rho
    if g >= rho:
        return np.full(np.shape(p), optimal_quantity(inst.demand, inst.cost))
    return np.where(g + p >= rho, inst.lam, inst.cap)


def oracle_p_grid(inst: Instance, grid_size: int) -> np.ndarray:
    """Uniform grid on ``[0, 1 - G^-]`` plus both sides of the regime switch."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    g, rho = inst.g_minus, inst.cost.rho
    hi = max(1.0 - g, 0.0)
    grid = [np.linspace(0.0, hi, grid_size)]
    p0 = rho - g
    if 0.0 <= p0 <= hi:
        grid.append(np.array([p0, np.nextafter(p0, -np.inf) if p0 > 0 else 0.0]))
    return np.concatenate(grid)


def worst_case_regret_oracle(inst: Instance, q: float, grid_size: int = 10_000) -> float:
    """Brute-force maximum regret of ``q`` over the restricted family."""
    p = oracle_p_grid(inst, grid_size)
    fam = RestrictedFamilyMember(inst.demand, inst.lam, inst.cap, p)
    q_opt = _restricted_optimum(inst, p)
    cp = inst.cost
    # cost(F_p, q) - cost(F_p, q*_{F_p}); vectorized over p
    reg = cp.b * (q_opt - q) + (cp.b + cp.h) * (
        fam.partial_expectation(q) - fam.partial_expectation(q_opt)
    )
    return float(np.max(reg))


# ---------------------------------------------------------------- lower bounds


def _regime(regime: str) -> str:
    try:
        return _REGIME_ALIASES[regime]
    except KeyError:
        raise ValueError(f"unknown regime {regime!r}; use id, ke or ui") from None


@dataclass(frozen=True)
class HardInstancePair:
    regime: str
    g0: DiscreteDistribution
    g1: DiscreteDistribution
    lower_bound: float
    deltas: dict = field(default_factory=dict)

    @property
    def separation(self) -> float:
        """The gap that drives the regret-separation inequality."""
        key = {
            STRICTLY_UNIDENTIFIABLE: "delta0_ui",
            KNIFE_EDGE: "delta_ke",
            STRICTLY_IDENTIFIABLE: "delta_id",
        }[self.regime]
        return self.deltas[key]


def _bernoulli(p_one: float) -> DiscreteDistribution:
    return DiscreteDistribution([0.0, 1.0], [1.0 - p_one, p_one], family="point-mass-mixture")


def hard_instances(regime: str, cp: CostParameters, lam: float, cap: float, n: int) -> HardInstancePair:
    """Two nearby demand laws that no policy can tell apart from ``n`` samples."""
    regime = _regime(regime)
    if not lam < cap:
        raise ValueError("need lambda < cap")
    if n < 1:
        raise ValueError("n must be positive")
    rho = cp.rho
    lb = lower_bound(regime, cp, lam, cap, n)
    shrink = math.sqrt((1.0 - rho) / n)
    if regime == STRICTLY_IDENTIFIABLE:
        if not lam > 0:
            raise ValueError("the identifiable construction needs lambda > 0")
        d = min(rho / 2, (1 - rho) / 2, shrink / 4)
        H = lam / 2
        g0 = DiscreteDistribution([0.0, H], [rho - d, 1 - rho + d], family="point-mass-mixture")
        g1 = DiscreteDistribution([0.0, H], [rho + d, 1 - rho - d], family="point-mass-mixture")
        return HardInstancePair(regime, g0, g1, lb, {"delta_id": d, "H": H})
    if not 0 < lam < 1:
        raise ValueError("the Bernoulli constructions need 0 < lambda < 1")
    if regime == KNIFE_EDGE:
        d = min(rho / 2, (1 - rho) / 2, shrink / 4)
        return HardInstancePair(
            regime, _bernoulli(1 - rho + d), _bernoulli(1 - rho - d), lb, {"delta_ke": d}
        )
    if 3 * rho - 1 <= 0:
        raise ValueError("no strictly unidentifiable construction for rho <= 1/3")
    d0 = min(rho / 2, (1 - rho) / 2)
    d1 = min(rho / 4, (3 * rho - 1) / 4, shrink / 2)
    return HardInstancePair(
        regime,
        _bernoulli(1 - rho + d0),
        _bernoulli(1 - rho + d0 + d1),
        lb,
        {"delta0_ui": d0, "delta1_ui": d1},
    )


def lower_bound(regime: str, cp: CostParameters, lam: float, cap: float, n: int) -> float:
    """Minimax lower bound on excess worst-case regret from ``n`` samples."""
    regime = _regime(regime)
    if not lam < cap:
        raise ValueError("need lambda < cap")
    rho = cp.rho
    common = math.sqrt(1 - rho) * min(rho, 1 - rho) * math.exp(-0.5) / math.sqrt(n)
    if regime == STRICTLY_IDENTIFIABLE:
        return lam * (cp.b + cp.h) * common / 64
    if regime == KNIFE_EDGE:
        return lam * (cp.b + cp.h) * common / 32
    return cp.h * (cap - lam) * common * min(rho, 3 * rho - 1) / 64


def sample_complexity(cp: CostParameters, lam: float, cap: float, epsilon: float, delta: float) -> int:
    """Samples per group after which RCN is within ``epsilon`` of the risk w.p. 1 - 2 delta."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    b, h = cp.b, cp.h
    spread = max(lam**2, max((b / h) ** 2, 1.0) * (cap - lam) ** 2)
    return math.ceil(2 * (b + h) ** 2 * math.log(2 / delta) / epsilon**2 * spread)


# ------------------------------------------------------------ oracle harness


def random_instance(rng: RngStream) -> Instance:
    """Random instance across families and both regimes."""
    gen = rng.generator
    kind = int(gen.integers(6))
    if kind == 0:
        G = Exponential(float(gen.uniform(10, 150)))
    elif kind == 1:
        G = Poisson(float(gen.uniform(3, 100)))
    elif kind == 2:
        G = TruncatedNormal(float(gen.uniform(-20, 120)), float(gen.uniform(5, 60)))
    elif kind == 3:
        G = discrete_uniform(0, int(gen.integers(5, 150)))
    elif kind == 4:
        k = int(gen.integers(1, 6))
        atoms = gen.choice(np.arange(0, 101), size=k, replace=False).astype(float)
        G = DiscreteDistribution(atoms, gen.dirichlet(np.ones(k)))
    else:
        G = empirical_from_samples(np.round(gen.exponential(40.0, size=int(gen.integers(5, 60)))))
    cp = CostParameters(float(gen.uniform(0.2, 10)), float(gen.uniform(0.2, 10)))
    level = float(gen.uniform(0.02, 0.999))
    lam = float(G.quantile(level))
    if gen.random() < 0.5:
        lam *= float(gen.uniform(0.5, 1.5))  # also land between atoms
    q_star = optimal_quantity(G, cp)
    cap = max(q_star, lam) * float(gen.uniform(1.05, 3.0)) + float(gen.uniform(0.5, 20))
    return Instance(G, lam, cap, cp)


def branch_points(inst: Instance, rng: RngStream) -> np.ndarray:
    """Order quantities covering every piece of the worst-case regret."""
    gen = rng.generator
    lam, M = inst.lam, inst.cap
    pts = [0.0, M, min(lam, M), float(gen.uniform(0, M))]
    if lam > 0:
        pts.append(float(gen.uniform(0, min(lam, M))))
    if inst.identifiable:
        pts.append(optimal_quantity(inst.demand, inst.cost))
        if lam < M:
            pts.append(float(gen.uniform(lam, M)))
    else:
        qd = q_dagger(inst)
        pts += [qd, float(gen.uniform(lam, qd)), float(gen.uniform(qd, M))]
    return np.clip(np.array(pts), 0.0, M)


def oracle_check(count: int = 200, seed: int = 0, grid_size: int = 10_000) -> tuple[int, list]:
    """Compare closed-form worst-case regret with the brute-force oracle.

    Returns the number of instances within tolerance and a list of the
    failures as ``(index, q, closed_form, oracle)``.
    """
    ok, failures = 0, []
    for i in range(count):
        rng = RngStream(seed, i)
        inst = random_instance(rng)
        good = True
        for q in branch_points(inst, rng):
            exact = float(worst_case_regret(inst, q))
            brute = worst_case_regret_oracle(inst, float(q), grid_size)
            if abs(exact - brute) > max(1e-6, 1e-3 * abs(exact)):
                good = False
                failures.append((i, float(q), exact, brute))
        ok += good
    return ok, failures
