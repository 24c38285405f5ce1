"""Regret metrics and the seeded replication harness."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import CONTINUOUS, GenerationConfig, generate_dataset
from .distributions import DemandDistribution, RngStream
from .minimax import Instance, minimax_risk, worst_case_regret
from .newsvendor import CostParameters, cost, optimal_quantity, vanilla_regret
from .policies import DEFAULT_DELTA, decide, get_policy

REPORT_COLUMNS = (
    "policy", "lambda", "n", "b", "h", "replication", "q_alg", "branch", "regret",
    "regret_minus_delta", "vanilla_regret", "rel_regret_ui", "rel_regret_id", "regime", "seed",
)


def relative_regret_ui(regret: float, delta: float) -> float:
    """Percent excess of worst-case regret over the minimax risk."""
    if not delta > 0:
        raise ValueError("relative regret needs a positive minimax risk")
    return 100.0 * (regret - delta) / delta


def relative_regret_id(cost_q: float, cost_star: float) -> float:
    """Percent excess cost over the optimal cost."""
    if not cost_star > 0:
        raise ValueError("relative regret needs a positive optimal cost")
    return 100.0 * (cost_q - cost_star) / cost_star


def monte_carlo_cost(d: DemandDistribution, cp: CostParameters, q: float, n: int,
                     rng: RngStream) -> tuple[float, float]:
    """Sample-mean cost of ordering ``q`` and its standard error."""
    if n < 1:
        raise ValueError("need at least one draw")
    D = d.sample(rng, n)
    loss = cp.b * np.maximum(D - q, 0.0) + cp.h * np.maximum(q - D, 0.0)
    se = float(loss.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return float(loss.mean()), se


@dataclass(frozen=True)
class GridPoint:
    lam: float
    n: int
    b: float
    h: float


@dataclass
class RegretReport:
    policy: str
    lam: float
    n: int
    b: float
    h: float
    replication: int
    q: float
    branch: str
    regret: float
    regret_minus_delta: float
    vanilla_regret: float
    rel_regret_ui: float | None
    rel_regret_id: float | None
    regime: str
    seed: int
    grid_index: int = 0
    error: str | None = field(default=None, compare=False)

    def row(self) -> list:
        return [
            self.policy, self.lam, self.n, self.b, self.h, self.replication, self.q,
            self.branch, self.regret, self.regret_minus_delta, self.vanilla_regret,
            self.rel_regret_ui, self.rel_regret_id, self.regime, self.seed,
        ]


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything a replication needs besides its grid point and index."""

    distribution: DemandDistribution
    cap: float
    policies: tuple[str, ...]
    seed: int = 0
    delta: float = DEFAULT_DELTA
    num_groups: int = 2
    second_quantity: str = CONTINUOUS


def evaluate_quantity(inst: Instance, q: float) -> dict:
    """All metrics for ordering ``q`` (clipped to ``[0, cap]``) on ``inst``."""
    sol = minimax_risk(inst)
    q = min(max(float(q), 0.0), inst.cap)
    wcr = float(worst_case_regret(inst, q))
    van = float(vanilla_regret(inst.demand, inst.cost, q))
    out = {
        "q": q,
        "regret": wcr,
        "regret_minus_delta": wcr - sol.delta,
        "vanilla_regret": van,
        "rel_regret_ui": None,
        "rel_regret_id": None,
        "regime": sol.regime,
    }
    if sol.delta > 0:
        out["rel_regret_ui"] = relative_regret_ui(wcr, sol.delta)
    else:
        c_star = float(cost(inst.demand, inst.cost, optimal_quantity(inst.demand, inst.cost)))
        if c_star > 0:
            out["rel_regret_id"] = relative_regret_id(c_star + van, c_star)
    return out


def _nan_metrics(regime: str) -> dict:
    nan = float("nan")
    return {"q": nan, "regret": nan, "regret_minus_delta": nan, "vanilla_regret": nan,
            "rel_regret_ui": None, "rel_regret_id": None, "regime": regime}


def run_one(spec: ExperimentSpec, grid_index: int, point: GridPoint, rep: int) -> list[RegretReport]:
    """Generate one dataset and score every policy on it."""
    base = dict(lam=point.lam, n=point.n, b=point.b, h=point.h, replication=rep,
                seed=spec.seed, grid_index=grid_index)
    cp = CostParameters(point.b, point.h)
    regime = ""
    try:
        inst = Instance(spec.distribution, point.lam, spec.cap, cp)
        regime = minimax_risk(inst).regime
        cfg = GenerationConfig(spec.distribution, point.lam, point.n, spec.num_groups,
                               spec.seed, spec.second_quantity)
        ds, shadow = generate_dataset(cfg, RngStream(spec.seed, grid_index, rep))
    except Exception as exc:  # one bad grid point should not sink the sweep
        return [RegretReport(policy=p, branch="error", error=str(exc), **_nan_metrics(regime), **base)
                for p in spec.policies]
    out = []
    for name in spec.policies:
        try:
            dec = decide(name, ds, cp, spec.cap, spec.delta, uncensored=shadow)
            metrics = evaluate_quantity(inst, dec.q)
            out.append(RegretReport(policy=name, branch=dec.branch, **metrics, **base))
        except Exception as exc:
            out.append(RegretReport(policy=name, branch="error", error=str(exc),
                                    **_nan_metrics(regime), **base))
    return out


def _run_task(args) -> list[RegretReport]:
    return run_one(*args)


def run_replications(spec: ExperimentSpec, grid: Sequence[GridPoint], replications: int,
                     jobs: int = 1) -> list[RegretReport]:
    """Run every (grid point, replication) pair; output order never depends on ``jobs``."""
    if replications < 1:
        raise ValueError("need at least one replication")
    for name in spec.policies:
        get_policy(name)  # fail fast on unknown or reserved names
    tasks = [(spec, i, pt, r) for i, pt in enumerate(grid) for r in range(replications)]
    if jobs <= 1 or len(tasks) <= 1:
        chunks = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    order = {p: k for k, p in enumerate(spec.policies)}
    reports = [r for chunk in chunks for r in chunk]
    reports.sort(key=lambda r: (r.grid_index, r.replication, order[r.policy]))
    return reports


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def reports_to_csv(reports: Sequence[RegretReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in reports:
        w.writerow([_fmt(v) for v in r.row()])
    return buf.getvalue()
