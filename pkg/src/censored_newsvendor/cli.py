"""Command-line interface.

Every subcommand prints JSON (or CSV for tabular output) and exits with
0 on success, 2 on bad input and 1 on any other failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import data, distributions, minimax, policies
from .evaluation import ExperimentSpec, GridPoint, reports_to_csv, run_replications
from .newsvendor import CostParameters, optimal_quantity

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_distribution(value) -> distributions.DemandDistribution:
    """Accept a compact string like ``exponential:80`` or a JSON mapping."""
    if isinstance(value, dict):
        return distributions.from_spec(value)
    if isinstance(value, str) and value.lstrip().startswith("{"):
        return distributions.from_spec(json.loads(value))
    if isinstance(value, str):
        return distributions.parse_spec_string(value)
    raise ValueError(f"cannot interpret distribution {value!r}")


def _emit(payload, out: str | None = None):
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _instance(args) -> minimax.Instance:
    return minimax.Instance(parse_distribution(args.dist), args.lam, args.cap,
                            CostParameters(args.b, args.h))


# ---------------------------------------------------------------- commands


def cmd_risk(args):
    inst = _instance(args)
    sol = minimax.minimax_risk(inst)
    _emit({
        "regime": sol.regime,
        "q_delta": sol.q_delta,
        "delta": sol.delta,
        "q_dagger": None if inst.identifiable else minimax.q_dagger(inst),
        "g_minus": inst.g_minus,
        "q_star": optimal_quantity(inst.demand, inst.cost),
        "rho": inst.cost.rho,
    }, args.out)


def cmd_regret_curve(args):
    inst = _instance(args)
    if args.grid < 2:
        raise UsageError("--grid needs at least 2 points")
    qs = set(np.linspace(0.0, inst.cap, args.grid).tolist())
    qs.add(min(inst.lam, inst.cap))
    qs.add(minimax.minimax_risk(inst).q_delta)
    qs = sorted(q for q in qs if 0 <= q <= inst.cap)
    values = minimax.worst_case_regret(inst, np.array(qs))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["q", "regret"])
    for q, v in zip(qs, np.atleast_1d(values)):
        w.writerow([repr(float(q)), repr(float(v))])
    _emit(buf.getvalue(), args.out)


def cmd_decide(args):
    df = data.load_dataset(args.dataset)
    cap = df.cap if args.cap is None else args.cap
    dec = policies.decide(args.policy, df.dataset, df.cost, cap, args.delta, df.uncensored)
    _emit({
        "policy": dec.policy,
        "q": dec.q,
        "branch": dec.branch,
        "boundary": df.dataset.boundary,
        "diagnostics": dec.diagnostics,
    }, args.out)


@dataclass
class ExperimentConfig:
    distribution: distributions.DemandDistribution
    b: list
    h: float
    lambdas: list | None
    lambda_fractions: list | None
    n: list
    replications: int
    delta: float
    cap: float
    seed: int
    policies: list
    num_groups: int
    second_quantity: str
    output: str | None

    def grid(self) -> list[GridPoint]:
        pts = []
        for b in self.b:
            if self.lambdas is not None:
                lams = self.lambdas
            else:
                q_star = optimal_quantity(self.distribution, CostParameters(b, self.h))
                lams = [f * q_star for f in self.lambda_fractions]
            for lam in lams:
                for n in self.n:
                    pts.append(GridPoint(float(lam), int(n), float(b), float(self.h)))
        return pts


CONFIG_KEYS = {
    "distribution", "b", "h", "lambda", "lambda_fraction", "n", "replications", "delta",
    "cap", "seed", "policies", "num_groups", "second_quantity", "output",
}


def _as_list(v, key, kind=float):
    vals = v if isinstance(v, list) else [v]
    if not vals or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in vals):
        raise ValueError(f"config: {key!r} must be a number or a nonempty list of numbers")
    if kind is int and any(int(x) != x for x in vals):
        raise ValueError(f"config: {key!r} must hold integers")
    return [kind(x) for x in vals]


def load_config(obj: dict) -> ExperimentConfig:
    """Validate a parsed experiment config; unknown keys are an error."""
    if not isinstance(obj, dict):
        raise ValueError("config must be a JSON object")
    unknown = sorted(set(obj) - CONFIG_KEYS)
    if unknown:
        raise ValueError(f"config: unknown key(s) {unknown}")
    for key in ("distribution", "b", "n", "cap"):
        if key not in obj:
            raise ValueError(f"config: missing required key {key!r}")
    if ("lambda" in obj) == ("lambda_fraction" in obj):
        raise ValueError("config: give exactly one of 'lambda' and 'lambda_fraction'")
    names = obj.get("policies", sorted(policies.POLICIES))
    if not isinstance(names, list) or not names:
        raise ValueError("config: 'policies' must be a nonempty list")
    for name in names:
        policies.get_policy(name)
    cfg = ExperimentConfig(
        distribution=parse_distribution(obj["distribution"]),
        b=_as_list(obj["b"], "b"),
        h=_as_list(obj.get("h", 1.0), "h")[0],
        lambdas=_as_list(obj["lambda"], "lambda") if "lambda" in obj else None,
        lambda_fractions=(_as_list(obj["lambda_fraction"], "lambda_fraction")
                          if "lambda_fraction" in obj else None),
        n=_as_list(obj["n"], "n", int),
        replications=_as_list(obj.get("replications", 100), "replications", int)[0],
        delta=_as_list(obj.get("delta", policies.DEFAULT_DELTA), "delta")[0],
        cap=_as_list(obj["cap"], "cap")[0],
        seed=_as_list(obj.get("seed", 0), "seed", int)[0],
        policies=list(names),
        num_groups=_as_list(obj.get("num_groups", 2), "num_groups", int)[0],
        second_quantity=obj.get("second_quantity", data.CONTINUOUS),
        output=obj.get("output"),
    )
    if cfg.replications < 1:
        raise ValueError("config: 'replications' must be positive")
    if not 0 < cfg.delta < 1:
        raise ValueError("config: 'delta' must lie in (0, 1)")
    if cfg.num_groups < 1 or any(n < 1 for n in cfg.n):
        raise ValueError("config: 'num_groups' and 'n' must be positive")
    if cfg.second_quantity not in (data.CONTINUOUS, data.INTEGER):
        raise ValueError("config: 'second_quantity' must be 'continuous' or 'integer'")
    if cfg.output is not None and not isinstance(cfg.output, str):
        raise ValueError("config: 'output' must be a path string")
    for b in cfg.b:
        CostParameters(b, cfg.h)
    return cfg


def cmd_simulate(args):
    with open(args.config, encoding="utf-8") as fh:
        cfg = load_config(json.load(fh))
    seed = cfg.seed if args.seed is None else args.seed
    spec = ExperimentSpec(cfg.distribution, cfg.cap, tuple(cfg.policies), seed, cfg.delta,
                          cfg.num_groups, cfg.second_quantity)
    reports = run_replications(spec, cfg.grid(), cfg.replications, jobs=args.jobs)
    failed = sum(r.error is not None for r in reports)
    if failed:
        first = next(r for r in reports if r.error is not None)
        print(f"warning: {failed} policy run(s) failed; first: {first.policy}: {first.error}",
              file=sys.stderr)
    _emit(reports_to_csv(reports), args.out or cfg.output)


def cmd_ingest(args):
    layout = data.CsvLayout(args.date_column, args.category_column, args.quantity_column,
                            args.date_format, data.parse_holidays(args.holiday))
    G = data.ingest_sales_csv(args.csv, args.category, layout, args.count, args.seed)
    cp = CostParameters(args.b, args.h)
    q_star = optimal_quantity(G, cp)
    if (args.lam is None) == (args.lambda_fraction is None):
        raise UsageError("give exactly one of --lambda and --lambda-fraction")
    lam = args.lam if args.lam is not None else args.lambda_fraction * q_star
    cap = args.cap if args.cap is not None else float(G.atoms[-1])
    gen_cfg = data.GenerationConfig(G, lam, args.n, args.groups, args.seed, args.second_quantity)
    ds, shadow = data.generate_dataset(gen_cfg, distributions.RngStream(args.seed, 1))
    data.save_dataset(data.DatasetFile(ds, cp, cap, shadow), args.out)
    _emit({"out": args.out, "days": int(G.atoms.size), "q_star": q_star, "lambda": lam,
           "cap": cap, "order_quantities": ds.order_quantities})


def cmd_lower_bound(args):
    cp = CostParameters(args.b, args.h)
    regimes = ["id", "ke", "ui"] if args.regime == "all" else [args.regime]
    out = {r: minimax.lower_bound(r, cp, args.lam, args.cap, args.n) for r in regimes}
    if args.epsilon is not None:
        out["sample_complexity"] = minimax.sample_complexity(cp, args.lam, args.cap,
                                                             args.epsilon, args.delta)
    _emit(out, args.out)


def cmd_oracle_check(args):
    ok, failures = minimax.oracle_check(args.count, args.seed, args.grid)
    print(f"{ok}/{args.count} instances within tolerance")
    for i, q, exact, brute in failures[:10]:
        print(f"  instance {i}: q={q:.6g} closed form {exact:.10g} oracle {brute:.10g}")
    if ok != args.count:
        raise RuntimeError("oracle check failed")


# ------------------------------------------------------------------ parser


def _instance_args(p):
    p.add_argument("--dist", required=True,
                   help="e.g. exponential:80, poisson:80, normal:80:30, uniform:0:100, "
                        "mixture:0@0.4,10@0.6, or a JSON object")
    _cost_args(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--cap", type=float, required=True)


def _cost_args(p):
    p.add_argument("--b", type=float, required=True, help="underage cost")
    p.add_argument("--h", type=float, default=1.0, help="overage cost")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="censored-newsvendor", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("risk", help="minimax risk and the minimax order quantity")
    _instance_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("regret-curve", help="worst-case regret on a grid of order quantities")
    _instance_args(p)
    p.add_argument("--grid", type=int, default=201)
    p.add_argument("--out")
    p.set_defaults(func=cmd_regret_curve)

    p = sub.add_parser("decide", help="run a policy on a dataset file")
    p.add_argument("dataset")
    p.add_argument("--policy", default="rcn")
    p.add_argument("--delta", type=float, default=policies.DEFAULT_DELTA)
    p.add_argument("--cap", type=float, help="override the dataset's cap")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decide)

    p = sub.add_parser("simulate", help="run a replication sweep from a JSON config")
    p.add_argument("config")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", help="build a censored dataset from a sales CSV")
    p.add_argument("csv")
    p.add_argument("--category", required=True)
    p.add_argument("--out", required=True)
    _cost_args(p)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--lambda-fraction", type=float, help="boundary as a fraction of q*")
    p.add_argument("--cap", type=float, help="default: largest daily total")
    p.add_argument("--n", type=int, default=100, help="samples per group")
    p.add_argument("--groups", type=int, default=2)
    p.add_argument("--second-quantity", default=data.INTEGER,
                   choices=[data.INTEGER, data.CONTINUOUS])
    p.add_argument("--count", type=int, help="daily totals to keep")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--date-column", default="order_date")
    p.add_argument("--category-column", default="category")
    p.add_argument("--quantity-column", default="quantity")
    p.add_argument("--date-format", help="strptime pattern; default ISO-8601")
    p.add_argument("--holiday", action="append", default=[], help="YYYY-MM-DD, repeatable")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("lower-bound", help="minimax lower bounds and sample complexity")
    p.add_argument("--regime", default="all", choices=["id", "ke", "ui", "all"])
    _cost_args(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--cap", type=float, required=True)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--epsilon", type=float, help="also report the sample complexity")
    p.add_argument("--delta", type=float, default=policies.DEFAULT_DELTA)
    p.add_argument("--out")
    p.set_defaults(func=cmd_lower_bound)

    p = sub.add_parser("oracle-check", help="compare closed forms with the brute-force oracle")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=10_000)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        args.func(args)
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
              file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
