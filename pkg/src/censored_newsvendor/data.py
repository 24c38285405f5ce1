"""Synthetic censored datasets, dataset files, and sales-CSV ingestion."""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .distributions import DemandDistribution, RngStream, empirical_from_samples
from .newsvendor import CostParameters
from .policies import CensoredDataset

CONTINUOUS = "continuous"
INTEGER = "integer"


def censor(demands, q_off: float) -> np.ndarray:
    """Observed sales ``min(d, q_off)``."""
    if q_off < 0:
        raise ValueError("order quantity must be nonnegative")
    return np.minimum(np.asarray(demands, dtype=float), q_off)


@dataclass(frozen=True)
class GenerationConfig:
    distribution: DemandDistribution
    lam: float
    n: int
    num_groups: int = 2
    seed: int = 0
    second_quantity: str = CONTINUOUS

    def __post_init__(self):
        if self.num_groups < 1:
            raise ValueError("need at least one group")
        if self.n < 1:
            raise ValueError("need at least one sample per group")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError("lambda must be positive and finite")
        if self.second_quantity not in (CONTINUOUS, INTEGER):
            raise ValueError(f"second_quantity must be {CONTINUOUS!r} or {INTEGER!r}")
        if self.second_quantity == INTEGER and self.num_groups > 1:
            if math.ceil(self.lam / 4) > math.floor(3 * self.lam / 4):
                raise ValueError("no integer lies in [lambda/4, 3 lambda/4]")


def _other_quantity(cfg: GenerationConfig, gen: np.random.Generator) -> float:
    lo, hi = cfg.lam / 4, 3 * cfg.lam / 4
    if cfg.second_quantity == INTEGER:
        return float(gen.integers(math.ceil(lo), math.floor(hi) + 1))
    return float(gen.uniform(lo, hi))


def generate_dataset(cfg: GenerationConfig, rng: RngStream | None = None):
    """Draw one censored dataset and the demands behind it.

    The first group is stocked at ``lam``; the others at order quantities
    drawn from ``[lam/4, 3 lam/4]``.  Returns ``(dataset, shadow)`` where
    ``shadow[k]`` holds the uncensored demands of group ``k``.
    """
    rng = rng if rng is not None else RngStream(cfg.seed)
    groups, shadow = [], []
    for k in range(cfg.num_groups):
        q_off = cfg.lam if k == 0 else _other_quantity(cfg, rng.generator)
        demands = cfg.distribution.sample(rng, cfg.n)
        groups.append((q_off, censor(demands, q_off)))
        shadow.append(demands)
    return CensoredDataset(groups), shadow


# ----------------------------------------------------------- dataset files


@dataclass
class DatasetFile:
    dataset: CensoredDataset
    cost: CostParameters
    cap: float
    uncensored: list | None = None


def _number(obj, key, where):
    v = obj.get(key) if isinstance(obj, dict) else None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"{where}: field {key!r} must be a number")
    return float(v)


def _numbers(obj, key, where):
    v = obj.get(key) if isinstance(obj, dict) else None
    if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
        raise ValueError(f"{where}: field {key!r} must be a list of numbers")
    return v


def dataset_from_json(obj: dict) -> DatasetFile:
    if not isinstance(obj, dict):
        raise ValueError("dataset must be a JSON object")
    cost = obj.get("cost")
    cp = CostParameters(_number(cost, "b", "cost"), _number(cost, "h", "cost"))
    cap = _number(obj, "cap", "dataset")
    raw = obj.get("groups")
    if not isinstance(raw, list) or not raw:
        raise ValueError("dataset: 'groups' must be a nonempty list")
    groups = [
        (_number(g, "order_quantity", f"groups[{i}]"), _numbers(g, "sales", f"groups[{i}]"))
        for i, g in enumerate(raw)
    ]
    uncensored = None
    if "uncensored" in obj:
        unc = obj["uncensored"]
        if not isinstance(unc, list) or len(unc) != len(raw):
            raise ValueError("dataset: 'uncensored' must mirror 'groups'")
        uncensored = [np.asarray(_numbers(u, "demands", f"uncensored[{i}]"), dtype=float)
                      for i, u in enumerate(unc)]
    return DatasetFile(CensoredDataset(groups), cp, cap, uncensored)


def dataset_to_json(df: DatasetFile) -> dict:
    out = {
        "cost": {"b": df.cost.b, "h": df.cost.h},
        "cap": df.cap,
        "groups": [
            {"order_quantity": g.order_quantity, "sales": g.sales.tolist()}
            for g in df.dataset.groups
        ],
    }
    if df.uncensored is not None:
        out["uncensored"] = [
            {"order_quantity": g.order_quantity, "demands": np.asarray(u).tolist()}
            for g, u in zip(df.dataset.groups, df.uncensored)
        ]
    return out


def load_dataset(path) -> DatasetFile:
    """Read a dataset file; JSON syntax errors keep their line and column."""
    with open(path, encoding="utf-8") as fh:
        return dataset_from_json(json.load(fh))


def save_dataset(df: DatasetFile, path) -> None:
    Path(path).write_text(json.dumps(dataset_to_json(df), indent=1) + "\n", encoding="utf-8")


# -------------------------------------------------------------- sales CSV


@dataclass(frozen=True)
class SalesRecord:
    date: dt.date
    category: str
    quantity: int

    def __post_init__(self):
        if self.quantity < 0:
            raise ValueError("quantity must be nonnegative")


@dataclass(frozen=True)
class CsvLayout:
    date_column: str = "order_date"
    category_column: str = "category"
    quantity_column: str = "quantity"
    date_format: str | None = None  # None means ISO-8601
    holidays: frozenset = field(default_factory=frozenset)


def _parse_date(text: str, fmt: str | None, line: int) -> dt.date:
    try:
        if fmt is None:
            return dt.date.fromisoformat(text.strip()[:10])
        return dt.datetime.strptime(text.strip(), fmt).date()
    except ValueError:
        raise ValueError(f"line {line}: cannot parse date {text!r}") from None


def read_sales(path, layout: CsvLayout = CsvLayout()) -> list[SalesRecord]:
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        needed = [layout.date_column, layout.category_column, layout.quantity_column]
        missing = [c for c in needed if c not in cols]
        if missing:
            raise ValueError(f"{path}: missing column(s) {missing}; found {cols}")
        records = []
        for row in reader:
            line = reader.line_num
            raw_q = (row[layout.quantity_column] or "").strip()
            try:
                qty = int(raw_q)
            except ValueError:
                raise ValueError(f"line {line}: quantity {raw_q!r} is not an integer") from None
            if qty < 0:
                raise ValueError(f"line {line}: negative quantity {qty}")
            date = _parse_date(row[layout.date_column] or "", layout.date_format, line)
            records.append(SalesRecord(date, row[layout.category_column], qty))
    return records


def daily_totals(records: Iterable[SalesRecord], category: str,
                 holidays: Iterable[dt.date] = ()) -> dict[dt.date, int]:
    """Total quantity per business day within ``category``."""
    skip = set(holidays)
    totals: dict[dt.date, int] = {}
    seen = False
    for r in records:
        if r.category != category:
            continue
        seen = True
        if r.date.weekday() >= 5 or r.date in skip:
            continue
        totals[r.date] = totals.get(r.date, 0) + r.quantity
    if not seen:
        raise ValueError(f"unknown category {category!r}")
    if not totals:
        raise ValueError(f"category {category!r} has no business-day sales")
    return dict(sorted(totals.items()))


def ingest_sales_csv(path, category: str, layout: CsvLayout = CsvLayout(),
                     count: int | None = None, seed: int = 0) -> DemandDistribution:
    """Empirical daily-demand distribution of one category.

    Daily totals are drawn uniformly without replacement, up to ``count``
    of them (all of them when ``count`` is None).
    """
    totals = np.array(list(daily_totals(read_sales(path, layout), category, layout.holidays).values()),
                      dtype=float)
    if count is not None:
        if count < 1:
            raise ValueError("count must be positive")
        gen = RngStream(seed).generator
        totals = gen.choice(totals, size=min(count, totals.size), replace=False)
    return empirical_from_samples(totals)


def parse_holidays(items: Sequence[str]) -> frozenset:
    return frozenset(dt.date.fromisoformat(s) for s in items)
