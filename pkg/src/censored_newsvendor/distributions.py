"""Demand distributions with the handful of functionals the newsvendor needs.

Every family exposes the CDF, its left limit, the generalized inverse,
the mean and the partial expectation ``E[(q - D) 1{D <= q}]``.  All methods
accept scalars or numpy arrays; scalars come back as Python floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special, stats

# Slack used when comparing accumulated probabilities against a target level.
PROB_TOL = 1e-12


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


class RngStream:
    """Deterministic random stream keyed by ``(seed, *stream)``.

    Uses PCG64 seeded through ``SeedSequence`` with the stream indices as the
    spawn key, so the same key gives the same draws on any platform.  A stream
    has a single owner; concurrent users derive their own by index.
    """

    def __init__(self, seed: int, *stream: int):
        self.seed = int(seed)
        self.stream = tuple(int(s) for s in stream)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def uniform(self, n: int) -> np.ndarray:
        """Draw ``n`` uniforms strictly inside (0, 1) on a 2**-53 lattice."""
        k = self.generator.integers(0, 2**53, size=n, dtype=np.int64)
        return (k + 0.5) / 2.0**53

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream})"


class DemandDistribution:
    """Base class for nonnegative demand distributions."""

    family: str = "abstract"

    def cdf(self, x):
        raise NotImplementedError

    def cdf_strict(self, x):
        """``Pr(D < x)``, the left limit of the CDF."""
        raise NotImplementedError

    def quantile(self, p):
        """``inf{q : CDF(q) >= p}`` for ``0 < p <= 1``."""
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def partial_expectation(self, q):
        """``E[(q - D) 1{D <= q}]``."""
        raise NotImplementedError

    def strict_partial_expectation(self, q):
        """``E[(q - D) 1{D < q}]``.

        An atom sitting exactly at ``q`` is weighted by ``q - q = 0``, so the
        strict and weak versions coincide for every family.
        """
        return self.partial_expectation(q)

    def sample(self, rng: RngStream, n: int) -> np.ndarray:
        """Draw ``n`` i.i.d. values by inverse-CDF transform."""
        if n < 0:
            raise ValueError("sample size must be nonnegative")
        return np.asarray(self.quantile(rng.uniform(n)), dtype=float)

    def _check_p(self, p):
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0) or np.any(p > 1):
            raise ValueError("quantile level must lie in (0, 1]")
        return p


@dataclass(frozen=True)
class Exponential(DemandDistribution):
    scale: float  # the mean
    family: str = field(default="exponential", init=False)

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError("exponential mean must be positive and finite")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.where(x < 0, 0.0, -np.expm1(-np.maximum(x, 0.0) / self.scale)))

    cdf_strict = cdf

    def quantile(self, p):
        p = self._check_p(p)
        with np.errstate(divide="ignore"):
            return _out(-self.scale * np.log1p(-p))

    def mean(self):
        return float(self.scale)

    def partial_expectation(self, q):
        q = np.maximum(np.asarray(q, dtype=float), 0.0)
        return _out(q + self.scale * np.expm1(-q / self.scale))


@dataclass(frozen=True)
class Poisson(DemandDistribution):
    rate: float
    family: str = field(default="poisson", init=False)

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError("poisson mean must be positive and finite")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.where(x < 0, 0.0, stats.poisson.cdf(np.floor(x), self.rate)))

    def cdf_strict(self, x):
        x = np.asarray(x, dtype=float)
        k = np.ceil(x) - 1
        return _out(np.where(k < 0, 0.0, stats.poisson.cdf(k, self.rate)))

    def quantile(self, p):
        p = self._check_p(p)
        k = stats.poisson.ppf(p, self.rate)
        # ppf works in floating point; step back if the previous integer already qualifies
        k = np.where(
            (k > 0) & (stats.poisson.cdf(k - 1, self.rate) >= p - PROB_TOL), k - 1, k
        )
        return _out(k)

    def mean(self):
        return float(self.rate)

    def partial_expectation(self, q):
        # k * pmf(k) = rate * pmf(k - 1), hence E[D 1{D <= q}] = rate * F(q - 1).
        q = np.maximum(np.asarray(q, dtype=float), 0.0)
        k = np.floor(q)
        upper = stats.poisson.cdf(k, self.rate)
        lower = np.where(k >= 1, stats.poisson.cdf(k - 1, self.rate), 0.0)
        return _out(q * upper - self.rate * lower)


@dataclass(frozen=True)
class TruncatedNormal(DemandDistribution):
    """``D = max(0, X)`` with ``X ~ Normal(loc, scale**2)``; atom at zero."""

    loc: float
    scale: float
    family: str = field(default="truncated-normal", init=False)

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.loc)):
            raise ValueError("truncated normal needs finite mean and positive sd")

    def _z(self, x):
        return (np.asarray(x, dtype=float) - self.loc) / self.scale

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.where(x < 0, 0.0, special.ndtr(self._z(x))))

    def cdf_strict(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.where(x <= 0, 0.0, special.ndtr(self._z(x))))

    def quantile(self, p):
        p = self._check_p(p)
        atom = special.ndtr(-self.loc / self.scale)
        with np.errstate(over="ignore"):
            q = self.loc + self.scale * special.ndtri(p)
        return _out(np.where(p <= atom, 0.0, np.maximum(q, 0.0)))

    def mean(self):
        a = self.loc / self.scale
        return float(self.loc * special.ndtr(a) + self.scale * stats.norm.pdf(a))

    def partial_expectation(self, q):
        q = np.maximum(np.asarray(q, dtype=float), 0.0)
        lo = -self.loc / self.scale
        hi = self._z(q)
        # E[X 1{0 < X <= q}] via the normal partial first moment
        first = self.loc * (special.ndtr(hi) - special.ndtr(lo)) - self.scale * (
            stats.norm.pdf(hi) - stats.norm.pdf(lo)
        )
        return _out(q * special.ndtr(hi) - first)


class DiscreteDistribution(DemandDistribution):
    """Finitely supported distribution given by atoms and nonnegative weights.

    Weights are normalized internally; integer counts keep the CDF exact
    for empirical distributions.
    """

    def __init__(self, atoms, weights, family: str = "point-mass-mixture"):
        atoms = np.asarray(atoms, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if atoms.ndim != 1 or atoms.shape != weights.shape or atoms.size == 0:
            raise ValueError("atoms and weights must be nonempty 1-d arrays of equal length")
        if np.any(~np.isfinite(atoms)) or np.any(atoms < 0):
            raise ValueError("atoms must be finite and nonnegative")
        if np.any(weights < 0) or not weights.sum() > 0:
            raise ValueError("weights must be nonnegative with positive total")
        order = np.argsort(atoms, kind="stable")
        atoms, weights = atoms[order], weights[order]
        uniq, inverse = np.unique(atoms, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inverse, weights)
        keep = merged > 0
        self.atoms = uniq[keep]
        total = merged.sum()
        self.probs = merged[keep] / total
        self._cum = np.cumsum(merged[keep]) / total
        self._cum[-1] = 1.0
        self._cum_first = np.cumsum(self.atoms * self.probs)
        self.family = family

    def __repr__(self):
        return f"DiscreteDistribution({self.family}, {self.atoms.size} atoms)"

    def _cum_at(self, idx):
        return np.where(idx >= 0, self._cum[np.maximum(idx, 0)], 0.0)

    def cdf(self, x):
        idx = np.searchsorted(self.atoms, np.asarray(x, dtype=float), side="right") - 1
        return _out(self._cum_at(idx))

    def cdf_strict(self, x):
        idx = np.searchsorted(self.atoms, np.asarray(x, dtype=float), side="left") - 1
        return _out(self._cum_at(idx))

    def quantile(self, p):
        p = self._check_p(p)
        idx = np.searchsorted(self._cum, p - PROB_TOL, side="left")
        idx = np.minimum(idx, self.atoms.size - 1)
        return _out(self.atoms[idx])

    def mean(self):
        return float(self._cum_first[-1])

    def partial_expectation(self, q):
        q = np.asarray(q, dtype=float)
        idx = np.searchsorted(self.atoms, q, side="right") - 1
        first = np.where(idx >= 0, self._cum_first[np.maximum(idx, 0)], 0.0)
        return _out(q * self._cum_at(idx) - first)


def discrete_uniform(low: int, high: int) -> DiscreteDistribution:
    """Uniform on the integers ``low, ..., high``."""
    if low < 0 or high < low:
        raise ValueError("need 0 <= low <= high")
    atoms = np.arange(int(low), int(high) + 1)
    return DiscreteDistribution(atoms, np.ones(atoms.size), family="discrete-uniform")


def point_mass_mixture(pairs: Sequence[tuple[float, float]]) -> DiscreteDistribution:
    """Mixture of atoms given as ``(location, probability)`` pairs."""
    if not pairs:
        raise ValueError("need at least one atom")
    atoms, probs = zip(*pairs)
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
        raise ValueError("mixture probabilities must be nonnegative and sum to 1")
    return DiscreteDistribution(atoms, probs, family="point-mass-mixture")


def empirical_from_samples(xs) -> DiscreteDistribution:
    """Uniform-weight empirical distribution of the observations ``xs``."""
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        raise ValueError("empirical distribution needs at least one observation")
    if np.any(xs < 0):
        raise ValueError("demand observations must be nonnegative")
    return DiscreteDistribution(xs, np.ones(xs.size), family="empirical")


def from_spec(spec: dict) -> DemandDistribution:
    """Build a distribution from a JSON-style mapping.

    Recognised forms::

        {"family": "exponential", "mean": 80}
        {"family": "poisson", "mean": 80}
        {"family": "truncated-normal", "mean": 80, "sd": 30}
        {"family": "discrete-uniform", "low": 0, "high": 100}
        {"family": "point-mass-mixture", "atoms": [[0, 0.4], [10, 0.6]]}
        {"family": "empirical", "samples": [1, 2, 3]}
    """
    spec = dict(spec)
    family = spec.pop("family", None)
    builders = {
        "exponential": (("mean",), lambda s: Exponential(float(s["mean"]))),
        "poisson": (("mean",), lambda s: Poisson(float(s["mean"]))),
        "truncated-normal": (
            ("mean", "sd"),
            lambda s: TruncatedNormal(float(s["mean"]), float(s["sd"])),
        ),
        "discrete-uniform": (
            ("low", "high"),
            lambda s: discrete_uniform(int(s["low"]), int(s["high"])),
        ),
        "point-mass-mixture": (
            ("atoms",),
            lambda s: point_mass_mixture([tuple(a) for a in s["atoms"]]),
        ),
        "empirical": (("samples",), lambda s: empirical_from_samples(s["samples"])),
    }
    if family not in builders:
        raise ValueError(f"unknown distribution family {family!r}")
    keys, build = builders[family]
    if set(spec) != set(keys):
        raise ValueError(f"{family} expects keys {sorted(keys)}, got {sorted(spec)}")
    return build(spec)


def parse_spec_string(text: str) -> DemandDistribution:
    """Parse a compact command-line spec such as ``exponential:80``.

    Forms: ``exponential:MEAN``, ``poisson:MEAN``, ``normal:MEAN:SD``,
    ``uniform:LOW:HIGH``, ``mixture:X1@P1,X2@P2``.
    """
    name, _, rest = text.partition(":")
    parts = rest.split(":") if rest else []
    try:
        if name == "exponential" and len(parts) == 1:
            return Exponential(float(parts[0]))
        if name == "poisson" and len(parts) == 1:
            return Poisson(float(parts[0]))
        if name in ("normal", "truncated-normal") and len(parts) == 2:
            return TruncatedNormal(float(parts[0]), float(parts[1]))
        if name in ("uniform", "discrete-uniform") and len(parts) == 2:
            return discrete_uniform(int(parts[0]), int(parts[1]))
        if name in ("mixture", "point-mass-mixture") and len(parts) == 1:
            pairs = []
            for item in parts[0].split(","):
                x, _, p = item.partition("@")
                pairs.append((float(x), float(p)))
            return point_mass_mixture(pairs)
    except ValueError as exc:
        raise ValueError(f"bad distribution spec {text!r}: {exc}") from None
    raise ValueError(f"bad distribution spec {text!r}")
