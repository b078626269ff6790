"""Scenario data model, CSV ingestion, binning, batch sampling and radius calibration.

A :class:`ScenarioSet` is the finite support of the uncertain parameter together
with occurrence counts.  Observed data enter through :func:`load_csv` (one
scenario per row, counts all one) and become a genuine finite support only after
:func:`bin_scenarios`.  The likelihood-robust calibration turns a confidence level
``alpha`` into a likelihood threshold and from there into a Burg-entropy radius.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from ._numeric import fsum
from .errors import (
    ContractError,
    DegenerateSupportError,
    EmptyInputError,
    InfeasibleThresholdError,
    ParameterError,
    ParseError,
    SchemaError,
)

DEFAULT_COLUMNS = ("mach", "cl")


@dataclass(frozen=True)
class Scenario:
    values: tuple[float, ...]
    index: int

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ContractError("scenario needs at least one value")
        if not all(math.isfinite(v) for v in vals):
            raise ContractError(f"scenario {self.index} has non-finite values {vals}")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)


@dataclass(frozen=True)
class ScenarioSet:
    """Ordered support with positive integer occurrence counts."""

    scenarios: tuple[Scenario, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        scen = tuple(self.scenarios)
        counts = tuple(int(c) for c in self.counts)
        if len(scen) != len(counts):
            raise ContractError(f"{len(scen)} scenarios but {len(counts)} counts")
        if not scen:
            raise ContractError("scenario set is empty")
        if any(c < 1 for c in counts):
            raise ContractError(f"counts must be positive, got {counts}")
        dims = {s.dim for s in scen}
        if len(dims) != 1:
            raise ContractError(f"mixed scenario dimensions {sorted(dims)}")
        object.__setattr__(self, "scenarios", scen)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_values(cls, values: Iterable[Sequence[float]] | np.ndarray,
                    counts: Sequence[int] | None = None) -> "ScenarioSet":
        rows = np.atleast_2d(np.asarray(values, dtype=float))
        if rows.ndim == 2 and rows.shape[0] == 1 and np.ndim(values) == 1:
            rows = rows.T  # a flat list means one-dimensional scenarios
        scen = tuple(Scenario(tuple(r), i) for i, r in enumerate(rows.tolist()))
        return cls(scen, tuple(counts) if counts is not None else (1,) * len(scen))

    def __len__(self) -> int:
        return len(self.scenarios)

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def dim(self) -> int:
        return self.scenarios[0].dim

    @property
    def values(self) -> np.ndarray:
        """``(size, dim)`` array of scenario values."""
        return np.array([s.values for s in self.scenarios], dtype=float)


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Probability vector ``p`` on a scenario set; defaults to ``N_i / N``."""

    set: ScenarioSet
    p: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.p is None:
            total = self.set.total
            p = np.array([c / total for c in self.set.counts], dtype=float)
        else:
            p = np.array(self.p, dtype=float)
        if p.shape != (len(self.set),):
            raise ContractError(f"p has shape {p.shape}, expected ({len(self.set)},)")
        if np.any(~np.isfinite(p)) or np.any(p < 0):
            raise ContractError("p must be finite and nonnegative")
        if abs(fsum(p.tolist()) - 1.0) > 1e-12:
            raise ContractError(f"p sums to {fsum(p.tolist())!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def values(self) -> np.ndarray:
        return self.set.values

    def __len__(self) -> int:
        return len(self.set)

    def restrict(self, indices: Sequence[int]) -> "EmpiricalDistribution":
        """Empirical distribution of a drawn batch.

        The support is the distinct drawn indices in ascending order; weights are
        draw frequencies.  Scenarios keep their identity from the parent set.
        """
        idx = np.asarray(indices, dtype=int)
        if idx.size == 0:
            raise ContractError("empty batch")
        uniq, counts = np.unique(idx, return_counts=True)
        sub = ScenarioSet(tuple(self.set.scenarios[i] for i in uniq.tolist()),
                          tuple(counts.tolist()))
        return EmpiricalDistribution(sub)


@dataclass(frozen=True)
class BinningSpec:
    widths: tuple[float, ...]
    origins: tuple[float, ...] | None = None

    def __post_init__(self):
        widths = tuple(float(w) for w in np.atleast_1d(self.widths).tolist())
        if not widths or any(not (w > 0) or not math.isfinite(w) for w in widths):
            raise ParameterError(f"bin widths must be positive, got {widths}")
        origins = (0.0,) * len(widths) if self.origins is None else tuple(
            float(o) for o in np.atleast_1d(self.origins).tolist())
        if len(origins) != len(widths):
            raise ParameterError("origins and widths differ in length")
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "origins", origins)


def load_csv(source: IO[bytes] | IO[str], columns: Sequence[str] = DEFAULT_COLUMNS) -> ScenarioSet:
    """Read one scenario per data row from a headed, comma-separated stream."""
    raw = source.read()
    text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
    if text.startswith("﻿"):
        text = text[1:]
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    if header is None:
        raise EmptyInputError("no header row")
    header = [h.strip() for h in header]
    positions = []
    for name in columns:
        if name not in header:
            raise SchemaError(name)
        positions.append(header.index(name))

    rows = []
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        vals = []
        for name, pos in zip(columns, positions):
            cell = row[pos].strip() if pos < len(row) else ""
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(row_no, name, cell) from None
            if not math.isfinite(v):
                raise ParseError(row_no, name, cell)
            vals.append(v)
        rows.append(tuple(vals))
    if not rows:
        raise EmptyInputError("CSV has a header but no data rows")
    return ScenarioSet(tuple(Scenario(r, i) for i, r in enumerate(rows)), (1,) * len(rows))


def bin_scenarios(scenarios: ScenarioSet, spec: BinningSpec) -> ScenarioSet:
    """Merge scenarios sharing a grid cell; the merged value is the cell center.

    Cells are ``floor((v - origin) / width)`` per dimension.  Output order follows
    first appearance, so already-binned input comes back unchanged.
    """
    if len(spec.widths) == 1 and scenarios.dim > 1:
        spec = BinningSpec(spec.widths * scenarios.dim, spec.origins * scenarios.dim)
    if len(spec.widths) != scenarios.dim:
        raise ParameterError(
            f"binning has {len(spec.widths)} widths for {scenarios.dim}-dimensional scenarios")
    cells: dict[tuple[int, ...], int] = {}
    order: list[tuple[int, ...]] = []
    for scen, count in zip(scenarios.scenarios, scenarios.counts):
        key = tuple(math.floor((v - o) / w)
                    for v, o, w in zip(scen.values, spec.origins, spec.widths))
        if key not in cells:
            cells[key] = 0
            order.append(key)
        cells[key] += count
    merged = tuple(
        Scenario(tuple(o + (k + 0.5) * w for k, o, w in zip(key, spec.origins, spec.widths)), i)
        for i, key in enumerate(order))
    return ScenarioSet(merged, tuple(cells[key] for key in order))


def sample_batch(dist: EmpiricalDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` scenario indices i.i.d. with replacement according to ``dist.p``."""
    if int(n) != n or n < 1:
        raise ParameterError(f"batch size must be a positive integer, got {n!r}")
    return rng.choice(len(dist), size=int(n), replace=True, p=dist.p)


# -- chi-square quantile ----------------------------------------------------

_GAMMA_EPS = 1e-16
_GAMMA_MAX_ITER = 10_000


def regularized_lower_gamma(a: float, x: float) -> float:
    """P(a, x): series for ``x < a + 1``, Lentz continued fraction otherwise."""
    if a <= 0:
        raise ParameterError("shape must be positive")
    if x <= 0:
        return 0.0
    log_prefix = -x + a * math.log(x) - math.lgamma(a)
    if x < a + 1.0:
        term = total = 1.0 / a
        ap = a
        for _ in range(_GAMMA_MAX_ITER):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * _GAMMA_EPS:
                break
        return min(1.0, total * math.exp(log_prefix))
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    return max(0.0, 1.0 - math.exp(log_prefix) * h)


def chi_square_cdf(x: float, dof: int) -> float:
    return regularized_lower_gamma(dof / 2.0, x / 2.0)


def chi_square_quantile(dof: int, prob: float) -> float:
    """Quantile of the chi-square distribution by bisection on its CDF."""
    if int(dof) != dof or dof < 1:
        raise ParameterError(f"degrees of freedom must be a positive integer, got {dof!r}")
    if not 0.0 <= prob < 1.0:
        raise ParameterError(f"probability must lie in [0, 1), got {prob!r}")
    if prob == 0.0:
        return 0.0
    lo, hi = 0.0, dof + 10.0 * math.sqrt(2.0 * dof) + 50.0
    while chi_square_cdf(hi, dof) < prob:
        lo, hi = hi, 2.0 * hi
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if chi_square_cdf(mid, dof) < prob:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def max_log_likelihood(scenarios: ScenarioSet) -> float:
    """``sum_i N_i log(N_i / N)``, the log-likelihood of the empirical distribution."""
    total = scenarios.total
    return fsum(c * math.log(c / total) for c in scenarios.counts)


def likelihood_gamma_star(scenarios: ScenarioSet, alpha: float) -> float:
    """Likelihood threshold at confidence ``1 - alpha``.

    ``gamma* = sum_i N_i log(N_i/N) - chi2_{n-1, 1-alpha} / 2`` with ``n`` the
    support size.
    """
    if len(scenarios) < 2:
        raise DegenerateSupportError(
            f"likelihood calibration needs at least 2 scenarios, got {len(scenarios)}")
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha!r}")
    return max_log_likelihood(scenarios) - 0.5 * chi_square_quantile(len(scenarios) - 1, 1.0 - alpha)


def gamma_to_rho(scenarios: ScenarioSet, gamma: float) -> float:
    """Burg-entropy radius equivalent to a likelihood threshold."""
    top = max_log_likelihood(scenarios)
    if gamma > top + 1e-12 * max(1.0, abs(top)):
        raise InfeasibleThresholdError(
            f"gamma={gamma!r} exceeds the maximum log-likelihood {top!r}")
    return max(0.0, (top - gamma) / scenarios.total)
