"""Closed-form bandwidth bounds, ratio tables, bad-pattern census and MTTF.

Units: failure rates are per year, transfer rates in bytes per second, node
capacities in bytes. MTTF values are returned in years.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from regencore.codes import CodeSpec
from regencore.recovery import FailurePattern, PatternClass, classify_pattern

SECONDS_PER_YEAR = 365 * 24 * 3600
DEFAULT_CENSUS_BUDGET = 10**6


@dataclass
class Table:
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)

    def to_table(self) -> Table:
        return self

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]


def _exact(value: Fraction):
    return value.numerator if value.denominator == 1 else value


def bandwidth_lower_bound(n: int, k: int, t: int, M: int, d: int | None = None):
    """Minimum bytes per stripe needed to rebuild ``t`` failed nodes.

    ``d`` is the number of survivors contacted; the default ``n - t`` is the
    minimizing choice. Returns an int when the bound is integral, otherwise a
    :class:`~fractions.Fraction`.
    """
    if not 1 <= t <= n - k:
        raise ValueError(f"t must lie in [1, {n - k}], got {t}")
    if t >= k:
        return M
    if d is None:
        d = n - t
    if not k - t < d <= n - t:
        raise ValueError(f"d must lie in ({k - t}, {n - t}], got {d}")
    return _exact(Fraction(M * d * t, k * (d - k + t)))


def good_ratio(n: int, k: int, t: int) -> Fraction:
    return min(Fraction(t * (n - t), k * (n - k)), Fraction(1))


def bad_ratio(n: int, k: int, t: int) -> Fraction:
    """A bad t-pattern costs as much as a good (t+1)-pattern."""
    if t + 1 > n - k:
        return Fraction(1)
    return good_ratio(n, k, t + 1)


def bandwidth_ratio_table(n: int, k: int) -> Table:
    """CORE-to-conventional bandwidth ratio for every t in [1, n - k]."""
    if n != 2 * k:
        raise ValueError(f"ratio tables assume n = 2k, got n={n}, k={k}")
    table = Table(["t", "good_ratio", "good_ratio_exact", "bad_ratio", "bad_ratio_exact"])
    for t in range(1, n - k + 1):
        good = good_ratio(n, k, t)
        # single failures are never bad
        bad = bad_ratio(n, k, t) if t > 1 else None
        table.rows.append((t, good, str(good), bad, "" if bad is None else str(bad)))
    return table


@dataclass
class CensusReport:
    n: int
    k: int
    t: int
    total: int
    examined: int
    bad_count: int
    sampled: bool = False
    ci_low: float | None = None
    ci_high: float | None = None
    bad_patterns: list[tuple[int, ...]] = field(default_factory=list, repr=False)

    @property
    def bad_fraction(self) -> float:
        return self.bad_count / self.examined if self.examined else 0.0

    def to_table(self) -> Table:
        return census_table([self])


class CensusBudgetError(RuntimeError):
    pass


def _wilson(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def census(spec: CodeSpec, t: int, budget: int = DEFAULT_CENSUS_BUDGET,
           sample: int | None = None, seed: int = 0) -> CensusReport:
    """Classify every t-failure pattern of ``spec`` (or a seeded sample)."""
    if not 1 <= t <= spec.n - spec.k:
        raise ValueError(f"t must lie in [1, {spec.n - spec.k}], got {t}")
    total = math.comb(spec.n, t)
    if sample is None:
        if total > budget:
            raise CensusBudgetError(
                f"C({spec.n},{t}) = {total} patterns exceeds the budget of {budget}; "
                "pass a sample size to estimate the fraction instead"
            )
        patterns = itertools.combinations(range(spec.n), t)
        examined = total
    else:
        rng = np.random.default_rng(seed)
        patterns = (tuple(sorted(rng.choice(spec.n, size=t, replace=False).tolist()))
                    for _ in range(sample))
        examined = sample
    bad = [p for p in patterns
           if classify_pattern(spec, FailurePattern(p)) is PatternClass.BAD]
    report = CensusReport(spec.n, spec.k, t, total, examined, len(bad),
                          bad_patterns=sorted(set(bad)))
    if sample is not None:
        report.sampled = True
        report.ci_low, report.ci_high = _wilson(len(bad), sample)
    return report


def census_table(reports) -> Table:
    table = Table(["n", "k", "t", "total", "examined", "bad_count", "bad_fraction",
                   "sampled", "ci_low", "ci_high"])
    # ratios go in as fractions so they print at fixed precision
    for rep in reports:
        ci = [None if x is None else Fraction(x) for x in (rep.ci_low, rep.ci_high)]
        table.rows.append((rep.n, rep.k, rep.t, rep.total, rep.examined, rep.bad_count,
                           Fraction(rep.bad_count, rep.examined or 1), rep.sampled, *ci))
    return table


@dataclass(frozen=True)
class MarkovParams:
    n: int
    k: int
    lam: float  # node failure rate, 1/years
    B: float  # transfer rate, bytes/second
    S: float  # node capacity, bytes
    scheme: str = "core"

    def __post_init__(self):
        if not 1 <= self.k < self.n:
            raise ValueError(f"need 1 <= k < n, got n={self.n}, k={self.k}")
        if min(self.lam, self.B, self.S) <= 0:
            raise ValueError("failure rate, transfer rate and capacity must be positive")
        if self.scheme not in ("core", "conventional"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    def repair_rate(self, t: int) -> Fraction:
        """Rate (per year) of returning from state t to state 0."""
        n, k = self.n, self.k
        B = Fraction(self.B) * SECONDS_PER_YEAR
        S = Fraction(self.S)
        if self.scheme == "core" and t < k:
            return (n - k) * B / (t * (n - t) * S)
        return B / (k * S)

    def failure_rate(self, t: int) -> Fraction:
        return (self.n - t) * Fraction(self.lam)

    def with_scheme(self, scheme: str) -> MarkovParams:
        return MarkovParams(self.n, self.k, self.lam, self.B, self.S, scheme)


def transition_rates(params: MarkovParams) -> list[list[Fraction]]:
    """Off-diagonal rates between states 0..n-k+1; the last state absorbs."""
    m = params.n - params.k
    size = m + 2
    rates = [[Fraction(0)] * size for _ in range(size)]
    for t in range(m + 1):
        rates[t][t + 1] = params.failure_rate(t)
        if t >= 1:
            rates[t][0] += params.repair_rate(t)
    return rates


def _solve_exact(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    n = len(a)
    rows = [row[:] + [rhs] for row, rhs in zip(a, b)]
    for c in range(n):
        p = next(i for i in range(c, n) if rows[i][c] != 0)
        rows[c], rows[p] = rows[p], rows[c]
        piv = rows[c][c]
        rows[c] = [v / piv for v in rows[c]]
        for i in range(n):
            if i != c and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [v - f * w for v, w in zip(rows[i], rows[c])]
    return [row[n] for row in rows]


def mttf_exact(params: MarkovParams) -> Fraction:
    """Expected time (years) from state 0 to absorption, as an exact fraction."""
    rates = transition_rates(params)
    transient = len(rates) - 1
    # first-step analysis: q_i T_i - sum_j rate_ij T_j = 1, with T_absorbing = 0
    a = [[Fraction(0)] * transient for _ in range(transient)]
    for i in range(transient):
        a[i][i] = sum(rates[i], Fraction(0))
        for j in range(transient):
            if j != i:
                a[i][j] -= rates[i][j]
    times = _solve_exact(a, [Fraction(1)] * transient)
    return times[0]


def mttf(params: MarkovParams) -> float:
    return float(mttf_exact(params))


def mttf_monte_carlo(params: MarkovParams, trials: int, seed: int = 0,
                     max_steps: int = 10**7) -> tuple[float, float]:
    """Simulated mean time to absorption and its standard error, in years."""
    if trials < 1:
        raise ValueError("need at least one trial")
    rates = np.array([[float(x) for x in row] for row in transition_rates(params)])
    absorbing = len(rates) - 1
    out_rate = rates.sum(axis=1)
    up = np.array([rates[s, s + 1] if s < absorbing else 0.0 for s in range(len(rates))])
    p_up = np.divide(up, out_rate, out=np.zeros_like(up), where=out_rate > 0)

    rng = np.random.default_rng(seed)
    state = np.zeros(trials, dtype=np.int64)
    elapsed = np.zeros(trials)
    active = np.arange(trials)
    steps = 0
    while active.size:
        s = state[active]
        elapsed[active] += rng.exponential(1.0 / out_rate[s])
        go_up = rng.random(active.size) < p_up[s]
        state[active] = np.where(go_up, s + 1, 0)
        active = active[state[active] != absorbing]
        steps += 1
        if steps > max_steps:
            raise RuntimeError("simulation did not absorb; rates make MTTF too large to simulate")
    return float(elapsed.mean()), float(elapsed.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0


def mttf_sweep(n: int, k: int, vary: str, values, lam: float = 0.25,
               B: float = 1e9 / 8, S: float = 1e12) -> Table:
    """MTTF of CORE and conventional recovery while one parameter varies."""
    if vary not in ("bandwidth", "lambda", "capacity"):
        raise ValueError(f"cannot vary {vary!r}")
    unit = {"bandwidth": "bytes_per_s", "lambda": "per_year", "capacity": "bytes"}[vary]
    table = Table([f"{vary}_{unit}", "mttf_core_years", "mttf_conventional_years", "ratio"])
    for v in values:
        kw = {"lam": lam, "B": B, "S": S}
        kw[{"bandwidth": "B", "lambda": "lam", "capacity": "S"}[vary]] = v
        core = mttf_exact(MarkovParams(n, k, scheme="core", **kw))
        conv = mttf_exact(MarkovParams(n, k, scheme="conventional", **kw))
        table.rows.append((v, float(core), float(conv), core / conv))
    return table


def format_cell(value):
    if value is None:
        return ""
    if isinstance(value, Fraction):
        return f"{float(value):.4f}"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(table, path) -> Path:
    """Write a headered CSV; I/O errors are re-raised naming the path."""
    table = table.to_table()
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(table.columns)
            for row in table.rows:
                writer.writerow([format_cell(v) for v in row])
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write CSV to {path}: {exc.strerror}") from exc
    return path
