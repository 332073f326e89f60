"""Paired comparison of two volume series: mean difference, SEM, CI, t, p.

The Student-t machinery is self-contained: the CDF goes through the
regularized incomplete beta function (continued fraction), the quantile
inverts it by bisection. Sample statistics use the n-1 divisor.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import DataError

_BETACF_MAX_ITER = 300
_BETACF_TOL = 1e-14


@dataclass(frozen=True)
class PairedTestReport:
    """Columns of a paired two-tailed t-test over per-subject differences."""

    n: int
    mean_diff: float
    std_diff: float
    sem: float
    ci95: tuple
    t: float
    df: int
    p: float

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "mean_diff": self.mean_diff,
            "std_diff": self.std_diff,
            "sem": self.sem,
            "ci95_lower": self.ci95[0],
            "ci95_upper": self.ci95[1],
            "t": self.t,
            "df": self.df,
            "p": self.p,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)

    def text_row(self, label: str) -> str:
        """Fixed-column row: mu, std, SEM, 95% CI, t, df, two-tailed p."""
        return (
            f"{label:<20} {self.mean_diff:>9.1f} {self.std_diff:>8.1f} {self.sem:>7.1f} "
            f"({self.ci95[0]:>7.1f}, {self.ci95[1]:>7.1f}) {self.t:>6.1f} {self.df:>4d} "
            f"{format_p(self.p):>6}"
        )

    @staticmethod
    def text_header() -> str:
        return (
            f"{'Pair':<20} {'mu':>9} {'std.':>8} {'SEM':>7} "
            f"{'95% CI of mu diff.':>18} {'t':>6} {'df':>4} {'p(2t)':>6}"
        )


def format_p(p: float) -> str:
    """Three-decimal truncated p for reports (full precision stays internal)."""
    return f"{math.floor(p * 1000) / 1000:.3f}".lstrip("0") or "0"


# ---------------------------------------------------------------------------
# Student-t distribution


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_TOL:
            return h
    return h  # converged to working precision in practice well before the cap


def _reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: int) -> float:
    """Student-t cumulative distribution function."""
    if df < 1:
        raise DataError("degrees of freedom must be >= 1")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * _reg_inc_beta(df / 2.0, 0.5, x)
    return 1.0 - tail if t > 0 else tail


def t_quantile(p: float, df: int) -> float:
    """Inverse t CDF by bisection; |t_cdf(result) - p| < 1e-10."""
    if not (0.0 < p < 1.0):
        raise DataError("p must lie strictly inside (0, 1)")
    if df < 1:
        raise DataError("degrees of freedom must be >= 1")
    if p == 0.5:
        return 0.0
    lo, hi = -1.0, 1.0
    while t_cdf(lo, df) > p:
        lo *= 2.0
        if lo < -1e12:
            break
    while t_cdf(hi, df) < p:
        hi *= 2.0
        if hi > 1e12:
            break
    mid = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
        # bisect to a tight bracket in t itself: stopping on the CDF error
        # alone loses precision far in the tails where the density is tiny
        if hi - lo < 1e-12 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Summaries and the paired test


def summary(values) -> tuple[float, float]:
    """(mean, sample std with divisor n-1) of a value list."""
    vals = [float(v) for v in values]
    n = len(vals)
    if n < 2:
        raise DataError("need at least 2 values")
    mean = sum(vals) / n
    var = sum((v - mean) ** 2 for v in vals) / (n - 1)
    return mean, math.sqrt(var)


def report_from_moments(mean_diff: float, std_diff: float, n: int) -> PairedTestReport:
    """Build the full report from the difference series' mean, std and n."""
    if n < 2:
        raise DataError("need at least 2 pairs")
    df = n - 1
    if std_diff == 0.0:
        return PairedTestReport(n, mean_diff, 0.0, 0.0, (mean_diff, mean_diff), 0.0, df, 1.0)
    sem = std_diff / math.sqrt(n)
    t = mean_diff / sem
    t_crit = t_quantile(0.975, df)
    ci = (mean_diff - t_crit * sem, mean_diff + t_crit * sem)
    p = 2.0 * (1.0 - t_cdf(abs(t), df))
    return PairedTestReport(n, mean_diff, std_diff, sem, ci, t, df, min(max(p, 0.0), 1.0))


def paired_t_test(a, b) -> PairedTestReport:
    """Two-tailed paired t-test on the per-index differences a_i - b_i."""
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    if len(a) != len(b):
        raise DataError(f"series lengths differ: {len(a)} vs {len(b)}")
    if len(a) < 2:
        raise DataError("need at least 2 pairs")
    diffs = [x - y for x, y in zip(a, b)]
    mean_diff, std_diff = summary(diffs)
    return report_from_moments(mean_diff, std_diff, len(diffs))
