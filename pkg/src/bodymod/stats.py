"""Statistical machinery: OLS with HC4 robust standard errors, paired t-test,
Wilcoxon signed-rank (exact for small samples), one-way repeated-measures ANOVA,
and the Friedman test.

All p values are two-tailed and reported in [0, 1]. Distribution functions come
from scipy.stats; the test statistics themselves are computed here.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as spstats

WILCOXON_EXACT_LIMIT = 12   # exact enumeration up to this many nonzero differences


class StatsError(Exception):
    """Invalid input for a statistical procedure."""


@dataclass
class RegressionReport:
    coefficients: np.ndarray
    classical_se: np.ndarray
    robust_se: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    r_squared: float
    n: int
    rank: int

    def to_dict(self) -> dict:
        return {
            "method": "ols_hc4",
            "coef": self.coefficients.tolist(),
            "se": self.classical_se.tolist(),
            "robust_se": self.robust_se.tolist(),
            "stat": self.t_stats.tolist(),
            "p": self.p_values.tolist(),
            "r_squared": self.r_squared,
            "n": self.n,
            "df": self.n - self.rank,
        }


@dataclass
class TestReport:
    method: str
    statistic: float
    p_value: float
    n: int
    df: tuple[float, ...] = ()
    direction: int = 0          # sign of the effect (mean difference or rank sum)

    def to_dict(self) -> dict:
        d = {"method": self.method, "stat": self.statistic, "p": self.p_value, "n": self.n}
        if self.df:
            d["df"] = list(self.df)
        d["direction"] = self.direction
        return d


def report_to_json(report) -> str:
    return json.dumps(report.to_dict(), sort_keys=True)


def ols_hc4(x: np.ndarray, y: np.ndarray) -> RegressionReport:
    """OLS with HC4 heteroskedasticity-consistent standard errors.

    x is the full design matrix including its intercept column. The HC4 weights
    inflate squared residuals by (1 - h_i)^(-delta_i) with
    delta_i = min(4, h_i / mean(h)), which discounts high-leverage points.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.ndim != 2 or len(x) != len(y):
        raise StatsError("design/response shape mismatch")
    n, p = x.shape
    if n <= p:
        raise StatsError(f"need n > p, got n={n}, p={p}")
    if np.linalg.matrix_rank(x) < p:
        raise StatsError("design matrix is rank-deficient")

    xtx_inv = np.linalg.inv(x.T @ x)
    beta = xtx_inv @ (x.T @ y)
    resid = y - x @ beta
    df = n - p

    sigma2 = resid @ resid / df
    classical_cov = sigma2 * xtx_inv
    classical_se = np.sqrt(np.diag(classical_cov))

    h = np.einsum("ij,jk,ik->i", x, xtx_inv, x)
    delta = np.minimum(4.0, h / h.mean())
    omega = resid ** 2 / (1.0 - h) ** delta
    robust_cov = xtx_inv @ (x.T * omega) @ x @ xtx_inv
    robust_se = np.sqrt(np.diag(robust_cov))

    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = np.where(robust_se > 0, beta / robust_se, np.inf * np.sign(beta))
    t_stats = np.where(beta == 0, 0.0, t_stats)
    p_values = 2.0 * spstats.t.sf(np.abs(t_stats), df)
    p_values = np.clip(np.nan_to_num(p_values, nan=0.0), 0.0, 1.0)

    ss_tot = ((y - y.mean()) ** 2).sum()
    r_squared = 1.0 if ss_tot == 0 else 1.0 - (resid @ resid) / ss_tot
    r_squared = min(max(r_squared, 0.0), 1.0)
    return RegressionReport(coefficients=beta, classical_se=classical_se,
                            robust_se=robust_se, t_stats=t_stats,
                            p_values=p_values, r_squared=r_squared, n=n, rank=p)


def paired_t_test(a, b) -> TestReport:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise StatsError("paired samples must be equal-length vectors")
    n = len(a)
    if n < 2:
        raise StatsError("need at least 2 pairs")
    d = a - b
    sd = d.std(ddof=1)
    if sd == 0:
        raise StatsError("zero variance of differences")
    t = d.mean() / (sd / np.sqrt(n))
    p = min(1.0, 2.0 * float(spstats.t.sf(abs(t), n - 1)))
    return TestReport(method="paired_t", statistic=float(t), p_value=p, n=n,
                      df=(n - 1,), direction=int(np.sign(d.mean())))


def _signed_ranks(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Average ranks of |d| and the sign vector, zeros already dropped."""
    ranks = spstats.rankdata(np.abs(d))
    return ranks, np.sign(d)


def _wilcoxon_exact_tail(ranks: np.ndarray, w_plus: float) -> float:
    """Two-tailed exact p over all sign assignments of the given ranks.

    Counts assignments by dynamic programming over the achievable positive-rank
    sums (ranks are half-integers after tie averaging, so sums live on a 0.5
    grid).
    """
    m = len(ranks)
    units = np.rint(ranks * 2).astype(np.int64)   # integer grid
    total = units.sum()
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for u in units:
        counts[u:] += counts[:-u] if u > 0 else counts
    w_units = int(np.rint(w_plus * 2))
    lower = counts[: w_units + 1].sum() / counts.sum()
    upper = counts[w_units:].sum() / counts.sum()
    return min(1.0, 2.0 * min(lower, upper))


def wilcoxon_signed_rank(a, b, exact_limit: int = WILCOXON_EXACT_LIMIT) -> TestReport:
    """Two-tailed Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped; ties receive average ranks. Exact p (over all
    sign assignments) up to exact_limit nonzero differences, normal
    approximation with tie correction above.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise StatsError("paired samples must be equal-length vectors")
    d = a - b
    d = d[d != 0]
    m = len(d)
    if m == 0:
        raise StatsError("all differences are zero")
    ranks, signs = _signed_ranks(d)
    w_plus = float(ranks[signs > 0].sum())

    if m <= exact_limit:
        p = _wilcoxon_exact_tail(ranks, w_plus)
    else:
        mean = m * (m + 1) / 4.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        tie_term = float(((tie_counts ** 3 - tie_counts) / 48.0).sum())
        var = m * (m + 1) * (2 * m + 1) / 24.0 - tie_term
        z = (w_plus - mean) / np.sqrt(var)
        p = min(1.0, 2.0 * float(spstats.norm.sf(abs(z))))
    direction = int(np.sign(w_plus - m * (m + 1) / 4.0))
    return TestReport(method="wilcoxon_signed_rank", statistic=w_plus, p_value=p,
                      n=m, direction=direction)


def wilcoxon_enumeration_oracle(a, b) -> TestReport:
    """Brute-force reference: enumerates every one of the 2^m sign assignments."""
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    d = d[d != 0]
    m = len(d)
    if m == 0:
        raise StatsError("all differences are zero")
    ranks, signs = _signed_ranks(d)
    w_plus = float(ranks[signs > 0].sum())
    lower = upper = 0
    for assignment in itertools.product((0, 1), repeat=m):
        w = float(sum(r for r, s in zip(ranks, assignment) if s))
        if w <= w_plus + 1e-12:
            lower += 1
        if w >= w_plus - 1e-12:
            upper += 1
    total = 2 ** m
    p = min(1.0, 2.0 * min(lower / total, upper / total))
    return TestReport(method="wilcoxon_enumeration", statistic=w_plus, p_value=p,
                      n=m, direction=int(np.sign(w_plus - m * (m + 1) / 4.0)))


def _check_matrix(matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise StatsError("need a participants x conditions matrix")
    if m.shape[0] < 2 or m.shape[1] < 2:
        raise StatsError("need at least 2 participants and 2 conditions")
    if not np.isfinite(m).all():
        raise StatsError("missing or non-finite cells")
    return m


def rm_anova(matrix) -> TestReport:
    """One-way repeated-measures ANOVA (participants x conditions)."""
    m = _check_matrix(matrix)
    n, k = m.shape
    grand = m.mean()
    cond_means = m.mean(axis=0)
    subj_means = m.mean(axis=1)
    ss_cond = n * ((cond_means - grand) ** 2).sum()
    ss_subj = k * ((subj_means - grand) ** 2).sum()
    ss_total = ((m - grand) ** 2).sum()
    ss_error = ss_total - ss_cond - ss_subj
    df1, df2 = k - 1, (k - 1) * (n - 1)
    ms_cond = ss_cond / df1
    ms_error = ss_error / df2
    if ms_error <= 0:
        f = 0.0 if ms_cond == 0 else np.inf
    else:
        f = ms_cond / ms_error
    p = 1.0 if f == 0 else min(1.0, float(spstats.f.sf(f, df1, df2)))
    return TestReport(method="rm_anova", statistic=float(f), p_value=p, n=n,
                      df=(df1, df2))


def friedman(matrix) -> TestReport:
    """Friedman rank test (participants x conditions) with tie correction."""
    m = _check_matrix(matrix)
    n, k = m.shape
    ranks = np.apply_along_axis(spstats.rankdata, 1, m)
    col_sums = ranks.sum(axis=0)
    chi2 = 12.0 / (n * k * (k + 1)) * (col_sums ** 2).sum() - 3.0 * n * (k + 1)
    # tie correction over within-row tie groups
    tie_sum = 0.0
    for row in m:
        _, counts = np.unique(row, return_counts=True)
        tie_sum += float((counts ** 3 - counts).sum())
    correction = 1.0 - tie_sum / (n * k * (k ** 2 - 1))
    if correction <= 0:
        chi2 = 0.0   # every row fully tied: no information
    else:
        chi2 = chi2 / correction
    chi2 = max(chi2, 0.0)
    p = min(1.0, float(spstats.chi2.sf(chi2, k - 1))) if chi2 > 0 else 1.0
    return TestReport(method="friedman", statistic=float(chi2), p_value=p, n=n,
                      df=(k - 1,))
