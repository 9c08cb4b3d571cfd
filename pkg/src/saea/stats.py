"""Statistics for cost characterization and surrogate analysis.

Log-normal fitting with a histogram goodness-of-fit, accuracy metrics,
rank-based tests, least-squares fits and the energy break-even point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

N_BINS = 50


@dataclass(frozen=True)
class LogNormalFit:
    mu: float
    sigma: float
    mean_E: float
    sd_SD: float
    nmse: float
    bins: int = N_BINS


@dataclass(frozen=True)
class KruskalResult:
    H: float
    df: int
    p_value: float


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    rmse: float
    pearson_rho: float


@dataclass(frozen=True)
class CostModel:
    """Second-order cost model in (n_p, n_t) plus the reduced refit.

    ``full`` maps a1..a6 to coefficients of n_p^2, n_t^2, n_p*n_t, n_p, n_t, 1.
    ``reduced`` maps a2, a3, a5, a6 (the primed coefficients) likewise.
    """

    full: dict
    full_p_values: dict
    reduced: dict
    reduced_p_values: dict
    target: str = "energy"

    def predict(self, n_p, n_t, reduced: bool = True):
        n_p = np.asarray(n_p, dtype=float)
        n_t = np.asarray(n_t, dtype=float)
        c = self.reduced if reduced else self.full
        y = c["a2"] * n_t ** 2 + c["a3"] * n_p * n_t + c["a5"] * n_t + c["a6"]
        if not reduced:
            y = y + c["a1"] * n_p ** 2 + c["a4"] * n_p
        return y


@dataclass(frozen=True)
class BreakEven:
    e_train_small: float
    e_use_small: float
    e_train_large: float
    e_use_large: float
    n_breakeven: float


def lognormal_pdf(x, mu: float, sigma: float):
    x = np.asarray(x, dtype=float)
    return np.exp(-((np.log(x) - mu) ** 2) / (2 * sigma ** 2)) / (x * sigma * math.sqrt(2 * math.pi))


def nmse(observed, model) -> float:
    obs = np.asarray(observed, dtype=float)
    mod = np.asarray(model, dtype=float)
    if obs.shape != mod.shape:
        raise ValueError("observed and model densities differ in length")
    denom = float(np.sum(obs ** 2))
    if denom == 0:
        raise ValueError("observed density is all zero")
    return float(np.sum((obs - mod) ** 2) / denom)


def fit_lognormal(samples, bins: int = N_BINS) -> LogNormalFit:
    """Fit a log-normal by the moments of ln(samples) (MLE, 1/n variance).

    Goodness of fit compares an equal-width histogram density over
    [min, max] with the fitted pdf at the bin centers. A degenerate sample
    (all values equal) is a point mass and gets NMSE 0.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("need at least two samples")
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("log-normal samples must be finite and positive")
    logs = np.log(x)
    lo, hi = float(x.min()), float(x.max())
    mu = float(logs.mean())
    # a constant sample would otherwise leave a rounding-level sigma
    sigma = 0.0 if lo == hi else float(logs.std())
    mean_e = math.exp(mu + sigma ** 2 / 2)
    sd = math.sqrt((math.exp(sigma ** 2) - 1) * math.exp(2 * mu + sigma ** 2))
    if sigma == 0 or lo == hi:
        err = 0.0
    else:
        counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
        width = edges[1] - edges[0]
        density = counts / (x.size * width)
        centers = 0.5 * (edges[:-1] + edges[1:])
        err = nmse(density, lognormal_pdf(centers, mu, sigma))
    return LogNormalFit(mu, sigma, mean_e, sd, err, bins)


def mape(actual, predicted) -> float:
    y = np.asarray(actual, dtype=float)
    yhat = np.asarray(predicted, dtype=float)
    if y.shape != yhat.shape:
        raise ValueError("actual and predicted differ in length")
    if y.size == 0:
        raise ValueError("empty input")
    if np.any(y == 0):
        raise ValueError("MAPE is undefined when an actual value is 0")
    return float(np.mean(np.abs((yhat - y) / y)) * 100.0)


def rankdata(values) -> np.ndarray:
    """Ranks starting at 1 with ties given their average rank."""
    a = np.asarray(values, dtype=float)
    order = np.argsort(a, kind="mergesort")
    ranks = np.empty(a.size, dtype=float)
    sorted_a = a[order]
    i = 0
    n = a.size
    while i < n:
        j = i
        while j + 1 < n and sorted_a[j + 1] == sorted_a[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _tie_term(values) -> float:
    _, counts = np.unique(np.asarray(values, dtype=float), return_counts=True)
    return float(np.sum(counts.astype(float) ** 3 - counts))


def chi2_sf(x: float, df: int) -> float:
    if x <= 0:
        return 1.0
    return float(special.gammaincc(df / 2.0, x / 2.0))


def kruskal_wallis(groups) -> KruskalResult:
    groups = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(groups) < 2:
        raise ValueError("Kruskal-Wallis needs at least two groups")
    if any(g.size == 0 for g in groups):
        raise ValueError("every group must be nonempty")
    pooled = np.concatenate(groups)
    n = pooled.size
    ranks = rankdata(pooled)
    h = 0.0
    start = 0
    for g in groups:
        r = ranks[start:start + g.size]
        start += g.size
        h += r.sum() ** 2 / g.size
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    correction = 1.0 - _tie_term(pooled) / (n ** 3 - n) if n > 1 else 0.0
    df = len(groups) - 1
    if correction <= 0:
        return KruskalResult(0.0, df, 1.0)
    h = max(h / correction, 0.0)
    return KruskalResult(h, df, chi2_sf(h, df))


def mann_whitney_less(a, b) -> float:
    """One-sided p-value that ``a`` is stochastically lower than ``b``.

    Normal approximation of U with tie-corrected variance and a 0.5
    continuity correction.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    na, nb = a.size, b.size
    if na == 0 or nb == 0:
        raise ValueError("both samples must be nonempty")
    pooled = np.concatenate([a, b])
    n = na + nb
    ranks = rankdata(pooled)
    u_a = ranks[:na].sum() - na * (na + 1) / 2.0
    mean = na * nb / 2.0
    var = na * nb / 12.0 * ((n + 1) - _tie_term(pooled) / (n * (n - 1)))
    if var <= 0:
        return 1.0
    z = (u_a - mean + 0.5) / math.sqrt(var)
    return float(special.ndtr(z))


def pairwise_posthoc(groups, alpha: float = 0.01) -> np.ndarray:
    """k x k boolean matrix; cell (i, j) is True when group i is significantly lower than j."""
    if len(groups) < 2:
        raise ValueError("post-hoc comparison needs at least two groups")
    k = len(groups)
    out = np.zeros((k, k), dtype=bool)
    for i in range(k):
        for j in range(k):
            if i != j:
                out[i, j] = mann_whitney_less(groups[i], groups[j]) < alpha
    return out


def linear_fit(x, y) -> LinearFit:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError("x and y differ in length")
    if x.size < 2:
        raise ValueError("need at least two points")
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx == 0:
        raise ValueError("x is constant; slope undefined")
    dy = y - y.mean()
    slope = float(dx @ dy) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (slope * x + intercept)
    rmse = float(math.sqrt(np.mean(resid ** 2)))
    syy = float(dy @ dy)
    rho = float(dx @ dy) / math.sqrt(sxx * syy) if syy > 0 else 0.0
    return LinearFit(slope, intercept, rmse, rho)


_FULL_TERMS = ("a1", "a2", "a3", "a4", "a5", "a6")
_REDUCED_TERMS = ("a2", "a3", "a5", "a6")


def _ols(design: np.ndarray, y: np.ndarray, names) -> tuple[dict, dict]:
    from scipy import stats as sps

    n, k = design.shape
    rank = np.linalg.matrix_rank(design)
    if rank < k:
        raise ValueError(
            f"rank-deficient design ({rank} < {k} columns); need more distinct (n_p, n_t) points"
        )
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    dof = n - k
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(design.T @ design)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    pvals = {}
    for name, c, s in zip(names, coef, se):
        if s > 0:
            pvals[name] = float(2 * sps.t.sf(abs(c / s), dof))
        else:
            # exact fit: a zero coefficient carries no evidence, any other is certain
            pvals[name] = 1.0 if abs(c) < 1e-12 * max(1.0, float(np.abs(y).max())) else 0.0
    coefs = {name: float(c) for name, c in zip(names, coef)}
    return coefs, pvals


def fit_cost_model(points, target: str = "energy") -> CostModel:
    """OLS of y on all second-order terms of (n_p, n_t), then the reduced model.

    ``points`` is an iterable of (n_p, n_t, y) triples. Columns are scaled
    internally for conditioning; coefficients are reported in original units.
    """
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("points must be (n_p, n_t, y) triples")
    if pts.shape[0] < 7:
        raise ValueError("need at least 7 points to fit the 6-coefficient model")
    n_p, n_t, y = pts.T
    sp = max(float(np.abs(n_p).max()), 1.0)
    st = max(float(np.abs(n_t).max()), 1.0)
    p, t = n_p / sp, n_t / st
    ones = np.ones_like(p)
    full_design = np.column_stack([p ** 2, t ** 2, p * t, p, t, ones])
    full_scale = np.array([sp ** 2, st ** 2, sp * st, sp, st, 1.0])
    red_design = np.column_stack([t ** 2, p * t, t, ones])
    red_scale = np.array([st ** 2, sp * st, st, 1.0])

    full_c, full_p = _ols(full_design, y, _FULL_TERMS)
    red_c, red_p = _ols(red_design, y, _REDUCED_TERMS)
    full_c = {k: v / s for (k, v), s in zip(full_c.items(), full_scale)}
    red_c = {k: v / s for (k, v), s in zip(red_c.items(), red_scale)}
    return CostModel(full_c, full_p, red_c, red_p, target)


def break_even(e_train_small: float, e_use_small: float, e_train_large: float, e_use_large: float) -> float:
    """Number of surrogate uses after which the large-dataset model is cheaper overall."""
    denom = e_use_small - e_use_large
    if not denom > 0:
        raise ValueError("large-dataset surrogate never pays off: per-use energy is not lower")
    return (e_train_large - e_train_small) / denom


def break_even_report(e_train_small, e_use_small, e_train_large, e_use_large) -> BreakEven:
    n = break_even(e_train_small, e_use_small, e_train_large, e_use_large)
    return BreakEven(e_train_small, e_use_small, e_train_large, e_use_large, n)
