"""OLS and LASSO window fits, penalty cross-validation and R-squared tools.

The LASSO objective is the unnormalized sum of squared residuals plus
lambda * ||beta||_1 over internally standardized columns, with an
unpenalized intercept; the soft-threshold therefore acts at lambda / 2 and
the smallest all-zero penalty is lambda_max = 2 * max_j |x_j' y_c|.
Internally the solver scales the objective by 1/n for grid transferability
across window sizes; the conversion factor is recorded on every fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from numba import njit
from scipy import stats


@dataclass
class DesignMatrix:
    """Feature matrix, target and column labels for one window fit."""

    x: np.ndarray
    y: np.ndarray
    labels: list[str]

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        if self.x.shape[0] == 1 and len(self.labels) == 1 and self.x.shape[1] > 1:
            self.x = self.x.T
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError("x and y row counts differ")
        if len(self.labels) != self.x.shape[1]:
            raise ValueError("labels do not match columns")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate column labels")
        if not (np.isfinite(self.x).all() and np.isfinite(self.y).all()):
            raise ValueError("design contains non-finite values")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass
class WindowFit:
    """Fitted coefficients and fit quality for one estimation window."""

    model: str
    labels: list[str]
    intercept: float
    beta: np.ndarray
    residuals: np.ndarray
    r2: float
    adj_r2: float
    lam: float | None = None          # penalty on the unnormalized loss scale
    lam_scale: float | None = None    # divide lam by this for the 1/n-scaled loss
    nnz: int = 0
    oos_r2: float = float("nan")
    meta: dict = field(default_factory=dict)

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return self.intercept + x @ self.beta


def _r2_pair(y: np.ndarray, resid: np.ndarray, p_eff: int) -> tuple[float, float]:
    n = y.shape[0]
    sst = float(((y - y.mean()) ** 2).sum())
    ssr = float((resid ** 2).sum())
    r2 = 1.0 - ssr / sst if sst > 0 else 0.0
    dof = n - p_eff - 1
    adj = 1.0 - (1.0 - r2) * (n - 1) / dof if dof > 0 else float("nan")
    return r2, adj


def ols_fit(dm: DesignMatrix, model: str = "ols") -> WindowFit:
    """Least squares with intercept; rank deficiency is an error.

    Collinear columns are named via QR with column pivoting.
    """
    n, p = dm.n, dm.p
    if n <= p + 1:
        raise ValueError(f"need n > p + 1 rows, got n={n}, p={p}")
    a = np.column_stack([np.ones(n), dm.x])
    _, r, piv = scipy.linalg.qr(a, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag.max() * max(a.shape) * np.finfo(np.float64).eps if diag.size else 0.0
    rank = int((diag > tol).sum())
    if rank < p + 1:
        bad = sorted(dm.labels[j - 1] for j in piv[rank:] if j > 0)
        raise ValueError(f"rank-deficient design; collinear columns: {', '.join(bad)}")
    coef, *_ = np.linalg.lstsq(a, dm.y, rcond=None)
    resid = dm.y - a @ coef
    r2, adj = _r2_pair(dm.y, resid, p)
    return WindowFit(
        model=model, labels=list(dm.labels),
        intercept=float(coef[0]), beta=coef[1:],
        residuals=resid, r2=r2, adj_r2=adj,
        nnz=int(np.count_nonzero(coef[1:])),
    )


@dataclass
class LassoConfig:
    """Penalty grid geometry, CV folds and solver controls.

    ``selection="1se"`` picks the largest penalty whose mean validation MSE
    is within one standard error of the minimum (the sparser model the data
    cannot distinguish from the best); ``"min"`` takes the raw argmin.
    """

    n_lambdas: int = 50
    lambda_min_ratio: float = 1e-4
    grid: np.ndarray | None = None
    folds: int = 5
    tol: float = 1e-8
    max_sweeps: int = 100_000
    selection: str = "1se"

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.selection not in ("1se", "min"):
            raise ValueError("selection must be '1se' or 'min'")
        if self.grid is not None:
            g = np.asarray(self.grid, dtype=np.float64)
            if (g < 0).any():
                raise ValueError("grid values must be >= 0")
            self.grid = g


def _standardize(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mu = x.mean(axis=0)
    sd = np.sqrt(((x - mu) ** 2).mean(axis=0))
    sd_safe = np.where(sd > 0, sd, 1.0)
    return (x - mu) / sd_safe, mu, sd_safe


def lasso_max_lambda(dm: DesignMatrix) -> float:
    """Smallest penalty for which the all-zero solution is optimal."""
    xs, _, _ = _standardize(dm.x)
    yc = dm.y - dm.y.mean()
    return float(2.0 * np.max(np.abs(xs.T @ yc))) if dm.p else 0.0


@njit(cache=True)
def _cd_kernel(gram, xty, lams, tol_abs, max_sweeps, betas):  # pragma: no cover
    p = gram.shape[0]
    b = np.zeros(p)
    gb = np.zeros(p)  # gram @ b, maintained incrementally
    for li in range(lams.shape[0]):
        half = lams[li] / 2.0
        converged = False
        for _ in range(max_sweeps):
            delta = 0.0
            for j in range(p):
                d = gram[j, j]
                if d <= 0.0:
                    continue
                rho = xty[j] - gb[j] + d * b[j]
                if rho > half:
                    bj = (rho - half) / d
                elif rho < -half:
                    bj = (rho + half) / d
                else:
                    bj = 0.0
                step = bj - b[j]
                if step != 0.0:
                    for i in range(p):
                        gb[i] += gram[i, j] * step
                    b[j] = bj
                    if abs(step) > delta:
                        delta = abs(step)
            if delta <= tol_abs:
                converged = True
                break
        if not converged:
            return li
        for j in range(p):
            betas[li, j] = b[j]
    return -1


def _cd_path(
    gram: np.ndarray,
    xty: np.ndarray,
    lams: np.ndarray,
    tol: float,
    max_sweeps: int,
    scale: float,
) -> np.ndarray:
    """Coordinate descent over a descending penalty path with warm starts.

    Works on Gram/correlation statistics of standardized columns, so one
    sweep costs O(p^2) regardless of the row count.  ``scale`` converts
    the convergence check to a size-free magnitude.
    """
    lams = np.ascontiguousarray(lams, dtype=np.float64)
    betas = np.zeros((lams.size, gram.shape[0]))
    failed = _cd_kernel(np.ascontiguousarray(gram), np.ascontiguousarray(xty),
                        lams, tol * scale, max_sweeps, betas)
    if failed >= 0:
        raise RuntimeError(
            f"coordinate descent did not converge at lambda={lams[failed]:.3e} "
            f"within {max_sweeps} sweeps"
        )
    return betas


def lasso_fit(dm: DesignMatrix, lam: float, cfg: LassoConfig | None = None,
              model: str = "lasso") -> WindowFit:
    """LASSO at a fixed penalty (paper loss scale), intercept unpenalized."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    cfg = cfg or LassoConfig()
    xs, mu, sd = _standardize(dm.x)
    yc = dm.y - dm.y.mean()
    gram = xs.T @ xs
    xty = xs.T @ yc
    scale = max(np.max(np.abs(xty)) / dm.n, np.finfo(float).tiny)
    b = _cd_path(gram, xty, np.array([lam]), cfg.tol, cfg.max_sweeps, scale)[0]
    beta = b / sd
    intercept = float(dm.y.mean() - beta @ mu)
    resid = dm.y - (intercept + dm.x @ beta)
    nnz = int(np.count_nonzero(b))
    r2, adj = _r2_pair(dm.y, resid, nnz)
    return WindowFit(
        model=model, labels=list(dm.labels),
        intercept=intercept, beta=beta, residuals=resid,
        r2=r2, adj_r2=adj, lam=float(lam), lam_scale=float(dm.n), nnz=nnz,
    )


def default_grid(lam_max: float, cfg: LassoConfig, n: int | None = None,
                 p: int | None = None) -> np.ndarray:
    if cfg.grid is not None:
        g = cfg.grid[cfg.grid > 0]
        return np.sort(g)[::-1]
    if lam_max <= 0:
        return np.array([1.0])
    # underdetermined fits have non-unique near-zero-penalty solutions that
    # coordinate descent crawls toward; keep the customary higher floor there
    ratio = cfg.lambda_min_ratio
    if n is not None and p is not None and p >= n:
        ratio = max(ratio, 1e-2)
    return lam_max * np.logspace(0, np.log10(ratio), cfg.n_lambdas)


def _forward_chain_splits(n: int, folds: int) -> list[tuple[slice, slice]]:
    """Train on the past, validate on the next contiguous block."""
    bounds = np.linspace(0, n, folds + 2, dtype=int)
    return [
        (slice(0, bounds[i]), slice(bounds[i], bounds[i + 1]))
        for i in range(1, folds + 1)
    ]


def lasso_cv(dm: DesignMatrix, cfg: LassoConfig | None = None,
             model: str = "lasso") -> tuple[float, WindowFit]:
    """Select the penalty by forward-chaining CV, then refit on all rows."""
    cfg = cfg or LassoConfig()
    if dm.n < cfg.folds:
        raise ValueError(f"need at least folds={cfg.folds} rows, got {dm.n}")
    lam_max = lasso_max_lambda(dm)
    grid = default_grid(lam_max, cfg, n=dm.n, p=dm.p)
    mse = np.zeros((cfg.folds, grid.size))
    for fi, (tr, va) in enumerate(_forward_chain_splits(dm.n, cfg.folds)):
        x_tr, y_tr = dm.x[tr], dm.y[tr]
        x_va, y_va = dm.x[va], dm.y[va]
        if x_tr.shape[0] < 8 or x_va.shape[0] < 1:
            mse[fi] = np.nan
            continue
        xs, mu, sd = _standardize(x_tr)
        yc = y_tr - y_tr.mean()
        gram = xs.T @ xs
        xty = xs.T @ yc
        scale = max(np.max(np.abs(xty)) / x_tr.shape[0], np.finfo(float).tiny)
        betas = _cd_path(gram, xty, grid, cfg.tol, cfg.max_sweeps, scale)
        for li in range(grid.size):
            beta = betas[li] / sd
            icpt = y_tr.mean() - beta @ mu
            pred = icpt + x_va @ beta
            mse[fi, li] = float(((y_va - pred) ** 2).mean())
    mean_mse = np.nanmean(mse, axis=0)
    flagged = False
    if not np.isfinite(mean_mse).any():
        best = 0
        flagged = True
    else:
        best = int(np.nanargmin(mean_mse))
        if cfg.selection == "1se":
            with np.errstate(invalid="ignore"):
                se = np.nanstd(mse[:, best], ddof=1) / np.sqrt(np.isfinite(mse[:, best]).sum())
            cutoff = mean_mse[best] + (se if np.isfinite(se) else 0.0)
            within = np.flatnonzero(mean_mse <= cutoff)
            best = int(within.min())    # grid is descending: smallest index = largest penalty
        if np.isclose(mean_mse, mean_mse[best]).all():
            best = 0
            flagged = True
    lam_star = float(grid[best])
    fit = lasso_fit(dm, lam_star, cfg, model=model)
    fit.meta["lam_max"] = lam_max
    fit.meta["cv_mse"] = mean_mse
    fit.meta["grid"] = grid
    if flagged:
        fit.meta["degenerate_cv"] = True
    return lam_star, fit


def oos_r2(y_oos: np.ndarray, y_hat: np.ndarray) -> float:
    """Out-of-sample R-squared centered on the out-of-sample mean."""
    y_oos = np.asarray(y_oos, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y_oos.shape[0] < 2:
        raise ValueError("need at least 2 out-of-sample rows")
    sst = float(((y_oos - y_oos.mean()) ** 2).sum())
    if sst == 0.0:
        return float("nan")
    return 1.0 - float(((y_oos - y_hat) ** 2).sum()) / sst


def delta_r2_test(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Mean R-squared increase (b - a) and one-sided paired t p-value.

    The null is "no increase"; with a degenerate (zero-variance)
    difference series, p is 1.0 when the mean increase is <= 0 and 0.0
    otherwise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.shape[0] < 2:
        raise ValueError("need equal-length series with at least 2 windows")
    d = b - a
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        return mean, 1.0 if mean <= 0 else 0.0
    t = mean / (sd / np.sqrt(d.shape[0]))
    return mean, float(stats.t.sf(t, d.shape[0] - 1))
