"""PCA over multi-level OFI samples, integrated OFI, and the common-factor
decomposition of cross-sectional best-level OFIs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class PcaResult:
    """Eigen-decomposition of the centered sample covariance.

    ``components[k]`` is the k-th principal vector (unit l2 norm), sorted by
    descending eigenvalue.  Signs are fixed so each vector's entries sum to
    a nonnegative value (first nonzero entry positive on an exact-zero sum),
    which makes downstream projections deterministic.
    """

    mean: np.ndarray
    cov: np.ndarray
    components: np.ndarray    # (p, p), rows are principal vectors
    eigenvalues: np.ndarray   # descending, clipped at 0
    ratios: np.ndarray        # explained-variance ratios; NaN on zero trace
    degenerate: bool


def fit_pca(samples: np.ndarray) -> PcaResult:
    """PCA of an n x p sample matrix via the (n-1)-denominator covariance."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need an n x p matrix with n >= 2")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (x.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    comps = evecs[:, order].T
    for k in range(comps.shape[0]):
        s = comps[k].sum()
        if s < 0 or (s == 0 and comps[k][np.flatnonzero(comps[k])[0]] < 0 if comps[k].any() else False):
            comps[k] = -comps[k]
    trace = float(evals.sum())
    degenerate = trace <= 0
    ratios = evals / trace if not degenerate else np.full(evals.shape, np.nan)
    return PcaResult(mean=mean, cov=cov, components=comps,
                     eigenvalues=evals, ratios=ratios, degenerate=degenerate)


def integrated_ofi(w1: np.ndarray, ofi_vec: np.ndarray) -> float | np.ndarray:
    """Project a multi-level OFI vector onto w1, normalized by ||w1||_1.

    ``ofi_vec`` may be a single length-M vector or an (n, M) block; w1 must
    come from a window strictly preceding the vector's bucket.
    """
    w1 = np.asarray(w1, dtype=np.float64)
    l1 = float(np.abs(w1).sum())
    if l1 <= 0:
        raise ValueError("zero first principal vector")
    out = np.asarray(ofi_vec, dtype=np.float64) @ (w1 / l1)
    return float(out) if out.ndim == 0 else out


@dataclass
class CommonFactorFit:
    """First-PC factor of cross-sectional OFIs plus per-stock OLS loadings."""

    factor: np.ndarray       # (T,) factor score series
    mu: np.ndarray           # (N,) per-stock intercepts
    gamma: np.ndarray        # (N,) per-stock loadings
    residuals: np.ndarray    # (N, T) idiosyncratic components
    weights: np.ndarray      # (N,) first principal vector over stocks
    mean: np.ndarray         # (N,) cross-sectional means used for centering

    def transform(self, panel: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Factor scores and residuals for a new stocks x buckets block."""
        x = np.asarray(panel, dtype=np.float64)
        f = (x - self.mean[:, None]).T @ self.weights
        resid = x - (self.mu[:, None] + np.outer(self.gamma, f))
        return f, resid


def common_factor_decompose(panel: np.ndarray) -> CommonFactorFit:
    """Split a stocks x buckets OFI matrix into common factor and residuals.

    The factor is the first principal component score series of the
    cross-section; each stock's series is then OLS-regressed on it, so the
    residuals have zero mean and zero sample covariance with the factor.
    """
    x = np.asarray(panel, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 3:
        raise ValueError("need >= 2 stocks and >= 3 buckets")
    pca = fit_pca(x.T)
    if pca.degenerate:
        raise ValueError("degenerate panel: no cross-sectional variation")
    w1 = pca.components[0]
    f = (x - pca.mean[:, None]).T @ w1
    var_f = float(((f - f.mean()) ** 2).sum())
    if var_f <= 0:
        raise ValueError("degenerate factor series")
    fc = f - f.mean()
    gamma = (x - x.mean(axis=1, keepdims=True)) @ fc / var_f
    mu = x.mean(axis=1) - gamma * f.mean()
    resid = x - (mu[:, None] + np.outer(gamma, f))
    return CommonFactorFit(factor=f, mu=mu, gamma=gamma, residuals=resid,
                           weights=w1, mean=pca.mean)
