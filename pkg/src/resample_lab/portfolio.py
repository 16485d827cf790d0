"""Rolling-window mean-variance portfolio rule.

Weights at time t are w_t = (1/gamma) * Sigma^{-1} (mu_hat_t - rf) with
mu_hat_t the trailing n-month average return; the realized out-of-sample
return for period t+1 is w_t' R_{t+1} (+ rf on the un-invested fraction).
Time indices in the public single-path API are 1-based, matching the
convention that the window at t covers {t-n+1, ..., t}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularCovariance, WindowOutOfRange

KNOWN = "known"
ROLLING_SAMPLE = "rolling_sample"
ROLLING_DIAGONAL = "rolling_diagonal"
_MODES = (KNOWN, ROLLING_SAMPLE, ROLLING_DIAGONAL)

# relative reciprocal-condition floor below which a covariance is singular
_RCOND_FLOOR = 1e-12


@dataclass(frozen=True)
class BacktestConfig:
    """Backtest settings: window length, risk aversion, covariance treatment."""

    n: int
    gamma: float
    rf: float = 0.0
    estimator_mode: str = ROLLING_SAMPLE
    known_covariance: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("window length n must be >= 1")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.estimator_mode not in _MODES:
            raise ValueError(f"estimator_mode must be one of {_MODES}")
        if self.estimator_mode == KNOWN:
            if self.known_covariance is None:
                raise ValueError("known mode requires known_covariance")
            cov = np.atleast_2d(np.asarray(self.known_covariance, dtype=float))
            if cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T):
                raise ValueError("known_covariance must be a symmetric matrix")
            try:
                np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise SingularCovariance("known_covariance is not positive definite")
            object.__setattr__(self, "known_covariance", cov)
        elif self.known_covariance is not None:
            raise ValueError("known_covariance is only valid in known mode")


def rolling_mean(path, t: int, n: int) -> np.ndarray:
    """Trailing n-month average return ending at 1-based time t."""
    R = path.returns
    if t < n or t > R.shape[0]:
        raise WindowOutOfRange(f"t = {t} does not leave an n = {n} window in T = {R.shape[0]}")
    return R[t - n:t].mean(axis=0)


def rolling_covariance(path, t: int, n: int, cfg: BacktestConfig) -> np.ndarray:
    """Covariance used by the rule at 1-based time t under the configured mode."""
    R = path.returns
    if cfg.estimator_mode == KNOWN:
        if t < n or t > R.shape[0]:
            raise WindowOutOfRange(f"t = {t} does not leave an n = {n} window")
        return cfg.known_covariance
    if n < 2:
        raise ValueError("sample covariance modes need n >= 2")
    if t < n or t > R.shape[0]:
        raise WindowOutOfRange(f"t = {t} does not leave an n = {n} window in T = {R.shape[0]}")
    window = R[t - n:t]
    cov = np.cov(window, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    if cfg.estimator_mode == ROLLING_DIAGONAL:
        cov = np.diag(np.diag(cov))
    _check_invertible(cov, t)
    return cov


def _check_invertible(cov, t=None):
    d = np.diag(cov)
    scale = float(np.max(d)) if cov.size else 0.0
    if scale <= 0 or not np.all(np.isfinite(cov)):
        raise SingularCovariance("covariance window is degenerate", t=t)
    try:
        c = np.linalg.cond(cov)
    except np.linalg.LinAlgError:
        raise SingularCovariance("covariance not invertible", t=t)
    if not np.isfinite(c) or c > 1 / _RCOND_FLOOR:
        raise SingularCovariance(f"covariance condition number {c:.3g} too large", t=t)


def mv_weights(mean, cov, gamma: float) -> np.ndarray:
    """Mean-variance weights w = (1/gamma) cov^{-1} mean (unconstrained)."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    _check_invertible(cov)
    try:
        w = np.linalg.solve(cov, mean) / gamma
    except np.linalg.LinAlgError:
        raise SingularCovariance("covariance not invertible")
    return w


def realized_returns(path, cfg: BacktestConfig) -> np.ndarray:
    """Out-of-sample realized returns of the rule along one path, length T - n.

    Element j is w_t' R_{t+1} for t = n + j (1-based): no look-ahead, the
    weight at t only sees {t-n+1, ..., t}.
    """
    X = path.returns[None, :, :]
    need = cfg.n + 1
    if X.shape[1] < need:
        raise WindowOutOfRange(f"need T > n = {cfg.n}, got T = {X.shape[1]}")
    return realized_panel(X, cfg)[0]


def realized_panel(X: np.ndarray, cfg: BacktestConfig) -> np.ndarray:
    """Vectorized realized returns for a (K, T, M) panel, returns (K, T - n).

    Used by the Monte Carlo layers; single paths go through
    :func:`realized_returns`.
    """
    if X.ndim == 2:
        X = X[:, :, None]
    K, T, M = X.shape
    n, gamma, rf = cfg.n, cfg.gamma, cfg.rf
    if T <= n:
        raise WindowOutOfRange(f"need T > n = {n}, got T = {T}")

    cs = np.cumsum(X, axis=1)
    zero = np.zeros((K, 1, M))
    S1 = cs[:, n - 1:-1, :] - np.concatenate([zero, cs[:, :-n - 1, :]], axis=1)
    mhat = S1 / n                       # forecast at t, aligned with X[:, n:, :]
    forecast = mhat - rf

    if cfg.estimator_mode == KNOWN:
        cov = cfg.known_covariance
        if cov.shape[0] != M:
            raise ValueError(f"known covariance is {cov.shape[0]}x{cov.shape[0]}, panel has M = {M}")
        w = np.linalg.solve(cov, forecast.reshape(-1, M).T).T.reshape(K, T - n, M) / gamma
    elif cfg.estimator_mode == ROLLING_DIAGONAL or (cfg.estimator_mode == ROLLING_SAMPLE and M == 1):
        if n < 2:
            raise ValueError("sample covariance modes need n >= 2")
        cs2 = np.cumsum(X * X, axis=1)
        S2 = cs2[:, n - 1:-1, :] - np.concatenate([zero, cs2[:, :-n - 1, :]], axis=1)
        vhat = (S2 - S1 * S1 / n) / (n - 1)
        bad = vhat <= _RCOND_FLOOR * np.maximum(S2 / n, _RCOND_FLOOR)
        if np.any(bad):
            k, t, _ = np.argwhere(bad)[0]
            raise SingularCovariance("constant window: zero sample variance", t=int(t) + n)
        w = forecast / (gamma * vhat)
    else:
        # full rolling sample covariance, M > 1: stacked solve per window
        if n < 2:
            raise ValueError("sample covariance modes need n >= 2")
        w = np.empty((K, T - n, M))
        for j in range(T - n):
            win = X[:, j:j + n, :]
            dev = win - mhat[:, j, None, :]
            cov = np.einsum("kim,kil->kml", dev, dev) / (n - 1)
            try:
                wj = np.linalg.solve(cov, forecast[:, j, :, None])[:, :, 0] / gamma
            except np.linalg.LinAlgError:
                wj = None
            if wj is None or not np.all(np.isfinite(wj)):
                for k in range(K):
                    _check_invertible(cov[k], t=j + n)
                raise SingularCovariance("covariance not invertible", t=j + n)
            w[:, j, :] = wj

    rp = np.einsum("ktm,ktm->kt", w, X[:, n:, :])
    if rf != 0.0:
        rp = rp + rf * (1.0 - w.sum(axis=2))
    return rp
