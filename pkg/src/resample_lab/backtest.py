"""Backtest statistics, resampling schemes, bagging, and sample-size utilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .dgp import SamplePath
from .errors import DegenerateSeries, InvalidProbability
from .portfolio import BacktestConfig, realized_panel, realized_returns
from .seeding import BOOTSTRAP, RESAMPLE, child_rng

IDENTITY = "identity"
IID_SHUFFLE = "iid_shuffle"
BLOCK = "block"
BLOCK_SHUFFLE = "block_shuffle"
IID_SURROGATE = "iid_surrogate"
_KINDS = (IDENTITY, IID_SHUFFLE, BLOCK, BLOCK_SHUFFLE, IID_SURROGATE)


@dataclass(frozen=True)
class MomentSummary:
    """Sample mean, variance (divisor N-1) and Sharpe ratio of a return series."""

    mu_p: float
    sigma2_p: float
    sharpe: float
    count: int


@dataclass(frozen=True)
class ResampleScheme:
    """How a path is resampled before backtesting.

    identity       leave the path unchanged
    iid_shuffle    permute rows without repetition
    block          circular moving-block bootstrap, with replacement
    block_shuffle  permute disjoint blocks of b consecutive rows
    iid_surrogate  fresh IID Gaussian draws with each asset's unconditional
                   moments (the idealized target the closed forms describe)
    """

    kind: str
    b: int = 1

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.b < 1:
            raise ValueError("block length b must be >= 1")

    @property
    def tag(self) -> str:
        if self.kind in (BLOCK, BLOCK_SHUFFLE):
            return f"{self.kind}({self.b})"
        return self.kind


def identity_scheme() -> ResampleScheme:
    return ResampleScheme(IDENTITY)


def iid_shuffle() -> ResampleScheme:
    return ResampleScheme(IID_SHUFFLE)


def block(b: int) -> ResampleScheme:
    return ResampleScheme(BLOCK, b)


def block_shuffle(b: int) -> ResampleScheme:
    return ResampleScheme(BLOCK_SHUFFLE, b)


def iid_surrogate() -> ResampleScheme:
    return ResampleScheme(IID_SURROGATE)


@dataclass(frozen=True)
class BaggingReport:
    """Variance decomposition of bag-averaged Sharpe estimates."""

    mean_sharpe: float
    var_single: float
    var_bagged: float
    rho: float
    bags: int
    replications: int


def sharpe_moments(series) -> MomentSummary:
    """Sample moments and Sharpe ratio of a realized-return series."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need a 1-d series of length >= 2")
    mu = float(x.mean())
    var = float(x.var(ddof=1))
    if var <= 0:
        raise DegenerateSeries("series has zero variance")
    return MomentSummary(mu_p=mu, sigma2_p=var, sharpe=float(mu / np.sqrt(var)), count=x.size)


def moments_panel(rp: np.ndarray):
    """Per-row (mean, variance, Sharpe) of a (K, N) realized-return panel."""
    mu = rp.mean(axis=1)
    var = rp.var(axis=1, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        sharpe = np.where(var > 0, mu / np.sqrt(var), np.nan)
    return mu, var, sharpe


def standard_backtest(path: SamplePath, cfg: BacktestConfig) -> MomentSummary:
    """Moments of the rule's realized returns along the path as given."""
    return sharpe_moments(realized_returns(path, cfg))


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

def _rng_from(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def shuffle_indices(rng, T: int) -> np.ndarray:
    return rng.permutation(T)


def block_indices(rng, T: int, b: int) -> np.ndarray:
    """Circular moving-block bootstrap indices: random starts, with replacement."""
    nb = -(-T // b)
    starts = rng.integers(0, T, nb)
    idx = (starts[:, None] + np.arange(b)[None, :]) % T
    return idx.reshape(-1)[:T]

def block_shuffle_indices(rng, T: int, b: int) -> np.ndarray:
    """Permute disjoint blocks of b consecutive rows (circular when b does not divide T)."""
    nb = -(-T // b)
    starts = (np.arange(nb) * b) % T
    perm = rng.permutation(nb)
    idx = (starts[perm][:, None] + np.arange(b)[None, :]) % T
    return idx.reshape(-1)[:T]


def _resampled(path: SamplePath, rows: np.ndarray, scheme: ResampleScheme) -> SamplePath:
    return SamplePath(returns=path.returns[rows].copy(), specs=path.specs,
                      seed=path.seed, origin=f"resampled({scheme.tag})")


def shuffle_path(path: SamplePath, seed) -> SamplePath:
    """Uniform random permutation of the rows (whole cross-sections move together)."""
    rng = _rng_from(seed)
    return _resampled(path, shuffle_indices(rng, path.T), iid_shuffle())


def block_resample(path: SamplePath, b: int, seed) -> SamplePath:
    """Circular moving-block bootstrap of the rows, blocks drawn with replacement."""
    if not 1 <= b <= path.T:
        raise ValueError(f"need 1 <= b <= T, got b = {b}, T = {path.T}")
    rng = _rng_from(seed)
    return _resampled(path, block_indices(rng, path.T, b), block(b))


def block_shuffle_path(path: SamplePath, b: int, seed) -> SamplePath:
    """Permutation of disjoint b-blocks; b = 1 coincides with shuffle_path's scheme."""
    if not 1 <= b <= path.T:
        raise ValueError(f"need 1 <= b <= T, got b = {b}, T = {path.T}")
    rng = _rng_from(seed)
    return _resampled(path, block_shuffle_indices(rng, path.T, b), block_shuffle(b))


def surrogate_path(path: SamplePath, seed) -> SamplePath:
    """Fresh IID Gaussian panel with each spec's unconditional moments."""
    if not path.specs:
        raise ValueError("iid_surrogate needs the path's asset specs")
    rng = _rng_from(seed)
    T, M = path.returns.shape
    z = rng.standard_normal((T, M))
    mu = np.array([s.observables.mu for s in path.specs])
    sd = np.sqrt([s.observables.sigma2_R for s in path.specs])
    return SamplePath(returns=mu + sd * z, specs=path.specs, seed=path.seed,
                      origin=f"resampled({IID_SURROGATE})")


def resample_path(path: SamplePath, scheme: ResampleScheme, seed) -> SamplePath:
    """Apply a resampling scheme to a path; identity returns the path unchanged."""
    if scheme.kind == IDENTITY:
        return path
    if scheme.kind == IID_SHUFFLE:
        return shuffle_path(path, seed)
    if scheme.kind == BLOCK:
        return block_resample(path, scheme.b, seed)
    if scheme.kind == BLOCK_SHUFFLE:
        return block_shuffle_path(path, scheme.b, seed)
    return surrogate_path(path, seed)


def resampled_backtest(path: SamplePath, cfg: BacktestConfig,
                       scheme: ResampleScheme, seed) -> MomentSummary:
    """Backtest moments after resampling the path under the given scheme."""
    return standard_backtest(resample_path(path, scheme, seed), cfg)


def resample_panel(X: np.ndarray, scheme: ResampleScheme, master_seed: int,
                   specs=None, path_offset: int = 0) -> np.ndarray:
    """Resample every path of a (K, T, M) panel, one derived stream per path.

    Path k uses the stream keyed (RESAMPLE, path_offset + k), shared across
    assets so whole cross-sections move together; the same key drives every
    scheme (common random numbers across scheme comparisons).
    """
    if scheme.kind == IDENTITY:
        return X
    K, T = X.shape[0], X.shape[1]
    if scheme.kind == IID_SURROGATE:
        if specs is None:
            raise ValueError("iid_surrogate needs asset specs")
        mu = np.array([s.observables.mu for s in specs])
        sd = np.sqrt([s.observables.sigma2_R for s in specs])
        out = np.empty_like(X)
        for k in range(K):
            rng = child_rng(master_seed, RESAMPLE, path_offset + k)
            out[k] = mu + sd * rng.standard_normal(X.shape[1:])
        return out
    rows = np.empty((K, T), dtype=np.intp)
    for k in range(K):
        rng = child_rng(master_seed, RESAMPLE, path_offset + k)
        if scheme.kind == IID_SHUFFLE:
            rows[k] = shuffle_indices(rng, T)
        elif scheme.kind == BLOCK:
            rows[k] = block_indices(rng, T, scheme.b)
        else:
            rows[k] = block_shuffle_indices(rng, T, scheme.b)
    if X.ndim == 2:
        return np.take_along_axis(X, rows, axis=1)
    return np.take_along_axis(X, rows[:, :, None], axis=1)


# ---------------------------------------------------------------------------
# bagging
# ---------------------------------------------------------------------------

def bagged_sharpe(paths, cfg: BacktestConfig, bags: int,
                  scheme: ResampleScheme, seed: int) -> BaggingReport:
    """Bag-averaged Sharpe ratio with a variance decomposition.

    ``paths`` is one SamplePath or a sequence of independent replication
    paths.  Each path gets ``bags`` resampled Sharpe estimates (stream
    (BOOTSTRAP, r, j) for bag j of replication r).  Across replications a
    one-way variance decomposition estimates the variance of a single
    resampled Sharpe, the variance of the bag average, and their implied
    pairwise correlation; var_bagged flattens at rho * var_single as the
    number of bags grows.  With a single path the cross-path components
    are not identified: var_bagged is reported as var_single / bags and
    rho as 0 (1 when the bags are all identical).
    """
    if bags < 1:
        raise ValueError("bags must be >= 1")
    if isinstance(paths, SamplePath):
        paths = [paths]
    R = len(paths)
    if R == 0:
        raise ValueError("need at least one path")
    vals = np.empty((R, bags))
    for r, p in enumerate(paths):
        for j in range(bags):
            rng = child_rng(seed, BOOTSTRAP, r, j)
            vals[r, j] = resampled_backtest(p, cfg, scheme, rng).sharpe
    bag_means = vals.mean(axis=1)
    mean_sharpe = float(bag_means.mean())

    if R == 1:
        var_within = float(vals.var(ddof=1)) if bags > 1 else 0.0
        rho = 1.0 if var_within == 0.0 else 0.0
        return BaggingReport(mean_sharpe=mean_sharpe, var_single=var_within,
                             var_bagged=var_within / bags, rho=rho,
                             bags=bags, replications=R)

    var_bagged = float(bag_means.var(ddof=1))
    msw = float(vals.var(axis=1, ddof=1).mean()) if bags > 1 else 0.0
    msb = bags * var_bagged
    sigma2_between = max((msb - msw) / bags, 0.0)
    var_single = sigma2_between + msw
    rho = 1.0 if var_single == 0.0 else min(sigma2_between / var_single, 1.0)
    return BaggingReport(mean_sharpe=mean_sharpe, var_single=var_single,
                         var_bagged=var_bagged, rho=rho,
                         bags=bags, replications=R)


# ---------------------------------------------------------------------------
# power / sample size
# ---------------------------------------------------------------------------

def required_sample_size(delta_sr_annual: float, power: float = 0.8,
                         alpha: float = 0.05, theta_monthly: float = 0.12,
                         corr: float = 0.3, sided: int = 1) -> int:
    """Months needed to detect an annualized Sharpe difference at given power.

    Uses the asymptotic normal Sharpe distribution with variance
    (1 + theta^2/2)/N per strategy and correlation ``corr`` between the two
    strategies' estimates:

        N = (z_{1-alpha(/2)} + z_power)^2 (2 - 2 corr)(1 + theta^2/2) / delta_m^2

    with delta_m the monthly Sharpe difference, rounded up.
    """
    if delta_sr_annual <= 0:
        raise ValueError("delta_sr_annual must be positive")
    if not 0 < power < 1 or not 0 < alpha < 1:
        raise InvalidProbability("power and alpha must lie in (0, 1)")
    if not abs(corr) < 1:
        raise ValueError("|corr| must be < 1")
    if sided not in (1, 2):
        raise ValueError("sided must be 1 or 2")
    z_a = norm.ppf(1 - alpha / sided)
    z_p = norm.ppf(power)
    delta_m = delta_sr_annual / np.sqrt(12.0)
    n = (z_a + z_p) ** 2 * (2 - 2 * corr) * (1 + theta_monthly**2 / 2) / delta_m**2
    return max(int(np.ceil(n)), 1)
