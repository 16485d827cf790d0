"""Closed-form bias expressions, bounds, dependence components, Monte Carlo bias.

All formulas are driven by four quantities: the asset's monthly Sharpe
ratio theta, the signal-variance ratio s, the premium persistence phi and
the rolling-window length n.  The lag-1 return autocorrelation is
psi = phi * s, the observable that the bounds run on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backtest import ResampleScheme, iid_shuffle, moments_panel, resample_panel
from .dgp import AssetSpec, simulate_panel
from .errors import InsufficientData, ResampleLabError, ThetaNearZero
from .portfolio import BacktestConfig, realized_panel

THETA_EPS = 1e-8          # hard error threshold for 1/theta formulas
SMALL_THETA_FLAG = 0.05   # reporting threshold for "analytical bound unreliable"


# ---------------------------------------------------------------------------
# window sums
# ---------------------------------------------------------------------------

def sum_A(n: int, phi: float) -> float:
    """A = (1/n) sum_{k=1..n} phi^k, in closed form."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not abs(phi) < 1:
        raise ValueError("|phi| must be < 1")
    if phi == 0.0:
        return 0.0
    return phi * (1 - phi**n) / (n * (1 - phi))


def sum_B(n: int, phi: float) -> float:
    """B = (1/n^2) sum_{i != j} phi^|i-j| over an n-window, in closed form."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not abs(phi) < 1:
        raise ValueError("|phi| must be < 1")
    if phi == 0.0 or n == 1:
        return 0.0
    return 2 * phi / (n * (1 - phi)) - 2 * phi * (1 - phi**n) / (n**2 * (1 - phi) ** 2)


def ratio_R(n: int, phi: float) -> float:
    """R = B/A = 2/(1-phi^n) - 2/(n(1-phi)); tends to 2 as n grows."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < phi < 1:
        raise ValueError("ratio_R needs 0 < phi < 1")
    if n == 1:
        return 0.0
    return 2 / (1 - phi**n) - 2 / (n * (1 - phi))


# ---------------------------------------------------------------------------
# exact bias expressions and their Taylor combination
# ---------------------------------------------------------------------------

def theoretical_bias_mean(spec: AssetSpec, n: int, gamma: float) -> float:
    """Exact bias of the IID-resampled backtested mean: -(1/gamma) s A."""
    s = spec.observables.r2
    return -(1.0 / gamma) * s * sum_A(n, spec.latent.phi)


def theoretical_bias_var(spec: AssetSpec, n: int, gamma: float) -> float:
    """Exact bias of the IID-resampled backtested variance.

    -(1/gamma^2) [ (theta^2 + 1) s B + s A (s A + 2 theta^2) ]
    """
    s = spec.observables.r2
    th2 = spec.observables.theta ** 2
    A = sum_A(n, spec.latent.phi)
    B = sum_B(n, spec.latent.phi)
    return -(1.0 / gamma**2) * ((th2 + 1) * s * B + s * A * (s * A + 2 * th2))


def theoretical_bias_sr(spec: AssetSpec, n: int) -> float:
    """First-order Sharpe-ratio bias, gamma-free:

    (s / 2 theta) [ s A^2 + 2 (theta^2 - 1) A + (theta^2 + 1) B ]
    """
    theta = spec.observables.theta
    if abs(theta) < THETA_EPS:
        raise ThetaNearZero(f"|theta| = {abs(theta):.3g} too small")
    s = spec.observables.r2
    A = sum_A(n, spec.latent.phi)
    B = sum_B(n, spec.latent.phi)
    return (s / (2 * theta)) * (s * A**2 + 2 * (theta**2 - 1) * A + (theta**2 + 1) * B)


def taylor_sr_bias(bias_mean: float, bias_var: float, theta: float, gamma: float) -> float:
    """Combine moment biases into the Sharpe bias: (gamma/theta)(bias_mean - (gamma/2) bias_var)."""
    if abs(theta) < THETA_EPS:
        raise ThetaNearZero(f"|theta| = {abs(theta):.3g} too small")
    return (gamma / theta) * (bias_mean - (gamma / 2) * bias_var)


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundSet:
    """The four bias bounds plus validity notes.

    mean_bound and var_bound are magnitudes (|psi|/gamma and C|psi|/gamma^2);
    the two Sharpe bounds are the signed formula values.  Bound checks use
    the absolute-ratio convention |bias| / |bound| <= 1.
    """

    mean_bound: float
    var_bound: float
    sr_analytical: float
    sr_numerical: float
    flags: tuple

    def to_dict(self) -> dict:
        return {"mean_bound": self.mean_bound, "var_bound": self.var_bound,
                "sr_analytical": self.sr_analytical, "sr_numerical": self.sr_numerical,
                "flags": list(self.flags)}


def bounds(theta: float, psi: float, gamma: float, n: int,
           appendix_variant_c: bool = False) -> BoundSet:
    """Evaluate the four bias bounds at (theta, psi, gamma, n).

    C = 3 theta^2 + psi + 1 as in the propositions; ``appendix_variant_c``
    switches to the appendix's C = psi (3 theta^2 + psi + 1) for comparison
    only.  Out-of-assumption inputs are flagged, not rejected.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    C = 3 * theta**2 + psi + 1
    if appendix_variant_c:
        C = psi * C
    flags = []
    if psi < 0:
        flags.append("psi<0: outside the propositions' 0 <= phi < 1 assumption")
    if abs(theta) < SMALL_THETA_FLAG:
        flags.append("small theta: analytical SR bound unreliable")
    if n <= 10:
        flags.append("n<=10: numerical SR bound conjectured valid only for n>10")

    mean_bound = abs(psi) / gamma
    var_bound = abs(C * psi) / gamma**2
    if abs(theta) < THETA_EPS:
        sr_analytical = np.nan
        flags.append("theta~0: analytical SR bound undefined")
    else:
        sr_analytical = 0.5 * (psi / theta) * (C - 2)
    disc = theta**2 + C * psi
    if disc <= 0:
        sr_numerical = np.nan
        flags.append("theta^2 + C psi <= 0: numerical SR bound undefined")
    else:
        sr_numerical = theta - (theta**2 + psi) / np.sqrt(disc)
    return BoundSet(mean_bound=float(mean_bound), var_bound=float(var_bound),
                    sr_analytical=float(sr_analytical), sr_numerical=float(sr_numerical),
                    flags=tuple(flags))


def bounds_for_spec(spec: AssetSpec, gamma: float, n: int) -> BoundSet:
    """Bounds at the spec's model parameters (psi = phi * s)."""
    return bounds(spec.observables.theta, spec.observables.psi, gamma, n)


# ---------------------------------------------------------------------------
# dependence components
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DependenceComponents:
    """Train-test and within-training dependence (autocovariance units)."""

    ttd: float
    wtd: float


def dependence_components_param(spec: AssetSpec, n: int) -> DependenceComponents:
    """Parametric TTD = sigma2_mu A and WTD = sigma2_mu B."""
    s2mu = spec.latent.sigma2_mu
    phi = spec.latent.phi
    return DependenceComponents(ttd=s2mu * sum_A(n, phi), wtd=s2mu * sum_B(n, phi))


def autocovariance(series, max_lag: int) -> np.ndarray:
    """gamma_hat(k) for k = 0..max_lag with the 1/T divisor."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError("need a 1-d series")
    if max_lag >= x.size:
        raise InsufficientData(f"max_lag = {max_lag} needs a series longer than that")
    d = x - x.mean()
    T = x.size
    return np.array([d[:T - k] @ d[k:] / T for k in range(max_lag + 1)])


def dependence_components_empirical(series, n: int) -> DependenceComponents:
    """Plug sample autocovariances into the TTD/WTD window sums."""
    x = np.asarray(series, dtype=float)
    if x.size < n + 2:
        raise InsufficientData(f"need at least n + 2 = {n + 2} observations, got {x.size}")
    g = autocovariance(x, n)
    k = np.arange(1, n)
    ttd = g[1:n + 1].sum() / n
    wtd = (2 * (n - k) * g[1:n]).sum() / n**2
    return DependenceComponents(ttd=float(ttd), wtd=float(wtd))


def cumulative_avg_autocovariance(series, max_lag: int) -> np.ndarray:
    """Curve L -> (1/L) sum_{k<=L} gamma_hat(k), L = 1..max_lag."""
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    g = autocovariance(series, max_lag)
    return np.cumsum(g[1:]) / np.arange(1, max_lag + 1)


# ---------------------------------------------------------------------------
# Monte Carlo bias estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BiasEstimate:
    """Average resampled-minus-standard differences across simulated paths.

    se_* are Monte Carlo standard errors of the bias estimates; the
    se_standard_* fields are the cross-path standard deviations of the
    standard backtest statistics (the standardization denominators).
    """

    bias_mean: float
    bias_var: float
    bias_sr: float
    se_mean: float
    se_var: float
    se_sr: float
    se_standard_mean: float
    se_standard_var: float
    se_standard_sr: float
    paths: int
    failures: int = 0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "bias_mean", "bias_var", "bias_sr", "se_mean", "se_var", "se_sr",
            "se_standard_mean", "se_standard_var", "se_standard_sr",
            "paths", "failures")}


def mc_bias(specs, cfg: BacktestConfig, K: int, T: int, seed: int,
            scheme: ResampleScheme | None = None,
            use_garch: bool | None = None, max_failure_share: float = 0.01,
            _panel=None) -> BiasEstimate:
    """Estimate resampling bias by simulation.

    Simulates K paths of the given asset(s), backtests each path as-is and
    after resampling, and averages the differences.  Deterministic in
    ``seed``; path k and its resample draw from streams keyed by k alone,
    so results do not depend on batching or evaluation order.
    """
    if K < 2:
        raise ValueError("K must be >= 2")
    if isinstance(specs, AssetSpec):
        specs = (specs,)
    specs = tuple(specs)
    if scheme is None:
        scheme = iid_shuffle()
    X = simulate_panel(specs, T, K, seed, use_garch=use_garch) if _panel is None else _panel
    mu_s, var_s, sr_s = moments_panel(realized_panel(X, cfg))
    Xr = resample_panel(X, scheme, seed, specs=specs)
    mu_r, var_r, sr_r = moments_panel(realized_panel(Xr, cfg))

    dm, dv, ds = mu_r - mu_s, var_r - var_s, sr_r - sr_s
    ok = np.isfinite(dm) & np.isfinite(dv) & np.isfinite(ds)
    failures = int(K - ok.sum())
    if failures > max_failure_share * K:
        raise ResampleLabError(f"{failures}/{K} paths failed, over the {max_failure_share:.0%} budget")
    dm, dv, ds = dm[ok], dv[ok], ds[ok]
    k_eff = int(ok.sum())
    rt = np.sqrt(k_eff)
    return BiasEstimate(
        bias_mean=float(dm.mean()), bias_var=float(dv.mean()), bias_sr=float(ds.mean()),
        se_mean=float(dm.std(ddof=1) / rt), se_var=float(dv.std(ddof=1) / rt),
        se_sr=float(ds.std(ddof=1) / rt),
        se_standard_mean=float(mu_s[ok].std(ddof=1)),
        se_standard_var=float(var_s[ok].std(ddof=1)),
        se_standard_sr=float(sr_s[ok].std(ddof=1)),
        paths=k_eff, failures=failures)
