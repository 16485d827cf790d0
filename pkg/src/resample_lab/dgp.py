"""Asset return processes and path simulation.

Each asset's monthly return is a time-varying risk premium plus noise:

    R_t  = m_t + e_t
    m_t  = c + phi * m_{t-1} + eta_t,   eta_t ~ N(0, sigma2_eta)

with e_t either homoskedastic Gaussian or GARCH(1,1).  Latent parameters
are calibrated from four observable moments: the mean, the return
variance, the lag-1 autocorrelation and the signal-variance ratio
(share of return variance explained by the premium).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSignal, InfeasibleClip, ParseError, PhiOutOfRange
from .seeding import SIM, child_rng

GARCH_SUM_LO = 0.74
GARCH_SUM_HI = 0.98


@dataclass(frozen=True)
class ObservableMoments:
    """Observable monthly moments of one asset.

    mu : mean return (decimal per month)
    sigma2_R : return variance
    psi : lag-1 return autocorrelation
    r2 : signal-variance ratio sigma2_mu / sigma2_R, in [0, 1)
    """

    mu: float
    sigma2_R: float
    psi: float
    r2: float

    def __post_init__(self):
        if not self.sigma2_R > 0:
            raise ValueError(f"sigma2_R must be positive, got {self.sigma2_R}")
        if not abs(self.psi) < 1:
            raise ValueError(f"|psi| must be < 1, got {self.psi}")
        if not 0 <= self.r2 < 1:
            raise ValueError(f"r2 must be in [0, 1), got {self.r2}")

    @property
    def theta(self) -> float:
        """Monthly Sharpe ratio of the asset."""
        return self.mu / np.sqrt(self.sigma2_R)


@dataclass(frozen=True)
class LatentParams:
    """AR(1) premium parameters implied by the observable moments."""

    phi: float
    sigma2_mu: float
    sigma2_eta: float
    sigma2_eps: float
    intercept: float

    def __post_init__(self):
        if not abs(self.phi) < 1:
            raise PhiOutOfRange(f"|phi| must be < 1, got {self.phi}")
        if self.sigma2_eps < 0:
            raise ValueError("sigma2_eps must be nonnegative")
        if abs(self.sigma2_mu * (1 - self.phi**2) - self.sigma2_eta) > 1e-12:
            raise ValueError("sigma2_mu and sigma2_eta violate the stationarity identity")


@dataclass(frozen=True)
class GarchSpec:
    """GARCH(1,1) noise: s2_t = omega + alpha e_{t-1}^2 + beta s2_{t-1}."""

    omega: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be nonnegative")
        s = self.alpha + self.beta
        if not (GARCH_SUM_LO - 1e-12 <= s <= GARCH_SUM_HI + 1e-12):
            raise ValueError(f"alpha + beta must lie in [{GARCH_SUM_LO}, {GARCH_SUM_HI}], got {s}")

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1 - self.alpha - self.beta)


@dataclass(frozen=True)
class AssetSpec:
    """One asset: observable moments, derived latent parameters, optional GARCH noise."""

    id: str
    observables: ObservableMoments
    latent: LatentParams
    garch: GarchSpec | None = None

    def __post_init__(self):
        obs, lat = self.observables, self.latent
        if abs(lat.sigma2_mu - obs.r2 * obs.sigma2_R) > 1e-9 * max(obs.sigma2_R, 1e-30):
            raise ValueError(f"{self.id}: latent sigma2_mu inconsistent with observables")
        if self.garch is not None:
            gap = abs(self.garch.unconditional_variance - lat.sigma2_eps)
            if gap > 1e-12 + 1e-9 * lat.sigma2_eps:
                raise ValueError(f"{self.id}: GARCH unconditional variance != sigma2_eps")

    @classmethod
    def from_observables(cls, id, obs, garch_alpha=None, garch_beta=None, clip_phi=False):
        """Build a spec from observables, deriving latent (and GARCH) parameters."""
        latent = derive_latent_params(obs, clip_phi=clip_phi)
        garch = None
        if garch_alpha is not None or garch_beta is not None:
            garch = garch_calibrate(latent, garch_alpha, garch_beta)
        return cls(id=str(id), observables=obs, latent=latent, garch=garch)


@dataclass(frozen=True)
class SamplePath:
    """A T x M panel of monthly simple returns with provenance metadata."""

    returns: np.ndarray
    specs: tuple
    seed: int | None
    origin: str = "simulated"

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        if r.ndim == 1:
            r = r[:, None]
        if r.shape[0] < 2:
            raise ValueError("a sample path needs T >= 2 observations")
        if not np.all(np.isfinite(r)):
            raise ValueError("sample path contains non-finite values")
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "specs", tuple(self.specs))

    @property
    def T(self) -> int:
        return self.returns.shape[0]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]


def derive_latent_params(obs: ObservableMoments, clip_phi: bool = False) -> LatentParams:
    """Map observable moments to AR(1) premium parameters.

    Uses sigma2_mu = r2 * sigma2_R, phi = psi / r2 and
    sigma2_eta = sigma2_mu * (1 - phi^2).  Raises PhiOutOfRange when the
    implied |phi| >= 1 unless ``clip_phi`` is set, in which case phi is
    clipped to +-0.999 (breaking the psi round trip, by request).
    """
    if obs.r2 == 0:
        if obs.psi != 0:
            raise DegenerateSignal("r2 = 0 requires psi = 0: no premium variation, no autocorrelation")
        return LatentParams(phi=0.0, sigma2_mu=0.0, sigma2_eta=0.0,
                            sigma2_eps=obs.sigma2_R, intercept=obs.mu)
    sigma2_mu = obs.r2 * obs.sigma2_R
    phi = obs.psi * obs.sigma2_R / sigma2_mu
    if abs(phi) >= 1:
        if not clip_phi:
            raise PhiOutOfRange(
                f"|psi| >= r2 implies |phi| = {abs(phi):.6g} >= 1; pass clip_phi=True to clamp")
        phi = np.sign(phi) * 0.999
    sigma2_eta = sigma2_mu * (1 - phi**2)
    return LatentParams(phi=float(phi), sigma2_mu=float(sigma2_mu),
                        sigma2_eta=float(sigma2_eta),
                        sigma2_eps=float(obs.sigma2_R - sigma2_mu),
                        intercept=float(obs.mu * (1 - phi)))


def garch_calibrate(latent: LatentParams, alpha: float, beta: float) -> GarchSpec:
    """Calibrate omega so GARCH noise keeps the asset's unconditional noise variance.

    alpha is adjusted so alpha + beta lands on the nearer boundary of
    [0.74, 0.98] when the requested sum falls outside that range.
    """
    if alpha is None or beta is None:
        raise ValueError("both alpha and beta are required")
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be nonnegative")
    if beta > GARCH_SUM_HI:
        raise InfeasibleClip(f"beta = {beta} alone exceeds {GARCH_SUM_HI}")
    s = alpha + beta
    if s < GARCH_SUM_LO:
        alpha = GARCH_SUM_LO - beta
    elif s > GARCH_SUM_HI:
        alpha = GARCH_SUM_HI - beta
    omega = latent.sigma2_eps * (1 - alpha - beta)
    return GarchSpec(omega=float(omega), alpha=float(alpha), beta=float(beta))


def _standard_draws(spec, T, master_seed, asset_index, path_indices):
    """(K, 2T) standard normals, one derived stream per (asset, path)."""
    out = np.empty((len(path_indices), 2 * T))
    for row, k in enumerate(path_indices):
        rng = child_rng(master_seed, SIM, asset_index, k)
        out[row] = rng.standard_normal(2 * T)
    return out


def simulate_batch(spec: AssetSpec, T: int, K: int, master_seed: int,
                   asset_index: int = 0, path_offset: int = 0,
                   use_garch: bool | None = None) -> np.ndarray:
    """Simulate K independent paths of one asset as a (K, T) array.

    Path k draws from the stream keyed (SIM, asset_index, path_offset + k),
    so any sub-batch reproduces the corresponding rows bit for bit.
    ``use_garch=None`` means "GARCH if the spec carries one".
    """
    if T < 2:
        raise ValueError("T must be >= 2")
    lat = spec.latent
    if use_garch is None:
        use_garch = spec.garch is not None
    if use_garch and spec.garch is None:
        raise ValueError(f"{spec.id}: GARCH noise requested but spec has no GarchSpec")

    z = _standard_draws(spec, T, master_seed, asset_index,
                        range(path_offset, path_offset + K))
    zp, ze = z[:, :T], z[:, T:]

    # premium: stationary start, then AR(1) recursion
    m = np.empty((K, T))
    m[:, 0] = spec.observables.mu + np.sqrt(lat.sigma2_mu) * zp[:, 0]
    sd_eta = np.sqrt(lat.sigma2_eta)
    for t in range(1, T):
        m[:, t] = lat.intercept + lat.phi * m[:, t - 1] + sd_eta * zp[:, t]

    if not use_garch:
        eps = np.sqrt(lat.sigma2_eps) * ze
    else:
        g = spec.garch
        eps = np.empty((K, T))
        s2 = np.full(K, lat.sigma2_eps)     # s2_1 at the unconditional level
        for t in range(T):
            eps[:, t] = np.sqrt(s2) * ze[:, t]
            s2 = g.omega + g.alpha * eps[:, t] ** 2 + g.beta * s2
    return m + eps


def simulate_panel(specs, T: int, K: int, master_seed: int,
                   use_garch: bool | None = None) -> np.ndarray:
    """Simulate K paths of M assets as a (K, T, M) array (diagonal cross-section)."""
    cols = [simulate_batch(s, T, K, master_seed, asset_index=a, use_garch=use_garch)
            for a, s in enumerate(specs)]
    return np.stack(cols, axis=2)


def simulate_path(specs, T: int, seed: int, path_index: int = 0,
                  use_garch: bool | None = None) -> SamplePath:
    """Simulate one sample path for the given assets.

    Deterministic in (specs, T, seed, path_index); the column for asset a
    equals row ``path_index`` of :func:`simulate_batch` for that asset.
    """
    specs = tuple(specs)
    cols = [simulate_batch(s, T, 1, seed, asset_index=a, path_offset=path_index,
                           use_garch=use_garch)[0]
            for a, s in enumerate(specs)]
    return SamplePath(returns=np.column_stack(cols), specs=specs, seed=seed,
                      origin="simulated")


# ---------------------------------------------------------------------------
# JSON serialization of asset-spec collections
# ---------------------------------------------------------------------------

def specs_to_json(specs) -> str:
    """Serialize AssetSpecs to the documented JSON schema."""
    assets = []
    for s in specs:
        o = s.observables
        entry = {"id": s.id,
                 "observables": {"mu": o.mu, "sigma2_R": o.sigma2_R,
                                 "psi": o.psi, "r2": o.r2}}
        if s.garch is not None:
            entry["garch"] = {"alpha": s.garch.alpha, "beta": s.garch.beta}
        assets.append(entry)
    return json.dumps({"assets": assets}, indent=2)


def specs_from_json(text: str):
    """Parse the JSON schema produced by :func:`specs_to_json`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e}") from e
    if "assets" not in doc:
        raise ParseError("missing top-level 'assets' list")
    specs = []
    for i, entry in enumerate(doc["assets"]):
        try:
            obs = ObservableMoments(**entry["observables"])
            g = entry.get("garch")
            specs.append(AssetSpec.from_observables(
                entry.get("id", f"asset{i}"), obs,
                garch_alpha=None if g is None else g["alpha"],
                garch_beta=None if g is None else g["beta"]))
        except (KeyError, TypeError) as e:
            raise ParseError(f"asset entry {i}: {e}") from e
    return specs
