"""Experiment suites: cross-sectional bias vs bounds, standardized-bias
tables, bias-vs-dependence regressions, blocksize and dimension sweeps,
and the mean/variance bias coupling, over a synthetic asset universe."""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.stats import norm

from . import analysis
from .backtest import (ResampleScheme, block, block_shuffle, iid_shuffle,
                       moments_panel, resample_panel)
from .dgp import AssetSpec, ObservableMoments, simulate_batch
from .errors import RankDeficient, ResampleLabError
from .portfolio import BacktestConfig, realized_panel
from .seeding import UNIVERSE, child_rng

_PKG_VERSION = "0.1.0"


# ---------------------------------------------------------------------------
# synthetic universe
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniverseRecipe:
    """Generator recipe for a JKP-style synthetic cross-section.

    Marginals are stratified quantile grids (deterministic), randomly paired
    across parameters by the recipe seed: annualized mean premia around 2.7%
    with wide cross-sectional spread, annualized vol around 32%, lag-1
    autocorrelation centered at 0.08, signal-variance ratio centered at 0.39,
    GARCH persistence in the admissible [0.74, 0.98] band.  Monthly Sharpe
    ratios are capped so the numerical SR bound stays well away from its
    zero crossing.
    """

    count: int = 153
    mean_pa: float = 0.027
    mean_sd_pa: float = 0.16
    vol_median_pa: float = 0.32
    vol_log_sd: float = 0.08
    psi_mean: float = 0.08
    psi_sd: float = 0.05
    svr_mean: float = 0.39
    svr_sd: float = 0.10
    svr_lo: float = 0.10
    svr_hi: float = 0.70
    theta_cap: float = 0.25
    garch_alpha: tuple = (0.08, 0.18)
    garch_beta: tuple = (0.65, 0.88)
    seed: int = 11


def jkp_like_universe(recipe: UniverseRecipe | None = None):
    """Build the synthetic cross-section described by the recipe."""
    r = recipe or UniverseRecipe()
    M = r.count
    rng = child_rng(r.seed, UNIVERSE, 0)
    q = (np.arange(M) + 0.5) / M
    z = norm.ppf(q)
    sd_m = np.exp(np.log(r.vol_median_pa) + r.vol_log_sd * z) / np.sqrt(12.0)
    mu_m = (r.mean_pa + r.mean_sd_pa * z) / 12.0
    psi = r.psi_mean + r.psi_sd * z
    svr = np.clip(r.svr_mean + r.svr_sd * z, r.svr_lo, r.svr_hi)
    a_lo, a_hi = r.garch_alpha
    b_lo, b_hi = r.garch_beta
    alpha = a_lo + (a_hi - a_lo) * q
    beta = b_lo + (b_hi - b_lo) * q
    # independent pairing of the stratified marginals
    sd_m = sd_m[rng.permutation(M)]
    psi = psi[rng.permutation(M)]
    svr = svr[rng.permutation(M)]
    alpha = alpha[rng.permutation(M)]
    beta = beta[rng.permutation(M)]
    mu_m = np.clip(mu_m, -r.theta_cap * sd_m, r.theta_cap * sd_m)
    psi = np.clip(psi, -0.95 * svr, 0.95 * svr)
    specs = []
    width = len(str(M - 1))
    for i in range(M):
        obs = ObservableMoments(mu=float(mu_m[i]), sigma2_R=float(sd_m[i] ** 2),
                                psi=float(psi[i]), r2=float(svr[i]))
        specs.append(AssetSpec.from_observables(
            f"jkp{i:0{width}d}", obs,
            garch_alpha=float(alpha[i]), garch_beta=float(beta[i])))
    return specs


def median_spec(recipe: UniverseRecipe | None = None, id: str = "ladder") -> AssetSpec:
    """The recipe's center-of-distribution asset (used for clone ladders)."""
    r = recipe or UniverseRecipe()
    sd = r.vol_median_pa / np.sqrt(12.0)
    obs = ObservableMoments(mu=r.mean_pa / 12.0, sigma2_R=sd**2,
                            psi=r.psi_mean, r2=r.svr_mean)
    a = sum(r.garch_alpha) / 2
    b = sum(r.garch_beta) / 2
    return AssetSpec.from_observables(id, obs, garch_alpha=a, garch_beta=b)


def clone_ladder(spec: AssetSpec, count: int):
    """``count`` copies of one spec; slots get independent streams when simulated."""
    return [replace(spec, id=f"{spec.id}{i:02d}") for i in range(count)]


# ---------------------------------------------------------------------------
# scenario configuration
# ---------------------------------------------------------------------------

DEFAULT_BLOCKSIZE_GRID = (1, 2, 5, 10, 20)
DEFAULT_DIMENSION_GRID = (1, 2, 5, 10, 20, 40)


@dataclass
class ScenarioConfig:
    """Everything one experiment run depends on."""

    universe: list
    K: int = 1000
    T: int = 480
    backtest: BacktestConfig = field(
        default_factory=lambda: BacktestConfig(n=60, gamma=100.0))
    noise: str = "constant"
    schemes: tuple = (ResampleScheme("iid_shuffle"),)
    blocksize_grid: tuple = DEFAULT_BLOCKSIZE_GRID
    sweep_scheme_kind: str = "block_shuffle"
    dimension_grid: tuple = DEFAULT_DIMENSION_GRID
    master_seed: int = 171717
    workers: int | None = None
    recipe: UniverseRecipe | None = None

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("K must be >= 2")
        if self.T <= self.backtest.n:
            raise ValueError("T must exceed the window length n")
        if self.noise not in ("constant", "garch"):
            raise ValueError("noise must be 'constant' or 'garch'")
        if self.sweep_scheme_kind not in ("block", "block_shuffle"):
            raise ValueError("sweep_scheme_kind must be 'block' or 'block_shuffle'")
        self.schemes = tuple(self.schemes)
        if not self.schemes:
            raise ValueError("need at least one resampling scheme")
        self.blocksize_grid = tuple(int(b) for b in self.blocksize_grid)
        self.dimension_grid = tuple(int(m) for m in self.dimension_grid)

    @property
    def use_garch(self) -> bool:
        return self.noise == "garch"

    def effective_workers(self) -> int:
        if self.workers is not None:
            return max(1, int(self.workers))
        env = os.environ.get("RESAMPLE_LAB_THREADS")
        if env:
            return max(1, int(env))
        return 1

    def to_dict(self) -> dict:
        bt = self.backtest
        d = {"K": self.K, "T": self.T, "noise": self.noise,
             "backtest": {"n": bt.n, "gamma": bt.gamma, "rf": bt.rf,
                          "estimator_mode": bt.estimator_mode},
             "schemes": [{"kind": s.kind, "b": s.b} for s in self.schemes],
             "blocksize_grid": list(self.blocksize_grid),
             "sweep_scheme_kind": self.sweep_scheme_kind,
             "dimension_grid": list(self.dimension_grid),
             "master_seed": self.master_seed}
        if self.recipe is not None:
            d["universe"] = {"recipe": asdict(self.recipe)}
        else:
            d["universe"] = {"inline": json.loads(_specs_json(self.universe))}
        return d


def _specs_json(specs):
    from .dgp import specs_to_json
    return specs_to_json(specs)


def config_from_dict(doc: dict) -> ScenarioConfig:
    """Parse the JSON scenario schema (see README)."""
    from .dgp import specs_from_json
    uni = doc.get("universe", {})
    recipe = None
    if "recipe" in uni:
        rd = dict(uni["recipe"])
        for k in ("garch_alpha", "garch_beta"):
            if k in rd:
                rd[k] = tuple(rd[k])
        recipe = UniverseRecipe(**rd)
        specs = jkp_like_universe(recipe)
    elif "file" in uni:
        with open(uni["file"], "r", encoding="utf-8") as fh:
            specs = specs_from_json(fh.read())
    elif "inline" in uni:
        specs = specs_from_json(json.dumps(uni["inline"]))
    else:
        recipe = UniverseRecipe()
        specs = jkp_like_universe(recipe)
    btd = doc.get("backtest", {})
    cfg = BacktestConfig(n=int(btd.get("n", 60)), gamma=float(btd.get("gamma", 100.0)),
                         rf=float(btd.get("rf", 0.0)),
                         estimator_mode=btd.get("estimator_mode", "rolling_sample"))
    schemes = tuple(ResampleScheme(s["kind"], int(s.get("b", 1)))
                    for s in doc.get("schemes", [{"kind": "iid_shuffle"}]))
    return ScenarioConfig(
        universe=specs, K=int(doc.get("K", 1000)), T=int(doc.get("T", 480)),
        backtest=cfg, noise=doc.get("noise", "constant"), schemes=schemes,
        blocksize_grid=tuple(doc.get("blocksize_grid", DEFAULT_BLOCKSIZE_GRID)),
        sweep_scheme_kind=doc.get("sweep_scheme_kind", "block_shuffle"),
        dimension_grid=tuple(doc.get("dimension_grid", DEFAULT_DIMENSION_GRID)),
        master_seed=int(doc.get("master_seed", 171717)),
        workers=doc.get("workers"), recipe=recipe)


def default_cross_section(noise: str = "constant", **overrides) -> ScenarioConfig:
    """Paper-default cross-section scenario (153 assets, K=1000, T=480, n=60, gamma=100)."""
    recipe = overrides.pop("recipe", None) or UniverseRecipe()
    cfg = ScenarioConfig(universe=jkp_like_universe(recipe), noise=noise,
                         recipe=recipe, **overrides)
    return cfg


def default_dimension(**overrides) -> ScenarioConfig:
    """Dimension-sweep scenario: a homogeneous ladder of median-spec clones.

    Uses diagonal rolling variance estimates, matching the diagonal
    multivariate data-generating process.
    """
    recipe = overrides.pop("recipe", None) or UniverseRecipe()
    grid = overrides.pop("dimension_grid", DEFAULT_DIMENSION_GRID)
    overrides.setdefault("backtest", BacktestConfig(n=60, gamma=100.0,
                                                    estimator_mode="rolling_diagonal"))
    ladder = clone_ladder(median_spec(recipe), max(grid))
    return ScenarioConfig(universe=ladder, dimension_grid=grid, recipe=None, **overrides)


def config_hash(config: ScenarioConfig) -> str:
    text = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# cross-section
# ---------------------------------------------------------------------------

@dataclass
class CrossSectionRow:
    asset_id: str
    scheme: str
    theta: float
    psi: float
    svr: float
    phi: float
    estimate: analysis.BiasEstimate
    bounds: analysis.BoundSet
    dependence: analysis.DependenceComponents
    std_mean: float
    std_var: float
    std_sr: float
    ratio_mean: float
    ratio_var: float
    ratio_sr: float

    def to_dict(self) -> dict:
        d = {"asset_id": self.asset_id, "scheme": self.scheme, "theta": self.theta,
             "psi": self.psi, "svr": self.svr, "phi": self.phi,
             "std_mean": self.std_mean, "std_var": self.std_var, "std_sr": self.std_sr,
             "ratio_mean": self.ratio_mean, "ratio_var": self.ratio_var,
             "ratio_sr": self.ratio_sr,
             "ttd": self.dependence.ttd, "wtd": self.dependence.wtd}
        d.update(self.estimate.to_dict())
        b = self.bounds.to_dict()
        d.update({"bound_mean": b["mean_bound"], "bound_var": b["var_bound"],
                  "bound_sr_analytical": b["sr_analytical"],
                  "bound_sr_numerical": b["sr_numerical"],
                  "flags": ";".join(b["flags"])})
        return d


@dataclass
class CrossSectionReport:
    rows: list
    percentiles: dict
    r2_vs_ttd: dict
    coupling: dict
    failures: list
    config: dict

    def rows_for(self, scheme_tag: str):
        return [r for r in self.rows if r.scheme == scheme_tag]


_PCTS = (5, 25, 50, 75, 95)


def _asset_job(config: ScenarioConfig, a: int):
    spec = config.universe[a]
    cfg = config.backtest
    X = simulate_batch(spec, config.T, config.K, config.master_seed,
                       asset_index=a, use_garch=config.use_garch)
    rows = []
    for scheme in config.schemes:
        est = analysis.mc_bias(spec, cfg, config.K, config.T, config.master_seed,
                               scheme=scheme, _panel=X[:, :, None])
        bset = analysis.bounds_for_spec(spec, cfg.gamma, cfg.n)
        dep = analysis.dependence_components_param(spec, cfg.n)

        def _ratio(bias, bound):
            return abs(bias) / abs(bound) if bound not in (0.0,) and np.isfinite(bound) \
                and bound != 0 else np.nan

        rows.append(CrossSectionRow(
            asset_id=spec.id, scheme=scheme.tag,
            theta=spec.observables.theta, psi=spec.observables.psi,
            svr=spec.observables.r2, phi=spec.latent.phi,
            estimate=est, bounds=bset, dependence=dep,
            std_mean=est.bias_mean / est.se_standard_mean,
            std_var=est.bias_var / est.se_standard_var,
            std_sr=est.bias_sr / est.se_standard_sr,
            ratio_mean=_ratio(est.bias_mean, bset.mean_bound),
            ratio_var=_ratio(est.bias_var, bset.var_bound),
            ratio_sr=_ratio(est.bias_sr, bset.sr_numerical)))
    return rows


def _parallel(config: ScenarioConfig, fn, items):
    workers = config.effective_workers()
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _ols_r2(x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    if x.size < 2 or np.ptp(x) == 0:
        raise RankDeficient("need >= 2 distinct points")
    X = np.column_stack([np.ones_like(x), x])
    beta = np.linalg.solve(X.T @ X, X.T @ y)
    resid = y - X @ beta
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1 - float(resid @ resid) / ss_tot
    return {"intercept": float(beta[0]), "slope": float(beta[1]),
            "r2": float(r2), "n_obs": int(x.size)}


def run_bias_cross_section(config: ScenarioConfig) -> CrossSectionReport:
    """Per-asset Monte Carlo bias, bounds, dependence and the aggregate tables."""
    failures = []

    def job(a):
        try:
            return _asset_job(config, a)
        except ResampleLabError as e:
            failures.append((config.universe[a].id, f"{type(e).__name__}: {e}"))
            return []

    nested = _parallel(config, job, range(len(config.universe)))
    if len(failures) > 0.01 * len(config.universe):
        raise ResampleLabError(f"{len(failures)} assets failed, over the 1% budget")
    rows = [r for sub in nested for r in sub]

    percentiles, r2_vs_ttd, coupling = {}, {}, {}
    for scheme in config.schemes:
        sub = [r for r in rows if r.scheme == scheme.tag]
        std = {"mean": np.array([abs(r.std_mean) for r in sub]),
               "var": np.array([abs(r.std_var) for r in sub]),
               "sharpe": np.array([abs(r.std_sr) for r in sub])}
        percentiles[scheme.tag] = {
            stat: [float(np.percentile(v, p)) for p in _PCTS]
            for stat, v in std.items()}
        ttd = [r.dependence.ttd for r in sub]

        def _r2_or_nan(y):
            try:
                return _ols_r2(ttd, y)["r2"]
            except RankDeficient:
                return float("nan")

        r2_vs_ttd[scheme.tag] = {
            "mean": _r2_or_nan([r.estimate.bias_mean for r in sub]),
            "var": _r2_or_nan([r.estimate.bias_var for r in sub]),
            "sharpe": _r2_or_nan([r.estimate.bias_sr for r in sub])}
        try:
            coupling[scheme.tag] = coupling_report(sub)
        except RankDeficient:
            coupling[scheme.tag] = {"intercept": float("nan"), "slope": float("nan"),
                                    "r2": float("nan"), "n_obs": len(sub)}
    return CrossSectionReport(rows=rows, percentiles=percentiles,
                              r2_vs_ttd=r2_vs_ttd, coupling=coupling,
                              failures=failures, config=config.to_dict())


def coupling_report(rows) -> dict:
    """OLS of the variance bias on the mean bias across assets."""
    return _ols_r2([r.estimate.bias_mean for r in rows],
                   [r.estimate.bias_var for r in rows])


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def run_blocksize_sweep(config: ScenarioConfig):
    """Cross-sectional mean |bias| per block size, normalized by b = 1.

    The sweep resamples blocks without repetition (block_shuffle) by
    default, so b = 1 coincides with plain IID shuffling; set
    ``sweep_scheme_kind`` to "block" for the with-replacement bootstrap.
    """
    grid = config.blocksize_grid
    if 1 not in grid:
        raise ValueError("blocksize grid must include b = 1, the normalizer")
    make = block_shuffle if config.sweep_scheme_kind == "block_shuffle" else block
    cfg = config.backtest

    def job(a):
        spec = config.universe[a]
        X = simulate_batch(spec, config.T, config.K, config.master_seed,
                           asset_index=a, use_garch=config.use_garch)
        out = {}
        for b in grid:
            est = analysis.mc_bias(spec, cfg, config.K, config.T, config.master_seed,
                                   scheme=make(b), _panel=X[:, :, None])
            out[b] = est
        return out

    per_asset = _parallel(config, job, range(len(config.universe)))
    rows = []
    base = {}
    for b in grid:
        stats = {}
        for stat in ("mean", "var", "sr"):
            vals = np.array([abs(getattr(r[b], f"bias_{stat}")) for r in per_asset])
            ses = np.array([getattr(r[b], f"se_{stat}") for r in per_asset])
            stats[stat] = (float(vals.mean()),
                           float(np.sqrt(np.sum(ses**2)) / len(vals)))
        if b == 1:
            base = {s: stats[s][0] for s in stats}
        rows.append({"b": b,
                     **{f"mean_abs_bias_{s}": stats[s][0] for s in stats},
                     **{f"se_{s}": stats[s][1] for s in stats},
                     **{f"normalized_{s}": stats[s][0] / base[s] for s in stats},
                     **{f"se_normalized_{s}": stats[s][1] / base[s] for s in stats}})
    return rows


def run_dimension_sweep(config: ScenarioConfig):
    """Standardized |bias| per portfolio dimension M over a nested ladder."""
    grid = sorted(config.dimension_grid)
    m_max = max(grid)
    if len(config.universe) < m_max:
        raise ValueError(f"universe has {len(config.universe)} assets, grid needs {m_max}")
    scheme = config.schemes[0]
    cfg = config.backtest
    cols = _parallel(config, lambda a: simulate_batch(
        config.universe[a], config.T, config.K, config.master_seed,
        asset_index=a, use_garch=config.use_garch), range(m_max))
    X = np.stack(cols, axis=2)
    del cols
    Xr = resample_panel(X, scheme, config.master_seed, specs=config.universe[:m_max])
    rows = []
    for m in grid:
        mu_s, var_s, sr_s = moments_panel(realized_panel(X[:, :, :m], cfg))
        mu_r, var_r, sr_r = moments_panel(realized_panel(Xr[:, :, :m], cfg))
        row = {"M": m}
        for stat, (s, r) in {"mean": (mu_s, mu_r), "var": (var_s, var_r),
                             "sr": (sr_s, sr_r)}.items():
            d = r - s
            ok = np.isfinite(d)
            d = d[ok]
            sd_std = s[ok].std(ddof=1)
            row[f"bias_{stat}"] = float(d.mean())
            row[f"se_{stat}"] = float(d.std(ddof=1) / np.sqrt(d.size))
            row[f"std_{stat}"] = float(abs(d.mean()) / sd_std)
            row[f"se_std_{stat}"] = float(d.std(ddof=1) / np.sqrt(d.size) / sd_std)
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# output files
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(row[h]) for h in header))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_manifest(out_dir, config: ScenarioConfig, command: str, extra=None):
    doc = {"command": command, "config_hash": config_hash(config),
           "master_seed": config.master_seed, "package_version": _PKG_VERSION,
           "config": config.to_dict()}
    if extra:
        doc.update(extra)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    return path


def cross_section_tables(report: CrossSectionReport) -> dict:
    """Plot-ready tables keyed by file name."""
    tables = {}
    row_dicts = [r.to_dict() for r in report.rows]
    full_cols = list(row_dicts[0].keys()) if row_dicts else []
    tables["cross_section.csv"] = (full_cols, row_dicts)

    fig1 = [{"asset_id": r.asset_id, "scheme": r.scheme, "theta": r.theta,
             "psi": r.psi, "ratio_mean": r.ratio_mean, "ratio_var": r.ratio_var,
             "ratio_sr": r.ratio_sr, "flags": ";".join(r.bounds.flags)}
            for r in report.rows]
    tables["fig1_ratios.csv"] = (["asset_id", "scheme", "theta", "psi", "ratio_mean",
                                  "ratio_var", "ratio_sr", "flags"], fig1)

    t1 = [{"scheme": tag, "stat": stat, "r2_vs_ttd": d[stat]}
          for tag, d in sorted(report.r2_vs_ttd.items()) for stat in sorted(d)]
    tables["table1_r2.csv"] = (["scheme", "stat", "r2_vs_ttd"], t1)

    t2 = [{"scheme": tag, "stat": stat,
           **{f"p{p}": v for p, v in zip(_PCTS, d[stat])}}
          for tag, d in sorted(report.percentiles.items()) for stat in sorted(d)]
    tables["table2_percentiles.csv"] = (
        ["scheme", "stat"] + [f"p{p}" for p in _PCTS], t2)

    fig8 = [{"scheme": tag, **cp} for tag, cp in sorted(report.coupling.items())]
    tables["fig8_coupling.csv"] = (["scheme", "intercept", "slope", "r2", "n_obs"], fig8)
    return tables


def write_results_json(report: CrossSectionReport, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    results = {"rows": [r.to_dict() for r in report.rows],
               "percentiles": report.percentiles,
               "r2_vs_ttd": report.r2_vs_ttd,
               "coupling": report.coupling,
               "failures": report.failures,
               "config": report.config}
    with open(os.path.join(out_dir, "results.json"), "w", encoding="utf-8") as fh:
        json.dump(results, fh, indent=2, sort_keys=True)


def write_cross_section(report: CrossSectionReport, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    for name, (header, rows) in cross_section_tables(report).items():
        _write_csv(os.path.join(out_dir, name), header, rows)
    write_results_json(report, out_dir)


def write_blocksize_sweep(rows, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    header = ["b"] + [f"{p}_{s}" for s in ("mean", "var", "sr")
                      for p in ("mean_abs_bias", "normalized", "se", "se_normalized")]
    header = ["b"]
    for s in ("mean", "var", "sr"):
        header += [f"mean_abs_bias_{s}", f"normalized_{s}", f"se_{s}", f"se_normalized_{s}"]
    _write_csv(os.path.join(out_dir, "fig5_blocksize.csv"), header, rows)


def write_dimension_sweep(rows, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    header = ["M"]
    for s in ("mean", "var", "sr"):
        header += [f"bias_{s}", f"std_{s}", f"se_{s}", f"se_std_{s}"]
    _write_csv(os.path.join(out_dir, "fig4_dimension.csv"), header, rows)


def rerender_from_results(results_path: str, out_dir: str):
    """Re-render the cross-section tables from a stored results.json."""
    with open(results_path, "r", encoding="utf-8") as fh:
        results = json.load(fh)
    rows = results["rows"]
    os.makedirs(out_dir, exist_ok=True)
    if rows:
        _write_csv(os.path.join(out_dir, "cross_section.csv"), list(rows[0].keys()), rows)
        fig1_cols = ["asset_id", "scheme", "theta", "psi", "ratio_mean",
                     "ratio_var", "ratio_sr", "flags"]
        _write_csv(os.path.join(out_dir, "fig1_ratios.csv"), fig1_cols, rows)
    t1 = [{"scheme": tag, "stat": stat, "r2_vs_ttd": d[stat]}
          for tag, d in sorted(results["r2_vs_ttd"].items()) for stat in sorted(d)]
    _write_csv(os.path.join(out_dir, "table1_r2.csv"), ["scheme", "stat", "r2_vs_ttd"], t1)
    t2 = [{"scheme": tag, "stat": stat, **{f"p{p}": v for p, v in zip(_PCTS, d[stat])}}
          for tag, d in sorted(results["percentiles"].items()) for stat in sorted(d)]
    _write_csv(os.path.join(out_dir, "table2_percentiles.csv"),
               ["scheme", "stat"] + [f"p{p}" for p in _PCTS], t2)
    fig8 = [{"scheme": tag, **cp} for tag, cp in sorted(results["coupling"].items())]
    _write_csv(os.path.join(out_dir, "fig8_coupling.csv"),
               ["scheme", "intercept", "slope", "r2", "n_obs"], fig8)
