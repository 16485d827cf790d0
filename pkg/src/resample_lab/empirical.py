"""Historical-data pipeline.

Ingests a monthly return table, computes per-asset resampled-minus-standard
backtest differences, attaches stationary-bootstrap standard errors and
studentized tests, estimates bounds and dependence components from the
data, and regresses the differences on the dependence components.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats as sstats

from . import analysis
from .backtest import (ResampleScheme, iid_shuffle, moments_panel, resample_panel,
                       sharpe_moments)
from .dgp import SamplePath
from .errors import (DegenerateSeries, InsufficientData, MissingValue,
                     NonMonotoneDates, ParseError, RankDeficient, ResampleLabError)
from .portfolio import BacktestConfig, realized_panel, realized_returns
from .seeding import BOOTSTRAP, RESAMPLE, child_rng, child_sequence

_DATE_RE = re.compile(r"^(\d{4})-(\d{2})$")


@dataclass(frozen=True)
class ReturnTable:
    """Monthly return panel: ordered YYYY-MM dates, T x M decimals."""

    dates: tuple
    returns: np.ndarray
    asset_ids: tuple

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        if r.shape != (len(self.dates), len(self.asset_ids)):
            raise ValueError("returns shape does not match dates x asset_ids")
        if r.shape[0] < 2:
            raise ValueError("need at least two months of data")
        object.__setattr__(self, "returns", r)

    @property
    def T(self) -> int:
        return self.returns.shape[0]

    def column(self, a: int) -> np.ndarray:
        return self.returns[:, a]


@dataclass
class DifferenceRecord:
    """Per-asset resampled-minus-standard differences with bootstrap inference."""

    asset_id: str
    d_mean: float = np.nan
    d_var: float = np.nan
    d_sr: float = np.nan
    se_diff_mean: float | None = None
    se_diff_var: float | None = None
    se_diff_sr: float | None = None
    se_standard_mean: float | None = None
    se_standard_var: float | None = None
    se_standard_sr: float | None = None
    p_mean: float | None = None
    p_var: float | None = None
    p_sr: float | None = None
    error: str | None = None


@dataclass(frozen=True)
class RegressionSummary:
    """OLS fit of differences on dependence components."""

    r2: float
    coefficients: dict
    f_p_value: float
    n_obs: int


def _parse_month(token: str, row: int):
    m = _DATE_RE.match(token.strip())
    if not m:
        raise ParseError(f"row {row}: date {token!r} is not YYYY-MM", row=row, column="date")
    return int(m.group(1)) * 12 + int(m.group(2))


def load_returns(source) -> ReturnTable:
    """Parse a `date,<id1>,...,<idM>` CSV of monthly decimal returns.

    ``source`` may be a path, a text stream, or the CSV text itself.
    Errors carry the offending row (1-based, header = row 1) and column.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        s = str(source)
        if "\n" in s or "," in s:
            text = s
        else:
            with open(s, "r", encoding="utf-8") as fh:
                text = fh.read()
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r]
    if not rows:
        raise ParseError("empty CSV")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2 or header[0].lower() != "date":
        raise ParseError("header must be 'date,<id1>,...,<idM>'", row=1, column="date")
    ids = tuple(header[1:])
    dates, data = [], []
    prev = None
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"row {i}: expected {len(header)} cells, got {len(row)}", row=i)
        key = _parse_month(row[0], i)
        if prev is not None and key <= prev:
            raise NonMonotoneDates(f"row {i}: date {row[0]} not after the previous row")
        prev = key
        vals = []
        for j, cell in enumerate(row[1:], start=1):
            cell = cell.strip()
            if cell == "":
                raise MissingValue(f"row {i}, column {ids[j-1]!r}: blank cell",
                                   row=i, column=ids[j - 1])
            try:
                v = float(cell)
            except ValueError:
                raise MissingValue(f"row {i}, column {ids[j-1]!r}: {cell!r} is not a number",
                                   row=i, column=ids[j - 1])
            if not np.isfinite(v):
                raise MissingValue(f"row {i}, column {ids[j-1]!r}: non-finite value",
                                   row=i, column=ids[j - 1])
            vals.append(v)
        dates.append(row[0].strip())
        data.append(vals)
    return ReturnTable(dates=tuple(dates), returns=np.array(data), asset_ids=ids)


def asset_seed(master_seed: int, asset_index: int) -> int:
    """Stable per-asset 64-bit seed derived from the master seed."""
    ss = child_sequence(master_seed, RESAMPLE, asset_index)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _column_moments(x: np.ndarray, cfg: BacktestConfig):
    rp = realized_panel(x[None, :, None], cfg)[0]
    return sharpe_moments(rp)


def _resampled_moments(x: np.ndarray, cfg: BacktestConfig, scheme: ResampleScheme,
                       seed: int, shuffles: int):
    """Average resampled moments over `shuffles` independent resamples."""
    out = np.zeros(3)
    for s in range(shuffles):
        rng = child_rng(seed, RESAMPLE, 0, s)
        path = SamplePath(returns=x[:, None], specs=(), seed=None, origin="historical")
        from .backtest import resample_path
        rs = resample_path(path, scheme, rng)
        m = _column_moments(rs.returns[:, 0], cfg)
        out += (m.mu_p, m.sigma2_p, m.sharpe)
    return out / shuffles


def compute_differences(table: ReturnTable, cfg: BacktestConfig,
                        scheme: ResampleScheme | None = None, seed: int = 0,
                        shuffles: int = 1):
    """Per-asset differences (resampled minus standard); inference fields unset.

    Each asset is backtested univariately.  Per-asset failures are recorded
    on the record, not raised.
    """
    if scheme is None:
        scheme = iid_shuffle()
    records = []
    for a, aid in enumerate(table.asset_ids):
        rec = DifferenceRecord(asset_id=aid)
        try:
            x = table.column(a)
            std = _column_moments(x, cfg)
            if scheme.kind == "identity":
                res = np.array([std.mu_p, std.sigma2_p, std.sharpe])
            else:
                res = _resampled_moments(x, cfg, scheme, asset_seed(seed, a), shuffles)
            rec.d_mean = float(res[0] - std.mu_p)
            rec.d_var = float(res[1] - std.sigma2_p)
            rec.d_sr = float(res[2] - std.sharpe)
        except ResampleLabError as e:
            rec.error = f"{type(e).__name__}: {e}"
        records.append(rec)
    return records


# ---------------------------------------------------------------------------
# stationary bootstrap
# ---------------------------------------------------------------------------

def stationary_bootstrap_indices(rng, T: int, B: int, mean_block: float) -> np.ndarray:
    """(B, T) index matrix: geometric block lengths, circular wrapping."""
    p = 1.0 / float(mean_block)
    idx = np.empty((B, T), dtype=np.intp)
    idx[:, 0] = rng.integers(0, T, B)
    restart = rng.random((B, T)) < p
    fresh = rng.integers(0, T, (B, T))
    for t in range(1, T):
        cont = (idx[:, t - 1] + 1) % T
        idx[:, t] = np.where(restart[:, t], fresh[:, t], cont)
    return idx


def stationary_bootstrap_se(series, statistic, mean_block: float = 10.0,
                            B: int = 999, seed: int = 0) -> float:
    """Stationary-bootstrap standard error of ``statistic`` on the series."""
    x = np.asarray(series, dtype=float)
    if x.size < 10:
        raise InsufficientData("need at least 10 observations")
    if mean_block < 1:
        raise ValueError("mean_block must be >= 1")
    if B < 100:
        raise ValueError("B must be >= 100")
    rng = child_rng(seed, BOOTSTRAP, 0)
    idx = stationary_bootstrap_indices(rng, x.size, B, mean_block)
    vals = np.array([statistic(x[idx[b]]) for b in range(B)])
    return float(vals.std(ddof=1))


def _panel_stats(X: np.ndarray, cfg: BacktestConfig):
    """(mean, var, sharpe) arrays over the rows of a (B, T) panel."""
    return moments_panel(realized_panel(X[:, :, None], cfg))


_STATS = ("mean", "var", "sharpe")


def _bootstrap_differences(x, cfg, scheme, B, mean_block, seed, shuffles=1):
    """Standard stats and resampled-minus-standard differences over B pseudo-series."""
    rng = child_rng(seed, BOOTSTRAP, 0)
    idx = stationary_bootstrap_indices(rng, x.size, B, mean_block)
    P = x[idx]
    std = np.column_stack(_panel_stats(P, cfg))
    res = np.zeros_like(std)
    for s in range(shuffles):
        Pr = resample_panel(P, scheme, asset_seed(seed, 1) + s)
        res += np.column_stack(_panel_stats(Pr, cfg))
    res /= shuffles
    return std, res - std


def studentized_difference_test(path_column, cfg: BacktestConfig,
                                scheme: ResampleScheme | None = None,
                                B: int = 999, mean_block: float = 10.0,
                                seed: int = 0, statistic: str = "sharpe",
                                shuffles: int = 1) -> float:
    """Two-sided studentized bootstrap p-value for H0: difference = 0.

    The original series is stationary-bootstrapped; each pseudo-series is
    backtested as-is and after resampling, and the observed difference is
    studentized by the bootstrap standard deviation and compared with the
    bootstrap distribution of mean-centered studentized differences.
    """
    if statistic not in _STATS:
        raise ValueError(f"statistic must be one of {_STATS}")
    if scheme is None:
        scheme = iid_shuffle()
    x = np.asarray(path_column, dtype=float)
    if x.size < max(10, cfg.n + 2):
        raise InsufficientData("series too short for the studentized test")
    if scheme.kind == "identity":
        return 1.0
    col = _STATS.index(statistic)
    std = _column_moments(x, cfg)
    res = _resampled_moments(x, cfg, scheme, asset_seed(seed, 0), shuffles)
    d_obs = res[col] - (std.mu_p, std.sigma2_p, std.sharpe)[col]
    _, diffs = _bootstrap_differences(x, cfg, scheme, B, mean_block, seed, shuffles)
    db = diffs[:, col]
    db = db[np.isfinite(db)]
    if db.size < B // 2:
        raise DegenerateSeries("too many degenerate bootstrap replicates")
    se = db.std(ddof=1)
    if se == 0:
        return 1.0
    t_obs = abs(d_obs) / se
    t_null = np.abs(db - db.mean()) / se
    return float((1 + np.sum(t_null >= t_obs)) / (db.size + 1))


def estimate_bounds_from_data(series, n: int, gamma: float) -> analysis.BoundSet:
    """Bounds with theta and psi replaced by their sample estimates."""
    x = np.asarray(series, dtype=float)
    if x.size < n + 2:
        raise InsufficientData(f"need at least n + 2 = {n + 2} observations")
    sd = x.std(ddof=1)
    if sd == 0:
        raise DegenerateSeries("constant series")
    theta_hat = x.mean() / sd
    d = x - x.mean()
    psi_hat = (d[:-1] @ d[1:]) / (d @ d)
    return analysis.bounds(float(theta_hat), float(psi_hat), gamma, n)


def regress_differences(y, components, which: str = "ttd") -> RegressionSummary:
    """OLS (with intercept) of differences on dependence components.

    ``y`` is a vector of per-asset differences; ``components`` is a sequence
    of DependenceComponents (or (ttd, wtd) pairs); ``which`` selects the
    regressors: "ttd", "wtd" or "both".
    """
    y = np.asarray(y, dtype=float)
    comp = np.array([(c.ttd, c.wtd) if hasattr(c, "ttd") else tuple(c) for c in components])
    ok = np.isfinite(y) & np.all(np.isfinite(comp), axis=1)
    y, comp = y[ok], comp[ok]
    if which == "ttd":
        X = comp[:, :1]
        names = ["ttd"]
    elif which == "wtd":
        X = comp[:, 1:]
        names = ["wtd"]
    elif which == "both":
        X = comp
        names = ["ttd", "wtd"]
    else:
        raise ValueError("which must be 'ttd', 'wtd' or 'both'")
    m = y.size
    k = X.shape[1]
    if m < k + 2:
        raise RankDeficient(f"need at least {k + 2} assets, got {m}")
    D = np.column_stack([np.ones(m), X])
    if np.linalg.matrix_rank(D) < D.shape[1]:
        raise RankDeficient("collinear regressors")
    beta, *_ = np.linalg.lstsq(D, y, rcond=None)
    resid = y - D @ beta
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0:
        raise RankDeficient("response has zero variance")
    r2 = 1 - ss_res / ss_tot
    dof = m - k - 1
    sigma2 = ss_res / dof if dof > 0 else np.nan
    cov = sigma2 * np.linalg.inv(D.T @ D)
    ses = np.sqrt(np.diag(cov))
    if ss_res == 0 or 1 - r2 <= 0:
        f_p = 0.0
    else:
        f_stat = (r2 / k) / ((1 - r2) / dof)
        f_p = float(sstats.f.sf(f_stat, k, dof))
    coeffs = {"intercept": (float(beta[0]), float(ses[0]))}
    for i, nm in enumerate(names, start=1):
        coeffs[nm] = (float(beta[i]), float(ses[i]))
    return RegressionSummary(r2=float(r2), coefficients=coeffs, f_p_value=f_p, n_obs=m)


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------

@dataclass
class PipelineResult:
    records: list
    bounds: list
    dependence: list
    regressions: dict
    config: dict


def run_pipeline(table: ReturnTable, cfg: BacktestConfig,
                 scheme: ResampleScheme | None = None, seed: int = 0,
                 B: int = 999, mean_block: float = 10.0,
                 shuffles: int = 1) -> PipelineResult:
    """The whole historical pipeline on one return table."""
    if scheme is None:
        scheme = iid_shuffle()
    records = compute_differences(table, cfg, scheme, seed, shuffles)
    bound_rows, dep_rows = [], []
    for a, rec in enumerate(records):
        x = table.column(a)
        try:
            bset = estimate_bounds_from_data(x, cfg.n, cfg.gamma)
            dep = analysis.dependence_components_empirical(x, cfg.n)
        except ResampleLabError as e:
            rec.error = rec.error or f"{type(e).__name__}: {e}"
            bound_rows.append(None)
            dep_rows.append(None)
            continue
        bound_rows.append(bset)
        dep_rows.append(dep)
        if rec.error is not None:
            continue
        a_seed = asset_seed(seed, a)
        std, diffs = _bootstrap_differences(x, cfg, scheme, B, mean_block, a_seed, shuffles)
        se_std = np.nanstd(std, axis=0, ddof=1)
        se_dif = np.nanstd(diffs, axis=0, ddof=1)
        rec.se_standard_mean, rec.se_standard_var, rec.se_standard_sr = map(float, se_std)
        rec.se_diff_mean, rec.se_diff_var, rec.se_diff_sr = map(float, se_dif)
        obs = (rec.d_mean, rec.d_var, rec.d_sr)
        ps = []
        for col in range(3):
            db = diffs[:, col]
            db = db[np.isfinite(db)]
            se = db.std(ddof=1)
            if se == 0 or db.size == 0 or scheme.kind == "identity":
                ps.append(1.0)
                continue
            t_obs = abs(obs[col]) / se
            t_null = np.abs(db - db.mean()) / se
            ps.append(float((1 + np.sum(t_null >= t_obs)) / (db.size + 1)))
        rec.p_mean, rec.p_var, rec.p_sr = ps

    valid = [i for i, r in enumerate(records)
             if r.error is None and dep_rows[i] is not None]
    regs = {}
    if len(valid) >= 3:
        comps = [dep_rows[i] for i in valid]
        for stat, attr in (("mean", "d_mean"), ("var", "d_var"), ("sharpe", "d_sr")):
            yv = np.array([getattr(records[i], attr) for i in valid])
            regs[stat] = {}
            for which in ("ttd", "wtd", "both"):
                try:
                    regs[stat][which] = regress_differences(yv, comps, which)
                except RankDeficient as e:
                    regs[stat][which] = str(e)
    config = {"n": cfg.n, "gamma": cfg.gamma, "rf": cfg.rf,
              "estimator_mode": cfg.estimator_mode, "scheme": scheme.tag,
              "seed": seed, "B": B, "mean_block": mean_block, "shuffles": shuffles}
    return PipelineResult(records=records, bounds=bound_rows,
                          dependence=dep_rows, regressions=regs, config=config)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float) and not np.isfinite(v):
        return "nan"
    return f"{v:.9g}" if isinstance(v, float) else str(v)


def differences_csv(result: PipelineResult) -> str:
    """Render `differences.csv`: one row per asset."""
    cols = ["asset_id", "d_mean", "d_var", "d_sr",
            "se_diff_mean", "se_diff_var", "se_diff_sr",
            "se_standard_mean", "se_standard_var", "se_standard_sr",
            "p_mean", "p_var", "p_sr",
            "bound_mean", "bound_var", "bound_sr_analytical", "bound_sr_numerical",
            "ttd_hat", "wtd_hat", "flags", "error"]
    lines = [",".join(cols)]
    for rec, bset, dep in zip(result.records, result.bounds, result.dependence):
        row = [rec.asset_id,
               _fmt(rec.d_mean), _fmt(rec.d_var), _fmt(rec.d_sr),
               _fmt(rec.se_diff_mean), _fmt(rec.se_diff_var), _fmt(rec.se_diff_sr),
               _fmt(rec.se_standard_mean), _fmt(rec.se_standard_var), _fmt(rec.se_standard_sr),
               _fmt(rec.p_mean), _fmt(rec.p_var), _fmt(rec.p_sr)]
        if bset is None:
            row += ["", "", "", ""]
        else:
            row += [_fmt(bset.mean_bound), _fmt(bset.var_bound),
                    _fmt(bset.sr_analytical), _fmt(bset.sr_numerical)]
        if dep is None:
            row += ["", ""]
        else:
            row += [_fmt(dep.ttd), _fmt(dep.wtd)]
        row.append(";".join(bset.flags) if bset is not None else "")
        row.append(rec.error or "")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def regressions_json(result: PipelineResult) -> str:
    """Render `regressions.json`."""
    doc = {}
    for stat, d in result.regressions.items():
        doc[stat] = {}
        for which, summary in d.items():
            if isinstance(summary, str):
                doc[stat][which] = {"error": summary}
            else:
                doc[stat][which] = {
                    "r2": summary.r2,
                    "f_p_value": summary.f_p_value,
                    "n_obs": summary.n_obs,
                    "coefficients": {k: {"estimate": v[0], "se": v[1]}
                                     for k, v in summary.coefficients.items()},
                }
    return json.dumps({"config": result.config, "regressions": doc}, indent=2)
