import numpy as np
import pytest

from resample_lab import backtest as bt
from resample_lab import dgp
from resample_lab.errors import DegenerateSeries, InvalidProbability
from resample_lab.portfolio import BacktestConfig

SPEC = dgp.AssetSpec.from_observables(
    "a", dgp.ObservableMoments(mu=0.00225, sigma2_R=0.008, psi=0.08, r2=0.39))
IID_SPEC = dgp.AssetSpec.from_observables(
    "iid", dgp.ObservableMoments(mu=0.005, sigma2_R=0.008, psi=0.0, r2=0.0))


def path_of(values):
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return dgp.SamplePath(returns=arr, specs=(SPEC,) * arr.shape[1], seed=None)


def known_cfg(n, gamma=100.0, var=0.008):
    return BacktestConfig(n=n, gamma=gamma, estimator_mode="known",
                          known_covariance=np.array([[var]]))


def test_sharpe_moments():
    m = bt.sharpe_moments([0.01, 0.03])
    assert m.mu_p == pytest.approx(0.02)
    assert m.sigma2_p == pytest.approx(0.0002)
    assert m.sharpe == pytest.approx(np.sqrt(2), rel=1e-6)
    assert m.count == 2

    sym = bt.sharpe_moments([-0.04, 0.04])
    assert sym.mu_p == 0.0 and sym.sharpe == 0.0

    with pytest.raises(DegenerateSeries):
        bt.sharpe_moments([0.01, 0.01, 0.01])
    with pytest.raises(ValueError):
        bt.sharpe_moments([0.01])


def test_standard_backtest_count():
    p = dgp.simulate_path([SPEC], 480, 1)
    m = bt.standard_backtest(p, known_cfg(60))
    assert m.count == 420
    again = bt.standard_backtest(p, known_cfg(60))
    assert m == again
    with pytest.raises(DegenerateSeries):
        bt.standard_backtest(path_of([0.0] * 10), known_cfg(3))


def test_shuffle_preserves_multiset_and_is_deterministic():
    p = dgp.simulate_path([SPEC, SPEC], 50, 2)
    s1 = bt.shuffle_path(p, 7)
    s2 = bt.shuffle_path(p, 7)
    assert np.array_equal(s1.returns, s2.returns)
    assert s1.origin == "resampled(iid_shuffle)"
    # rows move together: the sorted rows coincide exactly
    key = np.lexsort(p.returns.T)
    key_s = np.lexsort(s1.returns.T)
    assert np.array_equal(p.returns[key], s1.returns[key_s])
    assert not np.array_equal(p.returns, s1.returns)
    # input untouched, output does not alias input storage
    assert not np.shares_memory(s1.returns, p.returns)


def test_block_resample_b1_draws_input_rows():
    p = dgp.simulate_path([SPEC], 40, 3)
    r = bt.block_resample(p, 1, 11)
    pool = set(np.round(p.returns[:, 0], 12))
    assert set(np.round(r.returns[:, 0], 12)) <= pool
    assert r.origin == "resampled(block(1))"
    assert np.array_equal(r.returns, bt.block_resample(p, 1, 11).returns)


def test_block_resample_full_block_is_rotation():
    T = 5
    p = path_of(np.arange(T) * 0.01)
    rotations = {tuple(np.roll(np.arange(T), -s)) for s in range(T)}
    for seed in range(50):
        r = bt.block_resample(p, T, seed)
        idx = tuple(int(round(v / 0.01)) for v in r.returns[:, 0])
        assert idx in rotations


def test_block_shuffle_permutes_blocks():
    T, b = 20, 5
    p = path_of(np.arange(T) * 0.01)
    r = bt.block_shuffle_path(p, b, 4)
    vals = np.round(r.returns[:, 0] / 0.01).astype(int)
    assert sorted(vals) == list(range(T))  # permutation, no repetition
    starts = vals.reshape(-1, b)[:, 0]
    for row in vals.reshape(-1, b):
        assert np.array_equal(row, np.arange(row[0], row[0] + b))
    assert set(starts) == {0, 5, 10, 15}


def test_resampled_backtest_identity_fixed_point():
    p = dgp.simulate_path([SPEC], 200, 5)
    cfg = known_cfg(24)
    std = bt.standard_backtest(p, cfg)
    res = bt.resampled_backtest(p, cfg, bt.identity_scheme(), 123)
    assert std == res


def test_shuffle_backtest_unbiased_without_signal():
    cfg = known_cfg(24)
    K, T = 600, 160
    X = dgp.simulate_batch(IID_SPEC, T, K, 17)
    from resample_lab.portfolio import realized_panel
    mu_s, _, sr_s = bt.moments_panel(realized_panel(X, cfg))
    Xr = bt.resample_panel(X, bt.iid_shuffle(), 17)
    mu_r, _, sr_r = bt.moments_panel(realized_panel(Xr, cfg))
    d = sr_r - sr_s
    assert abs(d.mean()) < 3 * d.std(ddof=1) / np.sqrt(K)


def test_block_bias_smaller_than_shuffle_bias_on_ar_path():
    # strong premium persistence so the dependence term dominates
    spec = dgp.AssetSpec.from_observables(
        "ar", dgp.ObservableMoments(mu=0.0052, sigma2_R=0.008, psi=0.2, r2=0.4))
    cfg = known_cfg(24)
    K, T = 1500, 240
    X = dgp.simulate_batch(spec, T, K, 19)
    from resample_lab.portfolio import realized_panel
    mu_s, _, _ = bt.moments_panel(realized_panel(X, cfg))
    res = {}
    for scheme in (bt.iid_shuffle(), bt.block_shuffle(10)):
        Xr = bt.resample_panel(X, scheme, 19)
        mu_r, _, _ = bt.moments_panel(realized_panel(Xr, cfg))
        res[scheme.kind] = (mu_r - mu_s).mean()
    assert abs(res["block_shuffle"]) < abs(res["iid_shuffle"])


def test_resample_panel_matches_single_path_ops():
    from resample_lab.seeding import RESAMPLE, child_rng
    X = dgp.simulate_batch(SPEC, 60, 4, 23)
    for scheme in (bt.iid_shuffle(), bt.block(7), bt.block_shuffle(6)):
        Xr = bt.resample_panel(X, scheme, 23)
        for k in range(4):
            p = dgp.SamplePath(returns=X[k][:, None], specs=(SPEC,), seed=None)
            one = bt.resample_path(p, scheme, child_rng(23, RESAMPLE, k))
            assert np.array_equal(Xr[k], one.returns[:, 0])


def test_surrogate_moments():
    p = dgp.simulate_path([SPEC], 50_000, 29)
    s = bt.surrogate_path(p, 7)
    x = s.returns[:, 0]
    assert x.mean() == pytest.approx(SPEC.observables.mu, abs=4 * np.sqrt(0.008 / 50_000))
    assert x.var() == pytest.approx(0.008, rel=0.05)
    d = x - x.mean()
    assert abs((d[:-1] @ d[1:]) / (d @ d)) < 3 / np.sqrt(50_000)


def test_bagged_sharpe_single_bag_and_identity():
    cfg = known_cfg(24)
    p = dgp.simulate_path([SPEC], 200, 31)
    rep = bt.bagged_sharpe(p, cfg, bags=1, scheme=bt.iid_shuffle(), seed=3)
    from resample_lab.seeding import BOOTSTRAP, child_rng
    single = bt.resampled_backtest(p, cfg, bt.iid_shuffle(), child_rng(3, BOOTSTRAP, 0, 0))
    assert rep.mean_sharpe == pytest.approx(single.sharpe)

    paths = [dgp.simulate_path([SPEC], 200, 31, path_index=k) for k in range(12)]
    rep = bt.bagged_sharpe(paths, cfg, bags=6, scheme=bt.identity_scheme(), seed=3)
    assert rep.rho == 1.0
    assert rep.var_bagged == pytest.approx(rep.var_single, rel=1e-12)


def test_bagging_variance_shrinks_and_flattens():
    cfg = known_cfg(24)
    paths = [dgp.simulate_path([SPEC], 160, 37, path_index=k) for k in range(60)]
    reps = {k: bt.bagged_sharpe(paths, cfg, bags=k, scheme=bt.iid_shuffle(), seed=5)
            for k in (2, 32)}
    assert reps[32].var_bagged < reps[2].var_bagged
    r = reps[32]
    assert r.var_bagged >= r.rho * r.var_single - 1e-12
    assert 0.0 <= r.rho <= 1.0


def test_required_sample_size():
    n = bt.required_sample_size(0.5)
    assert 300 <= n <= 800
    big = bt.required_sample_size(1000.0)
    assert big == 1
    n1 = bt.required_sample_size(0.25)
    n2 = bt.required_sample_size(0.5)
    assert n1 / n2 == pytest.approx(4.0, rel=0.01)
    with pytest.raises(InvalidProbability):
        bt.required_sample_size(0.5, power=1.2)
    with pytest.raises(InvalidProbability):
        bt.required_sample_size(0.5, alpha=0.0)
    with pytest.raises(ValueError):
        bt.required_sample_size(-0.5)


def test_scheme_tags():
    assert bt.iid_shuffle().tag == "iid_shuffle"
    assert bt.block(5).tag == "block(5)"
    assert bt.block_shuffle(10).tag == "block_shuffle(10)"
    with pytest.raises(ValueError):
        bt.ResampleScheme("bogus")
    with pytest.raises(ValueError):
        bt.ResampleScheme("block", 0)
