import numpy as np
import pytest

from resample_lab import dgp, portfolio
from resample_lab.errors import SingularCovariance, WindowOutOfRange
from resample_lab.portfolio import BacktestConfig

SPEC = dgp.AssetSpec.from_observables(
    "a", dgp.ObservableMoments(mu=0.00225, sigma2_R=0.008, psi=0.08, r2=0.39))


def path_of(values):
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return dgp.SamplePath(returns=arr, specs=(SPEC,) * arr.shape[1], seed=None)


def known_cfg(n, gamma=1.0, var=0.01, rf=0.0, m=1):
    return BacktestConfig(n=n, gamma=gamma, rf=rf, estimator_mode="known",
                          known_covariance=np.eye(m) * var)


def test_rolling_mean():
    p = path_of([0.1, -0.05, 0.02])
    assert portfolio.rolling_mean(p, 2, 2)[0] == pytest.approx(0.025)
    assert portfolio.rolling_mean(p, 1, 1)[0] == pytest.approx(0.1)
    const = path_of([0.03] * 5)
    assert portfolio.rolling_mean(const, 4, 3)[0] == pytest.approx(0.03)
    with pytest.raises(WindowOutOfRange):
        portfolio.rolling_mean(p, 1, 2)
    with pytest.raises(WindowOutOfRange):
        portfolio.rolling_mean(p, 4, 2)


def test_rolling_covariance():
    p = path_of([0.01, 0.03])
    cfg = BacktestConfig(n=2, gamma=1.0)
    cov = portfolio.rolling_covariance(p, 2, 2, cfg)
    assert cov[0, 0] == pytest.approx(0.0002)

    kc = known_cfg(2, var=0.42)
    assert portfolio.rolling_covariance(p, 2, 2, kc)[0, 0] == 0.42

    const = path_of([0.01, 0.01, 0.01])
    with pytest.raises(SingularCovariance):
        portfolio.rolling_covariance(const, 3, 3, cfg)


def test_rolling_covariance_diagonal():
    rng = np.random.default_rng(0)
    p = path_of(rng.normal(0, 0.02, (30, 3)))
    cfg_full = BacktestConfig(n=20, gamma=1.0, estimator_mode="rolling_sample")
    cfg_diag = BacktestConfig(n=20, gamma=1.0, estimator_mode="rolling_diagonal")
    full = portfolio.rolling_covariance(p, 25, 20, cfg_full)
    diag = portfolio.rolling_covariance(p, 25, 20, cfg_diag)
    assert np.allclose(np.diag(full), np.diag(diag))
    assert np.count_nonzero(diag - np.diag(np.diag(diag))) == 0
    manual = np.cov(p.returns[5:25], rowvar=False, ddof=1)
    assert np.allclose(full, manual)


def test_mv_weights():
    assert portfolio.mv_weights(np.zeros(3), np.eye(3) * 0.1, 5.0) == pytest.approx(np.zeros(3))
    w = portfolio.mv_weights([0.1], [[0.01]], 1.0)
    assert w[0] == pytest.approx(10.0)
    w1 = portfolio.mv_weights([0.1, 0.05], np.diag([0.01, 0.02]), 2.0)
    w2 = portfolio.mv_weights([0.1, 0.05], np.diag([0.01, 0.02]), 4.0)
    assert np.allclose(w1, 2 * w2)
    with pytest.raises(SingularCovariance):
        portfolio.mv_weights([0.1, 0.1], np.ones((2, 2)), 1.0)


def test_realized_returns_hand_example():
    p = path_of([0.1, -0.05, 0.02])
    out = portfolio.realized_returns(p, known_cfg(1))
    assert out == pytest.approx([10 * -0.05, -5 * 0.02])


def test_realized_returns_constant_path():
    c = 0.02
    p = path_of([c] * 8)
    out = portfolio.realized_returns(p, known_cfg(3, gamma=2.0, var=0.01))
    assert out == pytest.approx([c**2 / (2.0 * 0.01)] * 5)


def test_realized_zero_path_known_cov():
    p = path_of([0.0] * 6)
    out = portfolio.realized_returns(p, known_cfg(2))
    assert np.all(out == 0.0)


def test_output_length():
    rng = np.random.default_rng(3)
    for T, n in ((10, 3), (480, 60), (61, 60)):
        p = path_of(rng.normal(0, 0.05, T))
        assert portfolio.realized_returns(p, known_cfg(n)).size == T - n
    with pytest.raises(WindowOutOfRange):
        portfolio.realized_returns(path_of(rng.normal(0, 1, 5)), known_cfg(5))


def test_no_look_ahead():
    rng = np.random.default_rng(4)
    base = rng.normal(0, 0.05, 30)
    cfgs = [known_cfg(5), BacktestConfig(n=5, gamma=1.0)]
    for cfg in cfgs:
        ref = portfolio.realized_returns(path_of(base), cfg)
        bumped = base.copy()
        bumped[20:] += 0.5
        out = portfolio.realized_returns(path_of(bumped), cfg)
        # element j is realized at time n + j + 1 (1-based); entries strictly
        # before the first perturbed time are bit-identical
        unaffected = 20 - cfg.n - 1
        assert np.array_equal(ref[:unaffected], out[:unaffected])
        assert not np.array_equal(ref, out)


def test_gamma_scaling():
    rng = np.random.default_rng(5)
    p = path_of(rng.normal(0, 0.05, 40))
    r1 = portfolio.realized_returns(p, known_cfg(6, gamma=1.0))
    r4 = portfolio.realized_returns(p, known_cfg(6, gamma=4.0))
    assert np.allclose(r1, 4.0 * r4)


def test_rolling_sample_singular_window():
    vals = np.concatenate([np.full(6, 0.01), np.random.default_rng(6).normal(0, 0.02, 6)])
    with pytest.raises(SingularCovariance):
        portfolio.realized_returns(path_of(vals), BacktestConfig(n=4, gamma=1.0))


def test_risk_free_rate():
    rng = np.random.default_rng(7)
    x = rng.normal(0.01, 0.05, 20)
    rf = 0.002
    p = path_of(x)
    out = portfolio.realized_returns(p, known_cfg(4, gamma=2.0, var=0.01, rf=rf))
    # manual rollout
    for j, t in enumerate(range(4, 20)):
        w = (x[t - 4:t].mean() - rf) / (2.0 * 0.01)
        expect = w * x[t] + rf * (1 - w)
        assert out[j] == pytest.approx(expect, rel=1e-12)


def test_realized_panel_matches_single_paths():
    rng = np.random.default_rng(8)
    X = rng.normal(0, 0.04, (5, 50, 2))
    for cfg in (known_cfg(10, m=2), BacktestConfig(n=10, gamma=3.0, estimator_mode="rolling_diagonal"),
                BacktestConfig(n=10, gamma=3.0, estimator_mode="rolling_sample")):
        panel = portfolio.realized_panel(X, cfg)
        for k in range(5):
            single = portfolio.realized_returns(
                dgp.SamplePath(returns=X[k], specs=(SPEC, SPEC), seed=None), cfg)
            assert np.allclose(panel[k], single, atol=1e-14)


def test_full_covariance_weights_match_manual():
    rng = np.random.default_rng(9)
    X = rng.normal(0, 0.03, (24, 2))
    p = path_of(X)
    cfg = BacktestConfig(n=12, gamma=2.0, estimator_mode="rolling_sample")
    out = portfolio.realized_returns(p, cfg)
    t = 12  # 1-based window end
    cov = np.cov(X[0:12], rowvar=False, ddof=1)
    w = np.linalg.solve(cov, X[0:12].mean(axis=0)) / 2.0
    assert out[0] == pytest.approx(w @ X[12], rel=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        BacktestConfig(n=0, gamma=1.0)
    with pytest.raises(ValueError):
        BacktestConfig(n=5, gamma=-1.0)
    with pytest.raises(ValueError):
        BacktestConfig(n=5, gamma=1.0, estimator_mode="nope")
    with pytest.raises(ValueError):
        BacktestConfig(n=5, gamma=1.0, estimator_mode="known")
    with pytest.raises(SingularCovariance):
        BacktestConfig(n=5, gamma=1.0, estimator_mode="known",
                       known_covariance=np.zeros((2, 2)))
