import numpy as np
import pytest

from resample_lab import analysis, dgp
from resample_lab.backtest import iid_shuffle, iid_surrogate
from resample_lab.errors import InsufficientData, ThetaNearZero
from resample_lab.portfolio import BacktestConfig


def brute_A(n, phi):
    return sum(phi**k for k in range(1, n + 1)) / n


def brute_B(n, phi):
    return sum(phi ** abs(i - j) for i in range(n) for j in range(n) if i != j) / n**2


def make_spec(theta, s, phi, sigma2_R=0.008):
    mu = theta * np.sqrt(sigma2_R)
    return dgp.AssetSpec.from_observables(
        "t", dgp.ObservableMoments(mu=mu, sigma2_R=sigma2_R, psi=phi * s, r2=s))


def test_sums_match_brute_force():
    for phi in np.arange(0.0, 1.0, 0.05):
        for n in (1, 2, 3, 5, 10, 60, 200):
            assert analysis.sum_A(n, phi) == pytest.approx(brute_A(n, phi), abs=1e-12)
            assert analysis.sum_B(n, phi) == pytest.approx(brute_B(n, phi), abs=1e-12)


def test_sum_examples():
    assert analysis.sum_A(1, 0.5) == pytest.approx(0.5)
    assert analysis.sum_A(2, 0.5) == pytest.approx(0.375)
    assert analysis.sum_A(10**6, 0.9) < 1e-5
    assert analysis.sum_B(1, 0.7) == 0.0
    assert analysis.sum_B(2, 0.5) == pytest.approx(0.25)
    assert analysis.sum_B(60, 0.5) == pytest.approx(1 / 30 - 1 / 900, rel=1e-12)


def test_ratio_R():
    assert analysis.ratio_R(2, 0.5) == pytest.approx(2 / 0.75 - 2, rel=1e-12)
    assert analysis.ratio_R(1, 0.3) == 0.0
    assert analysis.ratio_R(10**5, 0.5) == pytest.approx(2.0, abs=1e-4)
    for n in (2, 5, 60):
        for phi in (0.05, 0.5, 0.9):
            assert analysis.ratio_R(n, phi) == pytest.approx(
                analysis.sum_B(n, phi) / analysis.sum_A(n, phi), abs=1e-10)


def test_theoretical_bias_mean():
    spec = make_spec(0.2, 0.2, 0.5)
    assert analysis.theoretical_bias_mean(spec, 2, 100) == pytest.approx(-7.5e-4, rel=1e-12)
    zero = make_spec(0.2, 0.2, 0.0)
    assert analysis.theoretical_bias_mean(zero, 10, 100) == 0.0
    # containment: |bias| <= psi / gamma for 0 <= phi < 1
    for phi in np.arange(0.0, 1.0, 0.1):
        for n in (1, 5, 60):
            s = 0.3
            spc = make_spec(0.1, s, phi)
            b = analysis.theoretical_bias_mean(spc, n, 50.0)
            assert b <= 0.0
            assert abs(b) <= phi * s / 50.0 + 1e-15


def test_theoretical_bias_var():
    spec = make_spec(0.2, 0.2, 0.5)
    assert analysis.theoretical_bias_var(spec, 2, 100) == pytest.approx(-6.3625e-6, rel=1e-9)
    # magnitude below C psi / gamma^2
    C = 3 * 0.04 + 0.1 + 1
    assert abs(analysis.theoretical_bias_var(spec, 2, 100)) < C * 0.1 / 100**2
    for phi in np.arange(0.0, 1.0, 0.1):
        spc = make_spec(0.15, 0.4, phi)
        psi = phi * 0.4
        Cp = 3 * 0.15**2 + psi + 1
        b = analysis.theoretical_bias_var(spc, 60, 100.0)
        assert b <= 0.0
        assert abs(b) <= Cp * psi / 100**2 + 1e-18


def test_theoretical_bias_sr():
    spec = make_spec(0.2, 0.2, 0.5)
    assert analysis.theoretical_bias_sr(spec, 2) == pytest.approx(-0.2159375, rel=1e-9)
    assert analysis.theoretical_bias_sr(spec, 60) == pytest.approx(7.8333333e-4, rel=1e-6)
    assert analysis.theoretical_bias_sr(make_spec(0.2, 0.2, 0.0), 60) == 0.0
    with pytest.raises(ThetaNearZero):
        analysis.theoretical_bias_sr(make_spec(0.0, 0.2, 0.5), 60)


def test_taylor_matches_exact_sr_formula():
    # algebraic identity: taylor of (Prop 1, Prop 2) values reproduces the SR formula
    for theta in (0.05, 0.1, 0.2, 0.4):
        for s in (0.1, 0.39, 0.6):
            for phi in (0.05, 0.3, 0.7, 0.95):
                for n in (1, 2, 12, 60, 200):
                    for gamma in (1.0, 100.0):
                        spec = make_spec(theta, s, phi)
                        bm = analysis.theoretical_bias_mean(spec, n, gamma)
                        bv = analysis.theoretical_bias_var(spec, n, gamma)
                        lhs = analysis.taylor_sr_bias(bm, bv, theta, gamma)
                        rhs = analysis.theoretical_bias_sr(spec, n)
                        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_taylor_examples():
    assert analysis.taylor_sr_bias(0.0, 0.0, 0.2, 100.0) == 0.0
    assert analysis.taylor_sr_bias(-7.5e-4, -6.3625e-6, 0.2, 100.0) == pytest.approx(-0.2159375)
    a = analysis.taylor_sr_bias(-7.5e-4, -6.3625e-6, 0.2, 100.0)
    b = analysis.taylor_sr_bias(-7.5e-4 / 3, -6.3625e-6 / 9, 0.2, 300.0)
    assert a == pytest.approx(b, rel=1e-12)


def test_bounds_values_and_flags():
    b = analysis.bounds(0.2, 0.1, 100.0, 60)
    assert b.mean_bound == pytest.approx(1e-3)
    assert b.var_bound == pytest.approx(1.22e-5)
    assert b.sr_analytical == pytest.approx(-0.195)
    assert b.sr_numerical == pytest.approx(0.2 - 0.14 / np.sqrt(0.162), rel=1e-12)
    assert b.flags == ()

    z = analysis.bounds(0.2, 0.0, 100.0, 60)
    assert z.mean_bound == 0.0 and z.var_bound == 0.0
    assert z.sr_analytical == 0.0 and z.sr_numerical == pytest.approx(0.0, abs=1e-15)

    assert any("psi<0" in f for f in analysis.bounds(0.2, -0.05, 100.0, 60).flags)
    assert any("small theta" in f for f in analysis.bounds(0.01, 0.1, 100.0, 60).flags)
    assert any("n>10" in f for f in analysis.bounds(0.2, 0.1, 100.0, 5).flags)


def test_bounds_appendix_variant():
    main = analysis.bounds(0.2, 0.1, 100.0, 60)
    app = analysis.bounds(0.2, 0.1, 100.0, 60, appendix_variant_c=True)
    assert app.var_bound == pytest.approx(main.var_bound * 0.1, rel=1e-12)


def test_bias_to_bound_ratio_example():
    # n=2 violates the n>10 conjecture for the numerical SR bound; n=60 is safe
    spec = make_spec(0.2, 0.2, 0.5)
    b = analysis.bounds(0.2, 0.1, 100.0, 2)
    r2v = abs(analysis.theoretical_bias_sr(spec, 2)) / abs(b.sr_numerical)
    assert r2v > 1.0
    assert any("n>10" in f for f in b.flags)
    b60 = analysis.bounds(0.2, 0.1, 100.0, 60)
    r60 = abs(analysis.theoretical_bias_sr(spec, 60)) / abs(b60.sr_numerical)
    assert r60 < 0.01


def test_dependence_components_param():
    zero = make_spec(0.1, 0.0, 0.0)
    d0 = analysis.dependence_components_param(zero, 60)
    assert d0.ttd == 0.0 and d0.wtd == 0.0

    spec = dgp.AssetSpec.from_observables(
        "jkp", dgp.ObservableMoments(mu=0.00225, sigma2_R=0.008, psi=0.08, r2=0.39))
    d = analysis.dependence_components_param(spec, 60)
    assert d.ttd == pytest.approx(0.00312 * analysis.sum_A(60, 0.08 / 0.39), rel=1e-12)
    assert d.ttd == pytest.approx(1.342e-5, rel=1e-3)
    # ttd/wtd -> 1/2 as the window grows
    big = analysis.dependence_components_param(spec, 5000)
    assert big.ttd / big.wtd == pytest.approx(0.5, abs=1e-3)


def test_dependence_components_empirical():
    spec = dgp.AssetSpec.from_observables(
        "jkp", dgp.ObservableMoments(mu=0.00225, sigma2_R=0.008, psi=0.08, r2=0.39))
    T = 400_000
    x = dgp.simulate_batch(spec, T, 1, 5)[0]
    n = 60
    emp = analysis.dependence_components_empirical(x, n)
    par = analysis.dependence_components_param(spec, n)
    # aggregated autocovariance SE ~ sigma2_R / sqrt(T) per lag, averaged over n lags
    se = spec.observables.sigma2_R / np.sqrt(T)
    assert emp.ttd == pytest.approx(par.ttd, abs=3 * se)
    assert emp.wtd == pytest.approx(par.wtd, abs=6 * se)

    iid = np.random.default_rng(0).normal(0, 0.1, 50_000)
    d = analysis.dependence_components_empirical(iid, 60)
    assert abs(d.ttd) < 3 * 0.01 / np.sqrt(50_000)

    with pytest.raises(InsufficientData):
        analysis.dependence_components_empirical(np.zeros(61), 60)


def test_cumulative_avg_autocovariance():
    rng = np.random.default_rng(1)
    x = rng.normal(0, 0.1, 20_000)
    n = 60
    curve = analysis.cumulative_avg_autocovariance(x, n)
    assert curve.shape == (n,)
    assert abs(curve[-1]) < 3 * 0.01 / np.sqrt(20_000)
    emp = analysis.dependence_components_empirical(x, n)
    assert curve[n - 1] == pytest.approx(emp.ttd, abs=1e-15)

    spec = make_spec(0.2, 0.39, 0.5)
    ar = dgp.simulate_batch(spec, 200_000, 1, 9)[0]
    c = analysis.cumulative_avg_autocovariance(ar, 30)
    assert np.all(c > 0)
    assert c[0] > c[-1]


def test_mc_bias_zero_signal_and_determinism():
    spec = dgp.AssetSpec.from_observables(
        "iid", dgp.ObservableMoments(mu=0.005, sigma2_R=0.008, psi=0.0, r2=0.0))
    cfg = BacktestConfig(n=24, gamma=100.0, estimator_mode="known",
                         known_covariance=np.array([[0.008]]))
    est = analysis.mc_bias(spec, cfg, K=2000, T=160, seed=21, scheme=iid_shuffle())
    assert abs(est.bias_mean) < 3 * est.se_mean
    assert abs(est.bias_var) < 3 * est.se_var
    assert abs(est.bias_sr) < 3 * est.se_sr
    assert est.paths == 2000 and est.failures == 0

    again = analysis.mc_bias(spec, cfg, K=2000, T=160, seed=21, scheme=iid_shuffle())
    assert est == again


def test_mc_bias_surrogate_matches_theory_small():
    # quick version of the acceptance check, looser tolerance at small K
    spec = make_spec(0.2, 0.2, 0.5)
    cfg = BacktestConfig(n=60, gamma=100.0, estimator_mode="known",
                         known_covariance=np.array([[spec.observables.sigma2_R]]))
    est = analysis.mc_bias(spec, cfg, K=4000, T=480, seed=33, scheme=iid_surrogate())
    assert est.bias_mean == pytest.approx(analysis.theoretical_bias_mean(spec, 60, 100.0),
                                          abs=3.5 * est.se_mean)
    assert est.bias_var == pytest.approx(analysis.theoretical_bias_var(spec, 60, 100.0),
                                         abs=3.5 * est.se_var)
