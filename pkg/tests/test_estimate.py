import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import enumerate_schedule

from rqmc import estimate as est
from rqmc import integrands, netgen
from rqmc.estimate import ExperimentConfig


def _vdc(scramble="nested_uniform"):
    return est.NetSampler(netgen.identity_matrices(2, 1), scramble)


def test_constant_integrand():
    f = integrands.make("constant", d=2, value=1.0)
    for sampler in (est.make_sampler("scrambled-net", 2), est.MCSampler(2), est.LatticeSampler(2)):
        assert est.rqmc_estimate(f, sampler, 7, 0) == 1.0
    assert est.replicate_variance(integrands.make("constant", value=3.0), _vdc(), 16, 0, 10)[1] == 0


def test_unscrambled_van_der_corput_hand_sum():
    f = integrands.make("smooth-product", d=1, c=1.0)  # 1 + (x - 1/2) = x + 1/2
    assert est.rqmc_estimate(f, _vdc(None), 4, 0) == pytest.approx(0.375 + 0.5)


def test_mc_single_point_unbiased():
    f = integrands.make("kink")
    e = est.replicate_estimates(f, est.MCSampler(2), [1], 2, 100_000)[:, 0]
    assert abs(e.mean() - f.mean) <= 5 * e.std(ddof=1) / math.sqrt(len(e))


def test_scrambled_vdc_variance_bound():
    f = integrands.make("centered-product", d=1)
    _, var, _ = est.replicate_variance(f, _vdc(), 64, 0, 2000)
    assert var <= 1 / (12 * 64) * 1.15


def test_mc_variance_close_to_sigma2_over_n():
    f = integrands.make("centered-product", d=1)
    _, var, _ = est.replicate_variance(f, est.MCSampler(1), 64, 0, 2000)
    assert var == pytest.approx(1 / (12 * 64), rel=0.1)


def test_p_moment_requires_mean():
    f = integrands.IntegrandSpec("anon", 1, lambda x: x[:, 0])
    with pytest.raises(ValueError):
        est.replicate_variance(f, _vdc(), 8, 0, 4, p=1.5)
    with pytest.raises(ValueError):
        est.replicate_variance(f, _vdc(), 8, 0, 1)


def test_gamma_bound_examples():
    assert est.gamma_bound(2, 0, 1) == 1
    assert est.gamma_bound(2, 0, 3) == 8
    assert est.gamma_bound(2, 1, 2) == 18
    assert est.gamma_bound(3, 2, 1) == 9


def test_chebychev_tail():
    assert est.chebychev_tail(0.1, 64, 1, 1, 0.0) == 0
    assert est.chebychev_tail(0.1, 64, 1, 1, 1 / 12) == pytest.approx(0.13020833333333334)
    assert est.chebychev_tail(0.001, 4, 1, 1, 1.0) == 1


def test_p_moment_bound():
    assert est.p_moment_bound(2**10, 1, 1, 1.5, 10) == pytest.approx(0.44194173824159216)
    assert est.p_moment_bound(2**11, 1, 1, 1.5, 10) / est.p_moment_bound(2**10, 1, 1, 1.5, 10) == pytest.approx(2**-0.5)
    for p in (1.0, 2.0, 0.5):
        with pytest.raises(ValueError):
            est.p_moment_bound(8, 1, 1, p, 1.0)


def test_schedule_examples():
    assert est.schedule(1, 2, 100) == [1, 2, 4, 8, 16, 32, 64]
    assert est.schedule(3, 2, 16) == [1, 2, 3, 4, 6, 8, 12, 16]
    for n in est.schedule(3, 2, 10**5):
        assert n <= 3 or n % 2 == 0


def test_bracket_examples():
    assert est.bracket(96, 8, 2) == (96, 96)
    lo, hi = est.bracket(100, 8, 2)
    assert (lo, hi) == (96, 112)
    assert lo / 100 >= est.bracket_ratio_bound(2, 3) == pytest.approx(0.8)


@pytest.mark.parametrize("b,R", [(2, 4), (2, 8), (3, 9), (3, 27), (5, 3)])
def test_bracket_against_enumeration(b, R):
    members = enumerate_schedule(R, b, 10**6)
    assert est.schedule(R, b, 20_000) == [v for v in members if v <= 20_000]
    for n in range(1, 20_001):
        assert est.bracket(n, R, b) == est.brute_force_bracket(n, members)


@given(st.integers(1, 10**9), st.sampled_from([2, 3, 5]), st.integers(2, 4))
def test_bracket_ratio_property(n, b, k):
    R = b**k
    lo, hi = est.bracket(n, R, b)
    assert lo <= n <= hi
    if n > R:
        assert lo / n >= est.bracket_ratio_bound(b, k)


def test_config_validation_and_round_trip():
    cfg = ExperimentConfig(integrand="smooth-product", d=2, params={"c": 0.5}, R=3, seed=9)
    assert ExperimentConfig.from_json(cfg.to_json()).to_json() == cfg.to_json()
    for bad in ({"R": 0}, {"m_min": 5, "m_max": 4}, {"replicates": 1}, {"p": 2.0}, {"epsilon": 0}):
        with pytest.raises(ValueError):
            ExperimentConfig(**bad)


def test_unknown_sampler():
    with pytest.raises(est.UnknownSamplerError):
        est.make_sampler("qmc", 2)


def test_report_rows_and_columns():
    cfg = ExperimentConfig(integrand="smooth-product", d=2, R=3, m_min=2, m_max=7, replicates=50)
    rep = est.convergence_study(cfg)
    ns = [r.n for r in rep.rows]
    assert ns == sorted(set(ns)) and ns[0] == 4 and ns[-1] == 128
    for r in rep.rows:
        for c in ("gamma_bound_var", "chebychev_tail", "p_moment_bound", "mc_var"):
            assert math.isfinite(getattr(r, c))
    lines = rep.to_csv().splitlines()
    assert lines[0].split(",") == list(est.CSV_COLUMNS) and len(lines) == len(ns) + 1


def test_unknown_mean_columns_left_empty():
    cfg = ExperimentConfig(integrand="constant", m_max=3, replicates=4)
    f = integrands.IntegrandSpec("anon", 1, lambda x: x[:, 0], variance=1 / 12, p_norm_pth=lambda p: 1 / (p + 1))
    sampler = cfg.build_sampler()
    ns = cfg.sample_sizes()
    rep = est.build_report(cfg, f, sampler, ns, est.replicate_estimates(f, sampler, ns, 0, 4))
    row = rep.to_csv().splitlines()[1].split(",")
    assert row[3] == "" and row[4] == ""


@pytest.mark.parametrize("sampler", ["scrambled-net", "lattice-cp", "plain-mc"])
@pytest.mark.parametrize("name", ["centered-product", "smooth-product", "simplex-indicator", "kink"])
def test_unbiased(sampler, name):
    f = integrands.make(name, **({} if name == "kink" else {"d": 2}))
    s = est.make_sampler(sampler, 2)
    e = est.replicate_estimates(f, s, [16], 4, 2000)[:, 0]
    assert abs(e.mean() - f.mean) <= 5 * e.std(ddof=1) / math.sqrt(len(e)) + 1e-12


@pytest.mark.parametrize("name", ["centered-product", "smooth-product", "simplex-indicator", "kink"])
def test_variance_domination_and_trend(name):
    f = integrands.make(name, **({} if name == "kink" else {"d": 2}))
    sampler = est.make_sampler("scrambled-net", 2)
    ns = [2**m for m in range(2, 11)]
    e = est.replicate_estimates(f, sampler, ns, 1, 2000)
    var = e.var(axis=0, ddof=1)
    gamma = est.gamma_bound(2, sampler.t, 2)
    assert np.all(var <= gamma * f.variance / np.array(ns) * 1.15)
    ratio = var / (f.variance / np.array(ns))
    tail = ratio[4:]  # m >= 6
    assert np.all(np.diff(tail) <= 0.15 * tail[:-1])


def test_rmse_slope_on_exact_power_law():
    rows = [(2**m, 3.0 / 2**m) for m in range(4, 12)]
    fit = est.rmse_slope(rows, 4, 11)
    assert fit.slope == pytest.approx(-1, abs=1e-9)
    with pytest.raises(ValueError):
        est.rmse_slope(rows, 4, 6)


def test_slln_constant_errors_zero():
    cfg = ExperimentConfig(integrand="constant", R=3, m_max=6, replicates=5)
    res = est.slln_study(cfg)
    assert np.all(res.errors == 0)


def test_slln_rqmc_beats_mc():
    base = dict(integrand="corner-singularity", params={"alpha": 0.6}, R=3, m_max=12, replicates=40)
    rq = est.slln_study(ExperimentConfig(**base))
    mc = est.slln_study(ExperimentConfig(sampler="plain-mc", **base))
    assert rq.quantiles["median"][-1] < mc.quantiles["median"][-1]


def test_worker_count_does_not_change_results():
    cfg = ExperimentConfig(integrand="kink", d=2, R=3, m_max=8, replicates=70)
    a = est.convergence_study(cfg)
    cfg.workers = 4
    b = est.convergence_study(cfg)
    np.testing.assert_array_equal(a.estimates, b.estimates)
    assert a.to_csv() == b.to_csv()
