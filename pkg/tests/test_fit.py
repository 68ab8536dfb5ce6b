import io
import math

import numpy as np
import pytest
from scipy import integrate, stats

from nemlab.errors import DomainError
from nemlab.fit import (
    QGaussian,
    fit_csv,
    fit_qgaussian,
    histogram,
    loglik,
    qgaussian_cdf,
    qgaussian_pdf,
    read_series,
    sample_qgaussian,
    student_t_params,
)
from nemlab.qmath import QParams
from nemlab.simulate import SimConfig, make_rng, run_series
from nemlab.spin_market import ModelParams


def test_pdf_examples():
    assert qgaussian_pdf(0.0, 1.0, 0.5) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    assert qgaussian_pdf(0.0, 2.0, 1.0) == pytest.approx(1 / math.pi, rel=1e-14)
    x = np.linspace(-20, 20, 81)
    assert np.allclose(qgaussian_pdf(x, 2.0, 1.0), 1 / (math.pi * (1 + x * x)), rtol=1e-13)


@pytest.mark.parametrize("q,beta", [(1.0, 0.5), (1.2, 2.0), (1.5, 1.0), (2.0, 0.3), (2.7, 1.0), (1 + 1e-6, 1.0)])
def test_pdf_integrates_to_one(q, beta):
    QGaussian(q, beta)  # closed form checked against quadrature at construction
    total = integrate.quad(lambda x: qgaussian_pdf(x, q, beta, 0.3), -np.inf, np.inf, epsrel=1e-12, limit=500)[0]
    assert total == pytest.approx(1.0, abs=1e-8)


def test_normal_limit_variance():
    beta = 0.8
    var = integrate.quad(lambda x: x * x * qgaussian_pdf(x, 1.0, beta), -np.inf, np.inf, epsrel=1e-12)[0]
    assert var == pytest.approx(1 / (2 * beta), rel=1e-10)
    assert qgaussian_pdf(0.4, 1 + 1e-11, beta) == pytest.approx(qgaussian_pdf(0.4, 1.0, beta), rel=1e-9)


@pytest.mark.parametrize("q", [1.2, 1.5, 2.0])
def test_student_t_equivalence(q):
    beta = 0.7
    nu, scale = (3 - q) / (q - 1), 1 / math.sqrt(beta * (3 - q))
    assert student_t_params(q, beta) == pytest.approx((nu, scale), rel=1e-15)
    x = np.linspace(-50, 50, 2001)
    assert np.allclose(qgaussian_pdf(x, q, beta, 1.5), stats.t.pdf(x, nu, loc=1.5, scale=scale), rtol=1e-10, atol=0)


@pytest.mark.parametrize("q", [1.3, 1.8, 2.5])
def test_tail_exponent(q):
    x = np.array([1e2, 1e4])
    slope = np.diff(np.log(qgaussian_pdf(x, q, 1.0))) / np.diff(np.log(x))
    assert slope[0] == pytest.approx(-2 / (q - 1), rel=1e-3)


@pytest.mark.parametrize("q", [0.9, 3.0, 3.5])
def test_pdf_domain(q):
    with pytest.raises(DomainError):
        qgaussian_pdf(0.0, q, 1.0)


def test_cdf_matches_pdf():
    q, beta = 1.4, 0.9
    x = 0.8
    ref = integrate.quad(lambda t: qgaussian_pdf(t, q, beta), -np.inf, x, epsrel=1e-12)[0]
    assert qgaussian_cdf(x, q, beta) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("q", [1.0, 1.3, 2.0])
def test_sampler_ks_against_true_law(q):
    n = 10**5
    s = sample_qgaussian(n, q, 1.3, -0.5, make_rng(17))
    assert stats.kstest(s, lambda x: qgaussian_cdf(x, q, 1.3, -0.5)).statistic < 1.63 / math.sqrt(n)


def test_sampler_cauchy_median_and_determinism():
    s = sample_qgaussian(10**5, 2.0, 1.0, 3.0, make_rng(5))
    assert abs(np.median(s) - 3.0) < 0.02
    assert np.array_equal(s, sample_qgaussian(10**5, 2.0, 1.0, 3.0, make_rng(5)))


def test_fit_round_trip():
    x = sample_qgaussian(10**5, 1.5, 1.0, 0.0, make_rng(11))
    res = fit_qgaussian(x)
    assert 1.45 <= res.q_hat <= 1.55
    assert res.beta_hat == pytest.approx(1.0, rel=0.1)
    assert res.converged and not res.clamped
    assert res.ks_stat < 0.01


def test_fit_normal_clamps():
    res = fit_qgaussian(make_rng(12).standard_normal(10**5))
    assert 1.0 <= res.q_hat <= 1.05
    if res.q_hat == 1.0:
        assert res.clamped


def test_fit_is_local_maximum():
    x = sample_qgaussian(5000, 1.7, 2.0, 0.1, make_rng(13))
    res = fit_qgaussian(x)
    best = loglik(np.sort(x), res.q_hat, res.beta_hat, res.loc)
    assert best == pytest.approx(res.loglik, rel=1e-15)
    for dq, dlb, dl in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]:
        q = res.q_hat + 1e-3 * dq
        if q < 1.0:
            continue
        assert loglik(x, q, res.beta_hat * math.exp(1e-3 * dlb), res.loc + 1e-3 * dl) <= best + 1e-8


def test_fit_order_invariant():
    x = sample_qgaussian(2000, 1.4, 1.0, 0.0, make_rng(14))
    a = fit_qgaussian(x)
    b = fit_qgaussian(make_rng(15).permutation(x))
    assert a == b


def test_fit_rejects_degenerate():
    with pytest.raises(DomainError, match="constant"):
        fit_qgaussian(np.full(500, 2.0))
    with pytest.raises(DomainError, match="n ≥ 100"):
        fit_qgaussian(np.arange(99.0))
    with pytest.raises(DomainError):
        fit_qgaussian(np.r_[np.arange(200.0), np.nan])


def test_mle_consistency():
    errs = {}
    for n in (10**3, 10**5):
        e = [abs(fit_qgaussian(sample_qgaussian(n, 1.5, 1.0, 0.0, make_rng(100 + k))).q_hat - 1.5) for k in range(20)]
        errs[n] = np.median(e)
    assert errs[10**5] < errs[10**3]


def test_supercritical_tails_heavier_than_subcritical():
    sup = ModelParams(2.4, n_investors=100, qp=QParams(1.5, 0.5))
    sub = ModelParams(1.0, n_investors=100, qp=QParams(1.5, 0.5))
    kw = dict(steps=20000, seed=3, rho=0.9, innovation=0.2, price_mode="level")
    q_sup = fit_qgaussian(run_series(SimConfig("discrete", sup, **kw)).dx).q_hat
    q_sub = fit_qgaussian(run_series(SimConfig("discrete", sub, **kw)).dx).q_hat
    assert q_sup > q_sub


def test_histogram_examples():
    edges, dens = histogram([0.0, 1.0], np.array([0.0, 0.5, 1.0]))
    assert np.array_equal(dens, [1.0, 1.0]) and np.allclose(np.diff(edges), 0.5)
    edges, dens = histogram(make_rng(0).random(10**6), 10)
    assert np.all((dens > 0.99) & (dens < 1.01))
    assert np.sum(dens * np.diff(edges)) == pytest.approx(1.0, abs=1e-12)
    edges, dens = histogram(np.full(7, 0.3), [0.0, 0.25, 0.5, 1.0])
    assert dens[1] * 0.25 == pytest.approx(1.0) and dens[0] == dens[2] == 0.0


def test_histogram_errors():
    with pytest.raises(DomainError):
        histogram([], 5)
    with pytest.raises(DomainError):
        histogram([1.0, 2.0], 1)
    with pytest.raises(DomainError):
        histogram([1.0, 2.0], [0.0, 0.5, 0.4])


def test_read_series_formats(tmp_path):
    assert np.array_equal(read_series(io.StringIO("1.5\n-2\n3e-1\n")), [1.5, -2.0, 0.3])
    assert np.array_equal(read_series(io.StringIO("ret\n1\n2\n")), [1.0, 2.0])
    sim = "t,x,dx,demand,field\n1,101.0,1.0,1.0,0.0\n2,99.5,-1.5,-1.5,0.1\n"
    assert np.array_equal(read_series(io.StringIO(sim)), [1.0, -1.5])
    assert np.array_equal(read_series(io.StringIO(sim), "field"), [0.0, 0.1])
    with pytest.raises(DomainError):
        read_series(io.StringIO(sim), "volume")
    with pytest.raises(DomainError):
        read_series(io.StringIO("1,2\n3,4\n"))
    path = tmp_path / "r.csv"
    path.write_text("dx\n0.25\n")
    assert read_series(str(path)).tolist() == [0.25]


def test_fit_csv_round_trip():
    res = fit_qgaussian(sample_qgaussian(1000, 1.3, 1.0, 0.0, make_rng(1)))
    lines = fit_csv(res).splitlines()
    assert lines[0] == "q_hat,beta_hat,loc,loglik,ks,n"
    vals = lines[1].split(",")
    assert float(vals[0]) == res.q_hat and float(vals[3]) == res.loglik and int(vals[5]) == 1000
    assert "entropic index" in res.report()
