import math

import numpy as np
import pytest

from nemlab.errors import DomainError
from nemlab.qmath import QParams
from nemlab.spin_market import onset
from nemlab.xy_market import (
    XYParams,
    order_map,
    price_change,
    solve_order_parameter,
    xy_critical_scan,
    xy_energy,
)

from oracles import roots, xy_average


def test_energy_examples():
    assert xy_energy(math.pi / 2, 0.3, XYParams(5.0)) == pytest.approx(0.0, abs=1e-15)
    assert xy_energy(0.0, 1.0, XYParams(2.0)) == -2.0
    assert xy_energy(math.pi, 0.5, XYParams(2.0)) == pytest.approx(1.0, rel=1e-15)


def test_energy_reflection():
    p = XYParams(1.7)
    t = np.linspace(0, math.pi, 9)
    assert np.allclose(xy_energy(t, 0.4, p), xy_energy(math.pi - t, -0.4, p), atol=1e-15)


def test_energy_domain():
    with pytest.raises(DomainError):
        xy_energy(4.0, 0.1, XYParams())
    assert xy_energy(4.0, 0.1, XYParams(domain="full")) == pytest.approx(-0.1 * math.cos(4.0))


def test_zero_coupling_flat():
    sol = solve_order_parameter(XYParams(0.0, qp=QParams(1.3, 2.0)), 0.4)
    assert sol.m_star == 0.0
    assert np.allclose(sol.distribution.density, 1 / math.pi, rtol=1e-14)


def test_subcritical():
    sol = solve_order_parameter(XYParams(1.5), 0.5)
    assert abs(sol.m_star) < 1e-9


@pytest.mark.parametrize("J,beta,q", [(3.0, 1.0, 1.0), (2.5, 1.2, 1.2), (4.0, 0.8, 0.7)])
def test_root_matches_oracle(J, beta, q):
    sol = solve_order_parameter(XYParams(J, qp=QParams(q, beta)), 0.5)
    ref = max(roots(lambda m: xy_average(m, J, beta, q) - m, 0.0, 1.0, n=101))
    assert ref > 0.1
    assert sol.m_star == pytest.approx(ref, abs=1e-7)
    assert sol.converged


def test_map_matches_oracle_pointwise():
    p = XYParams(2.2, qp=QParams(1.25, 0.9))
    for m in (-0.8, -0.1, 0.0, 0.3, 0.9):
        assert order_map(m, p, field=0.05) == pytest.approx(xy_average(m, 2.2, 0.9, 1.25, h=0.05), rel=1e-10, abs=1e-14)


def test_full_circle_same_order_parameter():
    a = solve_order_parameter(XYParams(3.0), 0.5)
    b = solve_order_parameter(XYParams(3.0, domain="full"), 0.5)
    assert a.m_star == pytest.approx(b.m_star, abs=1e-12)
    assert b.distribution.interval == (0.0, 2 * math.pi)


def test_normalized_density():
    sol = solve_order_parameter(XYParams(3.0, qp=QParams(1.2, 1.0)), 0.5)
    assert sol.distribution.total() == pytest.approx(1.0, abs=1e-8)
    assert sol.distribution.expect(np.cos) == pytest.approx(sol.m_star, abs=1e-8)


def test_price_change():
    p = XYParams(3.0, magnitude=2.0, n_investors=50, market_depth=10.0)
    assert price_change(0.5, p) == pytest.approx(5.0)
    sol = solve_order_parameter(p, 0.5)
    assert sol.price_change == pytest.approx(10.0 * sol.m_star)


def test_odd_solution():
    p = XYParams(2.7, qp=QParams(0.9, 1.0))
    assert solve_order_parameter(p, -0.6).m_star == pytest.approx(-solve_order_parameter(p, 0.6).m_star, abs=1e-10)


def test_scan_onset_classical():
    grid = np.round(np.arange(1.5, 2.5001, 0.01), 10)
    rows = xy_critical_scan(XYParams(), grid)
    assert 1.99 <= onset(rows) <= 2.01


def test_scan_zero_coupling():
    rows = xy_critical_scan(XYParams(0.0), [0.0, 0.0])
    assert all(r.m_star == 0.0 for r in rows)


def test_scan_q_matches_oracle():
    q = 1.4
    grid = np.round(np.arange(1.9, 2.2001, 0.01), 10)
    rows = xy_critical_scan(XYParams(qp=QParams(q, 1.0)), grid)
    ref = next(b for b in grid if max(roots(lambda m: xy_average(m, b, 1.0, q) - m, 0.0, 1.0, n=51)) > 1e-6)
    assert abs(onset(rows) - ref) <= 0.0100001


def test_scan_records_pole():
    rows = xy_critical_scan(XYParams(qp=QParams(1.4, 1.0)), [2.5])
    assert math.isnan(rows[0].m_star) and "pole" in rows[0].error


def test_validation():
    with pytest.raises(DomainError):
        XYParams(-1.0)
    with pytest.raises(DomainError):
        XYParams(magnitude=0.0)
    with pytest.raises(DomainError):
        solve_order_parameter(XYParams(), 2.0)
