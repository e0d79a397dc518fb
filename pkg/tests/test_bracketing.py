import math
import warnings

import numpy as np
import pytest

from deltasurf.bracketing import (
    BracketReport,
    BracketRow,
    asymptotic_residuals,
    geometric_sweep,
    layer_width,
    sandwich,
)
from deltasurf.errors import InsufficientData
from deltasurf.geometry import build_geometry, gaussian_bump, plane
from deltasurf.transverse import TransverseProblem, kappa_plus


def test_layer_width():
    assert layer_width(math.e) == pytest.approx(6.0 / math.e)
    assert layer_width(100.0) == pytest.approx(0.06 * math.log(100.0))


def test_geometric_sweep():
    a = geometric_sweep(25.0, 200.0, 8)
    assert len(a) == 8
    assert a[0] == pytest.approx(25.0) and a[-1] == pytest.approx(200.0)
    np.testing.assert_allclose(a[1:] / a[:-1], (200 / 25) ** (1 / 7))


@pytest.fixture(scope="module")
def flat_report():
    g = build_geometry(plane(), 3.0, 0.1, scale_guard=None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return sandwich(g, [1.2, 20.0, 40.0])


def test_flat_sandwich_structure(flat_report):
    rep = flat_report
    assert [a for a, _ in rep.dropped] == [1.2]
    assert rep.ordered()
    for r in rep.rows:
        assert r.kappa_plus == kappa_plus(TransverseProblem(r.alpha, r.d))
        assert r.lower <= -(r.alpha**2) / 4 <= r.upper
        assert abs(r.mu_minus) < 1e-8  # Neumann constant mode on the flat patch


def test_bump_drops_wide_layers():
    g = build_geometry(gaussian_bump(), 3.0, 0.2, scale_guard=None)
    with pytest.warns(UserWarning, match="dropped"):
        rep = sandwich(g, [5.0])
    assert rep.rows == [] and len(rep.dropped) == 1


def test_disc_sandwich_contains_reference():
    # direct value from the axisymmetric solver at alpha = 60, R = 6
    g = build_geometry(gaussian_bump(), 6.0, 0.1, scale_guard=None)
    rep = sandwich(g, [60.0], disc_radius=6.0)
    rep.attach_direct(60.0, [-900.0 + 0.11825576667934001], 1e-7)
    row = rep.rows[0]
    assert row.contains_direct()
    assert row.lower < row.mu - 900 < row.upper
    assert row.mu == pytest.approx(0.1193255933624333, abs=1e-6)


def _row(alpha, lower, upper, mu=0.5, direct=None):
    return BracketRow(alpha, layer_width(alpha), 1, lower, upper, mu, -1e9, 0, 0, 0, 0, direct=direct)


def test_row_properties():
    r = _row(10.0, -30.0, -20.0)
    assert r.width == 10.0 and r.midpoint == -25.0
    assert r.residual == pytest.approx(-25.0 + 25.0 - 0.5)
    assert r.contains_direct() is None
    r.direct = -24.0
    assert r.contains_direct() and r.estimate == -24.0
    assert not r.certified_below_threshold


def test_asymptotic_fit_recovers_synthetic_trends():
    alphas = geometric_sweep(25.0, 200.0, 8)
    mu, c = 0.3, 2.0
    rows = []
    for a in alphas:
        est = -a * a / 4 + mu + c * math.log(a) / a
        w = 5.0 * math.log(a) / a
        rows.append(_row(a, est - w / 2, est + w / 2, mu=mu))
    fit = asymptotic_residuals(BracketReport(rows))[1]
    assert fit.width_slope == pytest.approx(-1.0, abs=1e-10)
    assert fit.intercept == pytest.approx(mu, abs=1e-8)
    np.testing.assert_allclose(fit.scaled, c, rtol=1e-6)
    assert fit.bounded and fit.source == "midpoint"
    with pytest.raises(InsufficientData):
        asymptotic_residuals(BracketReport(rows[:3]))


def test_report_csv(tmp_path, flat_report):
    from deltasurf.io import read_csv

    flat_report.to_csv(tmp_path / "b.csv")
    table, cols = read_csv(tmp_path / "b.csv")
    assert table == "bracket"
    assert cols["alpha"] == ["20.0", "40.0"]
    assert cols["direct"] == ["", ""]
