"""Fit oracles on synthetic rate data with known ground truth."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swaplru.analysis import (DistanceFit, RatePoint, ThresholdFit,
                              distance_window, fit_distance, fit_threshold,
                              log_spaced, rule_of_three)


def synth_points(p_ref, slope, amp, shots=10**6):
    pts = []
    for p in log_spaced(p_ref, 5):
        rate = amp * (p / p_ref) ** slope
        pts.append(RatePoint(p=float(p), shots=shots,
                             fails=int(round(rate * shots))))
    return pts


def test_rate_point_basics():
    q = RatePoint(p=0.01, shots=1000, fails=25)
    assert q.rate == 0.025
    assert q.stderr == pytest.approx(np.sqrt(0.025 * 0.975 / 1000))
    with pytest.raises(ValueError):
        RatePoint(p=0.01, shots=0, fails=0)
    with pytest.raises(ValueError):
        RatePoint(p=0.01, shots=10, fails=11)


def test_rule_of_three():
    assert rule_of_three(10**5) == pytest.approx(3e-5)


def test_log_spaced_spans_window():
    p_ref = 0.02
    pts = log_spaced(p_ref, 5)
    lo, hi = distance_window(p_ref)
    assert pts[0] == pytest.approx(lo)
    assert pts[-1] == pytest.approx(hi)
    assert len(pts) == 5
    ratios = pts[1:] / pts[:-1]
    assert np.allclose(ratios, ratios[0])


def test_distance_fit_recovers_power_law():
    for slope in (1.65, 2.0, 3.06):
        pts = synth_points(0.02, slope, amp=0.8)
        fit = fit_distance(pts, p_ref=0.02)
        assert fit.slope == pytest.approx(slope, abs=0.02)
        assert fit.intercept == pytest.approx(np.log(0.8), abs=0.05)
        assert len(fit.used) == 5 and not fit.dropped


def test_distance_fit_drops_zero_failures():
    pts = synth_points(0.02, 3.0, amp=0.5, shots=800)
    assert any(q.fails == 0 for q in pts)  # steep curve starves low p
    fit = fit_distance(pts, p_ref=0.02)
    assert all(q.fails > 0 for q in fit.used)
    assert all(q.fails == 0 for q in fit.dropped)
    assert len(fit.used) + len(fit.dropped) == 5


def test_distance_fit_window():
    pts = synth_points(0.02, 2.0, amp=0.5)
    outside = [RatePoint(p=0.02, shots=1000, fails=500),
               RatePoint(p=1e-4, shots=1000, fails=1)]
    fit = fit_distance(pts + outside, p_ref=0.02)
    assert len(fit.used) == 5
    with pytest.raises(ValueError):
        fit_distance(outside, p_ref=0.02)


def test_distance_fit_error_shrinks_with_shots():
    small = fit_distance(synth_points(0.02, 2.5, 0.8, shots=10**4), 0.02)
    large = fit_distance(synth_points(0.02, 2.5, 0.8, shots=10**6), 0.02)
    assert large.slope_err < small.slope_err


@settings(max_examples=40, deadline=None)
@given(slope=st.floats(0.5, 4.0), amp=st.floats(0.05, 0.9))
def test_distance_fit_exact_on_noiseless_lines(slope, amp):
    # huge shots make rounding negligible; the fit is then exact
    pts = synth_points(0.02, slope, amp, shots=10**9)
    fit = fit_distance(pts, p_ref=0.02)
    assert fit.slope == pytest.approx(slope, abs=1e-3)


def synth_curves(p_th, nu, coeffs, shots=2 * 10**5):
    a, b, c = coeffs
    curves = {}
    for d in (5, 7, 9):
        pts = []
        for p in np.linspace(0.7 * p_th, 1.3 * p_th, 6):
            x = (p - p_th) * d ** (1.0 / nu)
            rate = a + b * x + c * x * x
            assert 0.0 < rate < 1.0
            pts.append(RatePoint(p=float(p), shots=shots,
                                 fails=int(round(rate * shots))))
        curves[d] = pts
    return curves


def test_threshold_fit_recovers_crossing():
    truth = dict(p_th=0.022, nu=1.4, coeffs=(0.12, 2.1, 7.0))
    fit = fit_threshold(synth_curves(**truth))
    assert isinstance(fit, ThresholdFit)
    assert fit.p_th == pytest.approx(truth["p_th"], abs=5e-4)
    assert fit.nu == pytest.approx(truth["nu"], abs=0.2)
    assert fit.coeffs[0] == pytest.approx(0.12, abs=0.01)
    assert fit.n_points == 18


def test_threshold_fit_other_corner():
    truth = dict(p_th=0.0072, nu=1.0, coeffs=(0.08, 3.0, 40.0))
    fit = fit_threshold(synth_curves(**truth))
    assert fit.p_th == pytest.approx(truth["p_th"], abs=2e-4)


def test_threshold_fit_guards():
    with pytest.raises(ValueError):
        fit_threshold({5: [RatePoint(p=0.02, shots=100, fails=10)]})
    empty = {5: [RatePoint(p=0.02, shots=100, fails=0)],
             7: [RatePoint(p=0.02, shots=100, fails=0)]}
    with pytest.raises(ValueError):
        fit_threshold(empty)
