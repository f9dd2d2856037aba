import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from h2entangle.constants import HARTREE_EV, INTENSITY_AU, IONISATION_LIMIT_EV
from h2entangle.potentials import (
    CouplingModel, CurveLabel, IrFieldParams, NoCrossing, OutOfRange, PotentialCurve,
    crossing_radius, dress_curves, eval_curve, load_curve, morse_curves, save_curve,
)


def test_embedded_tables_cover_range(curves):
    vg, vu = curves
    for c in curves:
        assert c.r_min <= 0.5 and c.r_max >= 40.0
        assert len(c.r_grid) >= 100
    assert np.all(vu.v_grid >= vg.v_grid)
    assert abs(vg(40.0) - vu(40.0)) < 0.01


def test_node_exact(curves):
    vg, _ = curves
    for i in (0, 7, len(vg.r_grid) // 2, len(vg.r_grid) - 1):
        assert eval_curve(vg, vg.r_grid[i]) == vg.v_grid[i]


def test_asymptote_is_dissociation_limit(curves):
    vg, _ = curves
    assert abs(vg(vg.r_max) - IONISATION_LIMIT_EV) < 0.01
    assert abs(vg(40.0) - IONISATION_LIMIT_EV) < 0.01


def test_midpoint_on_linear_tail(curves):
    # far tail is nearly straight between neighbouring nodes
    vg, _ = curves
    r = vg.r_grid
    i = np.searchsorted(r, 30.0)
    mid = 0.5 * (r[i] + r[i + 1])
    assert vg(mid) == pytest.approx(0.5 * (vg.v_grid[i] + vg.v_grid[i + 1]), abs=1e-6)


def test_out_of_range(curves):
    vg, _ = curves
    with pytest.raises(OutOfRange):
        vg(vg.r_min - 0.1)
    with pytest.raises(OutOfRange):
        vg(vg.r_max + 1.0)


def test_curve_validation():
    with pytest.raises(ValueError):
        PotentialCurve(np.array([1.0, 1.0]), np.array([0.0, 1.0]), CurveLabel.GroundSigmaG)
    with pytest.raises(ValueError):
        PotentialCurve(np.array([1.0]), np.array([0.0]), CurveLabel.GroundSigmaG)


def test_curve_file_roundtrip(tmp_path, curves):
    vg, _ = curves
    path = tmp_path / "vg.dat"
    save_curve(vg, path)
    back = load_curve(path, CurveLabel.GroundSigmaG)
    np.testing.assert_array_equal(back.r_grid, vg.r_grid)
    np.testing.assert_array_equal(back.v_grid, vg.v_grid)


def test_field_amplitude():
    ir = IrFieldParams(1.2, 2e11)
    assert ir.field_amplitude == pytest.approx(math.sqrt(2e11 / 3.509e16), rel=1e-15)
    with pytest.raises(ValueError):
        IrFieldParams(1.2, 0.0)


def test_zero_coupling_gives_sorted_diabats(curves):
    vg, vu = curves
    pair = dress_curves(vg, vu, IrFieldParams(1.2, 2e11), CouplingModel("constant", d0=0.0, taper_end=None))
    r = pair.lower.r_grid
    a, b = vg(r), vu(r) - 1.2
    np.testing.assert_allclose(pair.lower.v_grid, np.minimum(a, b), atol=1e-12)
    np.testing.assert_allclose(pair.upper.v_grid, np.maximum(a, b), atol=1e-12)
    assert pair.gap_width == 0.0


def test_crossing_near_five(curves, dressed):
    vg, vu = curves
    rf = crossing_radius(vg, vu, 1.2)
    assert abs(rf - 5.0) < 0.5
    assert dressed.crossing_radius_rf == pytest.approx(rf)
    assert abs(vu(rf) - vg(rf) - 1.2) < 1e-6


def test_crossing_matches_dense_scan(curves):
    vg, vu = curves
    r = np.linspace(2.0, 10.0, 80001)
    scan = r[np.argmin(np.abs(vu(r) - vg(r) - 1.2))]
    assert abs(crossing_radius(vg, vu, 1.2) - scan) <= r[1] - r[0]


def test_constructed_root():
    r = np.linspace(1.0, 10.0, 91)
    vg = PotentialCurve(r, np.zeros_like(r), CurveLabel.GroundSigmaG)
    vu = PotentialCurve(r, 1.2 + 0.3 * (4.0 - r), CurveLabel.ExcitedSigmaU)
    assert crossing_radius(vg, vu, 1.2) == pytest.approx(4.0, abs=1e-9)


def test_no_crossing():
    r = np.linspace(1.0, 10.0, 10)
    vg = PotentialCurve(r, np.zeros_like(r), CurveLabel.GroundSigmaG)
    vu = PotentialCurve(r, np.full_like(r, 5.0), CurveLabel.ExcitedSigmaU)
    with pytest.raises(NoCrossing):
        crossing_radius(vg, vu, 1.2)


def test_gap_closed_form(curves):
    vg, vu = curves
    pair = dress_curves(vg, vu, IrFieldParams(1.2, 2e11), CouplingModel(taper_end=None))
    e0 = math.sqrt(2e11 / INTENSITY_AU)
    w = pair.crossing_radius_rf * e0 / 4 * HARTREE_EV
    assert pair.gap_width == pytest.approx(2 * w, rel=1e-12)
    # the default taper only acts beyond 8 a.u.
    assert dress_curves(vg, vu, IrFieldParams(1.2, 2e11)).gap_width == pytest.approx(pair.gap_width, rel=1e-12)


def test_dressed_trace_and_order(curves, dressed):
    vg, vu = curves
    r = dressed.lower.r_grid
    np.testing.assert_allclose(dressed.lower.v_grid + dressed.upper.v_grid, vg(r) + vu(r) - 1.2, rtol=1e-12)
    assert np.all(dressed.lower.v_grid <= dressed.upper.v_grid)
    lo = np.minimum(vg(r), vu(r) - 1.2)
    assert np.all(dressed.lower.v_grid <= lo + dressed.gap_width / 2 + 1e-12)


def test_dressed_asymptotics(curves, dressed):
    vg, vu = curves
    r = np.array([30.0, 40.0])
    np.testing.assert_allclose(dressed.lower(r), np.minimum(vg(r), vu(r) - 1.2), atol=1e-3)
    np.testing.assert_allclose(dressed.upper(r), np.maximum(vg(r), vu(r) - 1.2), atol=1e-3)


@settings(max_examples=25, deadline=None)
@given(st.floats(1e10, 1e13))
def test_gap_scales_with_sqrt_intensity(curves, intensity):
    vg, vu = curves
    g1 = dress_curves(vg, vu, IrFieldParams(1.2, intensity)).gap_width
    g2 = dress_curves(vg, vu, IrFieldParams(1.2, 2 * intensity)).gap_width
    assert g2 / g1 == pytest.approx(math.sqrt(2), rel=1e-9)


def test_morse_fallback_crosses():
    vg, vu = morse_curves()
    assert abs(vg(vg.r_max) - IONISATION_LIMIT_EV) < 0.01
    assert crossing_radius(vg, vu, 1.2) > 1.0
