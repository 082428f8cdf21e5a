import cmath
import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.signal import cont2discrete

from youla_ilc.errors import SynthesisError
from youla_ilc.reference import COEFF_RTOL, compare, format_comparison
from youla_ilc.synthesis import (
    compute_loop_tfs,
    design_controller,
    design_learning_filter,
    design_lowpass_d,
    design_q,
    discretize,
    format_bundle,
    normalize_dc_gain,
    parse_bundle,
    synthesize,
    validate_design,
)
from youla_ilc.tf_core import TransferFunction, freq_response, minreal, probe_frequencies

TS = 0.0568
W = probe_frequencies(TS)


def _fr_close(a, b, rtol=1e-9, atol=0.0):
    np.testing.assert_allclose(freq_response(a, W), freq_response(b, W), rtol=rtol, atol=atol)


def _zero(Ts=TS):
    return TransferFunction.constant(0.0, Ts)


# -- discretization ---------------------------------------------------------------------

def test_zoh_first_order():
    g = discretize(TransferFunction([1.0], [1.0, 1.0], None), 1.0, "zoh")
    np.testing.assert_allclose(g.num.coeffs, [1 - math.exp(-1)], rtol=1e-12)
    np.testing.assert_allclose(g.den.coeffs, [1.0, -math.exp(-1)], rtol=1e-12)
    assert round(g.num.coeffs[0], 5) == 0.63212
    assert round(-g.den.coeffs[1], 5) == 0.36788


def test_zoh_second_order_pole_mapping():
    g = discretize(TransferFunction([9.0], [1.0, 3.0, 9.0], None), TS, "zoh")
    s = complex(-1.5, math.sqrt(9 - 2.25))
    expected = cmath.exp(s * TS)
    poles = sorted(g.poles(), key=lambda p: p.imag)
    np.testing.assert_allclose(poles, [expected.conjugate(), expected], atol=1e-12)
    assert abs(expected.real - 0.9084) < 1e-4 and abs(expected.imag - 0.1350) < 1e-4
    # second route: scipy state-space ZOH
    num, den, _ = cont2discrete(([9.0], [1.0, 3.0, 9.0]), TS, method="zoh")
    np.testing.assert_allclose(np.trim_zeros(num.ravel(), "f") / den[0], g.num.coeffs, rtol=1e-9)
    np.testing.assert_allclose(den / den[0], g.den.coeffs, rtol=1e-12)
    assert g.dc_gain() == pytest.approx(1.0, rel=1e-12)


def test_zoh_repeated_pole_falls_back():
    proto = TransferFunction([1.0], [1.0, 2.0, 1.0], None)
    g = discretize(proto, 0.1, "zoh")
    num, den, _ = cont2discrete(([1.0], [1.0, 2.0, 1.0]), 0.1, method="zoh")
    np.testing.assert_allclose(g.den.coeffs, den / den[0], rtol=1e-12)
    assert g.dc_gain() == pytest.approx(1.0, rel=1e-9)


def test_tustin_unity_and_first_order():
    g = discretize(TransferFunction.constant(1.0, None), TS, "tustin")
    assert g.is_unity()
    h = discretize(TransferFunction([1.0], [1.0, 1.0], None), 0.5, "tustin")
    num, den, _ = cont2discrete(([1.0], [1.0, 1.0]), 0.5, method="bilinear")
    np.testing.assert_allclose(h.num.coeffs, num.ravel() / den[0], rtol=1e-12)
    np.testing.assert_allclose(h.den.coeffs, den / den[0], rtol=1e-12)


def test_discretize_rejects_discrete_input_and_unknown_method(plant):
    with pytest.raises(ValueError):
        discretize(plant, TS)
    with pytest.raises(ValueError):
        discretize(TransferFunction([1.0], [1.0, 1.0], None), TS, "euler")


def test_normalize_dc_gain(target):
    g = normalize_dc_gain(target)
    assert g.dc_gain() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(g.poles(), target.poles())


# -- Q, C, L ---------------------------------------------------------------------------------

def test_q_identity_target(plant):
    assert design_q(plant, _zero(), plant).is_unity()


def test_q_zero_target_returns_minus_c0(plant):
    C0 = TransferFunction([0.2], [1.0, -0.5], TS)
    q = design_q(plant, C0, _zero(), strict=False)
    _fr_close(q, -C0, rtol=1e-12)


def test_q_numerator_matches_hand_product(design):
    hand = np.polymul([0.013, 0.0116], [1.0, -0.9748, 0.3442])
    num = design.Q.num.coeffs
    np.testing.assert_allclose(num / num[0], hand / hand[0], rtol=1e-10)
    np.testing.assert_allclose(hand, [0.013, -0.00107, -0.00683, 0.00399], atol=1e-5)


def test_q_numerator_within_published_tolerance(design):
    cmp = compare("Q", design.Q)
    assert cmp.part_within("num", COEFF_RTOL)
    num_rows = [r for r in cmp.rows if r.part == "num" and r.rel_delta is not None]
    assert len(num_rows) == 4


def test_strict_q_rejects_unstable(plant):
    gc = TransferFunction([0.5], [1.0, -1.2, 0.0], TS)
    with pytest.raises(SynthesisError) as exc:
        design_q(plant, _zero(), gc)
    assert exc.value.check == "q_stable"


def test_strict_q_rejects_improper(plant):
    gc = TransferFunction([0.5, 0.0], [1.0, -0.5], TS)  # relative degree 0 < plant's 1
    with pytest.raises(SynthesisError) as exc:
        design_q(plant, _zero(), gc)
    assert exc.value.check == "q_proper"


def test_controller_with_zero_q_is_baseline(plant):
    C0 = TransferFunction([0.2], [1.0, -0.5], TS)
    _fr_close(design_controller(plant, C0, _zero()), C0, rtol=1e-12)


def test_controller_reaches_target(design, plant, target):
    from youla_ilc.tf_core import feedback
    _fr_close(feedback(plant * design.C, 1.0), target, rtol=1e-9)


def test_reduced_controller_near_published(design):
    reduced = minreal(design.C, COEFF_RTOL)
    cmp = compare("C", reduced)
    assert cmp.part_within("num")
    assert cmp.part_within("den")
    text = format_comparison(cmp)
    assert "(0.017z^2 - 0.0159z + 0.0053) / (z^2 - 1.676z + 0.676)" in text


def test_learning_filter_is_target_reciprocal(design, target):
    L = design.L
    assert L.relative_degree == -2
    _fr_close(L, 1 / target, rtol=1e-9)
    np.testing.assert_allclose(L.den.coeffs, [1.0, 0.0116 / 0.013], rtol=1e-12)
    np.testing.assert_allclose(L.num.coeffs * 0.013, [1.0, -1.687, 0.711, 0.0], atol=1e-12)


def test_learning_filter_trivial():
    one = TransferFunction.constant(1.0, TS)
    assert design_learning_filter(one, _zero(), one).is_unity()


def test_learning_identity(design):
    w = probe_frequencies(TS, 50)
    assert np.max(np.abs(1 + freq_response(design.Tu, w) * freq_response(design.L, w))) < 1e-9


# -- loop transfer functions ---------------------------------------------------------------

def test_loop_tfs_without_controller(plant):
    Tu, Tr = compute_loop_tfs(plant, _zero())
    assert Tu.is_zero()
    assert Tr.is_unity()


def test_loop_tfs_unit_loop_gain():
    one = TransferFunction.constant(1.0, TS)
    Tu, Tr = compute_loop_tfs(one, one)
    assert Tu.num.coeffs.tolist() == [-0.5]
    assert Tr.num.coeffs.tolist() == [0.5]


def test_input_sensitivity_is_minus_target(design, target):
    _fr_close(design.Tu, -target, rtol=1e-9)
    _fr_close(design.Tr, 1 - target, rtol=1e-9)


# -- D --------------------------------------------------------------------------------------

def test_lowpass_coefficient():
    d = design_lowpass_d(TS, 2.0)
    a = math.exp(-2 * math.pi * 2.0 * TS)
    np.testing.assert_allclose(d.den.coeffs, [1.0, -a], rtol=1e-15)
    assert round(a, 4) == 0.4898  # e^-0.71372
    assert abs(a - 0.4899) < 2e-4
    assert d.dc_gain() == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("fc", [0.1, 1.0, 2.0, 5.0, 8.5])
def test_lowpass_unity_dc(fc):
    assert design_lowpass_d(TS, fc).dc_gain() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("fc", [1 / (2 * TS), 9.0, 0.0, -1.0])
def test_lowpass_rejects_out_of_band(fc):
    with pytest.raises(ValueError):
        design_lowpass_d(TS, fc)


def test_lowpass_none_is_identity():
    assert design_lowpass_d(TS, None).is_unity()


# -- validation and bundle ---------------------------------------------------------------------

def test_reference_design_validates(design):
    rep = design.validation
    assert rep.passed, rep.to_text()
    names = [c.name for c in rep.checks]
    assert names == ["q_stable", "q_proper", "closed_loop_stable", "l_stable", "l_improperness",
                     "d_stable", "d_unity_dc", "closed_loop_matches_gc", "learning_identity"]
    assert rep["closed_loop_matches_gc"].value <= 1e-6


def test_unstable_q_is_reported(design):
    bad = replace(design, Q=TransferFunction([1.0], [1.0, -2.0], TS))
    rep = validate_design(bad)
    assert not rep["q_stable"].passed
    assert "2" in rep["q_stable"].detail


def test_bad_d_gain_is_reported(design):
    rep = validate_design(replace(design, D=TransferFunction([2.0], [1.0, -0.5], TS)))
    assert not rep["d_unity_dc"].passed
    assert rep["d_unity_dc"].value == pytest.approx(4.0)


def test_improper_target_reports_q_improper(plant):
    gc = TransferFunction([0.5, 0.0], [1.0, -0.5], TS)
    rep = synthesize(plant, gc).validation
    assert not rep.passed
    assert not rep["q_proper"].passed


def test_unstable_target_names_pole(plant):
    gc = TransferFunction([0.2], [1.0, -1.2, 0.0], TS)
    rep = synthesize(plant, gc).validation
    assert not rep["q_stable"].passed
    assert "1.2" in rep["q_stable"].detail


def test_continuous_target_design(plant):
    proto = TransferFunction([9.0], [1.0, 3.0, 9.0], None)
    gc = normalize_dc_gain(discretize(proto, TS))
    b = synthesize(plant, gc)
    assert b.validation.passed, b.validation.to_text()
    assert b.validation["closed_loop_stable"].passed


def test_bundle_roundtrip(design):
    text = format_bundle(design)
    back = parse_bundle(text)
    for name in ("P", "C0", "Gc", "Q", "C", "L", "D", "Tu", "Tr"):
        assert getattr(back, name) == getattr(design, name), name
    assert back.validation.passed
    assert format_bundle(back) == text


def test_bundle_missing_section(design):
    text = format_bundle(design).replace("[L]", "[X]")
    with pytest.raises(ValueError, match="L"):
        parse_bundle(text)


def test_validation_report_formats(design):
    rep = design.validation
    assert rep.to_text().startswith("overall: pass")
    lines = rep.to_csv().splitlines()
    assert lines[0] == "check,passed,value,detail"
    assert len(lines) == 1 + len(rep.checks)
