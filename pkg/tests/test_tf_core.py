import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from youla_ilc.tf_core import (
    AlgebraicLoopError,
    DegenerateInputError,
    DifferenceEquation,
    ImproperSystemError,
    Polynomial,
    SampleTimeMismatch,
    Signal,
    TransferFunction,
    apply_acausal,
    feedback,
    format_tf,
    freq_response,
    is_stable,
    minreal,
    parse_tf,
    poly_roots,
    probe_frequencies,
    read_signal_csv,
    read_tf,
    simulate,
    write_signal_csv,
    write_tf,
    zero_phase_filter,
)

TS = 0.0568

# well-scaled coefficients; near-denormal leading terms put roots beyond
# what a companion eigenvalue solve can resolve
finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False).filter(lambda x: x == 0 or abs(x) > 1e-3)


# -- polynomial roots -------------------------------------------------------------

def test_plant_poles_match_quadratic_formula():
    b, c = -0.9748, 0.3442
    disc = cmath.sqrt(b * b - 4 * c)
    expected = sorted([(-b + disc) / 2, (-b - disc) / 2], key=lambda r: r.imag)
    got = sorted(poly_roots([1.0, b, c]), key=lambda r: r.imag)
    np.testing.assert_allclose(got, expected, atol=1e-12)
    np.testing.assert_allclose(np.abs(got), math.sqrt(c), atol=1e-12)
    assert abs(got[1].real - 0.4874) < 1e-12
    assert abs(abs(got[0]) - 0.5867) < 1e-4


def test_linear_root():
    np.testing.assert_allclose(poly_roots([1.0, -1.0]), [1.0])


def test_target_denominator_has_exact_origin_root():
    r = poly_roots([1.0, -1.687, 0.711, 0.0])
    assert np.sum(r == 0) == 1
    rest = sorted(r[r != 0].real)
    disc = math.sqrt(1.687**2 - 4 * 0.711)
    np.testing.assert_allclose(rest, [(1.687 - disc) / 2, (1.687 + disc) / 2], atol=1e-12)


def test_zero_polynomial_has_no_roots():
    with pytest.raises(DegenerateInputError):
        poly_roots([0.0, 0.0])
    assert poly_roots([3.0]).size == 0


@given(st.lists(st.floats(-0.95, 0.95), min_size=1, max_size=6))
def test_roots_roundtrip_real(roots):
    p = np.poly(roots)
    got = np.sort_complex(poly_roots(p))
    # the companion eigenvalue problem is ill-conditioned for clustered roots
    np.testing.assert_allclose(np.polyval(p, got), 0, atol=1e-9)


def test_polynomial_trims_and_compares():
    assert Polynomial([0, 0, 1, 2]) == Polynomial([1, 2])
    assert Polynomial([0, 0]).is_zero()
    assert Polynomial([1, 2]).degree == 1
    assert (Polynomial([1, 1]) * Polynomial([1, -1])) == Polynomial([1, 0, -1])


# -- arithmetic ------------------------------------------------------------------

def test_inverse_product_is_unity(plant):
    assert (plant * (1 / plant)).is_unity()


def test_additive_identity(plant):
    assert (plant + 0) == plant


def test_quotient_numerator_matches_hand_multiplication(plant, target):
    q = minreal(target / plant)
    hand = np.array([0.013, -0.00107, -0.00683, 0.00399])
    # rescale so the leading coefficient matches the hand product
    num = q.num.coeffs * (0.013 / q.num.coeffs[0])
    np.testing.assert_allclose(num, hand, atol=1e-5)
    exact = np.polymul([0.013, 0.0116], [1.0, -0.9748, 0.3442])
    np.testing.assert_allclose(num, exact, rtol=1e-10)
    w = probe_frequencies(TS)
    np.testing.assert_allclose(freq_response(q, w),
                               freq_response(target, w) / freq_response(plant, w), rtol=1e-10)


def test_sample_time_mismatch():
    with pytest.raises(SampleTimeMismatch):
        TransferFunction([1], [1, -0.5], 0.1) + TransferFunction([1], [1, -0.5], 0.2)


@settings(max_examples=50)
@given(st.lists(finite, min_size=1, max_size=3), st.lists(st.floats(-0.9, 0.9), min_size=1, max_size=3),
       st.lists(finite, min_size=1, max_size=3), st.lists(st.floats(-0.9, 0.9), min_size=1, max_size=3))
def test_arithmetic_matches_pointwise(n1, p1, n2, p2):
    a = TransferFunction(n1, np.poly(p1), TS)
    b = TransferFunction(n2, np.poly(p2), TS)
    z = np.exp(1j * np.array([0.3, 1.1, 2.5]))
    for op in (lambda x, y: x + y, lambda x, y: x - y, lambda x, y: x * y):
        got = op(a, b)(z)
        want = op(a(z), b(z))
        np.testing.assert_allclose(got, want, rtol=1e-6, atol=1e-6 * (1 + np.abs(want).max()))


# -- minreal ----------------------------------------------------------------------

def test_minreal_exact_common_factor():
    g = TransferFunction(np.poly([0.5, 0.2]), np.poly([0.5, 0.9]), TS)
    r = minreal(g)
    np.testing.assert_allclose(r.num.coeffs, [1.0, -0.2], atol=1e-12)
    np.testing.assert_allclose(r.den.coeffs, [1.0, -0.9], atol=1e-12)


def test_minreal_scalar_scaling():
    g = TransferFunction([1.0, -0.2], [1.0, -0.9], TS)
    h = TransferFunction([3.0, -0.6], [3.0, -2.7], TS)
    np.testing.assert_allclose(minreal(h).num.coeffs, minreal(g).num.coeffs, rtol=1e-15)
    np.testing.assert_allclose(minreal(h).den.coeffs, minreal(g).den.coeffs, rtol=1e-15)
    assert h.den.lead == 1.0


def test_minreal_near_pair_within_tolerance():
    g = TransferFunction(np.poly([0.5, 0.9]), np.poly([0.50000001, 0.1]), TS)
    r = minreal(g, tol=1e-6)
    np.testing.assert_allclose(r.num.coeffs, [1.0, -0.9], atol=1e-12)
    np.testing.assert_allclose(r.den.coeffs, [1.0, -0.1], atol=1e-12)
    assert minreal(g, tol=1e-9).den.degree == 2


def test_minreal_strips_common_powers_of_z():
    g = TransferFunction([2.0, 1.0, 0.0], [1.0, -0.5, 0.0], TS)
    r = minreal(g)
    assert r.num == Polynomial([2.0, 1.0])
    assert r.den == Polynomial([1.0, -0.5])


# -- feedback ---------------------------------------------------------------------

def test_feedback_open_loop(plant):
    assert feedback(plant, 0.0) == plant


def test_feedback_unity():
    g = feedback(TransferFunction.constant(1.0, TS), 1.0)
    assert g.num.coeffs.tolist() == [0.5]


def test_feedback_algebraic_loop():
    with pytest.raises(AlgebraicLoopError):
        feedback(1.0, TransferFunction.constant(-1.0, TS))


def test_closed_loop_reaches_target(design, plant, target):
    w = probe_frequencies(TS)
    cl = feedback(plant * design.C, 1.0)
    np.testing.assert_allclose(freq_response(cl, w), freq_response(target, w), rtol=1e-6)


# -- stability --------------------------------------------------------------------

def test_plant_is_stable(plant):
    rep = is_stable(plant)
    assert rep
    np.testing.assert_allclose(rep.magnitudes, math.sqrt(0.3442), atol=1e-12)


@pytest.mark.parametrize("pole, stable", [(1.0, False), (0.99, True), (-1.0, False), (1.5, False)])
def test_single_pole_stability(pole, stable):
    rep = is_stable(TransferFunction([1.0], [1.0, -pole], TS))
    assert bool(rep) is stable
    if not stable:
        np.testing.assert_allclose(rep.offending, [pole])


# -- frequency response -----------------------------------------------------------

def test_identity_response():
    np.testing.assert_array_equal(freq_response(TransferFunction.constant(1.0, TS), [0.0, 10.0]), [1, 1])


def test_dc_gains(plant, target):
    p_dc = (0.7902 + 0.6208) / (1 - 0.9748 + 0.3442)
    gc_dc = (0.013 + 0.0116) / (1 - 1.687 + 0.711)
    assert freq_response(plant, [0.0])[0] == pytest.approx(p_dc, rel=1e-12)
    assert freq_response(target, [0.0])[0] == pytest.approx(gc_dc, rel=1e-12)
    assert round(p_dc, 3) == 3.820
    assert round(gc_dc, 3) == 1.025


def test_frequency_above_nyquist_rejected(plant):
    with pytest.raises(ValueError):
        freq_response(plant, [math.pi / TS * 1.01])


def test_probe_frequencies_end_at_nyquist():
    w = probe_frequencies(TS, 50)
    assert w.size == 50
    assert w[-1] == pytest.approx(math.pi / TS)
    assert np.all(np.diff(np.log(w)) > 0)


# -- simulation ---------------------------------------------------------------------

def test_simulate_identity():
    u = Signal(np.random.default_rng(0).normal(size=30), TS)
    np.testing.assert_array_equal(simulate(TransferFunction.constant(1.0, TS), u).samples, u.samples)


def test_simulate_unit_delay():
    y = simulate(TransferFunction([1.0], [1.0, 0.0], TS), Signal.impulse(10, TS))
    np.testing.assert_array_equal(y.samples, np.eye(10)[1])


def test_step_response_settles_at_dc_gain(plant):
    y = simulate(plant, Signal.step(300, TS))
    assert y.samples[-1] == pytest.approx(1.4110 / 0.3694, rel=1e-9)


def test_simulate_rejects_improper():
    with pytest.raises(ImproperSystemError):
        simulate(TransferFunction.z(TS), Signal.impulse(5, TS))


def test_signal_rejects_nonfinite():
    with pytest.raises(ValueError):
        Signal([0.0, np.nan], TS)


# -- acausal application -------------------------------------------------------------

def test_pure_advance():
    y = apply_acausal(TransferFunction.z(TS), Signal.impulse(10, TS, at=5))
    np.testing.assert_array_equal(y.samples, np.eye(10)[4])


def test_acausal_identity():
    x = Signal(np.arange(8.0), TS)
    np.testing.assert_array_equal(apply_acausal(TransferFunction.constant(1.0, TS), x).samples, x.samples)


def test_acausal_geometric_decay():
    # z^2 / (z - 0.5) = z * (z / (z - 0.5)): impulse response 0.5^(k+1) advanced
    g = TransferFunction([1.0, 0.0, 0.0], [1.0, -0.5], TS)
    n = 12
    y = apply_acausal(g, Signal.impulse(n, TS, at=3)).samples
    expected = np.zeros(n)
    expected[2:] = 0.5 ** np.arange(n - 2)
    expected[-1] = 0.0  # one-sample advance leaves the last sample undefined
    np.testing.assert_allclose(y, expected, atol=1e-15)


# -- zero-phase filtering -------------------------------------------------------------

def _lowpass(fc):
    a = math.exp(-2 * math.pi * fc * TS)
    return TransferFunction([1 - a], [1, -a], TS)


def test_zero_phase_identity():
    x = Signal(np.sin(np.arange(40.0)), TS)
    np.testing.assert_allclose(zero_phase_filter(TransferFunction.constant(1.0, TS), x).samples, x.samples)


def test_zero_phase_preserves_constant():
    d = _lowpass(2.0)
    tau = -1 / math.log(d.poles()[0].real)
    edge = int(math.ceil(5 * tau))
    y = zero_phase_filter(d, Signal(np.full(100, 3.0), TS)).samples
    # after five time constants a first-order transient is below e^-5
    np.testing.assert_allclose(y[edge:-edge], 3.0, rtol=math.exp(-5))


def test_zero_phase_tone_at_cutoff():
    fc = 2.0
    d = _lowpass(fc)
    wc = 2 * math.pi * fc
    n = 2000
    t = np.arange(n) * TS
    y = zero_phase_filter(d, Signal(np.sin(wc * t), TS)).samples
    gain = abs(freq_response(d, [wc])[0]) ** 2
    mid = slice(200, n - 200)
    # amplitude and phase by projection onto sin and cos over whole periods
    s, c = np.sin(wc * t[mid]), np.cos(wc * t[mid])
    a = np.linalg.lstsq(np.column_stack([s, c]), y[mid], rcond=None)[0]
    assert math.hypot(*a) == pytest.approx(gain, rel=1e-6)
    assert abs(math.atan2(a[1], a[0])) < 1e-6


def test_zero_phase_rejects_unstable():
    with pytest.raises(ValueError):
        zero_phase_filter(TransferFunction([1.0], [1.0, -1.2], TS), Signal(np.ones(5), TS))


# -- stepper ---------------------------------------------------------------------------

@settings(max_examples=40)
@given(st.lists(finite, min_size=1, max_size=4), st.lists(st.floats(-0.9, 0.9), min_size=0, max_size=3),
       st.integers(0, 2**31 - 1))
def test_stepper_matches_simulate(num, poles, seed):
    den = np.poly(poles) if poles else np.array([1.0])
    num = num[: len(den)]
    g = TransferFunction(num, den, TS)
    u = np.random.default_rng(seed).normal(size=40)
    stepper = DifferenceEquation(g)
    y = np.array([stepper.step(v) for v in u])
    np.testing.assert_allclose(y, simulate(g, Signal(u, TS)).samples, atol=1e-9)


def test_stepper_peek_is_output_without_feedthrough(plant):
    s = DifferenceEquation(plant)
    assert s.feedthrough == 0
    s.step(1.0)
    p = s.peek()
    assert s.step(123.0) == p


# -- serialization ---------------------------------------------------------------------

@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, min_value=-1e12, max_value=1e12),
                min_size=1, max_size=5),
       st.lists(st.floats(allow_nan=False, allow_infinity=False, min_value=-1e12, max_value=1e12),
                min_size=0, max_size=4))
def test_tf_text_roundtrip_is_bit_exact(num, tail):
    g = TransferFunction(num, [1.0, *tail], TS)
    back = parse_tf(format_tf(g))
    assert back == g
    assert back.num.coeffs.tobytes() == g.num.coeffs.tobytes()
    assert back.den.coeffs.tobytes() == g.den.coeffs.tobytes()


def test_tf_file_roundtrip(tmp_path, plant):
    write_tf(tmp_path / "p.tf", plant)
    assert read_tf(tmp_path / "p.tf") == plant
    assert format_tf(plant).startswith("num: 0.7902 0.6208 / den: 1.0 -0.9748 0.3442 / Ts: 0.0568")


def test_continuous_roundtrip():
    g = TransferFunction([9.0], [1.0, 3.0, 9.0], None)
    assert "Ts: continuous" in format_tf(g)
    assert parse_tf(format_tf(g)) == g


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        parse_tf("num: 1 x / den: 1")


def test_signal_csv_roundtrip(tmp_path):
    x = Signal(np.random.default_rng(1).normal(size=20), TS)
    write_signal_csv(tmp_path / "x.csv", x)
    assert (tmp_path / "x.csv").read_text().splitlines()[0] == "k,t,value"
    y = read_signal_csv(tmp_path / "x.csv")
    assert y.samples.tobytes() == x.samples.tobytes()
    assert y.sample_time == TS
