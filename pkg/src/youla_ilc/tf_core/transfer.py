"""Rational transfer functions in z (or s, for discretization input)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from numbers import Real

import numpy as np

from .polynomial import DegenerateInputError, Polynomial, poly_from_roots, poly_roots

DEFAULT_CANCEL_TOL = 1e-8
# leading coefficients this small relative to the operands are rounding residue
_TRIM_RTOL = 1e-12


class SampleTimeMismatch(ValueError):
    pass


class ImproperSystemError(ValueError):
    pass


class AlgebraicLoopError(ZeroDivisionError):
    pass


class TransferFunction:
    """SISO rational transfer function ``num(z) / den(z)``.

    Parameters
    ----------
    num, den : sequence of float or Polynomial
        Coefficients, highest power first.
    Ts : float or None
        Sample time in seconds. ``None`` marks a continuous-time prototype,
        which is only meaningful as input to discretization.

    The denominator is stored monic. No pole-zero cancellation happens on
    construction; arithmetic results are passed through :func:`minreal`.
    """

    __slots__ = ("num", "den", "Ts")

    def __init__(self, num, den=(1.0,), Ts: float | None = 1.0):
        num = Polynomial(num)
        den = Polynomial(den)
        if den.is_zero():
            raise ZeroDivisionError("transfer function denominator is the zero polynomial")
        if Ts is not None:
            Ts = float(Ts)
            if not (Ts > 0 and math.isfinite(Ts)):
                raise ValueError(f"sample time must be positive, got {Ts}")
        if num.is_zero():
            den = Polynomial([1.0])
        lead = den.lead
        self.num = Polynomial(num.coeffs / lead)
        self.den = Polynomial(den.coeffs / lead)
        self.Ts = Ts

    # -- construction helpers -------------------------------------------------

    @classmethod
    def constant(cls, k: float, Ts: float | None = 1.0) -> "TransferFunction":
        return cls([k], [1.0], Ts)

    @classmethod
    def z(cls, Ts: float = 1.0) -> "TransferFunction":
        return cls([1.0, 0.0], [1.0], Ts)

    @classmethod
    def from_zpk(cls, zeros, poles, gain: float, Ts: float | None = 1.0):
        return cls(poly_from_roots(zeros, gain), poly_from_roots(poles), Ts)

    # -- properties -----------------------------------------------------------

    @property
    def is_continuous(self) -> bool:
        return self.Ts is None

    @property
    def relative_degree(self) -> int:
        if self.num.is_zero():
            return 0
        return self.den.degree - self.num.degree

    @property
    def is_proper(self) -> bool:
        return self.relative_degree >= 0

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_unity(self) -> bool:
        return self.num == Polynomial([1.0]) and self.den == Polynomial([1.0])

    def zeros(self) -> np.ndarray:
        return np.zeros(0, dtype=complex) if self.num.is_zero() else poly_roots(self.num)

    def poles(self) -> np.ndarray:
        return poly_roots(self.den)

    def dc_gain(self) -> float:
        """Gain at z = 1 (or s = 0 for continuous prototypes)."""
        x = 0.0 if self.is_continuous else 1.0
        d = self.den(x)
        if d == 0:
            return math.inf
        return float(self.num(x) / d)

    def __call__(self, x):
        return self.num(x) / self.den(x)

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        return tf_add(self, other)

    def __radd__(self, other):
        return tf_add(other, self)

    def __sub__(self, other):
        return tf_sub(self, other)

    def __rsub__(self, other):
        return tf_sub(other, self)

    def __mul__(self, other):
        return tf_mul(self, other)

    def __rmul__(self, other):
        return tf_mul(other, self)

    def __truediv__(self, other):
        return tf_div(self, other)

    def __rtruediv__(self, other):
        return tf_div(other, self)

    def __neg__(self):
        return TransferFunction(-self.num.coeffs, self.den, self.Ts)

    def __eq__(self, other):
        if not isinstance(other, TransferFunction):
            return NotImplemented
        return self.num == other.num and self.den == other.den and self.Ts == other.Ts

    __hash__ = None

    def __repr__(self):
        return (
            f"TransferFunction({self.num.coeffs.tolist()}, "
            f"{self.den.coeffs.tolist()}, Ts={self.Ts!r})"
        )

    def __str__(self):
        var = "s" if self.is_continuous else "z"
        return f"({self.num.to_string(var)}) / ({self.den.to_string(var)})"


def _same_ts(a: float | None, b: float | None) -> bool:
    if a is None or b is None:
        return a is b
    return math.isclose(a, b, rel_tol=1e-12)


def _pair(a, b):
    """Promote scalars and check sample times for a binary operation."""
    if isinstance(a, Real) and isinstance(b, TransferFunction):
        a = TransferFunction.constant(float(a), b.Ts)
    elif isinstance(b, Real) and isinstance(a, TransferFunction):
        b = TransferFunction.constant(float(b), a.Ts)
    if not (isinstance(a, TransferFunction) and isinstance(b, TransferFunction)):
        raise TypeError("operands must be TransferFunction or real scalars")
    if not _same_ts(a.Ts, b.Ts):
        raise SampleTimeMismatch(f"sample times differ: {a.Ts} vs {b.Ts}")
    return a, b


def _scale(*polys: Polynomial) -> float:
    return max(float(np.max(np.abs(p.coeffs))) for p in polys)


def _build(num: Polynomial, den: Polynomial, Ts, num_scale: float) -> TransferFunction:
    num = num.trim_leading(_TRIM_RTOL * num_scale)
    return minreal(TransferFunction(num, den, Ts))


def tf_add(a, b) -> TransferFunction:
    a, b = _pair(a, b)
    if a.den == b.den:
        return _build(a.num + b.num, a.den, a.Ts, _scale(a.num, b.num))
    left = a.num * b.den
    right = b.num * a.den
    return _build(left + right, a.den * b.den, a.Ts, _scale(left, right))


def tf_sub(a, b) -> TransferFunction:
    a, b = _pair(a, b)
    return tf_add(a, -b)


def tf_mul(a, b) -> TransferFunction:
    a, b = _pair(a, b)
    return minreal(TransferFunction(a.num * b.num, a.den * b.den, a.Ts))


def tf_inv(a) -> TransferFunction:
    if isinstance(a, Real):
        a = TransferFunction.constant(float(a))
    if a.is_zero():
        raise ZeroDivisionError("cannot invert the zero transfer function")
    return minreal(TransferFunction(a.den, a.num, a.Ts))


def tf_div(a, b) -> TransferFunction:
    a, b = _pair(a, b)
    if b.is_zero():
        raise ZeroDivisionError("division by the zero transfer function")
    return minreal(TransferFunction(a.num * b.den, a.den * b.num, a.Ts))


def minreal(g: TransferFunction, tol: float = DEFAULT_CANCEL_TOL) -> TransferFunction:
    """Cancel pole-zero pairs closer than ``tol`` in the complex plane.

    Common powers of z are removed exactly. Remaining pairs are matched
    greedily, nearest first. When nothing cancels, the coefficients are
    returned untouched apart from monic normalization.
    """
    if tol <= 0:
        raise ValueError("cancellation tolerance must be positive")
    if g.num.is_zero():
        return TransferFunction([0.0], [1.0], g.Ts)
    num_c, den_c = g.num.coeffs, g.den.coeffs
    k = min(_trailing_zeros(num_c), _trailing_zeros(den_c))
    if k:
        num_c, den_c = num_c[:-k], den_c[:-k]
    num, den = Polynomial(num_c), Polynomial(den_c)
    if num.degree == 0 or den.degree == 0:
        return TransferFunction(num, den, g.Ts)

    zeros = list(poly_roots(num))
    poles = list(poly_roots(den))
    dist = np.abs(np.subtract.outer(np.array(zeros), np.array(poles)))
    keep_z = np.ones(len(zeros), dtype=bool)
    keep_p = np.ones(len(poles), dtype=bool)
    cancelled = 0
    while True:
        masked = np.where(np.outer(keep_z, keep_p), dist, np.inf)
        i, j = np.unravel_index(np.argmin(masked), masked.shape)
        if not masked[i, j] < tol:
            break
        keep_z[i] = keep_p[j] = False
        cancelled += 1
    if not cancelled:
        return TransferFunction(num, den, g.Ts)
    gain = num.lead / den.lead
    new_num = poly_from_roots(np.array(zeros)[keep_z], gain)
    new_den = poly_from_roots(np.array(poles)[keep_p])
    return TransferFunction(new_num, new_den, g.Ts)


def _trailing_zeros(c: np.ndarray) -> int:
    nz = np.flatnonzero(c)
    return c.size - 1 - nz[-1]


def feedback(g, h=1.0, tol: float = DEFAULT_CANCEL_TOL) -> TransferFunction:
    """Negative-feedback closed loop ``g / (1 + g h)``."""
    g, h = _pair(g, h)
    ng_nh = g.num * h.num
    dg_dh = g.den * h.den
    den = (dg_dh + ng_nh).trim_leading(_TRIM_RTOL * _scale(ng_nh, dg_dh))
    if den.is_zero():
        raise AlgebraicLoopError("1 + g*h is identically zero")
    return minreal(TransferFunction(g.num * h.den, den, g.Ts), tol)


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    poles: np.ndarray = field(repr=False)
    magnitudes: np.ndarray
    margin: float

    def __bool__(self):
        return self.stable

    @property
    def offending(self) -> np.ndarray:
        return self.poles[self.magnitudes >= 1.0 - self.margin]

    def describe(self) -> str:
        if self.poles.size == 0:
            return "no poles"
        return ", ".join(f"{p.real:.6g}{p.imag:+.6g}j (|p|={m:.6g})"
                         for p, m in zip(self.poles, self.magnitudes))


def is_stable(g: TransferFunction, margin: float = 1e-9) -> StabilityReport:
    """Every pole of ``minreal(g)`` strictly inside the circle of radius 1 - margin."""
    if g.is_continuous:
        raise ValueError("is_stable expects a discrete-time transfer function")
    poles = minreal(g).poles()
    mags = np.abs(poles)
    return StabilityReport(bool(np.all(mags < 1.0 - margin)), poles, mags, margin)


def nyquist(Ts: float) -> float:
    """Nyquist frequency in rad/s."""
    return math.pi / Ts


def freq_response(g: TransferFunction, omegas) -> np.ndarray:
    """Evaluate ``g(exp(i w Ts))`` at angular frequencies ``omegas`` [rad/s].

    Continuous prototypes are evaluated at ``s = i w`` without a band limit.
    """
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    if g.is_continuous:
        x = 1j * w
    else:
        limit = nyquist(g.Ts) * (1 + 1e-12)
        if np.any(w < 0) or np.any(w > limit):
            raise ValueError(f"frequencies must lie in [0, {nyquist(g.Ts):.6g}] rad/s")
        x = np.exp(1j * w * g.Ts)
    return g.num(x) / g.den(x)


def probe_frequencies(Ts: float, n: int = 50, decades: float = 3.0) -> np.ndarray:
    """``n`` log-spaced frequencies ending at Nyquist."""
    top = nyquist(Ts)
    return np.logspace(math.log10(top) - decades, math.log10(top), n)


__all__ = [
    "AlgebraicLoopError",
    "DEFAULT_CANCEL_TOL",
    "DegenerateInputError",
    "ImproperSystemError",
    "SampleTimeMismatch",
    "StabilityReport",
    "TransferFunction",
    "feedback",
    "freq_response",
    "is_stable",
    "minreal",
    "nyquist",
    "probe_frequencies",
    "tf_add",
    "tf_div",
    "tf_inv",
    "tf_mul",
    "tf_sub",
]
