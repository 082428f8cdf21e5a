"""Time-domain application of discrete transfer functions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .transfer import (
    ImproperSystemError,
    TransferFunction,
    is_stable,
    minreal,
    _same_ts,
)


@dataclass(frozen=True, eq=False)
class Signal:
    """Uniformly sampled real signal. Samples are stored read-only."""

    samples: np.ndarray
    sample_time: float

    def __post_init__(self):
        x = np.array(self.samples, dtype=float).ravel()
        if not np.all(np.isfinite(x)):
            bad = int(np.flatnonzero(~np.isfinite(x))[0])
            raise ValueError(f"signal contains a non-finite value at sample {bad}")
        ts = float(self.sample_time)
        if not (ts > 0 and math.isfinite(ts)):
            raise ValueError(f"sample time must be positive, got {self.sample_time}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_time", ts)

    def __len__(self):
        return self.samples.size

    def __array__(self, dtype=None, copy=None):
        return self.samples if dtype is None else self.samples.astype(dtype)

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.samples.size) * self.sample_time

    def norm(self) -> float:
        return float(np.linalg.norm(self.samples))

    def with_samples(self, samples) -> "Signal":
        return Signal(samples, self.sample_time)

    @classmethod
    def impulse(cls, n: int, sample_time: float, at: int = 0) -> "Signal":
        x = np.zeros(n)
        x[at] = 1.0
        return cls(x, sample_time)

    @classmethod
    def step(cls, n: int, sample_time: float, level: float = 1.0, onset: int = 0) -> "Signal":
        x = np.zeros(n)
        x[onset:] = level
        return cls(x, sample_time)


def _lfilter_coeffs(g: TransferFunction):
    """Coefficients in powers of z^-1 for a proper g."""
    n = g.den.degree
    b = np.concatenate([np.zeros(n - g.num.degree), g.num.coeffs])
    return b, g.den.coeffs


def _check(g: TransferFunction, x: Signal):
    if g.is_continuous:
        raise ValueError("time-domain simulation needs a discrete-time transfer function")
    if not _same_ts(g.Ts, x.sample_time):
        raise ValueError(f"signal sample time {x.sample_time} does not match system Ts {g.Ts}")


def simulate(g: TransferFunction, u: Signal) -> Signal:
    """Zero-initial-state response of a proper ``g`` to ``u``."""
    _check(g, u)
    g = minreal(g)
    if not g.is_proper:
        raise ImproperSystemError(
            f"system is improper (relative degree {g.relative_degree}); "
            "use apply_acausal for offline, non-causal filtering"
        )
    if g.is_zero():
        return u.with_samples(np.zeros(len(u)))
    b, a = _lfilter_coeffs(g)
    return u.with_samples(lfilter(b, a, u.samples))


def causal_factor(g: TransferFunction) -> tuple[TransferFunction, int]:
    """Split ``g = z^m * g_causal`` with ``g_causal`` proper and ``m >= 0``."""
    g = minreal(g)
    m = max(0, -g.relative_degree)
    if m == 0:
        return g, 0
    den = np.concatenate([g.den.coeffs, np.zeros(m)])
    return minreal(TransferFunction(g.num, den, g.Ts)), m


def apply_acausal(g: TransferFunction, x: Signal) -> Signal:
    """Offline application of a possibly improper ``g``.

    The proper part is simulated and the result advanced by the improperness
    degree ``m``; the last ``m`` output samples are zero.
    """
    _check(g, x)
    gc, m = causal_factor(g)
    y = simulate(gc, x).samples
    if m == 0:
        return x.with_samples(y)
    out = np.zeros_like(y)
    if m < y.size:
        out[: y.size - m] = y[m:]
    return x.with_samples(out)


def zero_phase_filter(d: TransferFunction, x: Signal) -> Signal:
    """Forward pass, then a time-reversed pass, both from rest.

    The effective response is ``|d|^2`` with no phase shift. Both ends carry a
    start-up transient of the filter's own time constant.
    """
    _check(d, x)
    if not d.is_proper:
        raise ImproperSystemError("zero-phase filtering needs a proper filter")
    report = is_stable(d)
    if not report:
        raise ValueError(f"zero-phase filter must be stable; poles: {report.describe()}")
    fwd = simulate(d, x).samples
    back = simulate(d, x.with_samples(fwd[::-1])).samples
    return x.with_samples(back[::-1])


class DifferenceEquation:
    """Sample-by-sample realization of a proper transfer function.

    Transposed direct form II, matching :func:`simulate`. ``peek`` returns
    the part of the next output that does not depend on the next input,
    which lets strictly proper blocks close a loop without an algebraic
    dependency.
    """

    def __init__(self, g: TransferFunction):
        g = minreal(g)
        if not g.is_proper:
            raise ImproperSystemError("cannot realize an improper system causally")
        if g.is_zero():
            b, a = np.zeros(1), np.ones(1)
        else:
            b, a = _lfilter_coeffs(g)
        self.b = b
        self.a = a
        self.state = np.zeros(a.size - 1)

    @property
    def feedthrough(self) -> float:
        return float(self.b[0])

    def reset(self):
        self.state[:] = 0.0

    def peek(self) -> float:
        return float(self.state[0]) if self.state.size else 0.0

    def step(self, x: float) -> float:
        b, a, s = self.b, self.a, self.state
        y = b[0] * x + (s[0] if s.size else 0.0)
        n = s.size
        for i in range(n - 1):
            s[i] = s[i + 1] + b[i + 1] * x - a[i + 1] * y
        if n:
            s[n - 1] = b[n] * x - a[n] * y
        return y
