"""Real polynomials in z, stored highest power first."""

from __future__ import annotations

import numpy as np


class DegenerateInputError(ValueError):
    """Raised when an operation needs a nonzero polynomial."""


class Polynomial:
    """Immutable real polynomial.

    ``Polynomial([1, -0.5])`` is ``z - 0.5``. Leading zeros are trimmed on
    construction and the zero polynomial is stored as ``[0.0]``.
    """

    __slots__ = ("_c",)

    def __init__(self, coeffs):
        if isinstance(coeffs, Polynomial):
            self._c = coeffs._c
            return
        c = np.atleast_1d(np.array(coeffs, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("polynomial coefficients must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        nz = np.flatnonzero(c)
        c = c[nz[0]:].copy() if nz.size else np.zeros(1)
        c.setflags(write=False)
        self._c = c

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def degree(self) -> int:
        return self._c.size - 1

    @property
    def lead(self) -> float:
        return float(self._c[0])

    def is_zero(self) -> bool:
        return self._c.size == 1 and self._c[0] == 0.0

    def __call__(self, z):
        return np.polyval(self._c, z)

    def __add__(self, other):
        return Polynomial(np.polyadd(self._c, _coerce(other)._c))

    __radd__ = __add__

    def __sub__(self, other):
        return Polynomial(np.polysub(self._c, _coerce(other)._c))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        return Polynomial(np.polymul(self._c, _coerce(other)._c))

    __rmul__ = __mul__

    def __neg__(self):
        return Polynomial(-self._c)

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._c.shape == other._c.shape and bool(np.all(self._c == other._c))

    def __hash__(self):
        return hash(self._c.tobytes())

    def __len__(self):
        return self._c.size

    def __repr__(self):
        return f"Polynomial({self._c.tolist()!r})"

    def trim_leading(self, atol: float) -> "Polynomial":
        """Drop leading coefficients with magnitude <= ``atol``.

        Used after arithmetic where exact cancellation of a leading term shows
        up as rounding residue.
        """
        c = self._c
        k = 0
        while k < c.size and abs(c[k]) <= atol:
            k += 1
        return Polynomial(c[k:] if k < c.size else [0.0])

    def roots(self) -> np.ndarray:
        return poly_roots(self)

    def to_string(self, var: str = "z", fmt: str = "{:.4g}") -> str:
        """Human-readable form, e.g. ``0.7902z + 0.6208``."""
        terms = []
        n = self.degree
        for i, c in enumerate(self._c):
            if c == 0.0 and n > 0:
                continue
            p = n - i
            mag = fmt.format(abs(c))
            if p == 0:
                body = mag
            else:
                body = ("" if mag == "1" else mag) + (var if p == 1 else f"{var}^{p}")
            sign = "-" if c < 0 else "+"
            terms.append((sign, body))
        if not terms:
            return "0"
        first_sign, first = terms[0]
        out = ("-" if first_sign == "-" else "") + first
        for sign, body in terms[1:]:
            out += f" {sign} {body}"
        return out


def _coerce(p) -> Polynomial:
    return p if isinstance(p, Polynomial) else Polynomial(p)


def companion_matrix(p: Polynomial) -> np.ndarray:
    """Frobenius companion matrix of ``p`` (top-row form)."""
    c = p.coeffs / p.lead
    n = c.size - 1
    m = np.zeros((n, n))
    m[0, :] = -c[1:]
    if n > 1:
        m[1:, :-1] = np.eye(n - 1)
    return m


def poly_roots(p) -> np.ndarray:
    """Roots of a polynomial as eigenvalues of its companion matrix.

    Roots at the origin are split off exactly before the eigenvalue solve,
    so ``z^3 - 1.687 z^2 + 0.711 z`` reports ``0`` with no rounding error.
    A nonzero constant has no roots and returns an empty array.

    Raises
    ------
    DegenerateInputError
        If ``p`` is the zero polynomial.
    """
    p = _coerce(p)
    if p.is_zero():
        raise DegenerateInputError("the zero polynomial has no well-defined roots")
    c = p.coeffs
    nz = np.flatnonzero(c)
    n_origin = c.size - 1 - nz[-1]
    core = Polynomial(c[: nz[-1] + 1])
    if core.degree == 0:
        r = np.zeros(0, dtype=complex)
    else:
        r = np.linalg.eigvals(companion_matrix(core)).astype(complex)
    return np.concatenate([r, np.zeros(n_origin, dtype=complex)])


def poly_from_roots(roots, gain: float = 1.0) -> Polynomial:
    """Real polynomial ``gain * prod(z - r)``; imaginary residue is dropped."""
    roots = np.asarray(roots, dtype=complex)
    if roots.size == 0:
        return Polynomial([gain])
    return Polynomial(gain * np.real(np.poly(roots)))
