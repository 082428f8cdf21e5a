"""Youla-parameterized controller and learning-filter synthesis.

All elements are built from a plant ``P``, a baseline controller ``C0`` and
a target closed loop ``Gc``:

    Q = Gc (1 + P C0) / P - C0
    C = (C0 + Q) / (1 - P Q)
    L = (1 + P C0) / (P (C0 + Q))
    Tu = -P C / (1 + P C),  Tr = 1 / (1 + P C)

With this L the learning recursion factor ``1 + Tu L`` vanishes identically.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import cont2discrete

from .errors import SynthesisError
from .tf_core import (
    ImproperSystemError,
    Polynomial,
    TransferFunction,
    feedback,
    format_tf,
    freq_response,
    is_stable,
    minreal,
    parse_tf,
    poly_roots,
    probe_frequencies,
)

FR_RTOL = 1e-6
IDENTITY_ATOL = 1e-9
DC_ATOL = 1e-9
DEFAULT_D_CUTOFF_HZ = 2.0


# -- discretization -----------------------------------------------------------

def discretize(g: TransferFunction, Ts: float, method: str = "zoh") -> TransferFunction:
    """Map a continuous prototype to a discrete transfer function.

    ``zoh`` uses a partial-fraction expansion of the step response, which is
    exact for distinct poles; repeated poles (or a pole at the origin) fall
    back to a matrix-exponential state-space discretization. ``tustin``
    substitutes ``s = (2/Ts)(z - 1)/(z + 1)``.
    """
    if not g.is_continuous:
        raise ValueError("discretize expects a continuous-time prototype (Ts=None)")
    if not Ts > 0:
        raise ValueError("sample time must be positive")
    if not g.is_proper:
        raise ImproperSystemError("cannot discretize an improper continuous system")
    if method == "zoh":
        return _zoh(g, Ts)
    if method == "tustin":
        return _tustin(g, Ts)
    raise ValueError(f"unknown discretization method {method!r}")


def _distinct(poles: np.ndarray) -> bool:
    if poles.size < 2:
        return True
    d = np.abs(np.subtract.outer(poles, poles))
    np.fill_diagonal(d, np.inf)
    return bool(np.min(d) > 1e-6 * (1 + np.max(np.abs(poles))))


def _zoh(g: TransferFunction, Ts: float) -> TransferFunction:
    if g.den.degree == 0:
        return TransferFunction(g.num, g.den, Ts)
    poles = poly_roots(g.den)
    if not _distinct(poles) or np.any(np.abs(poles) < 1e-12):
        num, den, _ = cont2discrete((g.num.coeffs, g.den.coeffs), Ts, method="zoh")
        return minreal(TransferFunction(np.ravel(num), den, Ts))

    dden = np.polyder(g.den.coeffs)
    residues = g.num(poles) / (poles * np.polyval(dden, poles))
    zpoles = np.exp(poles * Ts)
    den = np.poly(zpoles)
    num = g.dc_gain() * den
    for i, r in enumerate(residues):
        others = np.poly(np.delete(zpoles, i)) if zpoles.size > 1 else np.ones(1)
        term = r * np.polymul([1.0, -1.0], others)
        num = np.polyadd(num, term)
    return minreal(TransferFunction(np.real(num), np.real(den), Ts))


def _tustin(g: TransferFunction, Ts: float) -> TransferFunction:
    n = g.den.degree
    c = 2.0 / Ts
    zm1 = np.array([1.0, -1.0])
    zp1 = np.array([1.0, 1.0])

    def substitute(p: Polynomial) -> np.ndarray:
        out = np.zeros(1)
        coeffs = p.coeffs[::-1]  # coeffs[k] multiplies s^k
        for k, a in enumerate(coeffs):
            if a == 0.0:
                continue
            term = a * c**k * np.polymul(_pow(zm1, k), _pow(zp1, n - k))
            out = np.polyadd(out, term)
        return out

    return minreal(TransferFunction(substitute(g.num), substitute(g.den), Ts))


def _pow(p: np.ndarray, k: int) -> np.ndarray:
    out = np.ones(1)
    for _ in range(k):
        out = np.polymul(out, p)
    return out


def normalize_dc_gain(g: TransferFunction) -> TransferFunction:
    """Scale ``g`` so that its DC gain is exactly one."""
    k = g.dc_gain()
    if not math.isfinite(k) or k == 0:
        raise ValueError("DC gain is zero or infinite; cannot normalize")
    return TransferFunction(g.num.coeffs / k, g.den, g.Ts)


# -- design equations -----------------------------------------------------------

def design_q(P, C0, Gc, strict: bool = True) -> TransferFunction:
    """Youla parameter that places the closed loop at ``Gc``.

    With ``strict`` a non-proper or unstable result raises
    :class:`SynthesisError`; otherwise the caller is expected to validate.
    """
    Q = Gc * (1 + P * C0) / P - C0
    if strict:
        _require_stable_proper("Q", Q)
    return Q


def _require_stable_proper(name, g):
    if not g.is_proper:
        raise SynthesisError(f"{name.lower()}_proper", f"{name} is improper (relative degree {g.relative_degree})")
    report = is_stable(g)
    if not report:
        raise SynthesisError(f"{name.lower()}_stable", f"{name} has unstable poles: {report.describe()}")


def design_controller(P, C0, Q) -> TransferFunction:
    loop = 1 - P * Q
    if loop.is_zero():
        raise SynthesisError("controller", "1 - P Q is identically zero")
    return (C0 + Q) / loop


def design_learning_filter(P, C0, Q) -> TransferFunction:
    authority = C0 + Q
    if authority.is_zero():
        raise SynthesisError("learning_filter", "C0 + Q is identically zero; no learning authority")
    return (1 + P * C0) / (P * authority)


def compute_loop_tfs(P, C) -> tuple[TransferFunction, TransferFunction]:
    """Closed loops from learning signal to error (Tu) and reference to error (Tr)."""
    PC = P * C
    Tr = feedback(1.0, PC)
    Tu = -feedback(PC, 1.0)
    return Tu, Tr


def design_lowpass_d(Ts: float, cutoff_hz: float | None) -> TransferFunction:
    """First-order unity-DC low-pass ``(1 - a)/(z - a)``, ``a = exp(-2 pi f Ts)``.

    ``cutoff_hz=None`` gives the identity filter.
    """
    if cutoff_hz is None:
        return TransferFunction.constant(1.0, Ts)
    nyq_hz = 1.0 / (2.0 * Ts)
    if not 0 < cutoff_hz < nyq_hz:
        raise ValueError(f"cutoff must lie in (0, {nyq_hz:.6g}) Hz, got {cutoff_hz}")
    a = math.exp(-2.0 * math.pi * cutoff_hz * Ts)
    return TransferFunction([1.0 - a], [1.0, -a], Ts)


# -- bundle and validation ------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def to_text(self) -> str:
        lines = [f"overall: {'pass' if self.passed else 'FAIL'}"]
        for c in self.checks:
            lines.append(f"{c.name}: {'pass' if c.passed else 'FAIL'} | value={c.value:.6g} | {c.detail}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "passed", "value", "detail"])
        for c in self.checks:
            w.writerow([c.name, int(c.passed), repr(float(c.value)), c.detail])
        return buf.getvalue()


@dataclass(frozen=True)
class DesignBundle:
    P: TransferFunction
    C0: TransferFunction
    Gc: TransferFunction
    Q: TransferFunction
    C: TransferFunction
    L: TransferFunction
    D: TransferFunction
    Tu: TransferFunction
    Tr: TransferFunction
    validation: ValidationReport | None = field(default=None, compare=False)

    @property
    def Ts(self) -> float:
        return self.P.Ts


BUNDLE_ORDER = ("P", "C0", "Gc", "Q", "C", "L", "D", "Tu", "Tr")


def synthesize(P, Gc, C0=None, d_cutoff_hz: float | None = DEFAULT_D_CUTOFF_HZ) -> DesignBundle:
    """Run the full design from plant and target closed loop, then validate."""
    if C0 is None:
        C0 = TransferFunction.constant(0.0, P.Ts)
    Q = design_q(P, C0, Gc, strict=False)
    C = design_controller(P, C0, Q)
    L = design_learning_filter(P, C0, Q)
    Tu, Tr = compute_loop_tfs(P, C)
    D = design_lowpass_d(P.Ts, d_cutoff_hz)
    bundle = DesignBundle(P, C0, Gc, Q, C, L, D, Tu, Tr)
    return replace(bundle, validation=validate_design(bundle))


def closed_loop_char_poly(P: TransferFunction, C: TransferFunction) -> Polynomial:
    """``den_P den_C + num_P num_C``; its roots are all internal closed-loop poles."""
    return P.den * C.den + P.num * C.num


def _max_rel_error(a, b, w) -> float:
    ha, hb = freq_response(a, w), freq_response(b, w)
    return float(np.max(np.abs(ha - hb) / np.maximum(np.abs(hb), 1e-300)))


def validate_design(bundle: DesignBundle) -> ValidationReport:
    """Named pass/fail checks with numeric evidence. Never raises on failure."""
    b = bundle
    w = probe_frequencies(b.Ts)
    checks = []

    def stability(name, g, what):
        rep = is_stable(g)
        mag = float(np.max(rep.magnitudes)) if rep.magnitudes.size else 0.0
        detail = f"{what} poles: {rep.describe()}"
        if not rep:
            off = ", ".join(f"{p.real:.6g}{p.imag:+.6g}j" for p in rep.offending)
            detail = f"{what} has poles on/outside the unit circle: {off}"
        checks.append(CheckResult(name, rep.stable, mag, detail))

    stability("q_stable", b.Q, "Q")
    checks.append(CheckResult("q_proper", b.Q.is_proper, float(b.Q.relative_degree),
                              f"Q relative degree {b.Q.relative_degree} (needs >= 0)"))

    cl = poly_roots(closed_loop_char_poly(b.P, b.C))
    cl_mag = float(np.max(np.abs(cl))) if cl.size else 0.0
    checks.append(CheckResult("closed_loop_stable", bool(cl_mag < 1 - 1e-9), cl_mag,
                              f"max closed-loop pole magnitude {cl_mag:.6g} over {cl.size} poles"))

    stability("l_stable", b.L, "L")
    m = max(0, -b.L.relative_degree)
    checks.append(CheckResult("l_improperness", True, float(m),
                              f"L relative degree {b.L.relative_degree}; applied acausally with {m}-sample advance"))

    stability("d_stable", b.D, "D")
    dc = b.D.dc_gain()
    checks.append(CheckResult("d_unity_dc", bool(abs(dc - 1.0) <= DC_ATOL), dc, f"D(1) = {dc:.6g}"))

    try:
        err = _max_rel_error(feedback(b.P * b.C, 1.0), b.Gc, w)
    except ZeroDivisionError:
        err = math.inf
    checks.append(CheckResult("closed_loop_matches_gc", bool(err <= FR_RTOL), err,
                              f"max relative frequency-response error {err:.3g} at {w.size} points (tol {FR_RTOL:g})"))

    ident = float(np.max(np.abs(1 + freq_response(b.Tu, w) * freq_response(b.L, w))))
    checks.append(CheckResult("learning_identity", bool(ident <= IDENTITY_ATOL), ident,
                              f"sup |1 + Tu L| = {ident:.3g} (tol {IDENTITY_ATOL:g})"))
    return ValidationReport(tuple(checks))


def format_bundle(bundle: DesignBundle) -> str:
    blocks = []
    for name in BUNDLE_ORDER:
        blocks.append(f"[{name}]\n{format_tf(getattr(bundle, name))}\n")
    return "\n".join(blocks)


def parse_bundle(text: str, validate: bool = True) -> DesignBundle:
    parts = {}
    current = None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            continue
        if current is None:
            raise ValueError(f"bundle text outside a section: {line!r}")
        parts[current] = parts.get(current, "") + line + "\n"
    missing = [n for n in BUNDLE_ORDER if n not in parts]
    if missing:
        raise ValueError(f"bundle lacks section(s): {', '.join(missing)}")
    bundle = DesignBundle(**{n: parse_tf(parts[n]) for n in BUNDLE_ORDER})
    return replace(bundle, validation=validate_design(bundle)) if validate else bundle
