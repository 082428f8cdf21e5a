"""Published thumb-grasp design values and coefficient comparison tables.

The printed coefficients carry three to four significant digits, so the
comparisons here are loose cross-checks, not equalities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tf_core import TransferFunction

SAMPLE_TIME = 0.0568
TARGET_FORCE = 10.0
SENSOR_RANGE = (0.0, 19.62)
COEFF_RTOL = 0.15

# (numerator, denominator, printed text) per element, highest power first
PLANT = ((0.7902, 0.6208), (1.0, -0.9748, 0.3442),
         "(0.7902z + 0.6208) / (z^2 - 0.9748z + 0.3442)")
TARGET_CONTINUOUS = ((9.0,), (1.0, 3.0, 9.0), "9 / (s^2 + 3s + 9)")
TARGET = ((0.013, 0.0116), (1.0, -1.687, 0.711, 0.0),
          "(0.013z + 0.0116) / (z^3 - 1.687z^2 + 0.711z)")
YOULA_Q = ((0.013, -0.0012, -0.0069, 0.004, 0.0), (0.784, -0.737, 0.430, 0.416, 0.0),
           "(0.013z^4 - 0.0012z^3 - 0.0069z^2 + 0.004z) / (0.784z^4 - 0.737z^3 + 0.430z^2 + 0.416z)")
CONTROLLER = ((0.017, -0.0159, 0.0053), (1.0, -1.676, 0.676),
              "(0.017z^2 - 0.0159z + 0.0053) / (z^2 - 1.676z + 0.676)")
LEARNING = ((14.98, -39.84, 40.18, -18.65, 3.413, 0.0467), (1.0, -0.1865, -0.3842, 0.2336, 0.0),
            "(14.98z^5 - 39.84z^4 + 40.18z^3 - 18.65z^2 + 3.413z + 0.0467) / "
            "(z^4 - 0.1865z^3 - 0.3842z^2 + 0.2336z)")

PUBLISHED = {"P": PLANT, "Gc": TARGET, "Q": YOULA_Q, "C": CONTROLLER, "L": LEARNING}


def published_tf(name: str, Ts: float = SAMPLE_TIME) -> TransferFunction:
    """The printed element as a (non-reduced) transfer function."""
    num, den, _ = PUBLISHED[name]
    return TransferFunction(num, den, Ts)


def monic(num, den):
    """Divide both coefficient lists by the leading denominator coefficient."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    return num / den[0], den / den[0]


@dataclass(frozen=True)
class CoefficientRow:
    part: str           # "num" or "den"
    power: int          # power of z in the computed form
    computed: float | None
    published: float | None

    @property
    def rel_delta(self) -> float | None:
        if self.computed is None or self.published is None:
            return None
        if self.published == 0.0:
            return 0.0 if self.computed == 0.0 else float("inf")
        return abs(self.computed - self.published) / abs(self.published)


@dataclass(frozen=True)
class Comparison:
    name: str
    published_text: str
    computed: TransferFunction
    rows: tuple[CoefficientRow, ...]

    def part_within(self, part: str, rtol: float = COEFF_RTOL) -> bool:
        deltas = [r.rel_delta for r in self.rows if r.part == part and r.rel_delta is not None]
        return bool(deltas) and all(d <= rtol for d in deltas)

    @property
    def degree_mismatch(self) -> bool:
        return any(r.computed is None or r.published is None for r in self.rows)


def _align(part, ours, theirs):
    """Pair coefficients from the highest power down; extras are unmatched."""
    rows = []
    n = max(ours.size, theirs.size)
    top = ours.size - 1
    for i in range(n):
        c = float(ours[i]) if i < ours.size else None
        p = float(theirs[i]) if i < theirs.size else None
        rows.append(CoefficientRow(part, top - i, c, p))
    return rows


def compare(name: str, computed: TransferFunction) -> Comparison:
    """Per-coefficient comparison against the published element.

    Both forms are normalized to a monic denominator and aligned from the
    highest power, which absorbs a common power-of-z scaling between the
    printed and the reduced form.
    """
    num, den, text = PUBLISHED[name]
    pn, pd = monic(num, den)
    cn, cd = monic(computed.num.coeffs, computed.den.coeffs)
    rows = _align("num", cn, pn) + _align("den", cd, pd)
    return Comparison(name, text, computed, tuple(rows))


def format_comparison(cmp: Comparison) -> str:
    lines = [
        f"== {cmp.name}: computed vs published ==",
        f"published (verbatim): {cmp.published_text}",
        f"computed (exact):     {cmp.computed}",
        "monic-normalized, aligned from the highest power:",
        f"{'part':<5}{'power':>6}{'computed':>18}{'published':>14}{'rel_delta':>12}",
    ]
    for r in cmp.rows:
        c = "-" if r.computed is None else f"{r.computed:.8g}"
        p = "-" if r.published is None else f"{r.published:.6g}"
        d = "-" if r.rel_delta is None else f"{100 * r.rel_delta:.2f}%"
        lines.append(f"{r.part:<5}{r.power:>6}{c:>18}{p:>14}{d:>12}")
    for part in ("num", "den"):
        ok = cmp.part_within(part)
        lines.append(f"{part} within {100 * COEFF_RTOL:.0f}%: {'yes' if ok else 'NO'}")
    if cmp.degree_mismatch:
        lines.append("degree mismatch: unmatched coefficients marked '-'")
    return "\n".join(lines)
