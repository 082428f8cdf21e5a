"""Text serialization for transfer functions and signals."""

from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .simulation import Signal
from .transfer import TransferFunction

CONTINUOUS = "continuous"


def _fmt(x: float) -> str:
    # repr is the shortest string that round-trips the double exactly
    return repr(float(x))


def format_tf(g: TransferFunction) -> str:
    """``num: c_n ... c_0 / den: d_m ... d_0 / Ts: <seconds>``."""
    num = " ".join(_fmt(c) for c in g.num.coeffs)
    den = " ".join(_fmt(c) for c in g.den.coeffs)
    ts = CONTINUOUS if g.Ts is None else _fmt(g.Ts)
    return f"num: {num} / den: {den} / Ts: {ts}"


_FIELD = re.compile(r"^\s*(num|den|Ts)\s*:\s*(.*?)\s*$")


def parse_tf(text: str) -> TransferFunction:
    """Inverse of :func:`format_tf`. Fields may also sit on separate lines."""
    fields = {}
    for part in re.split(r"[/\n]", text.strip()):
        if not part.strip():
            continue
        m = _FIELD.match(part)
        if not m:
            raise ValueError(f"unrecognised transfer-function field: {part.strip()!r}")
        fields[m.group(1)] = m.group(2)
    missing = {"num", "den", "Ts"} - fields.keys()
    if missing:
        raise ValueError(f"transfer-function text lacks field(s): {', '.join(sorted(missing))}")
    try:
        num = [float(v) for v in fields["num"].split()]
        den = [float(v) for v in fields["den"].split()]
        ts = None if fields["Ts"] == CONTINUOUS else float(fields["Ts"])
    except ValueError as exc:
        raise ValueError(f"bad number in transfer-function text: {exc}") from None
    return TransferFunction(num, den, ts)


def write_tf(path, g: TransferFunction):
    Path(path).write_text(format_tf(g) + "\n")


def read_tf(path) -> TransferFunction:
    return parse_tf(Path(path).read_text())


def write_signal_csv(path, x: Signal):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t", "value"])
        for k, v in enumerate(x.samples):
            w.writerow([k, _fmt(k * x.sample_time), _fmt(v)])


def read_signal_csv(path) -> Signal:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no samples")
    t = np.array([float(r["t"]) for r in rows])
    values = [float(r["value"]) for r in rows]
    ts = float(np.median(np.diff(t))) if t.size > 1 else 1.0
    return Signal(values, ts)
