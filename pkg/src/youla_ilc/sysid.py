"""ARX plant identification by recursive least squares."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, IdentificationError
from .reference import SENSOR_RANGE
from .tf_core import Signal, TransferFunction, simulate

DEFAULT_P0 = 1e6
CONTACT_THRESHOLD = 0.1
# smallest/largest eigenvalue ratio of the information matrix below which
# the input is treated as not persistently exciting
SINGULAR_RCOND = 1e-10


@dataclass(frozen=True)
class IoDataset:
    """Logged servo command ``u`` and fingertip force ``y``."""

    u: Signal
    y: Signal
    label: str = ""
    hardware: bool = False

    def __post_init__(self):
        if len(self.u) != len(self.y):
            raise DataError(f"u and y lengths differ ({len(self.u)} vs {len(self.y)})")
        if not math.isclose(self.u.sample_time, self.y.sample_time, rel_tol=1e-12):
            raise DataError("u and y sample times differ")
        if self.hardware:
            lo, hi = SENSOR_RANGE
            bad = np.flatnonzero((self.y.samples < lo) | (self.y.samples > hi))
            if bad.size:
                raise DataError(f"force at sample {bad[0]} outside sensor range [{lo}, {hi}] N")

    @property
    def sample_time(self) -> float:
        return self.u.sample_time

    def __len__(self):
        return len(self.u)

    @classmethod
    def from_arrays(cls, u, y, sample_time, label="", hardware=False):
        try:
            return cls(Signal(u, sample_time), Signal(y, sample_time), label, hardware)
        except ValueError as exc:
            if isinstance(exc, DataError):
                raise
            raise DataError(str(exc)) from None

    def slice(self, start: int, stop: int | None = None) -> "IoDataset":
        return IoDataset.from_arrays(self.u.samples[start:stop], self.y.samples[start:stop],
                                     self.sample_time, self.label, self.hardware)


@dataclass(frozen=True)
class ArxSpec:
    """``y(k) + a1 y(k-1) + ... = b1 u(k-delay) + ... + b_nb u(k-delay-nb+1)``."""

    na: int = 2
    nb: int = 2
    delay: int = 1

    def __post_init__(self):
        if self.na < 1 or self.nb < 1 or self.delay < 0:
            raise ValueError("ArxSpec needs na >= 1, nb >= 1, delay >= 0")

    @property
    def n_params(self) -> int:
        return self.na + self.nb

    @property
    def max_lag(self) -> int:
        return max(self.na, self.delay + self.nb - 1)


@dataclass(frozen=True, eq=False)
class RlsState:
    theta: np.ndarray
    covariance: np.ndarray
    forgetting: float = 1.0
    samples_seen: int = 0

    @classmethod
    def initial(cls, n: int, p0: float = DEFAULT_P0, forgetting: float = 1.0) -> "RlsState":
        if not 0 < forgetting <= 1:
            raise ValueError("forgetting factor must lie in (0, 1]")
        return cls(np.zeros(n), p0 * np.eye(n), forgetting, 0)


def rls_step(state: RlsState, regressor, y_k: float) -> RlsState:
    """One recursive least-squares update with exponential forgetting."""
    phi = np.asarray(regressor, dtype=float)
    if phi.shape != state.theta.shape:
        raise ValueError(f"regressor length {phi.size} != parameter count {state.theta.size}")
    if not (np.all(np.isfinite(phi)) and math.isfinite(y_k)):
        raise ValueError("non-finite regressor or measurement")
    lam = state.forgetting
    P = state.covariance
    Pphi = P @ phi
    gain = Pphi / (lam + phi @ Pphi)
    theta = state.theta + gain * (y_k - phi @ state.theta)
    P = (P - np.outer(gain, Pphi)) / lam
    P = 0.5 * (P + P.T)
    return RlsState(theta, P, lam, state.samples_seen + 1)


def regressors(data: IoDataset, spec: ArxSpec) -> tuple[np.ndarray, np.ndarray]:
    """Stack ``phi(k) = [-y(k-1)..-y(k-na), u(k-d)..u(k-d-nb+1)]`` for every k
    whose lags all fall inside the record."""
    u, y = data.u.samples, data.y.samples
    n0 = spec.max_lag
    ks = np.arange(n0, len(data))
    cols = [-y[ks - i] for i in range(1, spec.na + 1)]
    cols += [u[ks - spec.delay - j] for j in range(spec.nb)]
    return np.column_stack(cols), y[ks]


def arx_to_tf(theta, spec: ArxSpec, Ts: float) -> TransferFunction:
    a = np.asarray(theta[: spec.na], dtype=float)
    b = np.asarray(theta[spec.na:], dtype=float)
    n = spec.max_lag
    den = np.zeros(n + 1)
    den[0] = 1.0
    den[1: spec.na + 1] = a
    num = np.zeros(n + 1)
    num[spec.delay: spec.delay + spec.nb] = b
    # strip common powers of z exactly, leaving the printed canonical form
    while num.size > 1 and num[-1] == 0.0 and den[-1] == 0.0:
        num, den = num[:-1], den[:-1]
    return TransferFunction(num, den, Ts)


@dataclass(frozen=True)
class FitReport:
    n_samples: int
    n_regressors: int
    residual_rms: float
    fit_percent: float
    coefficients: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [
            f"n_samples: {self.n_samples}",
            f"n_regressors: {self.n_regressors}",
            f"residual_rms: {self.residual_rms!r}",
            f"fit_percent: {self.fit_percent!r}",
        ]
        lines += [f"{k}: {v!r}" for k, v in self.coefficients.items()]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        keys = ["n_samples", "n_regressors", "residual_rms", "fit_percent", *self.coefficients]
        w.writerow(keys)
        w.writerow([self.n_samples, self.n_regressors, repr(self.residual_rms),
                    repr(self.fit_percent), *(repr(v) for v in self.coefficients.values())])
        return buf.getvalue()


@dataclass(frozen=True)
class Identification:
    plant: TransferFunction
    state: RlsState
    report: FitReport


def exact_initial_state(Phi: np.ndarray, target: np.ndarray, forgetting: float = 1.0
                        ) -> tuple[RlsState, int]:
    """Batch least-squares start on the shortest leading block of full rank.

    Returns the state and the number of rows consumed. Starting here instead
    of from a diffuse prior removes the ``O(1/p0)`` bias of the estimate.
    """
    n = Phi.shape[1]
    m = n
    while True:
        block = Phi[:m]
        w = forgetting ** np.arange(m - 1, -1, -1)
        info = block.T @ (w[:, None] * block)
        eig = np.linalg.eigvalsh(info)
        if eig[-1] > 0 and eig[0] / eig[-1] >= SINGULAR_RCOND:
            P = np.linalg.inv(info)
            P = 0.5 * (P + P.T)
            theta = P @ (block.T @ (w * target[:m]))
            return RlsState(theta, P, forgetting, m), m
        if m == Phi.shape[0]:
            raise IdentificationError("no leading block of the record has full rank")
        m = min(2 * m, Phi.shape[0])


def identify(data: IoDataset, spec: ArxSpec = ArxSpec(), forgetting: float = 1.0,
             p0: float | None = None) -> Identification:
    """Fit an ARX model by running RLS over the record.

    By default RLS starts from a batch least-squares solution on the first
    rows of full rank; with ``p0`` set it starts from ``theta = 0``,
    ``P = p0 I`` instead. The fit percentage compares the model's free-run
    simulation (from rest) to the measured output, not its one-step
    prediction.
    """
    if len(data) <= 10 * spec.n_params:
        raise DataError(
            f"{len(data)} samples is too few for {spec.n_params} parameters "
            f"(need more than {10 * spec.n_params})"
        )
    Phi, target = regressors(data, spec)
    info = Phi.T @ Phi
    eig = np.linalg.eigvalsh(info)
    if eig[-1] <= 0 or eig[0] / eig[-1] < SINGULAR_RCOND:
        raise IdentificationError(
            f"information matrix is singular (eigenvalue ratio {eig[0] / max(eig[-1], 1e-300):.3g}); "
            "input is not persistently exciting"
        )
    if p0 is None:
        state, start = exact_initial_state(Phi, target, forgetting)
    else:
        state, start = RlsState.initial(spec.n_params, p0, forgetting), 0
    for phi, yk in zip(Phi[start:], target[start:]):
        state = rls_step(state, phi, float(yk))

    plant = arx_to_tf(state.theta, spec, data.sample_time)
    resid = target - Phi @ state.theta
    yhat = simulate(plant, data.u).samples
    y = data.y.samples
    spread = np.linalg.norm(y - y.mean())
    fit = 100.0 * (1.0 - np.linalg.norm(y - yhat) / spread) if spread > 0 else float("nan")
    names = [f"a{i}" for i in range(1, spec.na + 1)] + [f"b{j}" for j in range(1, spec.nb + 1)]
    report = FitReport(len(data), Phi.shape[0], float(np.sqrt(np.mean(resid**2))), float(fit),
                       dict(zip(names, map(float, state.theta))))
    return Identification(plant, state, report)


def trim_before_contact(data: IoDataset, threshold: float = CONTACT_THRESHOLD) -> IoDataset:
    """Drop samples before the first force reading above ``threshold``."""
    above = np.flatnonzero(data.y.samples > threshold)
    if above.size == 0:
        raise DataError(f"force never exceeds the contact threshold {threshold} N")
    return data.slice(int(above[0]))


def prbs(n: int, seed: int = 0, low: float = 0.0, high: float = 1.0, min_hold: int = 1) -> np.ndarray:
    """Pseudo-random binary sequence with a random hold length in [min_hold, 3*min_hold]."""
    rng = np.random.default_rng(seed)
    out = np.empty(n)
    level = high
    k = 0
    while k < n:
        hold = int(rng.integers(min_hold, 3 * min_hold + 1))
        out[k: k + hold] = level
        level = low if level == high else high
        k += hold
    return out


def synthesize_dataset(plant: TransferFunction, n: int = 400, seed: int = 0,
                       noise_std: float = 0.0, label: str = "synthetic") -> IoDataset:
    """Simulate ``plant`` under a zero-mean +/-1 PRBS, optionally adding output noise."""
    u = Signal(prbs(n, seed, -1.0, 1.0), plant.Ts)
    y = simulate(plant, u).samples
    if noise_std > 0:
        y = y + np.random.default_rng([seed, 1]).normal(0.0, noise_std, n)
    return IoDataset(u, Signal(y, plant.Ts), label)


def ingest_csv(path, hardware: bool = False, label: str | None = None,
               jitter_tol: float = 0.01) -> IoDataset:
    """Read a ``k,t,u,y`` log.

    The sample time is the median spacing of ``t``; spacing jitter above
    ``jitter_tol`` (relative) raises a warning.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if header != ["k", "t", "u", "y"]:
            raise DataError(f"{path}: expected header k,t,u,y, got {','.join(header)}")
        t, u, y = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise DataError(f"{path}: row {lineno} has {len(row)} fields, expected 4")
            try:
                _, tk, uk, yk = int(row[0]), float(row[1]), float(row[2]), float(row[3])
            except ValueError:
                raise DataError(f"{path}: row {lineno} is malformed: {','.join(row)}") from None
            for name, v in (("t", tk), ("u", uk), ("y", yk)):
                if not math.isfinite(v):
                    raise DataError(f"{path}: row {lineno} has non-finite {name}")
            t.append(tk)
            u.append(uk)
            y.append(yk)
    if not t:
        raise DataError(f"{path}: no data rows")
    t = np.asarray(t)
    if t.size > 1:
        dt = np.diff(t)
        if np.any(dt <= 0):
            bad = int(np.flatnonzero(dt <= 0)[0]) + 3
            raise DataError(f"{path}: time is not strictly increasing at row {bad}")
        ts = float(f"{np.median(dt):.12g}")  # logged times are decimal; drop rounding noise
        jitter = float(np.max(np.abs(dt - ts)) / ts)
        if jitter > jitter_tol:
            warnings.warn(f"{path}: sample spacing jitter {100 * jitter:.2f}% exceeds "
                          f"{100 * jitter_tol:.0f}%", stacklevel=2)
    else:
        raise DataError(f"{path}: a single row does not define a sample time")
    return IoDataset.from_arrays(u, y, ts, label if label is not None else str(path), hardware)


def write_dataset_csv(path, data: IoDataset):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t", "u", "y"])
        for k, (uk, yk) in enumerate(zip(data.u.samples, data.y.samples)):
            w.writerow([k, repr(k * data.sample_time), repr(float(uk)), repr(float(yk))])
