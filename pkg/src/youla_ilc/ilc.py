"""Simulated grasp iterations with the Youla-parameterized learning law.

Loop topology per trial: the learning signal is added at the reference
summing junction ahead of the controller, ``s = r + uf - y``, and the
recorded tracking error is ``e = r - y``. Between trials the learning signal
is updated as ``uf <- D(uf + L e)`` with ``L`` applied offline (it may be
improper) and ``D`` applied forward-backward.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DivergenceError
from .synthesis import DesignBundle, compute_loop_tfs
from .tf_core import (
    DifferenceEquation,
    Signal,
    TransferFunction,
    apply_acausal,
    freq_response,
    probe_frequencies,
    zero_phase_filter,
)

DEFAULT_NOISE_STD = 0.05
# 19.62 N span over a 10-bit converter
DEFAULT_QUANTIZATION = 0.0192
DEFAULT_SAMPLES = 100
# the closed loop of the reference design has two samples of pure delay;
# a step before that cannot be tracked by any learning signal
DEFAULT_ONSET = 2


def step_reference(level: float = 10.0, n: int = DEFAULT_SAMPLES, sample_time: float = 0.0568,
                   onset: int = DEFAULT_ONSET) -> Signal:
    return Signal.step(n, sample_time, level, onset)


@dataclass(frozen=True)
class TrialConfig:
    reference: Signal
    plant_true: TransferFunction
    design: DesignBundle
    noise_std: float = 0.0
    quantization_step: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.noise_std < 0 or self.quantization_step < 0:
            raise ValueError("noise_std and quantization_step must be non-negative")

    @property
    def noiseless(self) -> bool:
        return self.noise_std == 0 and self.quantization_step == 0


@dataclass(frozen=True, eq=False)
class IterationRecord:
    index: int
    uf: Signal
    e: Signal
    y: Signal
    u: Signal
    error_norm: float

    def rows(self, reference: Signal):
        r = reference.samples
        Ts = reference.sample_time
        for k in range(len(r)):
            yield (k, k * Ts, r[k], self.uf.samples[k], self.u.samples[k],
                   self.y.samples[k], self.e.samples[k])


@dataclass(frozen=True)
class StopRule:
    plateau_tol: float = 0.05
    divergence_factor: float = 10.0
    plateau_window: int = 2


@dataclass(frozen=True, eq=False)
class CampaignResult:
    iterations: tuple[IterationRecord, ...]
    converged_at: int | None
    stop_reason: str  # "max_iters" | "norm_plateau" | "divergence"
    seed: int = 0

    @property
    def norms(self) -> np.ndarray:
        return np.array([it.error_norm for it in self.iterations])


def _quantize(y, step):
    return step * np.round(y / step) if step > 0 else y


def run_trial(config: TrialConfig, uf: Signal, iteration: int = 0) -> IterationRecord:
    """Simulate one grasp with learning signal ``uf`` injected ahead of C."""
    r = config.reference.samples
    n = r.size
    if len(uf) != n:
        raise ValueError(f"learning signal has {len(uf)} samples, reference has {n}")
    Ts = config.reference.sample_time
    ctrl = DifferenceEquation(config.design.C)
    plant = DifferenceEquation(config.plant_true)
    if ctrl.feedthrough != 0 and plant.feedthrough != 0:
        raise ValueError("controller and plant both have direct feedthrough: algebraic loop")
    noise = (np.random.default_rng([config.seed, iteration]).normal(0.0, config.noise_std, n)
             if config.noise_std > 0 else np.zeros(n))
    q = config.quantization_step
    f = uf.samples
    y = np.empty(n)
    u = np.empty(n)
    plant_first = plant.feedthrough == 0
    for k in range(n):
        if plant_first:
            yk = _quantize(plant.peek() + noise[k], q)
            uk = ctrl.step(r[k] + f[k] - yk)
            plant.step(uk)
        else:
            uk = ctrl.peek()
            yk = _quantize(plant.step(uk) + noise[k], q)
            ctrl.step(r[k] + f[k] - yk)
        if not (math.isfinite(yk) and math.isfinite(uk)):
            raise DivergenceError(k)
        y[k] = yk
        u[k] = uk
    e = r - y
    return IterationRecord(iteration, uf, Signal(e, Ts), Signal(y, Ts), Signal(u, Ts),
                           float(np.linalg.norm(e)))


def update_learning_signal(prev: IterationRecord, design: DesignBundle) -> Signal:
    """``D(uf + L e)`` from the previous iteration."""
    learned = apply_acausal(design.L, prev.e).samples
    raw = prev.uf.with_samples(prev.uf.samples + learned)
    if design.D.is_unity():
        return raw
    return zero_phase_filter(design.D, raw)


def learning_recursion(design: DesignBundle) -> TransferFunction:
    """``1 + Tu L``, the per-iteration error map with D treated as one."""
    return 1 + design.Tu * design.L


def predict_next_error(e: Signal, design: DesignBundle) -> Signal:
    return apply_acausal(learning_recursion(design), e)


def _diverged(norm, e0, factor):
    return not math.isfinite(norm) or norm > factor * e0


def run_campaign(config: TrialConfig, max_iters: int = 8, stop: StopRule = StopRule()) -> CampaignResult:
    """Iteration 0 is pure feedback (zero learning signal); each later
    iteration uses the updated learning signal from the one before."""
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    n = len(config.reference)
    uf = config.reference.with_samples(np.zeros(n))
    records = []
    for j in range(max_iters):
        try:
            rec = run_trial(config, uf, j)
        except DivergenceError:
            return CampaignResult(tuple(records), None, "divergence", config.seed)
        records.append(rec)
        norms = [r.error_norm for r in records]
        if j > 0 and _diverged(norms[-1], norms[0], stop.divergence_factor):
            return CampaignResult(tuple(records), None, "divergence", config.seed)
        w = stop.plateau_window
        if j >= w and all(
            abs(norms[i] - norms[i - 1]) < stop.plateau_tol * norms[i - 1]
            for i in range(j - w + 1, j + 1)
        ):
            return CampaignResult(tuple(records), j - w, "norm_plateau", config.seed)
        if j + 1 < max_iters:
            try:
                uf = update_learning_signal(rec, config.design)
            except ValueError:
                # non-finite learning signal
                return CampaignResult(tuple(records), None, "divergence", config.seed)
    return CampaignResult(tuple(records), None, "max_iters", config.seed)


def run_seed_batch(config: TrialConfig, seeds, max_iters: int = 8,
                   stop: StopRule = StopRule()) -> list[CampaignResult]:
    """Independent campaigns, one per seed, returned in seed order."""
    return [run_campaign(replace(config, seed=int(s)), max_iters, stop) for s in seeds]


def mean_norms(results) -> tuple[np.ndarray, np.ndarray]:
    """Per-iteration mean error norm over campaigns, and how many contributed."""
    depth = max(len(r.iterations) for r in results)
    means, counts = np.zeros(depth), np.zeros(depth, dtype=int)
    for j in range(depth):
        vals = [r.iterations[j].error_norm for r in results if len(r.iterations) > j]
        means[j] = np.mean(vals)
        counts[j] = len(vals)
    return means, counts


# -- robustness ----------------------------------------------------------------

def contraction_margin(design: DesignBundle, plant_true: TransferFunction,
                       use_d: bool = True, omegas=None) -> float:
    """``sup |D_eff (1 + Tu_true L)|`` over probe frequencies.

    ``D_eff = |D|^2`` for forward-backward application. Below one, the
    deviation of the error from its fixed point contracts every iteration.
    """
    w = probe_frequencies(design.Ts, 200) if omegas is None else omegas
    Tu_true, _ = compute_loop_tfs(plant_true, design.C)
    factor = 1 + freq_response(Tu_true, w) * freq_response(design.L, w)
    if use_d and not design.D.is_unity():
        factor = factor * np.abs(freq_response(design.D, w)) ** 2
    return float(np.max(np.abs(factor)))


@dataclass(frozen=True, eq=False)
class SweepRow:
    label: str
    perturbation: TransferFunction
    margin_without_d: float
    margin_with_d: float
    without_d: CampaignResult
    with_d: CampaignResult

    @property
    def diverged_without_d(self) -> bool:
        return self.without_d.stop_reason == "divergence"

    @property
    def diverged_with_d(self) -> bool:
        return self.with_d.stop_reason == "divergence"


def robustness_sweep(config: TrialConfig, perturbations, max_iters: int = 8,
                     stop: StopRule = StopRule()) -> list[SweepRow]:
    """Campaigns with and without D for each multiplicative plant perturbation.

    ``perturbations`` is a sequence of ``(label, Delta)`` pairs; the true
    plant of each row is ``design.P * Delta``.
    """
    design = config.design
    no_d = replace(design, D=TransferFunction.constant(1.0, design.Ts))
    rows = []
    for label, delta in perturbations:
        plant_true = design.P * delta
        cfg = replace(config, plant_true=plant_true)
        rows.append(SweepRow(
            label,
            delta,
            contraction_margin(no_d, plant_true, use_d=False),
            contraction_margin(design, plant_true, use_d=True),
            run_campaign(replace(cfg, design=no_d), max_iters, stop),
            run_campaign(cfg, max_iters, stop),
        ))
    return rows


def perturb_b1(plant: TransferFunction, fraction: float) -> TransferFunction:
    """Scale the leading numerator coefficient by ``1 + fraction``."""
    num = plant.num.coeffs.copy()
    num[0] *= 1.0 + fraction
    return TransferFunction(num, plant.den, plant.Ts)


def resonant_bump(sample_time: float, freq_hz: float = 6.0, radius: float = 0.85,
                  gain: float = 3.5) -> TransferFunction:
    """Multiplicative perturbation ``1 + gain * B(z)`` with ``B`` a unit-peak band-pass.

    ``B = k (z^2 - 1) / (z^2 - 2 r cos(theta) z + r^2)`` has zeros at DC and
    Nyquist, so the perturbation is the identity there and reaches roughly
    ``1 + gain`` near ``freq_hz``. It leaves relative degree unchanged.
    """
    theta = 2 * math.pi * freq_hz * sample_time
    if not 0 < theta < math.pi:
        raise ValueError(f"{freq_hz} Hz is not between DC and Nyquist")
    bp = TransferFunction([1.0, 0.0, -1.0], [1.0, -2 * radius * math.cos(theta), radius**2],
                          sample_time)
    k = 1.0 / abs(freq_response(bp, [2 * math.pi * freq_hz])[0])
    return 1 + (gain * k) * bp


@dataclass(frozen=True, eq=False)
class MismatchScenario:
    """Noiseless campaign pair against a plant with unmodeled high-frequency gain."""

    label: str
    perturbation: TransferFunction
    config: TrialConfig
    max_iters: int = 20

    def run(self, stop: StopRule = StopRule()) -> SweepRow:
        return robustness_sweep(self.config, [(self.label, self.perturbation)],
                                self.max_iters, stop)[0]


def high_frequency_mismatch_scenario(design: DesignBundle, reference: Signal | None = None
                                     ) -> MismatchScenario:
    """A 6 Hz resonance absent from the model.

    Without D the learning gain there exceeds one and the campaign diverges;
    the zero-phase low-pass attenuates it by ``|D|^2`` and keeps the
    iteration contracting.
    """
    Ts = design.Ts
    r = step_reference(sample_time=Ts) if reference is None else reference
    delta = resonant_bump(Ts)
    cfg = TrialConfig(r, design.P * delta, design)
    return MismatchScenario("resonance 6 Hz x4.5", delta, cfg)


# -- export ----------------------------------------------------------------------

def write_campaign(directory, result: CampaignResult, reference: Signal):
    """One ``iter_XXX.csv`` per iteration plus ``norms.csv``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for rec in result.iterations:
        with open(d / f"iter_{rec.index:03d}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "t", "r", "uf", "u", "y", "e"])
            for row in rec.rows(reference):
                w.writerow([row[0], *(repr(float(v)) for v in row[1:])])
    write_norms(d / "norms.csv", result.norms)


def write_norms(path, norms, counts=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "error_norm"] + (["n_campaigns"] if counts is not None else []))
        for j, v in enumerate(norms):
            w.writerow([j, repr(float(v))] + ([int(counts[j])] if counts is not None else []))
