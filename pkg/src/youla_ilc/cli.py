"""Command-line pipeline: simulate, identify, design, campaign, sweep, bode, report.

Every command reads the same flat ``key = value`` config file. Keys not in
the file take their defaults (``youla-ilc keys`` lists them); ``--set
KEY=VALUE`` and the dedicated flags override the file.

Exit codes: 0 ok, 2 data, 3 identification, 4 design validation,
5 campaign divergence.
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import reference as pub
from .errors import DataError, DivergenceError, IdentificationError
from .ilc import (
    StopRule,
    TrialConfig,
    high_frequency_mismatch_scenario,
    mean_norms,
    perturb_b1,
    robustness_sweep,
    run_seed_batch,
    step_reference,
    write_campaign,
    write_norms,
)
from .synthesis import (
    discretize,
    format_bundle,
    normalize_dc_gain,
    parse_bundle,
    synthesize,
)
from .sysid import (
    ArxSpec,
    identify,
    ingest_csv,
    synthesize_dataset,
    trim_before_contact,
    write_dataset_csv,
)
from .tf_core import (
    TransferFunction,
    freq_response,
    minreal,
    probe_frequencies,
    read_tf,
    write_tf,
)

EXIT_OK = 0
EXIT_DATA = 2
EXIT_IDENT = 3
EXIT_VALIDATION = 4
EXIT_DIVERGENCE = 5


def _none_or_float(s: str):
    return None if s.strip().lower() in ("", "none", "off") else float(s)


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _coeffs(s: str) -> tuple[float, ...]:
    vals = tuple(float(x) for x in s.replace(",", " ").split())
    if not vals:
        raise ValueError("empty coefficient list")
    return vals


def _choice(*options):
    def parse(s):
        v = s.strip().lower()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {s!r}")
        return v
    return parse


# key -> (default text, parser, description)
KEYS = {
    # paths; empty means a fixed name inside the output directory
    "out": ("out", str, "output directory"),
    "dataset": ("", str, "k,t,u,y CSV for identify (default <out>/dataset.csv)"),
    "plant_file": ("", str, "plant TF file (default <out>/plant.tf)"),
    "bundle_file": ("", str, "design bundle (default <out>/design.bundle)"),
    # data and identification
    "sample_time": ("0.0568", float, "sample time in seconds"),
    "synth_samples": ("400", int, "samples written by simulate"),
    "synth_noise": ("0.0", float, "output noise std written by simulate"),
    "hardware": ("false", _bool, "enforce the 0..19.62 N sensor range on ingest"),
    "trim_threshold": ("none", _none_or_float, "drop samples before force first exceeds this (none: keep all)"),
    "na": ("2", int, "ARX output lags"),
    "nb": ("2", int, "ARX input lags"),
    "delay": ("1", int, "ARX input delay in samples"),
    "forgetting": ("1.0", float, "RLS forgetting factor"),
    # design
    "plant_source": ("file", _choice("file", "published"), "design plant: identified file or published model"),
    "gc_mode": ("direct", _choice("direct", "continuous"), "target closed loop entry mode"),
    "gc_num": (" ".join(map(str, pub.TARGET[0])), _coeffs, "direct-mode target numerator"),
    "gc_den": (" ".join(map(str, pub.TARGET[1])), _coeffs, "direct-mode target denominator"),
    "gc_cont_num": (" ".join(map(str, pub.TARGET_CONTINUOUS[0])), _coeffs, "continuous prototype numerator (s)"),
    "gc_cont_den": (" ".join(map(str, pub.TARGET_CONTINUOUS[1])), _coeffs, "continuous prototype denominator (s)"),
    "gc_method": ("zoh", _choice("zoh", "tustin"), "discretization for continuous mode"),
    "c0_num": ("0", _coeffs, "baseline controller numerator"),
    "c0_den": ("1", _coeffs, "baseline controller denominator"),
    "d_cutoff_hz": ("2.0", _none_or_float, "low-pass D cutoff in Hz (none: D = 1)"),
    # campaign
    "reference_level": ("10.0", float, "step reference level in N"),
    "reference_samples": ("100", int, "samples per trial"),
    "reference_onset": ("2", int, "step onset sample"),
    "noise_std": ("0.05", float, "force sensor noise std in N"),
    "quantization_step": ("0.0192", float, "force sensor quantization in N (0: off)"),
    "perturb_b1": ("0.0", float, "relative error on the true plant's leading numerator coefficient"),
    "seed": ("0", int, "first campaign seed"),
    "seeds": ("1", int, "number of campaigns (seeds seed..seed+seeds-1)"),
    "max_iters": ("8", int, "iterations per campaign"),
    "plateau_tol": ("0.05", float, "relative norm change that counts as a plateau"),
    "divergence_factor": ("10.0", float, "norm growth over iteration 0 that counts as divergence"),
    # analysis
    "bode_points": ("200", int, "frequency points per Bode CSV"),
    "sweep_gains": ("-0.2 0.2 0.5", _coeffs, "relative gain errors probed by sweep"),
}


@dataclass
class PipelineConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def out(self) -> Path:
        return Path(self["out"])

    def path(self, key: str, default_name: str) -> Path:
        v = self[key]
        return Path(v) if v else self.out / default_name

    @property
    def arx(self) -> ArxSpec:
        return ArxSpec(self["na"], self["nb"], self["delay"])

    @property
    def stop(self) -> StopRule:
        return StopRule(self["plateau_tol"], self["divergence_factor"])


def load_config(path=None, overrides=None) -> PipelineConfig:
    raw = {k: v[0] for k, v in KEYS.items()}
    if path is not None:
        text = Path(path).read_text()
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        cp.optionxform = str
        cp.read_string("[pipeline]\n" + text, source=str(path))
        for k, v in cp["pipeline"].items():
            if k not in KEYS:
                raise DataError(f"{path}: unknown config key {k!r}")
            raw[k] = v
    for k, v in (overrides or {}).items():
        if k not in KEYS:
            raise DataError(f"unknown config key {k!r}")
        raw[k] = v
    values = {}
    for k, text in raw.items():
        try:
            values[k] = KEYS[k][1](text)
        except ValueError as exc:
            raise DataError(f"config key {k}: {exc}") from None
    return PipelineConfig(values)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _read_tf_file(path: Path, what: str) -> TransferFunction:
    if not path.is_file():
        raise DataError(f"{what} file not found: {path}")
    try:
        return read_tf(path)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def _read_bundle(cfg: PipelineConfig):
    path = cfg.path("bundle_file", "design.bundle")
    if not path.is_file():
        raise DataError(f"design bundle not found: {path} (run 'design' first)")
    try:
        return parse_bundle(path.read_text())
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


# -- commands -------------------------------------------------------------------

def cmd_simulate(cfg: PipelineConfig) -> int:
    """Write a PRBS dataset from the published plant model."""
    P = pub.published_tf("P", cfg["sample_time"])
    data = synthesize_dataset(P, cfg["synth_samples"], cfg["seed"], cfg["synth_noise"])
    path = cfg.path("dataset", "dataset.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(path, data)
    print(f"wrote {path} ({len(data)} samples)")
    return EXIT_OK


def cmd_identify(cfg: PipelineConfig) -> int:
    """Fit an ARX plant to the dataset and write plant.tf plus the fit report."""
    path = cfg.path("dataset", "dataset.csv")
    if not path.is_file():
        raise DataError(f"dataset not found: {path}")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        data = ingest_csv(path, hardware=cfg["hardware"])
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if cfg["trim_threshold"] is not None:
        data = trim_before_contact(data, cfg["trim_threshold"])
    result = identify(data, cfg.arx, cfg["forgetting"])
    plant_path = cfg.path("plant_file", "plant.tf")
    plant_path.parent.mkdir(parents=True, exist_ok=True)
    write_tf(plant_path, result.plant)
    _write(cfg.out / "fit_report.txt", result.report.to_text())
    _write(cfg.out / "fit_report.csv", result.report.to_csv())
    print(f"identified plant: {result.plant}")
    print(f"fit {result.report.fit_percent:.2f}% over {result.report.n_samples} samples")
    return EXIT_OK


def _target(cfg: PipelineConfig) -> TransferFunction:
    Ts = cfg["sample_time"]
    if cfg["gc_mode"] == "direct":
        return TransferFunction(cfg["gc_num"], cfg["gc_den"], Ts)
    proto = TransferFunction(cfg["gc_cont_num"], cfg["gc_cont_den"], None)
    return normalize_dc_gain(discretize(proto, Ts, cfg["gc_method"]))


def cmd_design(cfg: PipelineConfig, force: bool = False) -> int:
    """Synthesize Q, C, L and D for the plant and target; write validation and bundle."""
    if cfg["plant_source"] == "published":
        P = pub.published_tf("P", cfg["sample_time"])
    else:
        P = _read_tf_file(cfg.path("plant_file", "plant.tf"), "plant")
    if P.Ts is None or not math.isclose(P.Ts, cfg["sample_time"], rel_tol=1e-9):
        raise DataError(f"plant sample time {P.Ts} differs from sample_time {cfg['sample_time']}")
    Gc = _target(cfg)
    C0 = TransferFunction(cfg["c0_num"], cfg["c0_den"], P.Ts)
    bundle = synthesize(P, Gc, C0, cfg["d_cutoff_hz"])
    report = bundle.validation
    _write(cfg.out / "validation.txt", report.to_text())
    _write(cfg.out / "validation.csv", report.to_csv())
    print(report.to_text(), end="")
    if not report.passed and not force:
        names = ", ".join(c.name for c in report.failures())
        print(f"design validation failed: {names}; bundle not written (use --force)", file=sys.stderr)
        return EXIT_VALIDATION
    _write(cfg.path("bundle_file", "design.bundle"), format_bundle(bundle))
    return EXIT_OK if report.passed else EXIT_VALIDATION


def _trial_config(cfg: PipelineConfig, bundle) -> TrialConfig:
    r = step_reference(cfg["reference_level"], cfg["reference_samples"], bundle.Ts,
                       cfg["reference_onset"])
    plant_true = perturb_b1(bundle.P, cfg["perturb_b1"]) if cfg["perturb_b1"] else bundle.P
    return TrialConfig(r, plant_true, bundle, cfg["noise_std"], cfg["quantization_step"], cfg["seed"])


def cmd_campaign(cfg: PipelineConfig) -> int:
    """Run seeded ILC campaigns against the design and write per-iteration norms."""
    bundle = _read_bundle(cfg)
    tc = _trial_config(cfg, bundle)
    if cfg["seeds"] < 1:
        raise DataError("seeds must be at least 1")
    seeds = range(cfg["seed"], cfg["seed"] + cfg["seeds"])
    results = run_seed_batch(tc, seeds, cfg["max_iters"], cfg.stop)
    root = cfg.out / "campaign"
    for res in results:
        write_campaign(root / f"seed_{res.seed:04d}", res, tc.reference)
    means, counts = mean_norms(results)
    write_norms(root / "norms.csv", means, counts)

    lines = [f"campaigns: {len(results)}", f"iterations: max {cfg['max_iters']}"]
    for res in results:
        conv = "none" if res.converged_at is None else str(res.converged_at)
        lines.append(f"seed {res.seed}: stop_reason={res.stop_reason} converged_at={conv} "
                     f"iterations={len(res.iterations)}")
    lines.append("mean error norm per iteration:")
    lines.append("iteration,mean_error_norm,n_campaigns")
    lines += [f"{j},{m:.6g},{c}" for j, (m, c) in enumerate(zip(means, counts))]
    text = "\n".join(lines) + "\n"
    _write(root / "summary.txt", text)
    print(text, end="")
    diverged = [r.seed for r in results if r.stop_reason == "divergence"]
    if diverged:
        print(f"divergence in seed(s) {', '.join(map(str, diverged))}", file=sys.stderr)
        return EXIT_DIVERGENCE
    return EXIT_OK


def cmd_sweep(cfg: PipelineConfig) -> int:
    """Margins and campaigns with and without D under plant perturbations."""
    bundle = _read_bundle(cfg)
    tc = replace(_trial_config(cfg, bundle), noise_std=0.0, quantization_step=0.0)
    perts = [(f"gain {g:+g}", TransferFunction.constant(1.0 + g, bundle.Ts)) for g in cfg["sweep_gains"]]
    scenario = high_frequency_mismatch_scenario(bundle, tc.reference)
    perts.append((scenario.label, scenario.perturbation))
    rows = robustness_sweep(tc, perts, cfg["max_iters"], cfg.stop)
    out = ["perturbation,margin_without_d,margin_with_d,stop_without_d,stop_with_d,"
           "final_norm_without_d,final_norm_with_d"]
    for r in rows:
        out.append(",".join([
            r.label, repr(r.margin_without_d), repr(r.margin_with_d),
            r.without_d.stop_reason, r.with_d.stop_reason,
            repr(float(r.without_d.norms[-1])), repr(float(r.with_d.norms[-1])),
        ]))
    text = "\n".join(out) + "\n"
    _write(cfg.out / "sweep.csv", text)
    print(text, end="")
    return EXIT_OK


def bode_table(g: TransferFunction, omegas) -> str:
    h = freq_response(g, omegas)
    mag = 20 * np.log10(np.abs(h))
    phase = np.degrees(np.unwrap(np.angle(h)))
    lines = ["omega_rad_s,mag_db,phase_deg"]
    lines += [f"{float(w)!r},{float(m)!r},{float(p)!r}" for w, m, p in zip(omegas, mag, phase)]
    return "\n".join(lines) + "\n"


def cmd_bode(cfg: PipelineConfig) -> int:
    """Write Bode magnitude and phase CSVs for the plant and controller."""
    bundle_path = cfg.path("bundle_file", "design.bundle")
    if bundle_path.is_file():
        bundle = _read_bundle(cfg)
        systems = {"P": bundle.P, "C": bundle.C}
    else:
        systems = {"P": _read_tf_file(cfg.path("plant_file", "plant.tf"), "plant")}
        print(f"no bundle at {bundle_path}; writing the plant only", file=sys.stderr)
    for name, g in systems.items():
        w = probe_frequencies(g.Ts, cfg["bode_points"])
        path = cfg.out / f"bode_{name}.csv"
        _write(path, bode_table(g, w))
        print(f"wrote {path}")
    return EXIT_OK


def _absent(title, why):
    return [f"== {title} ==", f"[absent: {why}]", ""]


def build_report(cfg: PipelineConfig) -> str:
    lines = ["youla-ilc pipeline report", ""]
    plant_path = cfg.path("plant_file", "plant.tf")
    if plant_path.is_file():
        lines += [pub.format_comparison(pub.compare("P", read_tf(plant_path))), ""]
        fit = cfg.out / "fit_report.txt"
        if fit.is_file():
            lines += ["fit report:", fit.read_text().rstrip(), ""]
    else:
        lines += _absent("P: identified plant", f"{plant_path} not found")

    bundle_path = cfg.path("bundle_file", "design.bundle")
    if bundle_path.is_file():
        bundle = parse_bundle(bundle_path.read_text())
        lines += ["== design validation ==", bundle.validation.to_text().rstrip(), ""]
        for name in ("Q", "C", "L"):
            lines += [pub.format_comparison(pub.compare(name, getattr(bundle, name))), ""]
        # the printed controller is a reduced form; cancel near pole-zero pairs
        reduced = minreal(bundle.C, pub.COEFF_RTOL)
        cmp = pub.compare("C", reduced)
        lines += [pub.format_comparison(replace(cmp, name="C reduced (cancellation tol 0.15)")), ""]
    else:
        lines += _absent("Q, C, L: synthesized design", f"{bundle_path} not found")

    summary = cfg.out / "campaign" / "summary.txt"
    if summary.is_file():
        lines += ["== campaign ==", summary.read_text().rstrip(), ""]
    else:
        lines += _absent("campaign", f"{summary} not found")
    return "\n".join(lines)


def cmd_report(cfg: PipelineConfig) -> int:
    """Compare computed and published transfer functions and summarize campaigns."""
    text = build_report(cfg)
    _write(cfg.out / "report.txt", text)
    print(text, end="")
    return EXIT_OK


def cmd_keys(cfg: PipelineConfig) -> int:
    """List every config key with its default value."""
    for k, (default, _, doc) in KEYS.items():
        print(f"{k} = {default}    # {doc}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "identify": cmd_identify,
    "design": cmd_design,
    "campaign": cmd_campaign,
    "sweep": cmd_sweep,
    "bode": cmd_bode,
    "report": cmd_report,
    "keys": cmd_keys,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="youla-ilc",
        description="Plant identification, Youla controller/learning-filter design and ILC campaigns.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0])
        p.add_argument("-c", "--config", help="flat key = value config file")
        p.add_argument("-o", "--out", help="output directory (overrides 'out')")
        p.add_argument("--seed", type=int, help="overrides 'seed'")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key; repeatable")
        if name == "design":
            p.add_argument("--force", action="store_true",
                           help="write the bundle even if validation fails (exit code stays 4)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    for item in args.set:
        if "=" not in item:
            print(f"error: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return EXIT_DATA
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if args.out is not None:
        overrides["out"] = args.out
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "design":
            return cmd_design(cfg, args.force)
        return COMMANDS[args.command](cfg)
    except (DataError, FileNotFoundError, configparser.Error) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except IdentificationError as exc:
        print(f"identification error: {exc}", file=sys.stderr)
        return EXIT_IDENT
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
