"""Monte-Carlo experiment runner with CSV output.

Drives the estimators over SNR and impairment-scaling sweeps, matches the
recovered paths to the ground truth, aggregates RMSE figures alongside the
corresponding square-root CRLBs, and writes one schema-stable CSV per run.
"""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.optimize
from joblib import Parallel, delayed

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .crlb import crlb_for_scene
from .estimators import (
    DegenerateProfileError,
    InitializationError,
    TalsConfig,
    krf_estimate,
    ls_estimate,
    tals_run,
)
from .hardware import HardwareProfile, IqImbalance, PaModel, build_pilot_matrix
from .scene import (
    ArrayGeometry,
    PathSet,
    Scene,
    make_scene,
    random_pilots,
    synthesize_tensor,
)
from .tensor_core import SolverError

CSV_HEADER = [
    "method",
    "sweep_axis",
    "sweep_value",
    "rmse_theta_deg",
    "rmse_z",
    "crlb_sqrt_theta_deg",
    "crlb_sqrt_z",
    "mean_iters",
    "fail_rate",
    "trials",
    "seed",
]

_ESTIMATORS = {"TALS": tals_run, "KRF": krf_estimate, "LS": ls_estimate}
_TRIAL_ERRORS = (InitializationError, DegenerateProfileError, SolverError)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a sweep needs: scenario constants plus run controls."""

    doas_deg: tuple[tuple[float, ...], ...]
    amplitude_imbalance: tuple[float, ...]
    phase_imbalance_deg: tuple[float, ...]
    pa_rows: tuple[tuple[float, ...], ...]
    n_antennas: int = 8
    spacing_factor: float = 0.5
    blocks: int = 10
    snapshots: int = 64
    pilot_kind: str = "16qam"
    noise_var: float = 1.0
    snr_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    amplitude_scales: tuple[float, ...] = (0.5, 1.0, 2.0, 3.0, 4.0, 5.0)
    phase_scales: tuple[float, ...] = (0.5, 1.0, 2.0, 3.0, 4.0, 5.0)
    imbalance_snr_db: float = 20.0
    convergence_snr_db: tuple[float, ...] = (20.0,)
    trials: int = 200
    methods: tuple[str, ...] = ("TALS", "KRF", "LS")
    crlb: bool = True
    seed: int = 0
    jobs: int = 1
    tals: TalsConfig = field(default_factory=TalsConfig)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.methods:
            raise ValueError("need at least one method")
        unknown = set(self.methods) - set(_ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        if not self.snr_db:
            raise ValueError("sweep must be non-empty")
        n = len(self.doas_deg)
        if not (len(self.amplitude_imbalance) == len(self.phase_imbalance_deg)
                == len(self.pa_rows) == n):
            raise ValueError("per-device parameter lists disagree on K")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
        scene = raw.get("scene", {})
        sweep = raw.get("sweep", {})
        run = raw.get("run", {})
        est = raw.get("estimator", {})

        def tup(x):
            return tuple(tuple(v) if isinstance(v, list) else v for v in x)

        kwargs = {}
        for key in ("doas_deg", "pa_rows"):
            if key in scene:
                kwargs[key] = tup(scene[key])
        for key in ("amplitude_imbalance", "phase_imbalance_deg"):
            if key in scene:
                kwargs[key] = tuple(scene[key])
        for key in ("n_antennas", "spacing_factor", "blocks", "snapshots",
                    "pilot_kind", "noise_var"):
            if key in scene:
                kwargs[key] = scene[key]
        for key in ("snr_db", "amplitude_scales", "phase_scales",
                    "convergence_snr_db"):
            if key in sweep:
                kwargs[key] = tuple(float(v) for v in sweep[key])
        if "imbalance_snr_db" in sweep:
            kwargs["imbalance_snr_db"] = float(sweep["imbalance_snr_db"])
        for key in ("trials", "crlb", "seed", "jobs"):
            if key in run:
                kwargs[key] = run[key]
        if "methods" in run:
            kwargs["methods"] = tuple(run["methods"])
        if est:
            kwargs["tals"] = TalsConfig(**est)
        return cls(**kwargs)

    def profiles(self, amp_scale: float = 1.0, phase_scale: float = 1.0):
        return tuple(
            HardwareProfile(
                iq=IqImbalance.symmetric(
                    eps=amp_scale * e, beta=phase_scale * np.deg2rad(b)
                ),
                pa=PaModel.from_full_row(row),
            )
            for e, b, row in zip(
                self.amplitude_imbalance, self.phase_imbalance_deg, self.pa_rows
            )
        )

    def path_set(self) -> PathSet:
        return PathSet(
            doas=tuple(tuple(np.deg2rad(t) for t in dev) for dev in self.doas_deg)
        )

    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry.ula(self.n_antennas, spacing_factor=self.spacing_factor)


def build_trial_scene(
    config: ExperimentConfig,
    snr_db: float,
    rng: np.random.Generator,
    amp_scale: float = 1.0,
    phase_scale: float = 1.0,
) -> Scene:
    profiles = config.profiles(amp_scale, phase_scale)
    pilots = tuple(
        build_pilot_matrix(
            random_pilots(config.snapshots, config.pilot_kind, rng), p.pa.order
        )
        for p in profiles
    )
    return make_scene(
        config.geometry(), config.path_set(), profiles, pilots, snr_db,
        config.blocks, config.snapshots, rng, noise_var=config.noise_var,
    )


def _quantize(x: float) -> int:
    """Nonnegative integer encoding of a sweep parameter for seeding."""
    return int(round(float(x) * 1e6)) + 2**40


def _trial_rng(
    seed: int, trial: int, snr_db: float, amp_scale: float, phase_scale: float
) -> np.random.Generator:
    """Deterministic per-trial stream keyed on the actual trial parameters,
    so identical conditions reproduce identical scenes across sweep types."""
    key = [seed, trial, _quantize(snr_db), _quantize(amp_scale),
           _quantize(phase_scale)]
    return np.random.default_rng(np.random.SeedSequence(key))


def matched_theta_sq_err(theta_hat: np.ndarray, theta_true: np.ndarray) -> float:
    """Sum of squared angle errors (radians^2) under nearest-angle pairing."""
    cost = np.abs(theta_true[:, None] - theta_hat[None, :])
    rows, cols = scipy.optimize.linear_sum_assignment(cost)
    return float(np.sum(cost[rows, cols] ** 2))


def fingerprint_sq_err(z_hat, scene: Scene) -> float:
    """Sum of squared errors of the gauge-normalized fingerprint entries."""
    z_true, _ = scene.gauge_fixed_truth()
    return float(
        sum(np.sum(np.abs(zh - zt) ** 2) for zh, zt in zip(z_hat, z_true))
    )


def _run_trial(config, snr_db, trial, amp_scale=1.0, phase_scale=1.0):
    rng = _trial_rng(config.seed, trial, snr_db, amp_scale, phase_scale)
    scene = build_trial_scene(config, snr_db, rng, amp_scale, phase_scale)
    tensor = synthesize_tensor(scene, rng)
    theta_true = scene.paths.flat
    out = {}
    for method in config.methods:
        try:
            est = _ESTIMATORS[method](
                tensor, scene.pilots, scene.psi, scene.geometry, config.tals
            )
            if not est.converged:
                raise SolverError("iteration budget exhausted")
            out[method] = (
                matched_theta_sq_err(np.asarray(est.theta), theta_true),
                fingerprint_sq_err(est.z_hat, scene),
                est.n_iters,
            )
        except _TRIAL_ERRORS:
            out[method] = None
    return out


def _crlb_columns(config, snr_db, amp_scale=1.0, phase_scale=1.0):
    """sqrt of the summed bounds, on a dedicated deterministic realization."""
    if not config.crlb or config.noise_var <= 0:
        return "", ""
    rng = _trial_rng(config.seed, 2**31, snr_db, amp_scale, phase_scale)
    scene = build_trial_scene(config, snr_db, rng, amp_scale, phase_scale)
    res = crlb_for_scene(scene)
    sqrt_theta_deg = float(np.rad2deg(np.sqrt(np.sum(res.crlb_theta))))
    sqrt_z = float(np.sqrt(sum(np.sum(z) for z in res.crlb_z)))
    return sqrt_theta_deg, sqrt_z


def _aggregate_rows(config, axis, values, trial_results, crlb_cols):
    rows = []
    for point, value in enumerate(values):
        for method in config.methods:
            per_trial = [trial_results[point][t][method]
                         for t in range(config.trials)]
            ok = [r for r in per_trial if r is not None]
            fails = config.trials - len(ok)
            if ok:
                rmse_theta = np.rad2deg(np.sqrt(np.mean([r[0] for r in ok])))
                rmse_z = np.sqrt(np.mean([r[1] for r in ok]))
                mean_iters = np.mean([r[2] for r in ok])
            else:
                rmse_theta = rmse_z = mean_iters = np.nan
            ct, cz = crlb_cols[point]
            rows.append({
                "method": method,
                "sweep_axis": axis,
                "sweep_value": value,
                "rmse_theta_deg": rmse_theta,
                "rmse_z": rmse_z,
                "crlb_sqrt_theta_deg": ct,
                "crlb_sqrt_z": cz,
                "mean_iters": mean_iters,
                "fail_rate": fails / config.trials,
                "trials": config.trials,
                "seed": config.seed,
            })
    rows.sort(key=lambda r: (r["method"], r["sweep_value"]))
    return rows


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".10g")


def write_csv(rows, out_path) -> None:
    path = Path(out_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([_fmt(row[col]) for col in CSV_HEADER])


def _sweep(config, axis, values, trial_args):
    """Shared driver: trial_args maps a sweep value to _run_trial kwargs."""
    jobs = Parallel(n_jobs=config.jobs)
    tasks = [
        delayed(_run_trial)(config, trial=trial, **trial_args(value))
        for value in values
        for trial in range(config.trials)
    ]
    flat = jobs(tasks)
    trial_results = [
        flat[p * config.trials : (p + 1) * config.trials]
        for p in range(len(values))
    ]
    crlb_cols = [_crlb_columns(config, **trial_args(value)) for value in values]
    return _aggregate_rows(config, axis, values, trial_results, crlb_cols)


def run_sweep(config: ExperimentConfig, out_path=None):
    """RMSE versus SNR for every configured method; returns the result rows."""
    rows = _sweep(config, "snr_db", config.snr_db, lambda v: {"snr_db": v})
    if out_path is not None:
        write_csv(rows, out_path)
    return rows


def run_imbalance_sweep(config: ExperimentConfig, axis: str, out_path=None):
    """RMSE versus impairment scaling at a fixed SNR.

    ``axis`` is ``amplitude`` (scales the gain mismatches) or ``phase``
    (scales the quadrature phase errors)."""
    if axis == "amplitude":
        values, key = config.amplitude_scales, "amp_scale"
    elif axis == "phase":
        values, key = config.phase_scales, "phase_scale"
    else:
        raise ValueError(f"unknown imbalance axis {axis!r}")
    if not values:
        raise ValueError("scale list must be non-empty")
    rows = _sweep(
        config, f"{axis}_scale", values,
        lambda v: {"snr_db": config.imbalance_snr_db, key: v},
    )
    if out_path is not None:
        write_csv(rows, out_path)
    return rows


CONVERGENCE_HEADER = ["snr_db", "trial", "iteration", "loss", "converged", "seed"]


def run_convergence_probe(config: ExperimentConfig, out_path=None):
    """Per-iteration loss traces of the alternating estimator."""
    records = []
    for snr_db in config.convergence_snr_db:
        for trial in range(config.trials):
            rng = _trial_rng(config.seed, trial, snr_db, 1.0, 1.0)
            scene = build_trial_scene(config, snr_db, rng)
            tensor = synthesize_tensor(scene, rng)
            est = tals_run(tensor, scene.pilots, scene.psi, scene.geometry,
                           config.tals)
            for i, loss in enumerate(est.trace):
                records.append({
                    "snr_db": snr_db,
                    "trial": trial,
                    "iteration": i,
                    "loss": loss,
                    "converged": int(est.converged),
                    "seed": config.seed,
                })
    if out_path is not None:
        path = Path(out_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CONVERGENCE_HEADER)
            for rec in records:
                writer.writerow([_fmt(rec[col]) for col in CONVERGENCE_HEADER])
    return records


def run_crlb_only(config: ExperimentConfig, out_path=None):
    """Bound curves alone, one row per SNR point, method column ``CRLB``."""
    cfg = replace(config, crlb=True)
    rows = []
    for snr_db in cfg.snr_db:
        ct, cz = _crlb_columns(cfg, snr_db)
        rows.append({
            "method": "CRLB",
            "sweep_axis": "snr_db",
            "sweep_value": snr_db,
            "rmse_theta_deg": "",
            "rmse_z": "",
            "crlb_sqrt_theta_deg": ct,
            "crlb_sqrt_z": cz,
            "mean_iters": "",
            "fail_rate": "",
            "trials": cfg.trials,
            "seed": cfg.seed,
        })
    if out_path is not None:
        write_csv(rows, out_path)
    return rows
