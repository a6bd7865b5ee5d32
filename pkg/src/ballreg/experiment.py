"""Deconvolution and inpainting experiment on the ball, end to end.

Pipeline: simulate a smooth random field (plus an injected compact blob),
blur it with a harmonic kernel, mask half the voxels, add Gaussian noise,
then compare the naive inverse with the sparsity-regularized MAP estimate
and run the uncertainty tests on the result.
"""

from __future__ import annotations

import dataclasses
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .ball import BallBandProfile, BallSamples, ball_forward, ball_inverse, ball_plan
from .harmonics import sphere_grid
from .io import write_ballfile
from .operators import (NOISE_STREAM, TRUTH_STREAM, make_kernel, make_mask, make_sensing,
                        naive_inverse, rng_from_seed)
from .solver import (Objective, initial_point, objective_value, solve_map, update_lambda,
                     write_trace_csv)
from .uncertainty import (Region, format_report, hpd_threshold, hypothesis_test,
                          local_credible_intervals, write_lci_csv)
from .wavelets import build_tiling

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "OUTPUT_ENV",
    "simulate_ground_truth",
    "smoothing_multiplier",
    "inject_blob",
    "add_noise",
    "snr_db",
    "experiment_regions",
    "degrade",
    "make_objective",
    "solve",
    "run_experiment",
    "bench",
    "fit_exponent",
    "shell_slice_rows",
]

# output directory override
OUTPUT_ENV = "BALLREG_OUTPUT_DIR"


@dataclass
class ExperimentConfig:
    L: int = 16
    P: int = 16
    tau: float = 1.0
    seed: int = 1
    mask_fraction: float = 0.5
    snr_db_in: float = 30.0
    alpha: float = 0.01
    lam: float | None = None
    auto_lambda: bool = True
    max_iter: int = 500
    tol: float = 1e-7
    accelerated: bool = True
    sigma_ell: float | None = None
    sigma_p: float | None = None
    skew: float = 0.5
    N: int = 1
    lam_ang: float = 2.0
    lam_rad: float = 2.0
    J0_ang: int = 1
    J0_rad: int = 0
    include_scaling: bool = True
    data_metric: str = "euclidean"
    blob_amplitude: float = 0.0
    blob_width: float = 0.35
    blob_node: tuple = (1, 4, 3)
    lci_alphas: tuple = (0.32, 0.05, 0.01)
    slice_nodes: tuple = (0, 1, 2)
    output_dir: str | None = None

    def __post_init__(self):
        if self.L < 2 or self.P < 1:
            raise ValueError("need L >= 2 and P >= 1")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 0 < self.mask_fraction <= 1:
            raise ValueError("mask_fraction must lie in (0, 1]")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.lam is None and not self.auto_lambda:
            raise ValueError("a fixed lambda is required when auto_lambda is off")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.max_iter < 1 or not self.tol > 0:
            raise ValueError("max_iter must be >= 1 and tol > 0")
        self.blob_node = tuple(int(v) for v in self.blob_node)
        self.lci_alphas = tuple(float(v) for v in self.lci_alphas)
        self.slice_nodes = tuple(int(v) for v in self.slice_nodes)

    @property
    def profile(self):
        return BallBandProfile(self.L, self.P, 0, self.tau)

    def to_text(self):
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(e) for e in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name}={'none' if v is None else v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, **overrides):
        vals = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line: {raw!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            vals[k] = v
        vals.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(vals)

    @classmethod
    def from_mapping(cls, vals):
        kinds = {f.name: f for f in dataclasses.fields(cls)}
        out = {}
        for k, v in vals.items():
            if k not in kinds:
                raise ValueError(f"unknown config key {k!r}")
            out[k] = _coerce(kinds[k], v)
        return cls(**out)


def _coerce(f, v):
    if not isinstance(v, str):
        return v
    s = v.strip()
    if s.lower() == "none":
        return None
    name = f.name
    if name in ("blob_node", "slice_nodes", "lci_alphas"):
        s = s.strip("()[] ")
    if name in ("blob_node", "slice_nodes"):
        return tuple(int(e) for e in s.split(",") if e.strip())
    if name == "lci_alphas":
        return tuple(float(e) for e in s.split(",") if e.strip())
    typ = str(f.type)
    if typ.startswith("bool"):
        if s.lower() in ("1", "true", "yes", "on"):
            return True
        if s.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"bad boolean for {name}: {v!r}")
    if typ.startswith("int"):
        return int(s)
    if typ.startswith("float"):
        return float(s)
    return s


# ---------------------------------------------------------------- simulation

def smoothing_multiplier(profile):
    """``exp(-l(l+1)/(2 (L/3)^2)) exp(-p^2/(2 (P/3)^2))`` laid out ``(P, L*L)``."""
    L, P = profile.L, profile.P
    ell = np.repeat(np.arange(L), 2 * np.arange(L) + 1)
    p = np.arange(P)[:, None]
    return np.exp(-ell * (ell + 1) / (2 * (L / 3) ** 2)) * np.exp(-(p**2) / (2 * (P / 3) ** 2))


def _random_real_coeffs(profile, rng):
    # standard complex Gaussian with f_{l,-m} = (-1)^m conj(f_lm)
    L, P = profile.L, profile.P
    c = np.zeros(profile.coeff_shape, dtype=complex)
    for ell in range(L):
        c[:, ell * ell + ell] = rng.standard_normal(P)
        for m in range(1, ell + 1):
            v = (rng.standard_normal(P) + 1j * rng.standard_normal(P)) / np.sqrt(2)
            c[:, ell * ell + ell + m] = v
            c[:, ell * ell + ell - m] = (-1) ** m * np.conj(v)
    return c


def simulate_ground_truth(cfg):
    """Smoothed random real field on the ball, scaled to unit max amplitude."""
    prof = cfg.profile
    c = _random_real_coeffs(prof, rng_from_seed(cfg.seed, TRUTH_STREAM)) * smoothing_multiplier(prof)
    x = ball_inverse(c, prof, reality=True).values
    return BallSamples(prof, x / np.max(np.abs(x)), reality=True)


def _voxel_xyz(profile):
    plan = ball_plan(profile)
    g = sphere_grid(profile.L)
    r = plan.radial.nodes[:, None, None]
    th = g.thetas[None, :, None]
    ph = g.phis[None, None, :]
    return (r * np.sin(th) * np.cos(ph), r * np.sin(th) * np.sin(ph), r * np.cos(th) + 0 * ph)


def inject_blob(profile, node, width, amplitude=1.0):
    """Band-limited Gaussian blob centred on voxel ``node = (p, theta, phi)``.

    Returns ``(blob_samples, region_mask)``; the region holds voxels at or
    above half the blob's peak.
    """
    X, Y, Z = _voxel_xyz(profile)
    c = tuple(a[node] for a in (X, Y, Z))
    d2 = (X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2
    raw = np.exp(-d2 / (2 * width**2))
    blob = ball_inverse(ball_forward(raw, profile).values, profile, reality=True).values
    blob /= blob[node]
    return amplitude * blob, blob >= 0.5


def experiment_regions(profile, blob_mask):
    """Blob region and a matched-size region at the antipodal longitude."""
    nphi = profile.sample_shape[2]
    shifted = np.roll(blob_mask, nphi // 2, axis=2)
    return (Region.from_mask(blob_mask, "blob"), Region.from_mask(shifted, "background"))


def add_noise(clean, keep, snr_db, seed):
    """Add i.i.d. Gaussian noise on kept entries at input SNR ``snr_db``.

    ``sigma = ||clean_kept|| 10^(-snr/20) / sqrt(M)``.  ``snr_db = inf``
    returns the clean data with ``sigma = 1``.
    """
    keep = np.asarray(keep, dtype=bool)
    m = int(keep.sum())
    if m == 0:
        raise ValueError("keep-set is empty")
    clean = np.where(keep, clean, 0)
    if math.isinf(snr_db) and snr_db > 0:
        return clean.copy(), 1.0
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite or +inf")
    sigma = float(np.linalg.norm(clean[keep]) * 10 ** (-snr_db / 20) / np.sqrt(m))
    rng = rng_from_seed(seed, NOISE_STREAM)
    noise = rng.standard_normal(clean.shape)
    if np.iscomplexobj(clean) and np.any(clean.imag != 0):
        noise = (noise + 1j * rng.standard_normal(clean.shape)) / np.sqrt(2)
    return np.where(keep, clean + sigma * noise, 0), sigma


def snr_db(reference, estimate, valid=None):
    """``20 log10(||a|| / ||a - b||)`` over valid entries; ``inf`` if equal."""
    a = np.asarray(reference)
    b = np.asarray(estimate)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if valid is not None:
        a, b = a[valid], b[valid]
    err = np.linalg.norm(a - b)
    if err == 0:
        return math.inf
    return float(20 * np.log10(np.linalg.norm(a) / err))


# ---------------------------------------------------------------- pipeline

@dataclass
class Degraded:
    truth: np.ndarray
    y: np.ndarray
    sigma: float
    kernel: object
    mask: object
    sensing: object
    blob: np.ndarray
    blob_mask: np.ndarray


def degrade(cfg, truth=None):
    """Simulate (unless given) and measure: ``y = M B^-1 K B x + n``."""
    prof = cfg.profile
    if truth is None:
        smooth = simulate_ground_truth(cfg).values
        blob, blob_mask = inject_blob(prof, cfg.blob_node, cfg.blob_width, cfg.blob_amplitude)
        truth = smooth + blob
    else:
        truth = truth.values if isinstance(truth, BallSamples) else np.asarray(truth)
        blob, blob_mask = np.zeros(prof.sample_shape), np.zeros(prof.sample_shape, bool)
    kernel = make_kernel(prof, cfg.sigma_ell, cfg.sigma_p, cfg.skew)
    mask = make_mask(prof, cfg.mask_fraction, cfg.seed)
    Phi = make_sensing(prof, kernel, mask, cfg.data_metric)
    clean = Phi.apply(truth).real
    y, sigma = add_noise(clean, mask.keep, cfg.snr_db_in, cfg.seed)
    return Degraded(truth, y, sigma, kernel, mask, Phi, blob, blob_mask)


@dataclass
class ExperimentReport:
    values: dict = field(default_factory=dict)
    truth: np.ndarray = None
    x_dir: np.ndarray = None
    x_map: np.ndarray = None
    solve: object = None
    tests: list = field(default_factory=list)
    lci: dict = field(default_factory=dict)
    regions: tuple = ()

    def __getitem__(self, k):
        return self.values[k]

    def text(self):
        return format_report(self.values)


def make_objective(cfg, deg, lam=None):
    tiling = build_tiling(cfg.profile, cfg.N, cfg.lam_ang, cfg.lam_rad, cfg.J0_ang, cfg.J0_rad)
    obj = Objective(deg.sensing, deg.y, deg.mask.keep, deg.sigma, 1.0 if lam is None else lam,
                    tiling, cfg.include_scaling, real=True)
    return obj


def solve(cfg, deg):
    """MAP estimate for degraded data; returns ``(objective, SolveReport)``."""
    obj = make_objective(cfg, deg, cfg.lam)
    if cfg.lam is None:
        obj.lam = update_lambda(initial_point(obj).real, obj.tiling, include_scaling=cfg.include_scaling)
    rep = solve_map(obj, auto_lambda=cfg.auto_lambda, max_iter=cfg.max_iter, tol=cfg.tol,
                    accelerated=cfg.accelerated)
    return obj, rep


def run_experiment(cfg, write=True):
    """Run the full pipeline and (optionally) write artifacts.

    Artifacts go to ``cfg.output_dir``, else ``$BALLREG_OUTPUT_DIR``; nothing
    is written when neither is set or ``write`` is false.
    """
    t0 = time.perf_counter()
    prof = cfg.profile
    deg = degrade(cfg)
    x_dir = naive_inverse(deg.y, prof, deg.kernel, deg.mask).real
    obj, rep = solve(cfg, deg)
    x_map = rep.x_map.values.real

    h_map = objective_value(x_map, obj)
    thr = hpd_threshold(h_map, x_map.size, cfg.alpha)
    regions = experiment_regions(prof, deg.blob_mask) if deg.blob_mask.any() else ()
    tests = [hypothesis_test(x_map, r, obj, cfg.alpha, h_map=h_map) for r in regions]
    lci = {a: local_credible_intervals(x_map, list(regions), obj, a, h_map=h_map) for a in cfg.lci_alphas} \
        if regions else {}
    wall = time.perf_counter() - t0

    vals = {
        "L": cfg.L, "P": cfg.P, "seed": cfg.seed,
        "snr_in_db": snr_db(deg.sensing.apply(deg.truth).real[deg.mask.keep], deg.y[deg.mask.keep]),
        "snr_dir_db": snr_db(deg.truth, x_dir),
        "snr_map_db": snr_db(deg.truth, x_map),
        "sigma": deg.sigma,
        "lambda": rep.lambda_final,
        "iterations": rep.iterations,
        "converged": rep.converged,
        "h_map": h_map,
        "alpha": cfg.alpha,
        "epsilon_prime": thr.epsilon_prime,
    }
    for t in tests:
        vals[f"test_{t.region}"] = t.outcome
        vals[f"margin_{t.region}"] = t.margin
    for a, ivs in lci.items():
        for r, (lo, hi) in zip(regions, ivs):
            vals[f"lci_{r.label}_{a}"] = f"{lo!r},{hi!r}"
    vals["wall_time_s"] = wall
    report = ExperimentReport(vals, deg.truth, x_dir, x_map, rep, tests, lci, regions)

    out = cfg.output_dir or os.environ.get(OUTPUT_ENV)
    if write and out:
        _write_artifacts(out, cfg, deg, report)
    return report


def shell_slice_rows(x, profile, node):
    """``(theta, phi, value)`` rows for radial node ``node``."""
    g = sphere_grid(profile.L)
    rows = []
    for i, th in enumerate(g.thetas):
        for j, ph in enumerate(g.phis):
            rows.append((float(th), float(ph), float(np.real(x[node, i, j]))))
    return rows


def _write_artifacts(out, cfg, deg, report):
    os.makedirs(out, exist_ok=True)
    prof = cfg.profile
    with open(os.path.join(out, "config.txt"), "w") as fh:
        fh.write(cfg.to_text())
    write_ballfile(BallSamples(prof, deg.truth, reality=True), os.path.join(out, "truth.blc"))
    write_ballfile(BallSamples(prof, deg.y, reality=True), os.path.join(out, "observed.blc"))
    write_ballfile(deg.mask, os.path.join(out, "mask.blc"), profile=prof)
    write_ballfile(BallSamples(prof, report.x_dir, reality=True), os.path.join(out, "x_dir.blc"))
    write_ballfile(BallSamples(prof, report.x_map, reality=True), os.path.join(out, "x_map.blc"))
    write_trace_csv(report.solve, os.path.join(out, "trace.csv"))
    for node in cfg.slice_nodes:
        if 0 <= node < prof.P:
            for name, arr in (("truth", deg.truth), ("dir", report.x_dir), ("map", report.x_map)):
                path = os.path.join(out, f"slice_{name}_r{node}.csv")
                with open(path, "w") as fh:
                    fh.write("theta,phi,value\n")
                    for th, ph, v in shell_slice_rows(arr, prof, node):
                        fh.write(f"{th!r},{ph!r},{v!r}\n")
    for a, ivs in report.lci.items():
        write_lci_csv(report.regions, ivs, os.path.join(out, f"lci_alpha{a}.csv"))
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write(report.text())


# ---------------------------------------------------------------- benchmark

def fit_exponent(Ls, times):
    """Least-squares slope of ``log t`` against ``log L``."""
    return float(np.polyfit(np.log(Ls), np.log(times), 1)[0])


def bench(Ls=(8, 16, 32), runs=5, method="direct", seed=0):
    """Median wall time of a ball synthesis + analysis round trip per ``L``.

    Returns ``(medians, exponent)``.
    """
    rng = rng_from_seed(seed)
    meds = []
    for L in Ls:
        prof = BallBandProfile(L, L)
        c = rng.standard_normal(prof.coeff_shape) + 1j * rng.standard_normal(prof.coeff_shape)
        ball_forward(ball_inverse(c, prof, method=method), method=method)  # warm caches
        ts = []
        for _ in range(runs):
            t = time.perf_counter()
            ball_forward(ball_inverse(c, prof, method=method), method=method)
            ts.append(time.perf_counter() - t)
        meds.append(float(np.median(ts)))
    return meds, fit_exponent(Ls, meds)
