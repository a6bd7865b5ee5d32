"""Acceptance gate: one test per numbered criterion, summarized at the end of the run."""

import math
import struct
import time

import numpy as np
import pytest

from ballreg.ball import (BallBandProfile, BallCoeffs, BallSamples, ball_forward, ball_inverse,
                          ball_inverse_adjoint, ball_plan)
from ballreg.experiment import (ExperimentConfig, bench, experiment_regions, run_experiment,
                                simulate_ground_truth, snr_db)
from ballreg.harmonics import sht_forward, sht_inverse, wigner_forward, wigner_inverse
from ballreg.io import (BadMagicError, EndiannessError, HeaderError, KindError, SizeMismatchError,
                        read_ballfile, write_ballfile)
from ballreg.operators import (dense_matrix, identity_op, make_kernel, make_mask, make_sensing,
                               power_method, sample_space, validate_adjoint)
from ballreg.radial import build_radial_plan, radial_forward, radial_inverse
from ballreg.solver import (Objective, data_fidelity, data_gradient, forward_backward,
                            objective_value, prox_analysis_l1)
from ballreg.uncertainty import Region, hpd_threshold, hypothesis_test, local_credible_intervals
from ballreg.wavelets import build_tiling, identity_residual, wavelet_analysis, wavelet_synthesis

from conftest import random_coeffs
from test_harmonics import random_flmn
from test_operators import all_ops

criterion = pytest.mark.criterion


def _max_rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


@criterion(1, "radial orthonormality and round trip")
def test_criterion_01(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for P in (1, 4, 8, 16, 64):
        for tau in (0.5, 1.0, 4.0):
            plan = build_radial_plan(P, tau)
            worst = max(worst, np.max(np.abs(plan.gram - np.eye(P))))
            c = rng.standard_normal(P) + 1j * rng.standard_normal(P)
            back = radial_forward(radial_inverse(c, plan), plan)
            back = getattr(back, "values", back)
            worst = max(worst, np.max(np.abs(back - c)) / np.max(np.abs(c)))
    dt = time.perf_counter() - t0
    record_property("max_err", f"{worst:.1e}")
    record_property("time_s", f"{dt:.2f}")
    assert worst < 1e-12 and dt < 5


@criterion(2, "SHT and Wigner round trips")
def test_criterion_02(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for L in (4, 8, 16, 32):
        for s in (0, 1, -1, 2, -2):
            c = random_coeffs(rng, L * L)
            c[: s * s] = 0
            back = sht_forward(sht_inverse(c, L, s), L, s)
            worst = max(worst, np.max(np.abs(back - c)) / np.max(np.abs(c)))
        for N in (1, 3):
            F = random_flmn(rng, L, N)
            back = wigner_forward(wigner_inverse(F, L, N), L, N)
            worst = max(worst, np.max(np.abs(back - F)) / np.max(np.abs(F)))
    dt = time.perf_counter() - t0
    record_property("max_err", f"{worst:.1e}")
    record_property("time_s", f"{dt:.2f}")
    assert worst < 1e-11 and dt < 30


@criterion(3, "ball Plancherel, round trip, adjoint is not the forward transform")
def test_criterion_03(record_property):
    prof = BallBandProfile(16, 16)
    rng = np.random.default_rng(3)
    c = random_coeffs(rng, prof.coeff_shape)
    f = ball_inverse(c, prof)
    rt = _max_rel(ball_forward(f).values, c)
    vw = ball_plan(prof).voxel_weights
    planch = abs(np.sum(vw * np.abs(f.values) ** 2) - np.sum(np.abs(c) ** 2)) / np.sum(np.abs(c) ** 2)
    x = rng.standard_normal(prof.sample_shape)  # off the band-limited range
    fwd = ball_forward(x, prof).values
    gap = _max_rel(ball_inverse_adjoint(x, prof, "euclidean").values, fwd)
    record_property("round_trip", f"{rt:.1e}")
    record_property("plancherel", f"{planch:.1e}")
    record_property("adjoint_gap", f"{gap:.2e}")
    assert rt < 1e-10 and planch < 1e-10 and gap > 1e-3


@criterion(4, "wavelet admissibility, exact synthesis, Parseval energy")
def test_criterion_04(record_property):
    rng = np.random.default_rng(4)
    configs = [(BallBandProfile(8, 8), {}), (BallBandProfile(16, 16), dict(N=3)),
               (BallBandProfile(12, 9), dict(N=2, lam_ang=1.5, lam_rad=3.0)),
               (BallBandProfile(20, 6), dict(N=4, lam_ang=2.5, J0_ang=2, J0_rad=1))]
    ident = synth = energy = 0.0
    for prof, kw in configs:
        t = build_tiling(prof, **kw)
        ident = max(ident, identity_residual(t))
        c = random_coeffs(rng, prof.coeff_shape)
        w = wavelet_analysis(c, t)
        synth = max(synth, _max_rel(wavelet_synthesis(w, t).values, c))
        energy = max(energy, abs(w.energy() - np.sum(np.abs(c) ** 2)) / np.sum(np.abs(c) ** 2))
    record_property("identity", f"{ident:.1e}")
    record_property("synthesis", f"{synth:.1e}")
    record_property("energy", f"{energy:.1e}")
    assert ident < 1e-12 and synth < 1e-10 and energy < 1e-10


@criterion(5, "adjoint dot tests on every operator")
def test_criterion_05(record_property):
    ops = all_ops(BallBandProfile(8, 6))
    errs = {f"{i}:{op.label}": validate_adjoint(op, n_pairs=20, rtol=1e-10, seed=5) for i, op in enumerate(ops)}
    record_property("operators", len(errs))
    record_property("max_rel", f"{max(errs.values()):.1e}")
    assert max(errs.values()) < 1e-10


@criterion(6, "power method against dense singular values")
def test_criterion_06(record_property):
    prof = BallBandProfile(4, 4)
    worst = 0.0
    for metric in ("quadrature", "euclidean"):
        Phi = make_sensing(prof, make_kernel(prof, skew=0.2), make_mask(prof, 0.6, 9), metric)
        smax = np.linalg.svd(dense_matrix(Phi), compute_uv=False)[0]
        worst = max(worst, abs(power_method(Phi, tol=1e-12) - smax) / smax)
    record_property("rel_err", f"{worst:.1e}")
    assert worst < 1e-6


@criterion(7, "solver gradient, monotonicity, near-noiseless recovery, prox properties")
def test_criterion_07(record_property):
    prof = BallBandProfile(8, 8)
    tiling = build_tiling(prof, J0_ang=1)
    vw = ball_plan(prof).voxel_weights
    rng = np.random.default_rng(7)

    # gradient against central differences along orthonormal voxel coordinates
    k = make_kernel(prof)
    m = make_mask(prof, 0.5, 2)
    Phi = make_sensing(prof, k, m, "euclidean")
    obj = Objective(Phi, rng.standard_normal(prof.sample_shape), m.keep, 1.0, 0.5, tiling, real=True)
    x = rng.standard_normal(prof.sample_shape)
    g = data_gradient(x, obj)
    grad_err = 0.0
    for flat in rng.choice(x.size, 10, replace=False):
        i = np.unravel_index(flat, x.shape)
        h = 1e-6 * Phi.in_space.norm(x) / np.sqrt(vw[i])
        e = np.zeros_like(x)
        e[i] = h
        fd = (data_fidelity(x + e, obj) - data_fidelity(x - e, obj)) / (2 * h)
        exact = vw[i] * g[i].real
        grad_err = max(grad_err, abs(fd - exact) / abs(exact))

    # monotone objective trace
    obj.sigma = 0.1
    tr = forward_backward(obj, max_iter=200, tol=1e-10, accelerated=True).objective_trace
    monotone = bool(np.all(np.diff(tr) <= 1e-12 * np.abs(tr[:-1])))

    # near-noiseless recovery with a well-posed kernel and 75% coverage
    truth = simulate_ground_truth(ExperimentConfig(L=8, P=8, seed=3)).values
    m75 = make_mask(prof, 0.75, 1)
    Phi2 = make_sensing(prof, make_kernel(prof, 4.0, 4.0), m75, "euclidean")
    obj2 = Objective(Phi2, Phi2.apply(truth).real, m75.keep, 1.0, 1e-8, tiling, real=True)
    snr = snr_db(truth, forward_backward(obj2, max_iter=2000, tol=1e-15, accelerated=True).x_map.values)

    # prox: optimal against perturbations and firmly nonexpansive
    def pobj(u, z, gl):
        return 0.5 * np.sum(vw * np.abs(u - z) ** 2) + gl * wavelet_analysis(ball_forward(u, prof), tiling).l1()

    prox_ok = True
    for gl in (1e-3, 0.05, 10.0):
        z = rng.standard_normal(prof.sample_shape)
        u = prox_analysis_l1(z, gl, tiling)
        best = pobj(u, z, gl)
        for scale in (1e-2, 1e-4, 1e-6):
            for _ in range(10):
                d = rng.standard_normal(prof.sample_shape) * scale
                prox_ok &= pobj(u + d, z, gl) >= best - 1e-12 * abs(best)
        a, b = rng.standard_normal((2,) + prof.sample_shape)
        pa, pb = prox_analysis_l1(a, gl, tiling), prox_analysis_l1(b, gl, tiling)
        dd = np.sum(vw * np.abs(pa - pb) ** 2)
        prox_ok &= dd <= np.sum(vw * (pa - pb) * (a - b)) + 1e-12

    record_property("grad_rel", f"{grad_err:.1e}")
    record_property("monotone", monotone)
    record_property("snr_db", f"{snr:.1f}")
    record_property("prox", bool(prox_ok))
    assert grad_err < 1e-5 and monotone and snr > 40 and prox_ok


@criterion(8, "HPD threshold arithmetic")
def test_criterion_08(record_property):
    eps = hpd_threshold(100, 1000, 0.01).epsilon_prime
    record_property("epsilon_prime", f"{eps:.4f}")
    assert abs(eps - 1402.0935) <= 1e-3


@criterion(9, "experiment: MAP beats the naive inverse on 10 seeds")
def test_criterion_09(record_property):
    dir_, map_, walls = [], [], []
    for seed in range(1, 11):
        cfg = ExperimentConfig(seed=seed)
        assert (cfg.L, cfg.P, cfg.mask_fraction, cfg.snr_db_in) == (16, 16, 0.5, 30.0)
        rep = run_experiment(cfg, write=False)
        dir_.append(rep["snr_dir_db"])
        map_.append(rep["snr_map_db"])
        walls.append(rep["wall_time_s"])
    gain = np.subtract(map_, dir_)
    record_property("min_gain_db", f"{gain.min():.2f}")
    record_property("median_map_db", f"{np.median(map_):.2f}")
    record_property("max_wall_s", f"{max(walls):.1f}")
    assert gain.min() >= 6 and np.median(map_) >= 8 and max(walls) < 120


@criterion(10, "uncertainty: blob significant, background indeterminate, intervals")
def test_criterion_10(record_property, blob_solution):
    cfg, deg, obj, rep = blob_solution
    x = rep.x_map.values.real
    h = objective_value(x, obj)
    blob_r, bg_r = experiment_regions(cfg.profile, deg.blob_mask)
    tb = hypothesis_test(x, blob_r, obj, 0.01, h_map=h)
    tg = hypothesis_test(x, bg_r, obj, 0.01, h_map=h)

    widths = []
    for a in (0.32, 0.05, 0.01):
        lo, hi = local_credible_intervals(x, [blob_r], obj, a, h_map=h)[0]
        widths.append(hi - lo)
    monotone = widths[0] <= widths[1] <= widths[2]

    # single voxel, identity data operator, no prior: closed form
    prof = BallBandProfile(8, 8)
    y = np.random.default_rng(10).standard_normal(prof.sample_shape)
    sigma, tol = 0.3, 1e-8
    oobj = Objective(identity_op(sample_space(prof)), y, np.ones(prof.sample_shape, bool), sigma, 0.0,
                     build_tiling(prof), real=True)
    w = ball_plan(prof).voxel_weights
    eps = hpd_threshold(0.0, y.size, 0.05).epsilon_prime
    oracle_err = 0.0
    for flat in (0, 200, 511):
        lo, hi = local_credible_intervals(y, [Region(np.array([flat]))], oobj, 0.05, tol=tol)[0]
        xi = math.sqrt(2 * sigma**2 * eps / w.ravel()[flat])
        oracle_err = max(oracle_err, abs(hi - y.ravel()[flat] - xi) / xi, abs(y.ravel()[flat] - lo - xi) / xi)

    record_property("blob", f"{tb.outcome} (margin {tb.margin:.1f})")
    record_property("background", f"{tg.outcome} (margin {tg.margin:.1f})")
    record_property("widths", ",".join(f"{v:.3f}" for v in widths))
    record_property("oracle_rel", f"{oracle_err:.1e}")
    assert tb.outcome == "significant" and tg.outcome == "indeterminate"
    assert monotone and oracle_err <= tol


@criterion(11, "transform cost exponent")
def test_criterion_11(record_property):
    meds, k = bench((8, 16, 32), runs=5, method="direct")
    record_property("exponent", f"{k:.2f}")
    record_property("medians_s", ",".join(f"{t:.2e}" for t in meds))
    assert 3.2 <= k <= 4.8


@criterion(12, "BallFile round trips, corrupt headers, determinism")
def test_criterion_12(record_property, tmp_path):
    prof = BallBandProfile(8, 8, tau=2.0)
    rng = np.random.default_rng(12)
    ok = True
    c = random_coeffs(rng, prof.coeff_shape)
    for obj, kind in ((BallCoeffs(prof, c), "coeffs"),
                      (BallSamples(prof, rng.standard_normal(prof.sample_shape), reality=True), "samples")):
        write_ballfile(obj, tmp_path / f"{kind}.blc")
        back = read_ballfile(tmp_path / f"{kind}.blc", expect=kind)
        ok &= back.values.tobytes() == np.asarray(obj.values).tobytes() and back.profile == prof
    m = make_mask(prof, 0.5, 4)
    write_ballfile(m, tmp_path / "mask.blc", profile=prof)
    ok &= bool(np.array_equal(read_ballfile(tmp_path / "mask.blc").keep, m.keep))

    good = (tmp_path / "samples.blc").read_bytes()
    cases = [(b"XXXX" + good[4:], BadMagicError), (good[:4] + struct.pack(">I", 0x01020304) + good[8:],
              EndiannessError), (good[:-16], SizeMismatchError), (good[:20] + b"\x07" + good[21:], HeaderError)]
    caught = 0
    for i, (raw, err) in enumerate(cases):
        p = tmp_path / f"bad{i}.blc"
        p.write_bytes(raw)
        try:
            read_ballfile(p)
        except err:
            caught += 1
    try:
        read_ballfile(tmp_path / "samples.blc", expect="coeffs")
    except KindError:
        caught += 1

    a = run_experiment(ExperimentConfig(seed=2), write=False)
    b = run_experiment(ExperimentConfig(seed=2), write=False)
    det = max(abs(a[k] - b[k]) for k in a.values if isinstance(a[k], float) and k != "wall_time_s")
    same_map = np.array_equal(a.x_map, b.x_map)
    record_property("round_trips", bool(ok))
    record_property("errors_caught", f"{caught}/5")
    record_property("max_report_diff", f"{det:.1e}")
    assert ok and caught == 5 and det <= 1e-12 and same_map
