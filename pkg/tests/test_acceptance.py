"""Acceptance criteria 1-10, one pass/fail line each.

Run alone with ``pytest tests/test_acceptance.py -s`` to see only these lines;
criterion 8 trains 12 models and takes the better part of an hour on one core.
"""

import time

import numpy as np
import pytest

from pisco_nik.cli import main
from pisco_nik.estimator import NIKReconstructor
from pisco_nik.grappa import grappa_reconstruct
from pisco_nik.kspace import (
    accelerate,
    cartesian_coords,
    golden_angle_radial,
    nudft_adjoint,
    nudft_forward,
    simulate_acquisition,
)
from pisco_nik.neighborhood import KernelGeometry, build_patches, kernel_offsets, overdetermination, partition_subsets
from pisco_nik.nik import build_model
from pisco_nik.numcore import Tape, solve_tikhonov, tikhonov_op, to_channels
from pisco_nik.phantom import DynamicPhantom, coil_maps, navigator_signal
from pisco_nik.pisco import PiscoConfig, pisco_loss, pisco_step, solve_subset_weights
from pisco_nik.recon import inufft_recon, psnr, ssim
from pisco_nik.trainer import TrainConfig, train

from conftest import central_diff, crandn, pinv_svd, rel_err, shifted_coil_field
from test_cli import TOY
from test_grappa import r2_mask, shifted_grid
from test_pisco import naive_loss
from test_recon import naive_ssim


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail
    return _report


def test_criterion_1_nudft(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    img = crandn(rng, 32, 32)
    k = cartesian_coords((32, 32)).reshape(-1, 2)
    ref = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(img)))
    fft_err = rel_err(nudft_forward(img, k).reshape(32, 32), ref)
    worst = 0.0
    for _ in range(100):
        nx, ny = 2 * rng.integers(4, 17, 2)
        x = crandn(rng, nx, ny)
        kk = rng.uniform(-0.5, 0.5, (rng.integers(10, 200), 2))
        y = crandn(rng, len(kk))
        Ax = nudft_forward(x, kk)
        res = abs(np.vdot(y, Ax) - np.vdot(nudft_adjoint(y, kk, (nx, ny)), x))
        worst = max(worst, res / (np.linalg.norm(Ax) * np.linalg.norm(y)))
    dt = time.perf_counter() - t0
    report(1, fft_err < 1e-10 and worst < 1e-12 and dt < 10,
           f"FFT rel err {fft_err:.1e} (<1e-10), dot-test {worst:.1e} (<1e-12), {dt:.1f}s (<10s)")


def test_criterion_2_least_squares(report):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(50):
        n = rng.integers(2, 12)
        m = n + rng.integers(0, 20)
        P, T = crandn(rng, m, n), crandn(rng, m, rng.integers(1, 4))
        worst = max(worst, rel_err(solve_tikhonov(P, T, 1e-12), pinv_svd(P) @ T))
    report(2, worst < 1e-8, f"max rel err vs SVD pseudoinverse {worst:.1e} (<1e-8) over 50 systems")


def test_criterion_3_pisco_gradient(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    # w.r.t. network outputs (P and T)
    P0 = to_channels(crandn(rng, 3, 8, 4))
    T0 = to_channels(crandn(rng, 3, 8, 2))
    lam = 0.3

    def out_loss(Pv, Tv):
        tape = Tape()
        return float(tape.scale(pisco_loss(tikhonov_op(tape, tape.constant(Pv), tape.constant(Tv), 1e-3)), lam).value)

    tape = Tape()
    P, T = tape.leaf(P0), tape.leaf(T0)
    tape.backward(tape.scale(pisco_loss(tikhonov_op(tape, P, T, 1e-3)), lam))
    e_out = max(rel_err(P.grad, central_diff(lambda v: out_loss(v, T0), P0, h=1e-6)),
                rel_err(T.grad, central_diff(lambda v: out_loss(P0, v), T0, h=1e-6)))

    # w.r.t. every parameter of a toy network
    model = build_model(2, hidden=6, layers=2, n_freq=3, sigma_k=2.0, sigma_t=1.0, seed=3)
    kernel = KernelGeometry.from_offsets([(1, 0), (0, 1)], 1 / 16)
    cfg = PiscoConfig(alpha=1e-3, lam=lam)
    coords = np.c_[rng.uniform(-0.4, 0.4, (40, 2)), np.linspace(0, 0.5, 40)]
    res = pisco_step(model, coords, kernel, cfg)
    params = model.params
    e_par = 0.0
    for k in range(len(params)):
        def f(v, k=k):
            m = model.copy()
            p = [q.copy() for q in params]
            p[k] = v
            m.set_params(p)
            return pisco_step(m, coords, kernel, cfg).loss
        e_par = max(e_par, rel_err(res.grads[k], central_diff(f, params[k], h=1e-6)))
    dt = time.perf_counter() - t0
    report(3, e_out < 1e-4 and e_par < 1e-4 and dt < 60,
           f"outputs {e_out:.1e}, parameters {e_par:.1e} (<1e-4), {dt:.1f}s (<60s)")


def test_criterion_4_exact_consistency(report):
    n, nc = 16, 2
    field = shifted_coil_field(nc, n, seed=4)
    rng = np.random.default_rng(4)
    kernel = KernelGeometry.from_offsets([(1, 0), (-1, 0), (0, 1)], delta=1 / n)
    tg = np.c_[rng.uniform(-0.4, 0.4, (400, 2)), rng.uniform(0, 0.5, 400)]
    _, n_m = overdetermination(kernel.n_neighbors, nc, nc, 1.1)
    subs = partition_subsets(tg[:, 2], field(tg), field(build_patches(tg, kernel)).reshape(400, -1), n_m)
    loss = pisco_loss(solve_subset_weights(subs, 1e-12))

    full = shifted_grid(24)
    mask = r2_mask(24, 8)
    out = grappa_reconstruct(np.where(mask[None], full, 0), mask, acs_rows=8, alpha=1e-12)
    # edge columns and the last line have no complete patch
    err = np.abs(out - full)[:, 1:-1, 1:-1].max()
    report(4, len(subs) >= 4 and loss < 1e-8 and err < 1e-8,
           f"L_PISCO {loss:.1e} over {len(subs)} subsets (<1e-8), GRAPPA R=2 max err {err:.1e} (<1e-8)")


def test_criterion_5_loss_fidelity(report):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        a, b = crandn(rng, 8, 6), crandn(rng, 8, 6)
        d = np.sum(np.abs((a - b).real) + np.abs((a - b).imag))
        got = pisco_loss([a, b])
        worst = max(worst, abs(got - d / 2), abs(got - naive_loss([a, b])))
    mats = [crandn(rng, 8, 6) for _ in range(5)]
    base = pisco_loss(mats)
    exact = all(pisco_loss([mats[i] for i in rng.permutation(5)]) == base for _ in range(50))
    report(5, worst < 1e-12 and exact, f"|L - d/2| and double-loop gap {worst:.1e} (<1e-12), "
           f"permutation invariance exact: {exact}")


def test_criterion_6_arithmetic(report):
    got = (overdetermination(8, 6, 6, 1.1)[0], overdetermination(8, 26, 3, 1.1)[0],
           overdetermination(8, 26, 26, 1.1)[0], kernel_offsets((3, 3)).n_neighbors)
    report(6, got == (288, 624, 5408, 8), f"N_w = {got[:3]} (288, 624, 5408), N_n = {got[3]} (8)")


def test_criterion_7_gating(report):
    rng = np.random.default_rng(7)
    from pisco_nik.kspace import KSampleSet
    data = KSampleSet(np.c_[rng.uniform(-0.5, 0.5, (300, 2)), rng.uniform(0, 0.5, 300)], 0.1 * crandn(rng, 300, 2))

    def model():
        return build_model(2, hidden=8, layers=2, n_freq=4, sigma_k=2.0, sigma_t=1.0, seed=0)

    base = dict(epochs=203, batch_size=150, lr=1e-3, seed=0, delta=1 / 16)
    _, log = train(data, model(), TrainConfig(e_pre=200, pisco=PiscoConfig(), **base))
    early = [r.epoch for r in log.pisco_steps if r.epoch <= 200]
    opened = {r.epoch for r in log.pisco_steps} == {201, 202, 203}
    short = dict(base, epochs=6)
    vanilla, _ = train(data, model(), TrainConfig(e_pre=2, pisco=None, **short))
    zero, _ = train(data, model(), TrainConfig(e_pre=2, pisco=PiscoConfig(lam=0.0), **short))
    same = all(np.array_equal(a, b) for a, b in zip(vanilla.params, zero.params))
    report(7, not early and opened and same,
           f"PISCO steps at or before epoch 200: {len(early)}; gate opens at 201: {opened}; "
           f"lambda=0 / off bitwise identical: {same}")


# -- criterion 8 ---------------------------------------------------------------

# Desk-scale settings for the comparison; see README for why they differ from
# the reference training defaults (width 512, lr 3e-5, 1000 epochs).
C8 = dict(grid=64, n_coils=6, n_spokes=200, period=37.7, epochs=300, e_pre=200, n_states=10,
          seeds=(0, 1, 2), factors=(2, 3),
          model=dict(hidden=128, layers=4, n_freq=128, sigma_k=8.0, sigma_t=4.0, batch_size=2000,
                     lr=3e-4, pisco_lr=1e-5, dc_epsilon=1.0, alpha=1e-4, f_od=1.1, lam=0.01))


def _c8_run(R):
    n = C8["grid"]
    ph = DynamicPhantom(shape=(n, n))
    maps = coil_maps(C8["n_coils"], (n, n))
    traj = golden_angle_radial(C8["n_spokes"], n)
    full = simulate_acquisition(ph, maps, traj, navigator_signal(C8["n_spokes"], C8["period"]))
    data = accelerate(full, R)
    ms = C8["n_states"]
    t_eval = 0.5 * (np.arange(ms) + 0.5) / ms
    ref = np.stack([np.abs(ph.render(t)) for t in t_eval])

    def median_psnr(frames):
        return float(np.median([psnr(r, np.abs(f)) for r, f in zip(ref, frames)]))

    base = median_psnr(inufft_recon(data, maps, ms, n).frames)
    out = {"inufft": base, "nik": [], "pisco": []}
    for seed in C8["seeds"]:
        for key, on in (("nik", False), ("pisco", True)):
            est = NIKReconstructor(epochs=C8["epochs"], e_pre=C8["e_pre"], delta=1 / n, seed=seed, pisco=on,
                                   **C8["model"])
            est.fit(data.coords, data.values)
            out[key].append(median_psnr(est.reconstruct(t_eval, maps).frames))
    return out


@pytest.mark.slow
def test_criterion_8_scaled_replication(report):
    t0 = time.perf_counter()
    lines, ok = [], True
    for R in C8["factors"]:
        r = _c8_run(R)
        nik, pis = np.median(r["nik"]), np.median(r["pisco"])
        gain = float(np.median(np.subtract(r["pisco"], r["nik"])))
        cond = pis >= nik and min(nik, pis) > r["inufft"] and (R != 3 or gain > 0)
        ok &= cond
        lines.append(f"R={R}: PISCO-NIK {pis:.2f} dB, NIK {nik:.2f} dB, INUFFT {r['inufft']:.2f} dB, "
                     f"median gain {gain:+.2f} dB, per seed nik={np.round(r['nik'], 2).tolist()} "
                     f"pisco={np.round(r['pisco'], 2).tolist()}")
    dt = time.perf_counter() - t0
    ok &= dt < 7200
    report(8, ok, "; ".join(lines) + f"; {dt / 60:.1f} min (<120)")


# -- criterion 9 ---------------------------------------------------------------

def test_criterion_9_determinism(report, tmp_path):
    cfg = tmp_path / "toy.ini"
    cfg.write_text(TOY.replace("epochs = 3", "epochs = 20").replace("e_pre = 1", "e_pre = 10"))

    def pipeline(root):
        sim, ck = root / "sim", root / "ck"
        codes = [main(["simulate", "--config", str(cfg), "--out", str(sim)]),
                 main(["train", "--data", str(sim), "--out", str(ck)]),
                 main(["reconstruct", "--model", str(ck), "--out", str(root / "frames.nda"), "--frames", "4"]),
                 main(["evaluate", "--ref", str(sim / "ref_frames.nda"), "--test", str(root / "frames.nda"),
                       "--out", str(root / "metrics.csv")])]
        files = sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())
        return codes, {f: (root / f).read_bytes() for f in files}

    c1, a = pipeline(tmp_path / "a")
    c2, b = pipeline(tmp_path / "b")
    same = a.keys() == b.keys() and all(a[k] == b[k] for k in a)
    report(9, c1 == c2 == [0, 0, 0, 0] and same,
           f"{len(a)} artifacts from simulate/train(20 epochs)/reconstruct/evaluate byte-identical: {same}")


def test_criterion_10_metrics(report):
    ref = np.zeros((10, 10))
    ref[0, 0] = 1.0
    p20 = psnr(ref, ref + 0.1)
    p30 = psnr(ref, ref + np.sqrt(0.001))
    rng = np.random.default_rng(10)
    worst = max(abs(ssim(a, b) - naive_ssim(a, b))
                for a, b in ((rng.random((16, 16)), rng.random((16, 16))) for _ in range(20)))
    ok = abs(p20 - 20) < 1e-12 and abs(p30 - 30) < 1e-12 and worst < 1e-10
    report(10, ok, f"psnr(MSE 0.01) = {p20:.12f}, psnr(MSE 0.001) = {p30:.12f}, ssim vs naive {worst:.1e} (<1e-10)")
