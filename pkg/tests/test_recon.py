import numpy as np
import pytest

from pisco_nik.errors import ShapeMismatch
from pisco_nik.kspace import golden_angle_radial, simulate_acquisition
from pisco_nik.phantom import DynamicPhantom, Ellipse, coil_maps
from pisco_nik.recon import (
    FrameStack,
    coil_combine,
    evaluate,
    frame_times,
    image_to_kspace,
    infer_grid,
    inufft_recon,
    kspace_to_image,
    psnr,
    reconstruct_frames,
    ssim,
    write_pgm,
)

from conftest import crandn


def naive_ssim(a, b, win=8):
    L = a.max()
    c1, c2 = (0.01 * L) ** 2, (0.03 * L) ** 2
    vals = []
    for i in range(a.shape[0] - win + 1):
        for j in range(a.shape[1] - win + 1):
            x = a[i:i + win, j:j + win].ravel()
            y = b[i:i + win, j:j + win].ravel()
            mx, my = x.sum() / x.size, y.sum() / y.size
            vx = ((x - mx) ** 2).sum() / x.size
            vy = ((y - my) ** 2).sum() / y.size
            cxy = ((x - mx) * (y - my)).sum() / x.size
            vals.append((2 * mx * my + c1) * (2 * cxy + c2) / ((mx**2 + my**2 + c1) * (vx + vy + c2)))
    return sum(vals) / len(vals)


class _Oracle:
    """Model stand-in that returns the exact k-space of a fixed coil image stack."""

    def __init__(self, coil_images):
        self.k = image_to_kspace(coil_images)

    def predict(self, coords):
        return self.k.reshape(len(self.k), -1).T


def test_psnr_cases():
    ref = np.zeros((10, 10))
    ref[0, 0] = 1.0
    assert psnr(ref, ref + 0.1) == pytest.approx(20.0, abs=1e-12)
    assert psnr(ref, ref + np.sqrt(0.001)) == pytest.approx(30.0, abs=1e-12)
    assert psnr(ref, ref) == 99.0
    with pytest.raises(ShapeMismatch):
        psnr(ref, ref[:5])


def test_ssim_matches_naive(rng):
    for _ in range(5):
        a, b = rng.random((16, 16)), rng.random((16, 16))
        assert abs(ssim(a, b) - naive_ssim(a, b)) < 1e-10
    a = rng.random((16, 16))
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)


def test_ssim_too_small():
    with pytest.raises(ShapeMismatch):
        ssim(np.ones((4, 4)), np.ones((4, 4)))


def test_fft_pair_inverts(rng):
    x = crandn(rng, 2, 8, 6)
    np.testing.assert_allclose(kspace_to_image(image_to_kspace(x)), x, atol=1e-12)


def test_coil_combine_recovers_image(rng):
    img = crandn(rng, 12, 12)
    maps = coil_maps(4, (12, 12))
    np.testing.assert_allclose(coil_combine(maps * img, maps), img, atol=1e-12)
    zero = np.zeros((2, 4, 4))
    assert not coil_combine(zero, zero).any()


def test_frame_times():
    np.testing.assert_allclose(frame_times(3), [0, 0.25, 0.5])
    assert frame_times(1).tolist() == [0.0]


def test_oracle_model_reconstructs_exactly(rng):
    img = crandn(rng, 16, 16)
    maps = coil_maps(3, (16, 16))
    oracle = _Oracle(maps * img)
    np.testing.assert_allclose(infer_grid(oracle, 0.1, (16, 16)), oracle.k)
    fs = reconstruct_frames(oracle, maps, [0.0, 0.2])
    assert isinstance(fs, FrameStack) and len(fs) == 2
    np.testing.assert_allclose(fs.frames[1], img, atol=1e-10)


def test_inufft_fully_sampled_static():
    n = 32
    ph = DynamicPhantom([Ellipse(0, 0, 0.3, 0.25, 0.3, 1.0), Ellipse(0.1, 0.05, 0.08, 0.12, 0, 0.6)], (n, n))
    maps = coil_maps(4, (n, n))
    traj = golden_angle_radial(int(np.ceil(np.pi / 2 * n)) * 2, n)
    data = simulate_acquisition(ph, maps, traj, np.zeros(traj.n_spokes))
    fs = inufft_recon(data, maps, 1, n)
    ref = np.abs(ph.render(0.0))
    assert psnr(ref, np.abs(fs.frames[0])) > 25


def test_inufft_empty_bin_is_zero(caplog):
    n = 16
    ph = DynamicPhantom([Ellipse(0, 0, 0.3, 0.3)], (n, n))
    maps = coil_maps(2, (n, n))
    traj = golden_angle_radial(10, n)
    data = simulate_acquisition(ph, maps, traj, np.zeros(10))
    fs = inufft_recon(data, maps, 3, n)
    assert not fs.frames[2].any()
    np.testing.assert_allclose(fs.t, [1 / 12, 0.25, 5 / 12])


def test_evaluate_layout(rng, tmp_path):
    ref = rng.random((10, 16, 16))
    rep = evaluate(ref, ref + 0.01 * rng.random((10, 16, 16)))
    assert len(rep.rows) == 3 * 10 + 6
    assert len(rep.values("psnr")) == 10
    rep.to_csv(tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "metric,frame,value" and len(lines) == 37


def test_write_pgm(tmp_path):
    img = np.zeros((4, 3))
    img[1, 2] = 2.0
    write_pgm(tmp_path / "a.pgm", img)
    raw = (tmp_path / "a.pgm").read_bytes()
    header = b"P5\n4 3\n255\n"
    assert raw.startswith(header)
    pix = np.frombuffer(raw[len(header):], np.uint8).reshape(3, 4)
    assert pix[2, 1] == 255 and pix.sum() == 255
