import csv

import numpy as np
import pytest

from pisco_nik.cli import main
from pisco_nik.config import ExperimentConfig, dump_config, parse_config
from pisco_nik.errors import ConfigError
from pisco_nik.ndarray_io import read_nda, write_nda

from test_grappa import r2_mask, shifted_grid

TOY = """
[phantom]
grid = 16
n_coils = 2
period = 9.7
ellipses =
    0.0 0.0 0.35 0.3 0.2 1.0 0.0 0.0
    0.05 -0.1 0.12 0.1 0.0 0.5 0.1 0.2

[trajectory]
n_spokes = 24

[nik]
hidden = 16
layers = 2
n_freq = 16
sigma_k = 4

[train]
epochs = 3
e_pre = 1
batch = 400
lr = 1e-3
seed = 7

[pisco]
kernel = 3x3

[eval]
frames = 4
"""


@pytest.fixture
def toy_cfg(tmp_path):
    path = tmp_path / "toy.ini"
    path.write_text(TOY)
    return path


def test_defaults_are_the_reference_hyperparameters():
    c = ExperimentConfig()
    assert (c.phantom.n_coils, c.trajectory.n_spokes, c.trajectory.R) == (6, 1341, 1)
    assert (c.nik.layers, c.nik.hidden, c.nik.omega0) == (4, 512, 30.0)
    assert (c.train.epochs, c.train.e_pre, c.train.batch, c.train.lr) == (1000, 200, 10000, 3e-5)
    assert (c.pisco.alpha, c.pisco.f_od, c.pisco.lam, c.pisco.kernel) == (1e-4, 1.1, 0.01, (3, 3))
    assert c.eval.frames == 50


def test_config_round_trip():
    cfg = parse_config(TOY)
    assert parse_config(dump_config(cfg)) == cfg


@pytest.mark.parametrize("text", ["[pisco]\nbogus = 1", "[nope]\na = 1", "[train]\nlr = fast",
                                  "[pisco]\nkernel = 3", "[phantom]\nellipses = 0 0 -1 1 0 1 0 0"])
def test_bad_config_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[train]\nunknown = 3\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_missing_file_exit_code(tmp_path):
    assert main(["evaluate", "--ref", str(tmp_path / "nope.nda"), "--test", str(tmp_path / "nope.nda"),
                 "--out", str(tmp_path / "m.csv")]) == 3


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        main(["train"])
    assert info.value.code == 2


def test_simulate_outputs(tmp_path, toy_cfg):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(toy_cfg), "--out", str(out)]) == 0
    k = read_nda(out / "kspace.nda")
    c = read_nda(out / "coords.nda")
    assert k.shape == (24 * 16, 2) and k.dtype == np.complex128
    assert c.shape == (24 * 16, 3) and c.dtype == np.float64
    assert read_nda(out / "ref_frames.nda").shape == (4, 16, 16)
    assert read_nda(out / "maps.nda").shape == (2, 16, 16)
    assert parse_config((out / "config.ini").read_text()) == parse_config(TOY)


def test_acceleration_halves_spokes(tmp_path, toy_cfg):
    text = TOY.replace("n_spokes = 24", "n_spokes = 24\nR = 2")
    cfg2 = tmp_path / "r2.ini"
    cfg2.write_text(text)
    main(["simulate", "--config", str(toy_cfg), "--out", str(tmp_path / "a")])
    main(["simulate", "--config", str(cfg2), "--out", str(tmp_path / "b")])
    m1 = len(read_nda(tmp_path / "a" / "coords.nda"))
    m2 = len(read_nda(tmp_path / "b" / "coords.nda"))
    assert abs(m2 - m1 / 2) <= 16


def _pipeline(root, cfg):
    sim, ck = root / "sim", root / "ck"
    assert main(["simulate", "--config", str(cfg), "--out", str(sim)]) == 0
    assert main(["train", "--data", str(sim), "--out", str(ck)]) == 0
    assert main(["reconstruct", "--model", str(ck), "--out", str(root / "frames.nda"), "--frames", "4",
                 "--pgm", str(root / "pgm")]) == 0
    assert main(["evaluate", "--ref", str(sim / "ref_frames.nda"), "--test", str(root / "frames.nda"),
                 "--out", str(root / "metrics.csv")]) == 0
    return sorted(p for p in root.rglob("*") if p.is_file())


def test_pipeline_is_byte_identical(tmp_path, toy_cfg):
    a = _pipeline(tmp_path / "a", toy_cfg)
    b = _pipeline(tmp_path / "b", toy_cfg)
    rel = lambda paths, root: [p.relative_to(root) for p in paths]
    assert rel(a, tmp_path / "a") == rel(b, tmp_path / "b")
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes(), pa.name
    rows = list(csv.reader(open(tmp_path / "a" / "metrics.csv")))
    assert rows[0] == ["metric", "frame", "value"] and len(rows) == 1 + 3 * 4 + 6
    assert read_nda(tmp_path / "a" / "frames.nda").shape == (4, 16, 16)
    assert len(list((tmp_path / "a" / "pgm").glob("*.pgm"))) == 4


def test_pisco_off_leaves_column_empty(tmp_path, toy_cfg):
    sim = tmp_path / "sim"
    main(["simulate", "--config", str(toy_cfg), "--out", str(sim)])
    assert main(["train", "--data", str(sim), "--out", str(tmp_path / "off"), "--pisco", "off"]) == 0
    assert main(["train", "--data", str(sim), "--out", str(tmp_path / "on")]) == 0
    off = list(csv.DictReader(open(tmp_path / "off" / "trainlog.csv")))
    on = list(csv.DictReader(open(tmp_path / "on" / "trainlog.csv")))
    assert all(r["l_pisco"] == "" for r in off)
    assert any(r["l_pisco"] != "" for r in on)


def test_gate_never_opening_matches_off(tmp_path, toy_cfg):
    sim = tmp_path / "sim"
    main(["simulate", "--config", str(toy_cfg), "--out", str(sim)])
    late = tmp_path / "late.ini"
    late.write_text(TOY.replace("e_pre = 1", "e_pre = 3"))
    main(["train", "--data", str(sim), "--out", str(tmp_path / "off"), "--pisco", "off"])
    main(["train", "--data", str(sim), "--out", str(tmp_path / "late"), "--config", str(late)])
    for name in ("w0.nda", "w1.nda", "w2.nda", "b2.nda", "trainlog.csv"):
        assert (tmp_path / "off" / name).read_bytes() == (tmp_path / "late" / name).read_bytes()


def test_reconstruct_single_frame(tmp_path, toy_cfg):
    sim = tmp_path / "sim"
    main(["simulate", "--config", str(toy_cfg), "--out", str(sim)])
    main(["train", "--data", str(sim), "--out", str(tmp_path / "ck"), "--pisco", "off"])
    assert main(["reconstruct", "--model", str(tmp_path / "ck"), "--out", str(tmp_path / "f.nda"),
                 "--frames", "1"]) == 0
    assert read_nda(tmp_path / "f.nda").shape == (1, 16, 16)


def test_inufft_subcommand(tmp_path, toy_cfg):
    sim = tmp_path / "sim"
    main(["simulate", "--config", str(toy_cfg), "--out", str(sim)])
    assert main(["inufft", "--data", str(sim), "--states", "2", "--out", str(tmp_path / "i.nda")]) == 0
    assert read_nda(tmp_path / "i.nda").shape == (2, 16, 16)


def test_evaluate_identical_and_mismatch(tmp_path, rng):
    a = rng.random((3, 16, 16))
    write_nda(tmp_path / "a.nda", a)
    write_nda(tmp_path / "b.nda", a[:2])
    assert main(["evaluate", "--ref", str(tmp_path / "a.nda"), "--test", str(tmp_path / "a.nda"),
                 "--out", str(tmp_path / "m.csv")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "m.csv")))
    assert all(float(r["value"]) == 99.0 for r in rows if r["metric"] == "psnr")
    assert all(abs(float(r["value"]) - 1) < 1e-12 for r in rows if r["metric"] == "ssim")
    assert main(["evaluate", "--ref", str(tmp_path / "a.nda"), "--test", str(tmp_path / "b.nda"),
                 "--out", str(tmp_path / "m2.csv")]) == 2


def test_grappa_subcommand(tmp_path):
    full = shifted_grid(24)
    mask = r2_mask(24, 8)
    write_nda(tmp_path / "k.nda", np.where(mask[None], full, 0))
    write_nda(tmp_path / "m.nda", mask.astype(np.float32))
    assert main(["grappa", "--kspace", str(tmp_path / "k.nda"), "--mask", str(tmp_path / "m.nda"),
                 "--acs-rows", "8", "--alpha", "1e-12", "--out", str(tmp_path / "o.nda")]) == 0
    out = read_nda(tmp_path / "o.nda")
    assert np.abs(out - full)[:, 1:-1, 1:-1].max() < 1e-8

    write_nda(tmp_path / "full.nda", np.ones((24, 24), np.float32))
    assert main(["grappa", "--kspace", str(tmp_path / "k.nda"), "--mask", str(tmp_path / "full.nda"),
                 "--acs-rows", "8", "--out", str(tmp_path / "same.nda")]) == 0
    np.testing.assert_array_equal(read_nda(tmp_path / "same.nda"), np.where(mask[None], full, 0))

    assert main(["grappa", "--kspace", str(tmp_path / "k.nda"), "--mask", str(tmp_path / "m.nda"),
                 "--acs-rows", "2", "--out", str(tmp_path / "x.nda")]) == 2
    assert main(["grappa", "--kspace", str(tmp_path / "nope.nda"), "--mask", str(tmp_path / "m.nda"),
                 "--acs-rows", "8", "--out", str(tmp_path / "x.nda")]) == 3
