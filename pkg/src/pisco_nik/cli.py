"""Command-line pipeline: simulate, train, reconstruct, evaluate, plus GRAPPA and INUFFT.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, dump_config, load_config
from .errors import AcsTooSmall, ConfigError, NdaError, NonFiniteLoss, ShapeMismatch
from .estimator import NIKReconstructor, ScaledModel
from .grappa import grappa_reconstruct
from .kspace import KSampleSet, accelerate, golden_angle_radial, simulate_acquisition
from .ndarray_io import read_nda, write_nda
from .nik import load_model, save_model
from .phantom import DynamicPhantom, coil_maps, navigator_signal
from .recon import evaluate, frame_times, inufft_recon, reconstruct_frames, write_pgm

log = logging.getLogger("pisco_nik")

EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 2, 3, 4


class _UsageError(Exception):
    pass


def _config_for(args, data_dir: Path | None = None) -> ExperimentConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    if data_dir is not None and (data_dir / "config.ini").exists():
        return load_config(data_dir / "config.ini")
    return ExperimentConfig()


def _phantom(cfg: ExperimentConfig) -> DynamicPhantom:
    g = cfg.phantom.grid
    return DynamicPhantom(cfg.phantom.ellipses, (g, g))


def cmd_simulate(args) -> int:
    cfg = _config_for(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ph = _phantom(cfg)
    maps = coil_maps(cfg.phantom.n_coils, ph.shape, seed=cfg.train.seed)
    traj = golden_angle_radial(cfg.trajectory.n_spokes, cfg.n_fe)
    nav = navigator_signal(cfg.trajectory.n_spokes, cfg.phantom.period)
    data = accelerate(simulate_acquisition(ph, maps, traj, nav), cfg.trajectory.R)
    write_nda(out / "kspace.nda", data.values)
    write_nda(out / "coords.nda", data.coords)
    write_nda(out / "spokes.nda", data.spoke.astype(np.float64))
    write_nda(out / "maps.nda", maps)
    write_nda(out / "nav.nda", nav)
    t = frame_times(cfg.eval.frames)
    write_nda(out / "ref_frames.nda", np.stack([ph.render(v) for v in t]))
    (out / "config.ini").write_text(dump_config(cfg), encoding="utf-8")
    log.info("simulated %d samples x %d coils into %s", len(data), data.n_coils, out)
    return 0


def _load_samples(data_dir: Path) -> KSampleSet:
    coords = read_nda(data_dir / "coords.nda")
    values = read_nda(data_dir / "kspace.nda")
    spoke = None
    if (data_dir / "spokes.nda").exists():
        spoke = read_nda(data_dir / "spokes.nda").astype(np.int64)
    return KSampleSet(coords, values, spoke)


def make_estimator(cfg: ExperimentConfig, pisco: bool | None = None) -> NIKReconstructor:
    n, t, p = cfg.nik, cfg.train, cfg.pisco
    return NIKReconstructor(
        hidden=n.hidden, layers=n.layers, omega0=n.omega0, n_freq=n.n_freq, sigma_k=n.sigma_k,
        sigma_t=n.sigma_t, dc_epsilon=n.dc_epsilon, epochs=t.epochs, e_pre=t.e_pre, batch_size=t.batch,
        lr=t.lr, pisco_lr=t.pisco_lr, seed=t.seed, pisco=p.enabled if pisco is None else pisco,
        alpha=p.alpha, f_od=p.f_od, lam=p.lam, kernel_size=p.kernel, delta=1.0 / cfg.n_fe,
        coils_out=p.coils_out, grad_through=p.grad_through, partition=p.partition,
    )


def cmd_train(args) -> int:
    data_dir = Path(args.data)
    cfg = _config_for(args, data_dir)
    data = _load_samples(data_dir)
    pisco = None if args.pisco is None else args.pisco == "on"
    est = make_estimator(cfg, pisco)
    est.fit(data.coords, data.values)
    out = Path(args.out)
    save_model(est.model_, out)
    shutil.copyfile(data_dir / "maps.nda", out / "maps.nda")
    (out / "config.ini").write_text(dump_config(cfg), encoding="utf-8")
    # wall-clock timings differ between runs; they stay out of the file unless asked for
    est.log_.to_csv(out / "trainlog.csv", timing=args.timing)
    log.info("trained %d epochs, final l_dc %.5g", cfg.train.epochs, est.log_.epoch_mean(cfg.train.epochs))
    return 0


def _dump_pgm(frames: np.ndarray, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    vmax = float(np.abs(frames).max())
    for j, f in enumerate(frames):
        write_pgm(d / f"frame_{j:03d}.pgm", f, vmax)


def cmd_reconstruct(args) -> int:
    model_dir = Path(args.model)
    model = load_model(model_dir)
    maps = read_nda(model_dir / "maps.nda")
    if args.frames < 1:
        raise _UsageError("--frames must be >= 1")
    scaled = ScaledModel(model, float(model.meta.get("scale", 1.0)))
    stack = reconstruct_frames(scaled, maps, frame_times(args.frames))
    write_nda(args.out, stack.frames)
    if args.pgm:
        _dump_pgm(stack.frames, args.pgm)
    return 0


def cmd_inufft(args) -> int:
    data_dir = Path(args.data)
    cfg = _config_for(args, data_dir)
    data = _load_samples(data_dir)
    stack = inufft_recon(data, read_nda(data_dir / "maps.nda"), args.states, cfg.n_fe)
    write_nda(args.out, stack.frames)
    if args.pgm:
        _dump_pgm(stack.frames, args.pgm)
    return 0


def cmd_evaluate(args) -> int:
    report = evaluate(read_nda(args.ref), read_nda(args.test))
    report.to_csv(args.out)
    return 0


def cmd_grappa(args) -> int:
    kspace = read_nda(args.kspace)
    mask = read_nda(args.mask) != 0
    write_nda(args.out, grappa_reconstruct(kspace, mask, args.acs_rows, args.alpha, args.width))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pisco-nik", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate radial multi-coil k-space of the phantom")
    p.add_argument("--config", help="experiment config (INI); defaults apply when omitted")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="fit a NIK model, with or without PISCO")
    p.add_argument("--data", required=True, help="directory written by simulate")
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--pisco", choices=("on", "off"), help="override [pisco] enabled")
    p.add_argument("--config", help="config to use instead of the one in --data")
    p.add_argument("--timing", action="store_true", help="record per-step wall time in trainlog.csv")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", help="render coil-combined frames from a checkpoint")
    p.add_argument("--model", required=True, help="checkpoint directory")
    p.add_argument("--out", required=True, help="output .nda frame stack")
    p.add_argument("--frames", type=int, default=50, help="number of frames over t in [0, 0.5]")
    p.add_argument("--pgm", help="also write one PGM per frame into this directory")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("inufft", help="density-compensated adjoint baseline per motion state")
    p.add_argument("--data", required=True, help="directory written by simulate")
    p.add_argument("--states", type=int, default=1, help="number of motion states")
    p.add_argument("--out", required=True, help="output .nda frame stack")
    p.add_argument("--config", help="config to use instead of the one in --data")
    p.add_argument("--pgm", help="also write one PGM per frame into this directory")
    p.set_defaults(func=cmd_inufft)

    p = sub.add_parser("evaluate", help="PSNR / SSIM of a frame stack against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True, help="metrics CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grappa", help="fill line-undersampled Cartesian k-space")
    p.add_argument("--kspace", required=True, help="(n_coils, nx, ny) complex .nda")
    p.add_argument("--mask", required=True, help="(nx, ny) .nda, nonzero where sampled")
    p.add_argument("--acs-rows", type=int, required=True, help="fully sampled central x-lines")
    p.add_argument("--alpha", type=float, default=1e-4)
    p.add_argument("--width", type=int, default=3, help="kernel extent along y")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grappa)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NonFiniteLoss as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (NdaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ShapeMismatch, AcsTooSmall, _UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
