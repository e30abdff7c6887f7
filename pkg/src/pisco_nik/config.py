"""Experiment configuration read from INI-style text files.

Every section and key has a default, so an empty file is a valid
configuration.  Unknown sections or keys raise :class:`ConfigError`.

Ellipses are given one per line as
``x0 y0 a b angle amp_re amp_im kappa``, or the single word ``default``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError
from .phantom import Ellipse, default_ellipses


@dataclass
class PhantomSection:
    grid: int = 64
    n_coils: int = 6
    ellipses: list[Ellipse] = field(default_factory=default_ellipses)
    period: float = 134.1


@dataclass
class TrajectorySection:
    n_spokes: int = 1341
    n_fe: int | None = None
    R: int = 1


@dataclass
class NikSection:
    layers: int = 4
    hidden: int = 512
    omega0: float = 30.0
    n_freq: int = 128
    sigma_k: float = 32.0
    sigma_t: float = 4.0
    dc_epsilon: float = 1e-3


@dataclass
class TrainSection:
    epochs: int = 1000
    e_pre: int = 200
    batch: int = 10000
    lr: float = 3e-5
    pisco_lr: float | None = None
    seed: int = 0


@dataclass
class PiscoSection:
    enabled: bool = True
    alpha: float = 1e-4
    f_od: float = 1.1
    lam: float = 0.01
    kernel: tuple[int, int] = (3, 3)
    coils_out: int | None = None
    grad_through: str = "both"
    partition: str = "temporal"


@dataclass
class EvalSection:
    frames: int = 50


@dataclass
class ExperimentConfig:
    phantom: PhantomSection = field(default_factory=PhantomSection)
    trajectory: TrajectorySection = field(default_factory=TrajectorySection)
    nik: NikSection = field(default_factory=NikSection)
    train: TrainSection = field(default_factory=TrainSection)
    pisco: PiscoSection = field(default_factory=PiscoSection)
    eval: EvalSection = field(default_factory=EvalSection)

    @property
    def n_fe(self) -> int:
        return self.trajectory.n_fe or self.phantom.grid


# config key -> dataclass field, where they differ
_ALIASES = {("pisco", "lambda"): "lam"}


def _parse_ellipses(text: str) -> list[Ellipse]:
    text = text.strip()
    if text == "default":
        return default_ellipses()
    out = []
    for line in filter(None, (ln.strip() for ln in text.splitlines())):
        parts = line.split()
        if len(parts) != 8:
            raise ConfigError(f"ellipse needs 8 numbers (x0 y0 a b angle re im kappa): {line!r}")
        x0, y0, a, b, ang, re, im, kappa = map(float, parts)
        out.append(Ellipse(x0, y0, a, b, ang, complex(re, im), kappa))
    if not out:
        raise ConfigError("empty ellipse list")
    return out


def _format_ellipses(ellipses: list[Ellipse]) -> str:
    lines = [f"{e.x0!r} {e.y0!r} {e.a!r} {e.b!r} {e.angle!r} "
             f"{complex(e.amplitude).real!r} {complex(e.amplitude).imag!r} {e.kappa!r}" for e in ellipses]
    return "\n" + "\n".join(lines)


def _convert(name: str, raw: str):
    raw = raw.strip()
    if name == "ellipses":
        return _parse_ellipses(raw)
    if name == "kernel":
        try:
            h, w = (int(v) for v in raw.lower().split("x"))
        except ValueError:
            raise ConfigError(f"kernel must look like 3x3, got {raw!r}") from None
        return (h, w)
    if name == "enabled":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"enabled must be on/off, got {raw!r}")
    if name in ("grad_through", "partition"):
        return raw
    if raw.lower() in ("", "none") and name in ("n_fe", "coils_out", "pisco_lr"):
        return None
    as_int = name in ("grid", "n_coils", "n_spokes", "n_fe", "R", "layers", "hidden", "n_freq",
                      "epochs", "e_pre", "batch", "seed", "coils_out", "frames")
    try:
        return int(raw) if as_int else float(raw)
    except ValueError:
        raise ConfigError(f"{name} = {raw!r} is not a number") from None


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    cfg = ExperimentConfig()
    known = {f.name: f for f in fields(ExperimentConfig)}
    for section in cp.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]")
        current = getattr(cfg, section)
        names = {f.name for f in fields(current)}
        # aliased fields may only be spelled by their config key
        hidden = {v for (s, _), v in _ALIASES.items() if s == section}
        updates = {}
        for key, raw in cp.items(section):
            name = _ALIASES.get((section, key), key)
            if name not in names or key in hidden:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            try:
                updates[name] = _convert(name, raw)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from None
        setattr(cfg, section, replace(current, **updates))
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    p, tr, t = cfg.phantom, cfg.trajectory, cfg.train
    if p.grid < 8 or p.grid % 2:
        raise ConfigError("grid must be even and >= 8")
    if p.n_coils < 1 or tr.n_spokes < 1 or tr.R < 1:
        raise ConfigError("n_coils, n_spokes and R must be >= 1")
    if cfg.n_fe < 8 or cfg.n_fe % 2:
        raise ConfigError("n_fe must be even and >= 8")
    if not 0 <= t.e_pre <= t.epochs:
        raise ConfigError("need 0 <= e_pre <= epochs")
    if cfg.eval.frames < 1:
        raise ConfigError("frames must be >= 1")
    if cfg.pisco.grad_through not in ("both", "targets") or cfg.pisco.partition not in ("temporal", "random"):
        raise ConfigError("grad_through must be both|targets and partition temporal|random")


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(cfg: ExperimentConfig) -> str:
    """Canonical text of ``cfg``; ``parse_config(dump_config(c)) == c``."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    inverse = {(s, v): k for (s, k), v in _ALIASES.items()}
    for f in fields(ExperimentConfig):
        section = getattr(cfg, f.name)
        cp[f.name] = {}
        for sf in fields(section):
            value = getattr(section, sf.name)
            if sf.name == "ellipses":
                text = _format_ellipses(value)
            elif sf.name == "kernel":
                text = f"{value[0]}x{value[1]}"
            elif sf.name == "enabled":
                text = "on" if value else "off"
            elif value is None:
                text = "none"
            else:
                text = repr(value) if isinstance(value, float) else str(value)
            cp[f.name][inverse.get((f.name, sf.name), sf.name)] = text
    lines = []
    for name in cp.sections():
        lines.append(f"[{name}]")
        for key, value in cp[name].items():
            lines.append(f"{key} = {value}".replace("\n", "\n    "))
        lines.append("")
    return "\n".join(lines)
