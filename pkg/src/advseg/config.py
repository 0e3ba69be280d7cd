"""Experiment configuration and its INI-style ``key = value`` file format."""

from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, field, fields

from .losses import ADV_MODES
from .metrics import DISTANCES

D_INPUTS = ("mask", "mask_image")
DATA_SOURCES = ("synthetic", "directory")


class ConfigError(ValueError):
    pass


def _opt(section: str, default, **kw):
    return field(default=default, metadata={"section": section, **kw})


@dataclass
class TrainConfig:
    seed: int = _opt("train", 0)
    epochs: int = _opt("train", 200)
    batch_size: int = _opt("train", 3)
    adversarial: bool = _opt("train", True)
    adv_mode: str = _opt("train", "saturating")
    adv_weight: float = _opt("train", 1.0)
    d_to_g_ratio: int = _opt("train", 1)

    g_lr: float = _opt("generator", 1e-3)
    g_beta1: float = _opt("generator", 0.9)
    g_beta2: float = _opt("generator", 0.99)
    depth: int = _opt("generator", 3)
    base_width: int = _opt("generator", 16)
    skips: bool = _opt("generator", False)

    d_lr: float = _opt("discriminator", 1e-4)
    d_beta1: float = _opt("discriminator", 0.5)
    d_beta2: float = _opt("discriminator", 0.9)
    d_input: str = _opt("discriminator", "mask")

    patch: int = _opt("data", 64)
    augment: bool = _opt("data", True)
    source: str = _opt("data", "synthetic")
    data_dir: str = _opt("data", "")
    synth_count: int = _opt("data", 8)
    synth_size: int = _opt("data", 64)
    synth_seed: int = _opt("data", 0)

    threshold: float = _opt("eval", 0.5)
    rho: int = _opt("eval", 3)
    distance: str = _opt("eval", "euclidean")

    def validate(self) -> TrainConfig:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.epochs >= 0, f"epochs must be >= 0, got {self.epochs}")
        need(self.batch_size >= 1, f"batch_size must be >= 1, got {self.batch_size}")
        need(self.d_to_g_ratio >= 1, f"d_to_g_ratio must be an integer >= 1, got {self.d_to_g_ratio}")
        need(self.g_lr > 0 and self.d_lr > 0, "learning rates must be > 0")
        for b in ("g_beta1", "g_beta2", "d_beta1", "d_beta2"):
            need(0.0 <= getattr(self, b) < 1.0, f"{b} must lie in [0, 1)")
        need(self.adv_mode in ADV_MODES, f"adv_mode must be one of {ADV_MODES}")
        need(self.adv_weight >= 0, "adv_weight must be >= 0")
        need(self.d_input in D_INPUTS, f"d_input must be one of {D_INPUTS}")
        need(self.source in DATA_SOURCES, f"source must be one of {DATA_SOURCES}")
        need(self.depth >= 0 and self.base_width >= 1, "depth must be >= 0 and base_width >= 1")
        need(self.patch % 2**self.depth == 0, f"patch {self.patch} must be divisible by 2**depth = {2**self.depth}")
        if self.adversarial:
            need(self.patch % 16 == 0, f"patch {self.patch} must be divisible by 16 for the discriminator")
        need(0.0 <= self.threshold <= 1.0, "threshold must lie in [0, 1]")
        need(self.rho >= 0, "rho must be >= 0")
        need(self.distance in DISTANCES, f"distance must be one of {DISTANCES}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d).validate()

    def replace(self, **changes) -> TrainConfig:
        return TrainConfig.from_dict({**self.to_dict(), **changes})


_FIELDS = {f.name: f for f in fields(TrainConfig)}


def parse_value(key: str, raw: str):
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    kind = type(_FIELDS[key].default)
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None


def loads(text: str) -> TrainConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}".replace("\n", " ")) from None
    values = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            if key not in _FIELDS:
                raise ConfigError(f"unknown config key {key!r} in [{section}]")
            expected = _FIELDS[key].metadata["section"]
            if section != expected:
                raise ConfigError(f"key {key!r} belongs in [{expected}], found in [{section}]")
            values[key] = parse_value(key, raw)
    return TrainConfig.from_dict(values)


def load(path: str | os.PathLike) -> TrainConfig:
    with open(path) as fh:
        return loads(fh.read())


def dumps(cfg: TrainConfig) -> str:
    sections: dict[str, list[str]] = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        sections.setdefault(f.metadata["section"], []).append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
    return "\n".join(f"[{s}]\n" + "\n".join(lines) + "\n" for s, lines in sections.items())
