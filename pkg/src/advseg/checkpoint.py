"""Checkpoints: a JSON manifest plus a payload of little-endian float64 arrays.

A checkpoint directory holds ``manifest.json`` and ``payload.bin``. The
manifest echoes the full config, the epoch, the optimizer hyperparameters and
step counters, and an inventory of every array (generator and discriminator
parameters, then Adam moments) with its shape and byte offset.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .models import Discriminator, Generator, build_discriminator, build_generator
from .optim import AdamState

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
PAYLOAD = "payload.bin"
_LE_F64 = np.dtype("<f8")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: TrainConfig
    generator: Generator
    discriminator: Discriminator | None = None
    g_opt: AdamState | None = None
    d_opt: AdamState | None = None
    epoch: int = 0

    def arrays(self) -> list[tuple[str, np.ndarray]]:
        """Every stored array, in inventory order."""
        out = [(f"G/{k}", p.data) for k, p in self.generator.params.items()]
        if self.discriminator is not None:
            out += [(f"D/{k}", p.data) for k, p in self.discriminator.params.items()]
        for tag, net, opt in (("G", self.generator, self.g_opt), ("D", self.discriminator, self.d_opt)):
            if opt is None or net is None:
                continue
            for k, m, v in zip(net.params, opt.m, opt.v):
                out.append((f"opt_{tag}/m/{k}", m))
                out.append((f"opt_{tag}/v/{k}", v))
        return out

    def manifest(self) -> dict:
        inventory, offset = [], 0
        for name, arr in self.arrays():
            inventory.append({"name": name, "shape": list(arr.shape), "offset": offset})
            offset += arr.size * 8

        def opt_meta(opt):
            if opt is None:
                return None
            return {"lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps, "t": opt.t}

        return {
            "format_version": FORMAT_VERSION,
            "epoch": self.epoch,
            "config": self.config.to_dict(),
            "has_discriminator": self.discriminator is not None,
            "optimizers": {"G": opt_meta(self.g_opt), "D": opt_meta(self.d_opt)},
            "inventory": inventory,
            "payload_bytes": offset,
        }

    def payload(self) -> bytes:
        return b"".join(np.ascontiguousarray(a, dtype=_LE_F64).tobytes() for _, a in self.arrays())

    def save(self, path: str | os.PathLike) -> Path:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        (path / MANIFEST).write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")
        (path / PAYLOAD).write_bytes(self.payload())
        return path


def build_networks(cfg: TrainConfig, with_discriminator: bool | None = None):
    """Fresh generator and (when adversarial) discriminator seeded from ``cfg.seed``."""
    g_seed, d_seed = np.random.SeedSequence(cfg.seed).generate_state(2)
    gen = build_generator((cfg.patch, cfg.patch), 3, cfg.depth, cfg.base_width, int(g_seed), cfg.skips)
    disc = None
    if cfg.adversarial if with_discriminator is None else with_discriminator:
        in_ch = 1 if cfg.d_input == "mask" else 4
        disc = build_discriminator((cfg.patch, cfg.patch), in_ch, int(d_seed))
    return gen, disc


def load_checkpoint(path: str | os.PathLike) -> Checkpoint:
    path = Path(path)
    if not (path / MANIFEST).is_file():
        raise FileNotFoundError(f"no checkpoint manifest at {path / MANIFEST}")
    try:
        manifest = json.loads((path / MANIFEST).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path / MANIFEST}: invalid JSON ({exc})") from None
    required = ("format_version", "epoch", "config", "has_discriminator", "optimizers", "inventory", "payload_bytes")
    missing = [k for k in required if k not in manifest]
    if missing:
        raise CheckpointError(f"{path / MANIFEST}: missing fields {missing}")
    if manifest["format_version"] != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {manifest['format_version']}")
    cfg = TrainConfig.from_dict(manifest["config"])
    payload = (path / PAYLOAD).read_bytes() if (path / PAYLOAD).is_file() else None
    if payload is None:
        raise FileNotFoundError(f"no checkpoint payload at {path / PAYLOAD}")
    if len(payload) != manifest["payload_bytes"]:
        raise CheckpointError(f"payload is {len(payload)} bytes, manifest declares {manifest['payload_bytes']}")

    arrays = {}
    for entry in manifest["inventory"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        start = entry["offset"]
        if start + count * 8 > len(payload):
            raise CheckpointError(f"inventory entry {entry['name']} runs past the payload")
        arrays[entry["name"]] = np.frombuffer(payload, _LE_F64, count, start).astype(np.float64).reshape(shape)

    gen, disc = build_networks(cfg, manifest["has_discriminator"])

    def take(prefix: str, net):
        try:
            net.load_state({k: arrays[f"{prefix}/{k}"] for k in net.params})
        except KeyError as exc:
            raise CheckpointError(f"checkpoint lacks array {exc}") from None

    take("G", gen)
    if disc is not None:
        take("D", disc)

    def opt(tag: str, net):
        meta = manifest["optimizers"].get(tag)
        if meta is None or net is None:
            return None
        try:
            m = [arrays[f"opt_{tag}/m/{k}"].copy() for k in net.params]
            v = [arrays[f"opt_{tag}/v/{k}"].copy() for k in net.params]
        except KeyError as exc:
            raise CheckpointError(f"checkpoint lacks optimizer array {exc}") from None
        return AdamState(lr=meta["lr"], beta1=meta["beta1"], beta2=meta["beta2"], eps=meta["eps"], t=meta["t"], m=m, v=v)

    return Checkpoint(cfg, gen, disc, opt("G", gen), opt("D", disc), manifest["epoch"])
