"""Command-line entry point: ``advseg {synth,train,eval,predict}``.

Failures print a single ``error: <kind>: <message>`` line to stderr and exit
with the code listed in :data:`EXIT_CODES`.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as config_mod
from . import data, metrics
from .checkpoint import CheckpointError, load_checkpoint
from .config import ConfigError, TrainConfig
from .netpbm import NetpbmError, read_mask, read_raster, write_mask, write_raster
from .train import DivergenceError, evaluate, predict, train

EXIT_CODES = {
    "usage": 2,
    "missing_file": 3,
    "config": 4,
    "data": 5,
    "divergence": 6,
    "checkpoint": 7,
}


class CliError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message)


def _pair(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(",")
    return int(lo), int(hi or lo)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="advseg", description="Adversarial + cross-entropy building segmentation lab.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic dataset (images/*.ppm, masks/*.pgm)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=8)
    s.add_argument("--size", type=int, default=64)
    s.add_argument("--buildings", type=_pair, default=(2, 6), help="count range lo,hi")
    s.add_argument("--building-size", type=_pair, default=(6, 20), help="side length range lo,hi")
    s.add_argument("--noise", type=float, default=30.0)
    s.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train from a config file")
    t.add_argument("--config", help="INI config; defaults are used when omitted")
    t.add_argument("--data", help="dataset root with images/ and masks/ (overrides the config source)")
    t.add_argument("--val", help="validation dataset root")
    t.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    t.add_argument("--out", required=True, help="checkpoint directory")

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--rho", type=int)
    e.add_argument("--distance", choices=metrics.DISTANCES)
    e.add_argument("--json", help="also write the report as JSON here")

    r = sub.add_parser("predict", help="predict a mask (and a TP/TN/FP/FN diff when --mask is given)")
    r.add_argument("--ckpt", required=True)
    r.add_argument("--image", required=True)
    r.add_argument("--mask", help="ground-truth PGM mask")
    r.add_argument("--out-mask", required=True)
    r.add_argument("--out-diff", help="diff PPM path (requires --mask)")
    return p


def _cmd_synth(args) -> None:
    cfg = data.SynthConfig(
        size=args.size,
        count=args.count,
        buildings=args.buildings,
        building_size=args.building_size,
        noise=args.noise,
        seed=args.seed,
    )
    ds = data.synth_dataset(cfg)
    root = data.write_dataset(ds, args.out)
    print(f"wrote {len(ds)} samples to {root}")


def _load_config(args) -> TrainConfig:
    cfg = config_mod.load(args.config) if args.config else TrainConfig()
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = config_mod.parse_value(key.strip(), value)
    if args.data:
        overrides.update(source="directory", data_dir=str(args.data))
    return cfg.replace(**overrides) if overrides else cfg


def _training_data(cfg: TrainConfig) -> data.Dataset:
    if cfg.source == "directory":
        return data.load_dataset(cfg.data_dir)
    return data.synth_dataset(data.SynthConfig(size=cfg.synth_size, count=cfg.synth_count, seed=cfg.synth_seed))


def _cmd_train(args) -> None:
    cfg = _load_config(args)
    ds = _training_data(cfg)
    if len(ds) == 0:
        raise data.DatasetError("empty dataset")
    val = data.load_dataset(args.val, "val") if args.val else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "log.jsonl", "w") as fh:

        def on_epoch(entry):
            fh.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")
            fh.flush()

        ckpt, logs = train(cfg, ds, val=val, on_epoch=on_epoch)
    ckpt.save(out)
    (out / "config.ini").write_text(config_mod.dumps(cfg))
    last = logs[-1] if logs else None
    print(f"trained {cfg.epochs} epochs on {len(ds)} samples; final ce={last.ce if last else float('nan'):.6f}")


def _cmd_eval(args) -> None:
    ckpt = load_checkpoint(args.ckpt)
    ds = data.load_dataset(args.data, "test")
    if len(ds) == 0:
        raise data.DatasetError(f"empty dataset at {args.data}")
    cfg = ckpt.config
    params = metrics.RelaxedParams(
        args.rho if args.rho is not None else cfg.rho, args.distance or cfg.distance
    )
    report = evaluate(ckpt, ds, params)
    sys.stdout.write(report.to_text())
    if args.json:
        Path(args.json).write_text(report.to_json() + "\n")


def _cmd_predict(args) -> None:
    ckpt = load_checkpoint(args.ckpt)
    image = read_raster(args.image)
    gt = read_mask(args.mask) if args.mask else None
    if args.out_diff and gt is None:
        raise CliError("usage", "--out-diff requires --mask")
    mask, diff = predict(ckpt, image, gt)
    write_mask(args.out_mask, mask)
    if diff is not None and args.out_diff:
        write_raster(args.out_diff, diff)


COMMANDS = {"synth": _cmd_synth, "train": _cmd_train, "eval": _cmd_eval, "predict": _cmd_predict}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        COMMANDS[args.command](args)
        return 0
    except CliError as exc:
        kind, msg = exc.kind, str(exc)
    except FileNotFoundError as exc:
        kind, msg = "missing_file", str(exc)
    except ConfigError as exc:
        kind, msg = "config", str(exc)
    except CheckpointError as exc:
        kind, msg = "checkpoint", str(exc)
    except (data.DatasetError, NetpbmError) as exc:
        kind, msg = "data", str(exc)
    except DivergenceError as exc:
        kind, msg = "divergence", str(exc)
    print(f"error: {kind}: {msg}".replace("\n", " "), file=sys.stderr)
    return EXIT_CODES[kind]


if __name__ == "__main__":
    sys.exit(main())
