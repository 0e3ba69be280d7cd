"""Adversarial + cross-entropy training loop, evaluation and prediction."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import metrics
from . import tensor as T
from .checkpoint import Checkpoint, build_networks
from .config import TrainConfig
from .data import Dataset, DatasetError, tile, to_arrays, training_patches
from .losses import adv_loss_d, adv_loss_g, bce_loss, combined_g_loss
from .models import Discriminator, Generator
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)

# TP white, TN black, FP blue, FN red
DIFF_COLORS = {
    "tp": (255, 255, 255),
    "tn": (0, 0, 0),
    "fp": (0, 0, 255),
    "fn": (255, 0, 0),
}


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, batch: int, what: str):
        super().__init__(f"non-finite {what} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass
class EpochLog:
    epoch: int
    ce: float
    adv_g: float | None = None
    d_loss: float | None = None
    d_real: float | None = None
    d_fake: float | None = None
    val: metrics.MetricReport | None = None

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("epoch", "ce", "adv_g", "d_loss", "d_real", "d_fake")}
        d["val"] = None if self.val is None else self.val.to_dict()
        return d


def _disc_input(cfg: TrainConfig, mask: np.ndarray | T.Tensor, x: np.ndarray) -> T.Tensor:
    if cfg.d_input == "mask":
        return T.as_tensor(mask)
    return T.concat([T.as_tensor(mask), T.Tensor(x)], axis=1)


def generator_step(
    cfg: TrainConfig,
    gen: Generator,
    disc: Discriminator | None,
    g_opt: AdamState,
    x: np.ndarray,
    y: np.ndarray,
) -> tuple[dict, np.ndarray]:
    """Forward G, build the (combined) loss, update G. Returns stats and the detached prediction."""
    gen.zero_grad()
    y_hat = gen(T.Tensor(x))
    ce = bce_loss(y_hat, y)
    stats = {"ce": ce.value}
    loss = ce
    if disc is not None:
        # D's weights are constants here; only d(loss)/d(y_hat) is needed
        with T.frozen(disc.parameters()):
            p_fake = disc(_disc_input(cfg, y_hat, x))
        adv = adv_loss_g(p_fake, cfg.adv_mode)
        stats["adv_g"] = adv.value
        loss = combined_g_loss(ce, adv, cfg.adv_weight)
    stats["loss"] = loss.value
    if not np.isfinite(loss.value):
        return stats, y_hat.data
    T.backward(loss.tensor)
    adam_step(g_opt, gen.parameters())
    return stats, y_hat.data


def discriminator_step(
    cfg: TrainConfig, disc: Discriminator, d_opt: AdamState, x: np.ndarray, y: np.ndarray, y_hat: np.ndarray
) -> dict:
    disc.zero_grad()
    p_real = disc(_disc_input(cfg, y, x))
    p_fake = disc(_disc_input(cfg, y_hat, x))
    loss = adv_loss_d(p_real, p_fake)
    stats = {"d_loss": loss.value, "d_real": float(p_real.data.mean()), "d_fake": float(p_fake.data.mean())}
    if np.isfinite(loss.value):
        T.backward(loss.tensor)
        adam_step(d_opt, disc.parameters())
    return stats


def train(
    cfg: TrainConfig,
    dataset: Dataset,
    val: Dataset | None = None,
    on_batch: Callable[[int, int, dict], None] | None = None,
    on_epoch: Callable[[EpochLog], None] | None = None,
) -> tuple[Checkpoint, list[EpochLog]]:
    """Train G (and D when ``cfg.adversarial``) over the augmented patches of ``dataset``.

    Per batch: G is updated on the combined loss, then D is updated
    ``cfg.d_to_g_ratio`` times on real masks vs. the batch's detached
    predictions.
    """
    cfg.validate()
    if len(dataset) == 0:
        raise DatasetError("empty dataset")
    patches = training_patches(dataset, cfg.patch, augmented=cfg.augment)
    X, Y = to_arrays(patches)
    gen, disc = build_networks(cfg)
    g_opt = AdamState.for_params(gen.parameters(), cfg.g_lr, cfg.g_beta1, cfg.g_beta2)
    d_opt = AdamState.for_params(disc.parameters(), cfg.d_lr, cfg.d_beta1, cfg.d_beta2) if disc else None
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(3)[2])

    logs = []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(X))
        acc: dict[str, list[float]] = {}
        for b, start in enumerate(range(0, len(X), cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            x, y = X[idx], Y[idx]
            stats, y_hat = generator_step(cfg, gen, disc, g_opt, x, y)
            if not np.isfinite(stats["loss"]):
                raise DivergenceError(epoch, b, "generator loss")
            if disc is not None:
                for _ in range(cfg.d_to_g_ratio):
                    d_stats = discriminator_step(cfg, disc, d_opt, x, y, y_hat)
                    if not np.isfinite(d_stats["d_loss"]):
                        raise DivergenceError(epoch, b, "discriminator loss")
                stats.update(d_stats)
            for k, v in stats.items():
                acc.setdefault(k, []).append(v)
            if on_batch is not None:
                on_batch(epoch, b, stats)

        def avg(k):
            return float(np.mean(acc[k])) if k in acc else None

        entry = EpochLog(epoch, avg("ce"), avg("adv_g"), avg("d_loss"), avg("d_real"), avg("d_fake"))
        if val is not None and len(val):
            entry.val = evaluate_networks(gen, cfg, val)
        logs.append(entry)
        log.info("epoch %d ce=%.5f adv_g=%s d_loss=%s", epoch, entry.ce, entry.adv_g, entry.d_loss)
        if on_epoch is not None:
            on_epoch(entry)

    return Checkpoint(cfg, gen, disc, g_opt, d_opt, epoch=cfg.epochs), logs


# ------------------------------------------------------------------ inference


def predict_proba(gen: Generator, image: np.ndarray, batch: int = 8) -> np.ndarray:
    """Probability maps for a uint8 image (H, W, 3) or a stack (N, H, W, 3)."""
    single = image.ndim == 3
    stack = image[None] if single else image
    x = np.ascontiguousarray(stack.astype(np.float64).transpose(0, 3, 1, 2) / 255.0)
    out = []
    with T.no_grad():
        for i in range(0, len(x), batch):
            out.append(gen(T.Tensor(x[i : i + batch])).data[:, 0])
    probs = np.concatenate(out)
    return probs[0] if single else probs


def evaluate_networks(gen: Generator, cfg: TrainConfig, dataset: Dataset, params: metrics.RelaxedParams | None = None):
    if len(dataset) == 0:
        raise DatasetError("empty dataset")
    params = params or metrics.RelaxedParams(cfg.rho, cfg.distance)
    reports = []
    for s in dataset:
        try:
            tiles = tile(s.image, s.mask, cfg.patch)
        except DatasetError as exc:
            raise DatasetError(f"sample {s.name!r}: {exc}") from None
        probs = predict_proba(gen, np.stack([img for img, _ in tiles]))
        for p, (_, m) in zip(probs, tiles):
            reports.append(metrics.evaluate_pair(metrics.binarize(p, cfg.threshold), m, params))
    return metrics.aggregate(reports)


def evaluate(ckpt: Checkpoint, dataset: Dataset, params: metrics.RelaxedParams | None = None) -> metrics.MetricReport:
    """Tile, predict, binarize, and aggregate counts over every tile of ``dataset``."""
    return evaluate_networks(ckpt.generator, ckpt.config, dataset, params)


def render_diff(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    p = np.asarray(pred).astype(bool)
    g = np.asarray(gt).astype(bool)
    if p.shape != g.shape:
        raise ValueError(f"prediction {p.shape} and ground truth {g.shape} differ in size")
    out = np.zeros(p.shape + (3,), dtype=np.uint8)
    out[p & g] = DIFF_COLORS["tp"]
    out[~p & ~g] = DIFF_COLORS["tn"]
    out[p & ~g] = DIFF_COLORS["fp"]
    out[~p & g] = DIFF_COLORS["fn"]
    return out


def diff_histogram(diff: np.ndarray) -> metrics.ConfusionCounts:
    """Count diff pixels by color; inverse of :func:`render_diff`."""
    flat = diff.reshape(-1, 3)
    counts = {k: int(np.all(flat == np.array(c, dtype=np.uint8), axis=1).sum()) for k, c in DIFF_COLORS.items()}
    return metrics.ConfusionCounts(**counts)


def predict(ckpt: Checkpoint, image: np.ndarray, gt: np.ndarray | None = None):
    """Binary mask for ``image`` and, when ``gt`` is given, the colorized diff."""
    if image.ndim == 2:
        image = np.repeat(image[:, :, None], 3, axis=2)
    k = 2**ckpt.config.depth
    h, w = image.shape[:2]
    if h % k or w % k:
        raise DatasetError(f"image {w}x{h} must be divisible by {k} for this generator")
    mask = metrics.binarize(predict_proba(ckpt.generator, image), ckpt.config.threshold)
    diff = None if gt is None else render_diff(mask, gt)
    return mask, diff
