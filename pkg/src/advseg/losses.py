"""Cross-entropy, adversarial, and combined segmentation losses.

Sign convention: every loss here is minimized. The discriminator loss is the
negated adversarial objective (the discriminator maximizes
``E[log D(y)] + E[log(1 - D(G(x)))]``). Expectations are batch means and all
log arguments are clamped to ``[PROB_EPS, 1 - PROB_EPS]``.
"""

from __future__ import annotations

from typing import NamedTuple

from . import tensor as T
from .tensor import Tensor

PROB_EPS = 1e-7
KINDS = ("ce", "adv_g", "adv_d", "combined")
ADV_MODES = ("saturating", "nonsaturating")


class LossValue(NamedTuple):
    tensor: Tensor
    kind: str

    @property
    def value(self) -> float:
        return self.tensor.item()


def _safe_log(p: Tensor) -> Tensor:
    return T.log(T.clamp(p, PROB_EPS, 1.0 - PROB_EPS))


def _check_same(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def bce_loss(y_hat: Tensor, y) -> LossValue:
    """Mean per-pixel binary cross-entropy ``-[y log p + (1-y) log(1-p)]``.

    Both terms carry the minus sign. A variant that negates only the first
    term is sometimes printed; it is not a valid log-loss and is not used.
    """
    y = T.as_tensor(y)
    _check_same(y_hat, y, "bce_loss")
    pos = y * _safe_log(y_hat)
    neg = (1.0 - y) * _safe_log(1.0 - y_hat)
    return LossValue(-T.mean(pos + neg), "ce")


def adv_loss_d(p_real: Tensor, p_fake: Tensor) -> LossValue:
    """``-mean log p_real - mean log(1 - p_fake)``.

    Callers pass discriminator outputs on detached generator samples so the
    gradient reaches only the discriminator.
    """
    p_real, p_fake = T.as_tensor(p_real), T.as_tensor(p_fake)
    loss = -T.mean(_safe_log(p_real)) - T.mean(_safe_log(1.0 - p_fake))
    return LossValue(loss, "adv_d")


def adv_loss_g(p_fake: Tensor, mode: str = "saturating") -> LossValue:
    if mode == "saturating":
        loss = T.mean(_safe_log(1.0 - p_fake))
    elif mode == "nonsaturating":
        loss = -T.mean(_safe_log(p_fake))
    else:
        raise ValueError(f"unknown adversarial mode {mode!r}; expected one of {ADV_MODES}")
    return LossValue(loss, "adv_g")


def combined_g_loss(ce: LossValue, adv: LossValue, adv_weight: float = 1.0) -> LossValue:
    return LossValue(ce.tensor + adv_weight * adv.tensor, "combined")
