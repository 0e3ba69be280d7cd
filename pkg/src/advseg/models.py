"""Segmentation generator and mask discriminator."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor

DISC_FILTERS = (32, 64, 128, 256)
DISC_HIDDEN = 512


def _he(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)


def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    return rng.standard_normal(shape) * np.sqrt(2.0 / (fan_in + fan_out))


class Network:
    """Ordered mapping of parameter name to tensor."""

    def __init__(self):
        self.params: dict[str, Tensor] = {}

    def _add(self, name: str, data: np.ndarray) -> Tensor:
        p = T.parameter(data, name=name)
        self.params[name] = p
        return p

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def zero_grad(self) -> None:
        T.zero_grad(self.params.values())

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def state(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(state)
        if missing:
            raise KeyError(f"state is missing parameters: {sorted(missing)}")
        for k, p in self.params.items():
            arr = np.asarray(state[k], dtype=T.DTYPE)
            if arr.shape != p.shape:
                raise ValueError(f"parameter {k}: expected shape {p.shape}, got {arr.shape}")
            p.data = arr.copy()


class Discriminator(Network):
    """Four stride-2 3x3 conv layers (32/64/128/256, ELU), then dense 512 -> ELU -> dense 1 -> sigmoid.

    No normalization layers. Input is the mask alone (1 channel) or the mask
    concatenated with the RGB image (4 channels).
    """

    def __init__(self, input_hw: tuple[int, int], in_channels: int = 1, rng_seed: int = 0):
        super().__init__()
        h, w = input_hw
        if h % 16 or w % 16:
            raise ValueError(
                f"discriminator input {h}x{w} must have height and width divisible by 16 "
                "(four stride-2 halvings)"
            )
        self.input_hw = (h, w)
        self.in_channels = in_channels
        rng = np.random.default_rng(rng_seed)
        c = in_channels
        for i, f in enumerate(DISC_FILTERS):
            self._add(f"conv{i}.w", _he(rng, (f, c, 3, 3), c * 9))
            self._add(f"conv{i}.b", np.zeros(f))
            c = f
        self.flatten_width = (h // 16) * (w // 16) * DISC_FILTERS[-1]
        self._add("fc0.w", _he(rng, (self.flatten_width, DISC_HIDDEN), self.flatten_width))
        self._add("fc0.b", np.zeros(DISC_HIDDEN))
        self._add("fc1.w", _glorot(rng, (DISC_HIDDEN, 1), DISC_HIDDEN, 1))
        self._add("fc1.b", np.zeros(1))

    def forward(self, m: Tensor) -> Tensor:
        m = T.as_tensor(m)
        expected = (self.in_channels, *self.input_hw)
        if m.data.ndim != 4 or m.shape[1:] != expected:
            raise ValueError(f"discriminator expects input (N, {expected[0]}, {expected[1]}, {expected[2]}), got {m.shape}")
        p = self.params
        h = m
        for i in range(len(DISC_FILTERS)):
            h = T.elu(T.conv2d(h, p[f"conv{i}.w"], p[f"conv{i}.b"], stride=2, padding=1))
        h = T.elu(T.dense(T.flatten(h), p["fc0.w"], p["fc0.b"]))
        return T.sigmoid(T.dense(h, p["fc1.w"], p["fc1.b"]))

    __call__ = forward


class Generator(Network):
    """Encoder-decoder producing a 1-channel building-probability map.

    Encoder: ``depth`` blocks of stride-2 3x3 conv + ELU, widths doubling from
    ``base_width``. Decoder: per level, nearest-neighbour x2 upsample, 3x3 conv
    + ELU (optionally fed the matching encoder activation by channel concat).
    Head: 3x3 conv to one channel + sigmoid.
    """

    def __init__(
        self,
        input_hw: tuple[int, int],
        in_channels: int = 3,
        depth: int = 3,
        base_width: int = 16,
        rng_seed: int = 0,
        skips: bool = False,
    ):
        super().__init__()
        h, w = input_hw
        k = 2**depth
        if depth < 0 or h % k or w % k:
            raise ValueError(f"generator input {h}x{w} must be divisible by 2**depth = {k}")
        self.input_hw = (h, w)
        self.in_channels = in_channels
        self.depth = depth
        self.base_width = base_width
        self.skips = skips
        rng = np.random.default_rng(rng_seed)

        widths = [base_width * 2**i for i in range(depth)]
        c = in_channels
        for i, f in enumerate(widths):
            self._add(f"enc{i}.w", _he(rng, (f, c, 3, 3), c * 9))
            self._add(f"enc{i}.b", np.zeros(f))
            c = f
        # decoder level i restores the resolution of encoder input i
        for i in reversed(range(depth)):
            out_c = widths[i - 1] if i > 0 else base_width
            in_c = c + (widths[i - 1] if skips and i > 0 else in_channels if skips else 0)
            self._add(f"dec{i}.w", _he(rng, (out_c, in_c, 3, 3), in_c * 9))
            self._add(f"dec{i}.b", np.zeros(out_c))
            c = out_c
        self._add("head.w", _glorot(rng, (1, c, 3, 3), c * 9, 9))
        self._add("head.b", np.zeros(1))

    @property
    def bottleneck_hw(self) -> tuple[int, int]:
        k = 2**self.depth
        return self.input_hw[0] // k, self.input_hw[1] // k

    def forward(self, x: Tensor) -> Tensor:
        x = T.as_tensor(x)
        if x.data.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValueError(f"generator expects input (N, {self.in_channels}, H, W), got {x.shape}")
        k = 2**self.depth
        if x.shape[2] % k or x.shape[3] % k:
            raise ValueError(f"generator input {x.shape[2]}x{x.shape[3]} must be divisible by {k}")
        p = self.params
        feats = [x]
        h = x
        for i in range(self.depth):
            h = T.elu(T.conv2d(h, p[f"enc{i}.w"], p[f"enc{i}.b"], stride=2, padding=1))
            feats.append(h)
        for i in reversed(range(self.depth)):
            h = T.upsample_nn(h, 2)
            if self.skips:
                h = T.concat([h, feats[i]], axis=1)
            h = T.elu(T.conv2d(h, p[f"dec{i}.w"], p[f"dec{i}.b"], stride=1, padding=1))
        return T.sigmoid(T.conv2d(h, p["head.w"], p["head.b"], stride=1, padding=1))

    __call__ = forward


def build_discriminator(input_hw, in_channels: int = 1, rng_seed: int = 0) -> Discriminator:
    return Discriminator(tuple(input_hw), in_channels=in_channels, rng_seed=rng_seed)


def build_generator(
    input_hw, in_channels: int = 3, depth: int = 3, base_width: int = 16, rng_seed: int = 0, skips: bool = False
) -> Generator:
    return Generator(
        tuple(input_hw), in_channels=in_channels, depth=depth, base_width=base_width, rng_seed=rng_seed, skips=skips
    )


def generator_forward(g: Generator, x) -> Tensor:
    return g.forward(x)


def discriminator_forward(d: Discriminator, m) -> Tensor:
    return d.forward(m)
