"""Datasets, tiling, dihedral augmentation, and synthetic building scenes."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .netpbm import read_mask, read_raster, write_mask, write_raster

SPLITS = ("train", "val", "test")
AUGMENTATIONS = ("identity", "flip_lr", "flip_td", "rot90", "rot180", "rot270")
IMAGE_SUFFIXES = (".ppm", ".pgm")
MASK_SUFFIX = ".pgm"


class DatasetError(ValueError):
    pass


@dataclass
class Sample:
    """One RGB raster (uint8, H x W x 3) with its binary building mask (uint8, H x W)."""

    image: np.ndarray
    mask: np.ndarray
    name: str = ""
    boxes: tuple[tuple[int, int, int, int], ...] = ()  # (row, col, height, width) when synthetic

    def __post_init__(self):
        if self.image.shape[:2] != self.mask.shape:
            raise DatasetError(
                f"{self.name or 'sample'}: image {self.image.shape[1]}x{self.image.shape[0]} "
                f"does not match mask {self.mask.shape[1]}x{self.mask.shape[0]}"
            )
        if self.mask.size and not np.isin(self.mask, (0, 1)).all():
            raise DatasetError(f"{self.name or 'sample'}: mask is not strictly binary")


@dataclass
class Dataset:
    samples: list[Sample] = field(default_factory=list)
    split: str = "train"

    def __post_init__(self):
        if self.split not in SPLITS:
            raise DatasetError(f"unknown split {self.split!r}; expected one of {SPLITS}")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def __getitem__(self, i: int) -> Sample:
        return self.samples[i]


# ------------------------------------------------------------------- tiling


def tile(image: np.ndarray, mask: np.ndarray, patch: int = 300) -> list[tuple[np.ndarray, np.ndarray]]:
    """Non-overlapping ``patch`` x ``patch`` tiles in row-major order from (0, 0).

    Trailing rows/columns that do not fill a whole tile are dropped.
    """
    h, w = mask.shape
    if image.shape[:2] != (h, w):
        raise DatasetError(f"image {image.shape[:2]} and mask {mask.shape} differ in size")
    if patch < 1 or patch > min(h, w):
        raise DatasetError(f"patch size {patch} does not fit a {w}x{h} image")
    out = []
    for r in range(0, h - patch + 1, patch):
        for c in range(0, w - patch + 1, patch):
            out.append((image[r : r + patch, c : c + patch], mask[r : r + patch, c : c + patch]))
    return out


# ------------------------------------------------------------- augmentation


def _transform(a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return a
    if kind == "flip_lr":
        return a[:, ::-1]
    if kind == "flip_td":
        return a[::-1]
    if kind == "rot90":
        return np.rot90(a, 1, axes=(0, 1))
    if kind == "rot180":
        return np.rot90(a, 2, axes=(0, 1))
    if kind == "rot270":
        return np.rot90(a, 3, axes=(0, 1))
    raise ValueError(f"unknown augmentation {kind!r}")


def transform(a: np.ndarray, kind: str) -> np.ndarray:
    """Apply one of :data:`AUGMENTATIONS` to the two leading (spatial) axes."""
    return np.ascontiguousarray(_transform(a, kind))


def augment(image: np.ndarray, mask: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """The six variants in :data:`AUGMENTATIONS` order, image and mask transformed alike."""
    if mask.shape[0] != mask.shape[1]:
        raise DatasetError(f"rotations need square patches, got {mask.shape[1]}x{mask.shape[0]}")
    return [(transform(image, k), transform(mask, k)) for k in AUGMENTATIONS]


def training_patches(dataset: Dataset, patch: int, augmented: bool = True) -> list[tuple[np.ndarray, np.ndarray]]:
    """Tile every sample and, optionally, expand each tile into its 6 variants."""
    out = []
    for s in dataset:
        for img, m in tile(s.image, s.mask, patch):
            out.extend(augment(img, m) if augmented else [(img, m)])
    return out


def to_arrays(patches) -> tuple[np.ndarray, np.ndarray]:
    """Stack (image, mask) pairs into float64 NCHW arrays, images scaled to [0, 1]."""
    x = np.stack([img for img, _ in patches]).astype(np.float64) / 255.0
    if x.ndim == 3:
        x = x[:, None]
    else:
        x = x.transpose(0, 3, 1, 2)
    y = np.stack([m for _, m in patches]).astype(np.float64)[:, None]
    return np.ascontiguousarray(x), y


# --------------------------------------------------------------- synthesis


@dataclass
class SynthConfig:
    size: int = 64
    count: int = 8
    buildings: tuple[int, int] = (2, 6)
    building_size: tuple[int, int] = (6, 20)
    noise: float = 30.0
    background: tuple[int, int, int] = (90, 110, 75)
    building: tuple[int, int, int] = (190, 180, 170)
    seed: int = 0
    divisor: int = 8

    def validate(self) -> None:
        if self.size < 1 or self.size % self.divisor:
            raise DatasetError(f"canvas size {self.size} must be a positive multiple of {self.divisor}")
        lo, hi = self.buildings
        if lo < 0 or hi < lo:
            raise DatasetError(f"invalid building count range {self.buildings}")
        smin, smax = self.building_size
        if smin < 1 or smax < smin:
            raise DatasetError(f"invalid building size range {self.building_size}")
        if smax > self.size:
            raise DatasetError(f"building size {smax} exceeds canvas size {self.size}")


def synth_sample(rng: np.random.Generator, cfg: SynthConfig, name: str = "") -> Sample:
    s = cfg.size
    noise = rng.uniform(-cfg.noise, cfg.noise, size=(s, s, 3))
    image = np.asarray(cfg.background, dtype=np.float64) + noise
    mask = np.zeros((s, s), dtype=np.uint8)
    boxes = []
    for _ in range(rng.integers(cfg.buildings[0], cfg.buildings[1] + 1)):
        bh, bw = rng.integers(cfg.building_size[0], cfg.building_size[1] + 1, size=2)
        r = int(rng.integers(0, s - bh + 1))
        c = int(rng.integers(0, s - bw + 1))
        boxes.append((r, c, int(bh), int(bw)))
        image[r : r + bh, c : c + bw] = np.asarray(cfg.building, dtype=np.float64) + noise[r : r + bh, c : c + bw]
        mask[r : r + bh, c : c + bw] = 1
    image = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    return Sample(image=image, mask=mask, name=name, boxes=tuple(boxes))


def synth_dataset(cfg: SynthConfig, split: str = "train") -> Dataset:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    return Dataset([synth_sample(rng, cfg, f"synth_{i:04d}") for i in range(cfg.count)], split)


# ----------------------------------------------------------------- disk I/O


def ingest_directory(image_dir: str | os.PathLike, mask_dir: str | os.PathLike, split: str = "train") -> Dataset:
    """Pair ``image_dir/<stem>.ppm`` with ``mask_dir/<stem>.pgm``, sorted by stem."""
    image_dir, mask_dir = Path(image_dir), Path(mask_dir)
    for d in (image_dir, mask_dir):
        if not d.is_dir():
            raise FileNotFoundError(f"no such directory: {d}")
    images = {p.stem: p for p in image_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES}
    masks = {p.stem: p for p in mask_dir.iterdir() if p.suffix.lower() == MASK_SUFFIX}
    for stem in sorted(set(images) ^ set(masks)):
        orphan = images.get(stem) or masks.get(stem)
        raise DatasetError(f"unmatched file {orphan}: no counterpart with stem {stem!r}")
    samples = []
    for stem in sorted(images):
        img = read_raster(images[stem])
        if img.ndim == 2:
            img = np.repeat(img[:, :, None], 3, axis=2)
        m = read_mask(masks[stem])
        if img.shape[:2] != m.shape:
            raise DatasetError(
                f"{images[stem].name}: image is {img.shape[1]}x{img.shape[0]} "
                f"but mask {masks[stem].name} is {m.shape[1]}x{m.shape[0]}"
            )
        samples.append(Sample(img, m, name=stem))
    return Dataset(samples, split)


def write_dataset(dataset: Dataset, root: str | os.PathLike) -> Path:
    """Write ``root/images/<name>.ppm`` and ``root/masks/<name>.pgm``."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    for i, s in enumerate(dataset):
        name = s.name or f"sample_{i:04d}"
        write_raster(root / "images" / f"{name}.ppm", s.image)
        write_mask(root / "masks" / f"{name}.pgm", s.mask)
    return root


def load_dataset(root: str | os.PathLike, split: str = "train") -> Dataset:
    root = Path(root)
    return ingest_directory(root / "images", root / "masks", split)
