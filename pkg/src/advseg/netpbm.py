"""Binary PGM (P5) / PPM (P6) reading and writing, maxval 255 only."""

from __future__ import annotations

import os

import numpy as np

MASK_THRESHOLD = 128


class NetpbmError(ValueError):
    pass


class MalformedHeaderError(NetpbmError):
    pass


class TruncatedPayloadError(NetpbmError):
    pass


class UnsupportedMaxvalError(NetpbmError):
    pass


def _header_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    """Pull ``count`` whitespace-separated tokens, skipping ``#`` comments.

    Returns the tokens and the offset of the first payload byte, which follows
    exactly one whitespace character after the last token.
    """
    tokens = []
    i, n = 0, len(buf)
    while len(tokens) < count:
        while i < n and buf[i : i + 1].isspace():
            i += 1
        if i < n and buf[i : i + 1] == b"#":
            while i < n and buf[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not buf[i : i + 1].isspace() and buf[i : i + 1] != b"#":
            i += 1
        if start == i:
            raise MalformedHeaderError(f"header ended after {len(tokens)} of {count} fields")
        tokens.append(buf[start:i])
    if i >= n or not buf[i : i + 1].isspace():
        raise MalformedHeaderError("missing whitespace between header and payload")
    return tokens, i + 1


def decode(buf: bytes) -> np.ndarray:
    """Decode P5/P6 bytes to uint8 ``(H, W)`` or ``(H, W, 3)``."""
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise MalformedHeaderError(f"unsupported magic {magic!r}; expected P5 or P6")
    tokens, offset = _header_tokens(buf, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise MalformedHeaderError(f"non-integer header fields {tokens[1:]!r}") from None
    if width <= 0 or height <= 0:
        raise MalformedHeaderError(f"invalid dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxvalError(f"maxval {maxval} not supported (only 255)")
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    payload = buf[offset : offset + need]
    if len(payload) < need:
        raise TruncatedPayloadError(f"truncated payload: {len(payload)} bytes, expected {need}")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return arr[:, :, 0].copy() if channels == 1 else arr.copy()


def encode(image: np.ndarray) -> bytes:
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise ValueError(f"expected uint8 samples, got {image.dtype}")
    if image.ndim == 2:
        magic = b"P5"
    elif image.ndim == 3 and image.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"expected (H, W) or (H, W, 3) image, got {image.shape}")
    h, w = image.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode() + np.ascontiguousarray(image).tobytes()


def read_raster(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    try:
        return decode(blob)
    except NetpbmError as exc:
        raise type(exc)(f"{os.fspath(path)}: {exc}") from None


def write_raster(path: str | os.PathLike, image: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(image))


def read_mask(path: str | os.PathLike) -> np.ndarray:
    img = read_raster(path)
    if img.ndim != 2:
        raise NetpbmError(f"{path}: masks must be single-channel PGM")
    return (img >= MASK_THRESHOLD).astype(np.uint8)


def write_mask(path: str | os.PathLike, mask: np.ndarray) -> None:
    write_raster(path, np.where(np.asarray(mask) > 0, 255, 0).astype(np.uint8))
