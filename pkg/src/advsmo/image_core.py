"""Canonical image representation and lossless 8-bit PNG I/O.

Pixels live in [0, 1] as float64. The L-infinity metric reports on the
0-255 scale and MSE on the unit scale; see `metrics`. Images are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from advsmo.errors import CorruptImageError, UnsupportedBitDepthError

MIN_SIDE = 8  # smallest side the windowed SSIM can handle

# Rec. 601 luma coefficients (sum to 1, so luma stays in [0, 1])
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Image:
    """An 8x8-or-larger raster with 1 or 3 channels, values in [0, 1]."""

    width: int
    height: int
    channels: int
    pixels: np.ndarray  # shape (height, width, channels), float64, read-only

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if self.width < MIN_SIDE or self.height < MIN_SIDE:
            raise ValueError(f"image must be at least {MIN_SIDE}x{MIN_SIDE}, "
                             f"got {self.width}x{self.height}")
        if self.pixels.shape != (self.height, self.width, self.channels):
            raise ValueError(f"pixel array shape {self.pixels.shape} does not match "
                             f"{self.height}x{self.width}x{self.channels}")
        if not np.isfinite(self.pixels).all():
            raise ValueError("pixel values must be finite")
        if self.pixels.min() < 0.0 or self.pixels.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        object.__setattr__(self, "pixels", _frozen(self.pixels))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Image":
        """Build an Image from an (H, W) or (H, W, C) float array in [0, 1]."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"expected 2-D or 3-D array, got {arr.ndim}-D")
        h, w, c = arr.shape
        return cls(width=w, height=h, channels=c, pixels=arr)

    def plane(self, i: int) -> np.ndarray:
        """Read-only (H, W) view of channel i."""
        return self.pixels[:, :, i]

    def same_shape(self, other: "Image") -> bool:
        return (self.width, self.height, self.channels) == \
            (other.width, other.height, other.channels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return self.same_shape(other) and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True, eq=False)
class Channel:
    """A single plane in [0, 1]; no minimum size (co-occurrence tests use tiny ones)."""

    width: int
    height: int
    values: np.ndarray  # shape (height, width), float64, read-only

    def __post_init__(self):
        if self.values.shape != (self.height, self.width):
            raise ValueError(f"value array shape {self.values.shape} does not match "
                             f"{self.height}x{self.width}")
        if not np.isfinite(self.values).all():
            raise ValueError("values must be finite")
        if self.values.size and (self.values.min() < 0.0 or self.values.max() > 1.0):
            raise ValueError("values must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(self.values))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Channel":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected 2-D array, got {arr.ndim}-D")
        h, w = arr.shape
        return cls(width=w, height=h, values=arr)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Channel):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and \
            np.array_equal(self.values, other.values)


def load_image(path: str | os.PathLike) -> Image:
    """Load an 8-bit grayscale or RGB PNG; v_8bit maps to v_8bit / 255 exactly.

    An alpha channel is dropped. Raises FileNotFoundError for missing files,
    UnsupportedBitDepthError for non-8-bit input, CorruptImageError for
    undecodable files.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such image file: {path}")
    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("I", "I;16", "I;16B", "I;16L", "I;16N", "F"):
                raise UnsupportedBitDepthError(
                    f"{path}: only 8-bit PNGs are supported (mode {mode})")
            if mode == "LA":
                im = im.convert("L")
            elif mode in ("RGBA", "P"):
                # palette may carry transparency; resolve then drop alpha
                im = im.convert("RGBA").convert("RGB")
            elif mode not in ("L", "RGB"):
                raise UnsupportedBitDepthError(f"{path}: unsupported PNG mode {mode}")
            arr = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise CorruptImageError(f"{path}: not a decodable image") from exc
    except (OSError, SyntaxError) as exc:
        raise CorruptImageError(f"{path}: truncated or corrupt image") from exc
    return Image.from_array(arr.astype(np.float64) / 255.0)


def save_image(img: Image, path: str | os.PathLike) -> None:
    """Write an 8-bit PNG; value v stores as round(v * 255) half away from zero."""
    data = quantize_u8(img)
    if img.channels == 1:
        pil = PILImage.fromarray(data[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(data, mode="RGB")
    pil.save(path, format="PNG")


def quantize_u8(img: Image) -> np.ndarray:
    """8-bit quantization of the pixel raster, same rule as save_image."""
    # np.floor(v*255 + 0.5) rounds half up; ties like 0.5*255=127.5 -> 128
    return np.clip(np.floor(img.pixels * 255.0 + 0.5), 0, 255).astype(np.uint8)


def quantized(img: Image) -> Image:
    """The image as it survives a save/load round trip, without touching disk."""
    return Image.from_array(quantize_u8(img).astype(np.float64) / 255.0)


def to_luma(img: Image) -> Channel:
    """Rec. 601 luma plane; the identity copy for single-channel input."""
    if img.channels == 1:
        return Channel.from_array(img.pixels[:, :, 0])
    luma = img.pixels @ _LUMA
    # convex combination of in-range values; clip only guards float dust
    return Channel.from_array(np.clip(luma, 0.0, 1.0))
