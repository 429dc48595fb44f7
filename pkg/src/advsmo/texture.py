"""Gray-level co-occurrence extraction and the scalar texture-change measure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from advsmo.errors import DimensionMismatchError, InvalidLevelsError, InvalidOffsetError
from advsmo.image_core import Channel

DEFAULT_OFFSET = (1, 0)  # (dx, dy): horizontal unit displacement
DEFAULT_LEVELS = 8


@dataclass(frozen=True, eq=False)
class GlcmMatrix:
    levels: int
    offset: tuple[int, int]
    counts: np.ndarray       # (levels, levels) int64, ordered pairs, not symmetrized
    normalized: np.ndarray   # (levels, levels) float64, sums to 1 when counts do not vanish

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def quantize_levels(ch: Channel, levels: int) -> np.ndarray:
    """floor(v * levels) clamped to levels - 1, as int64."""
    q = np.floor(ch.values * levels).astype(np.int64)
    return np.minimum(q, levels - 1)


def glcm(ch: Channel, offset: tuple[int, int] = DEFAULT_OFFSET,
         levels: int = DEFAULT_LEVELS) -> GlcmMatrix:
    """Count ordered quantized pairs (p, p + offset) that fall inside the channel."""
    dx, dy = int(offset[0]), int(offset[1])
    if not (2 <= levels <= 256):
        raise InvalidLevelsError(f"levels must be in [2, 256], got {levels}")
    if abs(dx) >= ch.width or abs(dy) >= ch.height:
        raise InvalidOffsetError(
            f"offset ({dx}, {dy}) does not fit a {ch.width}x{ch.height} channel")
    q = quantize_levels(ch, levels)
    y0, y1 = max(0, -dy), ch.height - max(0, dy)
    x0, x1 = max(0, -dx), ch.width - max(0, dx)
    src = q[y0:y1, x0:x1]
    dst = q[y0 + dy:y1 + dy, x0 + dx:x1 + dx]
    flat = src.ravel() * levels + dst.ravel()
    counts = np.bincount(flat, minlength=levels * levels).reshape(levels, levels)
    total = counts.sum()
    normalized = counts / total if total > 0 else np.zeros_like(counts, dtype=np.float64)
    return GlcmMatrix(levels=levels, offset=(dx, dy), counts=counts,
                      normalized=normalized.astype(np.float64))


def texture_diff(benign: Channel, adv: Channel, offset: tuple[int, int] = DEFAULT_OFFSET,
                 levels: int = DEFAULT_LEVELS) -> float:
    """L1 distance between normalized co-occurrence matrices; 0 iff identical,
    at most 2 (disjoint supports)."""
    if (benign.width, benign.height) != (adv.width, adv.height):
        raise DimensionMismatchError(
            f"{benign.width}x{benign.height} vs {adv.width}x{adv.height}")
    ga = glcm(benign, offset, levels)
    gb = glcm(adv, offset, levels)
    return float(np.abs(ga.normalized - gb.normalized).sum())


def texture_diff_map(benign: Channel, adv: Channel, tile: int = 8, stride: int = 4,
                     offset: tuple[int, int] = DEFAULT_OFFSET,
                     levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Per-tile texture change over a sliding tile grid, for heatmap export.

    Returns an (ny, nx) array of texture_diff values in [0, 2]. Tiles smaller
    than the offset are skipped as zero.
    """
    if tile < 2 or stride < 1:
        raise ValueError("tile must be >= 2 and stride >= 1")
    ys = range(0, max(benign.height - tile, 0) + 1, stride)
    xs = range(0, max(benign.width - tile, 0) + 1, stride)
    out = np.zeros((len(ys), len(xs)), dtype=np.float64)
    for i, y in enumerate(ys):
        for j, x in enumerate(xs):
            ta = Channel.from_array(benign.values[y:y + tile, x:x + tile])
            tb = Channel.from_array(adv.values[y:y + tile, x:x + tile])
            if abs(offset[0]) >= ta.width or abs(offset[1]) >= ta.height:
                continue
            out[i, j] = texture_diff(ta, tb, offset, levels)
    return out
