"""The three perceptibility distances the constraint system filters on.

SSIM and MSE report on the unit pixel scale, L-infinity on the 0-255 scale;
the shipped thresholds assume exactly these scales.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from advsmo.errors import DimensionMismatchError, ImageTooSmallError
from advsmo.image_core import Image, to_luma

SSIM_WINDOW = 8
_C1 = 0.01 ** 2
_C2 = 0.03 ** 2


class MetricKind(Enum):
    SSIM = "ssim"
    MSE = "mse"
    LINF = "linf"


_SCALE = {MetricKind.SSIM: "unit", MetricKind.MSE: "unit", MetricKind.LINF: "0-255"}


@dataclass(frozen=True)
class MetricValue:
    kind: MetricKind
    value: float

    @property
    def scale(self) -> str:
        return _SCALE[self.kind]


def _require_same_shape(a: Image, b: Image) -> None:
    if not a.same_shape(b):
        raise DimensionMismatchError(
            f"{a.width}x{a.height}x{a.channels} vs {b.width}x{b.height}x{b.channels}")


def ssim(a: Image, b: Image) -> MetricValue:
    """Mean structural similarity over all 8x8 uniform windows of the luma planes.

    Per-window value ((2 mu_a mu_b + C1)(2 cov + C2)) /
    ((mu_a^2 + mu_b^2 + C1)(var_a + var_b + C2)) with C1 = 0.01^2, C2 = 0.03^2
    on the unit scale and population moments. Stride 1, fixed row-major order.
    """
    _require_same_shape(a, b)
    if a.width < SSIM_WINDOW or a.height < SSIM_WINDOW:
        raise ImageTooSmallError(
            f"need at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.width}x{a.height}")
    xa = to_luma(a).values
    xb = to_luma(b).values
    wa = sliding_window_view(xa, (SSIM_WINDOW, SSIM_WINDOW))
    wb = sliding_window_view(xb, (SSIM_WINDOW, SSIM_WINDOW))
    mu_a = wa.mean(axis=(2, 3))
    mu_b = wb.mean(axis=(2, 3))
    var_a = (wa * wa).mean(axis=(2, 3)) - mu_a * mu_a
    var_b = (wb * wb).mean(axis=(2, 3)) - mu_b * mu_b
    cov = (wa * wb).mean(axis=(2, 3)) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + _C1) * (2.0 * cov + _C2)
    den = (mu_a * mu_a + mu_b * mu_b + _C1) * (var_a + var_b + _C2)
    return MetricValue(MetricKind.SSIM, float((num / den).mean()))


def mse(a: Image, b: Image) -> MetricValue:
    """Mean squared difference over all pixels and channels, unit scale."""
    _require_same_shape(a, b)
    d = a.pixels - b.pixels
    return MetricValue(MetricKind.MSE, float((d * d).mean()))


def linf(a: Image, b: Image) -> MetricValue:
    """Maximum absolute difference over all pixels and channels, 0-255 scale."""
    _require_same_shape(a, b)
    return MetricValue(MetricKind.LINF, float(np.abs(a.pixels - b.pixels).max() * 255.0))


def compute(kind: MetricKind, a: Image, b: Image) -> MetricValue:
    if kind is MetricKind.SSIM:
        return ssim(a, b)
    if kind is MetricKind.MSE:
        return mse(a, b)
    return linf(a, b)
