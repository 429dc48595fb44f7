"""Oriented Gabor kernels and the texture-smoothing operation built on them.

A kernel is the real part of an oriented complex sinusoid under a Gaussian
envelope, sampled on an odd square grid and normalized to DC gain 1 so that
constant images are fixed points: smoothing removes structure, never shifts
brightness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from advsmo.errors import DegenerateKernelError, DimensionMismatchError, KernelTooLargeError
from advsmo.image_core import Image

# |raw weight sum| below this cannot be normalized to DC gain 1
DEGENERATE_SUM = 1e-6


def sigma_for_wavelength(wavelength: float, bandwidth: float = 1.0) -> float:
    """Envelope width giving the requested half-response bandwidth in octaves."""
    ratio = (2.0 ** bandwidth + 1.0) / (2.0 ** bandwidth - 1.0)
    return wavelength / math.pi * math.sqrt(math.log(2.0) / 2.0) * ratio


def _normalize_theta(theta: float) -> float:
    return theta % 180.0


@dataclass(frozen=True)
class GaborParams:
    """Kernel parameters: wavelength/phase/aspect/envelope in pixels or radians,
    orientation in degrees, and the odd kernel side length."""

    wavelength: float           # sinusoid period, pixels
    psi: float = 0.0            # sinusoid phase, radians
    gamma: float = 0.5          # spatial aspect ratio of the envelope
    sigma: float | None = None  # envelope std dev; derived from wavelength if None
    theta: float = 0.0          # stripe orientation, degrees, normalized to [0, 180)
    kernel_scale: int = 9       # odd side length; the kernel is square
    bandwidth: float = field(default=1.0, repr=False)  # used only when sigma is None

    def __post_init__(self):
        if self.kernel_scale < 3 or self.kernel_scale % 2 == 0:
            raise ValueError(f"kernel_scale must be an odd integer >= 3, got {self.kernel_scale}")
        if not (self.wavelength > 0.0 and math.isfinite(self.wavelength)):
            raise ValueError(f"wavelength must be positive and finite, got {self.wavelength}")
        if not (self.gamma > 0.0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be positive and finite, got {self.gamma}")
        if not math.isfinite(self.psi):
            raise ValueError("psi must be finite")
        if self.sigma is None:
            object.__setattr__(self, "sigma", sigma_for_wavelength(self.wavelength, self.bandwidth))
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")
        if not math.isfinite(self.theta):
            raise ValueError("theta must be finite")
        object.__setattr__(self, "theta", _normalize_theta(self.theta))


@dataclass(frozen=True, eq=False)
class Kernel:
    """DC-normalized square filter: weights sum to 1 within 1e-9."""

    side: int
    weights: np.ndarray  # (side, side) float64

    def __post_init__(self):
        if self.weights.shape != (self.side, self.side):
            raise ValueError("weight array does not match declared side")
        arr = np.ascontiguousarray(self.weights, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise ValueError("kernel weights must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "weights", arr)


def rotate_coords(k1: float, k2: float, theta: float) -> tuple[float, float]:
    """Rotate kernel coordinates into the stripe-aligned frame.

    k1' = k1 cos(theta) + k2 sin(theta); k2' = -k1 sin(theta) + k2 cos(theta).
    theta in degrees.
    """
    t = math.radians(theta)
    c, s = math.cos(t), math.sin(t)
    return k1 * c + k2 * s, -k1 * s + k2 * c


def raw_gabor_weights(p: GaborParams) -> np.ndarray:
    """Samples of the oriented sinusoid-under-envelope before DC normalization.

    Weight at offset (k1, k2):
        cos(2 pi k1' / wavelength + psi) * exp(-(k1'^2 + gamma^2 k2'^2) / (2 sigma^2))
    with (k1', k2') the rotated coordinates.
    """
    half = (p.kernel_scale - 1) // 2
    t = math.radians(p.theta)
    c, s = math.cos(t), math.sin(t)
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    # k1 runs along image columns (x), k2 along rows (y); theta=90 then smooths
    # vertical stripes, matching the orientation contract
    k2g, k1g = np.meshgrid(offsets, offsets, indexing="ij")
    k1p = k1g * c + k2g * s
    k2p = -(k1g * s) + k2g * c
    envelope = np.exp(-(k1p ** 2 + (p.gamma ** 2) * (k2p ** 2)) / (2.0 * p.sigma ** 2))
    carrier = np.cos(2.0 * math.pi * k1p / p.wavelength + p.psi)
    return envelope * carrier


def gabor_kernel(p: GaborParams) -> Kernel:
    """Sample the oriented kernel at integer offsets and normalize to DC gain 1.

    Raises DegenerateKernelError when the raw weights sum to (nearly) zero and
    DC normalization is impossible.
    """
    raw = raw_gabor_weights(p)
    total = float(raw.sum())
    if abs(total) <= DEGENERATE_SUM:
        raise DegenerateKernelError(
            f"raw weight sum {total:.3e} too close to zero for DC normalization "
            f"(wavelength={p.wavelength}, theta={p.theta}, kernel_scale={p.kernel_scale})")
    return Kernel(side=p.kernel_scale, weights=raw / total)


def smooth(img: Image, p: GaborParams) -> Image:
    """Per-channel true 2-D convolution with the DC-normalized kernel.

    Reflect (edge-inclusive symmetric) padding at borders; output clamped to
    [0, 1] and the same size as the input.
    """
    kern = gabor_kernel(p)
    return convolve_image(img, kern.weights)


def convolve_image(img: Image, weights: np.ndarray) -> Image:
    """Shared convolution path: reflect padding, clamp to [0, 1]."""
    side = weights.shape[0]
    if side > min(img.width, img.height):
        raise KernelTooLargeError(
            f"kernel side {side} exceeds image {img.width}x{img.height}")
    out = np.empty_like(img.pixels)
    for ch in range(img.channels):
        out[:, :, ch] = ndimage.convolve(img.pixels[:, :, ch], weights, mode="reflect")
    return Image.from_array(np.clip(out, 0.0, 1.0))


def extract_texture(benign: Image, smoothed: Image) -> Image:
    """The removed texture as a signed residual shifted into [0, 1].

    Returns r' = ((benign - smoothed) + 1) / 2, so benign reconstructs as
    smoothed + (2 r' - 1). Identical inputs yield the constant 0.5 plane.
    """
    if not benign.same_shape(smoothed):
        raise DimensionMismatchError(
            f"benign {benign.width}x{benign.height}x{benign.channels} vs "
            f"smoothed {smoothed.width}x{smoothed.height}x{smoothed.channels}")
    residual = (benign.pixels - smoothed.pixels + 1.0) / 2.0
    return Image.from_array(residual)
