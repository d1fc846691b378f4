"""Gaussian blur operator and the degradation model ``G = T *3 F + N``.

The blur tensor is Toeplitz, ``T[i, j] = S(j - i)`` with ``S`` a sampled 3D
Gaussian, so its action equals a zero-padded correlation with the kernel.
The channel axis takes part in the correlation, coupling R, G and B.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .tensor import DEFAULT_DENSE_CAP, DimensionError, _check_cap, as_image

__all__ = [
    "MAX_CHANNEL_OFFSET",
    "GaussianPsf",
    "NoiseSpec",
    "gaussian_value",
    "gaussian_psf",
    "default_radius",
    "build_toeplitz",
    "apply_blur",
    "make_noise",
    "degrade",
]

# With three channels no offset along the channel axis exceeds 2.
MAX_CHANNEL_OFFSET = 2


def gaussian_value(di, dj, dk, sigma):
    """Unnormalized-sum 3D Gaussian sample ``S(di, dj, dk)``."""
    scale = 1.0 / (math.sqrt(2.0 * math.pi) * sigma) ** 3
    return scale * np.exp(-(np.square(di) + np.square(dj) + np.square(dk)) / (2.0 * sigma * sigma))


def default_radius(sigma):
    return max(1, math.ceil(6.0 * sigma))


@dataclass(frozen=True)
class GaussianPsf:
    """Truncated 3D Gaussian kernel.

    ``kernel[radius + di, radius + dj, c + dk]`` holds ``S(di, dj, dk)`` where
    ``c = min(radius, 2)`` is the channel half-width. Samples are taken
    as-is; the kernel is deliberately not renormalized to unit sum.
    """

    sigma: float
    radius: int
    kernel: np.ndarray = field(repr=False, compare=False)
    # Per-axis 1D factors whose outer product is ``kernel``; None forces the
    # full 3D correlation.
    factors: tuple = field(default=None, repr=False, compare=False)

    @property
    def channel_radius(self):
        return (self.kernel.shape[2] - 1) // 2

    def value(self, di, dj, dk):
        """Untruncated ``S`` at the given offsets (used by the dense form)."""
        return gaussian_value(di, dj, dk, self.sigma)


def gaussian_psf(sigma, radius=None):
    """Sample the 3D Gaussian on ``[-radius, radius]^2 x [-2, 2]``."""
    sigma = float(sigma)
    if not sigma > 0 or not math.isfinite(sigma):
        raise ValueError(f"sigma must be positive and finite, got {sigma}")
    if radius is None:
        radius = default_radius(sigma)
    if int(radius) != radius or radius < 1:
        raise ValueError(f"radius must be an integer >= 1, got {radius}")
    radius = int(radius)
    cr = min(radius, MAX_CHANNEL_OFFSET)
    di = np.arange(-radius, radius + 1, dtype=np.float64)
    dk = np.arange(-cr, cr + 1, dtype=np.float64)
    kernel = gaussian_value(di[:, None, None], di[None, :, None], dk[None, None, :], sigma)
    kernel.setflags(write=False)
    spatial = np.exp(-np.square(di) / (2.0 * sigma * sigma))
    channel = gaussian_value(0.0, 0.0, dk, sigma)
    return GaussianPsf(sigma=sigma, radius=radius, kernel=kernel, factors=(spatial, spatial, channel))


def build_toeplitz(psf, dims, cap=DEFAULT_DENSE_CAP):
    """Dense order-6 Toeplitz tensor ``T[i1,i2,i3,j1,j2,j3] = S(j-i)``.

    ``S`` is evaluated exactly at every offset, without the kernel's
    truncation, so this form serves as the reference for :func:`apply_blur`.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise DimensionError(f"dims must be three positive integers, got {dims}")
    _check_cap(dims, cap)
    n1, n2, n3 = dims
    d1 = np.arange(n1)[None, :] - np.arange(n1)[:, None]
    d2 = np.arange(n2)[None, :] - np.arange(n2)[:, None]
    d3 = np.arange(n3)[None, :] - np.arange(n3)[:, None]
    # axes: i1, i2, i3, j1, j2, j3
    return psf.value(
        d1[:, None, None, :, None, None],
        d2[None, :, None, None, :, None],
        d3[None, None, :, None, None, :],
    )


def apply_blur(psf, X):
    """Zero-padded correlation ``Y[i] = sum_o S(o) X[i + o]`` over all three axes."""
    X = as_image(X, "X")
    if psf.factors is None:
        return ndimage.correlate(X, psf.kernel, mode="constant", cval=0.0)
    Y = X
    for axis, weights in enumerate(psf.factors):
        Y = ndimage.correlate1d(Y, weights, axis=axis, mode="constant", cval=0.0)
    return Y


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise, uniform on ``[0, amplitude)`` from numpy's PCG64."""

    amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ValueError(f"noise amplitude must be >= 0, got {self.amplitude}")


def make_noise(noise, dims):
    dims = tuple(int(d) for d in dims)
    if noise.amplitude == 0:
        return np.zeros(dims)
    rng = np.random.Generator(np.random.PCG64(noise.seed))
    return noise.amplitude * rng.random(dims)


def degrade(F, psf, noise=NoiseSpec()):
    """Blur ``F`` with ``psf`` and add seeded uniform noise."""
    F = as_image(F, "F")
    return apply_blur(psf, F) + make_noise(noise, F.shape)
