"""Cascadic tensor multigrid restoration of blurred and noisy color images."""

__version__ = "0.1.0"

from .cascade import IterationSchedule, PmParams, baseline, ctmg, ectmg
from .degradation import NoiseSpec, apply_blur, degrade, gaussian_psf
from .krylov import SmootherKind
from .metrics import psnr, relative_error

__all__ = [
    "__version__",
    "IterationSchedule",
    "NoiseSpec",
    "PmParams",
    "SmootherKind",
    "apply_blur",
    "baseline",
    "ctmg",
    "degrade",
    "ectmg",
    "gaussian_psf",
    "psnr",
    "relative_error",
]
