"""Restoration quality (relative error, PSNR) and the run report."""

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .tensor import DimensionError, fro_norm

__all__ = ["QualityScore", "RestorationReport", "relative_error", "psnr", "score", "format_psnr"]


def _pair(reference, candidate):
    F = np.asarray(reference, dtype=np.float64)
    G = np.asarray(candidate, dtype=np.float64)
    if F.shape != G.shape:
        raise DimensionError(f"reference dims {F.shape} != candidate dims {G.shape}")
    return F, G


def relative_error(reference, candidate):
    """``||candidate - reference||_F / ||reference||_F``."""
    F, G = _pair(reference, candidate)
    ref = fro_norm(F)
    if ref == 0:
        raise ValueError("relative error is undefined for an all-zero reference")
    return fro_norm(G - F) / ref


def psnr(reference, candidate):
    """``10 log10(n1 n2 n3 F_max^2 / ||candidate - reference||_F^2)`` in dB.

    ``F_max`` is the largest entry of the reference. Identical inputs give
    ``inf``.
    """
    F, G = _pair(reference, candidate)
    err2 = float(np.sum(np.square(G - F)))
    if err2 == 0:
        return math.inf
    peak = float(F.max())
    return 10.0 * math.log10(F.size * peak * peak / err2)


def format_psnr(value):
    return "inf" if math.isinf(value) else repr(float(value))


@dataclass(frozen=True)
class QualityScore:
    psnr: float
    re: float
    f_max: float


def score(reference, candidate):
    return QualityScore(
        psnr=psnr(reference, candidate),
        re=relative_error(reference, candidate),
        f_max=float(np.max(reference)),
    )


@dataclass
class RestorationReport:
    """Result of one restoration run.

    ``iters_per_level`` lists smoothing steps for levels ``2..L`` of a cascade
    (the coarsest level is a direct solve), or the single count of a
    baseline solve.
    """

    F: np.ndarray = field(repr=False)
    method: str
    smoother: str
    levels: int
    iters_per_level: List[int]
    final_rel_residual: float
    wall_seconds: float = 0.0
    cpu_seconds: float = 0.0
    matvecs: int = 0
    residual_histories: Optional[list] = field(default=None, repr=False)
    breakdown: Optional[str] = None
    settings: dict = field(default_factory=dict)
    quality: Optional[QualityScore] = None

    @property
    def total_iters(self):
        return sum(self.iters_per_level)

    def evaluate(self, reference):
        self.quality = score(reference, self.F)
        return self.quality

    def to_dict(self):
        out = {
            "method": self.method,
            "smoother": self.smoother,
            "levels": self.levels,
            "iters_per_level": list(self.iters_per_level),
            "final_rel_residual": self.final_rel_residual,
            "wall_seconds": self.wall_seconds,
            "cpu_seconds": self.cpu_seconds,
            "matvecs": self.matvecs,
            "breakdown": self.breakdown,
            "settings": self.settings,
        }
        if self.quality is not None:
            out["psnr_db"] = format_psnr(self.quality.psnr)
            out["re"] = self.quality.re
            out["f_max"] = self.quality.f_max
        return out
