"""Cascadic tensor multigrid (CTMG) and its economic variant (ECTMG).

One-way coarse-to-fine scheme: exact solve on the coarsest grid, then on each
finer level prolong, apply Perona-Malik edge-preserving denoising, and run a
fixed number of Krylov smoothing steps.

Grid conventions
----------------
Level 1 is the coarsest, level ``L`` the finest; spatial dims halve per level
and channels are kept. For the quadratic prolongation, level ``l-2`` pixels
sit at integer coordinates, level ``l-1`` pixels at half-integers and level
``l`` pixels at quarter-integers, so fine pixel ``2J`` coincides with coarse
pixel ``J``.
"""

import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .degradation import build_toeplitz, default_radius, gaussian_psf
from .krylov import SmootherKind, SolveControl, make_operator_action, smooth
from .metrics import RestorationReport
from .tensor import DEFAULT_DENSE_CAP, DimensionError, as_image, direct_solve

__all__ = [
    "DEFAULT_BASELINE_TOL",
    "DEFAULT_LEVELS",
    "GridHierarchy",
    "IterationSchedule",
    "PmParams",
    "RESTRICTIONS",
    "restrict",
    "restrict_full_weighting",
    "equivalent_fine_iters",
    "build_hierarchy",
    "prolong_quadratic",
    "prolong_first",
    "diffusivity",
    "pm_denoise",
    "cascade",
    "ctmg",
    "ectmg",
    "baseline",
]

DEFAULT_LEVELS = 4
DEFAULT_BASELINE_TOL = 1e-6


# -- restriction and hierarchy ------------------------------------------------


def restrict(X):
    """Per-channel 2x2 block average; halves both spatial dims."""
    X = as_image(X, "X")
    n1, n2, n3 = X.shape
    if n1 % 2 or n2 % 2:
        raise DimensionError(f"restriction needs even spatial dims, got {X.shape}")
    return X.reshape(n1 // 2, 2, n2 // 2, 2, n3).mean(axis=(1, 3))


def restrict_full_weighting(X):
    """Per-channel ``[1/4, 1/2, 1/4]`` weighting per axis, sampled at even pixels.

    Coarse pixel ``J`` sits on fine pixel ``2J``, the same vertex-nested
    layout the prolongation assumes, so a restrict/prolong round trip does not
    drift by half a pixel per level the way the block average does. The
    missing neighbor past the first row or column is replicated. Constants
    are preserved.
    """
    X = as_image(X, "X")
    n1, n2, _ = X.shape
    if n1 % 2 or n2 % 2:
        raise DimensionError(f"restriction needs even spatial dims, got {X.shape}")
    p = np.pad(X, [(1, 0), (1, 0), (0, 0)], mode="edge")
    rows = 0.25 * p[0:-1:2] + 0.5 * p[1::2] + 0.25 * p[2::2]
    return 0.25 * rows[:, 0:-1:2] + 0.5 * rows[:, 1::2] + 0.25 * rows[:, 2::2]


RESTRICTIONS = {"full_weighting": restrict_full_weighting, "block": restrict}


@dataclass
class GridHierarchy:
    """Per-level data and blur kernels; list index ``l - 1`` holds level ``l``."""

    L: int
    data: List[np.ndarray]
    psfs: list

    def dims_at(self, level):
        return self.data[level - 1].shape

    def data_at(self, level):
        return self.data[level - 1]

    def psf_at(self, level):
        return self.psfs[level - 1]


def build_hierarchy(G, sigma, L, radius=None, dense_cap=DEFAULT_DENSE_CAP, restriction="full_weighting"):
    """Restrict ``G`` down ``L - 1`` times; every level reuses the same sigma.

    ``restriction`` names an entry of :data:`RESTRICTIONS`.
    """
    G = as_image(G, "G")
    try:
        down = RESTRICTIONS[restriction]
    except KeyError:
        raise ValueError(f"unknown restriction {restriction!r}, choose from {sorted(RESTRICTIONS)}") from None
    if int(L) != L or L < 2:
        raise ValueError(f"a cascade needs L >= 2 levels, got {L}")
    L = int(L)
    n1, n2, _ = G.shape
    factor = 2 ** (L - 1)
    if n1 % factor or n2 % factor:
        raise DimensionError(f"spatial dims {G.shape[:2]} are not divisible by 2^(L-1) = {factor}")
    coarsest = (n1 // factor) * (n2 // factor) * G.shape[2]
    if coarsest > dense_cap:
        raise DimensionError(
            f"coarsest level has {coarsest} unknowns, above the direct-solve cap {dense_cap}; "
            f"increase L"
        )
    data = [G]
    for _ in range(L - 1):
        data.append(down(data[-1]))
    data.reverse()
    psf = gaussian_psf(sigma, radius)
    return GridHierarchy(L=L, data=data, psfs=[psf] * L)


# -- quadratic prolongation ---------------------------------------------------


def _pad_odd(a, axis, min_len):
    """Replicate-pad ``a`` along ``axis`` to an odd length of at least ``min_len``."""
    n = a.shape[axis]
    target = min_len if min_len % 2 else min_len + 1
    if n >= target:
        return a
    widths = [(0, 0)] * a.ndim
    widths[axis] = (0, target - n)
    return np.pad(a, widths, mode="edge")


def _refine(f, g, axis):
    """Quarter-point refinement along ``axis``.

    ``f`` has ``2m + 1`` nodes at spacing 1/2, ``g`` (or None) has ``m + 1``
    nodes at spacing 1 on the same interval. Returns ``4m + 1`` nodes at
    spacing 1/4: even outputs copy ``f``, odd outputs use the extrapolated
    quadratic stencil. With ``g`` None, ``g`` is taken as ``f`` at integer
    nodes, which reduces the stencil to plain quadratic interpolation.
    """
    f = np.moveaxis(f, axis, 0)
    m = (f.shape[0] - 1) // 2
    f0, fh, f1 = f[0:-1:2], f[1::2], f[2::2]
    if g is None:
        g0, g1 = f0, f1
    else:
        g = np.moveaxis(g, axis, 0)
        g0, g1 = g[:-1], g[1:]
    out = np.empty((4 * m + 1,) + f.shape[1:])
    out[0::2] = f
    out[1::4] = ((9.0 * f0 + 12.0 * fh - f1) - (3.0 * g0 + g1)) / 16.0
    out[3::4] = ((9.0 * f1 + 12.0 * fh - f0) - (3.0 * g1 + g0)) / 16.0
    return np.moveaxis(out, 0, axis)


def _prolong(fc, fcc, out_shape):
    """Two-pass tensor-product prolongation on replicate-padded vertex grids.

    Pass one refines every coarse column along axis 0; columns that are also
    level ``l-2`` columns use the ``fcc`` correction. Pass two refines every
    fine row along axis 1; rows that are also level ``l-2`` rows use the
    correction, the rest use the {3/8, 3/4, -1/8} stencil on the values from
    pass one.
    """
    n1, n2 = out_shape[:2]
    # vertex grids: fc -> 2m+1 nodes, fcc -> m+1 nodes per axis
    fc = _pad_odd(_pad_odd(fc, 0, n1 // 2 + 1), 1, n2 // 2 + 1)
    m1, m2 = (fc.shape[0] - 1) // 2, (fc.shape[1] - 1) // 2
    if fcc is not None:
        fcc = np.pad(fcc, [(0, m1 + 1 - fcc.shape[0]), (0, m2 + 1 - fcc.shape[1]), (0, 0)], mode="edge")

    # pass one: axis 0, shape (4*m1+1, 2*m2+1, C)
    cols = np.empty((4 * m1 + 1, fc.shape[1], fc.shape[2]))
    if fcc is None:
        cols[:] = _refine(fc, None, 0)
    else:
        cols[:, 0::2] = _refine(fc[:, 0::2], fcc, 0)
        cols[:, 1::2] = _refine(fc[:, 1::2], None, 0)

    # pass two: axis 1, shape (4*m1+1, 4*m2+1, C)
    out = _refine(cols, None, 1)
    if fcc is not None:
        out[0::4] = _refine(cols[0::4], fcc, 1)
    return out[:n1, :n2]


def prolong_quadratic(F_coarse, F_coarser):
    """Prolong a level ``l-1`` solution to level ``l`` using level ``l-2`` as well.

    Along rows and columns of the level ``l-2`` grid the quarter nodes get

        f(j + 1/4) = [(9 f'(j) + 12 f'(j + 1/2) - f'(j + 1))
                      - (3 f''(j) + f''(j + 1))] / 16

    (and the mirrored ``j + 3/4`` form), where ``f'`` is the level ``l-1``
    and ``f''`` the level ``l-2`` solution. Interior quarter nodes use the
    quadratic weights ``3/8, 3/4, -1/8`` on already computed values; nodes
    coinciding with level ``l-1`` nodes are copied. Indices past the last
    pixel are clamped.
    """
    F_coarse = as_image(F_coarse, "F_coarse")
    F_coarser = as_image(F_coarser, "F_coarser")
    n1, n2, n3 = F_coarse.shape
    if F_coarser.shape != (n1 // 2, n2 // 2, n3) or n1 % 2 or n2 % 2:
        raise DimensionError(
            f"level l-1 dims {F_coarse.shape} must be twice level l-2 dims {F_coarser.shape}"
        )
    return _prolong(F_coarse, F_coarser, (2 * n1, 2 * n2, n3))


def prolong_first(F_coarse):
    """Quadratic prolongation without a level ``l-2`` solution (used at l = 2)."""
    F_coarse = as_image(F_coarse, "F_coarse")
    n1, n2, n3 = F_coarse.shape
    return _prolong(F_coarse, None, (2 * n1, 2 * n2, n3))


# -- Perona-Malik denoising ---------------------------------------------------


@dataclass(frozen=True)
class PmParams:
    """Explicit Perona-Malik settings.

    ``k_threshold=None`` picks ``k_factor`` times the largest forward-difference
    gradient magnitude of each channel, recomputed on every call.
    """

    tau: float = 0.25
    k_threshold: Optional[float] = None
    iters: int = 10
    k_factor: float = 0.1

    def __post_init__(self):
        if not 0 < self.tau <= 0.25:
            raise ValueError(f"tau must lie in (0, 1/4] for a stable explicit step, got {self.tau}")
        if self.k_threshold is not None and not self.k_threshold > 0:
            raise ValueError(f"k_threshold must be positive, got {self.k_threshold}")
        if int(self.iters) != self.iters or self.iters < 0:
            raise ValueError(f"iters must be a non-negative integer, got {self.iters}")
        if not self.k_factor > 0:
            raise ValueError(f"k_factor must be positive, got {self.k_factor}")


def diffusivity(grad_mag, k):
    """Edge-stopping function ``g(s) = 1 / (1 + (s/k)^2)``."""
    return 1.0 / (1.0 + np.square(np.asarray(grad_mag) / k))


def _auto_threshold(u, factor):
    dx = np.diff(u, axis=0, append=u[-1:])
    dy = np.diff(u, axis=1, append=u[:, -1:])
    peak = np.sqrt(dx * dx + dy * dy).max(axis=(0, 1))
    # a flat channel has no flux whatever k is
    return np.where(peak > 0, factor * peak, 1.0)


def pm_denoise(X, params=PmParams()):
    """Per-channel explicit Perona-Malik diffusion.

    Each step is ``u += tau * sum_d g(|D_d u|) D_d u`` over the four one-sided
    neighbor differences ``D_d`` with replicate boundaries.
    """
    u = as_image(X, "X").copy()
    if params.iters == 0:
        return u
    if params.k_threshold is None:
        k = _auto_threshold(u, params.k_factor)
    else:
        k = np.full(u.shape[2], float(params.k_threshold))
    for _ in range(params.iters):
        p = np.pad(u, [(1, 1), (1, 1), (0, 0)], mode="edge")
        flux = np.zeros_like(u)
        for d in (p[:-2, 1:-1], p[2:, 1:-1], p[1:-1, :-2], p[1:-1, 2:]):
            diff = d - u
            flux += diffusivity(np.abs(diff), k) * diff
        u += params.tau * flux
    return u


# -- iteration schedules ------------------------------------------------------


def _ceil(x):
    # slack absorbs round-off in products like (L - 1.5 l) * 4**(l-1)
    return math.ceil(x - 1e-9)


@dataclass(frozen=True)
class IterationSchedule:
    """Smoothing counts per level.

    ``classic``: ``ceil(m_star * l**2)``.
    ``economic``: ``ceil(m0 * (L - L0)**2 * beta**(L - l))`` for ``l > L0`` and
    ``ceil((L - (2 - eps0) * l) * h_l**-2 / m_star**2)`` with
    ``h_l = 2**(1 - l)`` otherwise; ``L0`` defaults to ``L / 2`` (not rounded).
    Counts are clamped below at 1.
    """

    kind: str = "classic"
    m_star: float = 1.0
    m0: float = 1.0
    beta: float = 4.0
    eps0: float = 0.5
    L0: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("classic", "economic"):
            raise ValueError(f"schedule kind must be classic or economic, got {self.kind!r}")
        if not self.m_star >= 1:
            raise ValueError(f"m_star must be >= 1, got {self.m_star}")
        if not self.m0 > 0 or not self.beta > 0:
            raise ValueError("m0 and beta must be positive")

    @classmethod
    def classic(cls, **kw):
        return cls(kind="classic", **kw)

    @classmethod
    def economic(cls, **kw):
        return cls(kind="economic", **kw)

    def count(self, level, L):
        if not 2 <= level <= L:
            raise ValueError(f"level {level} outside 2..{L}")
        if self.kind == "classic":
            m = _ceil(self.m_star * level**2)
        else:
            L0 = L / 2 if self.L0 is None else self.L0
            if level > L0:
                m = _ceil(self.m0 * (L - L0) ** 2 * self.beta ** (L - level))
            else:
                h = 0.5 ** (level - 1)
                m = _ceil((L - (2 - self.eps0) * level) / h**2 / self.m_star**2)
        return max(1, m)

    def counts(self, L):
        """Counts for levels ``2..L``."""
        return [self.count(l, L) for l in range(2, L + 1)]

    def work(self, L):
        """Smoothing steps weighted by level size, in finest-level units."""
        return sum(m * 4.0 ** (l - L) for l, m in zip(range(2, L + 1), self.counts(L)))


def equivalent_fine_iters(schedule, L):
    """Finest-grid iteration count whose cost matches a whole cascade's smoothing.

    This is the budget given to a single-level baseline when the two are
    compared at equal cost; the coarse direct solve is not counted.
    """
    return math.ceil(schedule.work(L) - 1e-9)


# -- drivers ------------------------------------------------------------------


def cascade(
    G,
    sigma,
    L=DEFAULT_LEVELS,
    smoother=SmootherKind.CR,
    pm=PmParams(),
    schedule=IterationSchedule(),
    radius=None,
    dense_cap=DEFAULT_DENSE_CAP,
    record_history=False,
    method=None,
    restriction="full_weighting",
):
    """Run the cascade on ``T *3 F = G`` and return a :class:`RestorationReport`."""
    smoother = SmootherKind.parse(smoother)
    wall0, cpu0 = time.perf_counter(), time.process_time()
    h = build_hierarchy(G, sigma, L, radius=radius, dense_cap=dense_cap, restriction=restriction)

    psf1 = h.psf_at(1)
    prev = direct_solve(build_toeplitz(psf1, h.dims_at(1), cap=dense_cap), h.data_at(1), cap=dense_cap)
    older = None
    iters, histories, matvecs = [], [], 0
    outcome = None
    for level in range(2, h.L + 1):
        if older is None:
            start = prolong_first(prev)
        else:
            start = prolong_quadratic(prev, older)
        start = pm_denoise(start, pm)
        m = schedule.count(level, h.L)
        outcome = smooth(
            smoother,
            make_operator_action(h.psf_at(level)),
            h.data_at(level),
            start,
            SolveControl.fixed(m, record_history=record_history),
        )
        iters.append(outcome.iters_done)
        histories.append(outcome.residual_history)
        matvecs += outcome.matvecs
        older, prev = prev, outcome.F

    return RestorationReport(
        F=prev,
        method=method or ("ectmg" if schedule.kind == "economic" else "ctmg"),
        smoother=smoother.value,
        levels=h.L,
        iters_per_level=iters,
        final_rel_residual=outcome.final_rel_residual,
        wall_seconds=time.perf_counter() - wall0,
        cpu_seconds=time.process_time() - cpu0,
        matvecs=matvecs,
        residual_histories=histories if record_history else None,
        breakdown=outcome.breakdown,
        settings={
            "sigma": float(sigma),
            "radius": h.psf_at(h.L).radius,
            "restriction": restriction,
            "schedule": schedule_dict(schedule),
            "pm": pm_dict(pm),
        },
    )


def ctmg(G, sigma, L=DEFAULT_LEVELS, smoother=SmootherKind.CR, pm=PmParams(), schedule=None, **kw):
    """Cascadic tensor multigrid with the classic ``m_star * l**2`` schedule."""
    schedule = schedule or IterationSchedule.classic()
    if schedule.kind != "classic":
        raise ValueError("ctmg uses the classic schedule")
    return cascade(G, sigma, L, smoother, pm, schedule, method="ctmg", **kw)


def ectmg(G, sigma, L=DEFAULT_LEVELS, smoother=SmootherKind.CR, pm=PmParams(), schedule=None, **kw):
    """Economic cascadic tensor multigrid."""
    schedule = schedule or IterationSchedule.economic()
    if schedule.kind != "economic":
        raise ValueError("ectmg uses the economic schedule")
    return cascade(G, sigma, L, smoother, pm, schedule, method="ectmg", **kw)


def baseline(
    G,
    sigma,
    smoother=SmootherKind.CR,
    rel_tol=DEFAULT_BASELINE_TOL,
    max_iters=None,
    radius=None,
    record_history=False,
):
    """Single-level Krylov solve on the finest grid starting from ``F0 = G``."""
    smoother = SmootherKind.parse(smoother)
    G = as_image(G, "G")
    wall0, cpu0 = time.perf_counter(), time.process_time()
    psf = gaussian_psf(sigma, radius)
    ctl = SolveControl(max_iters=max_iters, rel_tol=rel_tol, record_history=record_history)
    out = smooth(smoother, make_operator_action(psf), G, G, ctl)
    return RestorationReport(
        F=out.F,
        method="baseline",
        smoother=smoother.value,
        levels=1,
        iters_per_level=[out.iters_done],
        final_rel_residual=out.final_rel_residual,
        wall_seconds=time.perf_counter() - wall0,
        cpu_seconds=time.process_time() - cpu0,
        matvecs=out.matvecs,
        residual_histories=[out.residual_history] if record_history else None,
        breakdown=out.breakdown,
        settings={"sigma": float(sigma), "radius": psf.radius, "rel_tol": rel_tol, "max_iters": max_iters},
    )


def schedule_dict(s):
    return {"kind": s.kind, "m_star": s.m_star, "m0": s.m0, "beta": s.beta, "eps0": s.eps0, "L0": s.L0}


def pm_dict(p):
    return {"tau": p.tau, "k_threshold": p.k_threshold, "iters": p.iters, "k_factor": p.k_factor}
