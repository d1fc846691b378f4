"""Tensor-format Krylov iterations: BiCG-BTF, CGS-BTF and CR-BTF.

The recurrences are the textbook ones with the matrix-vector product replaced
by an operator action on order-3 tensors and the dot product by
:func:`cascadic.tensor.inner`. They serve both as cascade smoothers (fixed
iteration counts) and as single-level baselines (tolerance driven).
"""

import enum
import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .degradation import apply_blur
from .tensor import DimensionError, as_image, fro_norm, inner

__all__ = [
    "BREAKDOWN_TOL",
    "RECOMPUTE_EVERY",
    "SmootherKind",
    "SolveControl",
    "SolveOutcome",
    "make_operator_action",
    "smooth",
]

BREAKDOWN_TOL = 1e-14
RECOMPUTE_EVERY = 25


class SmootherKind(str, enum.Enum):
    BICG = "bicg"
    CGS = "cgs"
    CR = "cr"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = "|".join(k.value for k in cls)
            raise ValueError(f"unknown smoother {value!r}, expected one of {names}") from None


@dataclass(frozen=True)
class SolveControl:
    """Stopping rule.

    ``max_iters=None`` means unbounded, in which case ``rel_tol`` must be
    positive. Fixed-count smoothing uses ``rel_tol=0``.
    """

    max_iters: Optional[int] = None
    rel_tol: float = 0.0
    record_history: bool = False

    def __post_init__(self):
        if self.max_iters is not None and (int(self.max_iters) != self.max_iters or self.max_iters < 0):
            raise ValueError(f"max_iters must be a non-negative integer, got {self.max_iters}")
        if not (self.rel_tol >= 0 and math.isfinite(self.rel_tol)):
            raise ValueError(f"rel_tol must be finite and >= 0, got {self.rel_tol}")
        if self.max_iters is None and self.rel_tol == 0:
            raise ValueError("unbounded max_iters with rel_tol=0 never stops")

    @classmethod
    def fixed(cls, iters, record_history=False):
        return cls(max_iters=int(iters), rel_tol=0.0, record_history=record_history)


@dataclass
class SolveOutcome:
    F: np.ndarray
    iters_done: int
    final_rel_residual: float
    residual_history: Optional[List[float]] = None
    breakdown: Optional[str] = None
    matvecs: int = 0


def make_operator_action(psf) -> Callable[[np.ndarray], np.ndarray]:
    """Bind the blur convolution as the action of the Toeplitz tensor."""

    def action(X):
        return apply_blur(psf, X)

    action.psf = psf
    return action


class _Counted:
    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, X):
        self.calls += 1
        return self.fn(X)


class _Breakdown(Exception):
    pass


def _dot(a, b, what):
    """Inner product that raises on (near-)orthogonality of its factors."""
    d = inner(a, b)
    if not math.isfinite(d) or abs(d) <= BREAKDOWN_TOL * fro_norm(a) * fro_norm(b):
        raise _Breakdown(f"{what} vanished ({d:.3e})")
    return d


class _Tracker:
    """Bookkeeping shared by the three recurrences."""

    def __init__(self, A, G, x, ctl):
        self.A = A
        self.G = G
        self.ctl = ctl
        self.gnorm = fro_norm(G) or 1.0
        self.x = x
        self.r = G - A(x)
        self.rel = fro_norm(self.r) / self.gnorm
        self.initial_rel = self.rel
        self.iters = 0
        self.best_rel = self.rel
        self.best_x = x.copy()
        self.history = [self.rel] if ctl.record_history else None
        self.confirmed_at = 0

    def converged(self):
        if self.rel > self.ctl.rel_tol:
            return False
        if self.iters == 0 or self.confirmed_at == self.iters:
            return True
        # Confirm against the true residual before stopping.
        self.r = self.G - self.A(self.x)
        self.rel = fro_norm(self.r) / self.gnorm
        self.confirmed_at = self.iters
        return self.rel <= self.ctl.rel_tol

    def exhausted(self):
        return self.ctl.max_iters is not None and self.iters >= self.ctl.max_iters

    def step_done(self):
        """Count one iteration; returns True if the residual was recomputed."""
        self.iters += 1
        refreshed = False
        if self.iters % RECOMPUTE_EVERY == 0:
            self.r = self.G - self.A(self.x)
            refreshed = True
        self.rel = fro_norm(self.r) / self.gnorm
        if self.history is not None:
            self.history.append(self.rel)
        if self.rel < self.best_rel:
            self.best_rel = self.rel
            self.best_x = self.x.copy()
        return refreshed


def _cr(t, AT):
    A = t.A
    p = t.r.copy()
    Ar = A(t.r)
    Ap = Ar.copy()
    rho = _dot(t.r, Ar, "<R, T*R>") if not t.converged() else 0.0
    while not (t.converged() or t.exhausted()):
        alpha = rho / _dot(Ap, Ap, "<T*P, T*P>")
        t.x += alpha * p
        t.r -= alpha * Ap
        t.step_done()
        if t.converged() or t.exhausted():
            break
        Ar = A(t.r)
        rho_new = _dot(t.r, Ar, "<R, T*R>")
        beta = rho_new / rho
        p = t.r + beta * p
        Ap = Ar + beta * Ap
        rho = rho_new


def _bicg(t, AT):
    A = t.A
    rs = t.r.copy()
    p = t.r.copy()
    ps = rs.copy()
    rho = inner(rs, t.r)
    while not (t.converged() or t.exhausted()):
        q = A(p)
        qs = AT(ps)
        alpha = rho / _dot(ps, q, "<P~, T*P>")
        t.x += alpha * p
        t.r -= alpha * q
        rs -= alpha * qs
        t.step_done()
        if t.converged() or t.exhausted():
            break
        rho_new = _dot(rs, t.r, "<R~, R>")
        beta = rho_new / rho
        p = t.r + beta * p
        ps = rs + beta * ps
        rho = rho_new


def _cgs(t, AT):
    A = t.A
    rs = t.r.copy()
    rho_prev = None
    p = q = None
    while not (t.converged() or t.exhausted()):
        rho = _dot(rs, t.r, "<R~, R>")
        if rho_prev is None:
            u = t.r.copy()
            p = u.copy()
        else:
            beta = rho / rho_prev
            u = t.r + beta * q
            p = u + beta * (q + beta * p)
        v = A(p)
        alpha = rho / _dot(rs, v, "<R~, T*P>")
        q = u - alpha * v
        uq = u + q
        t.x += alpha * uq
        t.r -= alpha * A(uq)
        t.step_done()
        rho_prev = rho


_RECURRENCES = {SmootherKind.CR: _cr, SmootherKind.BICG: _bicg, SmootherKind.CGS: _cgs}


def smooth(kind, apply_T, G, F0, ctl, apply_TT=None):
    """Run a Krylov recurrence on ``T *3 F = G`` starting from ``F0``.

    Parameters
    ----------
    kind : SmootherKind or str
        ``bicg``, ``cgs`` or ``cr``.
    apply_T : callable
        Linear, dimension-preserving action of ``T``.
    G, F0 : ndarray
        Right-hand side and initial guess, same shape.
    ctl : SolveControl
        Iteration cap and relative residual tolerance.
    apply_TT : callable, optional
        Action of the adjoint, needed by BiCG. Defaults to ``apply_T``, which
        is correct for the symmetric Gaussian Toeplitz operator.

    Returns
    -------
    SolveOutcome
        On breakdown the best iterate seen is returned with ``breakdown``
        set; no exception is raised.
    """
    kind = SmootherKind.parse(kind)
    G = as_image(G, "G")
    F0 = as_image(F0, "F0")
    if G.shape != F0.shape:
        raise DimensionError(f"G dims {G.shape} != F0 dims {F0.shape}")
    A = _Counted(apply_T)
    AT = A if apply_TT is None else _Counted(apply_TT)

    t = _Tracker(A, G, F0.copy(), ctl)
    breakdown = None
    try:
        _RECURRENCES[kind](t, AT)
        x = t.x
    except _Breakdown as exc:
        breakdown = str(exc)
        x = t.best_x

    rel = fro_norm(G - A(x)) / t.gnorm
    if kind is SmootherKind.CR and rel > t.initial_rel:
        x = F0.copy()
        rel = t.initial_rel
    matvecs = A.calls + (AT.calls if AT is not A else 0)
    return SolveOutcome(
        F=x,
        iters_done=t.iters,
        final_rel_residual=rel,
        residual_history=t.history,
        breakdown=breakdown,
        matvecs=matvecs,
    )
