"""Self-check suite comparing fast paths against dense or hand-derived oracles.

Every check works on dims no larger than ``(8, 8, 3)``. The list of checks
and their names is fixed, so two runs print the same report layout.
"""

import dataclasses
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .cascade import IterationSchedule, PmParams, pm_denoise, prolong_first, prolong_quadratic
from .degradation import apply_blur, build_toeplitz, gaussian_psf
from .krylov import SmootherKind, SolveControl, make_operator_action, smooth
from .tensor import direct_solve, einstein_product, fro_norm, unfold_operator, unfold_tensor

__all__ = ["CheckResult", "perturbed_kernel", "run_checks", "format_report"]

SIGMAS = (0.7, 0.8, 0.9)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float


def perturbed_kernel(eps):
    """Debug hook that scales the convolution kernel by ``1 + eps``.

    Only the fast convolution path sees the change; the dense operator is
    still built from the exact Gaussian, so the equivalence checks must fail.
    """

    def hook(psf):
        return dataclasses.replace(psf, kernel=psf.kernel * (1.0 + eps), factors=None)

    return hook


def _rel(a, b):
    return fro_norm(a - b) / max(fro_norm(b), np.finfo(float).tiny)


def _blur_equivalence(sigma, hook):
    psf = gaussian_psf(sigma)
    fast = hook(psf) if hook else psf
    rng = np.random.default_rng(int(sigma * 1000))
    worst = 0.0
    for dims in ((1, 1, 1), (3, 5, 2), (6, 6, 3), (8, 8, 3)):
        T = build_toeplitz(psf, dims)
        for _ in range(3):
            X = rng.standard_normal(dims)
            worst = max(worst, _rel(apply_blur(fast, X), einstein_product(T, X)))
    return worst


def _homomorphism():
    rng = np.random.default_rng(2)
    worst = 0.0
    for dims in ((1, 1, 1), (2, 3, 3), (4, 4, 3)):
        T = rng.standard_normal(dims + dims)
        X = rng.standard_normal(dims)
        lhs = unfold_tensor(einstein_product(T, X))
        worst = max(worst, _rel(lhs, unfold_operator(T) @ unfold_tensor(X)))
    return worst


def _grid(q, n, step):
    y, x = np.mgrid[0:n, 0:n] * step
    return q(y, x)[..., None].repeat(3, axis=2)


def _prolong_exactness():
    worst = 0.0
    for q in (lambda y, x: 0.3 + 0 * x, lambda y, x: y - 2 * x, lambda y, x: y * y - x * y + 0.5 * x * x):
        out = prolong_quadratic(_grid(q, 4, 0.5), _grid(q, 2, 1.0))
        ref = _grid(q, 8, 0.25)
        worst = max(worst, float(np.max(np.abs(out[:5, :5] - ref[:5, :5]))))
        out = prolong_first(_grid(q, 4, 0.5))
        worst = max(worst, float(np.max(np.abs(out[:5, :5] - ref[:5, :5]))))
    return worst


def _ramp_quarter_node():
    out = prolong_quadratic(_grid(lambda y, x: y, 4, 0.5), _grid(lambda y, x: y, 2, 1.0))
    return abs(out[1, 0, 0] - 0.25)


def _pm_fixed_point():
    X = np.full((8, 8, 3), 0.37)
    return float(np.max(np.abs(pm_denoise(X, PmParams()) - X)))


def _smoother_vs_direct(kind, hook):
    psf = gaussian_psf(0.7)
    fast = hook(psf) if hook else psf
    G = np.random.default_rng(7).random((8, 8, 3))
    ref = direct_solve(build_toeplitz(psf, G.shape), G)
    out = smooth(kind, make_operator_action(fast), G, np.zeros_like(G), SolveControl(max_iters=2000, rel_tol=1e-8))
    return _rel(out.F, ref)


def _schedule_counts():
    ok = IterationSchedule.classic().counts(4) == [4, 9, 16] and IterationSchedule.economic().counts(4) == [4, 16, 4]
    return 0.0 if ok else 1.0


def checks(hook=None):
    """Ordered ``(name, thunk, limit)`` triples."""
    out = [(f"blur_dense_equivalence[sigma={s}]", (lambda s=s: _blur_equivalence(s, hook)), 1e-10) for s in SIGMAS]
    out.append(("unfold_homomorphism", _homomorphism, 1e-12))
    out.append(("prolong_quadratic_exactness", _prolong_exactness, 1e-12))
    out.append(("prolong_ramp_quarter_node", _ramp_quarter_node, 1e-15))
    out.append(("pm_constant_fixed_point", _pm_fixed_point, 0.0))
    out.extend(
        (f"smoother_vs_direct[{k.value}]", (lambda k=k: _smoother_vs_direct(k, hook)), 1e-6) for k in SmootherKind
    )
    out.append(("schedule_counts_L4", _schedule_counts, 0.0))
    return out


def run_checks(hook: Optional[Callable] = None) -> List[CheckResult]:
    results = []
    for name, fn, limit in checks(hook):
        try:
            value = float(fn())
        except Exception:
            value = float("nan")
        results.append(CheckResult(name, bool(value <= limit), value, limit))
    return results


def format_report(results):
    lines = [f"{'PASS' if r.passed else 'FAIL'}  {r.name}  value={r.value:.3e}  limit={r.limit:.1e}" for r in results]
    failed = sum(not r.passed for r in results)
    lines.append(f"{len(results) - failed}/{len(results)} checks passed")
    return "\n".join(lines)
