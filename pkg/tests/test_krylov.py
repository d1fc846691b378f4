import numpy as np
import pytest

from cascadic.degradation import apply_blur, build_toeplitz, gaussian_psf
from cascadic.krylov import (
    RECOMPUTE_EVERY,
    SmootherKind,
    SolveControl,
    make_operator_action,
    smooth,
)
from cascadic.tensor import direct_solve, einstein_product, fro_norm

KINDS = list(SmootherKind)


def cg_reference(A, b, x, iters):
    """Plain conjugate gradients, the oracle for BiCG on symmetric systems."""
    r = b - A(x)
    p = r.copy()
    rr = np.vdot(r, r)
    out = []
    for _ in range(iters):
        Ap = A(p)
        alpha = rr / np.vdot(p, Ap)
        x = x + alpha * p
        r = r - alpha * Ap
        rr_new = np.vdot(r, r)
        p = r + (rr_new / rr) * p
        rr = rr_new
        out.append(x.copy())
    return out


def blur_system(sigma, dims=(8, 8, 3), seed=0):
    psf = gaussian_psf(sigma)
    F = np.random.default_rng(seed).random(dims)
    return psf, apply_blur(psf, F)


def test_kind_parsing():
    assert SmootherKind.parse("CR") is SmootherKind.CR
    assert SmootherKind.parse(SmootherKind.CGS) is SmootherKind.CGS
    assert [k.value for k in SmootherKind] == ["bicg", "cgs", "cr"]
    with pytest.raises(ValueError):
        SmootherKind.parse("gmres")


def test_control_validation():
    with pytest.raises(ValueError):
        SolveControl(max_iters=None, rel_tol=0.0)
    with pytest.raises(ValueError):
        SolveControl(max_iters=-1)
    with pytest.raises(ValueError):
        SolveControl(max_iters=3, rel_tol=-1e-3)
    assert SolveControl.fixed(5) == SolveControl(max_iters=5, rel_tol=0.0)


@pytest.mark.parametrize("kind", KINDS)
def test_scalar_system(kind):
    out = smooth(kind, lambda X: 2.0 * X, np.full((1, 1, 1), 6.0), np.zeros((1, 1, 1)), SolveControl(max_iters=10))
    assert out.iters_done == 1
    assert out.F[0, 0, 0] == pytest.approx(3.0, abs=1e-15)
    assert out.final_rel_residual == 0.0
    assert out.breakdown is None


@pytest.mark.parametrize("kind", KINDS)
def test_exact_start_does_nothing(kind):
    psf, G = blur_system(0.7)
    F = direct_solve(build_toeplitz(psf, G.shape), G)
    out = smooth(kind, make_operator_action(psf), G, F, SolveControl(max_iters=50, rel_tol=1e-8))
    assert out.iters_done == 0
    assert out.final_rel_residual <= 1e-8


@pytest.mark.parametrize("kind", KINDS)
def test_matches_direct_solve(kind):
    psf, G = blur_system(0.7)
    ref = direct_solve(build_toeplitz(psf, G.shape), G)
    out = smooth(kind, make_operator_action(psf), G, np.zeros_like(G), SolveControl(max_iters=2000, rel_tol=1e-8))
    assert out.breakdown is None
    assert out.final_rel_residual <= 1e-8
    assert fro_norm(out.F - ref) / fro_norm(ref) < 1e-6


@pytest.mark.parametrize("sigma", [0.7, 0.8, 0.9])
@pytest.mark.parametrize("dims", [(4, 4, 3), (8, 8, 3), (6, 8, 3)])
@pytest.mark.parametrize("kind", KINDS)
def test_converges_on_blur_systems(kind, sigma, dims):
    psf, G = blur_system(sigma, dims, seed=3)
    T = build_toeplitz(psf, dims)
    ref = direct_solve(T, G)
    out = smooth(kind, make_operator_action(psf), G, np.zeros_like(G), SolveControl(max_iters=2000, rel_tol=1e-8))
    assert out.final_rel_residual <= 1e-8
    # forward-error bound from the residual
    cond = np.linalg.cond(T.reshape(np.prod(dims), -1))
    assert fro_norm(out.F - ref) / fro_norm(ref) <= 2 * cond * 1e-8


@pytest.mark.parametrize("sigma", [0.7, 0.8, 0.9])
def test_cr_residual_monotone(sigma):
    psf, G = blur_system(sigma, (16, 16, 3), seed=5)
    out = smooth("cr", make_operator_action(psf), G, G, SolveControl(max_iters=3 * RECOMPUTE_EVERY, record_history=True))
    h = np.array(out.residual_history)
    assert len(h) == out.iters_done + 1
    assert np.all(np.diff(h) <= 1e-15 * h[:-1])


def test_bicg_equals_cg_on_symmetric():
    psf, G = blur_system(0.8, (8, 8, 3), seed=7)
    A = make_operator_action(psf)
    x0 = np.zeros_like(G)
    ref = cg_reference(A, G, x0, 5)
    for k in range(1, 6):
        out = smooth("bicg", A, G, x0, SolveControl.fixed(k))
        assert fro_norm(out.F - ref[k - 1]) <= 1e-10 * fro_norm(ref[k - 1])


@pytest.mark.parametrize("kind", KINDS)
def test_fixed_count_runs_exactly(kind):
    psf, G = blur_system(0.9, (16, 16, 3))
    for m in (0, 1, 4, 9):
        out = smooth(kind, make_operator_action(psf), G, G, SolveControl.fixed(m))
        assert out.iters_done == m


def test_work_accounting():
    # operator applications: one per step for CR, two for BiCG and CGS, plus the
    # initial residual, CR's initial T*R and the final residual check
    psf, G = blur_system(0.9, (16, 16, 3))
    m = 9
    expected = {"cr": m + 2, "bicg": 2 * m + 2, "cgs": 2 * m + 2}
    for kind, n in expected.items():
        out = smooth(kind, make_operator_action(psf), G, G, SolveControl.fixed(m))
        assert out.matvecs == n, kind


@pytest.mark.parametrize("kind", KINDS)
def test_reported_residual_is_fresh(kind):
    psf, G = blur_system(0.9, (16, 16, 3))
    A = make_operator_action(psf)
    out = smooth(kind, A, G, np.zeros_like(G), SolveControl.fixed(60))
    fresh = fro_norm(G - A(out.F)) / fro_norm(G)
    assert out.final_rel_residual == pytest.approx(fresh, rel=1e-8)


def test_breakdown_returns_best_iterate():
    # rotation by 90 degrees: <R, T*R> = 0 from the start
    def rot(X):
        Y = np.empty_like(X)
        Y[..., 0] = -X[..., 1]
        Y[..., 1] = X[..., 0]
        return Y

    G = np.zeros((1, 1, 2))
    G[0, 0, 0] = 1.0
    for kind in ("cr", "cgs"):
        out = smooth(kind, rot, G, np.zeros_like(G), SolveControl(max_iters=10))
        assert out.breakdown is not None
        assert np.all(np.isfinite(out.F))
        assert out.final_rel_residual == pytest.approx(1.0)


def test_operator_action():
    psf = gaussian_psf(0.8)
    A = make_operator_action(psf)
    assert not np.any(A(np.zeros((4, 4, 3))))
    rng = np.random.default_rng(9)
    X, Y = rng.random((4, 4, 3)), rng.random((4, 4, 3))
    np.testing.assert_allclose(A(X), einstein_product(build_toeplitz(psf, X.shape), X), rtol=1e-12, atol=1e-14)
    assert fro_norm(A(3 * X + Y) - 3 * A(X) - A(Y)) <= 1e-12 * fro_norm(A(3 * X + Y))


def test_smooth_rejects_mismatched_dims():
    with pytest.raises(ValueError):
        smooth("cr", lambda X: X, np.ones((2, 2, 3)), np.ones((2, 2, 1)), SolveControl.fixed(1))
