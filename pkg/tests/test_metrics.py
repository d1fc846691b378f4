import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascadic.metrics import RestorationReport, format_psnr, psnr, relative_error, score
from cascadic.tensor import DimensionError


def test_relative_error_examples():
    F = np.ones((2, 2, 3))
    assert relative_error(F, F) == 0.0
    assert relative_error(F, F + 0.1) == pytest.approx(0.1, rel=1e-14)


def test_relative_error_zero_reference():
    with pytest.raises(ValueError):
        relative_error(np.zeros((1, 1, 1)), np.ones((1, 1, 1)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100) | st.floats(-100, -0.01))
def test_relative_error_scale_invariant(seed, c):
    rng = np.random.default_rng(seed)
    F, G = rng.random((3, 3, 3)) + 0.1, rng.random((3, 3, 3))
    assert relative_error(c * F, c * G) == pytest.approx(relative_error(F, G), rel=1e-12)


def test_psnr_twenty_db():
    assert psnr(np.ones((1, 1, 1)), np.full((1, 1, 1), 0.9)) == pytest.approx(20.0, abs=1e-12)


def test_psnr_identical_is_inf():
    X = np.random.default_rng(0).random((4, 4, 3))
    assert psnr(X, X) == math.inf
    assert format_psnr(psnr(X, X)) == "inf"
    assert format_psnr(20.5) == "20.5"


def test_psnr_size_invariance():
    F1 = np.full((2, 2, 3), 0.8)
    F2 = np.full((4, 2, 3), 0.8)
    assert psnr(F1, F1 + 0.05) == pytest.approx(psnr(F2, F2 + 0.05), rel=1e-14)


def test_psnr_uses_reference_peak():
    F = np.full((2, 2, 1), 0.5)
    # peak 0.5, mse 0.01 -> 10 log10(0.25 / 0.01)
    assert psnr(F, F + 0.1) == pytest.approx(10 * math.log10(25.0), rel=1e-13)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.5), st.floats(1.1, 4.0))
def test_psnr_decreases_with_error(seed, a, factor):
    rng = np.random.default_rng(seed)
    F = rng.random((3, 3, 3)) + 0.1
    E = rng.standard_normal((3, 3, 3))
    assert psnr(F, F + a * factor * E) < psnr(F, F + a * E)


def test_shape_mismatch():
    with pytest.raises(DimensionError):
        psnr(np.ones((2, 2, 3)), np.ones((2, 2, 1)))


def test_report_evaluate_and_dict():
    F = np.ones((2, 2, 3))
    r = RestorationReport(F=F + 0.1, method="ctmg", smoother="cr", levels=2, iters_per_level=[4], final_rel_residual=0.1)
    q = r.evaluate(F)
    assert q == score(F, F + 0.1)
    d = r.to_dict()
    assert d["re"] == pytest.approx(0.1)
    assert d["psnr_db"] == repr(q.psnr)
    assert r.total_iters == 4
