import numpy as np
import pytest

from mfcrowd import DimensionError, TorusGrid, build_kernel, check_convexity
from mfcrowd.kernels import LOCAL, NONLOCAL


def test_local_identity_certified():
    grid = TorusGrid(32)
    verdict = check_convexity(np.eye(2), build_kernel(grid, LOCAL), grid)
    assert verdict.status == "certified_psd"
    assert verdict.ok
    assert verdict.eigenvalues == (1.0, 1.0)


def test_local_strong_cross_aversion_violated():
    # LB = [[1, 3], [0, 1]] symmetrizes to [[1, 1.5], [1.5, 1]] with
    # eigenvalues 1 -/+ 1.5, so the quadratic form is indefinite
    grid = TorusGrid(32)
    lb = np.array([[1.0, 3.0], [0.0, 1.0]])
    verdict = check_convexity(lb, build_kernel(grid, LOCAL), grid)
    assert verdict.status == "violated"
    assert not verdict.ok
    assert verdict.eigenvalues == pytest.approx((-0.5, 2.5), abs=1e-12)


def test_one_sided_kernel_single_crowd_sampled_ok():
    grid = TorusGrid(128)
    kern = build_kernel(grid, NONLOCAL, support_lo=0.0, support_hi=0.2)
    verdict = check_convexity(np.eye(1), kern, grid, trials=50, seed=0)
    assert verdict.status == "sampled_ok"
    assert verdict.ok
    assert verdict.trials == 50
    assert verdict.min_value is not None and verdict.min_value >= -1e-10


def test_negative_weight_nonlocal_violated_with_witness():
    grid = TorusGrid(64)
    kern = build_kernel(grid, NONLOCAL, support_lo=0.0, support_hi=0.2)
    verdict = check_convexity(np.array([[-1.0]]), kern, grid, trials=50, seed=0)
    assert verdict.status == "violated"
    assert not verdict.ok
    assert verdict.min_value is not None and verdict.min_value < -1e-10
    # the witness pair reproduces the reported quadratic-form value
    m_a, m_b = verdict.witness
    w = m_a - m_b
    conv = w @ kern.matrix().T
    value = grid.h * float(np.sum((np.array([[-1.0]]).T @ conv) * w))
    assert value == pytest.approx(verdict.min_value, rel=1e-12)


def test_sampled_verdict_is_seed_reproducible():
    grid = TorusGrid(64)
    kern = build_kernel(grid, NONLOCAL)
    one = check_convexity(np.eye(1), kern, grid, trials=20, seed=7)
    two = check_convexity(np.eye(1), kern, grid, trials=20, seed=7)
    assert one.min_value == two.min_value
    assert one.seed == 7


def test_convexity_argument_guards():
    grid = TorusGrid(32)
    kern = build_kernel(grid, LOCAL)
    with pytest.raises(DimensionError):
        check_convexity(np.ones((2, 3)), kern, grid)
    with pytest.raises(DimensionError):
        check_convexity(np.eye(1), kern, grid, trials=0)
