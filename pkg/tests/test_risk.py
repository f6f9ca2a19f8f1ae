import numpy as np
import pytest

from mfcrowd import (
    ControlField,
    DensityField,
    DimensionError,
    RiskBreakdown,
    TimeGrid,
    TorusGrid,
    build_kernel,
    crowd_risk,
    hamiltonian_integrand,
    pooled_risk,
    symmetrize_lambda,
)
from mfcrowd.kernels import LOCAL, NONLOCAL, penalty_field

from .oracles import triple_loop_risk


def random_setup(seed, n_x=16, n_t=4, crowds=1):
    rng = np.random.default_rng(seed)
    grid = TorusGrid(n_x)
    tg = TimeGrid(n_t * 1e-4, n_t)
    controls, densities, psis = [], [], []
    for _ in range(crowds):
        vals = rng.uniform(0.1, 1.0, (n_t + 1, n_x))
        vals /= (vals.sum(axis=1, keepdims=True) * grid.h)
        densities.append(DensityField(vals, grid, tg))
        controls.append(ControlField(rng.uniform(-2, 2, (n_t, n_x)), grid, tg, a_max=5.0))
        psis.append(rng.uniform(0.0, 3.0, n_x))
    return grid, tg, controls, densities, np.array(psis)


@pytest.mark.parametrize("mode", [LOCAL, NONLOCAL])
def test_pooled_risk_matches_raw_loops_single_crowd(mode):
    grid, tg, controls, densities, psis = random_setup(0)
    kern = build_kernel(grid, mode, support_lo=0.0, support_hi=0.2, delta=0.0)
    lb = np.eye(1)
    out = pooled_risk(controls, densities, psis, lb, kern, 12.0, grid, tg)
    weights = None if kern.is_local else kern.weights
    energy, aversion, terminal = triple_loop_risk(
        [c.values for c in controls], [d.values for d in densities], psis,
        lb, weights, 12.0, grid.h, tg.dt)
    assert out.energy == pytest.approx(energy, abs=1e-13)
    assert out.aversion == pytest.approx(aversion, abs=1e-13)
    assert out.terminal == pytest.approx(terminal, abs=1e-13)
    assert out.total == pytest.approx(energy + aversion + terminal, abs=1e-13)


def test_pooled_risk_matches_raw_loops_two_crowds():
    grid, tg, controls, densities, psis = random_setup(1, crowds=2)
    kern = build_kernel(grid, NONLOCAL, support_lo=0.0, support_hi=0.25, delta=0.0)
    lb = np.array([[1.0, 0.7], [0.0, 1.0]])
    out = pooled_risk(controls, densities, psis, lb, kern, 5.0, grid, tg)
    energy, aversion, terminal = triple_loop_risk(
        [c.values for c in controls], [d.values for d in densities], psis,
        lb, kern.weights, 5.0, grid.h, tg.dt)
    assert out.energy == pytest.approx(energy, abs=1e-13)
    assert out.aversion == pytest.approx(aversion, abs=1e-13)
    assert out.terminal == pytest.approx(terminal, abs=1e-13)


def test_pooled_risk_zero_coupling_has_zero_aversion():
    grid, tg, controls, densities, psis = random_setup(2)
    kern = build_kernel(grid, NONLOCAL)
    out = pooled_risk(controls, densities, psis, np.eye(1), kern, 0.0, grid, tg)
    assert out.aversion == 0.0


def test_crowd_risk_matches_raw_loops():
    # crowd j's game risk is the pooled loop with the other crowd's energy
    # and terminal muted and Lambda's row j placed against m_j
    grid, tg, controls, densities, psis = random_setup(3, crowds=2)
    kern = build_kernel(grid, NONLOCAL, support_lo=0.0, support_hi=0.2, delta=0.0)
    lam = np.array([[1.0, 0.4], [0.4, 1.0]])
    for j in range(2):
        out = crowd_risk(j, controls, densities, psis[j], lam, kern, 9.0, grid, tg)
        lb = np.zeros((2, 2))
        lb[:, j] = lam[j]
        a_muted = [c.values if i == j else np.zeros_like(c.values)
                   for i, c in enumerate(controls)]
        psi_muted = [psis[j] if i == j else np.zeros(grid.n_x) for i in range(2)]
        energy, aversion, terminal = triple_loop_risk(
            a_muted, [d.values for d in densities], psi_muted,
            lb, kern.weights, 9.0, grid.h, tg.dt)
        assert out.energy == pytest.approx(energy, abs=1e-13)
        assert out.aversion == pytest.approx(aversion, abs=1e-13)
        assert out.terminal == pytest.approx(terminal, abs=1e-13)


def test_pooled_risk_accepts_precomputed_penalties():
    from mfcrowd.risk import _penalty_stacks

    grid, tg, controls, densities, psis = random_setup(4)
    kern = build_kernel(grid, NONLOCAL)
    direct = pooled_risk(controls, densities, psis, np.eye(1), kern, 3.0, grid, tg)
    reused = pooled_risk(controls, densities, psis, np.eye(1), kern, 3.0, grid, tg,
                         _penalties=_penalty_stacks(densities, kern))
    assert direct == reused


def test_risk_breakdown_total_is_sum():
    b = RiskBreakdown.build(1.25, 0.5, 0.125)
    assert b.total == 1.875


def test_symmetrize_lambda_upper_triangular():
    lam = np.array([[1.0, 0.3, 0.2], [0.3, 1.0, 0.5], [0.2, 0.5, 2.0]])
    lb = symmetrize_lambda(lam)
    assert np.array_equal(lb, np.triu(lam))
    # reconstruction identity
    assert np.array_equal(lb + lb.T - np.diag(np.diag(lb)), lam)


def test_symmetrize_lambda_identity_passthrough():
    assert np.array_equal(symmetrize_lambda(np.eye(3)), np.eye(3))


def test_symmetrize_lambda_rejects_asymmetric():
    with pytest.raises(DimensionError, match="symmetric"):
        symmetrize_lambda(np.array([[1.0, 0.5], [0.2, 1.0]]))
    with pytest.raises(DimensionError, match="square"):
        symmetrize_lambda(np.ones((2, 3)))


def test_hamiltonian_integrand_matches_loops():
    rng = np.random.default_rng(5)
    grid = TorusGrid(16)
    kern = build_kernel(grid, NONLOCAL, support_lo=0.0, support_hi=0.2, delta=0.0)
    a = rng.uniform(-2, 2, (2, 16))
    m = rng.uniform(0.1, 1.0, (2, 16))
    dp = rng.uniform(-1, 1, (2, 16))
    lb = np.array([[1.0, 0.2], [0.0, 1.0]])
    coupling = 4.0
    out = hamiltonian_integrand(a, m, dp, lb, kern, coupling, grid)
    expect = np.zeros(16)
    for j in range(2):
        expect += 0.5 * a[j] ** 2 * m[j] + a[j] * m[j] * dp[j]
    for l in range(2):
        pen = penalty_field(kern, m[l], grid)
        for lp in range(2):
            expect += coupling * lb[l, lp] * pen * m[lp]
    assert np.allclose(out, expect, atol=1e-13)


def test_hamiltonian_integrand_shape_guard():
    grid = TorusGrid(16)
    kern = build_kernel(grid, LOCAL)
    with pytest.raises(DimensionError):
        hamiltonian_integrand(np.zeros((1, 16)), np.zeros((2, 16)),
                              np.zeros((1, 16)), np.eye(1), kern, 1.0, grid)


def test_risk_validation_errors():
    grid, tg, controls, densities, psis = random_setup(6)
    kern = build_kernel(grid, LOCAL)
    with pytest.raises(DimensionError):
        pooled_risk(controls, densities, psis, np.eye(2), kern, 1.0, grid, tg)
    with pytest.raises(DimensionError):
        crowd_risk(1, controls, densities, psis[0], np.eye(1), kern, 1.0, grid, tg)
    with pytest.raises(DimensionError):
        crowd_risk(0, controls, densities, psis[0][:8], np.eye(1), kern, 1.0, grid, tg)
