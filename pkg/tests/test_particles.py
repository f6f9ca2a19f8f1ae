import numpy as np
import pytest

from mfcrowd import (
    ControlField,
    DensityField,
    DimensionError,
    Dynamics,
    ParticleEnsemble,
    TimeGrid,
    TorusGrid,
    build_kernel,
    density_quantiles,
    empirical_histogram,
    empirical_risk,
    risk_convergence_study,
    simulate_particles,
    wasserstein2_1d,
)
from mfcrowd.errors import KernelModeError
from mfcrowd.particles import StudyResult, _cells

from .oracles import brute_force_w2_circle, geodesic


def spike_m0(grid, cell):
    m0 = np.zeros(grid.n_x)
    m0[cell] = 1.0 / grid.h
    return m0


def zero_control(grid, tg, a_max=1.0):
    return ControlField(np.zeros((tg.n_t, grid.n_x)), grid, tg, a_max)


def pinned_ensemble(grid, tg, cells):
    """Motionless particles, one per requested cell."""
    x = np.array([c * grid.h for c in cells])
    positions = np.tile(x[:, None], (1, tg.n_t + 1))
    return ParticleEnsemble(positions=positions, seed=0, grid=grid, time_grid=tg)


def test_same_seed_reproduces_paths_bitwise():
    grid = TorusGrid(32)
    tg = TimeGrid(0.01, 16)
    m0 = spike_m0(grid, 4)
    a = zero_control(grid, tg)
    one = simulate_particles(8, a, m0, Dynamics(1.0), grid, tg, seed=42)
    two = simulate_particles(8, a, m0, Dynamics(1.0), grid, tg, seed=42)
    assert np.array_equal(one.positions, two.positions)


def test_particle_prefix_is_seed_stable_across_ensemble_sizes():
    # substreams are spawned per particle, so growing N extends the ensemble
    # without rewriting the paths already drawn
    grid = TorusGrid(32)
    tg = TimeGrid(0.01, 16)
    m0 = spike_m0(grid, 4)
    a = zero_control(grid, tg)
    small = simulate_particles(8, a, m0, Dynamics(1.0), grid, tg, seed=7)
    large = simulate_particles(16, a, m0, Dynamics(1.0), grid, tg, seed=7)
    assert np.array_equal(large.positions[:8], small.positions)


def test_frozen_dynamics_keep_particles_still():
    grid = TorusGrid(32)
    tg = TimeGrid(0.01, 16)
    out = simulate_particles(5, zero_control(grid, tg), spike_m0(grid, 9),
                             Dynamics(0.0), grid, tg, seed=0)
    assert np.array_equal(out.positions, np.tile(out.positions[:, :1], (1, 17)))


def test_brownian_variance_matches_time():
    # additive noise makes Euler-Maruyama exact in law; displacement
    # variance after time t is sigma^2 t for any step count
    grid = TorusGrid(64)
    tg = TimeGrid(0.01, 16)
    n = 4000
    out = simulate_particles(n, zero_control(grid, tg), spike_m0(grid, 32),
                             Dynamics(1.0), grid, tg, seed=1)
    d = out.positions[:, -1] - out.positions[:, 0]
    d = np.where(d > 0.5, d - 1.0, np.where(d < -0.5, d + 1.0, d))
    var = float(np.var(d))
    se = 0.01 * np.sqrt(2.0 / (n - 1))
    assert abs(var - 0.01) < 3 * se + 1e-4


def test_initial_positions_follow_inverse_cdf():
    grid = TorusGrid(64)
    tg = TimeGrid(1e-3, 2)
    m0 = np.zeros(64)
    m0[10] = 0.25 / grid.h
    m0[20] = 0.75 / grid.h
    n = 2000
    out = simulate_particles(n, zero_control(grid, tg), m0, Dynamics(0.0),
                             grid, tg, seed=3)
    cells0 = _cells(out.positions[:, 0], grid)
    assert set(np.unique(cells0)) == {10, 20}
    frac = float(np.mean(cells0 == 20))
    # binomial(2000, 0.75): four sigma is about 0.039
    assert abs(frac - 0.75) < 0.04


def test_simulate_validation():
    grid = TorusGrid(16)
    tg = TimeGrid(1e-3, 2)
    a = zero_control(grid, tg)
    with pytest.raises(DimensionError):
        simulate_particles(0, a, spike_m0(grid, 0), Dynamics(1.0), grid, tg, 0)
    with pytest.raises(DimensionError):
        simulate_particles(2, a, np.zeros(8), Dynamics(1.0), grid, tg, 0)
    with pytest.raises(DimensionError):
        simulate_particles(2, a, np.zeros(16), Dynamics(1.0), grid, tg, 0)


def test_empirical_risk_rejects_local_kernel():
    grid = TorusGrid(16)
    tg = TimeGrid(1e-3, 2)
    ens = pinned_ensemble(grid, tg, [3, 8])
    with pytest.raises(KernelModeError):
        empirical_risk(0, ens, zero_control(grid, tg), build_kernel(grid, "local"),
                       1.0, np.zeros(16), grid, tg)


def test_empirical_risk_free_particle_is_zero():
    grid = TorusGrid(16)
    tg = TimeGrid(1e-2, 8)
    ens = pinned_ensemble(grid, tg, [3, 8])
    kern = build_kernel(grid, "nonlocal", support_lo=0.0, support_hi=0.2, delta=0.0)
    risk = empirical_risk(0, ens, zero_control(grid, tg), kern, 0.0,
                          np.zeros(16), grid, tg)
    assert risk == 0.0


def test_empirical_risk_one_sided_kernel_sees_left_neighbor_only():
    # the averaging window trails each particle, so the right particle of a
    # close pair pays aversion and the left one pays nothing
    grid = TorusGrid(64)
    tg = TimeGrid(0.25, 32)
    kern = build_kernel(grid, "nonlocal", support_lo=0.0, support_hi=0.2, delta=0.0)
    ens = pinned_ensemble(grid, tg, [10, 12])
    coupling = 5.0
    left = empirical_risk(0, ens, zero_control(grid, tg), kern, coupling,
                          np.zeros(64), grid, tg)
    right = empirical_risk(1, ens, zero_control(grid, tg), kern, coupling,
                           np.zeros(64), grid, tg)
    assert left == 0.0
    # every one of the n_t slices contributes dt * C * w[2] / (N - 1)
    assert right == pytest.approx(coupling * tg.horizon * 5.0, rel=1e-12)


def test_empirical_risk_far_pair_has_no_aversion():
    grid = TorusGrid(64)
    tg = TimeGrid(0.25, 32)
    kern = build_kernel(grid, "nonlocal", support_lo=0.0, support_hi=0.2, delta=0.0)
    ens = pinned_ensemble(grid, tg, [10, 40])
    for i in range(2):
        assert empirical_risk(i, ens, zero_control(grid, tg), kern, 5.0,
                              np.zeros(64), grid, tg) == 0.0


def test_empirical_risk_terminal_and_energy_terms():
    grid = TorusGrid(16)
    tg = TimeGrid(0.1, 4)
    kern = build_kernel(grid, "nonlocal", support_lo=0.0, support_hi=0.2, delta=0.0)
    ens = pinned_ensemble(grid, tg, [3, 11])
    psi = np.arange(16.0)
    a_vals = np.full((4, 16), 2.0)
    ctrl = ControlField(a_vals, grid, tg, a_max=5.0)
    risk = empirical_risk(0, ens, ctrl, kern, 0.0, psi, grid, tg)
    # energy 1/2 * 2^2 over the horizon plus psi at the terminal cell
    assert risk == pytest.approx(0.5 * 4.0 * 0.1 + psi[3], rel=1e-12)


def test_empirical_histogram_spike_and_mass():
    grid = TorusGrid(16)
    tg = TimeGrid(1e-3, 2)
    ens = pinned_ensemble(grid, tg, [5, 5, 5, 5])
    hist = empirical_histogram(ens, 0, grid)
    assert hist[5] == pytest.approx(1.0 / grid.h)
    assert float(np.sum(hist) * grid.h) == pytest.approx(1.0)
    with pytest.raises(DimensionError):
        empirical_histogram(ens, 3, grid)


def test_w2_identical_samples_is_zero():
    x = np.array([0.1, 0.4, 0.9])
    assert wasserstein2_1d(x, x.copy()) == 0.0


def test_w2_single_atoms_equal_geodesic():
    for x, y in [(0.1, 0.3), (0.05, 0.95), (0.0, 0.5), (0.7, 0.2)]:
        assert wasserstein2_1d([x], [y]) == pytest.approx(geodesic(x, y), abs=1e-15)


def test_w2_matches_brute_force_permutations():
    rng = np.random.default_rng(0)
    for n in (2, 3, 4, 5, 6):
        for _ in range(5):
            a = rng.uniform(0.0, 1.0, n)
            b = rng.uniform(0.0, 1.0, n)
            assert wasserstein2_1d(a, b) == pytest.approx(
                brute_force_w2_circle(a, b), rel=1e-12)


def test_w2_shift_across_wrap():
    # a rigid rotation costs exactly the rotation angle as long as it stays
    # below half the point spacing (beyond that a cyclic re-pairing wins)
    a = np.array([0.1, 0.35, 0.6, 0.85])
    b = np.mod(a + 0.1, 1.0)
    assert wasserstein2_1d(a, b) == pytest.approx(0.1, abs=1e-12)


def test_w2_input_validation():
    with pytest.raises(DimensionError):
        wasserstein2_1d([0.1, 0.2], [0.3])
    with pytest.raises(DimensionError):
        wasserstein2_1d([], [])


def test_density_quantiles_uniform_are_evenly_spaced():
    grid = TorusGrid(16)
    q = density_quantiles(np.full(16, 1.0), grid, 8)
    assert np.allclose(np.diff(q), 1.0 / 8)


def test_density_quantiles_spike_stay_in_cell():
    grid = TorusGrid(16)
    q = density_quantiles(spike_m0(grid, 4), grid, 5)
    assert np.all(_cells(q, grid) == 4)
    with pytest.raises(DimensionError):
        density_quantiles(np.full(16, 1.0), grid, 0)


def test_study_streaming_mean_matches_naive_loop():
    grid = TorusGrid(32)
    tg = TimeGrid(0.02, 32)
    rng = np.random.default_rng(4)
    kern = build_kernel(grid, "nonlocal", support_lo=0.0, support_hi=0.2, delta=0.0)
    a = ControlField(rng.uniform(-1.0, 1.0, (32, 32)), grid, tg, a_max=2.0)
    density_of = np.full((33, 32), 1.0)
    mean_density = DensityField(density_of, grid, tg)
    m0 = np.full(32, 1.0)
    psi = rng.uniform(0.0, 1.0, 32)
    coupling = 3.0
    study = risk_convergence_study(
        a, m0, mean_density, 1.25, kern, coupling, psi, Dynamics(1.0), grid, tg,
        ladder=(4, 6), n_replicates=2, base_seed=11, n_checkpoints=3)
    for row in study.rows:
        seed = np.random.SeedSequence(entropy=(11, row.n_particles, row.replicate))
        ens = simulate_particles(row.n_particles, a, m0, Dynamics(1.0), grid, tg, seed)
        naive = np.mean([
            empirical_risk(i, ens, a, kern, coupling, psi, grid, tg)
            for i in range(row.n_particles)
        ])
        assert row.mean_empirical_risk == pytest.approx(naive, rel=1e-10)
        assert row.gap == pytest.approx(row.mean_empirical_risk - 1.25, abs=1e-12)
    assert study.ladder == (4, 6)
    assert set(study.checkpoints) == {4, 6}
    table = study.checkpoints[4]
    assert table.w2.shape == table.times.shape == table.slice_indices.shape
    # replicate-0 checkpoint histograms carry unit mass per slice
    masses = table.histograms.sum(axis=1) * grid.h
    assert np.allclose(masses, 1.0)


def test_study_rejects_local_kernel():
    grid = TorusGrid(16)
    tg = TimeGrid(1e-2, 4)
    m = DensityField(np.full((5, 16), 1.0), grid, tg)
    with pytest.raises(KernelModeError):
        risk_convergence_study(zero_control(grid, tg), np.full(16, 1.0), m, 0.0,
                               build_kernel(grid, "local"), 1.0, np.zeros(16),
                               Dynamics(1.0), grid, tg, ladder=(2,), n_replicates=1)


def test_study_monotonicity_helpers():
    made = StudyResult(rows=(), ladder=(2, 4), mean_abs_gap={2: 1.0, 4: 0.5},
                       mean_w2_terminal={2: 0.5, 4: 0.6}, checkpoints={})
    assert made.gaps_non_increasing()
    assert not made.w2_non_increasing()
