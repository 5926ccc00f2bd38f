import numpy as np
import pytest

from fullcount.hilbert import DensityMatrix, basis_ket
from fullcount.liouville import build_liouvillian, evolve
from fullcount.models import decaying_qubit, poisson_qubit, telegraph_qubit, two_spins_same
from fullcount.trajectories import (
    TrajectoryBatch,
    empirical_cumulants,
    ensemble_populations,
    simulate_batch,
    simulate_jump_trajectory,
    trajectory_seeds,
)

UP, DOWN = np.array([1.0, 0.0]), np.array([0.0, 1.0])


def test_dark_state_never_jumps():
    b = simulate_batch(decaying_qubit(1.0), 0, DOWN, 50.0, n_traj=50, seed=1)
    assert not b.counts.any()


def test_excited_state_emits_once():
    b = simulate_batch(decaying_qubit(1.0), 0, UP, 60.0, n_traj=200, seed=2)
    assert np.all(b.counts == 1)


def test_poisson_counts_statistics():
    gam, T = 1.5, 40.0
    b = simulate_batch(poisson_qubit(gam), 0, UP, T, n_traj=3000, seed=3)
    e = empirical_cumulants(b)
    assert abs(e.kappa1_hat - gam) < 4 * e.se1
    assert abs(e.kappa2_hat - gam) < 4 * e.se2


def test_telegraph_variance_rate():
    a, bb, T = 1.0, 2.0, 200.0
    b = simulate_batch(telegraph_qubit(a, bb), 0, DensityMatrix(np.diag([bb, a]) / (a + bb)), T,
                       n_traj=1500, seed=4)
    e = empirical_cumulants(b)
    assert abs(e.kappa1_hat - a * bb / (a + bb)) < 4 * e.se1
    assert abs(e.kappa2_hat - a * bb * (a * a + bb * bb) / (a + bb) ** 3) < 4 * e.se2


def test_all_equal_counts():
    batch = TrajectoryBatch(np.full(150, 7), np.full((150, 1), 7), 10.0, tuple(range(150)), "x", 0)
    e = empirical_cumulants(batch)
    assert e.kappa2_hat == 0.0 and e.kappa1_hat == pytest.approx(0.7)


def test_minimum_batch_size():
    batch = TrajectoryBatch(np.zeros(10), np.zeros((10, 1)), 1.0, tuple(range(10)), "x", 0)
    with pytest.raises(ValueError):
        empirical_cumulants(batch)


def test_determinism_and_single_trajectory_agreement():
    m = two_spins_same(0.3, 1.0)
    a = simulate_batch(m, 0, basis_ket(0, m.layout), 30.0, n_traj=20, seed=11, keep_final=True)
    b = simulate_batch(m, 0, basis_ket(0, m.layout), 30.0, n_traj=20, seed=11, keep_final=True)
    assert np.array_equal(a.channel_counts, b.channel_counts)
    assert np.array_equal(a.final_states, b.final_states)
    k, psi = simulate_jump_trajectory(m, 0, basis_ket(0, m.layout), 30.0, seed=a.seeds[7])
    assert np.array_equal(k, a.channel_counts[7])
    assert np.allclose(psi, a.final_states[7], atol=1e-12)


def test_seeds_depend_on_master_seed():
    assert trajectory_seeds(0, 5) == trajectory_seeds(0, 5)
    assert trajectory_seeds(0, 5) != trajectory_seeds(1, 5)


def test_dt_bracket_does_not_change_counts_distribution():
    m = poisson_qubit(1.0)
    a = simulate_batch(m, 0, UP, 20.0, n_traj=300, seed=5, dt=0.05)
    e = empirical_cumulants(a)
    assert abs(e.kappa1_hat - 1.0) < 4 * e.se1


def test_final_states_normalised():
    m = two_spins_same(0.5, 0.7)
    b = simulate_batch(m, {0: 1, 1: 1}, basis_ket(3, m.layout), 10.0, n_traj=30, seed=6,
                       keep_final=True)
    assert np.allclose(np.linalg.norm(b.final_states, axis=1), 1.0, atol=1e-10)
    assert np.array_equal(b.counts, b.channel_counts.sum(axis=1))


def test_ensemble_populations_match_master_equation():
    m = two_spins_same(0.4, 1.0)
    psi0 = basis_ket(3, m.layout)
    times = [0.5, 1.5, 3.0]
    mean, se = ensemble_populations(m, psi0, times, n_traj=3000, seed=9)
    W = build_liouvillian(m)
    rho0 = DensityMatrix(np.outer(psi0, psi0.conj()))
    for i, t in enumerate(times):
        p = np.real(np.diag(evolve(W, rho0, t).matrix))
        assert np.all(np.abs(mean[i] - p) <= 4 * se[i] + 1e-3)


def test_bad_arguments():
    with pytest.raises(ValueError):
        simulate_batch(poisson_qubit(1.0), 0, UP, -1.0, n_traj=3)
    with pytest.raises(ValueError):
        simulate_batch(poisson_qubit(1.0), 0, UP, 1.0, n_traj=0)
