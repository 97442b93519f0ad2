import numpy as np
import pytest

from swlp.estimates import weak_residual
from swlp.presets import scalar_system
from swlp.solvers import DivergenceError, PicardError, march, mild_solve_picard, mild_solve_stepping, picard_window
from swlp.stochastics import TimeGrid, mc_estimate, refine_brownian, sample_brownian
from swlp.system import psi_matrix


def test_deterministic_exact_decay():
    sys = scalar_system(a=-1.0)
    traj = mild_solve_stepping(sys, np.ones(1))
    assert traj.paths == 1
    assert np.allclose(traj.states[0, :, 0], np.exp(-sys.grid.nodes), atol=1e-13)


def test_constant_forcing_first_order():
    errs = []
    for N in (64, 128, 256):
        sys = scalar_system(a=-1.0, grid=TimeGrid(1.0, N))
        y = mild_solve_stepping(sys, np.zeros(1), np.ones(N)).states[0, -1, 0]
        errs.append(abs(y - (1 - np.exp(-1.0))))
    assert 1.9 < errs[0] / errs[1] < 2.1 and 1.9 < errs[1] / errs[2] < 2.1


def test_ou_second_moment():
    sys = scalar_system(sigma=0.5)
    ens = sample_brownian(sys.grid, 10_000, 20240601)
    Y = mild_solve_stepping(sys, np.ones(1), None, ens).states[:, -1, 0]
    assert mc_estimate(Y ** 2).within(np.exp(-2 + 0.25), 3, bias=5 * sys.grid.dt)


def test_noise_requires_ensemble():
    with pytest.raises(ValueError):
        mild_solve_stepping(scalar_system(sigma=0.5), np.ones(1))


def test_march_matches_stored_states():
    sys = scalar_system(sigma=0.3, grid=TimeGrid(1, 16))
    ens = sample_brownian(sys.grid, 8, 1)
    traj = mild_solve_stepping(sys, np.ones(1), None, ens)
    for n, Y in march(sys, np.ones(1), None, ens):
        assert np.array_equal(Y, traj.states[:, n])


@pytest.mark.filterwarnings("ignore:overflow")
def test_divergence_reported():
    sys = scalar_system(a=800.0, grid=TimeGrid(1.0, 4))
    with pytest.raises(DivergenceError):
        mild_solve_stepping(sys, np.ones(1))


@pytest.mark.parametrize("sigma,f1", [(0.0, 0.4), (0.5, 0.0), (0.8, -0.3)])
def test_picard_agrees_with_stepping(sigma, f1):
    sys = scalar_system(f1=f1, sigma=sigma, grid=TimeGrid(1.0, 128))
    ens = None if sigma == 0 else sample_brownian(sys.grid, 500, 3)
    tol = 1e-6
    traj, info = mild_solve_picard(sys, np.ones(1), np.ones(128), ens, tol=tol)
    ref = mild_solve_stepping(sys, np.ones(1), np.ones(128), ens)
    dist = np.sqrt(np.max(np.mean(np.abs(traj.states - ref.states) ** 2, axis=0)))
    assert dist < 5 * tol
    assert max(info["contraction"]) < 0.5
    assert info["windows"][0][0] == 0 and info["windows"][-1][1] == 128


def test_picard_window_shrinks_with_noise():
    g = TimeGrid(1.0, 256)
    assert picard_window(scalar_system(grid=g)) == 256
    assert picard_window(scalar_system(sigma=2.0, grid=g)) < picard_window(scalar_system(sigma=0.5, grid=g))


def test_picard_failure_is_reported():
    sys = scalar_system(sigma=1.0, grid=TimeGrid(1.0, 64))
    ens = sample_brownian(sys.grid, 50, 0)
    with pytest.raises(PicardError):
        mild_solve_picard(sys, np.ones(1), None, ens, tol=1e-12, max_iter=2)
    with pytest.raises(ValueError):
        mild_solve_picard(sys, np.ones(1), None, ens, tol=0.0)


def test_weak_residual_zero_data():
    sys = scalar_system(sigma=0.5, grid=TimeGrid(1, 32))
    ens = sample_brownian(sys.grid, 20, 0)
    traj = mild_solve_stepping(sys, np.zeros(1), None, ens)
    assert np.max(np.abs(weak_residual(sys, traj, np.ones(1), None, ens))) == 0.0


def test_weak_residual_first_order():
    sys = scalar_system(sigma=0.5, grid=TimeGrid(1, 32))
    ens = sample_brownian(sys.grid, 4000, 11)
    vals = []
    for _ in range(3):
        s = sys.with_grid(ens.grid)
        traj = mild_solve_stepping(s, np.ones(1), np.ones(s.grid.steps), ens)
        vals.append(np.mean(np.abs(weak_residual(s, traj, np.ones(1), np.ones(s.grid.steps), ens)[:, -1])))
        ens = refine_brownian(ens)
    assert 1.3 < vals[0] / vals[1] < 2.8 and 1.3 < vals[1] / vals[2] < 2.8


def test_unsorted_psi_nodes():
    sys = scalar_system(grid=TimeGrid(1, 8))
    fwd = psi_matrix(sys, 8, nodes=range(1, 9))
    assert np.array_equal(psi_matrix(sys, 8, nodes=range(8, 0, -1)), fwd[::-1])
