import numpy as np
import pytest

from swlp.estimates import (concatenation_check, gain_extension_curve, hidden_regularity_ratio, io_gain, io_ratio,
                            output_energy, sampled_constant, wellposed_ratio)
from swlp.presets import scalar_system
from swlp.stochastics import TimeGrid, sample_brownian
from swlp.system import observation_admissibility_constant


@pytest.fixture
def det():
    return scalar_system(grid=TimeGrid(1.0, 64))


def test_output_energy_closed_form(det):
    cum = output_energy(det, np.ones(1), None, None, 64)[0]
    exact = -np.expm1(-2.0) / 2
    assert abs(cum[-1] - exact) < 5 * det.grid.dt
    assert np.all(np.diff(cum) >= 0)


def test_hidden_regularity_matches_admissibility(det):
    est = hidden_regularity_ratio(det, 64, trials=4)
    assert abs(est.value - observation_admissibility_constant(det, 64)) < 1e-12
    with pytest.raises(ValueError):
        hidden_regularity_ratio(det, 64, trials=0)


def test_io_ratio_zero_data(det):
    with pytest.raises(ValueError):
        io_ratio(det, 64, np.zeros(1), np.zeros(64))


def test_io_gain_bounded_by_admissibility(det):
    g = io_gain(det, 64, trials=16, seed=3)
    assert 0 < g.value <= g.ratios.max() + 1e-15
    # |CY| <= |C Psi y0| + |C Phi u| so the gain is below sqrt(C_C) + sqrt(C_B) T
    assert g.value < np.sqrt(observation_admissibility_constant(det, 64)) + 1.0


def test_gain_curve_monotone():
    sys = scalar_system(sigma=0.5, grid=TimeGrid(1.0, 32))
    ens = sample_brownian(sys.grid, 200, 1)
    curve = gain_extension_curve(sys, [4, 8, 16, 32], trials=4, ens=ens, seed=2)
    gains = [c for _, c in curve]
    assert all(b >= a for a, b in zip(gains, gains[1:]))
    with pytest.raises(ValueError):
        gain_extension_curve(sys, [8, 4], trials=2, ens=ens)


def test_concatenation_scalar(det):
    assert concatenation_check(det, 32, np.sin(np.arange(64.0))) < 1e-12
    with pytest.raises(ValueError):
        concatenation_check(det, 40, np.zeros(64))


def test_wellposed_ratio_path_doubling():
    sys = scalar_system(sigma=0.5, grid=TimeGrid(1.0, 64))
    a = sampled_constant(sys, 6, sample_brownian(sys.grid, 500, 4), seed=1).value
    b = sampled_constant(sys, 6, sample_brownian(sys.grid, 1000, 4), seed=1).value
    assert abs(b - a) / a < 0.25
    assert wellposed_ratio(sys, np.ones(1), np.zeros(64), sample_brownian(sys.grid, 100, 1)) >= 1.0
