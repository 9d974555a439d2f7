import numpy as np
import pytest

from utils.bubble import (BUBBLE_SCALE, CRITICAL_MASS, GAMMA, BubbleParams, bubble_mass, bubble_mass_quadrature,
                          bubble_pde_residual, bubble_profile, energy_expansion, energy_family, family_grid,
                          fit_slope, j_energy, project, standard_bubble)
from utils.errors import InvalidConfigurationError, RangeError
from utils.radial_core import RadialField, clamped_operator, clamped_solve, fitted_order, make_grid


def test_standard_bubble_values():
    scale = np.sqrt(BUBBLE_SCALE)
    bubble = standard_bubble(make_grid(129), scale)
    assert bubble.values[0] == 0.0
    assert bubble.grid.radius == pytest.approx(scale)
    assert bubble.values[-1] == pytest.approx(-4 * np.log(2), rel=1e-14)
    assert np.all(np.diff(bubble.values) < 0)


def test_bubble_profile_matches_scaled_standard_bubble():
    eps = 0.1
    grid = make_grid(65)
    profile = bubble_profile(grid, eps)
    expected = np.log(GAMMA * eps ** 4) - 4 * np.log(eps ** 2 + grid.nodes ** 2)
    assert np.allclose(profile.values, expected, rtol=0, atol=1e-13)
    assert BubbleParams(eps).slope(1.0) == pytest.approx(-8 / 1.01)
    with pytest.raises(InvalidConfigurationError):
        BubbleParams(0.0)


@pytest.mark.slow
def test_bubble_pde_residual_is_second_order():
    sizes = (257, 513, 1025, 2049)
    residuals = [bubble_pde_residual(n, 10.0) for n in sizes]
    assert residuals[0] > residuals[1] > residuals[2] > residuals[3]
    assert fitted_order([10.0 / (n - 1) for n in sizes], residuals) >= 1.7


def test_bubble_pde_residual_detects_wrong_constant():
    residual = bubble_pde_residual(513, 10.0, gamma=383.0)
    assert residual == pytest.approx(1 / 383, rel=0.05)


def test_bubble_pde_residual_rejects_coarse_grid():
    with pytest.raises(InvalidConfigurationError):
        bubble_pde_residual(32, 10.0)


def test_bubble_mass_closed_form():
    assert bubble_mass(np.inf) == pytest.approx(CRITICAL_MASS, rel=1e-15)
    assert CRITICAL_MASS == pytest.approx(631.6546817, abs=1e-6)
    assert bubble_mass(np.sqrt(BUBBLE_SCALE)) == pytest.approx(CRITICAL_MASS / 2, rel=1e-14)
    assert bubble_mass(0.0) == 0.0
    masses = [bubble_mass(R) for R in (0.5, 1.0, 5.0, 50.0)]
    assert masses == sorted(masses)
    with pytest.raises(InvalidConfigurationError):
        bubble_mass(-1.0)


@pytest.mark.parametrize('R', [0.5, 1.0, 5.0, 20.0, 50.0])
def test_bubble_mass_quadrature_matches_closed_form(R):
    assert bubble_mass_quadrature(R) == pytest.approx(bubble_mass(R), rel=1e-8)


def test_projection_matches_expansion_at_fourth_order():
    grid = make_grid(257)
    eps_list = (0.2, 0.1, 0.05, 0.025)
    defects = [project(eps, grid).expansion_defect for eps in eps_list]
    assert fitted_order(eps_list, defects) >= 3.5
    assert defects[-1] == pytest.approx(6 * 0.025 ** 4, rel=0.5)
    normalized = [defect / eps ** 4 for eps, defect in zip(eps_list, defects)]
    assert all(4.0 < ratio < 8.0 for ratio in normalized)


def test_projection_is_clamped():
    grid = make_grid(513)
    report = project(0.1, grid)
    assert abs(report.boundary_value) <= 1e-10
    assert abs(report.boundary_slope) <= 1e-8
    assert report.biharmonic_residual < 1e-12


def test_projection_correction_is_biharmonic_quadratic():
    grid = make_grid(513)
    eps = 0.1
    params = BubbleParams(eps)
    value, slope = params.profile(1.0), params.slope(1.0)
    b = slope / 2
    a = value - b
    correction = project(eps, grid).correction
    assert np.max(np.abs(correction.values - (a + b * grid.nodes ** 2))) < 1e-9


@pytest.mark.parametrize('eps', [0.0, -0.1, 0.31])
def test_projection_rejects_eps_out_of_range(eps):
    with pytest.raises(InvalidConfigurationError):
        project(eps, make_grid(65))


def test_j_energy_of_zero_field(grid_513):
    rho = 100.0
    expected = -rho * np.log(np.pi ** 2 / 2)
    assert j_energy(RadialField.constant(grid_513, 0.0), rho) == pytest.approx(expected, rel=1e-12)


def test_j_energy_gradient_matches_finite_difference(grid_513):
    rho = 200.0
    u = 100.0 * clamped_solve(RadialField.constant(grid_513, 1.0)).values
    h = 50.0 * clamped_solve(RadialField.from_function(grid_513, lambda r: np.exp(-r ** 2))).values
    operator = clamped_operator(grid_513)
    weights = grid_513.weights
    t = 1e-4

    def energy(values):
        return j_energy(RadialField(grid_513, values), rho)

    numeric = (energy(u + t * h) - energy(u - t * h)) / (2 * t)
    density = weights * np.exp(u)
    analytic = (weights @ (operator.laplacian_values(u) * operator.laplacian_values(h))
                - rho * (density @ h) / density.sum())
    assert numeric == pytest.approx(analytic, rel=1e-6)


def test_j_energy_rejects_overflowing_field(grid_513):
    field = RadialField.from_function(grid_513, lambda r: 800.0 * (1 - r))
    with pytest.raises(RangeError):
        j_energy(field, 1.0)


def test_family_grid_refines_until_core_is_resolved():
    grid = family_grid(1e-3, n=65, q=2.0)
    assert grid.n == 257
    assert grid.count_within(1e-3) >= 9


def test_energy_family_decreases_above_critical_mass(graded_grid_2049):
    series = energy_family(1.05 * CRITICAL_MASS, grid=graded_grid_2049)
    energies = [j for _, j in series]
    assert all(b < a for a, b in zip(energies, energies[1:]))


def test_energy_family_eventually_increases_below_critical_mass(graded_grid_2049):
    series = energy_family(0.95 * CRITICAL_MASS, grid=graded_grid_2049)
    energies = [j for _, j in series]
    assert energies[-1] > energies[-2]


def test_energy_family_slope_follows_mass_deficit(graded_grid_2049):
    rho = 0.9 * CRITICAL_MASS
    series = energy_family(rho, grid=graded_grid_2049)
    eps = np.array([e for e, _ in series])
    slope = fit_slope(np.log(1 / eps), [j for _, j in series])
    predicted = 4 * (CRITICAL_MASS - rho)
    assert predicted == pytest.approx(252.66, abs=0.01)
    assert slope == pytest.approx(predicted, rel=0.1)


def test_energy_family_is_independent_of_worker_count(graded_grid_2049):
    eps_list = (0.05, 0.02, 0.01)
    serial = energy_family(CRITICAL_MASS, eps_list, grid=graded_grid_2049)
    threaded = energy_family(CRITICAL_MASS, eps_list, grid=graded_grid_2049, workers=3)
    assert serial == threaded


@pytest.mark.parametrize('eps_list', [(), (0.01, 0.02), (0.05, 0.05), (0.4, 0.1)])
def test_energy_family_rejects_bad_eps_lists(eps_list):
    with pytest.raises(InvalidConfigurationError):
        energy_family(CRITICAL_MASS, eps_list, n=65)


def test_energy_expansion_recovers_eps_squared_coefficient(graded_grid_2049):
    fit = energy_expansion(grid=graded_grid_2049)
    assert fit.predicted_coefficient == pytest.approx(-512 * np.pi ** 2)
    assert fit.relative_error <= 0.1
    assert len(fit.series) == 5


def test_energy_expansion_needs_five_points():
    with pytest.raises(InvalidConfigurationError):
        energy_expansion((0.1, 0.05, 0.02))
