import numpy as np
import pytest

from utils.errors import InvalidConfigurationError
from utils.radial_core import (RadialField, RadialGrid, ball_integral, bilaplacian, clamped_operator,
                               clamped_solve, evaluate, fitted_order, fornberg_weights, integrate,
                               laplacian, make_grid)

BALL_VOLUME = np.pi ** 2 / 2


def exact_plate(r):
    return (1 - r ** 2) ** 2 / 192


@pytest.mark.parametrize('n,q', [(129, 1.0), (129, 2.0), (16, 1.0), (513, 3.0)])
def test_grid_weights_integrate_ball_volume(n, q):
    grid = make_grid(n, q)
    assert grid.n == n
    assert grid.nodes[0] == 0.0
    assert grid.nodes[-1] == 1.0
    assert np.all(np.diff(grid.nodes) > 0)
    assert np.all(grid.weights >= 0)
    assert abs(grid.weights.sum() - BALL_VOLUME) < 1e-6


def test_graded_grid_clusters_near_center():
    uniform = make_grid(129, 1.0)
    graded = make_grid(129, 2.0)
    assert graded.nodes[1] < uniform.nodes[1]
    assert graded.count_within(0.1) > uniform.count_within(0.1)


@pytest.mark.parametrize('n,q', [(15, 1.0), (8, 2.0), (129, 0.5)])
def test_make_grid_rejects_bad_configuration(n, q):
    with pytest.raises(InvalidConfigurationError):
        make_grid(n, q)


def test_grid_from_nodes_rejects_unsorted_nodes():
    nodes = np.linspace(0, 1, 20)
    nodes[5], nodes[6] = nodes[6], nodes[5]
    with pytest.raises(InvalidConfigurationError):
        RadialGrid.from_nodes(nodes)


def test_field_rejects_non_finite_and_wrong_length():
    grid = make_grid(16)
    with pytest.raises(InvalidConfigurationError):
        RadialField(grid, np.full(16, np.nan))
    with pytest.raises(InvalidConfigurationError):
        RadialField(grid, np.zeros(15))


def test_field_values_are_read_only():
    field = RadialField.constant(make_grid(16), 1.0)
    with pytest.raises(ValueError):
        field.values[0] = 2.0


def test_integrate_examples(grid_513):
    assert integrate(RadialField.constant(grid_513, 1.0)) == pytest.approx(BALL_VOLUME, rel=1e-13)
    assert integrate(RadialField.constant(grid_513, 0.0)) == 0.0
    r_field = RadialField.from_function(grid_513, lambda r: r)
    assert integrate(r_field) == pytest.approx(2 * np.pi ** 2 / 5, rel=1e-4)


@pytest.mark.parametrize('q', [1.0, 2.0])
def test_laplacian_of_quadratic_is_eight(q):
    grid = make_grid(257, q)
    lap = laplacian(RadialField.from_function(grid, lambda r: r ** 2))
    assert np.max(np.abs(lap.values - 8.0)) < 1e-6


def test_laplacian_of_constant_vanishes(grid_513):
    lap = laplacian(RadialField.constant(grid_513, 3.5))
    assert np.max(np.abs(lap.values)) < 1e-8


def test_laplacian_of_quartic_on_uniform_grid():
    grid = make_grid(129, 1.0)
    h = grid.nodes[1]
    lap = laplacian(RadialField.from_function(grid, lambda r: r ** 4))
    r = grid.nodes[1:-1]
    assert np.max(np.abs(lap.values[1:-1] - 24 * r ** 2)) <= 15 * h ** 2
    assert abs(lap.values[0]) <= 15 * h ** 2


def test_laplacian_of_quartic_on_graded_grid():
    grid = make_grid(513, 2.0)
    lap = laplacian(RadialField.from_function(grid, lambda r: r ** 4))
    assert np.max(np.abs(lap.values - 24 * grid.nodes ** 2)) < 1e-3


@pytest.mark.parametrize('func,expected', [
    (lambda r: r ** 4, 192.0),
    (lambda r: (1 - r ** 2) ** 2, 192.0),
    (lambda r: r ** 2, 0.0),
])
def test_bilaplacian_examples(func, expected):
    grid = make_grid(129, 1.0)
    bilap = bilaplacian(RadialField.from_function(grid, func))
    trusted = bilap.values[: grid.n - 2]
    assert np.max(np.abs(trusted - expected)) < 1e-4


def test_fornberg_weights_reproduce_first_derivative():
    x = np.array([0.7, 0.8, 1.0])
    weights = fornberg_weights(1.0, x, 1)[:, 1]
    assert weights @ x ** 2 == pytest.approx(2.0, rel=1e-12)
    assert weights @ np.ones(3) == pytest.approx(0.0, abs=1e-12)


def test_clamped_solve_constant_source(grid_513):
    u = clamped_solve(RadialField.constant(grid_513, 1.0))
    assert u.values[-1] == 0.0
    assert u.values[0] == pytest.approx(1 / 192, rel=1e-3)
    assert np.max(np.abs(u.values - exact_plate(grid_513.nodes))) < 1e-5


def test_clamped_solve_interior_pointwise(grid_513):
    u = clamped_solve(RadialField.constant(grid_513, 1.0))
    interior = (grid_513.nodes > 0.2) & (grid_513.nodes < 0.8)
    bilap = bilaplacian(u).values[interior]
    assert np.max(np.abs(bilap - 1.0)) < 1e-2


def test_clamped_solve_zero_source_is_zero(grid_513):
    u = clamped_solve(RadialField.constant(grid_513, 0.0))
    assert np.all(u.values == 0.0)


def test_clamped_solve_scaled_source(grid_513):
    u = clamped_solve(RadialField.constant(grid_513, 192.0))
    assert np.argmax(u.values) == 0
    assert u.values[0] == pytest.approx(1.0, rel=1e-3)


def test_clamped_solve_reproduces_biharmonic_quadratics(grid_513):
    u = clamped_solve(RadialField.constant(grid_513, 0.0), value=4.0, slope=-8.0)
    assert np.max(np.abs(u.values - 4 * (2 - grid_513.nodes ** 2))) < 1e-13
    assert u.values[0] == 8.0


def test_boundary_lift_has_constant_laplacian(grid_513):
    operator = clamped_operator(grid_513)
    lift = operator.lift(value=-1.5, slope=3.0)
    assert lift[-1] == -1.5
    assert np.max(np.abs(lift - (-3.0 + 1.5 * grid_513.nodes ** 2))) < 1e-15
    assert np.max(np.abs(operator.laplacian_values(lift, slope=3.0) - 12.0)) < 1e-6
    zero = np.zeros(grid_513.n)
    u = operator.solve(zero, value=-1.5, slope=3.0)
    assert np.array_equal(u, lift)
    assert operator.backward_error(u, zero, -1.5, 3.0) == 0.0


def test_clamped_solve_converges_at_second_order():
    sizes = (65, 129, 257, 513)
    errors = []
    for n in sizes:
        grid = make_grid(n, 1.0)
        u = clamped_solve(RadialField.constant(grid, 1.0))
        errors.append(np.max(np.abs(u.values - exact_plate(grid.nodes))))
    assert fitted_order([1 / (n - 1) for n in sizes], errors) >= 1.7


def test_clamped_solve_is_linear(grid_513):
    f = RadialField.from_function(grid_513, lambda r: np.cos(3 * r))
    g = RadialField.from_function(grid_513, lambda r: 1 + r ** 3)
    combined = clamped_solve(f.with_values(2 * f.values - 3 * g.values))
    separate = 2 * clamped_solve(f).values - 3 * clamped_solve(g).values
    assert np.max(np.abs(combined.values - separate)) < 1e-12


@pytest.mark.parametrize('source', [lambda r: np.ones_like(r), lambda r: np.exp(-10 * r ** 2),
                                    lambda r: 1 + np.sin(5 * r) ** 2])
def test_clamped_solve_preserves_positivity(grid_513, source):
    u = clamped_solve(RadialField.from_function(grid_513, source))
    assert u.values.min() >= -1e-12


def test_conservative_operator_is_self_adjoint():
    grid = make_grid(257, 1.0)
    operator = clamped_operator(grid)
    u = clamped_solve(RadialField.constant(grid, 1.0)).values
    v = clamped_solve(RadialField.from_function(grid, lambda r: np.exp(-r ** 2))).values
    lhs = grid.weights @ (operator.apply(u) * v)
    rhs = grid.weights @ (operator.laplacian_values(u) * operator.laplacian_values(v))
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_pointwise_operators_are_asymptotically_self_adjoint():
    gaps = []
    for n in (65, 129, 257):
        grid = make_grid(n, 1.0)
        u = clamped_solve(RadialField.constant(grid, 1.0))
        v = clamped_solve(RadialField.from_function(grid, lambda r: np.exp(-r ** 2)))
        lhs = integrate(bilaplacian(u).with_values(bilaplacian(u).values * v.values))
        rhs = integrate(u.with_values(laplacian(u).values * laplacian(v).values))
        gaps.append(abs(lhs - rhs))
    assert gaps[0] > gaps[1] > gaps[2]


def test_clamped_operator_matrix_has_dirichlet_row():
    grid = make_grid(33, 1.0)
    matrix = clamped_operator(grid).matrix
    assert matrix.shape == (33, 33)
    last = matrix[32].toarray().ravel()
    assert last[32] == 1.0
    assert np.count_nonzero(last) == 1


def test_clamped_operator_is_cached_per_grid(grid_513):
    assert clamped_operator(grid_513) is clamped_operator(grid_513)
    assert clamped_operator(make_grid(513)) is not clamped_operator(grid_513)


def test_ball_integral_and_evaluate(grid_513):
    ones = RadialField.constant(grid_513, 1.0)
    assert ball_integral(ones, 1.0) == pytest.approx(BALL_VOLUME, rel=1e-10)
    assert ball_integral(ones, 0.5) == pytest.approx(BALL_VOLUME / 16, rel=1e-10)
    square = RadialField.from_function(grid_513, lambda r: r ** 2)
    assert evaluate(square, 0.3) == pytest.approx(0.09, abs=1e-10)
    assert evaluate(square, 0.3, 1) == pytest.approx(0.6, abs=1e-8)
    with pytest.raises(InvalidConfigurationError):
        ball_integral(ones, 1.5)


def test_csv_round_trip(tmp_path):
    grid = make_grid(65, 2.0)
    field = RadialField.from_function(grid, lambda r: np.exp(-r) / 3)
    path = tmp_path / 'u.csv'
    field.write_csv(path)
    assert path.read_text().splitlines()[0] == 'r,value'
    loaded = RadialField.read_csv(path)
    assert np.array_equal(loaded.values, field.values)
    assert np.array_equal(loaded.grid.nodes, grid.nodes)


def test_csv_with_wrong_header_is_rejected(tmp_path):
    path = tmp_path / 'bad.csv'
    path.write_text('x,y\n0,1\n')
    with pytest.raises(InvalidConfigurationError):
        RadialField.read_csv(path)
