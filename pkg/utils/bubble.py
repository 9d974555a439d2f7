"""The standard bubble, its projection onto clamped functions, and J_rho.

U_eps(r) = log(gamma eps^4 / (eps^2 + r^2)^4) solves Delta^2 U = e^U on R^4
for gamma = 384, with total mass 64 pi^2. The projection subtracts the
biharmonic function phi_eps carrying U_eps's boundary value and slope.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import simpson
from scipy.special import logsumexp

from utils.errors import InvalidConfigurationError, RangeError
from utils.green_robin import robin_radial
from utils.radial_core import (RadialField, RadialGrid, clamped_operator, fornberg_weights,
                               laplacian_values, make_grid)

logger = logging.getLogger(__name__)

GAMMA = 384.0
BUBBLE_SCALE = 8.0 * np.sqrt(6.0)
CRITICAL_MASS = 64.0 * np.pi ** 2
MAX_EXPONENT = 700.0
MAX_EPS = 0.3
MIN_CORE_NODES = 8

DEFAULT_FAMILY_EPS = (0.05, 0.025, 0.0125, 0.00625, 0.003125, 0.0015625)
DEFAULT_EXPANSION_EPS = (0.15, 0.12, 0.09, 0.06, 0.03)


@dataclass(frozen=True)
class BubbleParams:
    eps: float
    gamma: float = GAMMA

    def __post_init__(self):
        if not self.eps > 0.0:
            raise InvalidConfigurationError(f"bubble concentration eps must be positive, got {self.eps}")
        if not self.gamma > 0.0:
            raise InvalidConfigurationError(f"bubble constant gamma must be positive, got {self.gamma}")

    def profile(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.log(self.gamma * self.eps ** 4) - 4.0 * np.log(self.eps ** 2 + r * r)

    def slope(self, r: float) -> float:
        return -8.0 * r / (self.eps ** 2 + r * r)


@dataclass(frozen=True, eq=False)
class ProjectionReport:
    eps: float
    projected: RadialField
    correction: RadialField
    expansion_defect: float
    boundary_value: float
    boundary_slope: float
    biharmonic_residual: float
    predicted_order: int = 4

    def to_dict(self) -> Dict:
        return {
            'eps': self.eps,
            'expansion_defect': self.expansion_defect,
            'predicted_order': self.predicted_order,
            'boundary_value': self.boundary_value,
            'boundary_slope': self.boundary_slope,
            'biharmonic_residual': self.biharmonic_residual,
        }


def standard_profile(r, scale: float = BUBBLE_SCALE):
    return -4.0 * np.log1p(r * r / scale)


def standard_bubble(grid: RadialGrid, scale: float) -> RadialField:
    """-4 log(1 + r^2 / (8 sqrt 6)) on the grid stretched to [0, scale]."""
    stretched = grid.scaled(scale / grid.radius)
    return RadialField(stretched, standard_profile(stretched.nodes))


def bubble_profile(grid: RadialGrid, eps: float, gamma: float = GAMMA) -> RadialField:
    return RadialField(grid, BubbleParams(eps, gamma).profile(grid.nodes))


def bubble_pde_residual(n: int, R: float, gamma: float = GAMMA) -> float:
    """max |Delta^2 u - e^u| over nodes 0..n-3 of a uniform grid on [0, R].

    u = -4 log(1 + r^2 / sqrt(gamma)); gamma = 384 makes u an exact solution.
    The stencil runs in extended precision: fourth differences of double
    samples would bottom out near 1e-5 before truncation error does.
    """
    if n < 64:
        raise InvalidConfigurationError(f"bubble residual needs n >= 64, got {n}")
    if not R > 0.0:
        raise InvalidConfigurationError(f"bubble residual radius must be positive, got {R}")
    r = np.arange(n, dtype=np.longdouble) * (np.longdouble(R) / (n - 1))
    scale = np.sqrt(np.longdouble(gamma))
    u = -4 * np.log1p(r * r / scale)
    bilap = laplacian_values(r, laplacian_values(r, u))
    residual = np.abs(bilap - np.exp(u))[: n - 2]
    value = float(residual.max())
    logger.debug(f"Bubble residual n={n} R={R} gamma={gamma}: {value:.3e}")
    return value


def bubble_mass(R: float) -> float:
    """Mass of e^u over B_R in closed form; R = inf gives 64 pi^2."""
    if R < 0.0:
        raise InvalidConfigurationError(f"bubble mass radius must be non-negative, got {R}")
    t = 1.0 + R * R / BUBBLE_SCALE
    return float(CRITICAL_MASS * (1.0 - 3.0 / t ** 2 + 2.0 / t ** 3))


def bubble_mass_quadrature(R: float, n: int = 2049) -> float:
    if not (R > 0.0 and np.isfinite(R)):
        raise InvalidConfigurationError(f"quadrature radius must be positive and finite, got {R}")
    r = np.linspace(0.0, R, n)
    density = 2.0 * np.pi ** 2 * r ** 3 * np.exp(standard_profile(r))
    return float(simpson(density, x=r))


def _one_sided_slope(field: RadialField) -> float:
    r = field.grid.nodes
    stencil = fornberg_weights(r[-1], r[-3:], 1)[:, 1]
    return float(stencil @ field.values[-3:])


def project(eps: float, grid: RadialGrid, gamma: float = GAMMA) -> ProjectionReport:
    """Clamped projection P U_eps = U_eps - phi_eps of the bubble centred at 0."""
    if not 0.0 < eps <= MAX_EPS:
        raise InvalidConfigurationError(f"projection needs 0 < eps <= {MAX_EPS}, got {eps}")
    params = BubbleParams(eps, gamma)
    radius = grid.radius
    value = float(params.profile(radius))
    slope = params.slope(radius)

    operator = clamped_operator(grid)
    zero = np.zeros(grid.n)
    phi = operator.solve(zero, value=value, slope=slope)
    correction = RadialField(grid, phi)
    projected = RadialField(grid, params.profile(grid.nodes) - phi)

    r = grid.nodes
    expansion = (np.log(gamma * eps ** 4) - CRITICAL_MASS * robin_radial(r)
                 - eps ** 2 * 4.0 * (2.0 - r * r))
    defect = float(np.max(np.abs(phi - expansion)))
    report = ProjectionReport(
        eps=eps,
        projected=projected,
        correction=correction,
        expansion_defect=defect,
        boundary_value=float(projected.values[-1]),
        boundary_slope=slope - _one_sided_slope(correction),
        biharmonic_residual=operator.backward_error(phi, zero, value, slope),
    )
    logger.debug(f"Projected bubble: {report.to_dict()}")
    return report


def j_energy(u: RadialField, rho: float) -> float:
    """J_rho(u) = 1/2 int |Delta u|^2 - rho log int e^u for clamped u."""
    peak = float(np.max(u.values))
    if peak > MAX_EXPONENT:
        raise RangeError(f"field maximum {peak:.6g} overflows the exponential", details={'max_u': peak})
    operator = clamped_operator(u.grid)
    quadratic = operator.dirichlet_energy(u.values)
    log_mass = float(logsumexp(u.values, b=u.grid.weights))
    return quadratic - rho * log_mass


def fit_slope(x: Sequence[float], y: Sequence[float]) -> float:
    slope, _ = np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)
    return float(slope)


def family_grid(eps_min: float, n: int = 2049, q: float = 2.0) -> RadialGrid:
    """Graded grid with at least MIN_CORE_NODES nodes inside r <= eps_min."""
    grid = make_grid(n, q)
    while grid.count_within(eps_min) < MIN_CORE_NODES + 1:
        n = 2 * (n - 1) + 1
        logger.warning(f"Grid does not resolve eps={eps_min}; refining to n={n}")
        grid = make_grid(n, q)
    return grid


def _validate_eps_list(eps_list: Sequence[float]) -> List[float]:
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise InvalidConfigurationError("eps list must not be empty")
    for e in eps_list:
        if not 0.0 < e <= MAX_EPS:
            raise InvalidConfigurationError(f"eps values must lie in (0, {MAX_EPS}], got {e}")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise InvalidConfigurationError("eps list must be strictly decreasing")
    return eps_list


def energy_family(rho: float, eps_list: Sequence[float] = DEFAULT_FAMILY_EPS, n: int = 2049,
                  q: float = 2.0, workers: int = 1,
                  grid: Optional[RadialGrid] = None) -> List[Tuple[float, float]]:
    """J_rho(P U_eps) along a decreasing list of eps, in input order."""
    eps_list = _validate_eps_list(eps_list)
    if grid is None:
        grid = family_grid(min(eps_list), n, q)
    clamped_operator(grid)

    def energy_at(eps: float) -> Tuple[float, float]:
        return eps, j_energy(project(eps, grid).projected, rho)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            series = list(pool.map(energy_at, eps_list))
    else:
        series = [energy_at(eps) for eps in eps_list]
    logger.info(f"Energy family at rho={rho:.6g} on {grid.n} nodes: {len(series)} points")
    return series


@dataclass
class ExpansionFit:
    series: List[Tuple[float, float]]
    constant: float
    eps2_coefficient: float
    predicted_coefficient: float

    @property
    def relative_error(self) -> float:
        return abs(self.eps2_coefficient - self.predicted_coefficient) / abs(self.predicted_coefficient)

    def to_dict(self) -> Dict:
        return {
            'constant': self.constant,
            'eps2_coefficient': self.eps2_coefficient,
            'predicted_coefficient': self.predicted_coefficient,
            'relative_error': self.relative_error,
        }


def energy_expansion(eps_list: Sequence[float] = DEFAULT_EXPANSION_EPS,
                     grid: Optional[RadialGrid] = None, workers: int = 1) -> ExpansionFit:
    """Fit J_{64 pi^2}(P U_eps) = C + c eps^2 + d eps^4 log(1/eps) + e eps^4.

    At the critical mass the log(1/eps) terms cancel; the eps^2 coefficient
    is -32 pi^2 times the attainment quantity, i.e. -512 pi^2 at the center.
    """
    eps_list = _validate_eps_list(eps_list)
    if len(eps_list) < 5:
        raise InvalidConfigurationError("energy expansion fit needs at least five eps values")
    series = energy_family(CRITICAL_MASS, eps_list, workers=workers, grid=grid)
    eps = np.array([e for e, _ in series])
    y = np.array([j for _, j in series])
    basis = np.column_stack([np.ones_like(eps), eps ** 2, eps ** 4 * np.log(1.0 / eps), eps ** 4])
    (constant, c, _, _), *_ = np.linalg.lstsq(basis, y, rcond=None)
    fit = ExpansionFit(series=series, constant=float(constant), eps2_coefficient=float(c),
                       predicted_coefficient=-512.0 * np.pi ** 2)
    logger.info(f"Critical energy expansion: {fit.to_dict()}")
    return fit
