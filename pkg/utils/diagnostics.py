"""Blow-up diagnostics for radial mean field solutions.

Pohozaev bookkeeping on balls, local mass, rescaling around the maximum,
far-field comparison with the Green's function and the gradient balance
identity for concentration points.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import logsumexp

from utils.bubble import CRITICAL_MASS, MAX_EXPONENT, standard_profile
from utils.errors import DomainError, InvalidConfigurationError, RangeError
from utils.green_robin import BallPoint, green_gradient, green_radial, robin_gradient
from utils.radial_core import SPHERE_AREA, RadialField, ball_integral, evaluate, laplacian, make_grid

logger = logging.getLogger(__name__)

CLAMPED_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PohozaevBreakdown:
    """Terms of 4 int_{B_r} F(u) = boundary sum for Delta^2 u = f(u), F' = f.

    On the sphere of radius r (area 2 pi^2 r^3), with v = -Delta u:
    f_flux = r F, v_squared = r v^2 / 2, slope_v = 2 u' v, and the two
    gradient pairings mixed = 2 r u' v' and gradient_product = -r u' v'.
    """
    r: float
    volume_term: float
    f_flux: float
    v_squared: float
    slope_v: float
    mixed: float
    gradient_product: float

    @property
    def boundary_sum(self) -> float:
        return self.f_flux + self.v_squared + self.slope_v + self.mixed + self.gradient_product

    @property
    def residual(self) -> float:
        return self.volume_term - self.boundary_sum

    @property
    def relative_residual(self) -> float:
        scale = abs(self.volume_term)
        return abs(self.residual) / scale if scale > 0.0 else abs(self.residual)

    def to_dict(self) -> Dict:
        return {
            'r': self.r,
            'volume_term': self.volume_term,
            'f_flux': self.f_flux,
            'v_squared': self.v_squared,
            'slope_v': self.slope_v,
            'mixed': self.mixed,
            'gradient_product': self.gradient_product,
            'boundary_sum': self.boundary_sum,
            'residual': self.residual,
        }


@dataclass(frozen=True, eq=False)
class RescaleReport:
    mu: float
    alpha: float
    radius: float
    rescaled: RadialField
    sup_distance: float

    def to_dict(self) -> Dict:
        return {'mu': self.mu, 'alpha': self.alpha, 'radius': self.radius, 'sup_distance': self.sup_distance}


def _log_mass(u: RadialField) -> float:
    peak = float(np.max(u.values))
    if peak > MAX_EXPONENT:
        raise RangeError(f"field maximum {peak:.6g} overflows the exponential", details={'max_u': peak})
    return float(logsumexp(u.values, b=u.grid.weights))


def _check_radius(u: RadialField, r: float, name: str = 'r') -> float:
    if not 0.0 < r <= u.grid.radius:
        raise DomainError(f"{name} = {r} must lie in (0, {u.grid.radius}]")
    return float(r)


def pohozaev_residual(u: RadialField, rho: float, r: float) -> PohozaevBreakdown:
    """Both sides of the Pohozaev identity on B_r with F(u) = rho (e^u - 1) / int e^u."""
    r = _check_radius(u, r)
    scale = rho * np.exp(-_log_mass(u))
    F = u.with_values(scale * np.expm1(u.values))
    volume_term = 4.0 * ball_integral(F, r)

    lap = laplacian(u)
    v = lap.with_values(-lap.values)
    u_r = evaluate(u, r)
    du = evaluate(u, r, 1)
    if r == u.grid.radius and abs(u.values[-1]) <= CLAMPED_TOLERANCE:
        # clamped data on the outer sphere
        u_r, du = 0.0, 0.0
    v_r = evaluate(v, r)
    dv = evaluate(v, r, 1)
    area = SPHERE_AREA * r ** 3
    breakdown = PohozaevBreakdown(
        r=r,
        volume_term=volume_term,
        f_flux=area * r * scale * np.expm1(u_r),
        v_squared=area * 0.5 * r * v_r * v_r,
        slope_v=area * 2.0 * du * v_r,
        mixed=area * 2.0 * r * du * dv,
        gradient_product=-area * r * du * dv,
    )
    logger.debug(f"Pohozaev on B_{r}: {breakdown.to_dict()}")
    return breakdown


def local_mass(u: RadialField, rho: float, r: float) -> float:
    """rho times the share of int e^u carried by B_r."""
    r = _check_radius(u, r)
    peak = float(np.max(u.values))
    density = u.with_values(np.exp(u.values - peak))
    total = ball_integral(density, u.grid.radius)
    return float(rho * ball_integral(density, r) / total)


def rescale_extract(u: RadialField, rho: float, R: float, points: int = 1025) -> RescaleReport:
    """Blow-up rescaling around the maximum.

    u_hat = u - alpha with e^alpha = int e^u / rho, mu = exp(-max u_hat / 4),
    and the rescaled profile u_hat(mu x) + 4 log mu on [0, R] is compared
    with the standard bubble.
    """
    if not R >= 1.0:
        raise DomainError(f"rescaling radius R must be at least 1, got {R}")
    if not rho > 0.0:
        raise InvalidConfigurationError(f"rescaling needs rho > 0, got {rho}")
    alpha = _log_mass(u) - float(np.log(rho))
    u_hat = u.values - alpha
    mu = float(np.exp(-np.max(u_hat) / 4.0))
    if mu * R > u.grid.radius:
        limit = u.grid.radius / mu
        raise DomainError(f"rescaled ball of radius {R} leaves the grid; largest admissible R is {limit:.6g}",
                          details={'max_R': limit})
    grid = make_grid(points, 1.0, radius=R)
    interpolant = PchipInterpolator(u.grid.nodes, u_hat)
    values = interpolant(mu * grid.nodes) + 4.0 * np.log(mu)
    rescaled = RadialField(grid, values)
    distance = float(np.max(np.abs(values - standard_profile(grid.nodes))))
    report = RescaleReport(mu=mu, alpha=alpha, radius=float(R), rescaled=rescaled, sup_distance=distance)
    logger.debug(f"Rescaling: {report.to_dict()}")
    return report


def far_field_compare(u: RadialField, rho: float, r0: float) -> float:
    """sup over r0 <= r <= 1 of |u - 64 pi^2 m G(r, 0)|, m = max(1, round(rho / 64 pi^2))."""
    if not 0.0 < r0 <= u.grid.radius:
        raise DomainError(f"far-field radius r0 = {r0} must lie in (0, {u.grid.radius}]")
    quanta = max(1, int(round(rho / CRITICAL_MASS)))
    mask = u.grid.nodes >= r0
    profile = CRITICAL_MASS * quanta * green_radial(u.grid.nodes[mask])
    return float(np.max(np.abs(u.values[mask] - profile)))


def gradient_balance(points: Sequence[BallPoint]) -> List[np.ndarray]:
    """grad_x R(x_j, x_j) + sum over l != j of grad_x G(x_j, x_l), per point."""
    if not points:
        raise InvalidConfigurationError("gradient balance needs at least one point")
    coords = [p.coords for p in points]
    for j in range(len(coords)):
        for l in range(j + 1, len(coords)):
            if np.array_equal(coords[j], coords[l]):
                raise DomainError(f"concentration points {j} and {l} coincide")
    balance = []
    for j, x in enumerate(points):
        total = robin_gradient(x, x)
        for l, y in enumerate(points):
            if l != j:
                total = total + green_gradient(x, y)
        balance.append(total)
    return balance
