"""Solvers for Delta^2 u = rho e^u / int e^u with clamped boundary conditions.

All solvers work on the free nodes 0..n-2 of the conservative clamped
operator (``u[n-1] = 0``). Writing S for the reduced stiffness matrix and V
for the cell volumes, a discrete solution satisfies

    S u = V g(u),   g(u) = rho e^u / I(u),   I(u) = sum_i w_i e^{u_i}.

Convergence is measured with the preconditioned residual
``max |u - T(u)|`` where ``T(u)`` is the clamped solve of g(u).
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve_banded
from scipy.special import logsumexp

from utils.bubble import CRITICAL_MASS, MAX_EXPONENT, j_energy
from utils.errors import InvalidConfigurationError, RangeError, SingularSystemError
from utils.radial_core import ClampedBilaplacian, RadialField, RadialGrid, clamped_operator, make_grid

logger = logging.getLogger(__name__)

DEFAULT_N = 513
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 50
DEFAULT_DESCENT_ITER = 20000
MAX_HALVINGS = 10
POLISH_RESIDUAL = 1e-6
ARMIJO = 1e-4
MIN_LINE_STEP = 2.0 ** -30
BLOW_UP_MAX_U = 40.0
BLOW_UP_MU = 1e-4

REACHED_TARGET = 'reached_target'
BLOW_UP = 'blow_up'
STEP_UNDERFLOW = 'step_underflow'


@dataclass(frozen=True, eq=False)
class SolveReport:
    rho: float
    field: RadialField
    energy: float
    max_u: float
    alpha: float
    mu: float
    residual: float
    iterations: int
    converged: bool
    method: str = 'newton'
    history: Tuple[float, ...] = ()
    energies: Tuple[float, ...] = ()

    def to_dict(self) -> Dict:
        return {
            'rho': self.rho,
            'energy': self.energy,
            'max_u': self.max_u,
            'alpha': self.alpha,
            'mu': self.mu,
            'residual': self.residual,
            'iterations': self.iterations,
            'converged': self.converged,
            'method': self.method,
        }


@dataclass(frozen=True)
class ContinuationStep:
    rho: float
    energy: float
    max_u: float
    mu: float
    converged: bool

    def to_dict(self) -> Dict:
        return {'rho': self.rho, 'energy': self.energy, 'max_u': self.max_u,
                'mu': self.mu, 'converged': self.converged}


@dataclass
class ContinuationReport:
    steps: List[ContinuationStep] = field(default_factory=list)
    status: str = REACHED_TARGET
    rejected: int = 0
    final: Optional[SolveReport] = field(default=None, repr=False)

    @property
    def all_converged(self) -> bool:
        return bool(self.steps) and all(step.converged for step in self.steps)


class MeanFieldProblem:
    """Nonlinearity, residual and linearization of one (grid, rho) pair."""

    def __init__(self, grid: RadialGrid, rho: float):
        self.grid = grid
        self.rho = float(rho)
        self.operator: ClampedBilaplacian = clamped_operator(grid)
        self.volumes = grid.volumes[:-1]
        self.free_stiffness = self.operator.stiffness[:-1, :-1].tocsr()

    def log_mass(self, u: np.ndarray) -> float:
        peak = float(np.max(u))
        if peak > MAX_EXPONENT:
            raise RangeError(f"iterate maximum {peak:.6g} overflows the exponential", details={'max_u': peak})
        return float(logsumexp(u, b=self.grid.weights))

    def source(self, u: np.ndarray) -> np.ndarray:
        """g(u) on all nodes."""
        if self.rho == 0.0:
            return np.zeros_like(u)
        return self.rho * np.exp(u - self.log_mass(u))

    def fixed_point(self, u: np.ndarray) -> np.ndarray:
        return self.operator.solve(self.source(u))

    def correction(self, u: np.ndarray) -> np.ndarray:
        return u - self.fixed_point(u)

    def residual(self, u: np.ndarray) -> float:
        return float(np.max(np.abs(self.correction(u))))

    def newton_direction(self, u: np.ndarray, correction: Optional[np.ndarray] = None) -> np.ndarray:
        """Solve J d = -S (u - T(u)) on the free nodes.

        J = S - diag(rho q / I) + a q q^T with q = V e^u and a = 2 pi^2 rho / I^2;
        the rank-one part is handled by Sherman-Morrison. Since S T(u) = V g(u),
        the right-hand side equals -(S u - V g(u)).
        """
        if correction is None:
            correction = self.correction(u)
        log_mass = self.log_mass(u)
        mass = np.exp(log_mass)
        q = self.volumes * np.exp(u[:-1] - log_mass) * mass
        a = 2.0 * np.pi ** 2 * self.rho / mass ** 2

        banded = self.operator.banded.copy()
        banded[2] -= self.rho * q / mass
        rhs = -(self.free_stiffness @ correction[:-1])
        try:
            z, y = solve_banded((2, 2), banded, np.column_stack([rhs, q]), check_finite=False).T
        except (LinAlgError, ValueError) as e:
            raise SingularSystemError(f"Newton linearization at rho={self.rho} is singular: {e}")
        denominator = 1.0 + a * (q @ y)
        if abs(denominator) < 1e-14:
            raise SingularSystemError(f"rank-one update at rho={self.rho} is singular (denominator {denominator:.3e})")
        direction = np.zeros_like(u)
        direction[:-1] = z - y * (a * (q @ z) / denominator)
        return direction


def _check_rho(rho: float) -> float:
    if rho is None or not np.isfinite(rho):
        raise InvalidConfigurationError(f"rho must be a finite number, got {rho!r}")
    if rho < 0.0:
        raise InvalidConfigurationError(f"rho must be non-negative, got {rho}")
    return float(rho)


def _initial_values(init: Optional[RadialField], grid: Optional[RadialGrid]) -> Tuple[RadialGrid, np.ndarray]:
    if init is None:
        grid = grid or make_grid(DEFAULT_N, 1.0)
        return grid, np.zeros(grid.n)
    if grid is not None and init.grid is not grid:
        raise InvalidConfigurationError("initial field lives on a different grid than the one requested")
    if abs(init.values[-1]) > 1e-12:
        raise InvalidConfigurationError(
            f"initial field must vanish on the boundary, got u(1) = {init.values[-1]:.3e}")
    return init.grid, np.array(init.values, dtype=float)


def _report(problem: MeanFieldProblem, u: np.ndarray, residual: float, iterations: int, converged: bool,
            method: str, history: List[float], energies: Tuple[float, ...] = ()) -> SolveReport:
    field = RadialField(problem.grid, u)
    max_u = float(np.max(u))
    if problem.rho == 0.0:
        alpha = mu = float('inf')
    else:
        alpha = problem.log_mass(u) - float(np.log(problem.rho))
        mu = float(np.exp(-(max_u - alpha) / 4.0))
    return SolveReport(
        rho=problem.rho,
        field=field,
        energy=j_energy(field, problem.rho),
        max_u=max_u,
        alpha=alpha,
        mu=mu,
        residual=residual,
        iterations=iterations,
        converged=converged,
        method=method,
        history=tuple(history),
        energies=energies,
    )


def solve_newton(rho: float, init: Optional[RadialField] = None, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER, grid: Optional[RadialGrid] = None) -> SolveReport:
    """Damped Newton iteration; damping halves until the residual drops."""
    rho = _check_rho(rho)
    grid, u = _initial_values(init, grid)
    problem = MeanFieldProblem(grid, rho)

    correction = problem.correction(u)
    residual = float(np.max(np.abs(correction)))
    history = [residual]
    iterations = 0
    converged = residual <= tol
    while not converged and iterations < max_iter:
        direction = problem.newton_direction(u, correction)
        accepted = False
        for halving in range(MAX_HALVINGS + 1):
            theta = 2.0 ** -halving
            trial = u + theta * direction
            try:
                trial_correction = problem.correction(trial)
            except RangeError:
                continue
            trial_residual = float(np.max(np.abs(trial_correction)))
            if trial_residual < residual:
                accepted = True
                break
        if not accepted and residual < POLISH_RESIDUAL:
            # plain fixed-point step; T contracts near the minimizer
            trial = u - correction
            trial_correction = problem.correction(trial)
            trial_residual = float(np.max(np.abs(trial_correction)))
            accepted = trial_residual < residual
            theta = 0.0
        if not accepted:
            logger.warning(f"Newton at rho={rho:.6g} stalled at residual {residual:.3e} after {iterations} iterations")
            break
        u, correction, residual = trial, trial_correction, trial_residual
        iterations += 1
        history.append(residual)
        logger.debug(f"Newton rho={rho:.6g} iteration {iterations}: residual {residual:.3e} (theta={theta})")
        converged = residual <= tol

    if converged:
        logger.info(f"Newton converged at rho={rho:.6g} in {iterations} iterations, residual {residual:.3e}")
    else:
        logger.warning(f"Newton did not converge at rho={rho:.6g}: residual {residual:.3e}")
    return _report(problem, u, residual, iterations, converged, 'newton', history)


def minimize(rho: float, init: Optional[RadialField] = None, tol: float = DEFAULT_TOL,
             max_iter: int = DEFAULT_DESCENT_ITER, grid: Optional[RadialGrid] = None) -> SolveReport:
    """Gradient descent on J_rho in the H^2_0 metric with Armijo backtracking.

    The descent direction is T(u) - u; along it dJ = -sum w (L d)^2. Energy
    changes are evaluated as differences, so accepted steps never raise J.
    """
    rho = _check_rho(rho)
    if not 0.0 < rho < CRITICAL_MASS:
        raise InvalidConfigurationError(f"minimization needs 0 < rho < 64 pi^2, got {rho}")
    grid, u = _initial_values(init, grid)
    problem = MeanFieldProblem(grid, rho)
    operator = problem.operator
    weights = grid.weights

    def energy_change(values: np.ndarray, step: np.ndarray) -> float:
        """J(values + step) - J(values)."""
        problem.log_mass(values + step)  # overflow check
        lap, lap_step = operator.laplacian_values(values), operator.laplacian_values(step)
        quadratic = float(weights @ (lap * lap_step + 0.5 * lap_step * lap_step))
        density = weights * np.exp(values - problem.log_mass(values))
        density /= density.sum()
        return quadratic - rho * float(np.log1p(density @ np.expm1(step)))

    current = operator.dirichlet_energy(u) - rho * problem.log_mass(u)
    energies = [current]
    history = []
    converged = False
    iterations = 0
    while True:
        direction = problem.fixed_point(u) - u
        residual = float(np.max(np.abs(direction)))
        history.append(residual)
        if residual <= tol:
            converged = True
            break
        if iterations >= max_iter:
            break
        decrease = 2.0 * operator.dirichlet_energy(direction)
        step = 1.0
        while step >= MIN_LINE_STEP:
            try:
                change = energy_change(u, step * direction)
            except RangeError:
                change = np.inf
            if change <= -ARMIJO * step * decrease:
                break
            step *= 0.5
        if step < MIN_LINE_STEP:
            logger.warning(f"Line search failed at rho={rho:.6g} after {iterations} iterations")
            break
        u = u + step * direction
        current = current + change
        energies.append(current)
        iterations += 1

    if converged:
        logger.info(f"Descent converged at rho={rho:.6g} in {iterations} iterations, residual {residual:.3e}")
    else:
        logger.warning(f"Descent did not converge at rho={rho:.6g}: residual {residual:.3e}")
    return _report(problem, u, residual, iterations, converged, 'minimize', history, tuple(energies))


def is_blow_up(report: SolveReport) -> bool:
    return report.max_u > BLOW_UP_MAX_U or report.mu < BLOW_UP_MU


def continuation(rho_start: float, rho_end: float, steps: int = 12, tol: float = DEFAULT_TOL,
                 grid: Optional[RadialGrid] = None, max_iter: int = DEFAULT_MAX_ITER) -> ContinuationReport:
    """Warm-started Newton solves from rho_start up to rho_end.

    A failed step is retried at half the step size; once the step drops
    below 2^-10 of the nominal one the path stops with ``step_underflow``.
    Only accepted solves are recorded.
    """
    rho_start = _check_rho(rho_start)
    rho_end = _check_rho(rho_end)
    if not 0.0 < rho_start < rho_end <= CRITICAL_MASS:
        raise InvalidConfigurationError(
            f"continuation needs 0 < rho_start < rho_end <= 64 pi^2, got {rho_start} -> {rho_end}")
    if steps < 1:
        raise InvalidConfigurationError(f"continuation needs at least one step, got {steps}")
    grid = grid or make_grid(DEFAULT_N, 1.0)
    nominal = (rho_end - rho_start) / steps
    report = ContinuationReport()

    def record(solve: SolveReport) -> None:
        report.steps.append(ContinuationStep(solve.rho, solve.energy, solve.max_u, solve.mu, solve.converged))
        report.final = solve

    first = solve_newton(rho_start, tol=tol, max_iter=max_iter, grid=grid)
    if not first.converged:
        report.status = STEP_UNDERFLOW
        report.rejected += 1
        logger.warning(f"Continuation could not start at rho={rho_start:.6g}")
        return report
    record(first)
    if is_blow_up(first):
        report.status = BLOW_UP
        return report

    rho = rho_start
    step = nominal
    while rho < rho_end:
        target = min(rho + step, rho_end)
        try:
            solve = solve_newton(target, init=report.final.field, tol=tol, max_iter=max_iter)
        except (SingularSystemError, RangeError) as e:
            logger.warning(f"Continuation step to rho={target:.6g} failed: {e.message}")
            solve = None
        if solve is None or not solve.converged:
            report.rejected += 1
            step *= 0.5
            if step < nominal * 2.0 ** -MAX_HALVINGS:
                report.status = STEP_UNDERFLOW
                logger.warning(f"Continuation step underflow at rho={rho:.6g}")
                break
            continue
        record(solve)
        rho = target
        if is_blow_up(solve):
            report.status = BLOW_UP
            logger.warning(f"Blow-up signature at rho={rho:.6g}: max_u={solve.max_u:.4g}, mu={solve.mu:.3e}")
            break
        step = min(nominal, 2.0 * step)

    logger.info(f"Continuation {rho_start:.6g} -> {rho_end:.6g}: {len(report.steps)} accepted, "
                f"{report.rejected} rejected, status {report.status}")
    return report
