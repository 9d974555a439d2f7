"""Boggio Green's function of the clamped bilaplacian on the unit ball of R^4.

With s = (1 - |x|^2)(1 - |y|^2) / |x - y|^2 and A = sqrt(1 + s):

    G(x, y) = (1 / 8 pi^2) (log A + 1 / (2 A^2) - 1/2)

The regular part R(x, y) = G(x, y) + log|x - y| / (8 pi^2) is evaluated in
the form (1 / 8 pi^2)(log[x,y] + |x-y|^2 / (2 [x,y]^2) - 1/2), with
[x,y]^2 = |x|^2 |y|^2 - 2 x.y + 1, which stays finite on the diagonal.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from utils.errors import DomainError, InvalidConfigurationError, UnsupportedConfigurationError
from utils.radial_core import RadialField, RadialGrid, clamped_solve, make_grid

logger = logging.getLogger(__name__)

DIMENSION = 4
NORMALIZATION = 1.0 / (8.0 * np.pi ** 2)
BALL_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class BallPoint:
    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float).reshape(-1)
        if coords.shape != (DIMENSION,) or not np.all(np.isfinite(coords)):
            raise DomainError(f"a ball point needs {DIMENSION} finite coordinates, got {self.coords!r}")
        norm = float(np.linalg.norm(coords))
        if norm > 1.0 + BALL_TOLERANCE:
            raise DomainError(f"point with |x| = {norm} lies outside the closed unit ball")
        coords.setflags(write=False)
        object.__setattr__(self, 'coords', coords)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    @classmethod
    def from_radius(cls, r: float, direction: Optional[Sequence[float]] = None) -> 'BallPoint':
        unit = np.array([1.0, 0.0, 0.0, 0.0]) if direction is None else np.asarray(direction, float)
        length = np.linalg.norm(unit)
        if length == 0.0:
            raise DomainError("direction vector must be nonzero")
        return cls(r * unit / length)

    @classmethod
    def origin(cls) -> 'BallPoint':
        return cls(np.zeros(DIMENSION))

    def __repr__(self) -> str:
        return f"BallPoint({', '.join(f'{c:.6g}' for c in self.coords)})"


def _coords(point) -> np.ndarray:
    return point.coords if isinstance(point, BallPoint) else np.asarray(point, dtype=float)


def _boggio_ratio(x: np.ndarray, y: np.ndarray) -> float:
    d2 = float(np.dot(x - y, x - y))
    if d2 == 0.0:
        raise DomainError("Green's function is singular at coincident points")
    sx = max(0.0, 1.0 - float(np.dot(x, x)))
    sy = max(0.0, 1.0 - float(np.dot(y, y)))
    return sx * sy / d2


def _green_raw(x: np.ndarray, y: np.ndarray) -> float:
    s = _boggio_ratio(x, y)
    return NORMALIZATION * (0.5 * np.log1p(s) - s / (2.0 * (1.0 + s)))


def _robin_raw(x: np.ndarray, y: np.ndarray) -> float:
    d2 = float(np.dot(x - y, x - y))
    bracket2 = d2 + max(0.0, 1.0 - float(np.dot(x, x))) * max(0.0, 1.0 - float(np.dot(y, y)))
    if bracket2 == 0.0:
        raise DomainError("Robin function is singular at a boundary diagonal point")
    return NORMALIZATION * (0.5 * np.log(bracket2) + d2 / (2.0 * bracket2) - 0.5)


def boggio_modulus(x: BallPoint, y: BallPoint) -> float:
    """A = [x,y] / |x - y|; equals 1 when either point is on the sphere."""
    return float(np.sqrt(1.0 + _boggio_ratio(_coords(x), _coords(y))))


def green(x: BallPoint, y: BallPoint) -> float:
    return float(_green_raw(_coords(x), _coords(y)))


def robin(x: BallPoint, y: BallPoint) -> float:
    return float(_robin_raw(_coords(x), _coords(y)))


def green_radial(r: np.ndarray) -> np.ndarray:
    """G(x, 0) as a function of |x|."""
    r = np.asarray(r, dtype=float)
    return NORMALIZATION * (-np.log(r) + 0.5 * r * r - 0.5)


def robin_radial(r: np.ndarray) -> np.ndarray:
    """R(x, 0) as a function of |x|."""
    r = np.asarray(r, dtype=float)
    return NORMALIZATION * (0.5 * r * r - 0.5)


def _second_difference_sum(func, y: np.ndarray, h: float) -> float:
    center = func(y)
    total = 0.0
    for k in range(DIMENSION):
        step = np.zeros(DIMENSION)
        step[k] = h
        total += func(y + step) - 2.0 * center + func(y - step)
    return total / (h * h)


def laplacian_robin_diag(y: BallPoint, h: float = 1e-2, levels: int = 2) -> float:
    """Delta_x R(x, y) at x = y by Richardson-extrapolated central differences."""
    yc = _coords(y)
    if np.linalg.norm(yc) + h >= 1.0:
        raise DomainError(f"stencil of width {h} around |y| = {np.linalg.norm(yc):.6g} leaves the ball")
    if levels < 0:
        raise InvalidConfigurationError(f"Richardson levels must be >= 0, got {levels}")

    table = [_second_difference_sum(lambda x: _robin_raw(x, yc), yc, h / 2 ** k) for k in range(levels + 1)]
    for level in range(1, levels + 1):
        factor = 4.0 ** level
        table = [(factor * table[k + 1] - table[k]) / (factor - 1.0) for k in range(len(table) - 1)]
    return float(table[0])


def _central_gradient(func, x: np.ndarray, h: float) -> np.ndarray:
    grad = np.empty(DIMENSION)
    for k in range(DIMENSION):
        step = np.zeros(DIMENSION)
        step[k] = h
        grad[k] = (func(x + step) - func(x - step)) / (2.0 * h)
    return grad


def robin_gradient(x: BallPoint, y: BallPoint, h: float = 1e-5) -> np.ndarray:
    """Gradient of R(., y) at x, by central differences in the first argument."""
    yc = _coords(y)
    return _central_gradient(lambda p: _robin_raw(p, yc), _coords(x), h)


def green_gradient(x: BallPoint, y: BallPoint, h: Optional[float] = None) -> np.ndarray:
    """Gradient of G(., y) at x; the default step scales with |x - y|."""
    xc, yc = _coords(x), _coords(y)
    distance = float(np.linalg.norm(xc - yc))
    if distance == 0.0:
        raise DomainError("Green's function gradient is singular at coincident points")
    step = 1e-3 * distance if h is None else h
    return _central_gradient(lambda p: _green_raw(p, yc), xc, step)


def green_hessian(x: BallPoint, y: BallPoint, h: Optional[float] = None) -> np.ndarray:
    xc, yc = _coords(x), _coords(y)
    distance = float(np.linalg.norm(xc - yc))
    if distance == 0.0:
        raise DomainError("Green's function Hessian is singular at coincident points")
    h = 1e-2 * distance if h is None else h

    def g(p):
        return _green_raw(p, yc)

    eye = np.eye(DIMENSION) * h
    center = g(xc)
    hess = np.empty((DIMENSION, DIMENSION))
    for k in range(DIMENSION):
        hess[k, k] = (g(xc + eye[k]) - 2.0 * center + g(xc - eye[k])) / (h * h)
        for m in range(k + 1, DIMENSION):
            value = (g(xc + eye[k] + eye[m]) - g(xc + eye[k] - eye[m])
                     - g(xc - eye[k] + eye[m]) + g(xc - eye[k] - eye[m])) / (4.0 * h * h)
            hess[k, m] = hess[m, k] = value
    return hess


def r1_solve(P: BallPoint, grid: RadialGrid) -> RadialField:
    """R_1(., P): biharmonic with boundary data 4 / |x - P|^2 and its normal derivative.

    Only the pole P = 0 is radial; there the data are u(1) = 4, u'(1) = -8.
    """
    if _coords(P).any():
        raise UnsupportedConfigurationError(
            f"R_1 is only available for the pole at the origin, got {P!r}")
    zero = RadialField.constant(grid, 0.0)
    return clamped_solve(zero, value=4.0, slope=-8.0)


def con_value(Q: BallPoint, grid: Optional[RadialGrid] = None) -> float:
    """R_1(Q, Q) + 16 pi^2 Delta_x R(Q, Q); positive values guarantee attainment."""
    grid = grid or make_grid(513, 1.0)
    r1 = r1_solve(Q, grid)
    value = float(r1.values[0]) + 16.0 * np.pi ** 2 * laplacian_robin_diag(Q)
    logger.info(f"Attainment quantity at {Q!r} on {grid.n} nodes: {value:.12g}")
    return value


def robin_diag_max(radii: Sequence[float]) -> Tuple[float, float]:
    """Largest R(y, y) over y = r e_1 for the given radii, as (radius, value)."""
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0 or np.any(radii < 0.0) or np.any(radii >= 1.0):
        raise DomainError("diagonal Robin scan needs radii in [0, 1)")
    values = NORMALIZATION * (np.log(1.0 - radii ** 2) - 0.5)
    best = int(np.argmax(values))
    return float(radii[best]), float(values[best])


@dataclass
class GreenBoundReport:
    samples: int
    min_distance: float
    max_distance: float
    log_constant: float
    gradient_constant: float
    hessian_constant: float
    per_sample: List[Dict] = field(default_factory=list, repr=False)

    def to_dict(self) -> Dict:
        return {
            'samples': self.samples,
            'min_distance': self.min_distance,
            'max_distance': self.max_distance,
            'log_constant': self.log_constant,
            'gradient_constant': self.gradient_constant,
            'hessian_constant': self.hessian_constant,
        }


def sample_pairs(count: int, seed: int = 0, min_distance: float = 1e-6,
                 max_distance: float = 1.0) -> List[Tuple[BallPoint, BallPoint]]:
    """Deterministic point pairs with |x| <= 0.45, |y| < 1 and log-uniform |x - y|.

    When a random offset would leave the ball, y is placed towards the center.
    """
    if count < 1:
        raise InvalidConfigurationError(f"need at least one sample pair, got {count}")
    if not 0.0 < min_distance < max_distance <= 1.0:
        raise InvalidConfigurationError(
            f"pair distances need 0 < min < max <= 1, got [{min_distance}, {max_distance}]")
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(count):
        direction = rng.normal(size=DIMENSION)
        x = 0.45 * rng.uniform() ** 0.25 * direction / np.linalg.norm(direction)
        offset = rng.normal(size=DIMENSION)
        distance = np.exp(rng.uniform(np.log(min_distance), np.log(max_distance)))
        y = x + distance * offset / np.linalg.norm(offset)
        if np.linalg.norm(y) >= 1.0:
            y = x - distance * x / np.linalg.norm(x)
        pairs.append((BallPoint(x), BallPoint(y)))
    return pairs


def green_bound_check(pairs: Sequence[Tuple[BallPoint, BallPoint]]) -> GreenBoundReport:
    """Smallest constants with |G| <= C log(2 + 1/d), |grad G| <= C/d, |hess G| <= C/d^2."""
    if not pairs:
        raise InvalidConfigurationError("green_bound_check needs at least one pair")
    rows = []
    for x, y in pairs:
        d = float(np.linalg.norm(_coords(x) - _coords(y)))
        value = green(x, y)
        grad = np.linalg.norm(green_gradient(x, y))
        hess = np.linalg.norm(green_hessian(x, y))
        rows.append({
            'distance': d,
            'log_ratio': abs(value) / np.log(2.0 + 1.0 / d),
            'gradient_ratio': grad * d,
            'hessian_ratio': hess * d * d,
        })
    distances = [row['distance'] for row in rows]
    report = GreenBoundReport(
        samples=len(rows),
        min_distance=min(distances),
        max_distance=max(distances),
        log_constant=max(row['log_ratio'] for row in rows),
        gradient_constant=max(row['gradient_ratio'] for row in rows),
        hessian_constant=max(row['hessian_ratio'] for row in rows),
        per_sample=rows,
    )
    logger.info(f"Green bounds over {report.samples} pairs: {report.to_dict()}")
    return report
