"""Radial calculus on balls of R^4.

Grids carry the radial measure 2*pi^2*r^3 dr in their quadrature weights.
Two discretizations of the Laplacian live here:

* ``laplacian`` / ``bilaplacian`` act pointwise on arbitrary fields with
  nodal central differences (used for diagnostics and residual checks).
* ``ClampedBilaplacian`` is the conservative (flux) form used by the
  solvers. Its Laplacian ``L = V^-1 K`` has a symmetric ``K``, so the
  discrete Dirichlet energy ``1/2 sum w (L u)^2`` has exactly the discrete
  bilaplacian as its gradient.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.interpolate import CubicSpline
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded

from utils.errors import InvalidConfigurationError, SingularSystemError

logger = logging.getLogger(__name__)

SPHERE_AREA = 2.0 * np.pi ** 2
MIN_NODES = 16
CSV_FLOAT_FORMAT = '%.17g'


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Nodes 0 = r_0 < ... < r_{n-1} = radius with dual-cell volume weights.

    Cell faces sit at the midpoints between nodes (plus 0 and the outer
    radius); ``volumes[i]`` is the r^3 dr measure of cell i and
    ``weights = 2 pi^2 volumes``, so constants integrate exactly.
    Grids compare and hash by identity, which lets operator factorizations
    be cached per grid.
    """
    n: int
    nodes: np.ndarray
    q: Optional[float] = None
    faces: np.ndarray = field(init=False, repr=False)
    volumes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size != self.n:
            raise InvalidConfigurationError(f"grid expects {self.n} nodes, got shape {nodes.shape}")
        if self.n < MIN_NODES:
            raise InvalidConfigurationError(f"grid needs at least {MIN_NODES} nodes, got {self.n}")
        if nodes[0] != 0.0:
            raise InvalidConfigurationError(f"first grid node must be 0, got {nodes[0]!r}")
        if not np.all(np.isfinite(nodes)) or np.any(np.diff(nodes) <= 0.0):
            raise InvalidConfigurationError("grid nodes must be finite and strictly increasing")

        faces = np.empty(self.n + 1)
        faces[0] = 0.0
        faces[1:-1] = 0.5 * (nodes[:-1] + nodes[1:])
        faces[-1] = nodes[-1]
        volumes = np.diff(faces ** 4) / 4.0

        for name, value in (('nodes', nodes), ('faces', faces), ('volumes', volumes),
                            ('weights', SPHERE_AREA * volumes)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def radius(self) -> float:
        return float(self.nodes[-1])

    @classmethod
    def from_nodes(cls, nodes: Sequence[float], q: Optional[float] = None) -> 'RadialGrid':
        nodes = np.asarray(nodes, dtype=float)
        return cls(n=int(nodes.size), nodes=nodes, q=q)

    def scaled(self, factor: float) -> 'RadialGrid':
        """Same node pattern stretched to radius ``factor * radius``."""
        if not factor > 0.0:
            raise InvalidConfigurationError(f"scale factor must be positive, got {factor}")
        return RadialGrid(n=self.n, nodes=self.nodes * factor, q=self.q)

    def count_within(self, r: float) -> int:
        return int(np.count_nonzero(self.nodes <= r))


def make_grid(n: int, q: float = 1.0, radius: float = 1.0) -> RadialGrid:
    """Graded grid r_i = radius * (i / (n - 1))**q."""
    if isinstance(n, bool) or int(n) != n:
        raise InvalidConfigurationError(f"grid size n must be an integer, got {n!r}")
    n = int(n)
    if n < MIN_NODES:
        raise InvalidConfigurationError(f"grid size n must be at least {MIN_NODES}, got {n}")
    if not q >= 1.0:
        raise InvalidConfigurationError(f"grading exponent q must be >= 1, got {q}")
    if not (radius > 0.0 and np.isfinite(radius)):
        raise InvalidConfigurationError(f"grid radius must be positive and finite, got {radius}")
    s = np.linspace(0.0, 1.0, n)
    nodes = radius * s ** q
    nodes[-1] = radius
    return RadialGrid(n=n, nodes=nodes, q=float(q))


@dataclass(frozen=True, eq=False)
class RadialField:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise InvalidConfigurationError(
                f"field has {values.size} values but its grid has {self.grid.n} nodes")
        if not np.all(np.isfinite(values)):
            raise InvalidConfigurationError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    def __len__(self) -> int:
        return self.grid.n

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def with_values(self, values: np.ndarray) -> 'RadialField':
        return RadialField(self.grid, values)

    @classmethod
    def from_function(cls, grid: RadialGrid, func) -> 'RadialField':
        return cls(grid, func(grid.nodes))

    @classmethod
    def constant(cls, grid: RadialGrid, value: float) -> 'RadialField':
        return cls(grid, np.full(grid.n, float(value)))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'r': self.grid.nodes, 'value': self.values})

    def write_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
        logger.debug(f"Wrote radial field with {self.grid.n} nodes to {path}")

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> 'RadialField':
        try:
            frame = pd.read_csv(path, float_precision='round_trip')
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise InvalidConfigurationError(f"cannot read radial field from {path}: {e}")
        if list(frame.columns) != ['r', 'value']:
            raise InvalidConfigurationError(
                f"radial field CSV {path} must have header r,value, got {','.join(map(str, frame.columns))}")
        try:
            nodes = frame['r'].to_numpy(dtype=float)
            values = frame['value'].to_numpy(dtype=float)
        except ValueError as e:
            raise InvalidConfigurationError(f"non-numeric entry in {path}: {e}")
        return cls(RadialGrid.from_nodes(nodes), values)


# ---------------------------------------------------------------------------
# pointwise operators

def fornberg_weights(x0, x: np.ndarray, order: int) -> np.ndarray:
    """Finite difference weights for derivatives 0..order at x0 on nodes x.

    Returns an array of shape (len(x), order + 1). Arithmetic follows the
    dtype of ``x`` so extended-precision stencils stay extended.
    """
    x = np.asarray(x)
    m = len(x)
    c = np.zeros((m, order + 1), dtype=x.dtype)
    c1 = x.dtype.type(1)
    c4 = x[0] - x0
    c[0, 0] = 1
    for i in range(1, m):
        mn = min(i, order)
        c2 = x.dtype.type(1)
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 = c2 * c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def laplacian_values(r: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Nodal u'' + 3u'/r on an increasing node array starting at r = 0.

    Interior nodes use the three-point nonuniform central stencils. The
    center value is the even extrapolation a + b r^2 through nodes 1 and 2,
    which is the regular limit 4u''(0) to second order and keeps the
    composition ``laplacian(laplacian(u))`` second order at the center.
    The outer node uses one-sided stencils.
    """
    u = np.asarray(u)
    r = np.asarray(r).astype(u.dtype)
    out = np.empty_like(u)

    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    hs = hm + hp
    um, uc, up = u[:-2], u[1:-1], u[2:]
    second = 2 * (um / (hm * hs) - uc / (hm * hp) + up / (hp * hs))
    first = -hp / (hm * hs) * um + (hp - hm) / (hm * hp) * uc + hm / (hp * hs) * up
    out[1:-1] = second + 3 * first / r[1:-1]

    r1sq, r2sq = r[1] * r[1], r[2] * r[2]
    out[0] = (r2sq * out[1] - r1sq * out[2]) / (r2sq - r1sq)

    tail2 = fornberg_weights(r[-1], r[-4:], 2)
    tail1 = fornberg_weights(r[-1], r[-3:], 1)
    out[-1] = tail2[:, 2] @ u[-4:] + 3 * (tail1[:, 1] @ u[-3:]) / r[-1]
    return out


def laplacian(u: RadialField) -> RadialField:
    return u.with_values(laplacian_values(u.grid.nodes, u.values))


def bilaplacian(u: RadialField) -> RadialField:
    """Nodal laplacian applied twice.

    Only nodes 0..n-3 are free of the one-sided outer closure.
    """
    return laplacian(laplacian(u))


def integrate(u: RadialField) -> float:
    return float(u.grid.weights @ u.values)


def _spline(u: RadialField) -> CubicSpline:
    return CubicSpline(u.grid.nodes, u.values, bc_type=((1, 0.0), 'not-a-knot'))


def evaluate(u: RadialField, r: Union[float, np.ndarray], derivative: int = 0):
    """Cubic spline value (or derivative) of an even radial field."""
    result = _spline(u)(r, derivative)
    return float(result) if np.ndim(result) == 0 else result


def ball_integral(u: RadialField, r: float) -> float:
    """Integral of u over the ball B_r, for 0 <= r <= grid radius."""
    if not 0.0 <= r <= u.grid.radius * (1 + 1e-12):
        raise InvalidConfigurationError(f"ball radius {r} outside [0, {u.grid.radius}]")
    r = min(r, u.grid.radius)
    density = CubicSpline(u.grid.nodes, SPHERE_AREA * u.grid.nodes ** 3 * u.values)
    return float(density.integrate(0.0, r))


def fitted_order(steps: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(step)."""
    slope, _ = np.polyfit(np.log(np.asarray(steps, float)), np.log(np.asarray(errors, float)), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# clamped operator

class ClampedBilaplacian:
    """Discrete Delta^2 with u(R) = value, u'(R) = slope and an even center.

    The conservative Laplacian is ``L u = V^-1 (K u + s)`` where ``K`` is the
    symmetric flux-difference matrix with conductances f^3 / (r_i - r_{i-1})
    on interior faces, no flux through the center, and ``s`` carries the
    boundary flux R^3 * slope into the last cell. The bilaplacian rows are
    ``V^-1 K L u``; the last row is the Dirichlet row.
    """

    def __init__(self, grid: RadialGrid):
        self.grid = grid
        n = grid.n
        r = grid.nodes
        self.volumes = grid.volumes
        self.conductance = np.zeros(n + 1)
        self.conductance[1:n] = grid.faces[1:n] ** 3 / np.diff(r)

        c = self.conductance
        diag = -(c[:-1] + c[1:])
        off = c[1:n]
        self.flux = sparse.diags([off, diag, off], [-1, 0, 1], shape=(n, n), format='csr')
        inverse_volume = sparse.diags(1.0 / self.volumes)
        self.stiffness = (self.flux @ inverse_volume @ self.flux).tocsr()

        m = n - 1
        free = self.stiffness[:m, :m]
        self.banded_upper = np.zeros((3, m))
        for d in range(3):
            self.banded_upper[2 - d, d:] = free.diagonal(d)
        self.banded = np.zeros((5, m))
        self.banded[:3] = self.banded_upper
        for d in (1, 2):
            self.banded[2 + d, :m - d] = free.diagonal(-d)
        try:
            self._factor = cholesky_banded(self.banded_upper, lower=False)
        except LinAlgError as e:
            raise SingularSystemError(f"clamped operator on {n} nodes is not positive definite: {e}")
        logger.debug(f"Factored clamped bilaplacian with {n} nodes")

    @property
    def matrix(self) -> sparse.csr_matrix:
        """Full n x n operator: bilaplacian rows then the Dirichlet row."""
        n = self.grid.n
        rows = sparse.diags(1.0 / self.volumes) @ self.stiffness
        rows = rows.tolil()
        rows[n - 1, :] = 0.0
        rows[n - 1, n - 1] = 1.0
        return rows.tocsr()

    def boundary_flux(self, slope: float) -> np.ndarray:
        s = np.zeros(self.grid.n)
        s[-1] = self.grid.radius ** 3 * slope
        return s

    def laplacian_values(self, u: np.ndarray, slope: float = 0.0) -> np.ndarray:
        return (self.flux @ u + self.boundary_flux(slope)) / self.volumes

    def apply(self, u: np.ndarray, slope: float = 0.0) -> np.ndarray:
        out = (self.flux @ self.laplacian_values(u, slope)) / self.volumes
        out[-1] = u[-1]
        return out

    def dirichlet_energy(self, u: np.ndarray, slope: float = 0.0) -> float:
        """1/2 times the weighted sum of (L u)^2."""
        lap = self.laplacian_values(u, slope)
        return 0.5 * float(self.grid.weights @ (lap * lap))

    def lift(self, value: float = 0.0, slope: float = 0.0) -> np.ndarray:
        """The biharmonic quadratic a + b r^2 carrying the boundary data.

        The flux form reproduces it exactly: its cell Laplacian is the
        constant 8b, so ``apply`` returns zero on every bilaplacian row.
        """
        radius = self.grid.radius
        b = slope / (2.0 * radius)
        a = value - b * radius * radius
        u = a + b * self.grid.nodes ** 2
        u[-1] = value
        return u

    def free_rhs(self, f: np.ndarray) -> np.ndarray:
        """Right-hand side of the reduced homogeneous system on nodes 0..n-2."""
        return self.volumes[:-1] * np.asarray(f, dtype=float)[:-1]

    def solve_free(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve_banded((self._factor, False), rhs, check_finite=False)

    def solve(self, f: np.ndarray, value: float = 0.0, slope: float = 0.0) -> np.ndarray:
        """Lifted solve: u = lift + w with w clamped to zero data."""
        u = self.lift(value, slope)
        u[:-1] += self.solve_free(self.free_rhs(f))
        return u

    def backward_error(self, u: np.ndarray, f: np.ndarray, value: float = 0.0, slope: float = 0.0) -> float:
        """Normwise relative backward error of the homogeneous part of u."""
        rhs = self.free_rhs(f)
        x = (np.asarray(u, float) - self.lift(value, slope))[:-1]
        residual = self.stiffness[:-1, :-1] @ x - rhs
        norm_matrix = abs(self.stiffness[:-1, :-1]).sum(axis=1).max()
        denom = norm_matrix * np.max(np.abs(x)) + np.max(np.abs(rhs))
        if denom == 0.0:
            return 0.0
        return float(np.max(np.abs(residual)) / denom)


@lru_cache(maxsize=32)
def clamped_operator(grid: RadialGrid) -> ClampedBilaplacian:
    return ClampedBilaplacian(grid)


def clamped_solve(f: RadialField, value: float = 0.0, slope: float = 0.0) -> RadialField:
    """Solve Delta^2 u = f with u = value and u' = slope on the outer sphere."""
    return f.with_values(clamped_operator(f.grid).solve(f.values, value, slope))
