import itertools
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from logging import getLogger

import numpy as np

logger = getLogger(__name__)

# maps an (m, dim) batch of points to m objective values, nan/-inf where undefined
BatchObjective = Callable[[np.ndarray], np.ndarray]
Gradient = Callable[[np.ndarray], np.ndarray]

_ARMIJO = 1e-4
_FINITE_DIFFERENCE_STEP = 1e-7


def project_to_simplex(c: np.ndarray) -> np.ndarray:
    """
    return a solution to: min ||x - c||_2^2 s.t. dot(1, x) = 1 and x >= 0
    """
    c = np.asarray(c, dtype=float)
    a = -np.sort(-c)
    lambdas = (np.cumsum(a) - 1) / np.arange(1, c.size + 1)
    k = np.flatnonzero(a > lambdas)[-1]
    return np.maximum(c - lambdas[k], 0)


def lattice_size(dim: int, m: int) -> int:
    return math.comb(m + dim - 1, dim - 1)


def simplex_grid(dim: int, step: float, max_points: int = 50_000) -> np.ndarray:
    """All points of the simplex whose coordinates are multiples of 1/m, m ~ 1/step."""
    m = max(1, round(1 / step))
    while m > 1 and lattice_size(dim, m) > max_points:
        m = max(1, int(m * 0.8))

    combinations = list(itertools.combinations(range(m + dim - 1), dim - 1))
    bars = np.array(combinations, dtype=int).reshape(len(combinations), dim - 1)
    edges = np.hstack(
        [
            np.full((bars.shape[0], 1), -1),
            bars,
            np.full((bars.shape[0], 1), m + dim - 1),
        ]
    )
    return (np.diff(edges, axis=1) - 1) / m


def finite_difference_gradient(objective: BatchObjective) -> Gradient:
    def gradient(x: np.ndarray) -> np.ndarray:
        dim = x.size
        offsets = np.eye(dim) * _FINITE_DIFFERENCE_STEP
        values = objective(np.vstack([x + offsets, x - offsets]))
        return (values[:dim] - values[dim:]) / (2 * _FINITE_DIFFERENCE_STEP)

    return gradient


@dataclass
class SimplexMaximum:
    value: float
    argmax: np.ndarray
    grid_value: float
    grid_argmax: np.ndarray


def _finite(value: float) -> float:
    return value if np.isfinite(value) else -np.inf


def projected_gradient_ascent(
    objective: BatchObjective,
    gradient: Gradient,
    start: np.ndarray,
    max_iterations: int = 500,
    step_tolerance: float = 1e-12,
) -> tuple[float, np.ndarray]:
    def value_at(point: np.ndarray) -> float:
        return _finite(float(objective(point[None, :])[0]))

    x = project_to_simplex(start)
    fx = value_at(x)
    t = 1.0
    for _ in range(max_iterations):
        g = gradient(x)
        if not np.all(np.isfinite(g)) or not np.isfinite(fx):
            break

        t = min(t * 4, 1e6)
        while t > 1e-16:
            y = project_to_simplex(x + t * g)
            fy = value_at(y)
            if fy >= fx + _ARMIJO * float(g @ (y - x)):
                break
            t /= 2
        else:
            break

        # projected steps are ascent directions, the armijo test keeps fy >= fx
        moved = float(np.max(np.abs(y - x)))
        x, fx = y, fy
        if moved < step_tolerance:
            break

    return fx, x


def maximize_on_simplex(
    objective: BatchObjective,
    dim: int,
    grid_step: float = 1 / 200,
    max_grid_points: int = 50_000,
    starts: int = 8,
    max_iterations: int = 500,
    step_tolerance: float = 1e-12,
    seed: int = 0,
    workers: int = 1,
    gradient: Gradient | None = None,
    extra_starts: list[np.ndarray] | None = None,
) -> SimplexMaximum:
    """
    Multi-start projected gradient ascent, certified by a lattice search.

    The lattice incumbent is always one of the starts, so the returned value never
    falls below the best lattice sample.
    """
    if dim == 1:
        point = np.ones(1)
        value = _finite(float(objective(point[None, :])[0]))
        return SimplexMaximum(value, point, value, point)

    grid = simplex_grid(dim, grid_step, max_grid_points)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        grid_values = np.where(np.isfinite(v := objective(grid)), v, -np.inf)
    best = int(np.argmax(grid_values))
    grid_value, grid_argmax = float(grid_values[best]), grid[best]
    logger.debug(
        f"Simplex lattice: {grid.shape[0]} points in dim {dim}, incumbent {grid_value}"
    )
    if grid_value == np.inf:
        return SimplexMaximum(grid_value, grid_argmax, grid_value, grid_argmax)

    rng = np.random.default_rng(seed)
    start_points = [grid_argmax, *rng.dirichlet(np.ones(dim), size=starts - 1)]
    if extra_starts:
        start_points.extend(extra_starts)

    gradient = gradient or finite_difference_gradient(objective)

    def climb(start: np.ndarray) -> tuple[float, np.ndarray]:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return projected_gradient_ascent(
                objective, gradient, start, max_iterations, step_tolerance
            )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(climb, start_points))
    else:
        results = [climb(start) for start in start_points]

    value, argmax = grid_value, grid_argmax
    for start_value, start_argmax in results:
        if start_value > value:
            value, argmax = start_value, start_argmax

    return SimplexMaximum(value, argmax, grid_value, grid_argmax)
