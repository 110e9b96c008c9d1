import math
from dataclasses import dataclass
from logging import getLogger

import numpy as np

from covert_bc.channel import Channel, is_absolutely_continuous, is_no_input_redundant
from covert_bc.config import SolverOptions
from covert_bc.constants import CHI2_EXCLUDE, CHI2_ILL_CONDITIONED
from covert_bc.exception import (
    CovertExceptionAbsoluteContinuityViolation,
    CovertExceptionDimensionMismatch,
    CovertExceptionOutOfRange,
    CovertExceptionRedundantNoInput,
)
from covert_bc.measures import chi_squared, gamma_delta, row_divergences
from covert_bc.optimize import BatchObjective, maximize_on_simplex

logger = getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CovertCapacityResult:
    """L* in nats per sqrt(channel use), and the mixing vector over inputs 1..K."""

    l_star: float
    argmax_p: np.ndarray
    zero_capacity: bool = False
    ill_conditioned: bool = False

    def as_dict(self, scale: float = 1.0) -> dict:
        return {
            "l_star": self.l_star * scale,
            "argmax_p": [float(v) for v in self.argmax_p],
            "zero_capacity": self.zero_capacity,
            "ill_conditioned": self.ill_conditioned,
        }


def check_warden(warden: Channel):
    if warden.num_inputs < 2:
        raise CovertExceptionDimensionMismatch("warden needs at least two inputs")
    if not is_absolutely_continuous(warden):
        raise CovertExceptionAbsoluteContinuityViolation(
            "warden rows must satisfy Q_k << Q_0, prune the spec first"
        )
    if is_no_input_redundant(warden):
        raise CovertExceptionRedundantNoInput(
            "Q_0 lies in the convex hull of the other warden rows"
        )


def check_point_to_point(legit: Channel, warden: Channel):
    if legit.num_inputs != warden.num_inputs:
        raise CovertExceptionDimensionMismatch(
            f"legit has {legit.num_inputs} inputs, warden has {warden.num_inputs}"
        )

    check_warden(warden)
    if not is_absolutely_continuous(legit):
        raise CovertExceptionAbsoluteContinuityViolation(
            "legitimate rows must satisfy W_k << W_0"
        )


def warden_gram(warden: Channel) -> np.ndarray:
    """G with p^T G p = chi2(sum_k p_k Q_k || Q_0) on the simplex."""
    q0 = warden.no_input_row
    differences = warden.matrix[1:] - q0
    return (differences / q0) @ differences.T


def capacity_objective(divergences: np.ndarray, gram: np.ndarray) -> BatchObjective:
    def objective(points: np.ndarray) -> np.ndarray:
        points = np.clip(points, 0, None)
        linear = points @ divergences
        chi2 = np.einsum("ij,jk,ik->i", points, gram, points)
        with np.errstate(divide="ignore", invalid="ignore"):
            values = math.sqrt(2) * linear / np.sqrt(chi2)

        return np.where(chi2 < CHI2_EXCLUDE, np.nan, values)

    return objective


def capacity_gradient(divergences: np.ndarray, gram: np.ndarray):
    def gradient(point: np.ndarray) -> np.ndarray:
        linear = float(point @ divergences)
        gp = gram @ point
        chi2 = float(point @ gp)
        return math.sqrt(2) * (divergences / math.sqrt(chi2) - linear * gp / chi2**1.5)

    return gradient


def _warn_conditioning(chi2: float) -> bool:
    if chi2 < CHI2_ILL_CONDITIONED:
        logger.warning(
            f"chi-squared at the optimum is {chi2:.3e}, L* is ill-conditioned"
        )
        return True

    return False


def covert_capacity_binary(legit: Channel, warden: Channel) -> CovertCapacityResult:
    if legit.num_inputs != 2:
        raise CovertExceptionDimensionMismatch(
            f"binary covert capacity needs two inputs, got {legit.num_inputs}"
        )

    check_point_to_point(legit, warden)
    divergence = float(row_divergences(legit.matrix)[0])
    chi2 = chi_squared(warden.matrix[1], warden.no_input_row)
    return CovertCapacityResult(
        l_star=math.sqrt(2) * divergence / math.sqrt(chi2),
        argmax_p=np.ones(1),
        zero_capacity=divergence == 0,
        ill_conditioned=_warn_conditioning(chi2),
    )


def covert_capacity_general(
    legit: Channel, warden: Channel, options: SolverOptions | None = None
) -> CovertCapacityResult:
    if legit.num_inputs == 2:
        return covert_capacity_binary(legit, warden)

    check_point_to_point(legit, warden)
    options = options or SolverOptions()
    divergences = row_divergences(legit.matrix)
    k = divergences.size
    if np.all(divergences == 0):
        logger.info("Every legitimate row equals W_0, covert capacity is zero")
        return CovertCapacityResult(
            l_star=0.0, argmax_p=np.full(k, 1 / k), zero_capacity=True
        )

    gram = warden_gram(warden)
    maximum = maximize_on_simplex(
        capacity_objective(divergences, gram),
        dim=k,
        grid_step=options.grid_step,
        max_grid_points=options.max_grid_points,
        starts=options.starts,
        max_iterations=options.max_iterations,
        step_tolerance=options.step_tolerance,
        seed=options.seed,
        workers=options.workers,
        gradient=capacity_gradient(divergences, gram),
    )
    logger.debug(
        f"Covert capacity {maximum.value} at {maximum.argmax.tolist()},"
        f" lattice incumbent {maximum.grid_value}"
    )
    chi2 = float(maximum.argmax @ gram @ maximum.argmax)
    return CovertCapacityResult(
        l_star=maximum.value,
        argmax_p=maximum.argmax,
        ill_conditioned=_warn_conditioning(chi2),
    )


def covert_capacity_bsc(p: float, warden: Channel) -> float:
    """(1-2p) ln((1-p)/p) sqrt(2/chi2(Q_1||Q_0)) for a BSC(p) legitimate channel."""
    if not 0 <= p <= 0.5:
        raise CovertExceptionOutOfRange(f"crossover p={p} outside [0, 1/2]")
    if warden.num_inputs != 2:
        raise CovertExceptionOutOfRange("BSC closed form needs a binary-input warden")
    if p == 0:
        raise CovertExceptionAbsoluteContinuityViolation(
            "BSC(0) is noiseless, W_1 is not dominated by W_0"
        )

    check_warden(warden)
    chi2 = chi_squared(warden.matrix[1], warden.no_input_row)
    return (1 - 2 * p) * math.log((1 - p) / p) * math.sqrt(2 / chi2)


def covert_capacity_awgn(nj: float, sigma2: float) -> float:
    if not (nj > 0 and sigma2 > 0):
        raise CovertExceptionOutOfRange(
            f"noise variances must be positive, got N={nj}, sigma2={sigma2}"
        )

    return sigma2 / nj


def key_stream_capacity(
    warden: Channel, options: SolverOptions | None = None
) -> float:
    return covert_capacity_general(warden, warden, options).l_star


def tv_covert_throughput(l_star: float, delta: float) -> float:
    """log M / sqrt(n) limit under V(Q^n, Q_0^n) <= delta."""
    return gamma_delta(delta) * l_star
