from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from logging import getLogger

import numpy as np
from scipy.optimize import minimize_scalar

from covert_bc.capacity import covert_capacity_binary, covert_capacity_general
from covert_bc.channel import BroadcastSpec, Channel, Distribution
from covert_bc.config import ConditionOptions, SolverOptions
from covert_bc.constants import CONDITION_TIE, MapCell
from covert_bc.exception import (
    CovertException,
    CovertExceptionDegenerateDenominator,
    CovertExceptionDimensionMismatch,
    CovertExceptionOutOfRange,
    CovertExceptionPrecondition,
)
from covert_bc.measures import (
    chi_squared,
    kl_divergence,
    mixture_divergence,
    mutual_information_batch,
)
from covert_bc.optimize import maximize_on_simplex

logger = getLogger(__name__)

_VANISHING = 1e-14
# offset of a limit witness from its vertex
_LIMIT_OFFSET = 1e-10
# interior evaluations stay this far from the vertices, their limits are exact
_EDGE = 1e-6


@dataclass(frozen=True, eq=False)
class ConditionVerdict:
    satisfied: bool
    dominant_receiver: int
    worst_ratio: float
    witness_px: Distribution
    threshold: float
    l_stars: tuple[float, float]
    on_boundary: bool = False
    witness_is_limit: bool = False
    min_divergence_ratio: float | None = None
    witness_gamma: float | None = None

    def as_dict(self) -> dict:
        data = {
            "satisfied": self.satisfied,
            "dominant_receiver": self.dominant_receiver,
            "worst_ratio": self.worst_ratio,
            "threshold": self.threshold,
            "witness_px": self.witness_px.probs.tolist(),
            "on_boundary": self.on_boundary,
            "witness_is_limit": self.witness_is_limit,
            "l_stars": list(self.l_stars),
        }
        if self.min_divergence_ratio is not None:
            data["min_divergence_ratio"] = self.min_divergence_ratio
            data["witness_gamma"] = self.witness_gamma

        return data


def _tie(threshold: float) -> float:
    return CONDITION_TIE * abs(threshold)


def _verdict(
    worst_ratio: float,
    threshold: float,
    dominant: int,
    witness: np.ndarray,
    l_stars: tuple[float, float],
    satisfied: bool | None = None,
    **kwargs,
) -> ConditionVerdict:
    tie = _tie(threshold)
    if satisfied is None:
        satisfied = worst_ratio <= threshold + tie

    return ConditionVerdict(
        satisfied=bool(satisfied),
        dominant_receiver=dominant,
        worst_ratio=float(worst_ratio),
        witness_px=Distribution(witness),
        threshold=float(threshold),
        l_stars=l_stars,
        on_boundary=bool(satisfied and abs(worst_ratio - threshold) <= tie),
        **kwargs,
    )


def _orient(
    spec: BroadcastSpec, l1: float, l2: float
) -> tuple[int, Channel, Channel, float]:
    """Dominant receiver, its channel, the weaker channel, and L_dom / L_weak."""
    if l1 == 0 and l2 == 0:
        raise CovertExceptionPrecondition("both covert capacities are zero")

    dominant = 1 if l1 >= l2 else 2
    strong, weak = (spec.w, spec.v) if dominant == 1 else (spec.v, spec.w)
    if weak.is_constant():
        raise CovertExceptionDegenerateDenominator(
            f"receiver {3 - dominant} sees a constant channel,"
            " I(X;Y) vanishes everywhere"
        )

    strong_l, weak_l = (l1, l2) if dominant == 1 else (l2, l1)
    return dominant, strong, weak, strong_l / weak_l


def ratio_objective(strong: np.ndarray, weak: np.ndarray):
    """I(P,S)/I(P,T) on the simplex, nan within _EDGE of a vertex."""

    def objective(points: np.ndarray) -> np.ndarray:
        points = np.clip(points, 0, None)
        points = points / points.sum(axis=1, keepdims=True)
        numerator = mutual_information_batch(points, strong)
        denominator = mutual_information_batch(points, weak)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = numerator / denominator

        ratio = np.where(denominator <= _VANISHING, np.inf, ratio)
        undetermined = (denominator <= _VANISHING) & (numerator <= _VANISHING)
        undetermined |= points.max(axis=1) > 1 - _EDGE
        return np.where(undetermined, np.nan, ratio)

    return objective


def _limit_ratio(strong: np.ndarray, weak: np.ndarray, x: int, j: int) -> float:
    """D(S_x||S_j) / D(T_x||T_j), nan when undetermined."""
    numerator = kl_divergence(strong[x], strong[j])
    denominator = kl_divergence(weak[x], weak[j])
    if denominator <= _VANISHING:
        return np.nan if numerator <= _VANISHING else np.inf
    if np.isinf(denominator):
        return np.nan

    return numerator / denominator


def vertex_limits(strong: np.ndarray, weak: np.ndarray) -> tuple[float, np.ndarray]:
    """
    Largest limit of I(P,S)/I(P,T) as P approaches a point mass.

    Near e_j along e_x the ratio tends to D(S_x||S_j) / D(T_x||T_j).
    """
    worst, witness = -np.inf, None
    size = strong.shape[0]
    for j in range(size):
        for x in range(size):
            if x == j:
                continue

            value = _limit_ratio(strong, weak, x, j)
            if np.isnan(value):
                continue

            if value > worst:
                worst = value
                witness = np.zeros(size)
                witness[j], witness[x] = 1 - _LIMIT_OFFSET, _LIMIT_OFFSET

    return worst, witness


def check_condition(
    spec: BroadcastSpec, options: SolverOptions | None = None
) -> ConditionVerdict:
    options = options or SolverOptions()
    l1 = covert_capacity_general(spec.w, spec.warden, options).l_star
    l2 = covert_capacity_general(spec.v, spec.warden, options).l_star
    dominant, strong, weak, threshold = _orient(spec, l1, l2)

    maximum = maximize_on_simplex(
        ratio_objective(strong.matrix, weak.matrix),
        dim=spec.num_inputs,
        grid_step=options.grid_step,
        max_grid_points=options.max_grid_points,
        starts=options.starts,
        max_iterations=options.max_iterations,
        step_tolerance=options.step_tolerance,
        seed=options.seed,
        workers=options.workers,
    )
    limit_value, limit_witness = vertex_limits(strong.matrix, weak.matrix)
    logger.debug(
        f"Condition ratio: interior {maximum.value}, vertex limit {limit_value},"
        f" threshold {threshold}"
    )

    if limit_witness is not None and limit_value >= maximum.value:
        return _verdict(
            limit_value,
            threshold,
            dominant,
            limit_witness,
            (l1, l2),
            witness_is_limit=True,
        )

    return _verdict(maximum.value, threshold, dominant, maximum.argmax, (l1, l2))


def information_ratio(gammas, strong: np.ndarray, weak: np.ndarray) -> np.ndarray:
    """
    I(P_gamma, S) / I(P_gamma, T) for binary inputs, P_gamma = (1 - gamma, gamma).

    gamma = 0 and gamma = 1 take their limits D(S_1||S_0)/D(T_1||T_0) and
    D(S_0||S_1)/D(T_0||T_1).
    """
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    inner = np.clip(gammas, _EDGE, 1 - _EDGE)
    points = np.column_stack([1 - inner, inner])
    numerator = mutual_information_batch(points, strong)
    denominator = mutual_information_batch(points, weak)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = numerator / denominator

    ratio = np.where(gammas <= 0, _limit_ratio(strong, weak, 1, 0), ratio)
    return np.where(gammas >= 1, _limit_ratio(strong, weak, 0, 1), ratio)


def divergence_ratio(gammas, strong: np.ndarray, weak: np.ndarray) -> np.ndarray:
    """
    D(S_gamma||S_0) / D(T_gamma||T_0) for binary inputs.

    The gamma -> 0 limit is chi2(S_1||S_0) / chi2(T_1||T_0).
    """
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    inner = np.clip(gammas, _EDGE, 1)
    one = np.ones(1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = mixture_divergence(inner, one, strong) / mixture_divergence(
            inner, one, weak
        )

    if not np.any(gammas <= 0):
        return ratio

    chi_ratio = chi_squared(strong[1], strong[0]) / chi_squared(weak[1], weak[0])
    return np.where(gammas <= 0, chi_ratio, ratio)


def _line_search(values, gammas: np.ndarray, function, maximize: bool, tolerance):
    """Refine the best lattice point by a bounded scalar search on its neighbours."""
    index = int(np.argmax(values) if maximize else np.argmin(values))
    best_gamma, best_value = float(gammas[index]), float(values[index])
    if not np.isfinite(best_value):
        return best_gamma, best_value

    low = max(float(gammas[max(index - 1, 0)]), _EDGE)
    high = min(float(gammas[min(index + 1, gammas.size - 1)]), 1 - _EDGE)
    if low >= high:
        return best_gamma, best_value

    sign = -1.0 if maximize else 1.0
    result = minimize_scalar(
        lambda g: sign * function(g),
        bounds=(low, high),
        method="bounded",
        options={"xatol": tolerance},
    )
    refined = sign * float(result.fun)
    if (maximize and refined > best_value) or (not maximize and refined < best_value):
        return float(result.x), refined

    return best_gamma, best_value


def check_condition_binary(
    spec: BroadcastSpec, condition_options: ConditionOptions | None = None
) -> ConditionVerdict:
    """
    Line search over gamma in [0, 1] for binary inputs.

    Two pointwise-equivalent forms are scanned on one lattice: the divergence ratio,
    whose minimum must reach the threshold, and the mutual-information ratio, whose
    maximum is the reported worst ratio. Both must hold for the verdict to pass.
    """
    if not spec.is_binary:
        raise CovertExceptionDimensionMismatch(
            f"binary condition check needs two inputs, got {spec.num_inputs}"
        )

    condition_options = condition_options or ConditionOptions()
    l1 = covert_capacity_binary(spec.w, spec.warden).l_star
    l2 = covert_capacity_binary(spec.v, spec.warden).l_star
    dominant, strong, weak, threshold = _orient(spec, l1, l2)
    s, t = strong.matrix, weak.matrix

    gammas = np.linspace(0, 1, int(round(1 / condition_options.line_step)) + 1)
    tolerance = condition_options.golden_tolerance

    divergence = divergence_ratio(gammas, s, t)
    witness_gamma, min_ratio = _line_search(
        np.where(np.isnan(divergence), np.inf, divergence),
        gammas,
        lambda g: float(divergence_ratio(g, s, t)[0]),
        maximize=False,
        tolerance=tolerance,
    )
    information = information_ratio(gammas, s, t)
    worst_gamma, worst_ratio = _line_search(
        np.where(np.isnan(information), -np.inf, information),
        gammas,
        lambda g: float(information_ratio(g, s, t)[0]),
        maximize=True,
        tolerance=tolerance,
    )

    tie = _tie(threshold)
    divergence_holds = min_ratio >= threshold - tie
    information_holds = worst_ratio <= threshold + tie
    if divergence_holds != information_holds:
        logger.info(
            f"Binary condition forms disagree: divergence ratio {min_ratio},"
            f" information ratio {worst_ratio}, threshold {threshold}"
        )

    is_limit = worst_gamma <= 0 or worst_gamma >= 1
    if worst_gamma <= 0:
        witness = [1 - _LIMIT_OFFSET, _LIMIT_OFFSET]
    elif worst_gamma >= 1:
        witness = [_LIMIT_OFFSET, 1 - _LIMIT_OFFSET]
    else:
        witness = [1 - worst_gamma, worst_gamma]

    return _verdict(
        worst_ratio,
        threshold,
        dominant,
        np.array(witness),
        (l1, l2),
        satisfied=divergence_holds and information_holds,
        witness_is_limit=is_limit,
        min_divergence_ratio=min_ratio,
        witness_gamma=witness_gamma,
    )


@dataclass(frozen=True, eq=False)
class ConditionMap:
    q_values: np.ndarray
    cells: tuple[tuple[MapCell, ...], ...]

    def cell(self, i: int, j: int) -> MapCell:
        return self.cells[i][j]

    def rows(self):
        """(q0, q1, verdict) in row-major order."""
        for i, q0 in enumerate(self.q_values):
            for j, q1 in enumerate(self.q_values):
                yield float(q0), float(q1), self.cells[i][j]

    def count(self, state: MapCell) -> int:
        return sum(row.count(state) for row in self.cells)


def condition_map(
    w: Channel,
    grid_step: float,
    warden: Channel,
    workers: int = 1,
    condition_options: ConditionOptions | None = None,
) -> ConditionMap:
    """Verdicts over V = [[1-q0, q0], [q1, 1-q1]], (q0, q1) on a lattice of [0, 1]^2."""
    if w.num_inputs != 2:
        raise CovertExceptionDimensionMismatch("condition map needs a binary-input w")
    if not 0 < grid_step <= 0.1:
        raise CovertExceptionOutOfRange(f"grid_step={grid_step} outside (0, 0.1]")

    q_values = np.linspace(0, 1, int(round(1 / grid_step)) + 1)

    def verdict(q0: float, q1: float) -> MapCell:
        try:
            spec = BroadcastSpec(w, Channel.binary(q0, q1), warden)
            verdict = check_condition_binary(spec, condition_options=condition_options)
            if verdict.satisfied:
                return MapCell.SATISFIED

            return MapCell.VIOLATED

        except CovertException as e:
            logger.debug(f"Cell ({q0}, {q1}) is degenerate: {e}")
            return MapCell.DEGENERATE

    def map_row(q0: float) -> tuple[MapCell, ...]:
        return tuple(verdict(float(q0), float(q1)) for q1 in q_values)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            cells = tuple(executor.map(map_row, q_values))
    else:
        cells = tuple(map_row(q0) for q0 in q_values)

    result = ConditionMap(q_values=q_values, cells=cells)
    degenerate = result.count(MapCell.DEGENERATE)
    if degenerate:
        logger.warning(f"Condition map: {degenerate} degenerate cells")

    return result
