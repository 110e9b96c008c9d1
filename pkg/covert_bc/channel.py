from collections.abc import Sequence
from dataclasses import dataclass, field
from logging import getLogger

import numpy as np

from covert_bc.constants import (
    IDENTITY_TOLERANCE,
    REDUNDANCY_RESIDUAL,
    STOCHASTIC_TOLERANCE,
)
from covert_bc.exception import (
    CovertExceptionDimensionMismatch,
    CovertExceptionNonStochasticRow,
    CovertExceptionOutOfRange,
    CovertExceptionPrecondition,
)
from covert_bc.optimize import project_to_simplex

logger = getLogger(__name__)


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Distribution:
    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 1 or probs.size == 0:
            raise CovertExceptionDimensionMismatch(
                f"distribution must be a non-empty vector, got shape {probs.shape}"
            )
        if np.any(probs < 0) or abs(probs.sum() - 1) > STOCHASTIC_TOLERANCE:
            raise CovertExceptionNonStochasticRow(
                f"not a probability vector: {probs.tolist()}"
            )

        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return self.probs.size

    def __repr__(self) -> str:
        return f"Distribution({self.probs.tolist()})"

    @property
    def support(self) -> np.ndarray:
        return self.probs > 0

    @classmethod
    def point_mass(cls, index: int, size: int) -> "Distribution":
        probs = np.zeros(size)
        probs[index] = 1.0
        return cls(probs)

    @classmethod
    def bernoulli(cls, p: float) -> "Distribution":
        return cls([1 - p, p])


ProbabilityLike = Distribution | Sequence[float] | np.ndarray


def as_probs(value: ProbabilityLike) -> np.ndarray:
    if isinstance(value, Distribution):
        return value.probs

    return np.asarray(value, dtype=float)


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic matrix, row 0 is the no-input symbol."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))

    def __repr__(self) -> str:
        return f"Channel({self.matrix.tolist()})"

    @property
    def num_inputs(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_outputs(self) -> int:
        return self.matrix.shape[1]

    @property
    def no_input_row(self) -> np.ndarray:
        return self.matrix[0]

    def row(self, x: int) -> Distribution:
        return Distribution(self.matrix[x])

    def is_constant(self, tolerance: float = IDENTITY_TOLERANCE) -> bool:
        return bool(np.all(np.abs(self.matrix - self.matrix[0]) <= tolerance))

    @classmethod
    def bsc(cls, crossover: float) -> "Channel":
        return cls([[1 - crossover, crossover], [crossover, 1 - crossover]])

    @classmethod
    def binary(cls, q0: float, q1: float) -> "Channel":
        """V = [[1-q0, q0], [q1, 1-q1]]"""
        return cls([[1 - q0, q0], [q1, 1 - q1]])


def validate_channel(matrix) -> Channel:
    try:
        array = np.array(matrix, dtype=float)
    except ValueError as e:
        raise CovertExceptionDimensionMismatch(f"channel is not rectangular: {e}")

    if array.ndim != 2 or array.size == 0:
        raise CovertExceptionDimensionMismatch(
            f"channel must be a non-empty matrix, got shape {array.shape}"
        )

    for x, row in enumerate(array):
        if np.any(row < 0) or abs(row.sum() - 1) > STOCHASTIC_TOLERANCE:
            raise CovertExceptionNonStochasticRow(
                f"row {x} is not a distribution: {row.tolist()}"
            )

    return Channel(array)


def is_absolutely_continuous(ch: Channel) -> bool:
    outside = ch.no_input_row <= 0
    return not bool(np.any(ch.matrix[1:, outside] > 0))


def redundancy_residual(warden: Channel, max_iterations: int = 20_000) -> float:
    """min over the simplex of |sum_k p_k Q_k - Q_0|^2, k >= 1"""
    if warden.num_inputs < 2:
        raise CovertExceptionDimensionMismatch("warden needs at least two inputs")

    a = warden.matrix[1:].T
    b = warden.no_input_row
    k = a.shape[1]
    lipschitz = 2 * np.linalg.norm(a, 2) ** 2
    step = 1 / lipschitz if lipschitz > 0 else 1.0

    best = np.inf
    for start in [np.full(k, 1 / k), *np.eye(k)]:
        p = start
        residual = a @ p - b
        value = float(residual @ residual)
        for _ in range(max_iterations):
            if value < REDUNDANCY_RESIDUAL * 1e-2:
                break

            p_next = project_to_simplex(p - step * 2 * (a.T @ residual))
            residual = a @ p_next - b
            value_next = float(residual @ residual)
            if np.max(np.abs(p_next - p)) < 1e-15:
                p, value = p_next, value_next
                break
            p, value = p_next, value_next

        best = min(best, value)
        if best < REDUNDANCY_RESIDUAL:
            break

    return best


def is_no_input_redundant(warden: Channel) -> bool:
    return redundancy_residual(warden) < REDUNDANCY_RESIDUAL


def induced_output(px: ProbabilityLike, ch: Channel) -> Distribution:
    probs = as_probs(px)
    if probs.shape != (ch.num_inputs,):
        raise CovertExceptionDimensionMismatch(
            f"input has {probs.size} symbols, channel has {ch.num_inputs}"
        )

    output = probs @ ch.matrix
    return Distribution(np.clip(output, 0, None))


def sparse_input(gamma: float, p: ProbabilityLike, num_inputs: int) -> Distribution:
    """P_{gamma,p}: 1-gamma on the no-input symbol, gamma*p_k on input k."""
    if not 0 <= gamma <= 1:
        raise CovertExceptionOutOfRange(f"gamma={gamma} outside [0, 1]")

    mix = as_probs(p)
    if mix.shape != (num_inputs - 1,):
        raise CovertExceptionDimensionMismatch(
            f"mixing vector has {mix.size} entries, expected {num_inputs - 1}"
        )

    return Distribution(np.concatenate(([1 - gamma], gamma * mix)))


@dataclass(frozen=True, eq=False)
class GaussianBroadcastSpec:
    n1: float
    n2: float
    sigma2: float

    def __post_init__(self):
        for name in ("n1", "n2", "sigma2"):
            if not getattr(self, name) > 0:
                raise CovertExceptionOutOfRange(
                    f"{name}={getattr(self, name)} must be a positive variance"
                )


@dataclass(frozen=True)
class PruningReport:
    dropped_inputs: tuple[int, ...] = ()
    dropped_outputs: tuple[int, ...] = ()

    @property
    def pruned(self) -> bool:
        return bool(self.dropped_inputs or self.dropped_outputs)


@dataclass(frozen=True, eq=False)
class BroadcastSpec:
    w: Channel
    v: Channel
    warden: Channel
    pruning: PruningReport = field(default_factory=PruningReport)

    def __post_init__(self):
        inputs = {self.w.num_inputs, self.v.num_inputs, self.warden.num_inputs}
        if len(inputs) != 1:
            raise CovertExceptionDimensionMismatch(
                f"w, v and warden disagree on the input alphabet: {sorted(inputs)}"
            )

    @property
    def num_inputs(self) -> int:
        return self.w.num_inputs

    @property
    def is_binary(self) -> bool:
        return self.num_inputs == 2

    def legit(self, receiver: int) -> Channel:
        return self.w if receiver == 1 else self.v

    def swapped(self) -> "BroadcastSpec":
        return BroadcastSpec(self.v, self.w, self.warden, self.pruning)


def prune_broadcast_spec(w: Channel, v: Channel, warden: Channel) -> BroadcastSpec:
    """
    Keep the input symbols whose warden row lives inside supp(Q_0), then drop the
    warden outputs outside supp(Q_0).
    """
    if not (w.num_inputs == v.num_inputs == warden.num_inputs):
        raise CovertExceptionDimensionMismatch(
            "w, v and warden must share the input alphabet"
        )

    outside = warden.no_input_row <= 0
    keep_inputs = [0] + [
        x
        for x in range(1, warden.num_inputs)
        if not np.any(warden.matrix[x, outside] > 0)
    ]
    keep_outputs = np.flatnonzero(~outside)
    report = PruningReport(
        dropped_inputs=tuple(
            x for x in range(warden.num_inputs) if x not in keep_inputs
        ),
        dropped_outputs=tuple(int(z) for z in np.flatnonzero(outside)),
    )
    if len(keep_inputs) < 2:
        raise CovertExceptionPrecondition(
            "no input symbol survives pruning against supp(Q_0)"
        )

    if report.pruned:
        logger.warning(
            f"Pruned warden support: dropped inputs {list(report.dropped_inputs)},"
            f" dropped warden outputs {list(report.dropped_outputs)}"
        )

    warden_matrix = warden.matrix[np.ix_(keep_inputs, keep_outputs)]
    # rows lost mass only on zero columns
    warden_matrix = warden_matrix / warden_matrix.sum(axis=1, keepdims=True)
    return BroadcastSpec(
        w=Channel(w.matrix[keep_inputs]),
        v=Channel(v.matrix[keep_inputs]),
        warden=Channel(warden_matrix),
        pruning=report,
    )


def build_broadcast_spec(w, v, warden) -> BroadcastSpec:
    return prune_broadcast_spec(
        validate_channel(w), validate_channel(v), validate_channel(warden)
    )
