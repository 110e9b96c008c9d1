import math
from collections.abc import Sequence
from dataclasses import dataclass
from logging import getLogger

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq
from scipy.special import entr
from scipy.stats import norm

from covert_bc.capacity import check_warden
from covert_bc.channel import BroadcastSpec, Channel, ProbabilityLike, as_probs
from covert_bc.condition import (
    ConditionVerdict,
    check_condition,
    check_condition_binary,
)
from covert_bc.config import ConverseOptions, SolverOptions
from covert_bc.constants import ENVELOPE_TOLERANCE
from covert_bc.exception import (
    CovertExceptionAbsoluteContinuityViolation,
    CovertExceptionConditionViolated,
    CovertExceptionDimensionMismatch,
    CovertExceptionOutOfRange,
    CovertExceptionPrecondition,
    CovertExceptionTooFewSamples,
)
from covert_bc.measures import (
    binary_entropy,
    chi_squared,
    inv_binary_entropy,
    mutual_information_batch,
)

logger = getLogger(__name__)

# alpha^2 (1 - sqrt(alpha)) peaks at alpha = 0.64
_WEIGHT_PEAK = 0.64
_WEIGHT_PEAK_VALUE = _WEIGHT_PEAK**2 * (1 - math.sqrt(_WEIGHT_PEAK))


@dataclass(frozen=True, eq=False)
class WeightBudget:
    """
    alpha_bar: largest admissible relative weight, sqrt(2 delta / (chi2 n))
    alpha_max: smallest root of alpha^2 (1 - sqrt(alpha)) = alpha_bar^2, the
        non-asymptotic weight constraint
    Gaussian budgets are in power units and carry sigma2 instead of chi2.
    """

    alpha_bar: float
    n: int
    delta: float
    mix_p: np.ndarray
    alpha_max: float
    chi2: float | None = None
    sigma2: float | None = None

    @property
    def gaussian(self) -> bool:
        return self.sigma2 is not None


def _check_budget_arguments(delta: float, n: int):
    if delta < 0:
        raise CovertExceptionOutOfRange(f"delta={delta} must be non-negative")
    if n < 1:
        raise CovertExceptionOutOfRange(f"blocklength n={n} must be at least 1")


def exact_weight(alpha_bar: float) -> float:
    if alpha_bar == 0:
        return 0.0
    if alpha_bar**2 >= _WEIGHT_PEAK_VALUE:
        return min(1.0, alpha_bar)

    return brentq(
        lambda a: a**2 * (1 - math.sqrt(a)) - alpha_bar**2,
        alpha_bar,
        _WEIGHT_PEAK,
        xtol=1e-15,
    )


def max_weight(
    delta: float, n: int, warden: Channel, mix_p: ProbabilityLike | None = None
) -> WeightBudget:
    _check_budget_arguments(delta, n)
    check_warden(warden)

    k = warden.num_inputs - 1
    mix = np.full(k, 1 / k) if mix_p is None else as_probs(mix_p)
    if mix.shape != (k,):
        raise CovertExceptionDimensionMismatch(
            f"mixing vector has {mix.size} entries, warden has {k} non-zero inputs"
        )

    chi2 = chi_squared(mix @ warden.matrix[1:], warden.no_input_row)
    alpha_bar = math.sqrt(2 * delta / (chi2 * n))
    if alpha_bar > 1:
        logger.warning(f"Weight budget {alpha_bar} exceeds one, clamped (n={n})")
        alpha_bar = 1.0

    return WeightBudget(
        alpha_bar=alpha_bar,
        n=n,
        delta=delta,
        mix_p=mix,
        alpha_max=exact_weight(alpha_bar),
        chi2=chi2,
    )


def max_weight_gaussian(delta: float, n: int, sigma2: float) -> WeightBudget:
    """alpha^2 / (4 sigma^4) <= delta / n, in power units."""
    _check_budget_arguments(delta, n)
    if not sigma2 > 0:
        raise CovertExceptionOutOfRange(f"sigma2={sigma2} must be positive")

    alpha_bar = 2 * sigma2 * math.sqrt(delta / n)
    return WeightBudget(
        alpha_bar=alpha_bar,
        n=n,
        delta=delta,
        mix_p=np.ones(1),
        alpha_max=alpha_bar,
        sigma2=sigma2,
    )


@dataclass(frozen=True, eq=False)
class EnvelopeFn:
    xs: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        result = np.interp(x, self.xs, self.values)
        return float(result) if np.ndim(result) == 0 else result

    @property
    def knots(self) -> list[tuple[float, float]]:
        return list(zip(self.xs.tolist(), self.values.tolist()))

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.xs)

    @property
    def maximum(self) -> float:
        return float(self.values.max())


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def upper_concave_envelope(samples) -> EnvelopeFn:
    """Upper convex hull of (x, f(x)) samples, scanned left to right."""
    points = np.asarray(samples, dtype=float)
    if points.ndim != 2 or points.shape[0] < 2 or points.shape[1] != 2:
        raise CovertExceptionTooFewSamples(
            "the envelope needs at least two (x, f(x)) samples"
        )

    points = points[np.argsort(points[:, 0], kind="stable")]
    if np.any(np.diff(points[:, 0]) <= 0):
        raise CovertExceptionOutOfRange("envelope sample abscissae must be distinct")

    hull: list[np.ndarray] = []
    for point in points:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], point) >= 0:
            hull.pop()
        hull.append(point)

    knots = np.array(hull)
    return EnvelopeFn(xs=knots[:, 0], values=knots[:, 1])


@dataclass(frozen=True)
class ConverseBound:
    lambda_: float
    bound_nats: float
    normalized: float
    envelope_max: float
    alpha_max: float
    dominant_receiver: int
    n: int
    delta: float

    def as_row(self, scale: float = 1.0) -> dict:
        return {
            "n": self.n,
            "lambda": self.lambda_,
            "bound_nats": self.bound_nats * scale,
            "normalized": self.normalized * scale,
        }


def _condition_verdict(spec: BroadcastSpec, solver: SolverOptions | None):
    if spec.is_binary:
        return check_condition_binary(spec)

    return check_condition(spec, solver)


def _sparse_inputs(alphas: np.ndarray, mix: np.ndarray) -> np.ndarray:
    return np.hstack([(1 - alphas)[:, None], alphas[:, None] * mix[None, :]])


def lambda_sum_bound(
    spec: BroadcastSpec,
    budget: WeightBudget,
    verdict: ConditionVerdict | None = None,
    options: ConverseOptions | None = None,
    solver: SolverOptions | None = None,
) -> ConverseBound:
    """
    max over alpha <= alpha_max of
        lambda I(P_alpha, T) + env[I(., S) - lambda I(., T)](alpha)

    S is the dominant receiver's channel, T the other one and lambda = L_S* / L_T*.
    """
    options = options or ConverseOptions()
    verdict = verdict or _condition_verdict(spec, solver)
    if not verdict.satisfied:
        raise CovertExceptionPrecondition(
            f"time-division optimality condition fails: worst ratio"
            f" {verdict.worst_ratio} > threshold {verdict.threshold}"
        )

    mix = as_probs(budget.mix_p)
    if mix.shape != (spec.num_inputs - 1,):
        raise CovertExceptionDimensionMismatch(
            f"budget mixes {mix.size} inputs, spec has {spec.num_inputs - 1}"
        )

    lambda_ = verdict.threshold
    dominant = verdict.dominant_receiver
    strong, weak = (spec.w, spec.v) if dominant == 1 else (spec.v, spec.w)
    if budget.alpha_max == 0:
        return ConverseBound(
            lambda_, 0.0, 0.0, 0.0, 0.0, dominant, budget.n, budget.delta
        )

    def evaluate(alphas: np.ndarray):
        inputs = _sparse_inputs(alphas, mix)
        weak_i = mutual_information_batch(inputs, weak.matrix)
        inner = mutual_information_batch(inputs, strong.matrix) - lambda_ * weak_i
        return weak_i, inner

    alphas = np.linspace(0, budget.alpha_max, options.grid_points)
    weak_i, inner = evaluate(alphas)
    envelope = upper_concave_envelope(np.column_stack([alphas, inner]))
    values = lambda_ * weak_i + envelope(alphas)

    # one refinement pass around the coarse maximizer
    best = int(np.argmax(values))
    low, high = alphas[max(best - 1, 0)], alphas[min(best + 1, alphas.size - 1)]
    fine = np.linspace(low, high, options.grid_points)
    alphas = np.union1d(alphas, fine)
    weak_i, inner = evaluate(alphas)
    envelope = upper_concave_envelope(np.column_stack([alphas, inner]))
    values = lambda_ * weak_i + envelope(alphas)

    if envelope.maximum > ENVELOPE_TOLERANCE:
        raise CovertExceptionConditionViolated(
            f"envelope term reaches {envelope.maximum:.3e} although the condition holds"
        )

    bound = max(0.0, float(values.max()))
    logger.debug(
        f"lambda-sum bound n={budget.n}: {bound} nats at lambda={lambda_},"
        f" envelope max {envelope.maximum}"
    )
    return ConverseBound(
        lambda_=lambda_,
        bound_nats=bound,
        normalized=bound * math.sqrt(budget.n / budget.delta),
        envelope_max=envelope.maximum,
        alpha_max=budget.alpha_max,
        dominant_receiver=dominant,
        n=budget.n,
        delta=budget.delta,
    )


def converse_sweep(
    spec: BroadcastSpec,
    delta: float,
    n_list: Sequence[int],
    mix_p: ProbabilityLike | None = None,
    options: ConverseOptions | None = None,
    solver: SolverOptions | None = None,
) -> list[ConverseBound]:
    verdict = _condition_verdict(spec, solver)
    return [
        lambda_sum_bound(
            spec, max_weight(delta, n, spec.warden, mix_p), verdict, options, solver
        )
        for n in n_list
    ]


@dataclass(frozen=True, eq=False)
class ConverseRegion:
    """First-order frontier pairs; `scale` maps them to nats per sqrt(n delta)."""

    parameter: np.ndarray
    points: np.ndarray
    scale: float

    def normalized(self) -> np.ndarray:
        return self.points * self.scale

    def pairs(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in self.points]


def bsc_slope(p: float) -> float:
    """(1-2p) ln((1-p)/p) = D(Bern(1-p) || Bern(p))"""
    if p == 0:
        raise CovertExceptionAbsoluteContinuityViolation("BSC(0) has an infinite slope")

    return (1 - 2 * p) * math.log((1 - p) / p)


def bsc_converse_region(
    p1: float, p2: float, budget: WeightBudget, points: int = 101
) -> ConverseRegion:
    if not 0 <= p1 <= p2 <= 0.5:
        raise CovertExceptionOutOfRange(
            f"crossovers must satisfy 0 <= p1 <= p2 <= 1/2, got {p1}, {p2}"
        )
    if budget.gaussian:
        raise CovertExceptionOutOfRange("BSC frontier needs a discrete weight budget")

    c1, c2 = bsc_slope(p1), bsc_slope(p2)
    a = budget.alpha_bar * math.sqrt(budget.n)
    t = np.linspace(0, a, points)
    return ConverseRegion(
        parameter=t,
        points=np.column_stack([c1 * t, c2 * (a - t)]),
        scale=1 / math.sqrt(budget.delta) if budget.delta > 0 else 0.0,
    )


def gaussian_converse_region(
    n1: float, n2: float, sigma2: float, budget: WeightBudget, points: int = 101
) -> ConverseRegion:
    if not 0 < n1 <= n2:
        raise CovertExceptionOutOfRange(
            f"noise variances must satisfy 0 < N1 <= N2, got {n1}, {n2}"
        )
    if not sigma2 > 0:
        raise CovertExceptionOutOfRange(f"sigma2={sigma2} must be positive")

    alpha = budget.alpha_bar
    tau = np.linspace(0, alpha, points)
    return ConverseRegion(
        parameter=tau,
        points=np.column_stack([tau / (2 * n1), (alpha - tau) / (2 * n2)]),
        scale=math.sqrt(budget.n / budget.delta) if budget.delta > 0 else 0.0,
    )


def _check_crossover(p: float):
    if not 0 <= p <= 0.5:
        raise CovertExceptionOutOfRange(f"crossover p={p} outside [0, 1/2]")


def mrs_gerber_check(h: float, p: float) -> tuple[float, float]:
    """(h_b(h_b^-1(h) * p), h)"""
    _check_crossover(p)
    q = inv_binary_entropy(h)
    return binary_entropy(q * (1 - p) + p * (1 - q)), h


def mrs_gerber_mixture(
    u_probs: ProbabilityLike, biases: Sequence[float], p: float
) -> tuple[float, float]:
    """
    (h_b(h_b^-1(H(X|U)) * p), H(X xor Z|U)) for X|U=u ~ Bern(biases[u]), Z ~ Bern(p).
    """
    _check_crossover(p)
    weights = as_probs(u_probs)
    biases = np.asarray(biases, dtype=float)
    conditional = float(weights @ binary_entropy(biases))
    noisy = float(weights @ binary_entropy(biases * (1 - p) + p * (1 - biases)))
    lhs, _ = mrs_gerber_check(conditional, p)
    return lhs, noisy


def taylor_check(q: float, xi: float) -> tuple[float, float]:
    """
    Remainder of h_b(q * xi) ~ h_b(q) + ln((1-q)/q)(1-2q) xi, and its bound
    (1-2q)^2 / (2 q (1-q)) xi^2 from |h_b''| on [q, 1/2].
    """
    if not 0 < q < 0.5:
        raise CovertExceptionOutOfRange(f"q={q} outside (0, 1/2)")
    if not 0 <= xi <= 1:
        raise CovertExceptionOutOfRange(f"xi={xi} outside [0, 1]")

    convolved = q * (1 - xi) + xi * (1 - q)
    first_order = binary_entropy(q) + math.log((1 - q) / q) * (1 - 2 * q) * xi
    remainder = abs(binary_entropy(convolved) - first_order)
    return remainder, (1 - 2 * q) ** 2 / (2 * q * (1 - q)) * xi**2


def _mixture_entropy(grid: np.ndarray, points: np.ndarray, probs, variance) -> float:
    kernels = norm.pdf(grid[None, :], points[:, None], math.sqrt(variance))
    density = (probs[:, None] * kernels).sum(axis=0)
    return float(trapezoid(entr(density), grid))


def epi_check(
    u_probs: ProbabilityLike,
    x_points: Sequence[float],
    x_probs_given_u,
    n1: float,
    n2: float,
    grid_points: int = 20_001,
) -> tuple[float, float]:
    """
    (exp(2 h(Y2|U)), exp(2 h(Y1|U)) + 2 pi e (N2 - N1)) with Y_j = X + N(0, N_j),
    differential entropies integrated on a uniform grid.
    """
    if not 0 < n1 <= n2:
        raise CovertExceptionOutOfRange(
            f"noise variances must satisfy 0 < N1 <= N2, got {n1}, {n2}"
        )

    weights = as_probs(u_probs)
    points = np.asarray(x_points, dtype=float)
    conditional = np.atleast_2d(np.asarray(x_probs_given_u, dtype=float))
    if conditional.shape != (weights.size, points.size):
        raise CovertExceptionDimensionMismatch(
            f"P(x|u) has shape {conditional.shape}, expected"
            f" {(weights.size, points.size)}"
        )

    span = 12 * math.sqrt(n2)
    grid = np.linspace(points.min() - span, points.max() + span, grid_points)
    h1 = sum(
        w * _mixture_entropy(grid, points, row, n1)
        for w, row in zip(weights, conditional)
    )
    h2 = sum(
        w * _mixture_entropy(grid, points, row, n2)
        for w, row in zip(weights, conditional)
    )
    return math.exp(2 * h2), math.exp(2 * h1) + 2 * math.pi * math.e * (n2 - n1)
