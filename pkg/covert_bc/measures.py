"""
Entropies, divergences and mutual information, all in nats.

0 log 0 = 0 everywhere; divergences are +inf when absolute continuity fails.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import bisect
from scipy.special import entr, rel_entr, xlog1py
from scipy.stats import norm

from covert_bc.channel import (
    Channel,
    ProbabilityLike,
    as_probs,
    sparse_input,
)
from covert_bc.constants import IDENTITY_TOLERANCE
from covert_bc.exception import (
    CovertExceptionDimensionMismatch,
    CovertExceptionOutOfRange,
    CovertExceptionSupportViolation,
)

LN2 = math.log(2)


def _pair(p: ProbabilityLike, q: ProbabilityLike) -> tuple[np.ndarray, np.ndarray]:
    p, q = as_probs(p), as_probs(q)
    if p.shape != q.shape:
        raise CovertExceptionDimensionMismatch(
            f"alphabets differ: {p.shape} vs {q.shape}"
        )

    return p, q


def kl_divergence(p: ProbabilityLike, q: ProbabilityLike) -> float:
    p, q = _pair(p, q)
    return float(np.sum(rel_entr(p, q)))


def chi_squared(p: ProbabilityLike, q: ProbabilityLike) -> float:
    p, q = _pair(p, q)
    outside = q <= 0
    if np.any(p[outside] > 0):
        raise CovertExceptionSupportViolation(
            "chi-squared distance needs supp(p) inside supp(q)"
        )

    inside = ~outside
    return float(np.sum((p[inside] - q[inside]) ** 2 / q[inside]))


def total_variation(p: ProbabilityLike, q: ProbabilityLike) -> float:
    p, q = _pair(p, q)
    return float(0.5 * np.sum(np.abs(p - q)))


def _check_unit_interval(name: str, value) -> np.ndarray:
    array = np.asarray(value, dtype=float)
    if np.any(array < 0) or np.any(array > 1) or np.any(np.isnan(array)):
        raise CovertExceptionOutOfRange(f"{name}={value} outside [0, 1]")

    return array


def binary_entropy(q):
    q = _check_unit_interval("q", q)
    h = entr(q) + entr(1 - q)
    return float(h) if h.ndim == 0 else h


def inv_binary_entropy(h: float) -> float:
    """The preimage of h on [0, 1/2], by bisection to 1e-12."""
    if not -IDENTITY_TOLERANCE <= h <= LN2 + IDENTITY_TOLERANCE:
        raise CovertExceptionOutOfRange(f"h={h} outside [0, ln 2]")

    h = min(max(h, 0.0), LN2)
    if h == 0:
        return 0.0
    if h == LN2:
        return 0.5

    return bisect(lambda q: binary_entropy(q) - h, 0.0, 0.5, xtol=1e-14)


def binary_convolution(a: float, b: float) -> float:
    _check_unit_interval("a", a)
    _check_unit_interval("b", b)
    return a * (1 - b) + b * (1 - a)


def mutual_information_batch(inputs: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """I(P, W) for every row P of `inputs`, written as sum_x P(x) D(W_x || P W)."""
    inputs = np.atleast_2d(inputs)
    outputs = inputs @ matrix
    with np.errstate(invalid="ignore"):
        divergences = rel_entr(matrix[None, :, :], outputs[:, None, :]).sum(axis=2)
        terms = np.where(inputs > 0, inputs * divergences, 0.0)

    return np.maximum(terms.sum(axis=1), 0.0)


def mutual_information(px: ProbabilityLike, ch: Channel) -> float:
    probs = as_probs(px)
    if probs.shape != (ch.num_inputs,):
        raise CovertExceptionDimensionMismatch(
            f"input has {probs.size} symbols, channel has {ch.num_inputs}"
        )

    return float(mutual_information_batch(probs, ch.matrix)[0])


def mixture_divergence(gammas, p: ProbabilityLike, matrix: np.ndarray) -> np.ndarray:
    """D(Q_{gamma,p} || Q_0) for each gamma, with Q = matrix."""
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    q0 = matrix[0]
    mixed = as_probs(p) @ matrix[1:]
    support = q0 > 0
    # Q_gamma = Q_0 (1 + deviation) on supp(Q_0), exact as gamma -> 0
    deviation = gammas[:, None] * ((mixed[support] - q0[support]) / q0[support])
    terms = xlog1py(1 + deviation, deviation) - deviation
    divergence = (q0[support] * np.maximum(terms, 0.0)).sum(axis=1)
    if np.any(mixed[~support] > 0):
        return np.where(gammas > 0, np.inf, divergence)

    return divergence


def row_divergences(matrix: np.ndarray) -> np.ndarray:
    """D(W_k || W_0) for k >= 1."""
    return rel_entr(matrix[1:], matrix[0][None, :]).sum(axis=1)


@dataclass(frozen=True)
class SparseMiDecomposition:
    linear_term: float
    kl_term: float
    mi: float

    @property
    def residual(self) -> float:
        return abs(self.mi - (self.linear_term - self.kl_term))


def _check_mix(p: ProbabilityLike, ch: Channel) -> np.ndarray:
    mix = as_probs(p)
    if mix.shape != (ch.num_inputs - 1,):
        raise CovertExceptionDimensionMismatch(
            f"mixing vector has {mix.size} entries, channel has {ch.num_inputs - 1}"
            " non-zero inputs"
        )

    return mix


def sparse_mi_decomposition(
    gamma: float, p: ProbabilityLike, ch: Channel
) -> SparseMiDecomposition:
    mix = _check_mix(p, ch)
    px = sparse_input(gamma, mix, ch.num_inputs)

    outside = ch.no_input_row <= 0
    used = ch.matrix[1:][mix > 0]
    if gamma > 0 and np.any(used[:, outside] > 0):
        raise CovertExceptionSupportViolation(
            "a mixed input puts mass outside the support of the no-input row"
        )

    linear = gamma * float(mix @ row_divergences(ch.matrix))
    kl = float(mixture_divergence(gamma, mix, ch.matrix)[0])
    return SparseMiDecomposition(
        linear_term=linear, kl_term=kl, mi=mutual_information(px, ch)
    )


class KLSandwich(NamedTuple):
    lower: float
    upper: float


def kl_sandwich(gamma: float, p: ProbabilityLike, warden: Channel) -> KLSandwich:
    """
    (gamma^2/2) chi2(sum_k p_k Q_k || Q_0) (1 -/+ sqrt(gamma)).

    Only brackets D(Q_{gamma,p} || Q_0) for small gamma.
    """
    if not 0 < gamma <= 1:
        raise CovertExceptionOutOfRange(f"gamma={gamma} outside (0, 1]")

    mix = _check_mix(p, warden)
    chi2 = chi_squared(mix @ warden.matrix[1:], warden.no_input_row)
    center = gamma**2 / 2 * chi2
    return KLSandwich(
        lower=center * (1 - math.sqrt(gamma)), upper=center * (1 + math.sqrt(gamma))
    )


def detection_bounds(kl: float) -> float:
    """Pinsker: the warden's best error sum is at least 1 - sqrt(kl)."""
    if kl < 0:
        raise CovertExceptionOutOfRange(f"kl={kl} is negative")

    return max(0.0, 1 - math.sqrt(kl))


def detection_sum(tv: float) -> float:
    _check_unit_interval("tv", tv)
    return 1 - tv


def gamma_delta(delta: float) -> float:
    """sqrt(2) Q^-1((1 - delta) / 2), the normalization under a variational budget."""
    if not 0 < delta < 1:
        raise CovertExceptionOutOfRange(f"delta={delta} outside (0, 1)")

    return math.sqrt(2) * float(norm.isf((1 - delta) / 2))
