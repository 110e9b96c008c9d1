import math

import numpy as np
import pytest

from covert_bc.capacity import covert_capacity_bsc
from covert_bc.channel import BroadcastSpec, Channel
from covert_bc.converse import (
    bsc_converse_region,
    converse_sweep,
    epi_check,
    exact_weight,
    gaussian_converse_region,
    lambda_sum_bound,
    max_weight,
    max_weight_gaussian,
    mrs_gerber_check,
    mrs_gerber_mixture,
    taylor_check,
    upper_concave_envelope,
)
from covert_bc.exception import (
    CovertExceptionDimensionMismatch,
    CovertExceptionOutOfRange,
    CovertExceptionPrecondition,
    CovertExceptionTooFewSamples,
)
from covert_bc.measures import binary_entropy

WARDEN = Channel.bsc(0.3)
SPEC = BroadcastSpec(Channel.bsc(0.1), Channel.bsc(0.2), WARDEN)


def test_max_weight():
    budget = max_weight(1.0, 10_000, WARDEN)
    assert budget.alpha_bar == pytest.approx(0.0162019, abs=1e-7)
    assert budget.mix_p.tolist() == [1.0]
    assert budget.alpha_bar < budget.alpha_max
    assert not budget.gaussian

    assert max_weight(0.0, 10_000, WARDEN).alpha_max == 0

    with pytest.raises(CovertExceptionOutOfRange):
        max_weight(-1.0, 10_000, WARDEN)
    with pytest.raises(CovertExceptionOutOfRange):
        max_weight(1.0, 0, WARDEN)
    with pytest.raises(CovertExceptionDimensionMismatch):
        max_weight(1.0, 100, WARDEN, mix_p=[0.5, 0.5])


def test_max_weight_gaussian():
    budget = max_weight_gaussian(1.0, 10_000, 1.0)
    assert budget.alpha_bar == pytest.approx(0.02)
    assert budget.alpha_max == budget.alpha_bar
    assert budget.gaussian

    with pytest.raises(CovertExceptionOutOfRange):
        max_weight_gaussian(1.0, 100, 0.0)


def test_exact_weight():
    assert exact_weight(0.0) == 0
    for alpha_bar in (1e-4, 1e-2, 0.1):
        alpha = exact_weight(alpha_bar)
        assert alpha_bar < alpha < alpha_bar * (1 + math.sqrt(alpha_bar))
        assert alpha**2 * (1 - math.sqrt(alpha)) == pytest.approx(alpha_bar**2)

    # past the peak of alpha^2 (1 - sqrt(alpha)) there is no root
    assert exact_weight(0.3) == 0.3


def test_upper_concave_envelope():
    xs = np.linspace(0, 1, 11)
    envelope = upper_concave_envelope(np.column_stack([xs, -(xs**2)]))
    assert envelope(xs) == pytest.approx(-(xs**2))
    assert np.all(np.diff(envelope.slopes) < 0)

    envelope = upper_concave_envelope([(0, 0), (1, -1), (2, 0)])
    assert envelope(1.0) == 0
    assert envelope.knots == [(0.0, 0.0), (2.0, 0.0)]
    assert envelope.maximum == 0

    envelope = upper_concave_envelope([(2, 1), (0, 0), (1, 3)])
    assert envelope(0.5) == pytest.approx(1.5)

    with pytest.raises(CovertExceptionTooFewSamples):
        upper_concave_envelope([(0, 0)])
    with pytest.raises(CovertExceptionOutOfRange):
        upper_concave_envelope([(0, 0), (0, 1)])


def test_lambda_sum_bound_approaches_capacity():
    l1 = covert_capacity_bsc(0.1, WARDEN)
    bounds = converse_sweep(SPEC, 1.0, [10_000, 1_000_000, 100_000_000])

    normalized = [bound.normalized for bound in bounds]
    assert normalized[0] > normalized[1] > normalized[2]
    assert normalized[2] == pytest.approx(l1, rel=0.05)
    assert normalized[2] >= l1 * (1 - 1e-3)

    for bound in bounds:
        assert bound.dominant_receiver == 1
        assert bound.envelope_max <= 1e-9
        assert bound.lambda_ == pytest.approx(l1 / covert_capacity_bsc(0.2, WARDEN))

    row = bounds[0].as_row(scale=1 / math.log(2))
    assert row["n"] == 10_000
    assert row["normalized"] == pytest.approx(bounds[0].normalized / math.log(2))


def test_lambda_sum_bound_edge_cases():
    bound = lambda_sum_bound(SPEC, max_weight(0.0, 10_000, WARDEN))
    assert bound.bound_nats == 0
    assert bound.normalized == 0

    violated = BroadcastSpec(
        Channel.bsc(0.1), Channel([[0.99, 0.01], [0.5, 0.5]]), WARDEN
    )
    with pytest.raises(CovertExceptionPrecondition):
        lambda_sum_bound(violated, max_weight(1.0, 10_000, WARDEN))


def test_bsc_converse_region():
    budget = max_weight(1.0, 10_000, WARDEN)
    region = bsc_converse_region(0.1, 0.2, budget, points=11)

    normalized = region.normalized()
    assert normalized.shape == (11, 2)
    assert normalized[0] == pytest.approx([0.0, covert_capacity_bsc(0.2, WARDEN)])
    assert normalized[-1] == pytest.approx([covert_capacity_bsc(0.1, WARDEN), 0.0])
    assert len(region.pairs()) == 11

    with pytest.raises(CovertExceptionOutOfRange):
        bsc_converse_region(0.3, 0.2, budget)
    with pytest.raises(CovertExceptionOutOfRange):
        bsc_converse_region(0.1, 0.2, max_weight_gaussian(1.0, 100, 1.0))


def test_gaussian_converse_region():
    budget = max_weight_gaussian(1.0, 10_000, 1.0)
    normalized = gaussian_converse_region(1.0, 2.0, 1.0, budget, points=5).normalized()
    assert normalized[0] == pytest.approx([0.0, 0.5])
    assert normalized[-1] == pytest.approx([1.0, 0.0])

    with pytest.raises(CovertExceptionOutOfRange):
        gaussian_converse_region(2.0, 1.0, 1.0, budget)


def test_mrs_gerber():
    lhs, h = mrs_gerber_check(binary_entropy(0.2), 0.1)
    assert lhs == pytest.approx(binary_entropy(0.26))
    assert lhs >= h

    lhs, noisy = mrs_gerber_mixture([1.0], [0.2], 0.1)
    assert lhs == pytest.approx(noisy)

    lhs, noisy = mrs_gerber_mixture([0.3, 0.7], [0.05, 0.4], 0.1)
    assert lhs <= noisy + 1e-12

    with pytest.raises(CovertExceptionOutOfRange):
        mrs_gerber_check(0.5, 0.7)


def test_mrs_gerber_random_mixtures():
    rng = np.random.default_rng(17)
    for _ in range(200):
        size = int(rng.integers(2, 6))
        u_probs = rng.dirichlet(np.ones(size))
        biases = rng.uniform(0, 1, size=size)
        p = float(rng.uniform(0, 0.5))
        lhs, noisy = mrs_gerber_mixture(u_probs, biases, p)
        assert lhs <= noisy + 1e-9, (u_probs, biases, p)


def test_taylor_check():
    for q in (0.05, 0.1, 0.3):
        for xi in np.linspace(0, 1, 11):
            remainder, bound = taylor_check(q, float(xi))
            assert remainder <= bound + 1e-12

    assert taylor_check(0.2, 0.0) == (0.0, 0.0)

    with pytest.raises(CovertExceptionOutOfRange):
        taylor_check(0.5, 0.1)
    with pytest.raises(CovertExceptionOutOfRange):
        taylor_check(0.2, 1.5)


def test_epi_check():
    lhs, rhs = epi_check([1.0], [0.0], [[1.0]], 1.0, 2.0)
    assert lhs == pytest.approx(rhs, rel=1e-4)

    lhs, rhs = epi_check([0.5, 0.5], [-1.0, 1.0], [[0.5, 0.5], [0.9, 0.1]], 1.0, 2.0)
    assert lhs >= rhs * (1 - 1e-3)

    with pytest.raises(CovertExceptionDimensionMismatch):
        epi_check([1.0], [0.0, 1.0], [[1.0]], 1.0, 2.0)
    with pytest.raises(CovertExceptionOutOfRange):
        epi_check([1.0], [0.0], [[1.0]], 2.0, 1.0)
