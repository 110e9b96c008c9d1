import math

import numpy as np
import pytest

from covert_bc.capacity import (
    covert_capacity_awgn,
    covert_capacity_binary,
    covert_capacity_bsc,
    covert_capacity_general,
    key_stream_capacity,
    tv_covert_throughput,
)
from covert_bc.channel import Channel
from covert_bc.config import SolverOptions
from covert_bc.exception import (
    CovertExceptionAbsoluteContinuityViolation,
    CovertExceptionDimensionMismatch,
    CovertExceptionOutOfRange,
    CovertExceptionRedundantNoInput,
)
from covert_bc.measures import chi_squared, gamma_delta, kl_divergence

WARDEN = Channel.bsc(0.3)


def test_binary_worked_pair():
    result = covert_capacity_binary(Channel.bsc(0.1), WARDEN)
    assert result.l_star == pytest.approx(2.847927, abs=1e-5)
    assert result.argmax_p.tolist() == [1.0]
    assert not result.zero_capacity
    assert not result.ill_conditioned

    data = result.as_dict(scale=1 / math.log(2))
    assert data["l_star"] == pytest.approx(result.l_star / math.log(2))


def test_bsc_closed_form():
    rng = np.random.default_rng(11)
    for _ in range(50):
        p = float(rng.uniform(0.01, 0.49))
        q0, q1 = rng.uniform(0.05, 0.95, size=2)
        warden = Channel.binary(float(q0), float(q1))
        if abs(q0 + q1 - 1) < 1e-3:
            continue

        expected = covert_capacity_binary(Channel.bsc(p), warden).l_star
        assert covert_capacity_bsc(p, warden) == pytest.approx(expected, rel=1e-9)

    with pytest.raises(CovertExceptionAbsoluteContinuityViolation):
        covert_capacity_bsc(0.0, WARDEN)
    with pytest.raises(CovertExceptionOutOfRange):
        covert_capacity_bsc(0.6, WARDEN)


def test_key_stream_capacity():
    # (1 - 2q) ln((1 - q)/q) sqrt(2 / chi2) for q = 0.3
    chi2 = chi_squared([0.3, 0.7], [0.7, 0.3])
    expected = 0.4 * math.log(7 / 3) * math.sqrt(2 / chi2)
    assert key_stream_capacity(WARDEN) == pytest.approx(expected, rel=1e-12)
    assert key_stream_capacity(WARDEN) == pytest.approx(0.549109, abs=1e-4)


def test_general_reduces_to_binary():
    # inputs 1 and 2 are copies, every mixture is the binary spec
    legit = Channel([[0.9, 0.1], [0.2, 0.8], [0.2, 0.8]])
    warden = Channel([[0.7, 0.3], [0.4, 0.6], [0.4, 0.6]])
    expected = covert_capacity_binary(
        Channel([[0.9, 0.1], [0.2, 0.8]]), Channel([[0.7, 0.3], [0.4, 0.6]])
    ).l_star

    result = covert_capacity_general(legit, warden)
    assert result.l_star == pytest.approx(expected, abs=1e-6)
    assert result.argmax_p.sum() == pytest.approx(1.0)


def test_general_beats_every_vertex():
    rng = np.random.default_rng(5)
    legit = Channel(rng.dirichlet(np.ones(3), size=4))
    warden = Channel(
        [[0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6], [0.4, 0.4, 0.2]]
    )

    result = covert_capacity_general(legit, warden, SolverOptions(grid_step=0.05))
    for k in range(1, 4):
        vertex = (
            math.sqrt(2)
            * kl_divergence(legit.matrix[k], legit.matrix[0])
            / math.sqrt(chi_squared(warden.matrix[k], warden.matrix[0]))
        )
        assert result.l_star >= vertex - 1e-9


def test_zero_capacity():
    constant = Channel([[0.6, 0.4], [0.6, 0.4]])
    result = covert_capacity_binary(constant, WARDEN)
    assert result.l_star == 0
    assert result.zero_capacity

    result = covert_capacity_general(
        Channel([[0.6, 0.4]] * 3), Channel(WARDEN.matrix[[0, 1, 1]])
    )
    assert result.zero_capacity
    assert result.l_star == 0


def test_warden_errors():
    with pytest.raises(CovertExceptionAbsoluteContinuityViolation):
        covert_capacity_binary(Channel.bsc(0.1), Channel([[1.0, 0.0], [0.5, 0.5]]))
    with pytest.raises(CovertExceptionRedundantNoInput):
        covert_capacity_general(
            Channel([[0.9, 0.1], [0.2, 0.8], [0.3, 0.7]]),
            Channel([[0.4, 0.6], [0.6, 0.4], [0.2, 0.8]]),
        )
    with pytest.raises(CovertExceptionDimensionMismatch):
        covert_capacity_general(Channel.bsc(0.1), Channel(np.full((3, 2), 0.5)))


def test_awgn_and_tv():
    assert covert_capacity_awgn(2.0, 1.5) == 0.75
    with pytest.raises(CovertExceptionOutOfRange):
        covert_capacity_awgn(0.0, 1.0)

    assert tv_covert_throughput(2.0, 0.1) == pytest.approx(gamma_delta(0.1) * 2.0)
