import numpy as np
import pytest

from covert_bc.channel import BroadcastSpec, Channel
from covert_bc.condition import (
    check_condition,
    check_condition_binary,
    condition_map,
    divergence_ratio,
    information_ratio,
    vertex_limits,
)
from covert_bc.config import ConditionOptions, SolverOptions
from covert_bc.constants import MapCell
from covert_bc.exception import (
    CovertExceptionDegenerateDenominator,
    CovertExceptionDimensionMismatch,
    CovertExceptionOutOfRange,
    CovertExceptionPrecondition,
)
from covert_bc.measures import chi_squared, mutual_information

WARDEN = Channel.bsc(0.3)
# chi2(V_1||V_0) is large next to D(V_1||V_0), the condition fails near gamma = 0
SKEWED = Channel([[0.99, 0.01], [0.5, 0.5]])


def test_bsc_pairs_satisfy_condition():
    crossovers = np.round(np.arange(0.05, 0.46, 0.05), 2)
    for p1 in crossovers:
        for p2 in crossovers:
            spec = BroadcastSpec(Channel.bsc(p1), Channel.bsc(p2), WARDEN)
            verdict = check_condition_binary(spec)
            assert verdict.satisfied, (p1, p2, verdict.as_dict())
            assert verdict.dominant_receiver == (1 if p1 <= p2 else 2)


def test_bsc_pair_verdict_details():
    spec = BroadcastSpec(Channel.bsc(0.1), Channel.bsc(0.2), WARDEN)
    verdict = check_condition_binary(spec)

    l1, l2 = verdict.l_stars
    assert verdict.threshold == pytest.approx(l1 / l2)
    assert verdict.worst_ratio == pytest.approx(verdict.threshold, abs=1e-9)
    assert verdict.on_boundary
    assert verdict.min_divergence_ratio >= verdict.threshold * (1 - 1e-7)
    assert verdict.witness_px.probs.sum() == pytest.approx(1.0)


def test_general_check_agrees_on_bsc_pair():
    spec = BroadcastSpec(Channel.bsc(0.1), Channel.bsc(0.2), WARDEN)
    verdict = check_condition(spec, SolverOptions(grid_step=0.01))
    assert verdict.satisfied
    assert verdict.worst_ratio == pytest.approx(verdict.threshold, abs=1e-6)


def test_violated_condition():
    spec = BroadcastSpec(Channel.bsc(0.1), SKEWED, WARDEN)

    verdict = check_condition_binary(spec)
    assert not verdict.satisfied
    assert verdict.dominant_receiver == 1
    assert verdict.worst_ratio > verdict.threshold
    assert verdict.min_divergence_ratio < verdict.threshold

    verdict = check_condition(spec)
    assert not verdict.satisfied
    assert verdict.worst_ratio > verdict.threshold


def test_identical_receivers():
    spec = BroadcastSpec(Channel.bsc(0.2), Channel.bsc(0.2), WARDEN)
    verdict = check_condition_binary(spec)
    assert verdict.satisfied
    assert verdict.threshold == 1.0
    assert verdict.worst_ratio == pytest.approx(1.0)


def test_vertex_limits():
    strong = Channel.bsc(0.1).matrix
    weak = SKEWED.matrix
    value, witness = vertex_limits(strong, weak)
    # near e_1 along e_0: D(S_0||S_1) / D(T_0||T_1)
    expected = 0.8 * np.log(9) / (0.99 * np.log(1.98) + 0.01 * np.log(0.02))
    assert value == pytest.approx(expected)
    assert witness[1] > 0.99


def test_condition_errors():
    constant = Channel([[0.6, 0.4], [0.6, 0.4]])
    with pytest.raises(CovertExceptionDegenerateDenominator):
        check_condition_binary(BroadcastSpec(Channel.bsc(0.1), constant, WARDEN))
    with pytest.raises(CovertExceptionPrecondition):
        check_condition_binary(BroadcastSpec(constant, constant, WARDEN))

    three = Channel([[0.8, 0.2], [0.2, 0.8], [0.5, 0.5]])
    warden = Channel([[0.7, 0.3], [0.3, 0.7], [0.2, 0.8]])
    with pytest.raises(CovertExceptionDimensionMismatch):
        check_condition_binary(BroadcastSpec(three, three, warden))


def test_multi_input_condition():
    w = Channel([[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]])
    warden = Channel([[0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6]])
    verdict = check_condition(BroadcastSpec(w, w, warden))
    assert verdict.satisfied
    assert verdict.threshold == pytest.approx(1.0)


def test_condition_map():
    result = condition_map(
        Channel.bsc(0.2),
        0.1,
        WARDEN,
        condition_options=ConditionOptions(line_step=1e-3),
    )
    assert result.q_values.size == 11
    assert len(list(result.rows())) == 121

    for i in range(11):
        assert result.cell(i, i) in (MapCell.SATISFIED, MapCell.DEGENERATE)

    # V = [[0.9, 0.1], [0.5, 0.5]]
    assert result.cell(1, 5) == MapCell.VIOLATED
    assert result.cell(0, 3) == MapCell.DEGENERATE
    assert result.cell(5, 5) == MapCell.DEGENERATE
    assert result.count(MapCell.SATISFIED) > 0

    with pytest.raises(CovertExceptionOutOfRange):
        condition_map(Channel.bsc(0.2), 0.5, WARDEN)


def _random_binary_channel(rng: np.random.Generator) -> Channel:
    first, second = rng.uniform(0.05, 0.95, size=2)
    return Channel([[first, 1 - first], [second, 1 - second]])


def test_binary_check_near_vertices():
    spec = BroadcastSpec(Channel.bsc(0.1), Channel.bsc(0.2), WARDEN)
    verdict = check_condition_binary(spec)
    assert verdict.satisfied
    # both limits of a BSC pair sit on the threshold
    s, t = Channel.bsc(0.1).matrix, Channel.bsc(0.2).matrix
    limits = information_ratio([0.0, 1.0], s, t)
    assert limits == pytest.approx([verdict.threshold] * 2, rel=1e-12)

    inner = information_ratio(np.geomspace(1e-8, 1e-2, 13), s, t)
    assert np.all(inner <= verdict.threshold * (1 + 1e-9))
    inner = information_ratio(1 - np.geomspace(1e-8, 1e-2, 13), s, t)
    assert np.all(inner <= verdict.threshold * (1 + 1e-9))


def test_information_ratio_matches_mutual_information():
    s, t = Channel.bsc(0.1), SKEWED
    for gamma in (0.01, 0.3, 0.9):
        px = [1 - gamma, gamma]
        expected = mutual_information(px, s) / mutual_information(px, t)
        assert information_ratio(gamma, s.matrix, t.matrix)[0] == pytest.approx(
            expected, rel=1e-12
        )


def test_divergence_ratio_limit_at_zero():
    rng = np.random.default_rng(5)
    pairs = [(Channel.bsc(0.1), SKEWED), (Channel.bsc(0.1), Channel.bsc(0.2))]
    for _ in range(8):
        pairs.append((_random_binary_channel(rng), _random_binary_channel(rng)))
    for strong, weak in pairs:
        s, t = strong.matrix, weak.matrix
        limit = chi_squared(s[1], s[0]) / chi_squared(t[1], t[0])
        assert divergence_ratio(0.0, s, t)[0] == pytest.approx(limit, rel=1e-12)
        assert divergence_ratio(1e-6, s, t)[0] == pytest.approx(limit, rel=1e-2)


def test_verdict_under_receiver_swap():
    pairs = [
        (Channel.bsc(0.1), Channel.bsc(0.2)),
        (Channel.bsc(0.1), SKEWED),
        (Channel.bsc(0.35), Channel([[0.8, 0.2], [0.3, 0.7]])),
    ]
    for w, v in pairs:
        verdict = check_condition_binary(BroadcastSpec(w, v, WARDEN))
        swapped = check_condition_binary(BroadcastSpec(v, w, WARDEN))
        assert swapped.satisfied == verdict.satisfied
        assert swapped.dominant_receiver == 3 - verdict.dominant_receiver
        assert swapped.threshold == pytest.approx(verdict.threshold)
        assert swapped.worst_ratio == pytest.approx(verdict.worst_ratio)
        assert swapped.l_stars == pytest.approx(verdict.l_stars[::-1])


def test_binary_and_general_checks_agree():
    rng = np.random.default_rng(2024)
    options = SolverOptions(grid_step=0.01, max_iterations=100)
    for _ in range(200):
        q0 = rng.uniform(0.1, 0.9)
        q1 = rng.uniform(0.1, 0.9)
        while abs(q1 - q0) < 0.05:
            q1 = rng.uniform(0.1, 0.9)
        warden = Channel([[q0, 1 - q0], [q1, 1 - q1]])
        spec = BroadcastSpec(
            _random_binary_channel(rng), _random_binary_channel(rng), warden
        )

        binary = check_condition_binary(spec)
        general = check_condition(spec, options)
        assert general.satisfied == binary.satisfied, binary.as_dict()
        assert general.dominant_receiver == binary.dominant_receiver
        assert general.worst_ratio == pytest.approx(binary.worst_ratio, rel=1e-4)


@pytest.mark.parametrize("crossover", [0.01, 0.2])
def test_condition_map_fine_grid(crossover):
    result = condition_map(
        Channel.bsc(crossover),
        0.02,
        WARDEN,
        condition_options=ConditionOptions(line_step=1e-3),
    )
    assert result.q_values.size == 51

    # noiseless corners break V_1 << V_0, the center is a constant channel
    for i in (0, 25, 50):
        assert result.cell(i, i) == MapCell.DEGENERATE
    for i in set(range(51)) - {0, 25, 50}:
        assert result.cell(i, i) == MapCell.SATISFIED, result.q_values[i]

    # V = [[0.9, 0.1], [0.5, 0.5]] has D(V_0||V_1) < D(V_1||V_0)
    assert result.cell(5, 25) == MapCell.VIOLATED
    assert result.count(MapCell.SATISFIED) > 0
    assert result.count(MapCell.VIOLATED) > 0
