import json

import pytest

from covert_bc.channel import BroadcastSpec, GaussianBroadcastSpec
from covert_bc.exception import (
    CovertExceptionDimensionMismatch,
    CovertExceptionNonStochasticRow,
    CovertExceptionParseError,
)
from covert_bc.spec_file import load_spec, parse_spec_text

SPEC = {
    "w": [[0.9, 0.1], [0.1, 0.9]],
    "v": [[0.8, 0.2], [0.2, 0.8]],
    "warden": [[0.7, 0.3], [0.3, 0.7]],
}


def test_parse_channel_spec():
    spec = parse_spec_text(json.dumps(SPEC))
    assert isinstance(spec, BroadcastSpec)
    assert spec.is_binary
    assert spec.warden.no_input_row.tolist() == [0.7, 0.3]

    spec = parse_spec_text(json.dumps(dict(SPEC, inputs=2)))
    assert spec.num_inputs == 2


def test_parse_gaussian_spec():
    spec = parse_spec_text('{"n1": 1.0, "n2": 2.0, "sigma2": 1.5}')
    assert isinstance(spec, GaussianBroadcastSpec)
    assert spec.n2 == 2.0

    with pytest.raises(CovertExceptionParseError):
        parse_spec_text('{"n1": 1.0, "n2": 2.0, "sigma2": -1}')


def test_parse_errors():
    for text in ("{not json", "[1, 2]", '{"w": [[1.0]]}'):
        with pytest.raises(CovertExceptionParseError):
            parse_spec_text(text)

    with pytest.raises(CovertExceptionDimensionMismatch):
        parse_spec_text(json.dumps(dict(SPEC, inputs=3)))
    with pytest.raises(CovertExceptionNonStochasticRow):
        parse_spec_text(json.dumps(dict(SPEC, v=[[0.8, 0.3], [0.2, 0.8]])))


def test_load_spec(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(SPEC))
    assert load_spec(path).num_inputs == 2

    with pytest.raises(CovertExceptionParseError):
        load_spec(tmp_path / "missing.json")
