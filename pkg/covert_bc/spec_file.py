"""
JSON spec files.

Discrete broadcast channel:
    {"w": [[...], ...], "v": [[...], ...], "warden": [[...], ...]}
Row 0 of every matrix is the no-input symbol. An optional "inputs" gives the
alphabet size and is checked against the matrices.

Gaussian broadcast channel:
    {"n1": 1.0, "n2": 2.0, "sigma2": 1.5}
"""

import json
from logging import getLogger
from pathlib import Path

from pydantic import BaseModel, Field, ValidationError

from covert_bc.channel import BroadcastSpec, GaussianBroadcastSpec, build_broadcast_spec
from covert_bc.exception import (
    CovertExceptionDimensionMismatch,
    CovertExceptionParseError,
)

logger = getLogger(__name__)


class ChannelSpecFile(BaseModel):
    inputs: int | None = Field(default=None, ge=2)
    w: list[list[float]]
    v: list[list[float]]
    warden: list[list[float]]

    def to_spec(self) -> BroadcastSpec:
        if self.inputs is not None:
            for name, matrix in (("w", self.w), ("v", self.v), ("warden", self.warden)):
                if len(matrix) != self.inputs:
                    raise CovertExceptionDimensionMismatch(
                        f"{name} has {len(matrix)} rows, inputs={self.inputs}"
                    )

        return build_broadcast_spec(self.w, self.v, self.warden)


class GaussianSpecFile(BaseModel):
    n1: float = Field(gt=0)
    n2: float = Field(gt=0)
    sigma2: float = Field(gt=0)

    def to_spec(self) -> GaussianBroadcastSpec:
        return GaussianBroadcastSpec(n1=self.n1, n2=self.n2, sigma2=self.sigma2)


def parse_spec_text(text: str) -> BroadcastSpec | GaussianBroadcastSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise CovertExceptionParseError(f"spec file is not valid JSON: {e}")

    if not isinstance(data, dict):
        raise CovertExceptionParseError("spec file must hold a JSON object")

    model = GaussianSpecFile if "sigma2" in data else ChannelSpecFile
    try:
        parsed = model.model_validate(data)
    except ValidationError as e:
        raise CovertExceptionParseError(
            f"invalid {model.__name__}: {e.error_count()} error(s)\n{e}"
        )

    return parsed.to_spec()


def load_spec(path: str | Path) -> BroadcastSpec | GaussianBroadcastSpec:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise CovertExceptionParseError(f"cannot read spec file {path}: {e}")

    logger.debug(f"Load spec file: {path}")
    return parse_spec_text(text)
