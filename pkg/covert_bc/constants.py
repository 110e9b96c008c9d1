import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

# input sanitation vs numerical identities
STOCHASTIC_TOLERANCE = 1e-9
IDENTITY_TOLERANCE = 1e-12

REDUNDANCY_RESIDUAL = 1e-18
CHI2_EXCLUDE = 1e-15
CHI2_ILL_CONDITIONED = 1e-9
# relative to the threshold
CONDITION_TIE = 1e-7
ENVELOPE_TOLERANCE = 1e-9
REGION_TOLERANCE = 1e-12

NATS_PER_BIT = math.log(2)

SIDECAR_SUFFIX = ".sidecar.json"

DEFAULT_N_LIST = (10_000, 1_000_000, 100_000_000)
DEFAULT_SWEEP_N_LIST = (2_500, 10_000, 40_000)

TOOL_NAME = "covert-bc"


class Command(Enum):
    CAPACITY = "capacity"
    CONDITION = "condition"
    MAP = "map"
    REGION = "region"
    CONVERSE = "converse"
    KEYS = "keys"
    SIMULATE = "simulate"
    SWEEP = "sweep"


class Units(Enum):
    NATS = "nats_per_sqrt_use"
    BITS = "bits_per_sqrt_use"

    @property
    def scale(self) -> float:
        if self == Units.BITS:
            return 1 / NATS_PER_BIT

        return 1.0


class MapCell(Enum):
    SATISFIED = "satisfied"
    VIOLATED = "violated"
    DEGENERATE = "degenerate"


@dataclass
class RunManifest:
    command: Command
    input_path: str | None = None
    output_path: str | None = None
    params: dict[str, Any] = field(default_factory=dict)

    config_file: str | None = None
    logging_level: str | None = None

    @property
    def seed(self) -> int:
        return int(self.params.get("seed", 0))

    @property
    def units(self) -> Units:
        return Units.BITS if self.params.get("bits") else Units.NATS

    @property
    def sidecar_path(self) -> str:
        return f"{self.output_path}{SIDECAR_SUFFIX}"

    def as_dict(self) -> dict[str, Any]:
        return {
            "command": self.command.value,
            "spec_path": self.input_path,
            "output_path": self.output_path,
            "params": dict(sorted(self.params.items())),
        }
