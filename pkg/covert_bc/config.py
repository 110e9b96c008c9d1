import json
from enum import Enum
from logging import getLogger
from os import getenv

from pydantic import BaseModel, Field, ValidationError

from covert_bc.constants import RunManifest
from covert_bc.exception import CovertException

logger = getLogger(__name__)


class LoggingLevel(Enum):
    CRITICAL = "CRITICAL"
    ERROR = "ERROR"
    WARNING = "WARNING"
    INFO = "INFO"
    DEBUG = "DEBUG"


class Logging(BaseModel):
    enable: bool = True
    level: LoggingLevel = LoggingLevel.INFO
    display_datetime: bool = False
    use_colors: bool = True


class SolverOptions(BaseModel):
    """
    Simplex maximization shared by the capacity and condition solvers.

    grid_step: lattice step per coordinate; coarsened automatically once the
        lattice would exceed max_grid_points
    starts: projected-gradient starts, grid incumbent included
    """

    grid_step: float = Field(default=1 / 200, gt=0, le=0.5)
    max_grid_points: int = 50_000
    starts: int = Field(default=8, ge=8)
    max_iterations: int = 500
    step_tolerance: float = 1e-12
    seed: int = 0
    workers: int = Field(default=1, ge=1)


class ConditionOptions(BaseModel):
    line_step: float = Field(default=1e-4, gt=0, le=0.1)
    golden_tolerance: float = 1e-12


class ConverseOptions(BaseModel):
    grid_points: int = Field(default=2048, ge=2)
    sweep_points: int = Field(default=101, ge=2)


class SimulationOptions(BaseModel):
    explicit_codebook_limit: int = Field(default=1024, ge=2)
    false_alarm: float = Field(default=0.05, gt=0, lt=1)
    rates_fraction: float = Field(default=0.3, gt=0, le=1)
    chunk_size: int = Field(default=500, ge=1)
    workers: int = Field(default=1, ge=1)


class Config(BaseModel):
    solver: SolverOptions = SolverOptions()
    condition: ConditionOptions = ConditionOptions()
    converse: ConverseOptions = ConverseOptions()
    simulation: SimulationOptions = SimulationOptions()

    logging: Logging = Logging()

    def update_from_manifest_and_env(self, manifest: RunManifest):
        """
        CLI Args > Environment Variable > Configuration File > Default Value
        """
        # logging
        if manifest.logging_level is not None:
            self.logging.level = LoggingLevel(manifest.logging_level.upper())
        else:
            logging_level = getenv("COVERT_BC_LOGGING_LEVEL")
            if logging_level:
                self.logging.level = LoggingLevel(logging_level.upper())

        # parallelism
        workers = getenv("COVERT_BC_WORKERS")
        if workers:
            self.solver.workers = int(workers)
            self.simulation.workers = int(workers)

        # solver
        grid_step = manifest.params.get("grid_step")
        if grid_step is not None and manifest.command.value != "map":
            self.solver.grid_step = min(grid_step, 0.5)

        self.solver.seed = manifest.seed

        rates_fraction = manifest.params.get("rates_fraction")
        if rates_fraction is not None:
            self.simulation.rates_fraction = rates_fraction


_config: Config | None = None


def get_config() -> Config:
    global _config

    if _config is None:
        raise CovertException("Please init config object first!")

    return _config


def init_config_object() -> Config:
    global _config
    if _config is None:
        _config = Config()

    return _config


def init_config_from_file(config_file: str) -> Config:
    global _config
    if _config is None:
        _config = Config()

    try:
        with open(config_file) as fp:
            _config = Config.model_validate_json(fp.read())

    except (FileNotFoundError, json.JSONDecodeError, ValidationError) as e:
        message = f"Load config value from file[{config_file}] failed!"
        logger.warning(message)
        logger.warning(e)
        return _config

    logger.info(f"Load config value from config file:{config_file}")
    return _config


def init_config_from_obj(obj: dict) -> Config:
    global _config
    if _config is None:
        _config = Config()

    logger.debug("Load config value from python object")
    _config = Config.model_validate(obj)

    return _config


def reset_config():
    global _config
    _config = None
