import json
import logging.config
import sys
from collections.abc import Callable
from logging import getLogger
from pathlib import Path

from covert_bc import __version__
from covert_bc.capacity import (
    covert_capacity_awgn,
    covert_capacity_general,
    key_stream_capacity,
)
from covert_bc.channel import BroadcastSpec, GaussianBroadcastSpec
from covert_bc.condition import check_condition, check_condition_binary, condition_map
from covert_bc.config import (
    Config,
    get_config,
    init_config_from_file,
    init_config_from_obj,
    init_config_object,
    reset_config,
)
from covert_bc.constants import (
    DEFAULT_N_LIST,
    DEFAULT_SWEEP_N_LIST,
    TOOL_NAME,
    Command,
    RunManifest,
)
from covert_bc.converse import converse_sweep, max_weight_gaussian
from covert_bc.exception import (
    EXIT_CODE_NUMERIC,
    CovertException,
    CovertExceptionParseError,
    CovertExceptionPrecondition,
)
from covert_bc.helpers import (
    dump_json,
    failing_operation,
    parse_n_list,
    scale_columns,
    write_csv,
    write_json,
)
from covert_bc.log import clear_run_messages, get_logging_config, get_run_messages
from covert_bc.region import RegionSpec, boundary_rows, key_rate_boundary
from covert_bc.simulator import SimConfig, run, sweep
from covert_bc.spec_file import load_spec

logger = getLogger(__name__)

AnySpec = BroadcastSpec | GaussianBroadcastSpec


def _discrete(spec: AnySpec, command: Command) -> BroadcastSpec:
    if not isinstance(spec, BroadcastSpec):
        raise CovertExceptionPrecondition(
            f"'{command.value}' needs a discrete broadcast channel spec"
        )

    return spec


def _capacities(spec: AnySpec, config: Config) -> tuple[float, float, float]:
    """(L_1*, L_2*, L_Z*) in nats"""
    if isinstance(spec, GaussianBroadcastSpec):
        return (
            covert_capacity_awgn(spec.n1, spec.sigma2),
            covert_capacity_awgn(spec.n2, spec.sigma2),
            covert_capacity_awgn(spec.sigma2, spec.sigma2),
        )

    return (
        covert_capacity_general(spec.w, spec.warden, config.solver).l_star,
        covert_capacity_general(spec.v, spec.warden, config.solver).l_star,
        key_stream_capacity(spec.warden, config.solver),
    )


def _run_capacity(manifest: RunManifest, spec: AnySpec, config: Config):
    scale = manifest.units.scale
    if isinstance(spec, GaussianBroadcastSpec):
        l1, l2, l_z = _capacities(spec, config)
        payload = {
            "l_star": [l1 * scale, l2 * scale],
            "argmax_p": [[1.0], [1.0]],
            "zero_capacity": [False, False],
        }
    else:
        results = [
            covert_capacity_general(spec.legit(j), spec.warden, config.solver)
            for j in (1, 2)
        ]
        l_z = key_stream_capacity(spec.warden, config.solver)
        payload = {
            "l_star": [r.l_star * scale for r in results],
            "argmax_p": [r.argmax_p for r in results],
            "zero_capacity": [r.zero_capacity for r in results],
            "ill_conditioned": [r.ill_conditioned for r in results],
        }

    payload["l_z_star"] = l_z * scale
    payload["units"] = manifest.units
    write_json(manifest.output_path, payload)


def _scaled_verdict(verdict, scale: float) -> dict:
    data = verdict.as_dict()
    data["l_stars"] = [v * scale for v in data["l_stars"]]
    return data


def _run_condition(manifest: RunManifest, spec: AnySpec, config: Config):
    spec = _discrete(spec, manifest.command)
    scale = manifest.units.scale
    payload = {"general": _scaled_verdict(check_condition(spec, config.solver), scale)}
    if spec.is_binary:
        payload["binary"] = _scaled_verdict(
            check_condition_binary(spec, config.condition), scale
        )

    payload["units"] = manifest.units
    write_json(manifest.output_path, payload)


def _run_map(manifest: RunManifest, spec: AnySpec, config: Config):
    spec = _discrete(spec, manifest.command)
    result = condition_map(
        spec.w,
        manifest.params.get("grid_step", 0.02),
        spec.warden,
        workers=config.solver.workers,
        condition_options=config.condition,
    )
    rows = ({"q0": q0, "q1": q1, "verdict": cell} for q0, q1, cell in result.rows())
    write_csv(manifest.output_path, rows, ["q0", "q1", "verdict"])


def _run_region(manifest: RunManifest, spec: AnySpec, config: Config):
    l1, l2, _ = _capacities(spec, config)
    rows = boundary_rows(RegionSpec((l1, l2)), manifest.params.get("resolution", 101))
    write_csv(
        manifest.output_path,
        scale_columns(rows, ["L_1", "L_2"], manifest.units.scale),
        ["share_1", "share_2", "L_1", "L_2"],
    )


def _run_converse(manifest: RunManifest, spec: AnySpec, config: Config):
    scale = manifest.units.scale
    delta = manifest.params.get("delta", 1.0)
    n_list = parse_n_list(manifest.params.get("n_list", DEFAULT_N_LIST))
    if isinstance(spec, GaussianBroadcastSpec):
        # the first-order frontier is a line, its lambda-sum is attained at tau = alpha
        rows = []
        for n in n_list:
            budget = max_weight_gaussian(delta, n, spec.sigma2)
            rows.append(
                {
                    "n": n,
                    "lambda": spec.n2 / spec.n1,
                    "bound_nats": budget.alpha_bar / (2 * spec.n1) * scale,
                    "normalized": covert_capacity_awgn(spec.n1, spec.sigma2) * scale,
                }
            )
    else:
        bounds = converse_sweep(
            spec, delta, n_list, options=config.converse, solver=config.solver
        )
        rows = [bound.as_row(scale) for bound in bounds]

    write_csv(manifest.output_path, rows, ["n", "lambda", "bound_nats", "normalized"])


def _run_keys(manifest: RunManifest, spec: AnySpec, config: Config):
    l1, l2, l_z = _capacities(spec, config)
    rows = key_rate_boundary(
        RegionSpec((l1, l2)), l_z, manifest.params.get("resolution", 101)
    )
    write_csv(
        manifest.output_path,
        scale_columns(rows, ["L_1", "L_2", "min_key_rate"], manifest.units.scale),
        ["share_1", "share_2", "L_1", "L_2", "min_key_rate"],
    )


def _sim_config(manifest: RunManifest, spec: AnySpec, config: Config) -> SimConfig:
    params = manifest.params
    return SimConfig(
        spec=_discrete(spec, manifest.command),
        n=params.get("n", 10_000),
        delta=params.get("delta", 1.0),
        rho=params.get("rho", 0.5),
        rates_fraction=config.simulation.rates_fraction,
        trials=params.get("trials", 1000),
        seed=manifest.seed,
        options=config.simulation,
        solver=config.solver,
    )


def _run_simulate(manifest: RunManifest, spec: AnySpec, config: Config):
    report = run(_sim_config(manifest, spec, config))
    write_json(manifest.output_path, report.as_dict())


def _run_sweep(manifest: RunManifest, spec: AnySpec, config: Config):
    n_list = parse_n_list(manifest.params.get("n_list", DEFAULT_SWEEP_N_LIST))
    rows = [row.as_dict() for row in sweep(_sim_config(manifest, spec, config), n_list)]
    write_csv(
        manifest.output_path,
        scale_columns(rows, ["normalized_sum"], manifest.units.scale),
        ["n", "log_m_sum", "normalized_sum", "normalized_share_sum", "error", "kl"],
    )


_HANDLERS: dict[Command, Callable[[RunManifest, AnySpec, Config], None]] = {
    Command.CAPACITY: _run_capacity,
    Command.CONDITION: _run_condition,
    Command.MAP: _run_map,
    Command.REGION: _run_region,
    Command.CONVERSE: _run_converse,
    Command.KEYS: _run_keys,
    Command.SIMULATE: _run_simulate,
    Command.SWEEP: _run_sweep,
}


def init_run(manifest: RunManifest, config_obj: dict | None = None) -> Config:
    """Config and logging for one run."""
    reset_config()
    try:
        if manifest.config_file is not None:
            init_config_from_file(manifest.config_file)
        elif config_obj is not None:
            init_config_from_obj(config_obj)
        else:
            init_config_object()

        config = get_config()
        config.update_from_manifest_and_env(manifest)

    except ValueError as e:
        raise CovertExceptionParseError(f"invalid configuration: {e}") from e

    if config.logging.enable:
        logging.config.dictConfig(get_logging_config(config=config))
        logger.debug(config.model_dump())

    clear_run_messages()
    return config


def sidecar(manifest: RunManifest, config: Config) -> dict:
    data = {"tool": TOOL_NAME, "version": __version__}
    data.update(manifest.as_dict())
    data.update(
        {
            "seed": manifest.seed,
            "units": manifest.units,
            "config": config.model_dump(mode="json", exclude={"logging"}),
            "messages": get_run_messages(),
        }
    )
    return data


def error_record(exc: BaseException, exit_code: int) -> dict:
    module, operation = failing_operation(exc)
    return {
        "error": type(exc).__name__,
        "message": str(exc),
        "module": module,
        "operation": operation,
        "exit_code": exit_code,
    }


def _report_error(exc: BaseException, exit_code: int) -> int:
    sys.stderr.write(dump_json(error_record(exc, exit_code)))
    return exit_code


def dispatch(manifest: RunManifest, config_obj: dict | None = None) -> int:
    """Run one command, write its results file and sidecar; returns the exit code."""
    try:
        config = init_run(manifest, config_obj)
        if manifest.input_path is None or manifest.output_path is None:
            raise CovertExceptionParseError("--spec and --out are required")

        spec = load_spec(manifest.input_path)
        logger.info(f"Running '{manifest.command.value}' on {manifest.input_path}")
        _HANDLERS[manifest.command](manifest, spec, config)

    except CovertException as e:
        return _report_error(e, e.exit_code)

    except (ArithmeticError, FloatingPointError) as e:
        return _report_error(e, EXIT_CODE_NUMERIC)

    write_json(manifest.sidecar_path, sidecar(manifest, config))
    logger.info(f"Results written to {manifest.output_path}")
    return 0


def load_sidecar(sidecar_path: str | Path) -> tuple[RunManifest, dict | None]:
    """The recorded manifest and the effective config of the run, if recorded."""
    try:
        data = json.loads(Path(sidecar_path).read_text())
        manifest = RunManifest(
            command=Command(data["command"]),
            input_path=data["spec_path"],
            output_path=data["output_path"],
            params=dict(data["params"]),
        )
        config_obj = data.get("config")
        if config_obj is not None and not isinstance(config_obj, dict):
            raise TypeError("'config' must be an object")

        return manifest, config_obj

    except (OSError, ValueError, KeyError, TypeError) as e:
        raise CovertExceptionParseError(f"cannot replay sidecar {sidecar_path}: {e}")


def replay(sidecar_path: str | Path, logging_level: str | None = None) -> int:
    try:
        manifest, config_obj = load_sidecar(sidecar_path)
    except CovertExceptionParseError as e:
        return _report_error(e, e.exit_code)

    manifest.logging_level = logging_level
    return dispatch(manifest, config_obj)
