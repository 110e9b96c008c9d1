import sys
from logging import getLogger

import click

from covert_bc.constants import Command, RunManifest

logger = getLogger(__name__)

# click option name -> manifest param name
_PARAM_OPTIONS = (
    "delta",
    "n",
    "rho",
    "grid_step",
    "trials",
    "seed",
    "bits",
    "n_list",
    "resolution",
    "rates_fraction",
)


def convert_click_kwargs_to_manifest(kwargs: dict) -> RunManifest:
    params = {
        name: kwargs[name]
        for name in _PARAM_OPTIONS
        if kwargs.get(name) not in (None, False)
    }

    manifest = RunManifest(
        command=Command(kwargs["command"]),
        input_path=kwargs["spec"],
        output_path=kwargs["out"],
        params=params,
        config_file=kwargs["config"],
        logging_level=kwargs["logging_level"],
    )

    return manifest


@click.command("covert-bc", help="Covert communication over broadcast channels")
@click.argument(
    "command",
    type=click.Choice([c.value for c in Command]),
    required=False,
)
@click.option(
    "-V",
    "--version",
    is_flag=True,
    default=False,
    help="Print version info and exit.",
)
@click.option("--spec", default=None, help="Channel or Gaussian spec file (JSON).")
@click.option("--out", default=None, help="Results file; the sidecar goes next to it.")
@click.option("--delta", type=float, default=None, help="Covertness budget in nats.")
@click.option("--n", "n", type=int, default=None, help="Blocklength.")
@click.option("--rho", type=float, default=None, help="Time share of receiver 1.")
@click.option("--grid-step", type=float, default=None, help="Lattice step.")
@click.option("--trials", type=int, default=None, help="Monte Carlo trials.")
@click.option("--seed", type=int, default=None, help="Seed for all randomness.")
@click.option(
    "--bits",
    is_flag=True,
    default=False,
    help="Report rates in bits per sqrt(use) instead of nats.",
)
@click.option("--n-list", default=None, help="Comma separated blocklengths.")
@click.option("--resolution", type=int, default=None, help="Boundary sample count.")
@click.option(
    "--rates-fraction", type=float, default=None, help="Back-off from L* targets."
)
@click.option(
    "-c",
    "--config",
    default=None,
    help="Load configuration from file.  [default: None]",
)
@click.option(
    "--logging-level",
    type=click.Choice(["CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"]),
    default=None,
    help="Override the configured logging level.",
)
@click.option(
    "--replay",
    default=None,
    help="Re-run the command recorded in a sidecar file.",
)
def main(**kwargs):
    if kwargs["version"]:
        from covert_bc import __version__

        print(__version__)
        sys.exit(0)

    from covert_bc.runner import dispatch, replay

    if kwargs["replay"] is not None:
        sys.exit(replay(kwargs["replay"], kwargs["logging_level"]))

    if kwargs["command"] is None:
        raise click.UsageError("COMMAND is required unless --replay or -V is given")

    manifest = convert_click_kwargs_to_manifest(kwargs)
    logger.debug(f"Manifest: {manifest}")
    sys.exit(dispatch(manifest))
