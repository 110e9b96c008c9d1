import logging
import logging.config

from covert_bc.config import Config, LoggingLevel
from covert_bc.log import (
    DefaultFormatter,
    clear_run_messages,
    get_logging_config,
    get_run_messages,
)


def test_logging_config_levels():
    config = Config()
    config.logging.level = LoggingLevel.CRITICAL
    data = get_logging_config(config)
    assert data["handlers"]["default"]["level"] == "CRITICAL"
    assert data["loggers"]["covert_bc"]["level"] == logging.WARNING

    config.logging.level = LoggingLevel.DEBUG
    assert get_logging_config(config)["loggers"]["covert_bc"]["level"] == logging.DEBUG


def test_run_messages():
    config = Config()
    config.logging.level = LoggingLevel.CRITICAL
    logging.config.dictConfig(get_logging_config(config))
    clear_run_messages()

    logger = logging.getLogger("covert_bc.simulator")
    logger.info("not recorded")
    logger.warning("weight shrunk")
    assert get_run_messages() == ["WARNING: [covert_bc.simulator] weight shrunk"]

    clear_run_messages()
    assert get_run_messages() == []


def test_default_formatter():
    formatter = DefaultFormatter(fmt="%(levelname)s: %(message)s", use_colors=False)
    record = logging.LogRecord("covert_bc", logging.INFO, "", 0, "ready", None, None)
    assert formatter.format(record) == "INFO: ready"
