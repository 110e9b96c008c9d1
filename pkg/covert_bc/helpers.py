import csv
import json
import math
import traceback
from collections.abc import Iterable
from enum import Enum
from logging import getLogger
from pathlib import Path
from typing import Any

import numpy as np

from covert_bc.exception import CovertExceptionParseError

logger = getLogger(__name__)

_PACKAGE_ROOT = Path(__file__).resolve().parent
# frames of these modules only route calls
_PLUMBING_MODULES = {"runner", "cli", "__main__"}


def to_jsonable(value: Any) -> Any:
    match value:
        case dict():
            return {str(k): to_jsonable(v) for k, v in value.items()}
        case list() | tuple():
            return [to_jsonable(v) for v in value]
        case np.ndarray():
            return to_jsonable(value.tolist())
        case np.bool_():
            return bool(value)
        case np.integer():
            return int(value)
        case np.floating():
            return float(value)
        case Enum():
            return value.value
        case _:
            return value


def dump_json(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2) + "\n"


def write_json(path: str | Path, obj: Any):
    Path(path).write_text(dump_json(obj))
    logger.debug(f"Wrote {path}")


def _cell(value: Any) -> str:
    value = to_jsonable(value)
    if isinstance(value, float):
        return repr(value)

    return str(value)


def write_csv(path: str | Path, rows: Iterable[dict], fieldnames: list[str]):
    with open(path, "w", newline="") as fp:
        writer = csv.DictWriter(fp, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row[k]) for k in fieldnames})

    logger.debug(f"Wrote {path}")


def scale_columns(
    rows: Iterable[dict], columns: Iterable[str], scale: float
) -> list[dict]:
    columns = set(columns)
    return [
        {k: v * scale if k in columns else v for k, v in row.items()} for row in rows
    ]


def parse_n_list(text: str | list | tuple) -> list[int]:
    """ "10000,1e6, 1e8" -> [10000, 1000000, 100000000]"""
    if isinstance(text, (list, tuple)):
        items = list(text)
    else:
        items = [item for item in str(text).replace(" ", "").split(",") if item]

    try:
        values = [float(item) for item in items]
    except ValueError:
        raise CovertExceptionParseError(f"cannot parse blocklength list: {text!r}")

    if not values or any(not math.isfinite(v) or v != int(v) or v < 1 for v in values):
        raise CovertExceptionParseError(
            f"blocklengths must be positive integers: {text!r}"
        )

    return [int(v) for v in values]


def failing_operation(exc: BaseException) -> tuple[str | None, str | None]:
    """(module, function) of the deepest package frame in the traceback."""
    module, operation = None, None
    for frame in traceback.extract_tb(exc.__traceback__):
        path = Path(frame.filename).resolve()
        if path.parent != _PACKAGE_ROOT or path.stem in _PLUMBING_MODULES:
            continue

        module, operation = path.stem, frame.name

    return module, operation
