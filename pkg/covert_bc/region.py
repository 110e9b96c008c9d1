"""
Covert capacity region, its N-receiver degraded extension and the key-rate region.

Rates are first-order, in nats per sqrt(n delta).
"""

import dataclasses
import math
from collections.abc import Sequence
from dataclasses import dataclass
from logging import getLogger

import numpy as np

from covert_bc.constants import REGION_TOLERANCE
from covert_bc.exception import (
    CovertExceptionDimensionMismatch,
    CovertExceptionOutOfRange,
    CovertExceptionOutsideRegion,
    CovertExceptionPrecondition,
    CovertExceptionUnsupportedRate,
)
from covert_bc.optimize import lattice_size, simplex_grid

logger = getLogger(__name__)


@dataclass(frozen=True)
class RegionSpec:
    l_stars: tuple[float, ...]
    degraded: bool = False

    def __post_init__(self):
        l_stars = tuple(float(v) for v in self.l_stars)
        object.__setattr__(self, "l_stars", l_stars)
        if len(l_stars) < 2:
            raise CovertExceptionDimensionMismatch(
                "a region needs at least two receivers"
            )
        if any(not v >= 0 for v in l_stars):
            raise CovertExceptionOutOfRange(
                f"capacities must be non-negative: {l_stars}"
            )
        if not any(v > 0 for v in l_stars):
            raise CovertExceptionOutOfRange("at least one capacity must be positive")
        if len(l_stars) > 2 and not self.degraded:
            raise CovertExceptionPrecondition(
                "more than two receivers are only supported for degraded"
                " broadcast channels"
            )

    @property
    def num_users(self) -> int:
        return len(self.l_stars)

    def shares(self, point) -> np.ndarray:
        """L_j / L_j*, zero on coordinates with L_j* = 0."""
        rates = _rate_vector(point, self)
        l_stars = np.array(self.l_stars)
        unsupported = (l_stars == 0) & (rates > 0)
        if np.any(unsupported):
            raise CovertExceptionUnsupportedRate(
                f"receivers {np.flatnonzero(unsupported).tolist()} have zero covert"
                " capacity but a positive rate"
            )

        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(l_stars > 0, rates / l_stars, 0.0)


def _rate_vector(point, region: RegionSpec) -> np.ndarray:
    rates = np.asarray(point, dtype=float)
    if rates.shape != (region.num_users,):
        raise CovertExceptionDimensionMismatch(
            f"rate vector has shape {rates.shape}, region has {region.num_users} users"
        )
    if np.any(rates < 0):
        raise CovertExceptionOutOfRange(f"rates must be non-negative: {rates.tolist()}")

    return rates


def region_contains(point, region: RegionSpec) -> bool:
    return float(region.shares(point).sum()) <= 1 + REGION_TOLERANCE


def _require_two_users(region: RegionSpec):
    if region.num_users != 2:
        raise CovertExceptionPrecondition(
            f"two receivers required, region has {region.num_users}"
        )


def boundary(region: RegionSpec, resolution: int) -> list[np.ndarray]:
    """Points with sum_j L_j / L_j* = 1 on a share lattice of step 1/(resolution-1)."""
    if resolution < 2:
        raise CovertExceptionOutOfRange(f"resolution={resolution} must be at least 2")

    l_stars = np.array(region.l_stars)
    active = np.flatnonzero(l_stars > 0)
    m = resolution - 1
    shares = simplex_grid(
        active.size, 1 / m, max_points=lattice_size(active.size, m)
    )

    points = np.zeros((shares.shape[0], region.num_users))
    points[:, active] = shares * l_stars[active]
    return list(points)


def boundary_rows(region: RegionSpec, resolution: int) -> list[dict]:
    rows = []
    for point in boundary(region, resolution):
        shares = region.shares(point)
        row = {f"share_{j + 1}": float(s) for j, s in enumerate(shares)}
        row.update({f"L_{j + 1}": float(v) for j, v in enumerate(point)})
        rows.append(row)

    return rows


@dataclass(frozen=True)
class TimeDivisionPlan:
    rho: float
    delta_split: tuple[float, float]
    block_split: tuple[int, int]
    log_m_targets: tuple[float, float]
    idle_fraction: float = 0.0

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def plan_from_share(
    rho: float, delta: float, n: int, region: RegionSpec
) -> TimeDivisionPlan:
    """
    Time share rho of the n uses and of the budget delta goes to receiver 1, the
    rest to receiver 2.
    """
    _require_two_users(region)
    if not 0 <= rho <= 1:
        raise CovertExceptionOutOfRange(f"rho={rho} outside [0, 1]")
    if delta < 0:
        raise CovertExceptionOutOfRange(f"delta={delta} must be non-negative")
    if n < 1:
        raise CovertExceptionOutOfRange(f"blocklength n={n} must be at least 1")

    n1 = math.floor(rho * n)
    delta1 = rho * delta
    l1_star, l2_star = region.l_stars
    return TimeDivisionPlan(
        rho=rho,
        delta_split=(delta1, delta - delta1),
        block_split=(n1, n - n1),
        log_m_targets=(
            math.sqrt(rho * n * delta1) * l1_star,
            math.sqrt((1 - rho) * n * (delta - delta1)) * l2_star,
        ),
    )


def time_division_plan(
    l1: float, l2: float, delta: float, n: int, region: RegionSpec
) -> TimeDivisionPlan:
    _require_two_users(region)
    if not region_contains((l1, l2), region):
        raise CovertExceptionOutsideRegion(
            f"({l1}, {l2}) lies outside the covert capacity region"
        )

    s1, s2 = region.shares((l1, l2))
    used = s1 + s2
    rho = s1 / used if used > 0 else 1.0
    plan = plan_from_share(min(rho, 1.0), delta, n, region)
    logger.debug(f"Time division rho={plan.rho}, idle fraction {1 - used}")
    return dataclasses.replace(plan, idle_fraction=max(0.0, 1 - used))


@dataclass(frozen=True)
class KeyRatePoint:
    l1: float
    l2: float
    l_key: float

    def __post_init__(self):
        if not self.l_key >= 0:
            raise CovertExceptionOutOfRange(
                f"key rate {self.l_key} must be non-negative"
            )


def min_key_rate(l1: float, l2: float, region: RegionSpec, l_z_star: float) -> float:
    """max(0, (L_1/L_1* + L_2/L_2*) L_Z* - L_1 - L_2)"""
    _require_two_users(region)
    if not l_z_star >= 0:
        raise CovertExceptionOutOfRange(f"L_Z*={l_z_star} must be non-negative")
    if not region_contains((l1, l2), region):
        raise CovertExceptionOutsideRegion(
            f"({l1}, {l2}) lies outside the covert capacity region"
        )

    used = float(region.shares((l1, l2)).sum())
    return max(0.0, used * l_z_star - l1 - l2)


def key_region_contains(pt: KeyRatePoint, region: RegionSpec, l_z_star: float) -> bool:
    _require_two_users(region)
    try:
        inside = region_contains((pt.l1, pt.l2), region)
    except CovertExceptionUnsupportedRate:
        return False

    if not inside:
        return False

    return pt.l_key >= min_key_rate(pt.l1, pt.l2, region, l_z_star) - REGION_TOLERANCE


def key_rate_boundary(
    region: RegionSpec, l_z_star: float, resolution: int
) -> list[dict]:
    _require_two_users(region)
    rows = []
    for row in boundary_rows(region, resolution):
        row["min_key_rate"] = min_key_rate(row["L_1"], row["L_2"], region, l_z_star)
        rows.append(row)

    return rows


def scale_region(region: RegionSpec, factors: Sequence[float]) -> RegionSpec:
    if len(factors) != region.num_users:
        raise CovertExceptionDimensionMismatch(
            f"{len(factors)} factors for {region.num_users} users"
        )

    return RegionSpec(
        tuple(l * f for l, f in zip(region.l_stars, factors)),
        region.degraded,
    )
