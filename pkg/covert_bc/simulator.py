"""
Monte Carlo of the time-division scheme: sparse i.i.d. codebooks, maximum-likelihood
decoding at each receiver and a likelihood-ratio warden.

Each trial draws from its own stream default_rng([seed, trial]); codebooks come from
default_rng([seed, 0xC0DE, user]). Results are independent of the worker count.
"""

import dataclasses
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from logging import getLogger

import numpy as np
from scipy.optimize import brentq
from scipy.stats import binom, norm

from covert_bc.capacity import covert_capacity_general
from covert_bc.channel import BroadcastSpec, Channel
from covert_bc.config import SimulationOptions, SolverOptions
from covert_bc.converse import max_weight
from covert_bc.exception import (
    CovertExceptionEmptyCodebook,
    CovertExceptionOutOfRange,
    CovertExceptionPrecondition,
)
from covert_bc.measures import detection_bounds, mixture_divergence
from covert_bc.region import RegionSpec, TimeDivisionPlan, plan_from_share

logger = getLogger(__name__)

CODEBOOK_STREAM = 0xC0DE
# atoms below exp(-460) are dropped from the competitor score law
_LOG_PRUNE = -460.0
_SCORE_DECIMALS = 11
_TIE_TOLERANCE = 1e-9
# a codebook above this log-size is never materialized
_LOG_SIZE_CAP = 700.0


@dataclass
class SimConfig:
    spec: BroadcastSpec
    n: int
    delta: float
    rho: float = 0.5
    rates_fraction: float = 0.3
    trials: int = 1000
    seed: int = 0
    key_model: bool = True
    log_m_targets: tuple[float, float] | None = None
    options: SimulationOptions = field(default_factory=SimulationOptions)
    solver: SolverOptions | None = None

    def __post_init__(self):
        if self.n < 2:
            raise CovertExceptionOutOfRange(
                f"blocklength n={self.n} must be at least 2"
            )
        if self.trials < 1:
            raise CovertExceptionOutOfRange(f"trials={self.trials} must be at least 1")
        if not 0 < self.rates_fraction <= 1:
            raise CovertExceptionOutOfRange(
                f"rates_fraction={self.rates_fraction} outside (0, 1]"
            )
        if not 0 <= self.rho <= 1:
            raise CovertExceptionOutOfRange(f"rho={self.rho} outside [0, 1]")
        if self.delta < 0:
            raise CovertExceptionOutOfRange(f"delta={self.delta} must be non-negative")
        if self.log_m_targets is not None and len(self.log_m_targets) != 2:
            raise CovertExceptionOutOfRange(
                "log_m_targets needs one value per receiver"
            )


@dataclass(eq=False)
class Codebook:
    """
    An i.i.d. P_{alpha,p} codebook for one receiver's sub-block.

    `words` is only materialized for explicit decoding; implicit codebooks are
    described by their size and letter law.
    """

    user: int
    channel: Channel
    blocklength: int
    delta: float
    alpha: float
    alpha_bar: float
    mix_p: np.ndarray
    log_m: float
    size: int | None
    l_star: float | None = None
    words: np.ndarray | None = None

    @property
    def explicit(self) -> bool:
        return self.words is not None

    @property
    def letter_law(self) -> np.ndarray:
        return np.concatenate([[1 - self.alpha], self.alpha * self.mix_p])

    def nonzero_entries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        rows, cols = np.nonzero(self.words)
        return rows, cols, self.words[rows, cols]


def _mix_and_capacity(
    legit: Channel, warden: Channel, need_capacity: bool, solver: SolverOptions | None
) -> tuple[np.ndarray, float | None]:
    if not need_capacity and legit.num_inputs == 2:
        return np.ones(1), None

    result = covert_capacity_general(legit, warden, solver)
    return result.argmax_p, result.l_star


def _shrink_weight(
    alpha: float, mix: np.ndarray, warden: Channel, n_j: int, delta_j: float
):
    kl = n_j * float(mixture_divergence(alpha, mix, warden.matrix)[0])
    if kl <= delta_j:
        return alpha

    shrunk = brentq(
        lambda a: n_j * float(mixture_divergence(a, mix, warden.matrix)[0]) - delta_j,
        0.0,
        alpha,
        xtol=1e-15,
    )
    logger.warning(
        f"Weight {alpha} gives n D = {kl} > {delta_j}, shrunk to {shrunk}"
    )
    return shrunk


def _build_codebook(
    cfg: SimConfig, user: int, n_j: int, delta_j: float
) -> Codebook | None:
    if n_j == 0 or delta_j == 0:
        return None

    spec = cfg.spec
    legit = spec.legit(user)
    override = cfg.log_m_targets[user - 1] if cfg.log_m_targets else None
    mix, l_star = _mix_and_capacity(legit, spec.warden, override is None, cfg.solver)

    budget = max_weight(delta_j, n_j, spec.warden, mix)
    alpha = _shrink_weight(budget.alpha_bar, mix, spec.warden, n_j, delta_j)

    if override is None:
        target = cfg.rates_fraction * math.sqrt(n_j * delta_j) * l_star
    else:
        target = float(override)
    if not target >= math.log(2):
        raise CovertExceptionEmptyCodebook(
            f"receiver {user}: target log-size {target} nats gives fewer than two"
            " codewords"
        )

    size = math.floor(math.exp(target)) if target < _LOG_SIZE_CAP else None
    log_m = math.log(size) if size is not None else target
    codebook = Codebook(
        user=user,
        channel=legit,
        blocklength=n_j,
        delta=delta_j,
        alpha=alpha,
        alpha_bar=budget.alpha_bar,
        mix_p=mix,
        log_m=log_m,
        size=size,
        l_star=l_star,
    )

    if size is not None and size <= cfg.options.explicit_codebook_limit:
        rng = np.random.default_rng([cfg.seed, CODEBOOK_STREAM, user])
        dtype = np.uint8 if legit.num_inputs <= 256 else np.uint16
        codebook.words = rng.choice(
            legit.num_inputs, size=(size, n_j), p=codebook.letter_law
        ).astype(dtype)
    elif legit.num_inputs != 2:
        raise CovertExceptionPrecondition(
            f"receiver {user}: {target:.1f} nats needs implicit decoding, which only"
            " supports binary inputs"
        )

    logger.info(
        f"Receiver {user}: {n_j} uses, alpha={alpha:.6g}, log M={log_m:.4f} nats,"
        f" {'explicit' if codebook.explicit else 'implicit'} decoding"
    )
    return codebook


def plan_for(cfg: SimConfig) -> TimeDivisionPlan:
    # only the splits are used, unit capacities keep the plan well defined
    return plan_from_share(cfg.rho, cfg.delta, cfg.n, RegionSpec((1.0, 1.0)))


def build_codebooks(cfg: SimConfig) -> tuple[Codebook | None, Codebook | None]:
    plan = plan_for(cfg)
    return tuple(
        _build_codebook(cfg, user, n_j, delta_j)
        for user, n_j, delta_j in zip((1, 2), plan.block_split, plan.delta_split)
    )


def wilson_halfwidth(errors: int, trials: int) -> float:
    """Half-width of the 95% Wilson score interval."""
    z = float(norm.ppf(0.975))
    p = errors / trials
    return (
        z
        / (1 + z**2 / trials)
        * math.sqrt(p * (1 - p) / trials + z**2 / (4 * trials**2))
    )


def _sample_outputs(rng: np.random.Generator, rows: np.ndarray) -> np.ndarray:
    """One output per row of conditional laws."""
    cumulative = rows.cumsum(axis=1)
    u = rng.random(rows.shape[0])
    return np.minimum((u[:, None] >= cumulative).sum(axis=1), rows.shape[1] - 1)


class _Decoder:
    def __init__(self, codebook: Codebook):
        self.codebook = codebook
        matrix = codebook.channel.matrix
        with np.errstate(divide="ignore", invalid="ignore"):
            self.log_w = np.log(matrix)
            self.scores = self.log_w[1:] - self.log_w[0]

        if codebook.explicit:
            self.rows, self.cols, self.symbols = codebook.nonzero_entries()

    def trial(self, rng: np.random.Generator) -> tuple[bool, float, np.ndarray]:
        """(error, ensemble error probability or nan, input composition)"""
        if self.codebook.explicit:
            return self._explicit(rng)

        return self._implicit(rng)

    def _explicit(self, rng):
        codebook = self.codebook
        message = int(rng.integers(codebook.size))
        word = codebook.words[message]
        y = _sample_outputs(rng, codebook.channel.matrix[word])

        with np.errstate(invalid="ignore"):
            if np.any(codebook.channel.no_input_row[y] == 0):
                scores = self.log_w[codebook.words, y[None, :]].sum(axis=1)
            else:
                weights = self.scores[self.symbols - 1, y[self.cols]]
                scores = np.bincount(
                    self.rows, weights=weights, minlength=codebook.size
                )

        best = scores.max()
        error = bool(scores[message] < best or np.count_nonzero(scores == best) > 1)
        composition = np.bincount(word, minlength=codebook.channel.num_inputs)
        return error, math.nan, composition

    def _implicit(self, rng):
        codebook = self.codebook
        n_j, alpha = codebook.blocklength, codebook.alpha
        w0, w1 = codebook.channel.matrix
        ones = int(rng.binomial(n_j, alpha))
        from_ones = rng.multinomial(ones, w1)
        totals = from_ones + rng.multinomial(n_j - ones, w0)

        q = competitor_tail(self.scores[0], totals, from_ones, alpha)
        pe = union_error(codebook.log_m, q)
        error = bool(rng.random() < pe)
        return error, pe, np.array([n_j - ones, ones])


def union_error(log_m: float, q: float) -> float:
    """1 - (1 - q)^(M - 1) with M = exp(log_m), stable for huge M."""
    if q <= 0:
        return 0.0
    if q >= 1:
        return 1.0

    log_competitors = math.log(math.expm1(log_m)) if log_m < _LOG_SIZE_CAP else log_m
    exponent = log_competitors + math.log(-math.log1p(-q))
    return -math.expm1(-math.exp(min(exponent, _LOG_SIZE_CAP)))


def _group_law(count: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    mean, spread = count * alpha, math.sqrt(count * alpha * (1 - alpha))
    low = max(0, math.floor(mean - 40 * spread - 10))
    high = min(count, math.ceil(mean + 40 * spread + 10))
    k = np.arange(low, high + 1)
    log_pmf = binom.logpmf(k, count, alpha)
    keep = log_pmf >= _LOG_PRUNE
    return k[keep], np.exp(log_pmf[keep])


def competitor_tail(
    scores: np.ndarray, totals: np.ndarray, from_ones: np.ndarray, alpha: float
) -> float:
    """
    P(sum_y S(y) N_y >= sum_y S(y) n_1y) for N_y ~ Bin(c_y, alpha) independent.

    S(y) = log W_1(y) / W_0(y); positions where one row vanishes force the
    competitor to match the sent symbol there.
    """
    factor = 1.0
    finite = []
    for s, c in zip(scores, totals):
        if c == 0:
            continue
        if s == -np.inf:
            factor *= (1 - alpha) ** int(c)
        elif s == np.inf:
            factor *= alpha ** int(c)
        elif s != 0:
            finite.append((float(s), int(c)))

    finite_y = np.isfinite(scores) & (scores != 0)
    threshold = float(scores[finite_y] @ from_ones[finite_y]) - _TIE_TOLERANCE
    if factor == 0:
        return 0.0
    if not finite:
        return factor if threshold <= 0 else 0.0

    finite.sort(key=lambda group: group[1])
    values, probs = np.zeros(1), np.ones(1)
    for s, c in finite[:-1]:
        k, pmf = _group_law(c, alpha)
        values = (values[:, None] + s * k[None, :]).ravel()
        probs = (probs[:, None] * pmf[None, :]).ravel()
        keep = probs > math.exp(_LOG_PRUNE)
        atoms, index = np.unique(
            np.round(values[keep], _SCORE_DECIMALS), return_inverse=True
        )
        values, probs = atoms, np.bincount(index, weights=probs[keep])

    s, c = finite[-1]
    needed = (threshold - values) / s
    if s > 0:
        tail = binom.sf(np.ceil(needed) - 1, c, alpha)
    else:
        tail = binom.cdf(np.floor(needed), c, alpha)

    return float(min(1.0, factor * float(probs @ tail)))


@dataclass
class UserReport:
    user: int
    blocklength: int
    delta: float
    alpha: float
    log_m: float
    explicit: bool
    errors: int
    trials: int
    l_star: float | None = None
    ensemble_error_estimate: float | None = None

    @property
    def empirical_error(self) -> float:
        return self.errors / self.trials

    @property
    def wilson_halfwidth(self) -> float:
        return wilson_halfwidth(self.errors, self.trials)

    def as_dict(self) -> dict:
        return {
            "user": self.user,
            "blocklength": self.blocklength,
            "delta": self.delta,
            "alpha": self.alpha,
            "log_m": self.log_m,
            "decoder": "explicit" if self.explicit else "implicit",
            "empirical_error": self.empirical_error,
            "wilson_halfwidth": self.wilson_halfwidth,
            "ensemble_error_estimate": self.ensemble_error_estimate,
            "l_star": self.l_star,
        }


@dataclass
class SimReport:
    n: int
    delta: float
    rho: float
    seed: int
    trials: int
    key_model: bool
    users: list[UserReport]
    any_error: int
    exact_ensemble_kl: float
    detection_sum_bound: float
    false_alarm: float
    missed_detection: float
    lrt_std_error: float

    @property
    def empirical_lrt_sum(self) -> float:
        return self.false_alarm + self.missed_detection

    @property
    def log_m_sum(self) -> float:
        return sum(user.log_m for user in self.users)

    @property
    def any_user_error(self) -> float:
        return self.any_error / self.trials

    def user(self, index: int) -> UserReport | None:
        for report in self.users:
            if report.user == index:
                return report

        return None

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "delta": self.delta,
            "rho": self.rho,
            "seed": self.seed,
            "trials": self.trials,
            "key_model": self.key_model,
            "users": [user.as_dict() for user in self.users],
            "any_user_error": self.any_user_error,
            "covertness": {
                "exact_ensemble_kl": self.exact_ensemble_kl,
                "detection_sum_bound": self.detection_sum_bound,
            },
            "warden": {
                "empirical_lrt_sum": self.empirical_lrt_sum,
                "false_alarm": self.false_alarm,
                "missed_detection": self.missed_detection,
                "std_error": self.lrt_std_error,
            },
        }


class _Warden:
    """Log-likelihood ratio of Q_alpha^n against Q_0^n from per-block z counts."""

    def __init__(self, warden: Channel, codebooks: Sequence[Codebook]):
        self.q = warden.matrix
        self.blocks = []
        for codebook in codebooks:
            mixed = codebook.letter_law @ self.q
            with np.errstate(divide="ignore", invalid="ignore"):
                weights = np.where(
                    warden.no_input_row > 0, np.log(mixed / warden.no_input_row), 0.0
                )
            self.blocks.append((codebook.blocklength, weights))

    def statistics(
        self, rng: np.random.Generator, compositions: Sequence[np.ndarray]
    ) -> tuple[float, float]:
        null, alternative = 0.0, 0.0
        for (n_j, weights), composition in zip(self.blocks, compositions):
            null += float(rng.multinomial(n_j, self.q[0]) @ weights)
            counts = sum(
                rng.multinomial(int(c), self.q[x])
                for x, c in enumerate(composition)
                if c
            )
            alternative += float(np.asarray(counts) @ weights)

        return null, alternative


def _run_chunk(cfg: SimConfig, codebooks: list[Codebook], start: int, stop: int):
    decoders = [_Decoder(codebook) for codebook in codebooks]
    warden = _Warden(cfg.spec.warden, codebooks)
    size = stop - start
    errors = np.zeros((len(codebooks), size), dtype=bool)
    pe = np.full((len(codebooks), size), np.nan)
    llr = np.zeros((2, size))

    for i, trial in enumerate(range(start, stop)):
        rng = np.random.default_rng([cfg.seed, trial])
        compositions = []
        for j, decoder in enumerate(decoders):
            errors[j, i], pe[j, i], composition = decoder.trial(rng)
            compositions.append(composition)

        llr[:, i] = warden.statistics(rng, compositions)

    return errors, pe, llr


def exact_ensemble_kl(codebooks: Sequence[Codebook], warden: Channel) -> float:
    """sum_j n_j D(Q_{alpha_j,p} || Q_0)"""
    return sum(
        c.blocklength * float(mixture_divergence(c.alpha, c.mix_p, warden.matrix)[0])
        for c in codebooks
    )


def run(cfg: SimConfig) -> SimReport:
    codebooks = [c for c in build_codebooks(cfg) if c is not None]
    chunk = cfg.options.chunk_size
    bounds = [(s, min(s + chunk, cfg.trials)) for s in range(0, cfg.trials, chunk)]

    def work(bound: tuple[int, int]):
        return _run_chunk(cfg, codebooks, *bound)

    if cfg.options.workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=cfg.options.workers) as executor:
            results = list(executor.map(work, bounds))
    else:
        results = [work(bound) for bound in bounds]

    errors = np.concatenate([r[0] for r in results], axis=1)
    pe = np.concatenate([r[1] for r in results], axis=1)
    null, alternative = np.concatenate([r[2] for r in results], axis=1)

    users = []
    for j, codebook in enumerate(codebooks):
        users.append(
            UserReport(
                user=codebook.user,
                blocklength=codebook.blocklength,
                delta=codebook.delta,
                alpha=codebook.alpha,
                log_m=codebook.log_m,
                explicit=codebook.explicit,
                errors=int(errors[j].sum()),
                trials=cfg.trials,
                l_star=codebook.l_star,
                ensemble_error_estimate=(
                    None if codebook.explicit else float(pe[j].mean())
                ),
            )
        )

    threshold = float(np.quantile(null, 1 - cfg.options.false_alarm))
    pi_10 = float(np.mean(null > threshold))
    pi_01 = float(np.mean(alternative <= threshold))
    kl = exact_ensemble_kl(codebooks, cfg.spec.warden)
    report = SimReport(
        n=cfg.n,
        delta=cfg.delta,
        rho=cfg.rho,
        seed=cfg.seed,
        trials=cfg.trials,
        key_model=cfg.key_model,
        users=users,
        any_error=int(errors.any(axis=0).sum()) if codebooks else 0,
        exact_ensemble_kl=kl,
        detection_sum_bound=detection_bounds(kl),
        false_alarm=pi_10,
        missed_detection=pi_01,
        lrt_std_error=math.sqrt(
            (pi_10 * (1 - pi_10) + pi_01 * (1 - pi_01)) / cfg.trials
        ),
    )
    logger.info(
        f"n={cfg.n}: log M sum {report.log_m_sum:.3f} nats, any-user error"
        f" {report.any_user_error:.4f}, kl {kl:.4f},"
        f" warden sum {report.empirical_lrt_sum:.4f}"
    )
    return report


@dataclass(frozen=True)
class SweepRow:
    n: int
    log_m_sum: float
    normalized_sum: float
    normalized_share_sum: float
    error: float
    kl: float

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def sweep(cfg: SimConfig, n_list: Sequence[int]) -> list[SweepRow]:
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise CovertExceptionOutOfRange(f"n_list must be increasing: {n_list}")

    rows = []
    for n in n_list:
        report = run(dataclasses.replace(cfg, n=n))
        scale = math.sqrt(n * cfg.delta) if cfg.delta > 0 else math.inf
        share_sum = sum(
            user.log_m / (scale * user.l_star)
            for user in report.users
            if user.l_star and math.isfinite(user.l_star)
        )
        rows.append(
            SweepRow(
                n=n,
                log_m_sum=report.log_m_sum,
                normalized_sum=report.log_m_sum / scale,
                normalized_share_sum=share_sum,
                error=report.any_user_error,
                kl=report.exact_ensemble_kl,
            )
        )

    return rows
