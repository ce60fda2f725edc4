"""Franck-Condon blockade: how the largest multi-mode overlap shrinks with mode count.

For each sample group, M displacement differences are drawn uniformly and
the bound ``prod_i max_{m,n} |<m|D(dalpha_i)|n>|^2`` is accumulated in log
space. Every group owns a Philox stream keyed by ``(seed, group)``, so
results do not depend on how groups are scheduled across threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .fock import DEFAULT_LEAKAGE_TOL, FockTruncation, default_n_max, max_fc_element

THREADS_ENV = "SYNCHROTHERM_THREADS"
MODES = ("nested", "redraw")


@dataclass(frozen=True)
class BlockadeConfig:
    m_values: tuple = tuple(range(1, 11))
    n_groups: int = 6
    alpha_range: tuple = (-4.0, 4.0)
    seed: int = 12345
    mode: str = "nested"

    def __post_init__(self):
        m = tuple(int(v) for v in self.m_values)
        problems = []
        if not m or m[0] < 1 or any(b <= a for a, b in zip(m, m[1:])):
            problems.append("m_values must be a non-empty strictly ascending list of positive integers")
        if int(self.n_groups) < 1:
            problems.append("n_groups must be >= 1")
        lo, hi = (float(v) for v in self.alpha_range)
        if not lo < hi:
            problems.append(f"alpha_range must satisfy lo < hi, got ({lo}, {hi})")
        if not 0 <= int(self.seed) < 2**64:
            problems.append("seed must be a 64-bit unsigned integer")
        if self.mode not in MODES:
            problems.append(f"mode must be one of {MODES}")
        if problems:
            raise ValidationError("; ".join(problems))
        object.__setattr__(self, "m_values", m)
        object.__setattr__(self, "alpha_range", (lo, hi))
        object.__setattr__(self, "n_groups", int(self.n_groups))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class BlockadeRun:
    """``log_factors[g, k]`` is the log bound for group ``g`` at ``m_values[k]``.

    ``draws[g]`` holds the displacement differences used by group ``g``, in
    draw order.
    """

    config: BlockadeConfig
    log_factors: np.ndarray
    draws: list = field(repr=False)
    per_mode_max: list = field(repr=False)

    @property
    def factors(self) -> np.ndarray:
        return np.exp(self.log_factors)


def group_generator(seed: int, group: int) -> np.random.Generator:
    """Counter-based stream for one group: Philox keyed by ``(seed, group)``."""
    key = (int(seed) << 64) | int(group)
    return np.random.Generator(np.random.Philox(key=key))


def worker_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return min(8, os.cpu_count() or 1)


def _log_max(dalpha: float, trunc: FockTruncation) -> float:
    value, _ = max_fc_element(dalpha, trunc)
    return math.log(value)


def _run_group(config: BlockadeConfig, g: int, trunc: FockTruncation, fixed_draws):
    m_values = config.m_values
    if config.mode == "nested":
        if fixed_draws is not None:
            draws = np.asarray(fixed_draws[g], dtype=float)[: m_values[-1]]
        else:
            lo, hi = config.alpha_range
            draws = group_generator(config.seed, g).uniform(lo, hi, size=m_values[-1])
        logs = np.array([_log_max(d, trunc) for d in draws])
        cum = np.cumsum(logs)
        return cum[np.asarray(m_values) - 1], draws, logs

    # redraw: a fresh set of M displacements for every M, consumed sequentially from the group stream
    rng = group_generator(config.seed, g)
    lo, hi = config.alpha_range
    out, all_draws, all_logs = [], [], []
    for m in m_values:
        d = rng.uniform(lo, hi, size=m) if fixed_draws is None else np.asarray(fixed_draws[g], dtype=float)[:m]
        logs = np.array([_log_max(x, trunc) for x in d])
        out.append(logs.sum())
        all_draws.append(d)
        all_logs.append(logs)
    return np.array(out), np.concatenate(all_draws), np.concatenate(all_logs)


def run_blockade(
    config: BlockadeConfig,
    trunc: FockTruncation | None = None,
    draws=None,
    threads: int | None = None,
) -> BlockadeRun:
    """Log of ``prod_{i<=M} max |<m|D(dalpha_i)|n>|^2`` for every group and M.

    ``trunc`` defaults to ``n_max = 4 * max|range|^2 + 20`` so the maximizing
    element is certified for every draw. ``draws`` (``n_groups x max(M)``)
    replaces the random draws, e.g. to pin all displacements to zero.
    """
    lo, hi = config.alpha_range
    if trunc is None:
        trunc = FockTruncation(default_n_max(max(abs(lo), abs(hi))), DEFAULT_LEAKAGE_TOL)
    if draws is not None:
        draws = np.asarray(draws, dtype=float)
        if draws.shape[0] != config.n_groups or draws.shape[1] < config.m_values[-1]:
            raise ValidationError("draws must have shape (n_groups, >= max(m_values))")

    groups = range(config.n_groups)
    with ThreadPoolExecutor(max_workers=worker_count(threads)) as pool:
        results = list(pool.map(lambda g: _run_group(config, g, trunc, draws), groups))
    log_factors = np.vstack([r[0] for r in results])
    return BlockadeRun(config, log_factors, [r[1] for r in results], [np.exp(r[2]) for r in results])


def fit_log_slope(m_values, log_factors) -> tuple[float, float, float]:
    """Least-squares line through ``(M, ln factor)``: ``(slope, intercept, r_squared)``.

    ``r_squared`` is 1 when the fit is exact, including a constant series.
    """
    x = np.asarray(m_values, dtype=float)
    y = np.asarray(log_factors, dtype=float)
    if x.size != y.size:
        raise ValidationError("m_values and log_factors differ in length")
    if x.size < 3:
        raise ValidationError(f"need at least 3 points for a slope fit, got {x.size}")
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_res = float(np.sum((y - (intercept + slope * x)) ** 2))
    ss_tot = float(np.sum((y - ym) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return slope, intercept, r2
