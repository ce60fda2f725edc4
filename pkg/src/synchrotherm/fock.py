"""Displacement-operator matrix elements on a truncated Fock space.

For real ``alpha`` the displacement operator ``D(alpha) = exp[alpha (a^dag - a)]``
has real matrix elements. For ``m >= n``::

    <m|D(alpha)|n> = sqrt(n!/m!) alpha^(m-n) exp(-alpha^2/2) L_n^(m-n)(alpha^2)

and ``<n|D(alpha)|m> = (-1)^(m-n) <m|D(alpha)|n>``. The Laguerre factor is
evaluated by a normalized three-term recurrence and combined with the
prefactor in log space, so no factorial is ever formed.

Overlaps between displaced Fock states ``|n_p> = D^dag(alpha_p)|n>`` follow as
``<n_p|m_q> = <n|D(alpha_p - alpha_q)|m>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .errors import TruncationError, ValidationError

DEFAULT_LEAKAGE_TOL = 1e-6


@dataclass(frozen=True)
class FockTruncation:
    """Highest retained Fock level and the per-column leakage tolerance."""

    n_max: int
    leakage_tol: float = DEFAULT_LEAKAGE_TOL

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValidationError(f"n_max must be an integer >= 1, got {self.n_max}")
        if not 0 < self.leakage_tol < 1:
            raise ValidationError(f"leakage_tol must lie in (0, 1), got {self.leakage_tol}")
        object.__setattr__(self, "n_max", int(self.n_max))


def default_n_max(max_displacement: float) -> int:
    """``4 * alpha^2 + 20``, rounded up."""
    return int(math.ceil(4.0 * float(max_displacement) ** 2 + 20))


def default_truncation(max_displacement: float, leakage_tol: float = DEFAULT_LEAKAGE_TOL) -> FockTruncation:
    return FockTruncation(default_n_max(max_displacement), leakage_tol)


@lru_cache(maxsize=256)
def _displacement_entries(alpha: float, n_max: int) -> np.ndarray:
    size = n_max + 1
    if alpha == 0.0:
        out = np.eye(size)
        out.setflags(write=False)
        return out

    x = alpha * alpha
    k = np.arange(size, dtype=float)
    log_pref = k * math.log(abs(alpha)) - 0.5 * x - 0.5 * gammaln(k + 1)
    sign = np.where((k % 2 == 1) & (alpha < 0), -1.0, 1.0)

    # lower[j, k] = <j+k|D|j>; only j + k <= n_max is meaningful
    lower = np.zeros((size, size))
    h_prev = np.zeros(size)
    h = np.ones(size)
    for j in range(size):
        valid = k <= n_max - j
        with np.errstate(divide="ignore"):
            mag = np.exp(log_pref + np.log(np.abs(h)))
        lower[j, valid] = (sign * np.sign(h) * mag)[valid]
        h_next = ((2 * j + k + 1 - x) * h - np.sqrt(j * (j + k)) * h_prev) / np.sqrt((j + 1) * (j + 1 + k))
        h_prev, h = h, h_next
        if not np.all(np.isfinite(h[valid])):
            raise FloatingPointError("Laguerre recurrence overflowed")

    out = np.zeros((size, size))
    jj, kk = np.nonzero(np.add.outer(np.arange(size), np.arange(size)) <= n_max)
    vals = lower[jj, kk]
    out[jj + kk, jj] = vals
    out[jj, jj + kk] = np.where(kk % 2 == 1, -vals, vals)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FranckCondonTable:
    """``entries[m, n] = <m|D(alpha)|n>`` for ``m, n <= n_max``.

    ``leakage[n]`` is the probability of ``D(alpha)|n>`` outside the table;
    a column is certified when its leakage is at most ``trunc.leakage_tol``.
    """

    alpha: float
    entries: np.ndarray
    leakage: np.ndarray
    trunc: FockTruncation

    @property
    def certified(self) -> np.ndarray:
        return self.leakage <= self.trunc.leakage_tol

    def certified_max(self) -> int:
        """Largest index ``c`` such that every column ``0..c`` is certified (-1 if none)."""
        bad = np.flatnonzero(~self.certified)
        return int(bad[0]) - 1 if bad.size else self.trunc.n_max


def displacement_matrix(alpha: float, trunc: FockTruncation) -> FranckCondonTable:
    """Exact displacement matrix elements on ``0..n_max`` with per-column leakage."""
    alpha = float(alpha)
    entries = _displacement_entries(alpha, trunc.n_max)
    leakage = 1.0 - np.sum(entries**2, axis=0)
    leakage.setflags(write=False)
    return FranckCondonTable(alpha, entries, leakage, trunc)


def required_n_max(alpha: float, levels: Sequence[int], leakage_tol: float = DEFAULT_LEAKAGE_TOL) -> int:
    """Smallest ``n_max`` that certifies every column in ``levels``."""
    top = max(int(v) for v in levels)
    n_max = top + default_n_max(abs(alpha))
    while True:
        entries = _displacement_entries(float(alpha), n_max)
        cols = np.asarray(sorted(set(int(v) for v in levels)))
        cum = np.cumsum(entries[:, cols] ** 2, axis=0)
        ok = (1.0 - cum) <= leakage_tol
        if ok[-1].all():
            first = np.argmax(ok, axis=0)
            return int(max(top, first.max()))
        n_max *= 2


def oracle_displacement_matrix(alpha: float, n_max: int) -> np.ndarray:
    """Displacement matrix by exponentiating ``alpha (a^dag - a)`` on the truncated space.

    Independent reference for tests: Taylor series with scaling and
    squaring, truncated once the remainder bound falls below 1e-17. Entries
    near the truncation edge differ from the exact infinite-space values.
    """
    if n_max < 8:
        raise ValidationError("oracle requires n_max >= 8")
    size = n_max + 1
    a = np.diag(np.sqrt(np.arange(1, size, dtype=float)), 1)
    gen = float(alpha) * (a.T - a)
    norm = 2.0 * abs(alpha) * math.sqrt(n_max)
    squarings = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    y = gen / 2.0**squarings
    ynorm = norm / 2.0**squarings

    result = np.eye(size)
    term = np.eye(size)
    kk = 0
    while True:
        kk += 1
        term = term @ y / kk
        result = result + term
        # ||remainder|| <= ynorm^(kk+1)/(kk+1)! * 1/(1 - ynorm/(kk+2))
        tail = ynorm ** (kk + 1) / math.factorial(kk + 1) / (1 - ynorm / (kk + 2))
        if tail < 1e-17:
            break
    for _ in range(squarings):
        result = result @ result
    return result


def _table_for(dalpha: float, levels: Sequence[int], trunc: FockTruncation | None) -> FranckCondonTable:
    levels = [int(v) for v in levels]
    if any(v < 0 for v in levels):
        raise ValidationError("Fock levels must be non-negative")
    if trunc is None:
        tol = DEFAULT_LEAKAGE_TOL
        n_max = max(default_n_max(dalpha), required_n_max(dalpha, levels, tol))
        return displacement_matrix(dalpha, FockTruncation(n_max, tol))
    table = displacement_matrix(dalpha, trunc)
    bad = [v for v in levels if v > trunc.n_max or not table.certified[v]]
    if bad:
        need = required_n_max(dalpha, levels, trunc.leakage_tol)
        raise TruncationError(
            f"Fock level(s) {sorted(set(bad))} not certified at n_max={trunc.n_max} "
            f"for displacement {dalpha:g}; need n_max >= {need}",
            required_n_max=need,
        )
    return table


def franck_condon(n: int, alpha_p: float, m: int, alpha_q: float, trunc: FockTruncation | None = None) -> float:
    """Signed overlap ``<n_p|m_q> = <n|D(alpha_p - alpha_q)|m>``.

    Without ``trunc`` a certifying truncation is chosen automatically; with
    an explicit ``trunc`` uncertified levels raise :class:`TruncationError`.
    """
    dalpha = float(alpha_p) - float(alpha_q)
    table = _table_for(dalpha, (n, m), trunc)
    return float(table.entries[n, m])


def log_multi_fc_factor(n_vec, m_vec, dalpha_vec, trunc: FockTruncation | None = None) -> float:
    """Natural log of the multi-mode factor ``prod_i <n_i|D(dalpha_i)|m_i>^2``."""
    n_vec, m_vec, dalpha_vec = (np.atleast_1d(v) for v in (n_vec, m_vec, dalpha_vec))
    if not (len(n_vec) == len(m_vec) == len(dalpha_vec)) or len(n_vec) == 0:
        raise ValidationError(
            f"mode vectors must have equal non-zero length, got {len(n_vec)}, {len(m_vec)}, {len(dalpha_vec)}"
        )
    total = 0.0
    for n, m, da in zip(n_vec, m_vec, dalpha_vec):
        v = _table_for(float(da), (int(n), int(m)), trunc).entries[int(n), int(m)]
        if v == 0.0:
            return -math.inf
        total += 2.0 * math.log(abs(v))
    return total


def multi_fc_factor(n_vec, m_vec, dalpha_vec, trunc: FockTruncation | None = None) -> float:
    return math.exp(log_multi_fc_factor(n_vec, m_vec, dalpha_vec, trunc))


def max_fc_element(dalpha: float, trunc: FockTruncation | None = None) -> tuple[float, tuple[int, int]]:
    """Largest ``|<m|D(dalpha)|n>|^2`` over the certified block and its index.

    Ties resolve to the lexicographically lowest ``(m, n)``.
    """
    if trunc is None:
        trunc = default_truncation(abs(dalpha))
    table = displacement_matrix(dalpha, trunc)
    top = table.certified_max()
    if top < 0:
        raise TruncationError(f"no certified columns at n_max={trunc.n_max}")
    block = table.entries[: top + 1, : top + 1] ** 2
    flat = int(np.argmax(block))
    m, n = divmod(flat, block.shape[1])
    return float(block[m, n]), (m, n)
