"""Transition-rate graph over eigenlevels, its connectivity and predicted steady state."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import logsumexp

from . import bath as bath_mod
from .bath import BathSpec
from .errors import ValidationError
from .models import AnalyticEigensystem, DispersiveModel, coupling_matrix
from .spectral_core import CouplingChannel, EigenBasis, spectral_decompose

EDGE_RTOL = 1e-12
GAP_RTOL = 1e-10
STATIONARITY_RTOL = 1e-9
NORM_TOL = 1e-9


@dataclass(frozen=True)
class RateMatrix:
    """Sparse ``W(f <- i)`` with the level energies it was built from.

    ``targets[k] <- sources[k]`` happens at rate ``values[k]``. Pairs with a
    nonzero coupling but a gap below ``gap_tol`` carry no rate and are listed
    in ``degenerate_pairs`` as ``(i, j)`` with ``i < j``.
    """

    energies: np.ndarray
    targets: np.ndarray
    sources: np.ndarray
    values: np.ndarray
    beta: float
    edge_threshold: float = 0.0
    gap_tol: float = 0.0
    degenerate_pairs: tuple = ()
    labels: tuple | None = None
    warnings: tuple = ()

    def __post_init__(self):
        for name in ("energies", "targets", "sources", "values"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.targets == self.sources):
            raise ValidationError("rate matrix may not contain self-rates")
        if np.any(self.values < 0):
            raise ValidationError("rates must be non-negative")

    @property
    def n_levels(self) -> int:
        return self.energies.size

    @property
    def n_edges(self) -> int:
        return self.values.size

    @property
    def max_rate(self) -> float:
        return float(self.values.max()) if self.values.size else 0.0

    def dense(self) -> np.ndarray:
        w = np.zeros((self.n_levels, self.n_levels))
        w[self.targets, self.sources] = self.values
        return w

    def generator(self) -> np.ndarray:
        """``G`` with ``G[n, m] = W(n <- m)`` and ``G[n, n] = -sum_m W(m <- n)``."""
        g = self.dense()
        g -= np.diag(g.sum(axis=0))
        return g

    def scaled(self, factor: float) -> RateMatrix:
        return RateMatrix(
            self.energies, self.targets, self.sources, self.values * factor, self.beta,
            self.edge_threshold * factor, self.gap_tol, self.degenerate_pairs, self.labels, self.warnings,
        )

    def edges(self):
        """Iterate ``(i, f, E_f - E_i, W)``, sorted by source then target."""
        order = np.lexsort((self.targets, self.sources))
        for k in order:
            i, f = int(self.sources[k]), int(self.targets[k])
            yield i, f, float(self.energies[f] - self.energies[i]), float(self.values[k])


def _strength_from_channels(basis: EigenBasis, channels: Sequence) -> np.ndarray:
    strength = np.zeros((basis.dim, basis.dim))
    for ch in channels:
        op = ch.operator if isinstance(ch, CouplingChannel) else ch
        for comp in spectral_decompose(op, basis):
            np.add.at(strength, (comp.rows, comp.cols), np.abs(comp.values) ** 2)
    return strength


def _strength_from_couplings(eig: AnalyticEigensystem, couplings) -> np.ndarray:
    if couplings is None:
        return coupling_matrix(eig) ** 2
    if isinstance(couplings, np.ndarray):
        return np.abs(couplings) ** 2
    index = {lv: k for k, lv in enumerate(eig.levels)}
    strength = np.zeros((eig.n_levels, eig.n_levels))
    for (p, n), (q, m), w in couplings:
        strength[index[(p, tuple(n))], index[(q, tuple(m))]] += abs(w) ** 2
    return strength


def build_rate_matrix(
    system,
    couplings=None,
    bath: BathSpec | None = None,
    edge_threshold: float | None = None,
    gap_tol: float | None = None,
) -> RateMatrix:
    """Assemble ``W(f <- i) = |<f|A|i>|^2 * rate(bath, E_f - E_i)`` summed over channels.

    ``system`` is an :class:`EigenBasis` (then ``couplings`` is a list of
    channels or Hermitian operators in the original basis), an
    :class:`AnalyticEigensystem` (``couplings`` is the output of
    ``effective_couplings``, a dense weight matrix, or ``None`` to compute
    it), or a :class:`DispersiveModel`.

    ``edge_threshold`` defaults to ``1e-12 * max(W)`` and ``gap_tol`` to
    ``1e-10 * max|E|``.
    """
    if bath is None:
        raise ValidationError("a bath specification is required")
    labels = None
    if isinstance(system, DispersiveModel):
        couplings = system.channels if couplings is None else couplings
        system = system.basis
    if isinstance(system, EigenBasis):
        energies = system.energies
        labels = system.labels
        strength = _strength_from_channels(system, couplings or [])
    elif isinstance(system, AnalyticEigensystem):
        energies = system.energies
        labels = system.levels
        strength = _strength_from_couplings(system, couplings)
    else:
        raise ValidationError(f"unsupported system type {type(system).__name__}")

    energies = np.asarray(energies, dtype=float)
    if strength.shape != (energies.size, energies.size):
        raise ValidationError("coupling data does not match the number of levels")
    np.fill_diagonal(strength, 0.0)
    if gap_tol is None:
        scale = float(np.abs(energies).max()) if energies.size else 0.0
        gap_tol = GAP_RTOL * scale if scale > 0 else 1e-15
    gaps = energies[:, None] - energies[None, :]
    coupled = strength > 0
    degenerate = coupled & (np.abs(gaps) <= gap_tol)
    active = coupled & ~degenerate
    w = np.zeros_like(strength)
    w[active] = strength[active] * bath_mod.rate(bath, gaps[active])

    max_w = float(w.max()) if w.size else 0.0
    if edge_threshold is None:
        edge_threshold = EDGE_RTOL * max_w
    targets, sources = np.nonzero(w > edge_threshold)
    pairs = {(int(min(a, b)), int(max(a, b))) for a, b in zip(*np.nonzero(degenerate))}

    warnings = []
    if bath.zero_temperature:
        warnings.append(
            "zero temperature: upward rates vanish, connectivity uses the union of both directions"
        )
    if pairs:
        warnings.append(f"{len(pairs)} coupled level pair(s) with zero gap carry no Pauli rate")
    return RateMatrix(
        energies=energies,
        targets=targets,
        sources=sources,
        values=w[targets, sources],
        beta=bath.beta,
        edge_threshold=float(edge_threshold),
        gap_tol=float(gap_tol),
        degenerate_pairs=tuple(sorted(pairs)),
        labels=tuple(labels) if labels is not None else None,
        warnings=tuple(warnings),
    )


def detailed_balance_violation(rm: RateMatrix) -> float:
    """Largest relative deviation from ``W(m<-n) e^{-b E_n} = W(n<-m) e^{-b E_m}`` over edge pairs."""
    w = rm.dense()
    e = rm.energies
    worst = 0.0
    for f, i in zip(rm.targets, rm.sources):
        if f < i and w[i, f] > 0:
            # orient so `up` is the transition to the higher level
            lo, hi = (i, f) if e[f] >= e[i] else (f, i)
            up, down = w[hi, lo], w[lo, hi]
            expected = down * math.exp(-rm.beta * (e[hi] - e[lo]))
            denom = max(up, expected)
            if denom > 0:
                worst = max(worst, abs(up - expected) / denom)
    return worst


@dataclass(frozen=True)
class ConnectivityReport:
    """Partition of levels into components reachable through nonzero rates."""

    components: tuple
    edge_threshold: float
    degenerate_edges: tuple = ()
    warnings: tuple = ()

    @property
    def connected(self) -> bool:
        return len(self.components) == 1

    @property
    def n_components(self) -> int:
        return len(self.components)

    def labels(self, n_levels: int) -> np.ndarray:
        out = np.empty(n_levels, dtype=int)
        for c, members in enumerate(self.components):
            out[list(members)] = c
        return out


def component_partition(n_levels: int, rows, cols) -> tuple:
    """Weakly connected components as tuples of sorted indices, ordered by smallest member."""
    if n_levels == 0:
        return ()
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    graph = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n_levels, n_levels)).tocsr()
    _, lab = connected_components(graph, directed=True, connection="weak")
    groups: dict[int, list[int]] = {}
    for idx, c in enumerate(lab):
        groups.setdefault(int(c), []).append(idx)
    return tuple(sorted((tuple(g) for g in groups.values()), key=lambda g: g[0]))


def connectivity(rm: RateMatrix, include_degenerate: bool = True) -> ConnectivityReport:
    """Components of the undirected support of ``W``.

    With ``include_degenerate`` (default), coupled zero-gap pairs are also
    treated as edges: the bath still mixes such levels even though the
    secular rate equation assigns them no rate.
    """
    rows = list(rm.targets)
    cols = list(rm.sources)
    if include_degenerate:
        for a, b in rm.degenerate_pairs:
            rows.append(a)
            cols.append(b)
    comps = component_partition(rm.n_levels, rows, cols)
    return ConnectivityReport(
        components=comps,
        edge_threshold=rm.edge_threshold,
        degenerate_edges=rm.degenerate_pairs if include_degenerate else (),
        warnings=rm.warnings,
    )


@dataclass(frozen=True)
class SteadyStatePrediction:
    populations: np.ndarray
    component_weights: np.ndarray
    kind: str
    components: tuple = field(repr=False, default=())


def as_populations(initial, n_levels: int | None = None) -> np.ndarray:
    """Validate a probability vector: non-negative, summing to one within 1e-9."""
    values = getattr(initial, "values", initial)
    p = np.asarray(values, dtype=float)
    if p.ndim != 1:
        raise ValidationError("population vector must be one-dimensional")
    if n_levels is not None and p.size != n_levels:
        raise ValidationError(f"population vector has {p.size} entries, expected {n_levels}")
    if np.any(p < -1e-12):
        raise ValidationError(f"population vector has negative entries (min {p.min():.3e})")
    total = p.sum()
    if abs(total - 1.0) > NORM_TOL:
        raise ValidationError(f"population vector is not normalized (sum = {total!r})")
    return p


def gibbs(energies, beta: float, tol: float = 0.0) -> np.ndarray:
    """Normalized ``exp(-beta E)``, computed with a minimum-energy shift."""
    e = np.asarray(energies, dtype=float)
    if math.isinf(beta):
        ground = np.abs(e - e.min()) <= tol
        return ground / ground.sum()
    logw = -beta * (e - e.min())
    return np.exp(logw - logsumexp(logw))


def predict_steady_state(rm: RateMatrix, report: ConnectivityReport, initial) -> SteadyStatePrediction:
    """Canonical state for a connected graph, otherwise a mixture of partial Gibbs states.

    Each component ``V_i`` keeps the probability ``p_i`` the initial state
    assigns to it, distributed in proportion to ``exp(-beta E)`` inside it.
    """
    p0 = as_populations(initial, rm.n_levels)
    pop = np.zeros(rm.n_levels)
    weights = []
    for members in report.components:
        idx = list(members)
        w = float(p0[idx].sum())
        weights.append(w)
        pop[idx] = w * gibbs(rm.energies[idx], rm.beta, rm.gap_tol)
    kind = "canonical" if report.connected else "mixture"
    if report.connected:
        pop = gibbs(rm.energies, rm.beta, rm.gap_tol)
        weights = [1.0]
    return SteadyStatePrediction(pop, np.asarray(weights), kind, report.components)


def mixture_state(rm: RateMatrix, report: ConnectivityReport, component_weights) -> np.ndarray:
    """Stationary candidate with prescribed per-component probabilities."""
    cw = np.asarray(component_weights, dtype=float)
    if cw.size != report.n_components:
        raise ValidationError("need one weight per component")
    if np.any(cw < 0) or abs(cw.sum() - 1) > NORM_TOL:
        raise ValidationError("component weights must be a probability vector")
    pop = np.zeros(rm.n_levels)
    for w, members in zip(cw, report.components):
        idx = list(members)
        pop[idx] = w * gibbs(rm.energies[idx], rm.beta, rm.gap_tol)
    return pop


@dataclass(frozen=True)
class StationarityCheck:
    residual: float
    bound: float

    @property
    def accepted(self) -> bool:
        return self.residual <= self.bound


def verify_stationarity(rm: RateMatrix, prediction) -> StationarityCheck:
    """Max net probability flow ``|sum_m W(n<-m) P_m - W(m<-n) P_n|`` against ``1e-9 * max(W)``."""
    p = np.asarray(getattr(prediction, "populations", prediction), dtype=float)
    if p.size != rm.n_levels:
        raise ValidationError("population vector does not match rate matrix")
    if rm.n_edges == 0:
        return StationarityCheck(0.0, 0.0)
    inflow = np.bincount(rm.targets, weights=rm.values * p[rm.sources], minlength=rm.n_levels)
    outflow = np.bincount(rm.sources, weights=rm.values, minlength=rm.n_levels) * p
    return StationarityCheck(float(np.abs(inflow - outflow).max()), STATIONARITY_RTOL * rm.max_rate)
