"""Pauli master equation integration and relaxation diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import RK45

from .errors import IntegrationError, ValidationError
from .rate_graph import RateMatrix, as_populations, component_partition, connectivity

EXACT_MAX_DIM = 512
# largest max/min ratio of the square-root Gibbs weights for the symmetric route
SIMILARITY_MAX_RATIO = 1e6
DRIFT_TOL = 1e-9


@dataclass(frozen=True)
class PopulationVector:
    values: np.ndarray
    time: float = 0.0

    def clamped(self) -> np.ndarray:
        """Values with roundoff negatives set to zero, for reporting."""
        return np.clip(self.values, 0.0, None)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    populations: np.ndarray
    distances: np.ndarray | None = None
    method: str = "exact"

    @property
    def samples(self) -> list[PopulationVector]:
        return [PopulationVector(p, float(t)) for t, p in zip(self.times, self.populations)]

    @property
    def final(self) -> np.ndarray:
        return self.populations[-1]


def distance_to(p, q) -> float:
    """Total variation distance ``(1/2) sum |P - Q|``."""
    p = np.asarray(getattr(p, "values", p), dtype=float)
    q = np.asarray(getattr(q, "values", q), dtype=float)
    if p.shape != q.shape:
        raise ValidationError(f"length mismatch: {p.size} vs {q.size}")
    return 0.5 * float(np.abs(p - q).sum())


def _check_times(times) -> np.ndarray:
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.ndim != 1 or t.size == 0:
        raise ValidationError("times must be a non-empty 1-d sequence")
    if t[0] < 0:
        raise ValidationError("times must start at or after 0")
    if np.any(np.diff(t) <= 0):
        raise ValidationError("times must be strictly increasing")
    return t


def _sqrt_gibbs(rm: RateMatrix) -> np.ndarray | None:
    if not math.isfinite(rm.beta) or rm.n_levels == 0:
        return None
    half = -0.5 * rm.beta * (rm.energies - rm.energies.min())
    if -half.min() > math.log(SIMILARITY_MAX_RATIO):
        return None
    return np.exp(half)


def symmetrized_generator(rm: RateMatrix) -> np.ndarray:
    """``S = Pi^{-1/2} G Pi^{1/2}``; symmetric exactly when detailed balance holds.

    Built from ``sqrt(W(n<-m) W(m<-n))`` off the diagonal, which avoids
    forming the Gibbs weights.
    """
    w = rm.dense()
    s = np.sqrt(w * w.T)
    s -= np.diag(w.sum(axis=0))
    return s


def gibbs_similarity_asymmetry(rm: RateMatrix) -> float:
    """Relative asymmetry of ``Pi^{-1/2} G Pi^{1/2}`` formed with explicit Gibbs weights."""
    d = _sqrt_gibbs(rm)
    if d is None:
        raise ValidationError("Gibbs weights are too ill-conditioned for an explicit similarity transform")
    g = rm.generator()
    s = g * d[None, :] / d[:, None]
    scale = np.abs(s).max()
    return float(np.abs(s - s.T).max() / scale) if scale > 0 else 0.0


def _exact_symmetric(rm, p0, times, d):
    g = rm.generator()
    s = g * d[None, :] / d[:, None]
    if np.abs(s - s.T).max() > 1e-9 * max(np.abs(s).max(), 1e-300):
        return None
    lam, u = np.linalg.eigh(0.5 * (s + s.T))
    lam = np.minimum(lam, 0.0)
    coeff = u.T @ (p0 / d)
    out = np.empty((times.size, p0.size))
    for k, t in enumerate(times):
        out[k] = d * (u @ (np.exp(lam * t) * coeff))
    return out


def _exact_expm(rm, p0, times):
    g = rm.generator()
    out = np.empty((times.size, p0.size))
    p = p0.copy()
    t_prev = 0.0
    for k, t in enumerate(times):
        if t > t_prev:
            p = scipy.linalg.expm(g * (t - t_prev)) @ p
        out[k] = p
        t_prev = t
    return out


def _runge_kutta(rm, p0, times, atol, rtol, max_steps):
    g = rm.generator()
    out = np.empty((times.size, p0.size))
    k = 0
    while k < times.size and times[k] == 0.0:
        out[k] = p0
        k += 1
    if k == times.size:
        return out
    solver = RK45(lambda t, y: g @ y, 0.0, p0, times[-1], rtol=rtol, atol=atol)
    steps = 0
    while k < times.size:
        msg = solver.step()
        steps += 1
        if solver.status == "failed":
            raise IntegrationError(f"integration failed at t={solver.t!r}: {msg}", achieved_time=solver.t)
        drift = abs(solver.y.sum() - 1.0)
        if drift > DRIFT_TOL:
            raise IntegrationError(
                f"normalization drift {drift:.3e} at t={solver.t!r}", achieved_time=solver.t_old
            )
        dense = solver.dense_output()
        while k < times.size and times[k] <= solver.t:
            out[k] = dense(times[k])
            k += 1
        if steps >= max_steps and k < times.size:
            raise IntegrationError(
                f"step budget of {max_steps} exhausted at t={solver.t!r}; problem too stiff, use method='exact'",
                achieved_time=solver.t,
            )
    return out


def evolve(
    rm: RateMatrix,
    initial,
    times,
    method: str = "auto",
    target=None,
    atol: float = 1e-10,
    rtol: float = 1e-8,
    max_steps: int = 200_000,
) -> Trajectory:
    """Integrate ``dP/dt = G P`` from ``P(0) = initial`` and sample at ``times``.

    ``method``:

    * ``"exact"``: action of ``exp(G t)`` through the eigendecomposition of
      the Gibbs-symmetrized generator, or ``scipy.linalg.expm`` when the
      Gibbs weights are too ill-conditioned for the similarity transform;
    * ``"rk"``: adaptive Dormand-Prince 5(4) with a normalization check
      after every step;
    * ``"auto"``: ``"exact"`` up to 512 levels, ``"rk"`` above.

    If ``target`` is given, the total variation distance to it is recorded
    at every sample.
    """
    t = _check_times(times)
    p0 = as_populations(initial, rm.n_levels)
    if method == "auto":
        method = "exact" if rm.n_levels <= EXACT_MAX_DIM else "rk"
    if rm.n_edges == 0:
        pops = np.tile(p0, (t.size, 1))
    elif method == "exact":
        d = _sqrt_gibbs(rm)
        pops = _exact_symmetric(rm, p0, t, d) if d is not None else None
        if pops is None:
            pops = _exact_expm(rm, p0, t)
    elif method == "rk":
        pops = _runge_kutta(rm, p0, t, atol, rtol, max_steps)
    else:
        raise ValidationError(f"unknown method {method!r}")

    drift = np.abs(pops.sum(axis=1) - 1.0)
    if drift.max() > DRIFT_TOL:
        bad = int(np.argmax(drift > DRIFT_TOL))
        raise IntegrationError(
            f"normalization drift {drift[bad]:.3e} at t={t[bad]!r}",
            achieved_time=float(t[bad - 1]) if bad else 0.0,
        )
    distances = None
    if target is not None:
        q = np.asarray(getattr(target, "populations", target), dtype=float)
        distances = np.array([distance_to(p, q) for p in pops])
    return Trajectory(t, pops, distances, method)


def relaxation_rate_estimate(rm: RateMatrix) -> float:
    """Spectral gap of the generator: its smallest nonzero decay rate.

    Requires a single rate-connected component and finite temperature.
    """
    if not math.isfinite(rm.beta):
        raise ValidationError("relaxation rate estimate requires finite temperature")
    report = connectivity(rm, include_degenerate=False)
    if not report.connected:
        raise ValidationError(
            f"rate graph has {report.n_components} components; estimate each component separately "
            "(e.g. restrict the rate matrix to one component)"
        )
    if rm.n_levels < 2:
        raise ValidationError("need at least two levels")
    lam = np.linalg.eigvalsh(symmetrized_generator(rm))
    return float(-lam[-2])


def restrict(rm: RateMatrix, members) -> RateMatrix:
    """Rate matrix on a subset of levels (edges leaving the subset are dropped)."""
    members = np.asarray(sorted(members), dtype=int)
    remap = -np.ones(rm.n_levels, dtype=int)
    remap[members] = np.arange(members.size)
    keep = (remap[rm.targets] >= 0) & (remap[rm.sources] >= 0)
    labels = tuple(rm.labels[k] for k in members) if rm.labels is not None else None
    pairs = tuple((int(remap[a]), int(remap[b])) for a, b in rm.degenerate_pairs if remap[a] >= 0 and remap[b] >= 0)
    return RateMatrix(
        rm.energies[members], remap[rm.targets[keep]], remap[rm.sources[keep]], rm.values[keep],
        rm.beta, rm.edge_threshold, rm.gap_tol, pairs, labels, rm.warnings,
    )


def null_space_steady_state(rm: RateMatrix, initial) -> np.ndarray:
    """Stationary state from the numerical null space of each rate-connected block.

    Independent of the closed-form Gibbs prediction: only the generator is
    used. Each block keeps the probability the initial state assigns to it.
    """
    p0 = as_populations(initial, rm.n_levels)
    g = rm.generator()
    out = np.zeros(rm.n_levels)
    for members in component_partition(rm.n_levels, rm.targets, rm.sources):
        idx = np.asarray(members)
        mass = p0[idx].sum()
        if idx.size == 1:
            out[idx] = mass
            continue
        # the smallest right singular vector spans the null space of a connected block
        v = np.linalg.svd(g[np.ix_(idx, idx)])[2][-1]
        v = v * np.sign(v.sum())
        out[idx] = mass * np.clip(v, 0.0, None) / np.clip(v, 0.0, None).sum()
    return out
