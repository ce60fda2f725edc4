"""Composite-system constructors.

Three families:

* generic tensor-product composites ``H_a + H_b + V_ab`` with bath operators
  acting on subsystem ``a``;
* an N-level system coupled to M oscillators through level-dependent
  displacements (non-demolition coupling), which has a closed-form
  eigensystem of displaced Fock states;
* a qubit dispersively coupled to a resonator, whose levels split into
  mutually unreachable photon-number sidebands.

In every composite the subsystem-``a`` index is the slow index of the
Kronecker product.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import TruncationError, ValidationError
from .fock import DEFAULT_LEAKAGE_TOL, FockTruncation, displacement_matrix, required_n_max
from .spectral_core import CouplingChannel, EigenBasis, HermitianOperator

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
# sigma_z |p> = (1 - 2p) |p>
PAULI_Z = np.diag([1.0, -1.0])


def annihilation(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1)


def number(n_max: int) -> np.ndarray:
    return np.diag(np.arange(n_max + 1, dtype=float))


def _as_op(x) -> HermitianOperator:
    return x if isinstance(x, HermitianOperator) else HermitianOperator(x)


def build_generic_composite(h_a, h_b, v_ab, a_ops: Sequence = ()) -> tuple[HermitianOperator, list[CouplingChannel]]:
    """Return ``H_a x 1 + 1 x H_b + V_ab`` and each ``A x 1_b`` as a coupling channel."""
    h_a, h_b, v_ab = _as_op(h_a), _as_op(h_b), _as_op(v_ab)
    da, db = h_a.dim, h_b.dim
    if v_ab.dim != da * db:
        raise ValidationError(f"V_ab has dim {v_ab.dim}, expected {da} * {db} = {da * db}")
    h = (
        np.kron(h_a.entries, np.eye(db))
        + np.kron(np.eye(da), h_b.entries)
        + v_ab.entries
    )
    channels = []
    for k, a in enumerate(a_ops):
        a = _as_op(a)
        if a.dim != da:
            raise ValidationError(f"coupling operator {k} has dim {a.dim}, expected subsystem-a dim {da}")
        channels.append(CouplingChannel(HermitianOperator(np.kron(a.entries, np.eye(db))), name=f"A{k}"))
    return HermitianOperator(h), channels


# ---------------------------------------------------------------------------
# N-level system x M displaced oscillators


@dataclass(frozen=True)
class NDModelSpec:
    """N-level system with energies ``level_energies`` coupled to M oscillators.

    ``couplings[p, i]`` is the strength with which level ``p`` displaces
    oscillator ``i``. ``n_max`` is either one integer or one per mode.
    ``energy_cap``, if given, drops Fock configurations whose oscillator
    energy ``sum_i n_i Omega_i`` exceeds it.
    """

    level_energies: np.ndarray
    osc_freqs: np.ndarray
    couplings: np.ndarray
    n_max: tuple = (10,)
    energy_cap: float | None = None
    leakage_tol: float = DEFAULT_LEAKAGE_TOL

    def __post_init__(self):
        eps = np.asarray(self.level_energies, dtype=float)
        omega = np.atleast_1d(np.asarray(self.osc_freqs, dtype=float))
        xi = np.asarray(self.couplings, dtype=float)
        if xi.ndim == 1:
            xi = xi.reshape(-1, 1) if omega.size == 1 else xi.reshape(1, -1)
        n_max = np.atleast_1d(np.asarray(self.n_max, dtype=int))
        if n_max.size == 1:
            n_max = np.repeat(n_max, omega.size)
        problems = []
        if eps.ndim != 1 or eps.size < 2:
            problems.append("level_energies must list at least 2 levels")
        if omega.size < 1 or np.any(~(omega > 0)):
            problems.append("osc_freqs must be positive")
        if xi.shape != (eps.size, omega.size):
            problems.append(f"couplings must have shape ({eps.size}, {omega.size}), got {xi.shape}")
        if n_max.size != omega.size or np.any(n_max < 1):
            problems.append("n_max must be >= 1 for each mode")
        if not np.all(np.isfinite(eps)) or not np.all(np.isfinite(xi)):
            problems.append("energies and couplings must be finite")
        if problems:
            raise ValidationError("; ".join(problems))
        object.__setattr__(self, "level_energies", eps)
        object.__setattr__(self, "osc_freqs", omega)
        object.__setattr__(self, "couplings", xi)
        object.__setattr__(self, "n_max", tuple(int(v) for v in n_max))

    @property
    def n_levels(self) -> int:
        return self.level_energies.size

    @property
    def n_modes(self) -> int:
        return self.osc_freqs.size


@dataclass(frozen=True)
class AnalyticEigensystem:
    """Closed-form eigenlevels ``|p, n>`` of an :class:`NDModelSpec`.

    ``levels[k] = (p, (n_1, ..., n_M))`` with energy ``energies[k]``.
    ``displacements[p, i] = xi[p, i] / Omega_i`` and
    ``shifted_levels[p] = eps_p - sum_i xi[p, i]^2 / Omega_i``.
    """

    spec: NDModelSpec
    levels: tuple
    energies: np.ndarray
    displacements: np.ndarray
    shifted_levels: np.ndarray
    fock: np.ndarray = field(repr=False)
    branch: np.ndarray = field(repr=False)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def index(self, p: int, n_vec) -> int:
        return self.levels.index((int(p), tuple(int(v) for v in np.atleast_1d(n_vec))))


def fock_box(n_max: Sequence[int], osc_freqs=None, energy_cap: float | None = None) -> list[tuple]:
    box = itertools.product(*(range(n + 1) for n in n_max))
    if energy_cap is None:
        return [tuple(v) for v in box]
    omega = np.asarray(osc_freqs, dtype=float)
    return [tuple(v) for v in box if float(np.dot(v, omega)) <= energy_cap * (1 + 1e-12)]


def build_nd_model(spec: NDModelSpec) -> AnalyticEigensystem:
    omega = spec.osc_freqs
    xi = spec.couplings
    alpha = xi / omega
    shifted = spec.level_energies - np.sum(xi**2 / omega, axis=1)
    box = fock_box(spec.n_max, omega, spec.energy_cap)
    fock = np.array(box, dtype=int).reshape(len(box), spec.n_modes)
    osc_energy = fock @ omega
    levels, energies, branch, rows = [], [], [], []
    for p in range(spec.n_levels):
        for k, n_vec in enumerate(box):
            levels.append((p, n_vec))
            energies.append(osc_energy[k] + shifted[p])
            branch.append(p)
            rows.append(fock[k])
    return AnalyticEigensystem(
        spec=spec,
        levels=tuple(levels),
        energies=np.asarray(energies),
        displacements=alpha,
        shifted_levels=shifted,
        fock=np.asarray(rows, dtype=int).reshape(len(levels), spec.n_modes),
        branch=np.asarray(branch, dtype=int),
    )


def coupling_matrix(eig: AnalyticEigensystem, fc_trunc: FockTruncation | None = None) -> np.ndarray:
    """Dense ``K x K`` matrix of ``<n_p|m_q>`` weights (zero on ``p == q`` blocks).

    The bath couples every pair of distinct levels ``p != q`` with a
    level-independent strength, so ``C[(p,n), (q,m)] = prod_i <n_i|D(a_ip - a_iq)|m_i>``.
    """
    spec = eig.spec
    k = eig.n_levels
    weights = np.zeros((k, k))
    tops = eig.fock.max(axis=0) if k else np.zeros(spec.n_modes, dtype=int)
    for p in range(spec.n_levels):
        rows = np.flatnonzero(eig.branch == p)
        for q in range(spec.n_levels):
            if p == q:
                continue
            cols = np.flatnonzero(eig.branch == q)
            block = np.ones((rows.size, cols.size))
            for i in range(spec.n_modes):
                dalpha = float(eig.displacements[p, i] - eig.displacements[q, i])
                top = int(tops[i])
                if fc_trunc is None:
                    trunc = FockTruncation(required_n_max(dalpha, range(top + 1), spec.leakage_tol), spec.leakage_tol)
                else:
                    trunc = fc_trunc
                table = displacement_matrix(dalpha, trunc)
                ok = np.zeros(top + 1, dtype=bool)
                lim = min(top, trunc.n_max)
                ok[: lim + 1] = table.certified[: lim + 1]
                if not ok.all():
                    bad = int(np.flatnonzero(~ok)[0])
                    offending = next(lv for lv in eig.levels if lv[0] in (p, q) and lv[1][i] == bad)
                    raise TruncationError(
                        f"level {offending}: Fock level {bad} of mode {i} not certified at "
                        f"n_max={trunc.n_max} (displacement difference {dalpha:g}); need n_max >= "
                        f"{required_n_max(dalpha, range(top + 1), trunc.leakage_tol)}",
                        required_n_max=required_n_max(dalpha, range(top + 1), trunc.leakage_tol),
                    )
                t = table.entries
                block *= t[np.ix_(eig.fock[rows, i], eig.fock[cols, i])]
            weights[np.ix_(rows, cols)] = block
    return weights


def effective_couplings(eig: AnalyticEigensystem, fc_trunc: FockTruncation | None = None) -> list[tuple]:
    """Sparse list ``((p, n), (q, m), weight)`` over all ordered pairs with ``p != q``.

    ``weight`` is the signed displaced-Fock overlap ``<n_p|m_q>``.
    """
    w = coupling_matrix(eig, fc_trunc)
    out = []
    for a, b in zip(*np.nonzero(w)):
        out.append((eig.levels[a], eig.levels[b], float(w[a, b])))
    return out


def nd_dense_model(spec: NDModelSpec) -> tuple[HermitianOperator, list[CouplingChannel]]:
    """The same model built explicitly on the truncated product space.

    Fock ``energy_cap`` is ignored; every mode keeps ``0..n_max``.
    """
    n_lv = spec.n_levels
    dims = [n + 1 for n in spec.n_max]
    db = int(np.prod(dims))

    def embed(op, mode):
        mats = [np.eye(d) for d in dims]
        mats[mode] = op
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    h_b = sum(spec.osc_freqs[i] * embed(number(spec.n_max[i]), i) for i in range(spec.n_modes))
    v = np.zeros((n_lv * db, n_lv * db))
    for p in range(n_lv):
        proj = np.zeros((n_lv, n_lv))
        proj[p, p] = 1.0
        for i in range(spec.n_modes):
            a = annihilation(spec.n_max[i])
            v += spec.couplings[p, i] * np.kron(proj, embed(a + a.T, i))
    a_op = np.ones((n_lv, n_lv)) - np.eye(n_lv)
    return build_generic_composite(np.diag(spec.level_energies), h_b, v, [a_op])


def branch_hamiltonian(spec: NDModelSpec, p: int) -> np.ndarray:
    """Effective oscillator Hamiltonian ``H_b + <p|V|p>`` for level ``p`` (single mode)."""
    if spec.n_modes != 1:
        raise ValidationError("branch_hamiltonian supports a single oscillator")
    n = spec.n_max[0]
    a = annihilation(n)
    return spec.osc_freqs[0] * number(n) + spec.couplings[p, 0] * (a + a.T)


# ---------------------------------------------------------------------------
# dispersive qubit-resonator


@dataclass(frozen=True)
class DispersiveSpec:
    """``-(eps_Q/2) sz + w_L a^dag a + g sz a^dag a`` with ``n <= n_max`` photons."""

    qubit_gap: float
    resonator_freq: float
    dispersive_shift: float
    n_max: int = 6

    def __post_init__(self):
        if not self.resonator_freq > 0:
            raise ValidationError(f"resonator_freq must be positive, got {self.resonator_freq}")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValidationError(f"n_max must be an integer >= 1, got {self.n_max}")
        object.__setattr__(self, "n_max", int(self.n_max))


@dataclass(frozen=True)
class DispersiveModel:
    spec: DispersiveSpec
    basis: EigenBasis
    channels: list
    hamiltonian: HermitianOperator = field(repr=False)

    def sideband_of(self, level: int) -> int:
        return self.basis.labels[level][1]


def dispersive_energy(spec: DispersiveSpec, p: int, n: int) -> float:
    sz = 1 - 2 * p
    return -0.5 * spec.qubit_gap * sz + spec.resonator_freq * n + spec.dispersive_shift * sz * n


def build_dispersive(spec: DispersiveSpec) -> DispersiveModel:
    """Eigenlevels ``|p, n>`` sorted by energy, labelled ``(p, n)``.

    The bath couples through ``sigma_x x 1``, which only connects ``|0,n>``
    and ``|1,n>``.
    """
    nb = spec.n_max + 1
    product_labels = [(p, n) for p in (0, 1) for n in range(nb)]
    e = np.array([dispersive_energy(spec, p, n) for p, n in product_labels])
    order = np.argsort(e, kind="stable")
    vectors = np.eye(2 * nb)[:, order]
    basis = EigenBasis(e[order], vectors, [product_labels[k] for k in order])
    h = HermitianOperator(np.diag(e))
    channel = CouplingChannel(HermitianOperator(np.kron(PAULI_X, np.eye(nb))), name="sigma_x")
    return DispersiveModel(spec, basis, [channel], h)


def dispersive_dense(spec: DispersiveSpec) -> tuple[HermitianOperator, list[CouplingChannel]]:
    n = number(spec.n_max)
    return build_generic_composite(
        -0.5 * spec.qubit_gap * PAULI_Z,
        spec.resonator_freq * n,
        spec.dispersive_shift * np.kron(PAULI_Z, n),
        [PAULI_X],
    )


def uncoupled_sideband_populations(qubit_gap: float, beta: float) -> tuple[float, float]:
    """Two-level Gibbs weights ``(lower, upper)`` for a sideband at ``g = 0``.

    ``1/(1 + e^{beta eps})`` for the upper qubit level and
    ``e^{beta eps}/(1 + e^{beta eps})`` for the lower one.
    """
    x = beta * qubit_gap
    upper = 0.5 * (1 - math.tanh(0.5 * x))
    return 1.0 - upper, upper
