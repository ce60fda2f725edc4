"""Dense Hermitian operators, eigenbases and Bohr-frequency decomposition.

Energies are in arbitrary energy units with hbar = 1, so every frequency is
an angular frequency measured in the same units.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import ValidationError

HERMITICITY_RTOL = 1e-12
UNITARITY_TOL = 1e-10
RESIDUAL_RTOL = 1e-9
# relative magnitude below which a component is not "significant" for the phase rule
PHASE_SIGNIFICANCE = 1e-8


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HermitianOperator:
    """Dense Hermitian matrix.

    Construction validates Hermiticity: ``||H - H^dagger||_F`` must not
    exceed ``1e-12 * ||H||_F``.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValidationError(f"operator must be a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("operator has non-finite entries")
        diff = a - a.conj().T
        norm = np.linalg.norm(a)
        if np.linalg.norm(diff) > HERMITICITY_RTOL * max(norm, np.finfo(float).tiny):
            raise ValidationError(
                f"operator is not Hermitian: max |H[i,j] - conj(H[j,i])| = {np.abs(diff).max():.3e}"
            )
        object.__setattr__(self, "entries", _readonly(a))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def diagonal(cls, values) -> HermitianOperator:
        return cls(np.diag(np.asarray(values, dtype=float)))

    def kron(self, other: HermitianOperator) -> HermitianOperator:
        return HermitianOperator(np.kron(self.entries, other.entries))

    def __add__(self, other: HermitianOperator) -> HermitianOperator:
        return HermitianOperator(self.entries + other.entries)

    def to_json(self) -> dict[str, Any]:
        return matrix_to_json(self.entries)

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> HermitianOperator:
        return cls(matrix_from_json(obj))


def matrix_to_json(a) -> dict[str, Any]:
    """Row-major ``[re, im]`` pairs with explicit dimension."""
    a = np.asarray(a, dtype=complex)
    return {
        "dim": int(a.shape[0]),
        "entries": [[[float(z.real), float(z.imag)] for z in row] for row in a],
    }


def matrix_from_json(obj: dict[str, Any]) -> np.ndarray:
    dim = int(obj["dim"])
    rows = obj["entries"]
    if len(rows) != dim or any(len(r) != dim for r in rows):
        raise ValidationError(f"matrix entries do not match declared dim {dim}")
    out = np.empty((dim, dim), dtype=complex)
    for i, row in enumerate(rows):
        for j, pair in enumerate(row):
            if len(pair) != 2:
                raise ValidationError(f"entry [{i}][{j}] must be a [re, im] pair")
            out[i, j] = complex(pair[0], pair[1])
    return out


@dataclass(frozen=True)
class EigenBasis:
    """Eigenvalues in ascending order with the eigenvectors as columns."""

    energies: np.ndarray
    vectors: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        v = np.asarray(self.vectors, dtype=complex)
        if e.ndim != 1 or v.shape != (e.size, e.size):
            raise ValidationError("energies and vectors have inconsistent shapes")
        if np.any(np.diff(e) < 0):
            raise ValidationError("energies must be sorted ascending")
        err = np.abs(v.conj().T @ v - np.eye(e.size)).max()
        if err > UNITARITY_TOL:
            raise ValidationError(f"eigenvector matrix is not unitary (deviation {err:.3e})")
        if self.labels is not None:
            if len(self.labels) != e.size:
                raise ValidationError("labels must have one entry per level")
            object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "energies", _readonly(e))
        object.__setattr__(self, "vectors", _readonly(v))

    @property
    def dim(self) -> int:
        return self.energies.size

    def to_eigenbasis(self, op) -> np.ndarray:
        """Matrix elements ``<m|A|n>`` in this basis."""
        a = op.entries if isinstance(op, HermitianOperator) else np.asarray(op)
        return self.vectors.conj().T @ a @ self.vectors


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    v = vectors.copy()
    for k in range(v.shape[1]):
        col = v[:, k]
        mag = np.abs(col)
        first = np.flatnonzero(mag > PHASE_SIGNIFICANCE * mag.max())[0]
        v[:, k] = col * (np.conj(col[first]) / mag[first])
    return v


def eigendecompose(h: HermitianOperator, labels: Sequence | None = None) -> EigenBasis:
    """Diagonalize ``h`` with a deterministic eigenvector phase.

    Each eigenvector is rotated so that its first significant component is
    real and positive. Raises :class:`ValidationError` if an eigenpair
    residual exceeds ``1e-9 * ||H||``.
    """
    if not isinstance(h, HermitianOperator):
        h = HermitianOperator(h)
    a = h.entries
    energies, vectors = np.linalg.eigh(a)
    vectors = _fix_phases(vectors)
    scale = max(np.linalg.norm(a, 2), np.finfo(float).tiny)
    resid = np.linalg.norm(a @ vectors - vectors * energies, axis=0).max()
    if resid > RESIDUAL_RTOL * scale:
        raise ValidationError(f"eigendecomposition residual {resid:.3e} exceeds bound")
    return EigenBasis(energies, vectors, labels)


@dataclass(frozen=True)
class SpectralComponent:
    """Part of an operator oscillating at one Bohr frequency.

    Stored sparsely: ``operator[rows[k], cols[k]] = values[k]``, with
    ``frequency ~ energies[cols] - energies[rows]``.
    """

    frequency: float
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    dim: int

    @property
    def operator(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        out[self.rows, self.cols] = self.values
        return out


def default_freq_tol(energies) -> float:
    scale = float(np.max(np.abs(energies))) if len(energies) else 0.0
    return 1e-9 * scale if scale > 0 else 1e-12


def bin_frequencies(freqs, freq_tol: float) -> np.ndarray:
    """Cluster labels for ``freqs``; values closer than ``freq_tol`` are merged transitively."""
    freqs = np.asarray(freqs, dtype=float)
    if freqs.size == 0:
        return np.zeros(0, dtype=int)
    order = np.argsort(freqs, kind="stable")
    # in one dimension, union-find over overlapping bins reduces to a sorted sweep
    breaks = np.diff(freqs[order]) > freq_tol
    labels_sorted = np.concatenate([[0], np.cumsum(breaks)])
    labels = np.empty_like(labels_sorted)
    labels[order] = labels_sorted
    return labels


def spectral_decompose(
    a,
    basis: EigenBasis,
    freq_tol: float | None = None,
    zero_tol: float | None = None,
) -> list[SpectralComponent]:
    """Split ``a`` into components ``A(w) = sum <m|A|n> |m><n|`` over ``e_n - e_m ~ w``.

    Matrix elements with magnitude at or below ``zero_tol`` (default
    ``1e-14 * max|A|``) are treated as structural zeros. Components are
    returned sorted by frequency; each frequency is the mean Bohr frequency
    of its members.
    """
    if freq_tol is None:
        freq_tol = default_freq_tol(basis.energies)
    if not freq_tol > 0:
        raise ValidationError(f"freq_tol must be positive, got {freq_tol}")
    op = a.entries if isinstance(a, HermitianOperator) else np.asarray(a, dtype=complex)
    if op.shape != (basis.dim, basis.dim):
        raise ValidationError(f"operator dim {op.shape} does not match basis dim {basis.dim}")
    ae = basis.to_eigenbasis(op)
    mag = np.abs(ae)
    if zero_tol is None:
        zero_tol = 1e-14 * mag.max() if mag.size else 0.0
    rows, cols = np.nonzero(mag > zero_tol)
    e = basis.energies
    freqs = e[cols] - e[rows]
    labels = bin_frequencies(freqs, freq_tol)
    components = []
    for lab in range(labels.max() + 1 if labels.size else 0):
        sel = labels == lab
        components.append(
            SpectralComponent(
                frequency=float(freqs[sel].mean()),
                rows=rows[sel],
                cols=cols[sel],
                values=ae[rows[sel], cols[sel]],
                dim=basis.dim,
            )
        )
    components.sort(key=lambda c: c.frequency)
    return components


@dataclass(frozen=True)
class CouplingChannel:
    """System-side operator of one independent bath channel."""

    operator: HermitianOperator
    name: str = "A"

    def components(self, basis: EigenBasis, freq_tol: float | None = None) -> list[SpectralComponent]:
        return spectral_decompose(self.operator, basis, freq_tol)
