import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from synchrotherm.errors import ValidationError
from synchrotherm.spectral_core import (
    CouplingChannel,
    EigenBasis,
    HermitianOperator,
    bin_frequencies,
    eigendecompose,
    matrix_from_json,
    spectral_decompose,
)

from conftest import random_hermitian


def brute_force_components(a_eig, energies, tol):
    """Element-by-element binning: each element joins the first bin within tol of its seed."""
    bins = []
    for m in range(len(energies)):
        for n in range(len(energies)):
            if abs(a_eig[m, n]) == 0:
                continue
            w = energies[n] - energies[m]
            for b in bins:
                if abs(b["seed"] - w) <= tol:
                    b["elems"].append((m, n))
                    break
            else:
                bins.append({"seed": w, "elems": [(m, n)]})
    return bins


def test_rejects_non_hermitian_with_asymmetry_in_message():
    with pytest.raises(ValidationError, match="2.000e-01"):
        HermitianOperator(np.array([[0.0, 1.0], [1.2, 0.0]]))


def test_accepts_roundoff_asymmetry():
    h = np.array([[1.0, 0.5], [0.5 + 1e-15, 2.0]])
    assert HermitianOperator(h).dim == 2


def test_entries_are_read_only():
    h = HermitianOperator(np.eye(2))
    with pytest.raises(ValueError):
        h.entries[0, 0] = 5


def test_diagonal_input_gives_identity_basis():
    basis = eigendecompose(HermitianOperator.diagonal([0.0, 1.0]))
    assert np.allclose(basis.energies, [0.0, 1.0])
    assert np.allclose(basis.vectors, np.eye(2))


def test_pauli_x_eigenvectors_follow_phase_convention():
    basis = eigendecompose(HermitianOperator(np.array([[0.0, 1.0], [1.0, 0.0]])))
    assert np.allclose(basis.energies, [-1.0, 1.0])
    s = 1 / np.sqrt(2)
    assert np.allclose(basis.vectors[:, 0], [s, -s])
    assert np.allclose(basis.vectors[:, 1], [s, s])


def test_random_reconstruction(rng):
    h = random_hermitian(rng, 6)
    b = eigendecompose(HermitianOperator(h))
    rebuilt = b.vectors @ np.diag(b.energies) @ b.vectors.conj().T
    assert np.abs(rebuilt - h).max() <= 1e-9
    assert np.abs(b.vectors.conj().T @ b.vectors - np.eye(6)).max() <= 1e-10
    assert np.all(np.diff(b.energies) >= 0)


def test_first_significant_component_is_real_positive(rng):
    b = eigendecompose(HermitianOperator(random_hermitian(rng, 5)))
    for k in range(5):
        v = b.vectors[:, k]
        first = v[np.flatnonzero(np.abs(v) > 1e-8 * np.abs(v).max())[0]]
        assert abs(first.imag) < 1e-14 and first.real > 0


def test_eigenbasis_rejects_unsorted_and_non_unitary():
    with pytest.raises(ValidationError):
        EigenBasis(np.array([1.0, 0.0]), np.eye(2))
    with pytest.raises(ValidationError):
        EigenBasis(np.array([0.0, 1.0]), 1.1 * np.eye(2))


def test_identity_has_single_zero_frequency_component():
    b = eigendecompose(HermitianOperator.diagonal([0.0, 0.3, 1.0]))
    comps = spectral_decompose(np.eye(3), b)
    assert len(comps) == 1
    assert comps[0].frequency == 0.0
    assert np.allclose(comps[0].operator, np.eye(3))


def test_two_level_pauli_x_selection_rule():
    eps = 0.7
    b = eigendecompose(HermitianOperator.diagonal([0.0, eps]))
    comps = spectral_decompose(np.array([[0.0, 1.0], [1.0, 0.0]]), b)
    assert [c.frequency for c in comps] == pytest.approx([-eps, eps])
    for c in comps:
        assert c.rows.size == 1 and c.rows[0] != c.cols[0]


def test_random_pair_matches_brute_force_binning(rng):
    h = random_hermitian(rng, 4)
    a = random_hermitian(rng, 4)
    b = eigendecompose(HermitianOperator(h))
    comps = spectral_decompose(a, b, freq_tol=1e-9)
    a_eig = b.vectors.conj().T @ a @ b.vectors
    oracle = brute_force_components(a_eig, b.energies, 1e-9)
    assert len(comps) == len(oracle) <= 16
    assert sorted(len(c.rows) for c in comps) == sorted(len(o["elems"]) for o in oracle)
    total = sum(c.operator for c in comps)
    assert np.abs(total - a_eig).max() <= 1e-10


def test_degenerate_gaps_share_a_component():
    # equally spaced ladder: every nearest-neighbour gap lands in one bin
    b = eigendecompose(HermitianOperator.diagonal([0.0, 1.0, 2.0, 3.0]))
    x = np.diag(np.ones(3), 1) + np.diag(np.ones(3), -1)
    freqs = [c.frequency for c in spectral_decompose(x, b)]
    assert freqs == pytest.approx([-1.0, 1.0])


def test_adjoint_pairing(rng):
    b = eigendecompose(HermitianOperator(random_hermitian(rng, 5)))
    comps = {round(c.frequency, 8): c.operator for c in spectral_decompose(random_hermitian(rng, 5), b)}
    for w, op in comps.items():
        assert np.allclose(comps[round(-w, 8) + 0.0], op.conj().T, atol=1e-12)


def test_rejects_nonpositive_tolerance_and_dim_mismatch():
    b = eigendecompose(HermitianOperator.diagonal([0.0, 1.0]))
    with pytest.raises(ValidationError):
        spectral_decompose(np.eye(2), b, freq_tol=0.0)
    with pytest.raises(ValidationError):
        spectral_decompose(np.eye(3), b)


def test_transitive_binning():
    labels = bin_frequencies([0.0, 0.8, 1.6, 5.0], 1.0)
    assert labels.tolist() == [0, 0, 0, 1]


def test_json_round_trip(rng):
    h = HermitianOperator(random_hermitian(rng, 3))
    again = HermitianOperator.from_json(json.loads(json.dumps(h.to_json())))
    assert np.array_equal(again.entries, h.entries)
    with pytest.raises(ValidationError):
        matrix_from_json({"dim": 2, "entries": [[[1, 0]]]})


def test_channel_components_reconstruct():
    h = HermitianOperator.diagonal([0.0, 0.4, 1.3])
    ch = CouplingChannel(HermitianOperator(np.ones((3, 3))))
    b = eigendecompose(h)
    assert np.allclose(sum(c.operator for c in ch.components(b)), np.ones((3, 3)))


@given(st.integers(2, 7), st.integers(0, 2**32 - 1))
def test_property_residual_and_reconstruction(n, seed):
    r = np.random.default_rng(seed)
    h = random_hermitian(r, n, scale=r.uniform(0.1, 10))
    b = eigendecompose(HermitianOperator(h))
    resid = np.linalg.norm(h @ b.vectors - b.vectors * b.energies, axis=0).max()
    assert resid <= 1e-9 * np.linalg.norm(h, 2)
    a = random_hermitian(r, n)
    total = sum(c.operator for c in spectral_decompose(a, b))
    assert np.abs(total - b.vectors.conj().T @ a @ b.vectors).max() <= 1e-10
