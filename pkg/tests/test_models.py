import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from synchrotherm.errors import TruncationError, ValidationError
from synchrotherm.fock import FockTruncation
from synchrotherm.models import (
    PAULI_X,
    PAULI_Z,
    DispersiveSpec,
    NDModelSpec,
    branch_hamiltonian,
    build_dispersive,
    build_generic_composite,
    build_nd_model,
    coupling_matrix,
    dispersive_dense,
    effective_couplings,
    nd_dense_model,
    number,
    uncoupled_sideband_populations,
)
from synchrotherm.spectral_core import eigendecompose
from synchrotherm.validation import dense_cross_check

from conftest import random_hermitian


def test_uncoupled_composite_spectrum():
    ea, eb = np.array([0.0, 0.4, 1.1]), np.array([-0.2, 0.9])
    h, _ = build_generic_composite(np.diag(ea), np.diag(eb), np.zeros((6, 6)))
    expected = np.sort(np.add.outer(ea, eb).ravel())
    assert np.allclose(np.linalg.eigvalsh(h.entries), expected)


def test_subsystem_a_is_slow_index():
    h, ch = build_generic_composite(np.diag([0.0, 10.0]), np.diag([0.0, 1.0]), np.zeros((4, 4)), [PAULI_X])
    assert np.allclose(np.diag(h.entries).real, [0, 1, 10, 11])
    assert np.allclose(ch[0].operator.entries, np.kron(PAULI_X, np.eye(2)))


def test_generic_two_by_two_matches_dense(rng):
    ha, hb, v = random_hermitian(rng, 2), random_hermitian(rng, 2), random_hermitian(rng, 4)
    h, _ = build_generic_composite(ha, hb, v)
    dense = np.kron(ha, np.eye(2)) + np.kron(np.eye(2), hb) + v
    assert np.allclose(eigendecompose(h).energies, np.linalg.eigvalsh(dense), atol=1e-12)


def test_generic_dimension_errors():
    with pytest.raises(ValidationError):
        build_generic_composite(np.eye(2), np.eye(3), np.zeros((5, 5)))
    with pytest.raises(ValidationError):
        build_generic_composite(np.eye(2), np.eye(3), np.zeros((6, 6)), [np.eye(3)])


def test_generic_qubit_resonator_matches_dispersive():
    spec = DispersiveSpec(1.0, 5.0, 0.1, n_max=2)
    n = number(2)
    h, _ = build_generic_composite(-0.5 * PAULI_Z, 5.0 * n, 0.1 * np.kron(PAULI_Z, n))
    assert np.allclose(eigendecompose(h).energies, build_dispersive(spec).basis.energies, atol=1e-12)
    h2, _ = dispersive_dense(spec)
    assert np.allclose(h2.entries, h.entries)


def test_decoupled_nd_model():
    spec = NDModelSpec([0.0, 0.5, 1.7], [1.3], np.zeros((3, 1)), n_max=6)
    eig = build_nd_model(spec)
    for (p, (n,)), e in zip(eig.levels, eig.energies):
        assert e == pytest.approx(spec.level_energies[p] + n * 1.3)
    assert np.all(eig.displacements == 0)
    c = coupling_matrix(eig)
    for a, la in enumerate(eig.levels):
        for b, lb in enumerate(eig.levels):
            expected = float(la[0] != lb[0] and la[1] == lb[1])
            assert c[a, b] == expected


def test_shift_and_displacement_formulas():
    eig = build_nd_model(NDModelSpec([0.0, 2.0], [1.0], [[0.0], [0.5]], n_max=4))
    assert eig.shifted_levels[1] == pytest.approx(2.0 - 0.25)
    assert eig.displacements[1, 0] == pytest.approx(0.5)
    assert eig.energies[eig.index(1, (3,))] == pytest.approx(3 + 1.75)


def test_multimode_energies_and_level_count():
    spec = NDModelSpec([0.0, 1.0], [1.0, 1.7], [[0.2, 0.0], [0.5, 0.3]], n_max=(3, 2))
    eig = build_nd_model(spec)
    assert eig.n_levels == 2 * 4 * 3
    e = eig.energies[eig.index(1, (2, 1))]
    assert e == pytest.approx(2 * 1.0 + 1.7 + 1.0 - 0.25 / 1.0 - 0.09 / 1.7)
    capped = build_nd_model(NDModelSpec([0.0, 1.0], [1.0, 1.7], [[0.2, 0.0], [0.5, 0.3]], n_max=(3, 2), energy_cap=2.0))
    assert capped.n_levels < eig.n_levels
    assert all(np.dot(n, [1.0, 1.7]) <= 2.0 for _, n in capped.levels)


def test_branch_hamiltonian_is_displaced_oscillator():
    spec = NDModelSpec([0.0, 1.0], [1.2], [[0.0], [0.6]], n_max=40)
    e = np.linalg.eigvalsh(branch_hamiltonian(spec, 1))
    expected = np.arange(10) * 1.2 - 0.36 / 1.2
    assert np.abs(e[:10] - expected).max() <= 1e-9


def test_common_displacement_cancels():
    eig = build_nd_model(NDModelSpec([0.0, 0.6], [1.0], [[0.7], [0.7]], n_max=5))
    for (p, n), (q, m), w in effective_couplings(eig):
        assert p != q
        assert w == pytest.approx(float(n == m), abs=1e-14)


def test_effective_coupling_vacuum_overlap():
    eig = build_nd_model(NDModelSpec([0.0, 1.0], [1.0], [[0.0], [1.5]], n_max=8))
    weights = {(a, b): w for a, b, w in effective_couplings(eig)}
    assert abs(weights[((1, (0,)), (0, (0,)))]) == pytest.approx(math.exp(-1.125), rel=1e-13)
    assert all(abs(w) <= 1 + 1e-12 for w in weights.values())
    assert not any(a[0] == b[0] for a, b in weights)


def test_effective_couplings_truncation_error_names_level():
    eig = build_nd_model(NDModelSpec([0.0, 1.0], [1.0], [[0.0], [3.0]], n_max=12))
    with pytest.raises(TruncationError, match=r"level \(\d, \(\d+,\)\)"):
        effective_couplings(eig, FockTruncation(14))


def test_dispersive_energies_and_gap():
    flat = build_dispersive(DispersiveSpec(1.0, 5.0, 0.0, n_max=4))
    expected = sorted(s * 0.5 + 5.0 * n for s in (-1, 1) for n in range(5))
    assert np.allclose(flat.basis.energies, expected)
    model = build_dispersive(DispersiveSpec(1.0, 5.0, 0.1, n_max=6))
    labels = list(model.basis.labels)
    e = model.basis.energies
    assert e[labels.index((1, 2))] - e[labels.index((0, 2))] == pytest.approx(0.6, abs=1e-14)


def test_dispersive_coupling_selection_rule():
    model = build_dispersive(DispersiveSpec(1.0, 5.0, 0.1, n_max=3))
    a = model.basis.to_eigenbasis(model.channels[0].operator.entries)
    labels = model.basis.labels
    for i, (p, n) in enumerate(labels):
        for j, (q, m) in enumerate(labels):
            assert a[i, j] == pytest.approx(float(n == m and p != q))
    assert model.sideband_of(labels.index((1, 3))) == 3


def test_uncoupled_sideband_weights():
    lower, upper = uncoupled_sideband_populations(1.0, 2.0)
    assert upper == pytest.approx(1 / (1 + math.exp(2.0)))
    assert lower == pytest.approx(math.exp(2.0) / (1 + math.exp(2.0)))


def test_spec_validation():
    with pytest.raises(ValidationError):
        NDModelSpec([0.0], [1.0], [[0.0]])
    with pytest.raises(ValidationError):
        NDModelSpec([0.0, 1.0], [-1.0], [[0.0], [0.1]])
    with pytest.raises(ValidationError):
        NDModelSpec([0.0, 1.0], [1.0], [[0.0, 0.1], [0.1, 0.0]])
    with pytest.raises(ValidationError):
        DispersiveSpec(1.0, 0.0, 0.1)


def test_dense_pipeline_agrees_where_truncation_is_negligible():
    params = dict(level_energies=[0.0, 1.3], osc_freqs=[1.0], couplings=[[0.3], [0.8]], n_max=25)
    e_err, c_err = dense_cross_check(params, 10)
    assert e_err <= 1e-6 and c_err <= 1e-6


def test_dense_pipeline_at_n_max_20_holds_through_n_8():
    params = dict(level_energies=[0.0, 1.3], osc_freqs=[1.0], couplings=[[0.3], [0.8]], n_max=20)
    e_err, c_err = dense_cross_check(params, 8)
    assert e_err <= 1e-6 and c_err <= 1e-6


@pytest.mark.xfail(strict=True, reason="truncation at n_max=20 shifts the n=10 dense level by ~1e-4")
def test_dense_pipeline_n_max_20_through_n_10():
    params = dict(level_energies=[0.0, 1.3], osc_freqs=[1.0], couplings=[[0.3], [0.8]], n_max=20)
    e_err, c_err = dense_cross_check(params, 10)
    assert e_err <= 1e-6 and c_err <= 1e-6


def test_nd_dense_model_structure():
    spec = NDModelSpec([0.0, 1.0, 2.5], [1.0], [[0.0], [0.2], [0.4]], n_max=4)
    h, ch = nd_dense_model(spec)
    assert h.dim == 15
    assert len(ch) == 1
    sys_part = ch[0].operator.entries.real[::5, ::5]
    assert np.array_equal(sys_part, np.ones((3, 3)) - np.eye(3))


@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(0.5, 2.0))
def test_property_two_level_weights_bounded(x0, x1, omega):
    eig = build_nd_model(NDModelSpec([0.0, 0.9], [omega], [[x0], [x1]], n_max=6))
    c = coupling_matrix(eig)
    assert np.abs(c).max() <= 1 + 1e-12
    assert np.allclose(np.abs(c), np.abs(c.T), atol=1e-12)
