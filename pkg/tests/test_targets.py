import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loqc_gates.errors import CatalogError, ShapeError
from loqc_gates.fock import FockState
from loqc_gates.targets import (
    CARTAN_POINTS,
    HADAMARD,
    CartanCoords,
    GateName,
    GateSpec,
    TargetGate,
    cartan_two_qubit,
    cartan_unitary,
    controlled_phase_matrix,
    dual_rail_basis,
    embed_target,
    gate_catalog,
    knill_frame,
    makhlin_invariants,
    single_photon_spec,
    target_gate,
)


def invariants_from_coords(c1, c2, c3):
    """Closed form of the local invariants in terms of Cartan coordinates."""
    cc = np.cos(c1) ** 2 * np.cos(c2) ** 2 * np.cos(c3) ** 2
    ss = np.sin(c1) ** 2 * np.sin(c2) ** 2 * np.sin(c3) ** 2
    g1 = cc - ss + 0.25j * np.sin(2 * c1) * np.sin(2 * c2) * np.sin(2 * c3)
    g2 = 4 * cc - 4 * ss - np.cos(2 * c1) * np.cos(2 * c2) * np.cos(2 * c3)
    return g1, g2


@pytest.mark.parametrize("name", [GateName.CNOT, GateName.CS90, GateName.B])
def test_catalog_gates_sit_at_their_cartan_points(name):
    g1, g2 = makhlin_invariants(target_gate(name).matrix)
    e1, e2 = invariants_from_coords(*CARTAN_POINTS[name].as_tuple())
    assert abs(g1 - e1) < 1e-12 and abs(g2 - e2) < 1e-12


def test_known_invariant_values():
    assert np.allclose(makhlin_invariants(np.eye(4)), (1, 3))
    assert np.allclose(makhlin_invariants(target_gate("cnot").matrix), (0, 1))
    assert np.allclose(makhlin_invariants(target_gate("b").matrix), (0, 0))


@settings(max_examples=40, deadline=None)
@given(c=st.tuples(*[st.floats(-3, 3)] * 3))
def test_invariants_match_closed_form(c):
    g1, g2 = makhlin_invariants(cartan_unitary(*c))
    e1, e2 = invariants_from_coords(*c)
    assert abs(g1 - e1) < 1e-10 and abs(g2 - e2) < 1e-10


@settings(max_examples=40, deadline=None)
@given(c=st.tuples(*[st.floats(-3, 3)] * 3))
def test_normalized_coords_are_locally_equivalent(c):
    n = CartanCoords(*c).normalized()
    assert np.pi / 2 + 1e-12 >= n.c1 >= n.c2 - 1e-12
    assert n.c2 + 1e-12 >= abs(n.c3)
    a = makhlin_invariants(cartan_unitary(*c))
    b = makhlin_invariants(cartan_unitary(*n.as_tuple()))
    assert abs(a[0] - b[0]) < 1e-9 and abs(a[1] - b[1]) < 1e-9


def test_cartan_two_qubit_label():
    t = cartan_two_qubit((np.pi / 2, 0, 0))
    assert t.n_qubits == 2 and t.label.startswith("cartan(")


def test_target_validation():
    with pytest.raises(ShapeError):
        TargetGate(2, np.eye(3))
    with pytest.raises(ValueError):
        TargetGate(1, np.array([[1, 1], [0, 1]]))


def test_unknown_gate():
    with pytest.raises(CatalogError):
        gate_catalog("swap")


def test_dual_rail_ordering():
    states = [s.occupations for s in dual_rail_basis(2)]
    assert states == [(1, 0, 1, 0), (1, 0, 0, 1), (0, 1, 1, 0), (0, 1, 0, 1)]


def test_embedded_target_is_isometric():
    t = embed_target(target_gate("toffoli"))
    assert np.allclose(t.entries.conj().T @ t.entries, np.eye(8))
    assert t.norm2() == pytest.approx(1)


def test_catalog_resources():
    assert gate_catalog("cnot").n_modes == 6
    assert gate_catalog("b").n_modes == 7
    tof = gate_catalog("toffoli")
    assert tof.n_modes == 9 and tof.total_photons == 6
    assert tof.measured_pattern == (1, 1, 1, 0, 0, 0)


def test_spec_rejects_photon_mismatch():
    t = target_gate("cnot")
    with pytest.raises(ValueError):
        GateSpec(t, 2, FockState((1, 1)), measured_pattern=(2, 1))
    with pytest.raises(ShapeError):
        GateSpec(t, 2, FockState((1,)))
    with pytest.raises(ShapeError):
        GateSpec(t, 2, FockState((1, 1)), measured_pattern=(1, 1, 0))


def test_single_photon_spec_defaults():
    assert single_photon_spec(target_gate("b")).n_ancilla_modes == 3
    one = single_photon_spec(TargetGate(1, HADAMARD, "H"))
    assert one.n_ancilla_modes == 0 and one.n_modes == 2


def _frame_diagonalizes(t):
    f = knill_frame(t)
    n = t.n_qubits
    local = np.ones((1, 1))
    for q in range(n):
        local = np.kron(local, f[2 * q : 2 * q + 2, 2 * q : 2 * q + 2])
    d = local @ t.matrix @ local.conj().T
    return np.allclose(d, np.diag(np.diag(d)))


def test_knill_frames():
    for name in ("cnot", "cs90", "toffoli"):
        assert knill_frame(target_gate(name)) is not None
        assert _frame_diagonalizes(target_gate(name))
    assert knill_frame(target_gate("b")) is None
    assert knill_frame(TargetGate(2, controlled_phase_matrix(np.pi / 3))) is not None
    # a single-qubit phase is not a two-body interaction
    assert knill_frame(TargetGate(2, np.diag([1, 1, -1, -1]).astype(complex))) is None
