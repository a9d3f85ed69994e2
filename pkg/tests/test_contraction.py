import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from loqc_gates.contraction import (
    ContractionMap,
    build_contraction,
    dilate,
    evaluate,
    fidelity,
    halmos_dilation,
    infidelity,
    normalize,
    success,
    success_bounds,
    svd_profile,
)
from loqc_gates.errors import ContractionViolation, FidelityUndefinedError, NormError, ShapeError
from loqc_gates.fock import FockState, enumerate_basis, expansion_oracle
from loqc_gates.targets import GateName, dual_rail_basis, embed_target, gate_catalog

CATALOG = [g.value for g in GateName]


def random_contraction(n, seed):
    rng = np.random.default_rng(seed)
    return normalize(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))


def projector_oracle(u, spec):
    """Post-selected map from full output vectors: keep outputs whose ancilla part matches."""
    n = u.shape[0]
    n_comp = spec.n_comp_modes
    pattern = spec.measured_pattern[: n - n_comp]
    pattern = pattern + (0,) * (n - n_comp - len(pattern))
    extra = FockState((0,) * (n - spec.n_modes))
    comp_basis = enumerate_basis(n_comp, spec.m_c)
    cols = []
    for s in dual_rail_basis(spec.n_qubits):
        full = expansion_oracle(u, s + spec.ancilla_occupations + extra)
        col = np.zeros(comp_basis.dim, dtype=complex)
        for occ, amp in zip(full.basis.states, full.amplitudes):
            if occ.occupations[n_comp:] == pattern:
                col[comp_basis.position(occ.occupations[:n_comp])] = amp
        cols.append(col)
    return np.column_stack(cols)


@pytest.mark.parametrize("gate", CATALOG)
def test_builder_matches_projector_oracle(gate):
    spec = gate_catalog(gate)
    u = random_contraction(spec.n_modes, 11)
    a = build_contraction(u, spec).entries
    assert np.abs(a - projector_oracle(u, spec)).max() < 1e-10


def test_builder_matches_oracle_with_vacuum_modes():
    spec = gate_catalog("cs90")
    u = unitary_group.rvs(spec.n_modes + 2, random_state=5)
    a = build_contraction(u, spec).entries
    assert np.abs(a - projector_oracle(u, spec)).max() < 1e-10


def test_identity_vs_cnot():
    spec = gate_catalog("cnot")
    a = build_contraction(np.eye(spec.n_modes), spec)
    t = embed_target(spec.target)
    # identity passes every input unchanged; overlap with CNOT is |Tr(CNOT)|^2/16
    assert fidelity(a, t) == pytest.approx(0.25, abs=1e-12)
    assert a.norm2() == pytest.approx(1.0)


def test_target_itself_has_unit_fidelity():
    spec = gate_catalog("b")
    t = embed_target(spec.target)
    assert fidelity(t, t) == pytest.approx(1.0, abs=1e-14)
    assert infidelity(t, t) < 1e-30


def test_infidelity_agrees_with_fidelity():
    spec = gate_catalog("cs90")
    a = build_contraction(random_contraction(spec.n_modes, 2), spec)
    t = embed_target(spec.target)
    assert infidelity(a, t) == pytest.approx(1 - fidelity(a, t), abs=1e-14)


def test_zero_map_fidelity_is_an_error():
    spec = gate_catalog("cnot")
    zero = ContractionMap(np.zeros((10, 4)), 2)
    with pytest.raises(FidelityUndefinedError):
        fidelity(zero, embed_target(spec.target))
    with pytest.raises(NormError):
        normalize(np.zeros((3, 3)))


def test_shape_checks():
    with pytest.raises(ShapeError):
        ContractionMap(np.zeros((4, 4)), 2)
    with pytest.raises(ShapeError):
        build_contraction(np.eye(3), gate_catalog("cnot"))


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 10**6),
    scale=st.floats(0.05, 20),
    phase=st.floats(0, 2 * np.pi),
    gate=st.sampled_from(["cnot", "cs90", "b"]),
)
def test_projective_invariance(seed, scale, phase, gate):
    spec = gate_catalog(gate)
    u = random_contraction(spec.n_modes, seed)
    c = scale * np.exp(1j * phase)
    m1 = evaluate(u, spec)
    m2 = evaluate(c * u, spec)
    assert abs(m1.fidelity - m2.fidelity) < 1e-10
    assert abs(m1.success - m2.success) < 1e-10
    # success of the raw map with the norm rescaling
    a = build_contraction(c * u, spec)
    assert abs(success(a, c * u, spec.total_photons) - m1.success) < 1e-10
    # fidelity of a rescaled map
    t = embed_target(spec.target)
    assert abs(fidelity(a.scaled(3 - 2j), t) - m1.fidelity) < 1e-10


def test_success_bounds_bracket_success():
    spec = gate_catalog("b")
    m = evaluate(random_contraction(spec.n_modes, 4), spec)
    assert m.s_min <= m.success <= m.s_max
    a = build_contraction(normalize(random_contraction(spec.n_modes, 4)), spec)
    lo, hi = success_bounds(a)
    assert lo == pytest.approx(m.s_min) and hi == pytest.approx(m.s_max)


def test_svd_profile():
    nsv, k = svd_profile(unitary_group.rvs(5, random_state=1))
    assert np.allclose(nsv, 1) and k == 0
    nsv, k = svd_profile(np.diag([2.0, 2.0, 1.0, 0.5]))
    assert nsv == (1.0, 1.0, 0.5, 0.25) and k == 2
    nsv, k = svd_profile(np.diag([1.0, 1 - 1e-6, 0.9]), coalescence_tol=1e-4)
    assert k == 1


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), gate=st.sampled_from(["cnot", "cs90", "b"]))
def test_dilation_round_trip(seed, gate):
    spec = gate_catalog(gate)
    u = random_contraction(spec.n_modes, seed)
    w = dilate(u)
    assert np.abs(w.conj().T @ w - np.eye(w.shape[0])).max() < 1e-10
    assert np.allclose(w[: u.shape[0], : u.shape[0]], u)
    a_u = build_contraction(u, spec).entries
    a_w = build_contraction(w, spec).entries
    assert np.abs(a_u - a_w).max() < 1e-10
    _, k = svd_profile(u)
    assert w.shape[0] == u.shape[0] + k


def test_dilation_of_unitary_adds_nothing():
    u = unitary_group.rvs(4, random_state=0)
    assert dilate(u).shape == (4, 4)


def test_dilation_rejects_norm_above_one():
    with pytest.raises(ContractionViolation):
        dilate(2 * np.eye(3))
    with pytest.raises(ContractionViolation):
        halmos_dilation(2 * np.eye(3))


def test_halmos_dilation():
    u = random_contraction(5, 9)
    w = halmos_dilation(u)
    assert np.abs(w.conj().T @ w - np.eye(10)).max() < 1e-10
    assert np.allclose(w[:5, :5], u)
