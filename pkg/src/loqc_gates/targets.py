"""Target gates, dual-rail encoding and the catalog of gates studied here."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import expm

from .errors import CatalogError, ShapeError
from .fock import FockState, basis_dimension, enumerate_basis

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# rows are |00>,|01>,|10>,|11> expressed in the magic (Bell) basis
MAGIC = np.array(
    [[1, 0, 0, 1j], [0, 1j, 1, 0], [0, 1j, -1, 0], [1, 0, 0, -1j]], dtype=complex
) / np.sqrt(2)


@dataclass(frozen=True)
class CartanCoords:
    c1: float
    c2: float
    c3: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.c1, self.c2, self.c3)

    def normalized(self) -> "CartanCoords":
        """Representative in the Weyl chamber pi/2 >= c1 >= c2 >= |c3|.

        Uses the local symmetries c_k -> c_k + pi, simultaneous sign flip of
        two coordinates, and permutations.  c3 stays negative only for gates
        that are mirror images of a c3 > 0 gate.
        """
        c = [(x + np.pi / 2) % np.pi - np.pi / 2 for x in self.as_tuple()]
        negatives = sum(x < 0 for x in c)
        c = sorted((abs(x) for x in c), reverse=True)
        # at c1 = pi/2 a lone sign flip is absorbed by c1 -> c1 - pi
        if negatives % 2 and c[2] > 1e-15 and not np.isclose(c[0], np.pi / 2):
            c[2] = -c[2]
        return CartanCoords(*c)


class GateName(str, Enum):
    CNOT = "cnot"
    CS90 = "cs90"
    B = "b"
    TOFFOLI = "toffoli"


@dataclass(frozen=True)
class TargetGate:
    n_qubits: int
    matrix: np.ndarray = field(repr=False)
    label: str = "custom"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = 2**self.n_qubits
        if m.shape != (d, d):
            raise ShapeError(f"{self.n_qubits}-qubit target needs a {d}x{d} matrix, got {m.shape}")
        if not np.allclose(m.conj().T @ m, np.eye(d), atol=1e-12, rtol=0):
            raise ValueError(f"target {self.label!r} is not unitary")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits


def cartan_unitary(c1: float, c2: float, c3: float) -> np.ndarray:
    h = c1 * np.kron(PAULI_X, PAULI_X) + c2 * np.kron(PAULI_Y, PAULI_Y) + c3 * np.kron(PAULI_Z, PAULI_Z)
    return expm(0.5j * h)


def cartan_two_qubit(c: CartanCoords | tuple[float, float, float], label: str | None = None) -> TargetGate:
    """Two-qubit gate exp(i/2 (c1 XX + c2 YY + c3 ZZ))."""
    if not isinstance(c, CartanCoords):
        c = CartanCoords(*c)
    if label is None:
        label = "cartan({:.6g},{:.6g},{:.6g})".format(*c.as_tuple())
    return TargetGate(2, cartan_unitary(*c.as_tuple()), label)


def makhlin_invariants(u: np.ndarray) -> tuple[complex, float]:
    """Local invariants (G1, G2) of a two-qubit unitary.

    Two gates are equivalent up to single-qubit operations iff their
    invariants agree.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4):
        raise ShapeError("local invariants are defined for 4x4 unitaries")
    ub = MAGIC.conj().T @ u @ MAGIC
    m = ub.T @ ub
    det = np.linalg.det(u)
    tr = np.trace(m)
    g1 = tr**2 / (16 * det)
    g2 = (tr**2 - np.trace(m @ m)) / (4 * det)
    return complex(g1), float(g2.real)


def cnot_matrix() -> np.ndarray:
    m = np.eye(4, dtype=complex)
    m[[2, 3]] = m[[3, 2]]
    return m


def controlled_phase_matrix(theta: float) -> np.ndarray:
    return np.diag([1, 1, 1, np.exp(1j * theta)]).astype(complex)


def toffoli_matrix() -> np.ndarray:
    m = np.eye(8, dtype=complex)
    m[[6, 7]] = m[[7, 6]]
    return m


def b_gate_matrix() -> np.ndarray:
    return cartan_unitary(np.pi / 2, np.pi / 4, 0.0)


CARTAN_POINTS = {
    GateName.CNOT: CartanCoords(np.pi / 2, 0.0, 0.0),
    GateName.CS90: CartanCoords(np.pi / 4, 0.0, 0.0),
    GateName.B: CartanCoords(np.pi / 2, np.pi / 4, 0.0),
}


def dual_rail_basis(n_qubits: int) -> list[FockState]:
    """Computational Fock states, ordered by the binary value of the register.

    Qubit 0 is the most significant bit.  Logical 0 (spin up) puts the photon
    in the first mode of the pair.
    """
    if n_qubits < 1:
        raise ValueError("need at least one qubit")
    states = []
    for value in range(2**n_qubits):
        occ: list[int] = []
        for q in range(n_qubits):
            bit = (value >> (n_qubits - 1 - q)) & 1
            occ += [0, 1] if bit else [1, 0]
        states.append(FockState(tuple(occ)))
    return states


def computational_rows(n_qubits: int) -> np.ndarray:
    """Positions of the dual-rail states inside the full Fock basis of the computational modes."""
    basis = enumerate_basis(2 * n_qubits, n_qubits)
    return np.array([basis.position(s) for s in dual_rail_basis(n_qubits)])


HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def knill_frame(t: TargetGate, atol: float = 1e-10) -> np.ndarray | None:
    """Local mode frame in which ``t`` is a pure phase on |1...1>, if one exists.

    Tries the identity or a Hadamard on every qubit pair.  In that frame the
    "0" mode of each qubit can be left non-interacting.  Returns the
    2n x 2n block-diagonal frame, or None when no such frame exists.
    """
    from itertools import product

    n = t.n_qubits
    for choice in product((False, True), repeat=n):
        local = np.ones((1, 1), dtype=complex)
        for h in choice:
            local = np.kron(local, HADAMARD if h else np.eye(2))
        d = local @ t.matrix @ local.conj().T
        phases = np.diag(d)
        if not np.allclose(d, np.diag(phases), atol=atol):
            continue
        if np.allclose(phases[:-1], phases[0], atol=atol) and not np.isclose(phases[-1], phases[0], atol=atol):
            frame = np.eye(2 * n, dtype=complex)
            for q, h in enumerate(choice):
                if h:
                    frame[2 * q : 2 * q + 2, 2 * q : 2 * q + 2] = HADAMARD
            return frame
    return None


def embed_target(t: TargetGate):
    """Rectangular map sending each dual-rail input to the target's output column."""
    from .contraction import ContractionMap

    d_out = basis_dimension(2 * t.n_qubits, t.n_qubits)
    entries = np.zeros((d_out, t.dim), dtype=complex)
    entries[computational_rows(t.n_qubits)] = t.matrix
    return ContractionMap(entries, t.n_qubits)


@dataclass(frozen=True)
class GateSpec:
    """Target plus the optical resources used to implement it.

    ``measured_pattern`` covers the ancilla modes followed by the vacuum
    modes.  The search matrix only spans computational and ancilla modes;
    vacuum modes appear through dilation.
    """

    target: TargetGate
    n_ancilla_modes: int
    ancilla_occupations: FockState
    n_vacuum_modes: int = 0
    measured_pattern: tuple[int, ...] | None = None

    def __post_init__(self):
        anc = self.ancilla_occupations
        if not isinstance(anc, FockState):
            anc = FockState(tuple(anc))
            object.__setattr__(self, "ancilla_occupations", anc)
        if anc.n_modes != self.n_ancilla_modes:
            raise ShapeError(
                f"ancilla occupations {anc.occupations} do not cover {self.n_ancilla_modes} modes"
            )
        if self.n_vacuum_modes < 0:
            raise ValueError("n_vacuum_modes must be >= 0")
        pattern = self.measured_pattern
        if pattern is None:
            pattern = anc.occupations + (0,) * self.n_vacuum_modes
        pattern = tuple(int(k) for k in pattern)
        if len(pattern) != self.n_ancilla_modes + self.n_vacuum_modes:
            raise ShapeError(
                f"measured pattern {pattern} must cover {self.n_ancilla_modes + self.n_vacuum_modes} modes"
            )
        if any(k < 0 for k in pattern):
            raise ValueError(f"negative count in measured pattern {pattern}")
        if sum(pattern) != anc.n_photons:
            raise ValueError(
                f"measured pattern {pattern} holds {sum(pattern)} photons, ancillas inject {anc.n_photons}"
            )
        object.__setattr__(self, "measured_pattern", pattern)

    @property
    def n_qubits(self) -> int:
        return self.target.n_qubits

    @property
    def n_comp_modes(self) -> int:
        return 2 * self.target.n_qubits

    @property
    def m_c(self) -> int:
        return self.target.n_qubits

    @property
    def m_a(self) -> int:
        return self.ancilla_occupations.n_photons

    @property
    def total_photons(self) -> int:
        return self.m_c + self.m_a

    @property
    def n_modes(self) -> int:
        """Size of the search matrix U (computational plus ancilla modes)."""
        return self.n_comp_modes + self.n_ancilla_modes

    @property
    def d_c(self) -> int:
        return self.target.dim

    @property
    def d_out(self) -> int:
        return basis_dimension(self.n_comp_modes, self.m_c)

    def key(self) -> tuple:
        return (self.n_qubits, self.ancilla_occupations.occupations, self.measured_pattern)


def _single_photon_ancillas(target: TargetGate, n_ancilla: int, n_vacuum: int) -> GateSpec:
    return GateSpec(target, n_ancilla, FockState((1,) * n_ancilla), n_vacuum_modes=n_vacuum)


def single_photon_spec(target: TargetGate, n_ancillas: int | None = None) -> GateSpec:
    """Custom target with single-photon ancillas, each detected as injected.

    Defaults to three ancillas for multi-qubit targets, enough for any
    two-qubit gate, and none for a single qubit.
    """
    if n_ancillas is None:
        n_ancillas = 3 if target.n_qubits > 1 else 0
    return _single_photon_ancillas(target, n_ancillas, n_ancillas)


def gate_name(name: GateName | str) -> GateName:
    if isinstance(name, GateName):
        return name
    try:
        return GateName(str(name).lower())
    except ValueError:
        raise CatalogError(f"unknown gate {name!r}; choose from {[g.value for g in GateName]}") from None


def target_gate(name: GateName | str) -> TargetGate:
    name = gate_name(name)
    if name is GateName.CNOT:
        return TargetGate(2, cnot_matrix(), "CNOT")
    if name is GateName.CS90:
        return TargetGate(2, controlled_phase_matrix(np.pi / 2), "CS90")
    if name is GateName.B:
        return TargetGate(2, b_gate_matrix(), "B")
    return TargetGate(3, toffoli_matrix(), "TOFFOLI")


def gate_catalog(name: GateName | str) -> GateSpec:
    """Resources for the catalog gates: single-photon ancillas, detected as injected."""
    name = gate_name(name)
    target = target_gate(name)
    if name is GateName.CNOT:
        return _single_photon_ancillas(target, 2, 0)
    if name is GateName.CS90:
        return _single_photon_ancillas(target, 2, 2)
    if name is GateName.B:
        return _single_photon_ancillas(target, 3, 3)
    return _single_photon_ancillas(target, 3, 3)
