"""Post-selected contraction maps and their quality measures.

Inputs are a dual-rail computational state plus the ancilla photons; the
ancilla (and vacuum) outputs are projected onto the measured photon
pattern.  What remains is a rectangular map from the 2^n computational
states to all states of n photons in the 2n computational modes.

Inner products between maps are normalized as Tr(A^dag B) / D_c.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .errors import ContractionViolation, FidelityUndefinedError, NormError, ShapeError
from .fock import FockState, basis_dimension, enumerate_basis, factorial_norm, gathered_permanents
from .targets import GateSpec, dual_rail_basis, embed_target

COALESCENCE_TOL = 1e-4


@dataclass(frozen=True)
class ContractionMap:
    entries: np.ndarray = field(repr=False)
    m_c: int

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        expected = (basis_dimension(2 * self.m_c, self.m_c), 2**self.m_c)
        if a.shape != expected:
            raise ShapeError(f"contraction map for {self.m_c} photons must be {expected}, got {a.shape}")
        object.__setattr__(self, "entries", a)

    @property
    def d_c(self) -> int:
        return 2**self.m_c

    def inner(self, other: "ContractionMap") -> complex:
        return complex(np.vdot(self.entries, other.entries)) / self.d_c

    def norm2(self) -> float:
        return float(np.vdot(self.entries, self.entries).real) / self.d_c

    def scaled(self, c: complex) -> "ContractionMap":
        return ContractionMap(c * self.entries, self.m_c)


@dataclass(frozen=True)
class QualityMetrics:
    fidelity: float
    success: float
    s_min: float
    s_max: float
    nsv: tuple[float, ...]
    implied_vacuum_modes: int
    infidelity: float

    def as_dict(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "delta": self.infidelity,
            "success": self.success,
            "s_min": self.s_min,
            "s_max": self.s_max,
            "nsv": list(self.nsv),
            "implied_vacuum_modes": self.implied_vacuum_modes,
        }


class ContractionPlan:
    """Index bookkeeping for evaluating A(U) and its derivative for one gate spec.

    Every entry A[k, j] is perm(U[rows_j][:, cols_k]) times a factorial
    normalization; rows_j lists the input mode of every photon of input j
    and cols_k the output mode of every photon of output k.
    """

    def __init__(self, spec: GateSpec, n_modes: int):
        extra = n_modes - spec.n_modes
        if extra < 0:
            raise ShapeError(f"{n_modes}-mode matrix is too small for a spec with {spec.n_modes} modes")
        pattern = spec.measured_pattern[: spec.n_ancilla_modes + extra]
        pattern = pattern + (0,) * (spec.n_ancilla_modes + extra - len(pattern))
        if sum(pattern) != spec.m_a:
            raise ShapeError("measured photons sit on vacuum modes that the matrix does not contain")
        self.n_modes = n_modes
        self.m_c = spec.m_c
        ancilla = spec.ancilla_occupations + FockState((0,) * extra)
        self.inputs = [s + ancilla for s in dual_rail_basis(spec.n_qubits)]
        comp_basis = enumerate_basis(spec.n_comp_modes, spec.m_c)
        measured = FockState(pattern)
        self.outputs = [s + measured for s in comp_basis.states]
        self.rows = np.array([s.mode_list() for s in self.inputs], dtype=np.int64)
        self.cols = np.array([s.mode_list() for s in self.outputs], dtype=np.int64)
        self.norm = 1.0 / np.outer(
            [factorial_norm(s) for s in self.outputs], [factorial_norm(s) for s in self.inputs]
        )

    def amplitudes(self, u: np.ndarray) -> np.ndarray:
        return gathered_permanents(u, self.rows, self.cols) * self.norm

    def amplitudes_and_minors(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """A(U) plus the raw minor permanents needed by ``pullback``."""
        perm, minors = gathered_permanents(u, self.rows, self.cols, with_minors=True)
        return perm * self.norm, minors

    def pullback(self, minors: np.ndarray, grad_a: np.ndarray) -> np.ndarray:
        """Gradient with respect to U from the gradient with respect to A.

        Gradients of real functions are stored as d/dRe + i d/dIm.  A is
        holomorphic in U, so the chain rule only involves conj(dA/dU).
        """
        out = np.zeros((self.n_modes, self.n_modes), dtype=np.complex128)
        _scatter_minors(self.rows, self.cols, minors, np.ascontiguousarray(grad_a * self.norm), out)
        return out


@nb.njit(cache=True)
def _scatter_minors(rows, cols, minors, weights, out):
    n = rows.shape[1]
    for k in range(cols.shape[0]):
        for j in range(rows.shape[0]):
            w = weights[k, j]
            if w == 0:
                continue
            for a in range(n):
                p = rows[j, a]
                for b in range(n):
                    out[p, cols[k, b]] += w * np.conj(minors[k, j, a, b])


_PLANS: dict[tuple, ContractionPlan] = {}


def plan_for(spec: GateSpec, n_modes: int) -> ContractionPlan:
    key = (spec.key(), n_modes)
    if key not in _PLANS:
        _PLANS[key] = ContractionPlan(spec, n_modes)
    return _PLANS[key]


def _check_square(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ShapeError(f"mode matrix must be square, got shape {u.shape}")
    return u


def build_contraction(u: np.ndarray, spec: GateSpec) -> ContractionMap:
    """Post-selected map A(U).  ``u`` spans computational, ancilla and optionally vacuum modes."""
    u = _check_square(u)
    return ContractionMap(plan_for(spec, u.shape[0]).amplitudes(u), spec.m_c)


def spectral_norm(u: np.ndarray) -> float:
    return float(np.linalg.norm(u, 2))


def normalize(u: np.ndarray) -> np.ndarray:
    u = _check_square(u)
    s = spectral_norm(u)
    if s == 0:
        raise NormError("cannot normalize the zero matrix")
    return u / s


def fidelity(a: ContractionMap, target: ContractionMap) -> float:
    """Projective overlap |<a|t>|^2 / (<a|a><t|t>)."""
    if a.entries.shape != target.entries.shape:
        raise ShapeError(f"map shapes differ: {a.entries.shape} vs {target.entries.shape}")
    aa, tt = a.norm2(), target.norm2()
    if aa == 0 or tt == 0:
        raise FidelityUndefinedError("fidelity of a zero map is undefined")
    return abs(a.inner(target)) ** 2 / (aa * tt)


def infidelity(a: ContractionMap, target: ContractionMap) -> float:
    """1 - fidelity, evaluated from the component of ``a`` orthogonal to the target.

    Stays accurate down to ~1e-30 where 1 - fidelity() would cancel to zero.
    """
    if a.entries.shape != target.entries.shape:
        raise ShapeError(f"map shapes differ: {a.entries.shape} vs {target.entries.shape}")
    x, t = a.entries.ravel(), target.entries.ravel()
    aa, tt = np.vdot(x, x).real, np.vdot(t, t).real
    if aa == 0 or tt == 0:
        raise FidelityUndefinedError("fidelity of a zero map is undefined")
    perp = x - t * (np.vdot(t, x) / tt)
    return float(np.vdot(perp, perp).real / aa)


def success(a: ContractionMap, u: np.ndarray, total_photons: int) -> float:
    """<A|A> / ||U||^(2M), the input-averaged post-selection probability."""
    s = spectral_norm(_check_square(u))
    if s == 0:
        raise NormError("success is undefined for the zero matrix")
    return a.norm2() / s ** (2 * total_photons)


def success_bounds(a: ContractionMap) -> tuple[float, float]:
    """Smallest and largest eigenvalue of A^dag A (worst/best input state)."""
    ev = np.linalg.eigvalsh(a.entries.conj().T @ a.entries)
    return float(ev[0]), float(ev[-1])


def svd_profile(u: np.ndarray, coalescence_tol: float = COALESCENCE_TOL) -> tuple[tuple[float, ...], int]:
    """Normalized singular values (descending) and the number of vacuum modes they imply."""
    sv = np.linalg.svd(_check_square(u), compute_uv=False)
    if sv[0] == 0:
        raise NormError("zero matrix has no normalized singular values")
    nsv = sv / sv[0]
    return tuple(float(x) for x in nsv), int(np.sum(1.0 - nsv > coalescence_tol))


def evaluate(u: np.ndarray, spec: GateSpec, coalescence_tol: float = COALESCENCE_TOL) -> QualityMetrics:
    un = normalize(u)
    a = build_contraction(un, spec)
    t = embed_target(spec.target)
    delta = infidelity(a, t)
    s_min, s_max = success_bounds(a)
    nsv, n_vac = svd_profile(un, coalescence_tol)
    return QualityMetrics(
        fidelity=fidelity(a, t),
        success=a.norm2(),
        s_min=s_min,
        s_max=s_max,
        nsv=nsv,
        implied_vacuum_modes=n_vac,
        infidelity=delta,
    )


def dilate(u: np.ndarray, tol: float = COALESCENCE_TOL) -> np.ndarray:
    """Unitary with ``u`` as its top-left block, one extra mode per defective singular value.

    Singular values below 1 - tol each get a vacuum mode; those within tol of
    one are treated as unit, which bounds the unitarity residual by about
    2 * tol.  For ``u = P diag(s) Q^dag`` and defective indices d the result is

        [[u,               P_d sqrt(1 - s_d^2)],
         [sqrt(1 - s_d^2) Q_d^dag,   -diag(s_d)]]
    """
    u = _check_square(u)
    p, s, qh = np.linalg.svd(u)
    if s[0] > 1 + 1e-12:
        raise ContractionViolation(f"spectral norm {s[0]:.16g} exceeds 1")
    defect = np.flatnonzero(1.0 - s > tol)
    if defect.size == 0:
        return u.copy()
    s_d = s[defect]
    d = np.sqrt(np.clip(1.0 - s_d**2, 0.0, None))
    n, k = u.shape[0], defect.size
    w = np.zeros((n + k, n + k), dtype=complex)
    w[:n, :n] = u
    w[:n, n:] = p[:, defect] * d
    w[n:, :n] = d[:, None] * qh[defect]
    w[n:, n:] = -np.diag(s_d)
    return w


def halmos_dilation(u: np.ndarray) -> np.ndarray:
    """Full 2N x 2N unitary dilation of a contraction (one vacuum mode per mode)."""
    u = _check_square(u)
    p, s, qh = np.linalg.svd(u)
    if s[0] > 1 + 1e-12:
        raise ContractionViolation(f"spectral norm {s[0]:.16g} exceeds 1")
    d = np.sqrt(np.clip(1.0 - s**2, 0.0, None))
    left = (p * d) @ p.conj().T
    right = (qh.conj().T * d) @ qh
    return np.block([[u, left], [right, -u.conj().T]])
