"""Bosonic Fock bases, matrix permanents and linear mode transformations.

A linear optical network maps input creation operators as
``a_i^dag -> sum_j U[i, j] b_j^dag``.  The amplitude between an input
occupation ``n`` and an output occupation ``k`` is the permanent of the
matrix built from ``U`` by repeating row ``i`` ``n_i`` times and column
``j`` ``k_j`` times, divided by ``sqrt(prod n_i! prod k_j!)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations
from math import comb, factorial, prod, sqrt
from typing import Iterator, Sequence

import numba as nb
import numpy as np

from .errors import CapacityError, ShapeError

BASIS_CAP = 10**6
PERMANENT_CAP = 16


@dataclass(frozen=True)
class FockState:
    """Photon occupation numbers, one entry per mode."""

    occupations: tuple[int, ...]

    def __post_init__(self):
        occ = tuple(int(n) for n in self.occupations)
        if any(n < 0 for n in occ):
            raise ValueError(f"negative occupation in {occ}")
        object.__setattr__(self, "occupations", occ)

    @property
    def n_modes(self) -> int:
        return len(self.occupations)

    @property
    def n_photons(self) -> int:
        return sum(self.occupations)

    def __iter__(self) -> Iterator[int]:
        return iter(self.occupations)

    def __len__(self) -> int:
        return len(self.occupations)

    def __add__(self, other: "FockState") -> "FockState":
        # tensor product of two disjoint mode sets
        return FockState(self.occupations + tuple(other))

    def mode_list(self) -> list[int]:
        """Mode index of every photon, with repetition (row/column list for permanents)."""
        return [m for m, n in enumerate(self.occupations) for _ in range(n)]


@dataclass(frozen=True)
class FockBasis:
    n_modes: int
    n_photons: int
    states: tuple[FockState, ...] = field(repr=False)
    index: dict = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return len(self.states)

    def position(self, state: FockState | Sequence[int]) -> int:
        return self.index[tuple(state)]

    def occupation_array(self) -> np.ndarray:
        return np.array([s.occupations for s in self.states], dtype=np.int64).reshape(
            self.dim, self.n_modes
        )


def _compositions(n_modes: int, n_photons: int) -> Iterator[tuple[int, ...]]:
    if n_modes == 1:
        yield (n_photons,)
        return
    for first in range(n_photons, -1, -1):
        for rest in _compositions(n_modes - 1, n_photons - first):
            yield (first,) + rest


def basis_dimension(n_modes: int, n_photons: int) -> int:
    return comb(n_modes + n_photons - 1, n_photons)


@lru_cache(maxsize=64)
def _cached_basis(n_modes: int, n_photons: int) -> FockBasis:
    states = tuple(FockState(occ) for occ in _compositions(n_modes, n_photons))
    index = {s.occupations: i for i, s in enumerate(states)}
    return FockBasis(n_modes, n_photons, states, index)


def enumerate_basis(n_modes: int, n_photons: int, cap: int = BASIS_CAP) -> FockBasis:
    """All states of ``n_photons`` photons in ``n_modes`` modes.

    States are ordered lexicographically with descending occupation, so the
    first state has every photon in mode 0.
    """
    if n_modes < 1 or n_photons < 0:
        raise ValueError(f"need n_modes >= 1 and n_photons >= 0, got ({n_modes}, {n_photons})")
    dim = basis_dimension(n_modes, n_photons)
    if dim > cap:
        raise CapacityError(f"Fock dimension {dim} exceeds cap {cap}")
    return _cached_basis(n_modes, n_photons)


# ---------------------------------------------------------------------------
# permanents


@nb.njit(cache=True)
def _ryser(b: np.ndarray) -> complex:
    """Ryser's formula, subsets visited in Gray-code order (one column flip per step)."""
    n = b.shape[0]
    if n == 0:
        return 1.0 + 0j
    rowsum = np.zeros(n, dtype=np.complex128)
    total = 0j
    gray = 0
    for k in range(1, 1 << n):
        j = 0
        while not (k >> j) & 1:
            j += 1
        gray ^= 1 << j
        if (gray >> j) & 1:
            for i in range(n):
                rowsum[i] += b[i, j]
        else:
            for i in range(n):
                rowsum[i] -= b[i, j]
        p = rowsum[0]
        for i in range(1, n):
            p *= rowsum[i]
        # (-1)^(n - |S|) tracked through the parity of the step count
        total += p if (k & 1) == (n & 1) else -p
    return total


@nb.njit(cache=True)
def _ryser_with_minors(b: np.ndarray, minors: np.ndarray) -> complex:
    """Ryser permanent plus d perm / d b[a, c] (permanent of the (a, c) minor) into ``minors``.

    d/d b[a, c] of prod_i rowsum_i(S) is prod_{i != a} rowsum_i(S) when c is in S.
    """
    n = b.shape[0]
    minors[:, :] = 0
    if n == 0:
        return 1.0 + 0j
    rowsum = np.zeros(n, dtype=np.complex128)
    prefix = np.empty(n + 1, dtype=np.complex128)
    suffix = np.empty(n + 1, dtype=np.complex128)
    total = 0j
    gray = 0
    for k in range(1, 1 << n):
        j = 0
        while not (k >> j) & 1:
            j += 1
        gray ^= 1 << j
        if (gray >> j) & 1:
            for i in range(n):
                rowsum[i] += b[i, j]
        else:
            for i in range(n):
                rowsum[i] -= b[i, j]
        prefix[0] = 1.0
        suffix[n] = 1.0
        for i in range(n):
            prefix[i + 1] = prefix[i] * rowsum[i]
            suffix[n - 1 - i] = suffix[n - i] * rowsum[n - 1 - i]
        positive = (k & 1) == (n & 1)
        total += prefix[n] if positive else -prefix[n]
        for c in range(n):
            if (gray >> c) & 1:
                for a in range(n):
                    e = prefix[a] * suffix[a + 1]
                    minors[a, c] += e if positive else -e
    return total


@nb.njit(cache=True)
def _gathered_permanents(u, rows, cols, out):
    """out[k, j] = perm(u[rows[j]][:, cols[k]])."""
    n = rows.shape[1]
    b = np.empty((n, n), dtype=np.complex128)
    for k in range(cols.shape[0]):
        for j in range(rows.shape[0]):
            for a in range(n):
                for c in range(n):
                    b[a, c] = u[rows[j, a], cols[k, c]]
            out[k, j] = _ryser(b)


@nb.njit(cache=True)
def _gathered_permanents_with_minors(u, rows, cols, out, minors):
    n = rows.shape[1]
    b = np.empty((n, n), dtype=np.complex128)
    for k in range(cols.shape[0]):
        for j in range(rows.shape[0]):
            for a in range(n):
                for c in range(n):
                    b[a, c] = u[rows[j, a], cols[k, c]]
            out[k, j] = _ryser_with_minors(b, minors[k, j])


def gathered_permanents(u: np.ndarray, rows: np.ndarray, cols: np.ndarray, with_minors: bool = False):
    """Permanents of all submatrices u[rows[j]][:, cols[k]], indexed [k, j].

    With ``with_minors`` also returns the minor permanents, shape
    (len(cols), len(rows), n, n), i.e. the derivative of each permanent
    with respect to the entries of its submatrix.
    """
    u = np.ascontiguousarray(u, dtype=np.complex128)
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    if rows.shape[1] != cols.shape[1]:
        raise ShapeError("row and column lists must have the same length")
    out = np.empty((cols.shape[0], rows.shape[0]), dtype=np.complex128)
    if not with_minors:
        _gathered_permanents(u, rows, cols, out)
        return out
    n = rows.shape[1]
    minors = np.empty((cols.shape[0], rows.shape[0], n, n), dtype=np.complex128)
    _gathered_permanents_with_minors(u, rows, cols, out, minors)
    return out, minors


def permanent_with_minors(m: np.ndarray) -> tuple[complex, np.ndarray]:
    m = np.ascontiguousarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"permanent needs a square matrix, got shape {m.shape}")
    minors = np.empty_like(m)
    return complex(_ryser_with_minors(m, minors)), minors


def permanent(m: np.ndarray, cap: int = PERMANENT_CAP) -> complex:
    """Permanent of a square matrix by Ryser's formula in Gray-code order."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"permanent needs a square matrix, got shape {m.shape}")
    if m.shape[0] > cap:
        raise CapacityError(f"matrix size {m.shape[0]} exceeds permanent cap {cap}")
    return complex(_ryser(np.ascontiguousarray(m, dtype=np.complex128)))


def permanent_naive(m: np.ndarray) -> complex:
    """Sum over all n! permutations.  Test oracle only."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"permanent needs a square matrix, got shape {m.shape}")
    n = m.shape[0]
    if n > 8:
        raise CapacityError("naive permanent is limited to n <= 8")
    rows = np.arange(n)
    return complex(sum(np.prod(m[rows, list(p)]) for p in permutations(range(n))))


# ---------------------------------------------------------------------------
# mode transformations


@dataclass(frozen=True)
class AmplitudeVector:
    basis: FockBasis
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(self.amplitudes) != self.basis.dim:
            raise ShapeError(
                f"{len(self.amplitudes)} amplitudes for a basis of dimension {self.basis.dim}"
            )

    def __getitem__(self, state) -> complex:
        return complex(self.amplitudes[self.basis.position(state)])

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


def _as_state(state) -> FockState:
    return state if isinstance(state, FockState) else FockState(tuple(state))


def factorial_norm(occupations: Sequence[int]) -> float:
    return sqrt(prod(factorial(int(n)) for n in occupations))


def transition_amplitudes(u: np.ndarray, inputs: Sequence[FockState], outputs: Sequence[FockState]) -> np.ndarray:
    """Matrix of amplitudes <out_k| U |in_j>, shape (len(outputs), len(inputs))."""
    u = np.asarray(u, dtype=complex)
    rows = np.array([s.mode_list() for s in inputs], dtype=np.int64)
    cols = np.array([s.mode_list() for s in outputs], dtype=np.int64)
    norm = np.array([[1.0 / (factorial_norm(o) * factorial_norm(i)) for i in inputs] for o in outputs])
    return gathered_permanents(u, rows.reshape(len(inputs), -1), cols.reshape(len(outputs), -1)) * norm


def apply_mode_transform(u: np.ndarray, state) -> AmplitudeVector:
    """Output amplitudes of a Fock state sent through the linear network ``u``."""
    u = np.asarray(u, dtype=complex)
    state = _as_state(state)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ShapeError(f"mode matrix must be square, got shape {u.shape}")
    if u.shape[0] != state.n_modes:
        raise ShapeError(f"{u.shape[0]}-mode matrix applied to a {state.n_modes}-mode state")
    basis = enumerate_basis(state.n_modes, state.n_photons)
    amps = transition_amplitudes(u, [state], basis.states)[:, 0]
    return AmplitudeVector(basis, amps)


def expansion_oracle(u: np.ndarray, state) -> AmplitudeVector:
    """Output amplitudes by literally multiplying out the creation-operator polynomial.

    Independent of the permanent route; meant for tests on small systems.
    """
    u = np.asarray(u, dtype=complex)
    state = _as_state(state)
    if u.shape != (state.n_modes, state.n_modes):
        raise ShapeError(f"mode matrix of shape {u.shape} for a {state.n_modes}-mode state")
    if state.n_photons > 6 or state.n_modes > 10:
        raise CapacityError("expansion oracle is limited to M <= 6 photons and N <= 10 modes")
    n = state.n_modes
    # polynomial in output creation operators: monomial exponents -> coefficient
    poly: dict[tuple[int, ...], complex] = {(0,) * n: 1.0 + 0j}
    for i, n_i in enumerate(state.occupations):
        for _ in range(n_i):
            nxt: dict[tuple[int, ...], complex] = {}
            for mono, c in poly.items():
                for j in range(n):
                    if u[i, j] == 0:
                        continue
                    key = mono[:j] + (mono[j] + 1,) + mono[j + 1 :]
                    nxt[key] = nxt.get(key, 0) + c * u[i, j]
            poly = nxt
    basis = enumerate_basis(n, state.n_photons)
    amps = np.zeros(basis.dim, dtype=complex)
    in_norm = factorial_norm(state.occupations)
    for mono, c in poly.items():
        # (b^dag)^k |0> = sqrt(k!) |k>
        amps[basis.position(mono)] = c * factorial_norm(mono) / in_norm
    return AmplitudeVector(basis, amps)


def transform_matrix(u: np.ndarray, n_photons: int) -> np.ndarray:
    """Full representation of ``u`` on the n-photon Fock space, columns indexed by inputs."""
    u = np.asarray(u, dtype=complex)
    basis = enumerate_basis(u.shape[0], n_photons)
    return transition_amplitudes(u, basis.states, basis.states)
