"""Operator algebra on tensor products of qubits, truncated bosons and fermions.

Basis ordering is lexicographic with factor 0 slowest: the basis index of a
product state ``|i_0 i_1 ... i_{n-1}>`` is ``np.ravel_multi_index`` of the
local indices over ``space.dims``.  Every other module depends on this.

Natural units (hbar = 1) throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-10


class SpaceMismatchError(ValueError):
    """Raised when objects built on different Hilbert spaces are combined."""


@dataclass(frozen=True)
class Qubit:
    label: str = ""

    @property
    def dim(self) -> int:
        return 2


@dataclass(frozen=True)
class BosonMode:
    n_max: int
    label: str = ""

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"BosonMode truncation must be a positive integer, got {self.n_max!r}")

    @property
    def dim(self) -> int:
        return self.n_max + 1


@dataclass(frozen=True)
class FermionMode:
    label: str = ""

    @property
    def dim(self) -> int:
        return 2


Factor = Union[Qubit, BosonMode, FermionMode]


@dataclass(frozen=True)
class HilbertSpec:
    """Ordered tensor-product structure; ``factors[0]`` is the slowest index.

    Identity is by value: two specs with the same factors (labels included)
    describe the same space, anything else is a different space.
    """

    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise ValueError("HilbertSpec needs at least one factor")
        for f in self.factors:
            if not isinstance(f, (Qubit, BosonMode, FermionMode)):
                raise TypeError(f"unsupported factor {f!r}")

    @property
    def dims(self) -> tuple:
        return tuple(f.dim for f in self.factors)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def __len__(self):
        return len(self.factors)

    def basis_index(self, local_indices: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(local_indices), self.dims))

    def local_indices(self, index: int) -> tuple:
        return tuple(int(i) for i in np.unravel_index(index, self.dims))


def _check_same_space(a, b):
    if a.space != b.space:
        raise SpaceMismatchError("operands live on different Hilbert spaces")


class OperatorMatrix:
    """A square operator on ``space`` (sparse CSR storage, dense semantics)."""

    def __init__(self, space: HilbertSpec, entries):
        if sp.issparse(entries):
            data = sp.csr_matrix(entries, dtype=complex)
        else:
            data = sp.csr_matrix(np.asarray(entries, dtype=complex))
        n = space.total_dim
        if data.shape != (n, n):
            raise ValueError(f"operator shape {data.shape} does not match total_dim {n}")
        data.sum_duplicates()
        data.eliminate_zeros()
        self.space = space
        self._data = data

    @property
    def sparse(self) -> sp.csr_matrix:
        return self._data

    def toarray(self) -> np.ndarray:
        return self._data.toarray()

    @property
    def shape(self):
        return self._data.shape

    def dag(self) -> "OperatorMatrix":
        return OperatorMatrix(self.space, self._data.conj().T.tocsr())

    def hermiticity_error(self) -> float:
        diff = self._data - self._data.conj().T
        return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return self.hermiticity_error() <= tol

    def __add__(self, other):
        if isinstance(other, OperatorMatrix):
            _check_same_space(self, other)
            return OperatorMatrix(self.space, self._data + other._data)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, OperatorMatrix):
            _check_same_space(self, other)
            return OperatorMatrix(self.space, self._data - other._data)
        return NotImplemented

    def __neg__(self):
        return OperatorMatrix(self.space, -self._data)

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return OperatorMatrix(self.space, self._data * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            _check_same_space(self, other)
            return OperatorMatrix(self.space, self._data @ other._data)
        if isinstance(other, StateVector):
            _check_same_space(self, other)
            return StateVector(self.space, self._data @ other.amplitudes, normalize=False)
        return NotImplemented

    def max_abs_diff(self, other: "OperatorMatrix") -> float:
        _check_same_space(self, other)
        diff = (self._data - other._data).tocsr()
        diff.eliminate_zeros()
        return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0

    @cached_property
    def spectral_blocks(self):
        """Eigendecompositions of the invariant blocks of a Hermitian operator.

        Returns a list of ``(indices, eigenvalues, eigenvectors)``; blocks are
        the connected components of the sparsity graph, so block-diagonal
        Hamiltonians (conserved sectors) are diagonalized piecewise.
        """
        pattern = abs(self._data) + abs(self._data.T)
        n_comp, labels = connected_components(pattern, directed=False)
        blocks = []
        for c in range(n_comp):
            idx = np.flatnonzero(labels == c)
            sub = self._data[idx][:, idx].toarray()
            sub = 0.5 * (sub + sub.conj().T)
            evals, evecs = np.linalg.eigh(sub)
            blocks.append((idx, evals, evecs))
        return blocks

    def __repr__(self):
        return f"OperatorMatrix(dim={self.space.total_dim}, nnz={self._data.nnz})"


class StateVector:
    """A normalized ket on ``space``."""

    __slots__ = ("space", "amplitudes")

    def __init__(self, space: HilbertSpec, amplitudes, normalize: bool = False):
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != space.total_dim:
            raise ValueError(f"state length {amps.shape[0]} does not match total_dim {space.total_dim}")
        if normalize:
            nrm = np.linalg.norm(amps)
            if nrm == 0:
                raise ValueError("cannot normalize the zero vector")
            amps = amps / nrm
        amps.setflags(write=False)
        self.space = space
        self.amplitudes = amps

    @classmethod
    def basis(cls, space: HilbertSpec, local_indices: Sequence[int]) -> "StateVector":
        amps = np.zeros(space.total_dim, dtype=complex)
        amps[space.basis_index(local_indices)] = 1.0
        return cls(space, amps)

    @classmethod
    def product(cls, space: HilbertSpec, local_states: Sequence) -> "StateVector":
        if len(local_states) != len(space):
            raise ValueError("need one local state per factor")
        vecs = []
        for f, v in zip(space.factors, local_states):
            v = np.asarray(v, dtype=complex).reshape(-1)
            if v.shape[0] != f.dim:
                raise ValueError(f"local state of length {v.shape[0]} for factor of dim {f.dim}")
            vecs.append(v)
        return cls(space, reduce(np.kron, vecs), normalize=True)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other: "StateVector") -> complex:
        """``<self|other>``."""
        _check_same_space(self, other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __repr__(self):
        return f"StateVector(dim={self.space.total_dim}, norm={self.norm():.12f})"


# --------------------------------------------------------------------------- #
# embedding and ladders
# --------------------------------------------------------------------------- #

_PARITY = sp.csr_matrix(np.diag([1.0, -1.0]).astype(complex))


def embed_single_factor(space: HilbertSpec, factor_index: int, local_op,
                        jordan_wigner: bool = False) -> OperatorMatrix:
    """Pad ``local_op`` with identities: ``I x ... x local_op x ... x I``.

    With ``jordan_wigner=True`` (only meaningful on a FermionMode factor) the
    parity string ``diag(1, -1)`` is placed on every *preceding* fermionic
    factor, which makes ladder operators of different modes anticommute.
    """
    n = len(space)
    if not 0 <= factor_index < n:
        raise IndexError(f"factor_index {factor_index} out of range for {n} factors")
    local = sp.csr_matrix(local_op, dtype=complex) if sp.issparse(local_op) else sp.csr_matrix(
        np.asarray(local_op, dtype=complex))
    d = space.factors[factor_index].dim
    if local.shape != (d, d):
        raise ValueError(
            f"local operator has shape {local.shape}, factor {factor_index} "
            f"({type(space.factors[factor_index]).__name__}) needs ({d}, {d})")
    if jordan_wigner and not isinstance(space.factors[factor_index], FermionMode):
        raise ValueError("Jordan-Wigner strings only apply to FermionMode factors")
    parts = []
    for i, f in enumerate(space.factors):
        if i == factor_index:
            parts.append(local)
        elif jordan_wigner and i < factor_index and isinstance(f, FermionMode):
            parts.append(_PARITY)
        else:
            parts.append(sp.identity(f.dim, dtype=complex, format="csr"))
    full = reduce(lambda a, b: sp.kron(a, b, format="csr"), parts)
    return OperatorMatrix(space, full)


def annihilator(n_max: int) -> np.ndarray:
    """Truncated bosonic annihilator in the basis ``|0>, ..., |n_max>``."""
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)


def bosonic_ladders(space: HilbertSpec, mode_factor_index: int):
    """Return ``(a, a_dagger)`` for a BosonMode factor (hard truncation)."""
    f = space.factors[mode_factor_index]
    if not isinstance(f, BosonMode):
        raise TypeError(f"factor {mode_factor_index} is {type(f).__name__}, not a BosonMode")
    a = annihilator(f.n_max)
    return (embed_single_factor(space, mode_factor_index, a),
            embed_single_factor(space, mode_factor_index, a.T.copy()))


def fermionic_ladders(space: HilbertSpec, mode_factor_index: int):
    """Return ``(b, b_dagger)`` for a FermionMode factor, with sign strings."""
    f = space.factors[mode_factor_index]
    if not isinstance(f, FermionMode):
        raise TypeError(f"factor {mode_factor_index} is {type(f).__name__}, not a FermionMode")
    b = np.array([[0, 1], [0, 0]], dtype=complex)
    return (embed_single_factor(space, mode_factor_index, b, jordan_wigner=True),
            embed_single_factor(space, mode_factor_index, b.T.copy(), jordan_wigner=True))


def identity(space: HilbertSpec) -> OperatorMatrix:
    return OperatorMatrix(space, sp.identity(space.total_dim, dtype=complex, format="csr"))


def commutator(a: OperatorMatrix, b: OperatorMatrix) -> OperatorMatrix:
    return a @ b - b @ a


def anticommutator(a: OperatorMatrix, b: OperatorMatrix) -> OperatorMatrix:
    return a @ b + b @ a


# --------------------------------------------------------------------------- #
# dynamics
# --------------------------------------------------------------------------- #

def _require_hermitian(H: OperatorMatrix):
    err = H.hermiticity_error()
    if err > HERMITIAN_TOL:
        raise ValueError(f"Hamiltonian is not Hermitian: max |H - H^dag| = {err:.3e}")


def evolve(H: OperatorMatrix, t: float, psi: StateVector) -> StateVector:
    """Return ``exp(-i H t) psi`` via block-wise spectral decomposition."""
    _check_same_space(H, psi)
    _require_hermitian(H)
    out = np.zeros_like(psi.amplitudes)
    amps = psi.amplitudes
    for idx, evals, evecs in H.spectral_blocks:
        local = amps[idx]
        if not np.any(local):
            continue
        coeff = evecs.conj().T @ local
        out[idx] = evecs @ (np.exp(-1j * evals * t) * coeff)
    result = StateVector(psi.space, out)
    drift = abs(result.norm() - psi.norm())
    if drift > NORM_TOL:
        raise ArithmeticError(f"evolution broke unitarity: norm drift {drift:.3e}")
    return result


def propagator(H: OperatorMatrix, t: float) -> np.ndarray:
    """Dense ``exp(-i H t)``; intended for small spaces only."""
    _require_hermitian(H)
    n = H.space.total_dim
    U = np.zeros((n, n), dtype=complex)
    for idx, evals, evecs in H.spectral_blocks:
        U[np.ix_(idx, idx)] = (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T
    return U


def expectation(op: OperatorMatrix, psi: StateVector) -> complex:
    _check_same_space(op, psi)
    return complex(np.vdot(psi.amplitudes, op.sparse @ psi.amplitudes))
