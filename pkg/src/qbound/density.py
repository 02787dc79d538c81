"""Validated state containers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContractError, DimensionError
from .linalg import CLAMP_TOL, HERMITIAN_TOL, as_matrix, hermiticity_residual


def _factor_dims(dims, total: int) -> tuple[int, ...]:
    if dims is None:
        n = int(round(np.log2(total)))
        dims = (2,) * n if 2**n == total else (total,)
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims) or int(np.prod(dims)) != total:
        raise DimensionError(f"factor dims {dims} do not multiply to {total}")
    return dims


@dataclass(frozen=True)
class DensityMatrix:
    """A density operator together with its tensor factorisation.

    Construction checks Hermiticity (1e-10), unit trace (1e-10) and
    eigenvalues no lower than -1e-9. ``dims`` defaults to qubit factors when
    the dimension is a power of two.
    """

    matrix: np.ndarray
    dims: tuple[int, ...] = field(default=None)

    def __post_init__(self):
        m = as_matrix(self.matrix, "density matrix")
        res = hermiticity_residual(m)
        if res > HERMITIAN_TOL:
            raise ContractError(f"density matrix is not Hermitian (residual {res:.3e})")
        tr = np.trace(m).real
        if abs(tr - 1) > 1e-10:
            raise ContractError(f"density matrix has trace {tr!r}")
        lo = np.linalg.eigvalsh(m)[0]
        if lo < -CLAMP_TOL:
            raise ContractError(f"density matrix has eigenvalue {lo:.3e} < -1e-9")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", _factor_dims(self.dims, m.shape[0]))

    @classmethod
    def from_array(cls, m, dims=None, symmetrize: bool = False) -> "DensityMatrix":
        """Build from an array produced by a computation.

        ``symmetrize`` replaces ``m`` by its Hermitian part first; use it only
        for outputs of trusted operations whose asymmetry is pure roundoff.
        """
        m = np.asarray(m, dtype=complex)
        if symmetrize:
            m = (m + m.conj().T) / 2
        return cls(m, None if dims is None else tuple(dims))

    @classmethod
    def maximally_mixed(cls, dims: Sequence[int]) -> "DensityMatrix":
        d = int(np.prod(dims))
        return cls(np.eye(d, dtype=complex) / d, tuple(dims))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_factors(self) -> int:
        return len(self.dims)

    def expect(self, op) -> complex:
        return complex(np.trace(self.matrix @ op))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


@dataclass(frozen=True)
class PureState:
    """A normalised ket with tensor factorisation."""

    amplitudes: np.ndarray
    dims: tuple[int, ...] = field(default=None)

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if a.size == 0 or not np.all(np.isfinite(a)):
            raise ContractError("amplitudes must be a non-empty finite vector")
        norm = np.linalg.norm(a)
        if abs(norm - 1) > 1e-10:
            raise ContractError(f"state has norm {norm!r}, expected 1")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "dims", _factor_dims(self.dims, a.size))

    @classmethod
    def normalized(cls, amplitudes, dims=None) -> "PureState":
        a = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(a)
        if norm < 1e-12:
            raise ContractError("cannot normalise a vanishing vector")
        return cls(a / norm, dims)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> DensityMatrix:
        a = self.amplitudes
        return DensityMatrix(np.outer(a, a.conj()), self.dims)


def as_density(state) -> DensityMatrix:
    """Coerce a ``PureState``, ``DensityMatrix`` or raw array to ``DensityMatrix``."""
    if isinstance(state, DensityMatrix):
        return state
    if isinstance(state, PureState):
        return state.density()
    arr = np.asarray(state, dtype=complex)
    if arr.ndim == 1:
        return PureState(arr).density()
    return DensityMatrix(arr)
