"""Dense complex linear algebra used throughout the package.

Operators are plain ``numpy`` arrays of dtype ``complex128``. The helpers here
validate shape and finiteness at the boundary so that later code can assume a
square, finite matrix.
"""

from __future__ import annotations

from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ContractError, DimensionError

MAX_DIM = 2**13
HERMITIAN_TOL = 1e-10
CLAMP_TOL = 1e-9
# Eigenvalues of sqrt(rho) below this fraction of the largest are treated as
# exact zeros so that roundoff in a null space does not leak into Tr sqrt(.).
SUPPORT_TOL = 1e-13

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SX, SY, SZ)


class HermEig(NamedTuple):
    """Eigenvalues in ascending order and the unitary whose columns are eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a square, finite complex array or raise."""
    arr = np.asarray(getattr(m, "matrix", m), dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise DimensionError(f"{name} must be a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} has non-finite entries")
    return arr


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(m).T


def hermiticity_residual(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T)))


def require_hermitian(m, name: str = "matrix", tol: float = HERMITIAN_TOL) -> np.ndarray:
    arr = as_matrix(m, name)
    res = hermiticity_residual(arr)
    if res > tol:
        raise ContractError(f"{name} is not Hermitian (residual {res:.3e} > {tol:.0e})")
    return arr


def kron(*ops) -> np.ndarray:
    """Tensor product of one or more square matrices, capped at ``MAX_DIM``."""
    if not ops:
        raise ContractError("kron needs at least one operand")
    mats = [as_matrix(o, "kron operand") for o in ops]
    total = int(np.prod([m.shape[0] for m in mats]))
    if total > MAX_DIM:
        raise DimensionError(f"kron result dimension {total} exceeds cap {MAX_DIM}")
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def embed(op, site: int, n: int) -> np.ndarray:
    """Place a single-qubit operator on ``site`` of an ``n``-qubit register."""
    factors = [I2] * n
    factors[site] = op
    return kron(*factors)


def partial_trace(m, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every tensor factor not listed in ``keep``.

    Kept factors stay in their original order.
    """
    arr = as_matrix(m)
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims) or int(np.prod(dims)) != arr.shape[0]:
        raise DimensionError(f"factor dims {dims} do not multiply to {arr.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    if not keep or keep[0] < 0 or keep[-1] >= len(dims):
        raise DimensionError(f"keep={keep} is not a non-empty subset of factors 0..{len(dims) - 1}")
    n = len(dims)
    traced = [i for i in range(n) if i not in keep]
    t = arr.reshape(dims + dims)
    # trace from the highest index down so earlier axis numbers stay valid
    for count, axis in enumerate(reversed(traced)):
        current = n - count
        t = np.trace(t, axis1=axis, axis2=axis + current)
    d_keep = int(np.prod([dims[i] for i in keep]))
    return t.reshape(d_keep, d_keep)


def herm_eig(m) -> HermEig:
    arr = require_hermitian(m)
    w, v = np.linalg.eigh(arr)
    return HermEig(w, v)


def unitary_exp(h) -> np.ndarray:
    """``exp(-i h)`` for Hermitian ``h``."""
    w, v = herm_eig(h)
    return (v * np.exp(-1j * w)) @ v.conj().T


def phase_average(d: np.ndarray) -> np.ndarray:
    """Elementwise ``(exp(i d) - 1) / (i d)``, the mean of ``exp(i a d)`` over a in [0, 1]."""
    d = np.asarray(d, dtype=float)
    out = np.empty(d.shape, dtype=complex)
    small = np.abs(d) < 1e-8
    ds = d[small]
    out[small] = 1 + 0.5j * ds - ds**2 / 6
    dl = d[~small]
    out[~small] = np.expm1(1j * dl) / (1j * dl)
    return out


def alpha_conjugation_integral(h, x) -> np.ndarray:
    """Evaluate the integral of ``exp(i a h) x exp(-i a h)`` for a from 0 to 1.

    Works in the eigenbasis of ``h``, where each matrix element picks up the
    average phase of its eigenvalue gap.
    """
    w, v = herm_eig(h)
    xm = as_matrix(x, "x")
    if xm.shape != v.shape:
        raise DimensionError(f"x has shape {xm.shape}, h has shape {v.shape}")
    xt = v.conj().T @ xm @ v
    gaps = w[:, None] - w[None, :]
    return v @ (xt * phase_average(gaps)) @ v.conj().T


def central_diff(f: Callable[[np.ndarray], np.ndarray], theta, k: int, h: float = 1e-5):
    """Central difference of ``f`` along parameter ``k``."""
    if not h > 0:
        raise ContractError("finite-difference step must be positive")
    theta = np.asarray(theta, dtype=float)
    step = np.zeros_like(theta)
    step[k] = h
    fp = np.asarray(f(theta + step))
    fm = np.asarray(f(theta - step))
    return (fp - fm) / (2 * h)


def psd_sqrt(m, name: str = "matrix") -> np.ndarray:
    """Square root of a positive semidefinite matrix with small-negative clamping."""
    w, v = herm_eig(m)
    scale = max(1.0, float(np.max(np.abs(w))))
    if w[0] < -CLAMP_TOL * scale:
        raise ContractError(f"{name} has eigenvalue {w[0]:.3e} below the clamp floor")
    w = np.where(w < SUPPORT_TOL * scale, 0.0, w)
    return (v * np.sqrt(w)) @ v.conj().T


def _check_state(m, name: str) -> np.ndarray:
    arr = require_hermitian(m, name)
    tr = np.trace(arr).real
    if abs(tr - 1) > 1e-10:
        raise ContractError(f"{name} has trace {tr!r}, expected 1")
    return arr


def bures_fidelity(r1, r2) -> float:
    """Root fidelity ``Tr sqrt(sqrt(r1) r2 sqrt(r1))`` of two density matrices.

    The inner matrix is compressed onto the support of ``r1`` before the second
    square root. For pure or low-rank states this keeps roundoff in the null
    space from contributing spurious ``sqrt(1e-16)``-sized terms.
    """
    a = _check_state(r1, "r1")
    b = _check_state(r2, "r2")
    if a.shape != b.shape:
        raise DimensionError(f"fidelity operands differ in shape: {a.shape} vs {b.shape}")
    w, v = herm_eig(a)
    for name, vals in (("r1", w), ("r2", np.linalg.eigvalsh(b))):
        if vals[0] < -CLAMP_TOL:
            raise ContractError(f"{name} has eigenvalue {vals[0]:.3e} below the clamp floor")
    support = w > SUPPORT_TOL * max(1.0, w[-1])
    vs = v[:, support]
    root = np.sqrt(w[support])
    inner = (root[:, None] * (vs.conj().T @ b @ vs)) * root[None, :]
    mu = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    if mu[0] < -CLAMP_TOL:
        raise ContractError(f"fidelity kernel has eigenvalue {mu[0]:.3e} below the clamp floor")
    mu = np.where(mu < SUPPORT_TOL * max(1.0, mu[-1]), 0.0, mu)
    return float(np.sum(np.sqrt(mu)))


def min_eigenvalue(m) -> float:
    arr = as_matrix(m)
    return float(np.linalg.eigvalsh((arr + arr.conj().T) / 2)[0])
