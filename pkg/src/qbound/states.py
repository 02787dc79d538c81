"""Probe states: GHZ families, local noise, reduced density matrices."""

from __future__ import annotations

import numpy as np

from .channels import KrausChannel, apply_kraus
from .density import DensityMatrix, PureState, as_density
from .errors import ContractError, DimensionError
from .linalg import I2, PAULIS, kron

MAX_GHZ = 12
MAX_LOCAL = 10

# Eigenvectors of sigma_1, sigma_2, sigma_3 for eigenvalues +1 and -1.
_S = 1 / np.sqrt(2)
_EIGVECS = {
    1: (np.array([_S, _S]), np.array([_S, -_S])),
    2: (np.array([_S, 1j * _S]), np.array([_S, -1j * _S])),
    3: (np.array([1, 0]), np.array([0, 1])),
}


def _kron_vec(v: np.ndarray, n: int) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for _ in range(n):
        out = np.kron(out, v)
    return out


def _ghz_vector(k: int, n: int) -> np.ndarray:
    plus, minus = _EIGVECS[k]
    return (_kron_vec(plus, n) + _kron_vec(minus, n)) / np.sqrt(2)


def ghz_state(k: int, n: int) -> PureState:
    """GHZ state built from the eigenvectors of Pauli matrix ``k`` (1, 2 or 3)."""
    if k not in _EIGVECS:
        raise ContractError(f"direction must be 1, 2 or 3, got {k!r}")
    if not 1 <= n <= MAX_GHZ:
        raise ContractError(f"particle count must be in 1..{MAX_GHZ}, got {n}")
    return PureState(_ghz_vector(k, n), (2,) * n)


def superposed_ghz(n: int, deltas=(0.0, 0.0, 0.0)) -> PureState:
    """Normalised ``sum_k exp(i delta_k) |GHZ_k>``; the GHZ states are not orthogonal."""
    if not 1 <= n <= MAX_GHZ:
        raise ContractError(f"particle count must be in 1..{MAX_GHZ}, got {n}")
    deltas = np.asarray(deltas, dtype=float)
    if deltas.shape != (3,):
        raise ContractError("superposed_ghz takes three phases")
    vec = sum(np.exp(1j * d) * _ghz_vector(k, n) for k, d in zip((1, 2, 3), deltas))
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        raise ContractError("phases cancel the superposition to zero")
    return PureState(vec / norm, (2,) * n)


def dephasing_kraus(lam: float) -> KrausChannel:
    if lam < 0:
        raise ContractError(f"dephasing strength must be non-negative, got {lam}")
    e0 = np.diag([1, np.exp(-lam)]).astype(complex)
    e1 = np.array([[0, 0], [0, np.sqrt(-np.expm1(-2 * lam))]], dtype=complex)
    return KrausChannel.constant([e0, e1])


def amplitude_damping_kraus(kappa: float) -> KrausChannel:
    """Kraus pair ``diag(1, sqrt(1 - e^{-2 kappa}))`` and ``e^{-kappa} |0><1|``.

    At ``kappa = 0`` the pair transfers all of ``|1>`` to ``|0>``; for large
    ``kappa`` it approaches the identity.
    """
    if kappa < 0:
        raise ContractError(f"damping constant must be non-negative, got {kappa}")
    e0 = np.diag([1, np.sqrt(-np.expm1(-2 * kappa))]).astype(complex)
    e1 = np.array([[0, np.exp(-kappa)], [0, 0]], dtype=complex)
    return KrausChannel.constant([e0, e1])


def apply_local(rho: np.ndarray, ops, site: int, dims) -> np.ndarray:
    """Apply a Kraus list to a single tensor factor of ``rho``."""
    dims = list(dims)
    n = len(dims)
    t = rho.reshape(dims + dims)
    out = np.zeros_like(t)
    for op in ops:
        left = np.moveaxis(np.tensordot(op, t, axes=(1, site)), 0, site)
        both = np.tensordot(left, op.conj(), axes=(n + site, 1))
        out = out + np.moveaxis(both, -1, n + site)
    return out.reshape(rho.shape)


def apply_uniform_local_channel(state, single_qubit_kraus: KrausChannel) -> DensityMatrix:
    """Apply the same single-particle channel independently to every factor."""
    rho = as_density(state)
    if rho.n_factors > MAX_LOCAL:
        raise DimensionError(f"at most {MAX_LOCAL} particles supported, got {rho.n_factors}")
    d = single_qubit_kraus.dim
    if any(f != d for f in rho.dims):
        raise DimensionError(f"every factor must have dimension {d}")
    m = rho.matrix
    for site in range(rho.n_factors):
        m = apply_local(m, single_qubit_kraus.kraus_ops, site, rho.dims)
    return DensityMatrix.from_array(m, rho.dims, symmetrize=True)


def dephased_ghz_marginals(k: int, kraus: KrausChannel) -> tuple[DensityMatrix, DensityMatrix]:
    """One- and two-particle marginals of a locally noisy GHZ_k state with N >= 3.

    The noiseless two-particle marginal ``(1 + sigma_k (x) sigma_k)/4`` is
    pushed through the channel on both factors. For unital channels the
    one-particle marginal is exactly ``1/2``.
    """
    if k not in (1, 2, 3):
        raise ContractError(f"direction must be 1, 2 or 3, got {k!r}")
    ops = kraus.kraus_ops
    if kraus.dim != 2:
        raise DimensionError("marginals are defined for qubit channels")
    one = apply_kraus(ops, I2)
    s = apply_kraus(ops, PAULIS[k - 1])
    rho1 = DensityMatrix.from_array(one / 2, (2,), symmetrize=True)
    rho2 = DensityMatrix.from_array((kron(one, one) + kron(s, s)) / 4, (2, 2), symmetrize=True)
    return rho1, rho2


def averaged_rdm2(kraus: KrausChannel) -> DensityMatrix:
    """Equal mixture over the three directions of the noisy GHZ two-particle marginal."""
    mats = [dephased_ghz_marginals(k, kraus)[1].matrix for k in (1, 2, 3)]
    return DensityMatrix.from_array(sum(mats) / 3, (2, 2), symmetrize=True)


def swap_residuals(rho: DensityMatrix) -> list[float]:
    dims = list(rho.dims)
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    out = []
    for i in range(n - 1):
        perm = list(range(2 * n))
        perm[i], perm[i + 1] = perm[i + 1], perm[i]
        perm[n + i], perm[n + i + 1] = perm[n + i + 1], perm[n + i]
        out.append(float(np.max(np.abs(t.transpose(perm) - t))))
    return out


def is_permutationally_invariant(rho, tol: float = 1e-10) -> tuple[bool, float]:
    """Check invariance under every adjacent transposition of tensor factors."""
    r = as_density(rho)
    if len(set(r.dims)) > 1:
        raise DimensionError("permutation invariance needs equal factor dimensions")
    res = max(swap_residuals(r), default=0.0)
    return res < tol, res


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None, dims=None) -> DensityMatrix:
    """Random density matrix from a complex Ginibre matrix."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return DensityMatrix.from_array(m / np.trace(m).real, dims, symmetrize=True)


def random_pure(dim: int, rng: np.random.Generator, dims=None) -> PureState:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return PureState.normalized(v, dims)


def symmetrize(rho: DensityMatrix) -> DensityMatrix:
    """Average a multi-qubit state over all permutations of its factors."""
    import itertools

    dims = list(rho.dims)
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    acc = np.zeros_like(t)
    perms = list(itertools.permutations(range(n)))
    for p in perms:
        acc = acc + t.transpose(list(p) + [n + i for i in p])
    return DensityMatrix.from_array(acc.reshape(rho.matrix.shape) / len(perms), rho.dims, symmetrize=True)
