"""Parametrised Kraus channels, their derivatives and diagnostics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .density import DensityMatrix, as_density
from .errors import ContractError, DimensionError
from .linalg import (
    HERMITIAN_TOL,
    I2,
    MAX_DIM,
    SX,
    SY,
    SZ,
    alpha_conjugation_integral,
    as_matrix,
    central_diff,
    hermiticity_residual,
    partial_trace,
    unitary_exp,
)

COMPLETENESS_TOL = 1e-10
MAX_BATH = 16


@dataclass(frozen=True)
class GeneratorSet:
    """Hermitian generators ``G[l, k]`` of an exponential Kraus family.

    Kraus operator ``l`` is ``exp(-i sum_k theta_k G[l, k]) / sqrt(L)``. A
    unitary evolution is the special case ``L = 1`` with ``G[0, k] = H_k``.
    """

    ops: np.ndarray  # shape (L, q, d, d)

    def __post_init__(self):
        g = np.asarray(self.ops, dtype=complex)
        if g.ndim == 3:
            g = g[None]
        if g.ndim != 4 or g.shape[-1] != g.shape[-2]:
            raise DimensionError(f"generators must have shape (L, q, d, d), got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ContractError("generators have non-finite entries")
        for l, k in itertools.product(range(g.shape[0]), range(g.shape[1])):
            res = hermiticity_residual(g[l, k])
            if res > HERMITIAN_TOL:
                raise ContractError(f"generator ({l}, {k}) is not Hermitian (residual {res:.3e})")
        g = g.copy()
        g.setflags(write=False)
        object.__setattr__(self, "ops", g)

    @classmethod
    def unitary(cls, hamiltonians: Sequence[np.ndarray]) -> "GeneratorSet":
        return cls(np.asarray([list(hamiltonians)], dtype=complex))

    @property
    def n_kraus(self) -> int:
        return self.ops.shape[0]

    @property
    def q(self) -> int:
        return self.ops.shape[1]

    @property
    def dim(self) -> int:
        return self.ops.shape[2]

    def generator(self, theta, l: int = 0) -> np.ndarray:
        theta = _theta(theta, self.q)
        return np.tensordot(theta, self.ops[l], axes=(0, 0))

    def hamiltonians(self) -> list[np.ndarray]:
        if self.n_kraus != 1:
            raise ContractError("only single-operator generator sets describe a unitary")
        return list(self.ops[0])


def _theta(theta, q: int | None = None) -> np.ndarray:
    t = np.atleast_1d(np.asarray(theta, dtype=float))
    if t.ndim != 1 or not np.all(np.isfinite(t)):
        raise ContractError("theta must be a finite real vector")
    if q is not None and t.size != q:
        raise DimensionError(f"theta has {t.size} entries, expected {q}")
    return t


class Constant:
    kind = "constant"


@dataclass(frozen=True)
class ExponentialFamily:
    generators: GeneratorSet
    kind = "exponential_family"


@dataclass(frozen=True)
class FunctionFamily:
    """Kraus list given by ``fn(theta)``.

    Derivatives use central differences with ``step`` unless an analytic
    ``derivative(theta, k)`` is supplied.
    """

    fn: Callable[[np.ndarray], Sequence[np.ndarray]]
    step: float = 1e-5
    derivative: Callable[[np.ndarray, int], Sequence[np.ndarray]] | None = None

    @property
    def kind(self) -> str:
        return "finite_difference" if self.derivative is None else "analytic"


def exponential_kraus(generators: GeneratorSet, theta) -> list[np.ndarray]:
    L = generators.n_kraus
    return [unitary_exp(generators.generator(theta, l)) / np.sqrt(L) for l in range(L)]


class KrausChannel:
    """Kraus operators evaluated at ``theta`` plus a rule for their theta dependence."""

    def __init__(self, ops, dependence=None, theta=None, q: int | None = None):
        mats = [as_matrix(o, "Kraus operator") for o in ops]
        if not mats:
            raise ContractError("a channel needs at least one Kraus operator")
        d = mats[0].shape[0]
        if any(m.shape != (d, d) for m in mats):
            raise DimensionError("Kraus operators must share one dimension")
        res = float(np.max(np.abs(sum(m.conj().T @ m for m in mats) - np.eye(d))))
        if res > COMPLETENESS_TOL:
            raise ContractError(f"Kraus completeness violated (residual {res:.3e})")
        self.kraus_ops = tuple(mats)
        self.dependence = dependence if dependence is not None else Constant()
        if isinstance(self.dependence, ExponentialFamily):
            q = self.dependence.generators.q
        self.theta = None if theta is None else _theta(theta, q)
        self.q = q if q is not None else (None if self.theta is None else self.theta.size)
        self.completeness_residual = res

    @classmethod
    def constant(cls, ops, q: int | None = None) -> "KrausChannel":
        return cls(ops, Constant(), None, q)

    @classmethod
    def exponential(cls, generators: GeneratorSet, theta) -> "KrausChannel":
        return cls(exponential_kraus(generators, theta), ExponentialFamily(generators), theta)

    @classmethod
    def from_function(cls, fn, theta, step: float = 1e-5, derivative=None) -> "KrausChannel":
        theta = _theta(theta)
        return cls(fn(theta), FunctionFamily(fn, step, derivative), theta)

    @property
    def dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    @property
    def n_kraus(self) -> int:
        return len(self.kraus_ops)

    def ops_at(self, theta) -> list[np.ndarray]:
        dep = self.dependence
        if isinstance(dep, Constant):
            return list(self.kraus_ops)
        theta = _theta(theta, self.q)
        if isinstance(dep, ExponentialFamily):
            return exponential_kraus(dep.generators, theta)
        return [as_matrix(o) for o in dep.fn(theta)]

    def at(self, theta) -> "KrausChannel":
        if isinstance(self.dependence, Constant):
            return self
        return KrausChannel(self.ops_at(theta), self.dependence, theta, self.q)

    def __repr__(self) -> str:
        return f"KrausChannel(dim={self.dim}, L={self.n_kraus}, dependence={self.dependence.kind})"


def identity_channel(dim: int = 2, q: int | None = None) -> KrausChannel:
    return KrausChannel.constant([np.eye(dim, dtype=complex)], q)


def unitary_channel(generators: GeneratorSet, theta) -> KrausChannel:
    if generators.n_kraus != 1:
        raise ContractError("unitary channels take a single-operator generator set")
    return KrausChannel.exponential(generators, theta)


def kraus_derivatives(ch: KrausChannel, theta, k: int) -> list[np.ndarray]:
    """Derivatives of every Kraus operator with respect to ``theta[k]``."""
    dep = ch.dependence
    if isinstance(dep, Constant):
        return [np.zeros_like(op) for op in ch.kraus_ops]
    theta = _theta(theta, ch.q)
    if not 0 <= k < theta.size:
        raise ContractError(f"parameter index {k} out of range")
    if isinstance(dep, ExponentialFamily):
        gens = dep.generators
        L = gens.n_kraus
        out = []
        for l in range(L):
            g = gens.generator(theta, l)
            avg = alpha_conjugation_integral(g, gens.ops[l, k])
            out.append(-1j / np.sqrt(L) * unitary_exp(g) @ avg)
        return out
    if isinstance(dep, FunctionFamily):
        if dep.derivative is not None:
            return [as_matrix(o) for o in dep.derivative(theta, k)]
        stacked = central_diff(lambda t: np.asarray(dep.fn(t), dtype=complex), theta, k, dep.step)
        return list(stacked)
    raise ContractError("channel carries no usable dependence descriptor")


def all_kraus_derivatives(ch: KrausChannel, theta) -> list[list[np.ndarray]]:
    """``out[k][l]`` is the derivative of Kraus operator ``l`` along ``theta[k]``."""
    q = ch.q if ch.q is not None else _theta(theta).size
    return [kraus_derivatives(ch, theta, k) for k in range(q)]


def apply_kraus(ops: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    return sum(op @ rho @ op.conj().T for op in ops)


def apply_channel(ch: KrausChannel, rho) -> DensityMatrix:
    r = as_density(rho)
    if r.dim != ch.dim:
        raise DimensionError(f"channel acts on dimension {ch.dim}, state has {r.dim}")
    return DensityMatrix.from_array(apply_kraus(ch.kraus_ops, r.matrix), r.dims, symmetrize=True)


def is_unital(ch: KrausChannel, tol: float = 1e-10) -> tuple[bool, float]:
    s = sum(op @ op.conj().T for op in ch.kraus_ops)
    res = float(np.max(np.abs(s - np.eye(ch.dim))))
    return res < tol, res


def stinespring_dilation(ch: KrausChannel) -> np.ndarray:
    """Isometry ``V = sum_l Pi_l (x) |l>`` with the system factor first."""
    L = ch.n_kraus
    if L > MAX_BATH:
        raise DimensionError(f"dilation supports at most {MAX_BATH} Kraus operators, got {L}")
    d = ch.dim
    v = np.zeros((d * L, d), dtype=complex)
    for l, op in enumerate(ch.kraus_ops):
        v[l::L, :] = op
    return v


def dilated_state(ch: KrausChannel, rho0, theta=None) -> DensityMatrix:
    """System-plus-bath state ``V rho0 V^dagger`` at ``theta``."""
    c = ch if theta is None else ch.at(theta)
    r = as_density(rho0)
    v = stinespring_dilation(c)
    return DensityMatrix.from_array(v @ r.matrix @ v.conj().T, (c.dim, c.n_kraus), symmetrize=True)


def reduce_dilation(rho_sb, d: int, L: int) -> np.ndarray:
    return partial_trace(rho_sb, [d, L], [0])


def compose(after: KrausChannel, before: KrausChannel) -> KrausChannel:
    """Channel applying ``before`` then ``after``; at most one may depend on theta."""
    if after.dim != before.dim:
        raise DimensionError("composed channels must act on the same dimension")
    if not isinstance(after.dependence, Constant) and not isinstance(before.dependence, Constant):
        raise ContractError("compose supports a theta-dependent channel on only one side")
    q = before.q if before.q is not None else after.q
    theta = before.theta if before.theta is not None else after.theta
    if theta is None:
        return KrausChannel.constant([a @ b for a in after.kraus_ops for b in before.kraus_ops], q)

    def fn(t):
        return [a @ b for a in after.ops_at(t) for b in before.ops_at(t)]

    def derivative(t, k):
        if isinstance(after.dependence, Constant):
            return [a @ db for a in after.kraus_ops for db in kraus_derivatives(before, t, k)]
        return [da @ b for da in kraus_derivatives(after, t, k) for b in before.kraus_ops]

    return KrausChannel(fn(theta), FunctionFamily(fn, derivative=derivative), theta, q)


def product_channel(per_particle: Sequence[KrausChannel]) -> KrausChannel:
    """Independent channels on each tensor factor; Kraus list is the Cartesian product."""
    chans = list(per_particle)
    if not chans:
        raise ContractError("product_channel needs at least one channel")
    total = int(np.prod([c.dim for c in chans]))
    if total > MAX_DIM:
        raise DimensionError(f"product dimension {total} exceeds cap {MAX_DIM}")
    qs = {c.q for c in chans if c.q is not None}
    if len(qs) > 1:
        raise DimensionError("per-particle channels disagree on the parameter count")
    q = qs.pop() if qs else None
    thetas = [c.theta for c in chans if c.theta is not None]
    if not thetas:
        return KrausChannel.constant([_kron_all(ops) for ops in itertools.product(*[c.kraus_ops for c in chans])], q)
    theta = thetas[0]

    def fn(t):
        return [_kron_all(ops) for ops in itertools.product(*[c.ops_at(t) for c in chans])]

    def derivative(t, k):
        ops = [c.ops_at(t) for c in chans]
        ders = [kraus_derivatives(c, t, k) for c in chans]
        out = []
        for idx in itertools.product(*[range(c.n_kraus) for c in chans]):
            acc = 0
            for n in range(len(chans)):
                factors = [ops[m][idx[m]] for m in range(len(chans))]
                factors[n] = ders[n][idx[n]]
                acc = acc + _kron_all(factors)
            out.append(acc)
        return out

    return KrausChannel(fn(theta), FunctionFamily(fn, derivative=derivative), theta, q)


def _kron_all(ops) -> np.ndarray:
    out = ops[0]
    for o in ops[1:]:
        out = np.kron(out, o)
    return out


# Halves of each Pauli matrix as printed for the splitting construction. The
# sigma_x and sigma_y halves are the raising/lowering parts and are not
# Hermitian, so exp(-i pi_l) built from them is not unitary.
_DISPLAYED_SPLIT = np.array(
    [
        [[[0, 1], [0, 0]], [[0, -1j], [0, 0]], [[1, 0], [0, 0]]],
        [[[0, 0], [1, 0]], [[0, 0], [1j, 0]], [[0, 0], [0, -1]]],
    ],
    dtype=complex,
)

# Hermitian counterpart: sigma_k = (sigma_k + X_k)/2 + (sigma_k - X_k)/2 with
# X_k^2 = 1. X_3 = 1 reproduces the diagonal split exactly; X_1 = sigma_y and
# X_2 = -sigma_x drop the factor i from the raising/lowering construction.
_HERMITIAN_X = (SY, -SX, I2)
_HERMITIAN_SPLIT = np.array(
    [
        [(p + x) / 2 for p, x in zip((SX, SY, SZ), _HERMITIAN_X)],
        [(p - x) / 2 for p, x in zip((SX, SY, SZ), _HERMITIAN_X)],
    ],
    dtype=complex,
)


def pauli_split_terms(variant: str = "hermitian") -> np.ndarray:
    """Array ``pi[l, k]`` with ``pi[0, k] + pi[1, k] = sigma_k``.

    ``variant="displayed"`` gives the raising/lowering split, which satisfies
    ``sum_l pi[l,k]^dagger pi[l,k] = 1`` but is not Hermitian. The default
    ``"hermitian"`` split satisfies both and is what the channel uses.
    """
    if variant == "displayed":
        return _DISPLAYED_SPLIT.copy()
    if variant == "hermitian":
        return _HERMITIAN_SPLIT.copy()
    raise ContractError(f"unknown splitting variant {variant!r}")


def pauli_split_channel(theta) -> KrausChannel:
    """Two-operator unital qubit channel ``Pi_l = exp(-i sum_k theta_k pi[l,k]) / sqrt(2)``."""
    return KrausChannel.exponential(GeneratorSet(pauli_split_terms("hermitian")), _theta(theta, 3))


def exponential_d_ops(ch: KrausChannel, theta) -> np.ndarray:
    """Per-(l, k) operators ``(1/L) * alpha_integral(G_l, G_lk)`` of an exponential family."""
    if not isinstance(ch.dependence, ExponentialFamily):
        raise ContractError("d operators are defined for exponential-family channels only")
    gens = ch.dependence.generators
    L, q = gens.n_kraus, gens.q
    out = np.empty((L, q, gens.dim, gens.dim), dtype=complex)
    for l in range(L):
        g = gens.generator(theta, l)
        for k in range(q):
            out[l, k] = alpha_conjugation_integral(g, gens.ops[l, k]) / L
    return out
