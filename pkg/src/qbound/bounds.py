"""Quantum Fisher information matrices and the Kraus-channel upper bound.

The quantum Fisher matrix here is the one generated by anti-Hermitian
logarithmic derivatives ``L_k`` with ``(L_k rho + rho L_k^dagger)/2 = d_k rho``
and ``J^{jk} = Re Tr(L_j^dagger L_k rho)``. For mixed states it is an upper
bound on the usual symmetric-logarithmic-derivative matrix, which is what the
Bures-fidelity oracle measures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channels import (
    GeneratorSet,
    KrausChannel,
    all_kraus_derivatives,
    _theta,
)
from .density import DensityMatrix, as_density
from .errors import ContractError, DimensionError, RankDeficiencyError
from .linalg import (
    I2,
    PAULIS,
    alpha_conjugation_integral,
    bures_fidelity,
    kron,
    unitary_exp,
)

PSD_FLOOR = 1e-8
CONDITION_LIMIT = 1e8
MAX_EXACT_DIM = 2**10


def _sym(m: np.ndarray) -> np.ndarray:
    m = np.real_if_close(np.asarray(m), tol=1e6)
    return (np.real(m) + np.real(m).T) / 2


def check_psd(m: np.ndarray, name: str = "matrix", floor: float = PSD_FLOOR) -> np.ndarray:
    """Raise unless ``m`` is symmetric and PSD up to ``floor`` times its scale."""
    m = np.asarray(m, dtype=float)
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if m.size and np.max(np.abs(m - m.T)) > 1e-9 * scale:
        raise ContractError(f"{name} is not symmetric")
    if m.size:
        lo = float(np.linalg.eigvalsh(m)[0])
        if lo < -floor * scale:
            raise ContractError(f"{name} has eigenvalue {lo:.3e} below the PSD floor")
    return m


def safe_inverse(j: np.ndarray, cond_limit: float = CONDITION_LIMIT) -> np.ndarray:
    w, v = np.linalg.eigh(_sym(j))
    top = float(np.max(np.abs(w))) if w.size else 0.0
    if top == 0.0 or np.min(np.abs(w)) * cond_limit < top:
        low = float(np.min(np.abs(w)))
        cond = np.inf if low == 0.0 else top / low
        raise RankDeficiencyError(f"Fisher matrix is rank deficient (condition number {cond:.3e})")
    return (v / w) @ v.T


@dataclass
class BoundReport:
    """Fisher-type matrices for one probe/channel configuration."""

    q: int
    j_q: np.ndarray | None = None
    j_c: np.ndarray | None = None
    c_q: np.ndarray | None = None
    methods: dict = field(default_factory=dict)
    saturation_residuals: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("j_q", "j_c", "c_q"):
            m = getattr(self, name)
            if m is None:
                continue
            m = np.asarray(m, dtype=float)
            if m.shape != (self.q, self.q):
                raise DimensionError(f"{name} has shape {m.shape}, expected ({self.q}, {self.q})")
            setattr(self, name, check_psd(m, name, floor=1e-9))
        if self.j_q is not None and self.c_q is not None:
            gap = float(np.linalg.eigvalsh(self.c_q - self.j_q)[0])
            if gap < -1e-8 * max(1.0, float(np.max(np.abs(self.c_q)))):
                raise ContractError(f"C_Q - J_Q has eigenvalue {gap:.3e}")

    def scalar_cost(self, cost: np.ndarray | None = None, which: str = "j_q", repetitions: int = 1) -> float:
        """``Tr(G M^{-1}) / nu`` for the chosen matrix ``M``."""
        m = getattr(self, which)
        if m is None:
            raise ContractError(f"report has no {which}")
        g = np.eye(self.q) if cost is None else np.asarray(cost, dtype=float)
        if repetitions < 1:
            raise ContractError("repetition count must be at least 1")
        return float(np.trace(g @ safe_inverse(m))) / repetitions


@dataclass(frozen=True)
class AldSet:
    """Anti-Hermitian logarithmic derivatives at one parameter point."""

    ops: tuple[np.ndarray, ...]
    rho_theta: DensityMatrix

    @property
    def q(self) -> int:
        return len(self.ops)

    def fisher(self) -> np.ndarray:
        rho = self.rho_theta.matrix
        q = self.q
        out = np.empty((q, q))
        for j in range(q):
            for k in range(q):
                out[j, k] = np.real(np.trace(self.ops[j].conj().T @ self.ops[k] @ rho))
        return _sym(out)

    def residuals(self, drho: Sequence[np.ndarray] | None = None) -> dict:
        """Anti-Hermiticity, zero mean and (optionally) the defining equation."""
        rho = self.rho_theta.matrix
        out = {
            "anti_hermitian": max(float(np.max(np.abs(l + l.conj().T))) for l in self.ops),
            "mean": max(abs(np.trace(rho @ l)) for l in self.ops),
        }
        if drho is not None:
            out["defining_equation"] = max(
                float(np.max(np.abs((l @ rho + rho @ l.conj().T) / 2 - d))) for l, d in zip(self.ops, drho)
            )
        return out


def conjugation_averages(h: np.ndarray, parts: Sequence[np.ndarray]) -> list[np.ndarray]:
    return [alpha_conjugation_integral(h, p) for p in parts]


def ald_unitary(gen: GeneratorSet, rho0, theta) -> AldSet:
    rho0 = as_density(rho0)
    hs = gen.hamiltonians()
    theta = _theta(theta, gen.q)
    h = gen.generator(theta)
    u = unitary_exp(h)
    rho = DensityMatrix.from_array(u @ rho0.matrix @ u.conj().T, rho0.dims, symmetrize=True)
    ops = []
    for a in conjugation_averages(h, hs):
        m = u @ a @ u.conj().T
        dm = m - np.trace(m @ rho.matrix) * np.eye(m.shape[0])
        ops.append(-2j * dm)
    return AldSet(tuple(ops), rho)


def _covariance_matrix(ops: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    """``2 Tr[(dA_j dA_k + dA_k dA_j) rho]`` with mean-subtracted operators."""
    eye = np.eye(rho.shape[0])
    centred = [a - np.trace(a @ rho) * eye for a in ops]
    q = len(ops)
    out = np.empty((q, q))
    for j in range(q):
        for k in range(j, q):
            v = 2 * np.trace((centred[j] @ centred[k] + centred[k] @ centred[j]) @ rho)
            out[j, k] = out[k, j] = v.real
    return out


def qfim_unitary_exact(gen: GeneratorSet, rho0, theta) -> np.ndarray:
    rho0 = as_density(rho0)
    if rho0.dim > MAX_EXACT_DIM:
        raise DimensionError(f"exact QFIM supports dimension up to {MAX_EXACT_DIM}")
    if rho0.dim != gen.dim:
        raise DimensionError("generator and state dimensions differ")
    h = gen.generator(_theta(theta, gen.q))
    return _covariance_matrix(conjugation_averages(h, gen.hamiltonians()), rho0.matrix)


def local_b_ops(theta, singles: Sequence[np.ndarray] = PAULIS) -> list[np.ndarray]:
    """Single-particle averages ``b_k`` for ``h = sum_k theta_k s_k``."""
    theta = _theta(theta, len(singles))
    h = np.tensordot(theta, np.asarray(singles), axes=(0, 0))
    return conjugation_averages(h, singles)


def collective_generators(n: int, singles: Sequence[np.ndarray] = PAULIS) -> GeneratorSet:
    """``H_k = sum_n s_k^{[n]}`` on ``n`` particles."""
    d = singles[0].shape[0]
    ident = np.eye(d)
    hs = []
    for s in singles:
        total = 0
        for site in range(n):
            factors = [ident] * n
            factors[site] = s
            total = total + kron(*factors)
        hs.append(total)
    return GeneratorSet.unitary(hs)


def _one_two(rho1, rho2, ops: Sequence[np.ndarray]):
    r1 = as_density(rho1).matrix
    r2 = as_density(rho2).matrix
    d = r1.shape[0]
    if r2.shape[0] != d * d:
        raise DimensionError("rho2 must act on two copies of the rho1 space")
    if any(b.shape != (d, d) for b in ops):
        raise DimensionError("single-particle operators do not match rho1")
    return r1, r2


def qfim_rdm_terms(rho1, rho2, b_ops: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """One- and two-particle contributions to the permutation-invariant QFIM."""
    r1, r2 = _one_two(rho1, rho2, b_ops)
    q = len(b_ops)
    mean = [np.trace(r1 @ b) for b in b_ops]
    one = np.empty((q, q))
    two = np.empty((q, q))
    for j in range(q):
        for k in range(q):
            one[j, k] = 4 * np.real(np.trace(r1 @ b_ops[j] @ b_ops[k]) - mean[j] * mean[k])
            two[j, k] = 4 * np.real(np.trace(r2 @ np.kron(b_ops[j], b_ops[k])) - mean[j] * mean[k])
    return _sym(one), _sym(two)


def qfim_rdm(rho1, rho2, b_ops: Sequence[np.ndarray], n: int) -> np.ndarray:
    """``N J1 + N(N-1) J2`` from one- and two-particle marginals."""
    if n < 1:
        raise ContractError("resource count must be at least 1")
    one, two = qfim_rdm_terms(rho1, rho2, b_ops)
    return n * one + n * (n - 1) * two


def magfield_qfim1(theta) -> np.ndarray:
    """Closed-form single-particle QFIM for ``h = theta . sigma`` and ``rho1 = 1/2``."""
    theta = _theta(theta, 3)
    xi = float(np.linalg.norm(theta))
    s2 = np.sinc(xi / np.pi) ** 2
    eta = theta / xi if xi > 0 else np.zeros(3)
    return 4 * ((1 - s2) * np.outer(eta, eta) + s2 * np.eye(3))


def magfield_qfim_full(theta, lam: float, n: int) -> np.ndarray:
    """QFIM of the direction-averaged dephased GHZ probe with ``n`` particles."""
    from .states import dephasing_kraus

    if n < 1:
        raise ContractError("resource count must be at least 1")
    ops = dephasing_kraus(lam).kraus_ops
    b = local_b_ops(theta)
    f = [sum(e @ bj @ e for e in ops) for bj in b]
    two = np.array([[np.real(np.trace(fj @ fk)) for fk in f] for fj in f])
    return n * magfield_qfim1(theta) + 2 * n * (n - 1) / 3 * two


def _kraus_pieces(ch: KrausChannel, theta):
    ch_t = ch.at(theta)
    ops = ch_t.kraus_ops
    ders = all_kraus_derivatives(ch, theta)
    return ops, ders


def cq_bound(ch: KrausChannel, rho0, theta) -> np.ndarray:
    """Upper bound ``C_Q`` from Kraus operators and their derivatives."""
    rho = as_density(rho0).matrix
    if rho.shape[0] != ch.dim:
        raise DimensionError("channel and state dimensions differ")
    ops, ders = _kraus_pieces(ch, theta)
    q = len(ders)
    k2 = [1j * np.trace(sum(d.conj().T @ p for d, p in zip(ders[k], ops)) @ rho) for k in range(q)]
    out = np.empty((q, q))
    for j in range(q):
        for k in range(q):
            k1 = sum(dj.conj().T @ dk for dj, dk in zip(ders[j], ders[k]))
            out[j, k] = 4 * np.real(np.trace(k1 @ rho) - k2[j] * k2[k])
    return _sym(out)


def cq_rdm_terms(rho1, rho2, d_ops: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One- and two-particle parts of ``C_Q`` from ``d[l, k]`` operators."""
    d_ops = np.asarray(d_ops, dtype=complex)
    L, q = d_ops.shape[:2]
    r1, r2 = _one_two(rho1, rho2, list(d_ops.reshape(L * q, *d_ops.shape[2:])))
    summed = d_ops.sum(axis=0)
    mean = [np.trace(r1 @ summed[k]) for k in range(q)]
    one = np.empty((q, q))
    two = np.empty((q, q))
    for j in range(q):
        for k in range(q):
            sq = sum(np.trace(r1 @ d_ops[l, j] @ d_ops[l, k]) for l in range(L))
            one[j, k] = 4 * np.real(L * sq - mean[j] * mean[k])
            two[j, k] = 4 * np.real(np.trace(r2 @ np.kron(summed[j], summed[k])) - mean[j] * mean[k])
    return _sym(one), _sym(two)


def cq_rdm(rho1, rho2, d_ops: np.ndarray, n: int) -> np.ndarray:
    if n < 1:
        raise ContractError("resource count must be at least 1")
    one, two = cq_rdm_terms(rho1, rho2, d_ops)
    return n * one + n * (n - 1) * two


def product_cq_terms(ch: KrausChannel, theta, rho1, rho2) -> tuple[np.ndarray, np.ndarray]:
    """``C_Q`` parts for ``N`` copies of a per-particle channel, any Kraus family."""
    ops, ders = _kraus_pieces(ch, theta)
    r1, r2 = _one_two(rho1, rho2, list(ops))
    q = len(ders)
    x = [sum(d.conj().T @ p for d, p in zip(ders[k], ops)) for k in range(q)]
    y = [sum(p.conj().T @ d for d, p in zip(ders[k], ops)) for k in range(q)]
    mean = [1j * np.trace(r1 @ x[k]) for k in range(q)]
    one = np.empty((q, q))
    two = np.empty((q, q))
    for j in range(q):
        for k in range(q):
            k1 = sum(dj.conj().T @ dk for dj, dk in zip(ders[j], ders[k]))
            one[j, k] = 4 * np.real(np.trace(r1 @ k1) - mean[j] * mean[k])
            two[j, k] = 4 * np.real(np.trace(r2 @ np.kron(x[j], y[k])) - mean[j] * mean[k])
    return _sym(one), _sym(two)


def saturation_residual_unitary(gen: GeneratorSet, rho0, theta) -> float:
    """Largest ``|Tr([L_j, L_k] rho(theta))|`` over parameter pairs."""
    alds = ald_unitary(gen, rho0, theta)
    rho = alds.rho_theta.matrix
    best = 0.0
    for j in range(alds.q):
        for k in range(j + 1, alds.q):
            lj, lk = alds.ops[j], alds.ops[k]
            best = max(best, abs(np.trace((lj @ lk - lk @ lj) @ rho)))
    return float(best)


def saturation_residual_rdm(rho1, b_ops: Sequence[np.ndarray], n: int) -> float:
    """``max |4 N Im Tr(rho1 b_j b_k)|``, the one-particle form of the commutator test.

    For a permutation-invariant probe it is half of
    :func:`saturation_residual_unitary`.
    """
    r1 = as_density(rho1).matrix
    q = len(b_ops)
    vals = [abs(4 * n * np.imag(np.trace(r1 @ b_ops[j] @ b_ops[k]))) for j in range(q) for k in range(q)]
    return float(max(vals, default=0.0))


def saturation_residual_noisy(ch: KrausChannel, rho0, theta) -> float:
    """Largest ``|Im sum_l Tr(d_j Pi_l^dagger d_k Pi_l rho)|``."""
    rho = as_density(rho0).matrix
    _, ders = _kraus_pieces(ch, theta)
    q = len(ders)
    best = 0.0
    for j in range(q):
        for k in range(q):
            k1 = sum(dj.conj().T @ dk for dj, dk in zip(ders[j], ders[k]))
            best = max(best, abs(np.imag(np.trace(k1 @ rho))))
    return float(best)


def qfim_fidelity_oracle(
    rho_of_theta: Callable[[np.ndarray], object], theta, eps: float = 1e-3
) -> np.ndarray:
    """Fisher matrix from the local expansion ``F = 1 - eps^T J eps / 8``.

    Uses the root fidelity along ``e_j`` and ``e_j + e_k`` at steps ``eps`` and
    ``eps/2``, combined by Richardson extrapolation. This measures the
    symmetric-logarithmic-derivative matrix of the family.
    """
    theta = _theta(theta)
    q = theta.size
    base = as_density(rho_of_theta(theta))

    def curvature(direction: np.ndarray, step: float) -> float:
        vals = []
        for sign in (1, -1):
            other = as_density(rho_of_theta(theta + sign * step * direction))
            f = bures_fidelity(base, other)
            if f > 1 + 1e-9:
                raise ContractError(f"fidelity {f!r} exceeds 1")
            vals.append(1 - f)
        # symmetric average cancels odd orders in the step
        return 8 * (vals[0] + vals[1]) / 2 / step**2

    def extrapolated(direction: np.ndarray) -> float:
        coarse = curvature(direction, eps)
        fine = curvature(direction, eps / 2)
        return (4 * fine - coarse) / 3

    eye = np.eye(q)
    diag = [extrapolated(eye[j]) for j in range(q)]
    out = np.diag(diag)
    for j in range(q):
        for k in range(j + 1, q):
            both = extrapolated(eye[j] + eye[k])
            out[j, k] = out[k, j] = (both - diag[j] - diag[k]) / 2
    return out


def holevo_witness(j_q: np.ndarray, alds: AldSet, rho_theta=None) -> tuple[np.ndarray, float]:
    """``W_jk = Tr(X_j^dagger X_k rho)`` with ``X = J^{-1} L``; returns ``W`` and ``max |Im W|``."""
    rho = (alds.rho_theta if rho_theta is None else as_density(rho_theta)).matrix
    inv = safe_inverse(j_q)
    q = alds.q
    xs = [sum(inv[j, k] * alds.ops[k] for k in range(q)) for j in range(q)]
    w = np.array([[np.trace(xs[j].conj().T @ xs[k] @ rho) for k in range(q)] for j in range(q)])
    return w, float(np.max(np.abs(w.imag)))


@dataclass(frozen=True)
class SuperHeisenbergTerms:
    """Per-pair contributions; the bound is ``n * one_body + n(n-1) * two_body``."""

    one_body: np.ndarray
    two_body: np.ndarray
    n: int

    @property
    def matrix(self) -> np.ndarray:
        return self.n * self.one_body + self.n * (self.n - 1) * self.two_body

    def at(self, n: int) -> "SuperHeisenbergTerms":
        return SuperHeisenbergTerms(self.one_body, self.two_body, n)


def super_heisenberg_bound(per_particle_ch: KrausChannel, rho2_evolved, n: int, theta) -> SuperHeisenbergTerms:
    """Bound assembled from evolved two-particle marginals with ``rho1 = 1/2``.

    Uses the ``Pi d(Pi^dagger)`` ordering: ``X_k = sum_l Pi_l d_k Pi_l^dagger``
    and ``Y_k = sum_l d_k Pi_l Pi_l^dagger``.
    """
    if n < 1:
        raise ContractError("resource count must be at least 1")
    r2 = as_density(rho2_evolved)
    if r2.dims != (2, 2):
        raise DimensionError("rho2_evolved must be a two-qubit state")
    from .linalg import partial_trace

    for keep in (0, 1):
        res = float(np.max(np.abs(partial_trace(r2.matrix, [2, 2], [keep]) - I2 / 2)))
        if res > 1e-8:
            raise ContractError(f"marginal {keep} of rho2_evolved is not maximally mixed (residual {res:.3e})")
    ops, ders = _kraus_pieces(per_particle_ch, theta)
    if per_particle_ch.dim != 2:
        raise DimensionError("per-particle channel must act on a qubit")
    q = len(ders)
    x = [sum(p @ d.conj().T for p, d in zip(ops, ders[k])) for k in range(q)]
    y = [sum(d @ p.conj().T for p, d in zip(ops, ders[k])) for k in range(q)]
    one = np.empty((q, q))
    two = np.empty((q, q))
    for j in range(q):
        for k in range(q):
            k1 = sum(p @ dj.conj().T @ dk @ p.conj().T for p, dj, dk in zip(ops, ders[j], ders[k]))
            prod = np.trace(1j * x[j]) * np.trace(1j * x[k])
            one[j, k] = np.real(2 * np.trace(k1) - prod)
            two[j, k] = np.real(4 * np.trace(np.kron(x[j], y[k]) @ r2.matrix) - prod)
    return SuperHeisenbergTerms(_sym(one), _sym(two), n)
