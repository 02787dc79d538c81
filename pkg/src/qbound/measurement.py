"""POVMs, outcome statistics and classical Fisher information."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channels import _theta
from .density import as_density
from .errors import ContractError, DimensionError
from .linalg import HERMITIAN_TOL, as_matrix, hermiticity_residual

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class Povm:
    """Measurement elements summing to the identity.

    Positivity is diagnosed rather than enforced: ``min_eigenvalues`` and
    ``is_positive`` tell whether this is a physical measurement.
    """

    elements: tuple[np.ndarray, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        mats = tuple(as_matrix(e, "POVM element") for e in self.elements)
        if not mats:
            raise ContractError("a POVM needs at least one element")
        d = mats[0].shape[0]
        if any(m.shape != (d, d) for m in mats):
            raise DimensionError("POVM elements must share one dimension")
        for i, m in enumerate(mats):
            if hermiticity_residual(m) > HERMITIAN_TOL:
                raise ContractError(f"POVM element {i} is not Hermitian")
        res = float(np.max(np.abs(sum(mats) - np.eye(d))))
        if res > 1e-8:
            raise ContractError(f"POVM elements do not sum to identity (residual {res:.3e})")
        labels = tuple(self.labels) or tuple(f"P{i}" for i in range(len(mats)))
        if len(labels) != len(mats):
            raise ContractError("one label per element is required")
        object.__setattr__(self, "elements", mats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "completeness_residual", res)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    @property
    def min_eigenvalues(self) -> np.ndarray:
        return np.array([np.linalg.eigvalsh((e + e.conj().T) / 2)[0] for e in self.elements])

    def is_positive(self, tol: float = 1e-10) -> bool:
        return bool(np.all(self.min_eigenvalues >= -tol))

    def diagnostics(self) -> dict:
        return {
            "completeness_residual": self.completeness_residual,
            "min_eigenvalues": dict(zip(self.labels, self.min_eigenvalues.tolist())),
            "positive": self.is_positive(),
        }


def projective_povm(basis: np.ndarray) -> Povm:
    """Rank-one projectors onto the columns of a unitary ``basis``."""
    b = np.asarray(basis, dtype=complex)
    return Povm(tuple(np.outer(b[:, i], b[:, i].conj()) for i in range(b.shape[1])))


def build_saturating_povm(rho_theta, derivs: Sequence[np.ndarray]) -> Povm:
    """Elements ``rho``, ``d_1 rho .. d_q rho`` and the normalising remainder.

    The derivative elements are traceless, hence indefinite; check
    ``diagnostics()`` before treating the result as a measurement.
    """
    rho = as_density(rho_theta).matrix
    ds = [as_matrix(d, "derivative") for d in derivs]
    for i, d in enumerate(ds):
        if hermiticity_residual(d) > 1e-8 or abs(np.trace(d)) > 1e-8:
            raise ContractError(f"derivative {i} must be Hermitian and traceless")
    ds = [(d + d.conj().T) / 2 for d in ds]
    rest = np.eye(rho.shape[0]) - rho - sum(ds, np.zeros_like(rho))
    labels = ("rho",) + tuple(f"d{m}" for m in range(len(ds))) + ("rest",)
    return Povm((rho, *ds, rest), labels)


def build_pure_state_povm(rho_theta, derivs: Sequence[np.ndarray], tol: float = 1e-10) -> Povm:
    """Projective measurement that saturates the bound for a pure state.

    Takes ``|psi>`` from ``rho_theta`` and the components of ``|d_m psi>``
    orthogonal to it, ``(1 - |psi><psi|) d_m rho |psi>``. These are
    orthonormalised symmetrically through ``G^{-1/2}`` with ``G`` their Gram
    matrix, so the overlaps ``<b_m|d_k psi>`` form the real matrix ``G^{1/2}``
    whenever ``Im G = 0``. Elements: ``|psi><psi|``, the ``|b_m><b_m|`` and the
    projector onto the remaining space.
    """
    rho = as_density(rho_theta).matrix
    w, v = np.linalg.eigh(rho)
    if abs(w[-1] - 1) > 1e-8:
        raise ContractError("build_pure_state_povm needs a pure state")
    psi = v[:, -1]
    proj = np.eye(rho.shape[0]) - np.outer(psi, psi.conj())
    vecs = np.column_stack([proj @ as_matrix(d) @ psi for d in derivs])
    gram = vecs.conj().T @ vecs
    gw, gv = np.linalg.eigh((gram + gram.conj().T) / 2)
    if gw[0] < tol * max(1.0, gw[-1]):
        raise ContractError("derivative directions are linearly dependent")
    basis = vecs @ (gv / np.sqrt(gw)) @ gv.conj().T
    elems = [np.outer(psi, psi.conj())] + [np.outer(b, b.conj()) for b in basis.T]
    rest = np.eye(rho.shape[0]) - sum(elems)
    rest = (rest + rest.conj().T) / 2
    labels = ("psi",) + tuple(f"b{m}" for m in range(len(derivs))) + ("rest",)
    return Povm((*elems, rest), labels)


def outcome_probs(povm: Povm, rho) -> np.ndarray:
    r = as_density(rho).matrix
    if r.shape[0] != povm.dim:
        raise DimensionError("POVM and state dimensions differ")
    return np.array([np.real(np.trace(e @ r)) for e in povm.elements])


@dataclass(frozen=True)
class FisherEstimate:
    matrix: np.ndarray
    dropped: int
    probabilities: np.ndarray


def classical_fim_fd(
    povm: Povm, rho_of_theta: Callable[[np.ndarray], object], theta, h: float = 1e-5
) -> FisherEstimate:
    """Classical Fisher matrix with central-difference probability derivatives.

    Outcomes with probability below 1e-12 are left out of the sum and counted
    in ``dropped``. A probability below ``-1e-12`` means the elements are not
    a valid measurement at this point and raises.
    """
    theta = _theta(theta)
    q = theta.size
    p = outcome_probs(povm, rho_of_theta(theta))
    if np.any(p < -PROB_FLOOR):
        raise ContractError(f"negative outcome probability {p.min():.3e}: not a valid POVM here")
    keep = p > PROB_FLOOR
    dropped = int(np.count_nonzero(~keep))
    if dropped:
        warnings.warn(f"{dropped} outcome(s) with p <= {PROB_FLOOR} excluded from the Fisher sum", stacklevel=2)
    grads = np.empty((q, p.size))
    for k in range(q):
        step = np.zeros(q)
        step[k] = h
        grads[k] = (outcome_probs(povm, rho_of_theta(theta + step)) - outcome_probs(povm, rho_of_theta(theta - step))) / (2 * h)
    g = grads[:, keep]
    mat = (g / p[keep]) @ g.T
    return FisherEstimate((mat + mat.T) / 2, dropped, p)


def _second_differences(f, theta: np.ndarray, h: float) -> np.ndarray:
    q = theta.size
    f0 = f(theta)
    d = f0.shape[0]
    out = np.empty((q, q, d, d), dtype=complex)
    eye = np.eye(q) * h
    for j in range(q):
        out[j, j] = (f(theta + eye[j]) - 2 * f0 + f(theta - eye[j])) / h**2
        for k in range(j + 1, q):
            v = (
                f(theta + eye[j] + eye[k])
                - f(theta + eye[j] - eye[k])
                - f(theta - eye[j] + eye[k])
                + f(theta - eye[j] - eye[k])
            ) / (4 * h**2)
            out[j, k] = out[k, j] = v
    return out


def second_derivatives(
    rho_of_theta: Callable[[np.ndarray], object], theta, h: float = 1e-4, richardson: bool = True
) -> np.ndarray:
    """``out[j, k] = d_j d_k rho`` by central second differences.

    With ``richardson`` the steps ``h`` and ``2h`` are combined to cancel the
    ``O(h^2)`` truncation term.
    """
    theta = _theta(theta)
    f = lambda t: as_density(rho_of_theta(t)).matrix  # noqa: E731
    fine = _second_differences(f, theta, h)
    if not richardson:
        return fine
    coarse = _second_differences(f, theta, 2 * h)
    return (4 * fine - coarse) / 3


def first_derivatives(rho_of_theta: Callable[[np.ndarray], object], theta, h: float = 1e-5) -> list[np.ndarray]:
    theta = _theta(theta)
    out = []
    for k in range(theta.size):
        step = np.zeros(theta.size)
        step[k] = h
        out.append((as_density(rho_of_theta(theta + step)).matrix - as_density(rho_of_theta(theta - step)).matrix) / (2 * h))
    return out


def classical_fim_limit(
    rho_theta, first_derivs: Sequence[np.ndarray], second_derivs, povm: Povm | None = None, tol: float = 1e-10
) -> np.ndarray:
    """Fisher matrix of ``povm`` in the limit theta -> theta_s.

    Outcomes with ``p > tol`` contribute ``d_j p d_k p / p``. An outcome with
    ``p = 0`` at the evaluation point has ``p ~ x^T H x / 2`` nearby, with
    ``H_jk = Tr(P d_j d_k rho)``; when ``H`` has rank one, as for the
    projectors of a saturating measurement, its limiting contribution is
    ``2 H``. Defaults to :func:`build_saturating_povm` of the given state.
    """
    rho = as_density(rho_theta).matrix
    ds = [as_matrix(d) for d in first_derivs]
    dd = np.asarray(second_derivs, dtype=complex)
    q = len(ds)
    if dd.shape[:2] != (q, q):
        raise DimensionError("second derivatives must be indexed [j, k]")
    if povm is None:
        povm = build_saturating_povm(rho_theta, ds)
    out = np.zeros((q, q))
    for e in povm.elements:
        p = np.real(np.trace(e @ rho))
        if p > tol:
            g = np.array([np.real(np.trace(e @ d)) for d in ds])
            out += np.outer(g, g) / p
        else:
            out += 2 * np.real(np.einsum("ab,jkba->jk", e, dd))
    return (out + out.T) / 2


def limit_fisher_extrapolation(
    povm: Povm,
    rho_of_theta: Callable[[np.ndarray], object],
    theta_s,
    direction,
    delta: float = 3e-3,
    h: float | None = None,
) -> np.ndarray:
    """Richardson estimate of ``lim_{x->0} J_C(theta_s + x * direction)``.

    Evaluates the finite-difference Fisher matrix at offsets ``delta``,
    ``delta/2`` and ``delta/4`` and removes the terms linear and quadratic in
    the offset. The derivative step defaults to a tenth of each offset.
    """
    theta_s = _theta(theta_s)
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)

    def at(x: float) -> np.ndarray:
        step = h if h is not None else x * 0.1
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return classical_fim_fd(povm, rho_of_theta, theta_s + x * u, step).matrix

    return (8 * at(delta / 4) - 6 * at(delta / 2) + at(delta)) / 3
