"""Fast seeded invariant suite behind ``qbound check``."""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from . import bounds as bd
from . import channels as chn
from . import states as st
from .density import DensityMatrix
from .linalg import SZ, alpha_conjugation_integral, bures_fidelity, partial_trace, unitary_exp


class CheckResult(NamedTuple):
    name: str
    passed: bool
    value: float
    tolerance: float


def _random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2


def _alpha_quadrature(rng) -> float:
    h, x = _random_hermitian(rng, 4), _random_hermitian(rng, 4)
    steps = 10_000
    grid = (np.arange(steps) + 0.5) / steps
    w, v = np.linalg.eigh(h)
    acc = np.zeros((4, 4), dtype=complex)
    for a in grid:
        u = (v * np.exp(1j * a * w)) @ v.conj().T
        acc += u @ x @ u.conj().T
    return float(np.max(np.abs(acc / steps - alpha_conjugation_integral(h, x))))


def _partial_trace_preserves(rng) -> float:
    rho = st.random_density(8, rng)
    return abs(np.trace(partial_trace(rho.matrix, [2, 2, 2], [1])) - 1)


def _fidelity_monotone(rng) -> float:
    a, b = st.random_density(4, rng), st.random_density(4, rng)
    ra = DensityMatrix(partial_trace(a.matrix, [2, 2], [0]))
    rb = DensityMatrix(partial_trace(b.matrix, [2, 2], [0]))
    return max(0.0, bures_fidelity(a, b) - bures_fidelity(ra, rb))


def _rdm_vs_exact(rng) -> float:
    theta = rng.uniform(-1, 1, 3)
    n = 3
    rho = st.apply_uniform_local_channel(st.ghz_state(int(rng.integers(1, 4)), n), st.dephasing_kraus(0.3))
    exact = bd.qfim_unitary_exact(bd.collective_generators(n), rho, theta)
    r1 = DensityMatrix(partial_trace(rho.matrix, rho.dims, [0]))
    r2 = DensityMatrix(partial_trace(rho.matrix, rho.dims, [0, 1]))
    via = bd.qfim_rdm(r1, r2, bd.local_b_ops(theta), n)
    return float(np.linalg.norm(exact - via) / np.linalg.norm(exact))


def _cq_above_fidelity(rng) -> float:
    theta = rng.uniform(-0.5, 0.5, 3)
    pc = chn.product_channel([chn.pauli_split_channel(theta)] * 2)
    rho = st.symmetrize(st.random_density(4, rng))
    c = bd.cq_bound(pc, rho, theta)
    j = bd.qfim_fidelity_oracle(lambda t: chn.apply_channel(pc.at(t), rho), theta)
    return max(0.0, -float(np.linalg.eigvalsh(c - j)[0]))


def _kraus_derivative_gap(rng) -> float:
    theta = rng.uniform(-1, 1, 3)
    ch = chn.pauli_split_channel(theta)
    gens = ch.dependence.generators
    fd = chn.KrausChannel.from_function(lambda t: chn.exponential_kraus(gens, t), theta)
    return max(
        float(np.max(np.abs(a - b)))
        for k in range(3)
        for a, b in zip(chn.kraus_derivatives(ch, theta, k), chn.kraus_derivatives(fd, theta, k))
    )


def _dilation_matches(rng) -> float:
    ch = st.amplitude_damping_kraus(rng.uniform(0, 2))
    rho = st.random_density(2, rng)
    sb = chn.dilated_state(ch, rho)
    return float(np.max(np.abs(partial_trace(sb.matrix, [2, 2], [0]) - chn.apply_channel(ch, rho).matrix)))


def _unitary_cq_equals_qfim(rng) -> float:
    theta = rng.uniform(-1, 1, 2)
    gen = chn.GeneratorSet.unitary([_random_hermitian(rng, 4), _random_hermitian(rng, 4)])
    rho = st.random_density(4, rng)
    return float(np.max(np.abs(bd.cq_bound(chn.unitary_channel(gen, theta), rho, theta) - bd.qfim_unitary_exact(gen, rho, theta))))


def _unitary_exp_unitary(rng) -> float:
    u = unitary_exp(_random_hermitian(rng, 8))
    return float(np.max(np.abs(u.conj().T @ u - np.eye(8))))


SUITE: list[tuple[str, Callable, float]] = [
    ("alpha_integral_vs_quadrature", _alpha_quadrature, 1e-6),
    ("partial_trace_preserves_trace", _partial_trace_preserves, 1e-12),
    ("fidelity_monotone_under_partial_trace", _fidelity_monotone, 1e-9),
    ("unitary_exp_is_unitary", _unitary_exp_unitary, 1e-10),
    ("qfim_rdm_vs_exact", _rdm_vs_exact, 1e-8),
    ("cq_minus_fidelity_qfim_psd", _cq_above_fidelity, 1e-7),
    ("kraus_derivative_analytic_vs_fd", _kraus_derivative_gap, 1e-6),
    ("dilation_reduces_to_channel", _dilation_matches, 1e-10),
    ("unitary_cq_equals_qfim", _unitary_cq_equals_qfim, 1e-9),
]


def run_suite(seed: int = 0, trials: int = 3) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    for name, fn, tol in SUITE:
        worst = max(float(fn(rng)) for _ in range(trials))
        out.append(CheckResult(name, worst < tol, worst, tol))
    unital = [chn.is_unital(st.dephasing_kraus(lam))[0] for lam in (0, 0.1, 1, 10)]
    damped = chn.is_unital(st.amplitude_damping_kraus(0.5))
    out.append(CheckResult("unitality_gate", all(unital) and not damped[0], abs(damped[1] - np.exp(-1)), 1e-12))
    q1 = bd.qfim_unitary_exact(chn.GeneratorSet.unitary([SZ]), st.PureState(np.array([1, 1]) / np.sqrt(2)), [0.0])
    out.append(CheckResult("plus_state_qfim_is_four", abs(q1[0, 0] - 4) < 1e-12, abs(q1[0, 0] - 4), 1e-12))
    return out
