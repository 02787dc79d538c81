import numpy as np
import pytest
from numpy.testing import assert_allclose

from qbound import bounds as bd
from qbound.channels import (
    GeneratorSet, apply_channel, compose, dilated_state, exponential_d_ops, pauli_split_channel,
    product_channel, unitary_channel,
)
from qbound.density import DensityMatrix, PureState
from qbound.errors import ContractError, DimensionError, RankDeficiencyError
from qbound.linalg import I2, PAULIS, SX, SY, SZ, central_diff, partial_trace, unitary_exp
from qbound.states import (
    amplitude_damping_kraus, apply_uniform_local_channel, averaged_rdm2,
    dephasing_kraus, ghz_state, random_density, random_pure, symmetrize,
)

from conftest import quadrature_average, random_hermitian

PLUS = PureState(np.array([1, 1]) / np.sqrt(2))


def encoded(gen, rho0):
    def family(t):
        u = unitary_exp(gen.generator(t))
        return DensityMatrix.from_array(u @ rho0.matrix @ u.conj().T, rho0.dims, symmetrize=True)

    return family


def marginals(rho):
    return (
        DensityMatrix.from_array(partial_trace(rho.matrix, rho.dims, [0]), symmetrize=True),
        DensityMatrix.from_array(partial_trace(rho.matrix, rho.dims, [0, 1]), symmetrize=True),
    )


def test_plus_state_phase_qfim_is_four():
    j = bd.qfim_unitary_exact(GeneratorSet.unitary([SZ]), PLUS, [0.0])
    assert j[0, 0] == pytest.approx(4, abs=1e-12)


def test_eigenstate_has_zero_qfim():
    j = bd.qfim_unitary_exact(GeneratorSet.unitary([SZ]), PureState(np.array([1, 0])), [0.7])
    assert j[0, 0] == pytest.approx(0, abs=1e-14)


def test_ghz_heisenberg_scaling():
    for n in (2, 3, 5):
        j = bd.qfim_unitary_exact(bd.collective_generators(n, [SZ]), ghz_state(3, n), [0.0])
        assert j[0, 0] == pytest.approx(4 * n**2, rel=1e-12)


def test_exact_qfim_matches_fidelity_oracle_on_pure_states(rng):
    gen = GeneratorSet.unitary([random_hermitian(rng, 3) for _ in range(2)])
    psi = random_pure(3, rng).density()
    theta = rng.uniform(-1, 1, 2)
    j = bd.qfim_unitary_exact(gen, psi, theta)
    oracle = bd.qfim_fidelity_oracle(encoded(gen, psi), theta)
    assert np.max(np.abs(j - oracle)) < 1e-5 * max(1, np.max(np.abs(j)))


def test_ald_solves_defining_equation(rng):
    gen = GeneratorSet.unitary([SX, SY, SZ])
    rho0 = random_density(2, rng)
    theta = rng.uniform(-1, 1, 3)
    alds = bd.ald_unitary(gen, rho0, theta)
    fam = encoded(gen, rho0)
    drho = [central_diff(lambda t: fam(t).matrix, theta, k, 1e-6) for k in range(3)]
    res = alds.residuals(drho)
    assert res["anti_hermitian"] < 1e-12
    assert res["mean"] < 1e-12
    assert res["defining_equation"] < 1e-8
    assert_allclose(alds.fisher(), bd.qfim_unitary_exact(gen, rho0, theta), atol=1e-12)


def test_exact_qfim_dimension_checks(rng):
    with pytest.raises(DimensionError):
        bd.qfim_unitary_exact(GeneratorSet.unitary([SZ]), random_density(4, rng), [0.1])


def test_local_b_ops_against_quadrature(rng):
    theta = rng.uniform(-1, 1, 3)
    h = sum(t * s for t, s in zip(theta, PAULIS))
    for b, s in zip(bd.local_b_ops(theta), PAULIS):
        assert np.max(np.abs(b - quadrature_average(h, s))) < 1e-6


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("n", [3, 4, 5])
def test_rdm_qfim_matches_exact_for_ghz(k, n, rng):
    theta = rng.uniform(-1, 1, 3)
    rho = ghz_state(k, n).density()
    r1, r2 = marginals(rho)
    exact = bd.qfim_unitary_exact(bd.collective_generators(n), rho, theta)
    via = bd.qfim_rdm(r1, r2, bd.local_b_ops(theta), n)
    assert np.linalg.norm(via - exact) <= 1e-10 * np.linalg.norm(exact)


def test_rdm_qfim_matches_exact_for_random_symmetric_state(rng):
    theta = rng.uniform(-1, 1, 3)
    rho = symmetrize(random_density(8, rng))
    exact = bd.qfim_unitary_exact(bd.collective_generators(3), rho, theta)
    via = bd.qfim_rdm(*marginals(rho), bd.local_b_ops(theta), 3)
    assert np.linalg.norm(via - exact) <= 1e-10 * np.linalg.norm(exact)


def test_product_state_qfim_is_linear_in_n(rng):
    theta = rng.uniform(-1, 1, 3)
    one = bd.qfim_unitary_exact(GeneratorSet.unitary(PAULIS), PLUS, theta)
    for n in (2, 3):
        state = PureState(np.ones(2**n) / np.sqrt(2**n))
        j = bd.qfim_unitary_exact(bd.collective_generators(n), state, theta)
        assert_allclose(j, n * one, atol=1e-12)


def test_magfield_single_particle_closed_form(rng):
    theta = rng.uniform(-1, 1, 3)
    numeric = bd.qfim_rdm_terms(I2 / 2, np.eye(4) / 4, bd.local_b_ops(theta))[0]
    assert_allclose(bd.magfield_qfim1(theta), numeric, atol=1e-13)
    assert_allclose(bd.magfield_qfim1(np.zeros(3)), 4 * np.eye(3))


def test_magfield_single_particle_spectrum():
    theta = np.array([0.0, 0.0, 1.2])
    w = np.sort(np.linalg.eigvalsh(bd.magfield_qfim1(theta)))
    s = np.sin(1.2) / 1.2
    assert_allclose(w, [4 * s**2, 4 * s**2, 4])


@pytest.mark.parametrize("lam", [0.0, 0.3, 2.0])
def test_magfield_full_matches_marginal_form(lam, rng):
    theta = rng.uniform(-1, 1, 3)
    rho2 = averaged_rdm2(dephasing_kraus(lam))
    for n in (3, 10, 100):
        via = bd.qfim_rdm(I2 / 2, rho2, bd.local_b_ops(theta), n)
        assert_allclose(bd.magfield_qfim_full(theta, lam, n), via, rtol=1e-12, atol=1e-10)


def test_magfield_full_matches_brute_force_mixture(rng):
    theta = rng.uniform(-1, 1, 3)
    n, lam = 3, 0.3
    noisy = [apply_uniform_local_channel(ghz_state(k, n), dephasing_kraus(lam)).matrix for k in (1, 2, 3)]
    rho = DensityMatrix.from_array(sum(noisy) / 3, (2,) * n, symmetrize=True)
    exact = bd.qfim_unitary_exact(bd.collective_generators(n), rho, theta)
    assert_allclose(bd.magfield_qfim_full(theta, lam, n), exact, atol=1e-10)


def test_unitary_cq_equals_qfim(rng):
    gen = GeneratorSet.unitary([random_hermitian(rng, 4) for _ in range(2)])
    theta = rng.uniform(-1, 1, 2)
    rho = random_density(4, rng)
    c = bd.cq_bound(unitary_channel(gen, theta), rho, theta)
    assert_allclose(c, bd.qfim_unitary_exact(gen, rho, theta), atol=1e-12)


def test_cq_is_pure_state_qfi_of_dilation(rng):
    theta = rng.uniform(-0.5, 0.5, 3)
    ch = pauli_split_channel(theta)
    psi = random_pure(2, rng).density()
    c = bd.cq_bound(ch, psi, theta)
    oracle = bd.qfim_fidelity_oracle(lambda t: dilated_state(ch, psi, t), theta)
    assert np.max(np.abs(c - oracle)) < 1e-5


def test_cq_dominates_fidelity_qfim(rng):
    theta = rng.uniform(-0.5, 0.5, 2)
    enc = unitary_channel(GeneratorSet.unitary([SX, SZ]), theta)
    ch = compose(amplitude_damping_kraus(0.4), enc)
    rho = random_density(2, rng)
    c = bd.cq_bound(ch, rho, theta)
    j = bd.qfim_fidelity_oracle(lambda t: apply_channel(ch.at(t), rho), theta)
    assert np.linalg.eigvalsh(c - j)[0] > -1e-7


@pytest.mark.parametrize("n", [2, 3])
def test_cq_rdm_matches_product_channel(n, rng):
    theta = rng.uniform(-1, 1, 3)
    single = pauli_split_channel(theta)
    rho = symmetrize(random_density(2**n, rng))
    exact = bd.cq_bound(product_channel([single] * n), rho, theta)
    r1, r2 = marginals(rho)
    via = bd.cq_rdm(r1, r2, exponential_d_ops(single, theta), n)
    assert_allclose(via, exact, atol=1e-11)
    one, two = bd.product_cq_terms(single, theta, r1, r2)
    assert_allclose(n * one + n * (n - 1) * two, exact, atol=1e-11)


def test_product_cq_terms_generic_family(rng):
    theta = rng.uniform(-1, 1, 2)
    single = compose(amplitude_damping_kraus(0.3), unitary_channel(GeneratorSet.unitary([SX, SY]), theta))
    rho = symmetrize(random_density(4, rng))
    exact = bd.cq_bound(product_channel([single] * 2), rho, theta)
    one, two = bd.product_cq_terms(single, theta, *marginals(rho))
    assert_allclose(2 * one + 2 * two, exact, atol=1e-11)


def test_saturation_residuals_ghz():
    theta = [0.3, 0.2, 0.1]
    n = 3
    rho = ghz_state(3, n)
    full = bd.saturation_residual_unitary(bd.collective_generators(n), rho, theta)
    r1, _ = marginals(rho.density())
    assert full < 1e-12
    assert bd.saturation_residual_rdm(r1, bd.local_b_ops(theta), n) < 1e-12


def test_saturation_residual_factor_two(rng):
    theta = rng.uniform(-1, 1, 3)
    rho = symmetrize(random_density(8, rng))
    full = bd.saturation_residual_unitary(bd.collective_generators(3), rho, theta)
    r1, _ = marginals(rho)
    rdm = bd.saturation_residual_rdm(r1, bd.local_b_ops(theta), 3)
    assert rdm > 1e-3
    assert full == pytest.approx(2 * rdm, rel=1e-10)


def test_noisy_saturation_residual_reduces_to_unitary(rng):
    gen = GeneratorSet.unitary([SX, SY])
    theta = rng.uniform(-1, 1, 2)
    rho = random_density(2, rng)
    # both reduce to Im Tr(A_j A_k rho0); the commutator form carries a factor 8
    noisy = bd.saturation_residual_noisy(unitary_channel(gen, theta), rho, theta)
    unitary = bd.saturation_residual_unitary(gen, rho, theta)
    assert noisy == pytest.approx(unitary / 8, rel=1e-8)


def test_holevo_witness_ghz_real():
    theta = [0.3, 0.2, 0.1]
    n = 3
    gen = bd.collective_generators(n)
    rho = ghz_state(3, n)
    j = bd.qfim_unitary_exact(gen, rho, theta)
    w, im = bd.holevo_witness(j, bd.ald_unitary(gen, rho, theta))
    assert im < 1e-10
    assert_allclose(w.real, np.linalg.inv(j), atol=1e-10)


def test_holevo_witness_mixed_qubit_complex():
    rho = DensityMatrix(np.array([[0.8, 0.1], [0.1, 0.2]], dtype=complex))
    gen = GeneratorSet.unitary([SX, SY])
    theta = [0.2, -0.1]
    j = bd.qfim_unitary_exact(gen, rho, theta)
    w, im = bd.holevo_witness(j, bd.ald_unitary(gen, rho, theta))
    assert im > 1e-3
    assert_allclose(w.real, np.linalg.inv(j), atol=1e-10)


def test_report_validation():
    with pytest.raises(ContractError):
        bd.BoundReport(1, j_q=np.array([[-1.0]]))
    with pytest.raises(ContractError):
        bd.BoundReport(1, j_q=np.array([[2.0]]), c_q=np.array([[1.0]]))
    with pytest.raises(DimensionError):
        bd.BoundReport(2, j_q=np.eye(3))
    rep = bd.BoundReport(2, j_q=np.diag([4.0, 2.0]))
    assert rep.scalar_cost() == pytest.approx(0.75)
    assert rep.scalar_cost(repetitions=3) == pytest.approx(0.25)
    assert rep.scalar_cost(cost=np.diag([1.0, 0.0])) == pytest.approx(0.25)


def test_rank_deficient_inverse_raises():
    with pytest.raises(RankDeficiencyError):
        bd.safe_inverse(np.diag([1.0, 0.0]))
    with pytest.raises(RankDeficiencyError):
        bd.BoundReport(2, j_q=np.diag([1.0, 1e-12])).scalar_cost()


def test_super_heisenberg_two_body_vanishes_for_mixed_pair():
    theta = [0.2, 0.1, 0.05]
    terms = bd.super_heisenberg_bound(pauli_split_channel(theta), np.eye(4) / 4, 4, theta)
    assert np.max(np.abs(terms.two_body)) < 1e-12
    assert np.max(np.abs(terms.one_body)) > 0.1


def test_super_heisenberg_two_body_bell_state():
    theta = [0.2, 0.1, 0.05]
    bell = ghz_state(3, 2).density()
    terms = bd.super_heisenberg_bound(pauli_split_channel(theta), bell, 10, theta)
    assert np.max(np.abs(terms.two_body)) > 1e-3
    assert_allclose(terms.matrix, 10 * terms.one_body + 90 * terms.two_body)
    assert_allclose(terms.at(20).matrix, 20 * terms.one_body + 380 * terms.two_body)


def test_super_heisenberg_rejects_biased_marginal():
    theta = [0.2, 0.1, 0.05]
    with pytest.raises(ContractError):
        bd.super_heisenberg_bound(pauli_split_channel(theta), np.diag([1.0, 0, 0, 0]), 2, theta)


def test_resource_count_validation():
    with pytest.raises(ContractError):
        bd.qfim_rdm(I2 / 2, np.eye(4) / 4, bd.local_b_ops([0.1, 0.2, 0.3]), 0)
    with pytest.raises(ContractError):
        bd.magfield_qfim_full([0.1, 0.2, 0.3], 0.1, 0)
