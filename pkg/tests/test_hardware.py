import numpy as np
import pytest

from tensorfp.hardware import (
    IqImbalance,
    PaModel,
    alpha_recursion_reference,
    build_feature_vector,
    build_pilot_matrix,
    envelope_oracle,
    feature_length,
    iq_coeffs,
    monomial_basis,
    nominal_feature_vector,
)

PERFECT = IqImbalance()
LINEAR = PaModel(lambdas=(1.0,))


def crandn(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def random_profile(rng):
    iq = IqImbalance.symmetric(eps=rng.uniform(-0.05, 0.05), beta=rng.uniform(-0.02, 0.02))
    pa = PaModel(lambdas=(1.0, rng.uniform(-0.5, 0.5)))
    return iq, pa


def test_iq_coeffs_perfect_hardware():
    assert iq_coeffs(PERFECT) == (1.0 + 0j, 0.0 + 0j)


def test_iq_coeffs_symmetric_small_phase():
    beta = 0.01
    mu, v = iq_coeffs(IqImbalance.symmetric(eps=0.0, beta=beta))
    assert mu == pytest.approx(np.cos(beta))
    # v = (e^{-j beta} - e^{j beta}) / 2 = -j sin(beta)
    assert v == pytest.approx(-1j * np.sin(beta))


def test_iq_coeffs_device2_of_reference_scenario():
    eps, beta = -0.0028, np.deg2rad(0.0175)
    mu, v = iq_coeffs(IqImbalance.symmetric(eps=eps, beta=beta))
    gi, gq = 1 + eps, 1 - eps
    assert mu == pytest.approx((gi * np.exp(1j * beta) + gq * np.exp(-1j * beta)) / 2)
    assert v == pytest.approx((gi * np.exp(-1j * beta) - gq * np.exp(1j * beta)) / 2)
    assert abs(v) < 1e-2


def test_pilot_matrix_smallest_model():
    s = np.array([1 + 1j, 2 - 1j, 0.5j, -1.5])
    pm = build_pilot_matrix(s, pa_order=1)
    assert pm.s_tilde.shape == (4, 2)
    np.testing.assert_allclose(pm.s_tilde[:, 0], s)
    np.testing.assert_allclose(pm.s_tilde[:, 1], np.conj(s))


def test_pilot_matrix_order3_shape_and_entries():
    rng = np.random.default_rng(0)
    s = crandn(rng, 10)
    pm = build_pilot_matrix(s, pa_order=3)
    assert pm.s_tilde.shape == (10, 6)
    for col, (a, b) in enumerate(monomial_basis(3)):
        np.testing.assert_allclose(pm.s_tilde[:, col], s**a * np.conj(s) ** b)


def test_pilot_matrix_errors():
    with pytest.raises(ValueError):
        build_pilot_matrix(np.array([]), 1)
    with pytest.raises(ValueError):
        build_pilot_matrix(np.ones(8), 2)


@pytest.mark.parametrize("order", [1, 3, 5, 7])
def test_feature_length_law(order):
    assert feature_length(order) == (order + 1) * (order + 3) // 4
    iq, _ = random_profile(np.random.default_rng(order))
    pa = PaModel(lambdas=tuple([1.0] + [0.1] * ((order - 1) // 2)))
    assert build_feature_vector(iq, pa).shape[0] == feature_length(order)


def test_feature_vector_impairment_free_limit():
    z = build_feature_vector(PERFECT, PaModel(lambdas=(1.0, 0.0)))
    np.testing.assert_allclose(z, [0, 0, 0, 0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(z, nominal_feature_vector(3), atol=1e-15)


def test_feature_vector_cubic_term_only():
    lam3 = 0.37
    z = build_feature_vector(PERFECT, PaModel(lambdas=(1.0, lam3)))
    # Only the linear mu-term and the |s|^2 s monomial (a=2, b=1) survive.
    expected = np.array([0, 0.75 * lam3, 0, 0, 1, 0])
    np.testing.assert_allclose(z, expected, atol=1e-15)


def test_feature_vector_matches_envelope_oracle():
    rng = np.random.default_rng(1)
    s = crandn(rng, 256)
    for _ in range(10):
        iq, pa = random_profile(rng)
        pm = build_pilot_matrix(s, pa.order)
        z = build_feature_vector(iq, pa)
        direct = envelope_oracle(s, iq, pa)
        err = np.linalg.norm(pm.s_tilde @ z - direct) / np.linalg.norm(direct)
        assert err < 1e-12


def test_polynomial_identity_many_samples():
    rng = np.random.default_rng(2)
    s = crandn(rng, 1000)
    iq = IqImbalance(eps_i=0.03, eps_q=-0.01, beta_i=0.02, beta_q=0.005)
    pa = PaModel(lambdas=(1.0, -0.2, 0.05))
    pm = build_pilot_matrix(s, pa.order)
    z = build_feature_vector(iq, pa)
    direct = envelope_oracle(s, iq, pa)
    assert np.linalg.norm(pm.s_tilde @ z - direct) / np.linalg.norm(direct) < 1e-12


def test_envelope_oracle_trivial_cases():
    s = np.array([1.0 + 0j, -1j, 0.3 + 0.4j])
    np.testing.assert_allclose(envelope_oracle(s, PERFECT, LINEAR), s)
    iq = IqImbalance.symmetric(eps=0.02, beta=0.01)
    mu, v = iq_coeffs(iq)
    ones = np.ones(5, dtype=complex)
    np.testing.assert_allclose(envelope_oracle(ones, iq, LINEAR), (mu + v) * ones)


def test_reference_device_profile_consistency():
    # Device 1 of the reference scenario: lambda row (1, 0, 0.3).
    iq = IqImbalance.symmetric(eps=0.0001, beta=np.deg2rad(-0.018))
    pa = PaModel.from_full_row([1.0, 0.0, 0.3])
    rng = np.random.default_rng(3)
    s = crandn(rng, 64)
    pm = build_pilot_matrix(s, pa.order)
    z = build_feature_vector(iq, pa)
    np.testing.assert_allclose(pm.s_tilde @ z, envelope_oracle(s, iq, pa), rtol=1e-12)


def test_impairment_free_conjugate_monomials_vanish():
    z = build_feature_vector(PERFECT, PaModel(lambdas=(1.0, 0.4)))
    for idx, (a, b) in enumerate(monomial_basis(3)):
        if b > a:  # conj-dominant monomials require powers of v
            assert z[idx] == 0


def test_second_to_last_entry_is_lambda1_mu():
    rng = np.random.default_rng(4)
    for _ in range(20):
        iq, pa = random_profile(rng)
        mu, _ = iq_coeffs(iq)
        z = build_feature_vector(iq, pa)
        assert z[-2] == pytest.approx(pa.lambdas[0] * mu)


def test_alpha_recursion_order1():
    iq, _ = random_profile(np.random.default_rng(5))
    mu, v = iq_coeffs(iq)
    z_ref = alpha_recursion_reference(iq, PaModel(lambdas=(2.0,)))
    np.testing.assert_allclose(z_ref, [2.0 * mu, 2.0 * v])


def test_alpha_recursion_matches_expansion_order3():
    rng = np.random.default_rng(6)
    for _ in range(10):
        iq, pa = random_profile(rng)
        np.testing.assert_allclose(
            alpha_recursion_reference(iq, pa), build_feature_vector(iq, pa), atol=1e-12
        )
    # Device 3 of the reference scenario.
    iq = IqImbalance.symmetric(eps=-0.0051, beta=np.deg2rad(0.0120))
    pa = PaModel.from_full_row([1.0, 0.0, 0.4])
    z_ref = alpha_recursion_reference(iq, pa)
    z = build_feature_vector(iq, pa)
    assert np.linalg.norm(z_ref - z) < 1e-12
    with pytest.raises(ValueError):
        alpha_recursion_reference(iq, PaModel(lambdas=(1.0, 0.1, 0.1)))


def test_pa_model_validation():
    with pytest.raises(ValueError):
        PaModel(lambdas=(0.0, 0.3))
    with pytest.raises(ValueError):
        PaModel.from_full_row([1.0, 0.5, 0.3])
    assert PaModel.from_full_row([1.0, 0.0, 0.3]).lambdas == (1.0, 0.3)
    assert PaModel.from_full_row([1.0, 0.0, 0.3]).order == 3


def test_iq_imbalance_validation():
    with pytest.raises(ValueError):
        IqImbalance(eps_i=1.5)
    with pytest.raises(ValueError):
        IqImbalance(beta_i=np.inf)
