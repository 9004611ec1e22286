import numpy as np
import pytest

from test_scene import reference_scene
from tensorfp.estimators import (
    DegenerateProfileError,
    Estimate,
    InitializationError,
    TalsConfig,
    krf_estimate,
    ls_estimate,
    normalize_ambiguity,
    refine_angles,
    smoothing_music_init,
    svd_init,
    tals_run,
    update_a,
    update_z,
)
from tensorfp.hardware import HardwareProfile, IqImbalance, PaModel, build_pilot_matrix
from tensorfp.scene import (
    ArrayGeometry,
    PathSet,
    make_scene,
    random_pilots,
    steering_matrix,
    synthesize_tensor,
)
from tensorfp.tensor_core import khatri_rao, unfold


def max_theta_err_deg(est, scene):
    truth = np.sort(scene.paths.flat)
    return float(np.max(np.rad2deg(np.abs(np.sort(est.theta) - truth))))


def gauge_errors(est, scene):
    """(worst relative fingerprint error, relative fading error) against the
    gauge-fixed ground truth."""
    z_true, g_true = scene.gauge_fixed_truth()
    zerr = max(
        np.linalg.norm(zh - zt) / np.linalg.norm(zt)
        for zh, zt in zip(est.z_hat, z_true)
    )
    gerr = np.linalg.norm(est.gamma_hat - g_true) / np.linalg.norm(g_true)
    return zerr, gerr


def noiseless_cube(seed=1):
    scene = reference_scene(snr_db=20.0, noise_var=0.0, seed=seed)
    tensor = synthesize_tensor(scene, np.random.default_rng(100 + seed))
    return scene, tensor


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------

def test_music_init_reference_scene_accuracy():
    scene, tensor = noiseless_cube()
    theta = smoothing_music_init(unfold(tensor, 2), scene.geometry, 5, n_subarrays=2)
    truth = np.sort(scene.paths.flat)
    assert np.max(np.rad2deg(np.abs(theta - truth))) < 1e-4


def test_music_smoothing_restores_coherent_rank():
    # One fading block only: the two paths of a device are fully coherent and
    # the plain covariance is rank deficient. Smoothing recovers both angles.
    rng = np.random.default_rng(7)
    geom = ArrayGeometry.ula(8)
    profile = HardwareProfile(iq=IqImbalance(), pa=PaModel(lambdas=(1.0,)))
    pilots = (build_pilot_matrix(random_pilots(64, "16qam", rng), 1),)
    paths = PathSet(doas=((np.deg2rad(-10.0), np.deg2rad(15.0)),))
    scene = make_scene(geom, paths, (profile,), pilots, 20.0, 1, 64, rng, noise_var=0.0)
    w2 = unfold(synthesize_tensor(scene, rng), 2)
    cov_rank = np.linalg.matrix_rank(w2 @ w2.conj().T, tol=1e-8)
    assert cov_rank == 1
    theta = smoothing_music_init(w2, geom, 2, n_subarrays=3)
    assert np.max(np.rad2deg(np.abs(theta - np.sort(paths.flat)))) < 1e-3


def test_music_init_errors():
    geom = ArrayGeometry.ula(4)
    with pytest.raises(ValueError):
        smoothing_music_init(np.ones((4, 8), dtype=complex), geom, 4)
    with pytest.raises(ValueError):
        smoothing_music_init(np.ones((4, 8), dtype=complex), geom, 2, n_subarrays=3)
    # A grid too coarse to carry interior spectrum peaks reports a shortage.
    one_source = np.outer(steering_matrix(0.2, geom)[:, 0], np.ones(16))
    with pytest.raises(InitializationError):
        smoothing_music_init(one_source, geom, 2, n_subarrays=1, grid_deg=60.0)


def test_svd_init_spans_true_subspaces():
    scene, tensor = noiseless_cube(seed=2)
    u0, g0 = svd_init(unfold(tensor, 1), unfold(tensor, 3), 5)
    for basis, truth in [(u0, scene.combined_factor), (g0, scene.gamma)]:
        # Truth may be rank deficient (multipath devices repeat envelope
        # columns); check its numerical column space is contained in the basis.
        ut, st, _ = np.linalg.svd(truth, full_matrices=False)
        qt = ut[:, st > st[0] * 1e-10]
        qb, _ = np.linalg.qr(basis)
        gap = np.linalg.norm(qt - qb @ (qb.conj().T @ qt))
        assert gap < 1e-8


# ---------------------------------------------------------------------------
# Update steps
# ---------------------------------------------------------------------------

def test_update_a_never_increases_fit():
    rng = np.random.default_rng(3)
    w = rng.standard_normal((6, 40)) + 1j * rng.standard_normal((6, 40))
    b = rng.standard_normal((5, 40)) + 1j * rng.standard_normal((5, 40))
    x_prev = rng.standard_normal((6, 5)) + 1j * rng.standard_normal((6, 5))
    for tau in [0.0, 1e-3, 0.1, 10.0]:
        x_new = update_a(w, b, x_prev, tau)
        assert np.linalg.norm(w - x_new @ b) <= np.linalg.norm(w - x_prev @ b) + 1e-9


def test_refine_angles_recovers_scaled_steering():
    rng = np.random.default_rng(4)
    geom = ArrayGeometry.ula(8)
    truth = np.deg2rad(np.array([-24.82, -3.57, 17.96, 25.72, 40.81]))
    a = steering_matrix(truth, geom)
    scales = (rng.standard_normal(5) + 1j * rng.standard_normal(5)) * 3
    theta, a_hat = refine_angles(a * scales, geom)
    assert np.max(np.rad2deg(np.abs(theta - truth))) < 1e-7
    # output steering matrix is exactly the unit-gain response of theta
    np.testing.assert_allclose(a_hat, steering_matrix(theta, geom))


def test_update_z_oracle_with_true_factors():
    scene, tensor = noiseless_cube(seed=5)
    w1 = unfold(tensor, 1)
    z_true, gamma_true = scene.gauge_fixed_truth()
    guess = [np.zeros_like(z) for z in z_true]
    z_hat = update_z(w1, gamma_true, scene.steering, scene.psi, scene.pilots, guess, 0.0)
    for zh, zt in zip(z_hat, z_true):
        np.testing.assert_allclose(zh, zt, atol=1e-10)


def test_normalize_ambiguity_preserves_reconstruction():
    rng = np.random.default_rng(6)
    psi = np.eye(2)
    z = [rng.standard_normal(6) + 1j * rng.standard_normal(6) for _ in range(2)]
    gamma = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    z_n, gamma_n = normalize_ambiguity(z, gamma, psi)
    for k in range(2):
        np.testing.assert_allclose(np.outer(gamma_n[:, k], z_n[k]),
                                   np.outer(gamma[:, k], z[k]), atol=1e-12)
        assert z_n[k][-2] == pytest.approx(1.0)
    bad = [np.array([1.0, 0.0, 0.0]), np.array([1.0, 1.0, 1.0])]
    with pytest.raises(DegenerateProfileError):
        normalize_ambiguity(bad, gamma, psi)


def test_tals_config_validation():
    with pytest.raises(ValueError):
        TalsConfig(delta=1.5)
    with pytest.raises(ValueError):
        TalsConfig(rho=0.0)


# ---------------------------------------------------------------------------
# Full estimators
# ---------------------------------------------------------------------------

def test_tals_noiseless_exact_recovery():
    scene, tensor = noiseless_cube(seed=1)
    est = tals_run(tensor, scene.pilots, scene.psi, scene.geometry)
    assert est.converged
    assert max_theta_err_deg(est, scene) < 1e-4
    zerr, gerr = gauge_errors(est, scene)
    assert zerr < 1e-6
    assert gerr < 1e-8
    assert est.n_iters < TalsConfig().max_iters


def test_tals_trace_monotone_and_stops_noisy():
    scene = reference_scene(snr_db=20.0, noise_var=1.0, seed=11)
    tensor = synthesize_tensor(scene, np.random.default_rng(11))
    est = tals_run(tensor, scene.pilots, scene.psi, scene.geometry)
    tr = np.asarray(est.trace)
    assert est.converged
    assert np.all(tr[1:] <= tr[:-1] * (1 + 1e-9))
    assert max_theta_err_deg(est, scene) < 0.5


def test_tals_deterministic_and_scale_gauge_invariant():
    scene, tensor = noiseless_cube(seed=8)
    est1 = tals_run(tensor, scene.pilots, scene.psi, scene.geometry)
    est2 = tals_run(tensor, scene.pilots, scene.psi, scene.geometry)
    np.testing.assert_array_equal(est1.theta, est2.theta)
    # A global complex scale lands entirely in the fading factor.
    est3 = tals_run(tensor * (2.0 - 1.0j), scene.pilots, scene.psi, scene.geometry)
    np.testing.assert_allclose(est3.theta, est1.theta, atol=1e-9)
    for z1, z3 in zip(est1.z_hat, est3.z_hat):
        np.testing.assert_allclose(z3, z1, atol=1e-7)
    np.testing.assert_allclose(est3.gamma_hat, est1.gamma_hat * (2.0 - 1.0j), rtol=1e-6)


def test_ls_baseline_noiseless_exact():
    scene, tensor = noiseless_cube(seed=9)
    est = ls_estimate(tensor, scene.pilots, scene.psi, scene.geometry)
    assert max_theta_err_deg(est, scene) < 1e-4
    zerr, gerr = gauge_errors(est, scene)
    assert zerr < 1e-8
    assert gerr < 1e-8


def test_ls_requires_enough_snapshots():
    rng = np.random.default_rng(10)
    geom = ArrayGeometry.ula(8)
    profiles = tuple(
        HardwareProfile(iq=IqImbalance(), pa=PaModel.from_full_row([1, 0, 0.3]))
        for _ in range(2)
    )
    # 8 snapshots build a valid pilot matrix (L_p = 6) but fall short of the
    # K * L_p = 12 rows the per-block pilot inversion needs.
    pilots = tuple(build_pilot_matrix(random_pilots(8, "16qam", rng), 3) for _ in range(2))
    paths = PathSet(doas=((0.1,), (0.4,)))
    scene = make_scene(geom, paths, profiles, pilots, 10.0, 2, 8, rng)
    tensor = synthesize_tensor(scene, rng)
    with pytest.raises(ValueError):
        ls_estimate(tensor, scene.pilots, scene.psi, scene.geometry)


def test_krf_exact_on_impairment_free_hardware():
    # With nominal hardware and one path per device the assumed envelope
    # factor is the true one and has full column rank, so the combined-factor
    # split and the rank-1 certificates are exact.
    rng = np.random.default_rng(12)
    geom = ArrayGeometry.ula(8)
    profiles = tuple(
        HardwareProfile(iq=IqImbalance(), pa=PaModel.from_full_row([1.0, 0.0, 0.0]))
        for _ in range(2)
    )
    pilots = tuple(
        build_pilot_matrix(random_pilots(48, "16qam", rng), 3) for _ in range(2)
    )
    paths = PathSet(doas=((np.deg2rad(-20.0),), (np.deg2rad(30.0),)))
    scene = make_scene(geom, paths, profiles, pilots, 20.0, 6, 48, rng, noise_var=0.0)
    tensor = synthesize_tensor(scene, rng)
    est = krf_estimate(tensor, scene.pilots, scene.psi, scene.geometry)
    assert max_theta_err_deg(est, scene) < 1e-6
    zerr, gerr = gauge_errors(est, scene)
    assert zerr < 1e-8
    assert gerr < 1e-7


def test_krf_bias_under_impairments_exceeds_tals():
    scene, tensor = noiseless_cube(seed=13)
    krf = krf_estimate(tensor, scene.pilots, scene.psi, scene.geometry)
    tals = tals_run(tensor, scene.pilots, scene.psi, scene.geometry)
    # KRF assumes impairment-free envelopes; the model mismatch leaves a
    # residual bias that the alternating estimator removes.
    assert max_theta_err_deg(krf, scene) > 10 * max_theta_err_deg(tals, scene)
    zerr_krf, _ = gauge_errors(krf, scene)
    zerr_tals, _ = gauge_errors(tals, scene)
    assert zerr_krf > 10 * zerr_tals


def test_estimate_metadata_fields():
    scene, tensor = noiseless_cube(seed=14)
    est = tals_run(tensor, scene.pilots, scene.psi, scene.geometry)
    assert isinstance(est, Estimate)
    assert est.method == "TALS"
    assert est.a_hat.shape == (8, 5)
    np.testing.assert_allclose(
        est.a_hat, steering_matrix(est.theta, scene.geometry), atol=1e-12
    )
    assert est.n_iters == len(est.trace)
