"""Joint DoA / fading / fingerprint estimators.

``tals_run`` is the regularized alternating-least-squares estimator working
on the three tensor unfoldings; ``krf_estimate`` and ``ls_estimate`` are the
baselines it is benchmarked against.  All three resolve the per-device scale
ambiguity by fixing the second-to-last fingerprint entry to 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.signal

from .hardware import PilotMatrix, nominal_feature_vector
from .scene import ArrayGeometry, steering_matrix, steering_vector
from .tensor_core import (
    SolverError,
    khatri_rao,
    regularized_rows_solve,
    truncated_left_singular,
    unfold,
)


class InitializationError(RuntimeError):
    """MUSIC could not find the requested number of separable peaks."""


class DegenerateProfileError(RuntimeError):
    """A fingerprint's normalization entry vanished."""


@dataclass(frozen=True)
class TalsConfig:
    tau0: float = 0.1
    delta: float = 0.9
    rho: float = 1e-10
    max_iters: int = 100
    coarse_grid_deg: float = 0.5
    music_grid_deg: float = 0.05
    refine_tol_rad: float = 1e-9

    def __post_init__(self):
        if not (0 < self.delta < 1):
            raise ValueError("delta must lie in (0, 1)")
        if self.rho <= 0 or self.tau0 < 0:
            raise ValueError("rho must be positive and tau0 nonnegative")


@dataclass
class Estimate:
    """Recovered parameters plus the per-iteration loss trace."""

    method: str
    theta: np.ndarray  # radians, one per path slot
    a_hat: np.ndarray  # Q x K~, exact steering vectors of theta
    gamma_hat: np.ndarray  # M x K~
    z_hat: list[np.ndarray]  # per device, normalized second-to-last entry = 1
    trace: list[float] = field(default_factory=list)
    converged: bool = True

    @property
    def n_iters(self) -> int:
        return len(self.trace)


def _path_counts_from_psi(psi: np.ndarray) -> list[int]:
    return [int(psi[:, k].sum()) for k in range(psi.shape[1])]


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------

def _subarray_geometry(geom: ArrayGeometry, length: int) -> ArrayGeometry:
    return ArrayGeometry(spacings=geom.spacings[: length - 1], wavelength=geom.wavelength)


def _noise_projection(en: np.ndarray, sub_geom: ArrayGeometry):
    def g(theta):
        a = steering_vector(theta, sub_geom)
        return float(np.sum(np.abs(en.conj().T @ a) ** 2))

    return g


def smoothing_music_init(
    data: np.ndarray,
    geom: ArrayGeometry,
    k_tilde: int,
    grid_deg: float = 0.05,
    n_subarrays: int | None = None,
) -> np.ndarray:
    """Initial DoAs via MUSIC with forward-backward spatial smoothing.

    ``data`` is a Q x T snapshot matrix (snapshots of all blocks side by
    side).  Smoothing over ``n_subarrays`` shifted sub-arrays restores the
    covariance rank lost to coherent multipath within a block.  Returns
    ``k_tilde`` angles in radians, sorted ascending.
    """
    q = geom.n_antennas
    if k_tilde >= q:
        raise ValueError("need more antennas than total paths")
    if n_subarrays is None:
        n_subarrays = min(2, q - k_tilde)
    sub_len = q - n_subarrays + 1
    if sub_len <= k_tilde:
        raise ValueError("sub-array too short after smoothing")

    cov = data @ data.conj().T / data.shape[1]
    smoothed = np.zeros((sub_len, sub_len), dtype=complex)
    for p in range(n_subarrays):
        smoothed += cov[p : p + sub_len, p : p + sub_len]
    smoothed /= n_subarrays
    # Forward-backward averaging for additional decorrelation.
    ex = np.eye(sub_len)[::-1]
    smoothed = (smoothed + ex @ smoothed.conj() @ ex) / 2

    evals, evecs = np.linalg.eigh(smoothed)
    en = evecs[:, : sub_len - k_tilde]  # noise subspace

    sub_geom = _subarray_geometry(geom, sub_len)
    grid = np.deg2rad(np.arange(-90 + grid_deg, 90, grid_deg))
    a_grid = steering_matrix(grid, sub_geom)
    denom = np.sum(np.abs(en.conj().T @ a_grid) ** 2, axis=0)
    spectrum = 1.0 / np.maximum(denom, 1e-300)

    peaks, _ = scipy.signal.find_peaks(spectrum)
    if peaks.size < k_tilde:
        raise InitializationError(
            f"found {peaks.size} MUSIC peaks, need {k_tilde}"
        )
    top = peaks[np.argsort(spectrum[peaks])[-k_tilde:]]

    g = _noise_projection(en, sub_geom)
    step = np.deg2rad(grid_deg)
    thetas = []
    for p in sorted(top):
        lo, hi = grid[p] - step, grid[p] + step
        res = scipy.optimize.minimize_scalar(
            g, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10}
        )
        thetas.append(res.x)
    return np.sort(np.asarray(thetas))


def svd_init(w1: np.ndarray, w3: np.ndarray, k_tilde: int):
    """Dominant left singular subspaces of the mode-1/mode-3 unfoldings."""
    u0 = truncated_left_singular(w1, k_tilde)
    gamma0 = truncated_left_singular(w3, k_tilde)
    return u0, gamma0


# ---------------------------------------------------------------------------
# Update steps
# ---------------------------------------------------------------------------

def update_a(w2, b1, a_prev, tau):
    """Regularized LS update of the unstructured steering factor."""
    return regularized_rows_solve(w2, b1, a_prev, tau)


def refine_angles(
    a_est: np.ndarray,
    geom: ArrayGeometry,
    coarse_step_deg: float = 0.5,
    tol_rad: float = 1e-9,
    coarse_table: np.ndarray | None = None,
    coarse_grid: np.ndarray | None = None,
):
    """Per-column beamforming: maximize |a(theta)^H x| over a coarse grid,
    then refine locally.  Invariant to complex column scaling of the input."""
    if coarse_grid is None:
        coarse_grid = np.deg2rad(
            np.arange(-90 + coarse_step_deg, 90, coarse_step_deg)
        )
    if coarse_table is None:
        coarse_table = steering_matrix(coarse_grid, geom)
    corr = np.abs(coarse_table.conj().T @ a_est)  # grid x K~
    step = coarse_grid[1] - coarse_grid[0]
    thetas = np.empty(a_est.shape[1])
    for c in range(a_est.shape[1]):
        x = a_est[:, c]

        def neg_corr(theta):
            return -abs(steering_vector(theta, geom).conj() @ x)

        p = int(np.argmax(corr[:, c]))
        lo = max(coarse_grid[p] - step, -np.pi / 2 + 1e-9)
        hi = min(coarse_grid[p] + step, np.pi / 2 - 1e-9)
        res = scipy.optimize.minimize_scalar(
            neg_corr, bounds=(lo, hi), method="bounded", options={"xatol": tol_rad}
        )
        thetas[c] = res.x
    return thetas, steering_matrix(thetas, geom)


def update_z(
    w1: np.ndarray,
    gamma_hat: np.ndarray,
    a_hat: np.ndarray,
    psi: np.ndarray,
    pilots,
    z_prev: list[np.ndarray],
    tau: float,
) -> list[np.ndarray]:
    """Structure-aware regularized LS for the stacked fingerprints.

    Solves min ||vec(W1) - D zs||^2 + tau ||zs - zs_prev||^2 with the design
    matrix D = [c_1 x S~_1, ..., c_K x S~_K] (x = Kronecker), where c_k is
    column k of (Gamma (*) A) Psi.  Normal equations are assembled blockwise
    so D is never formed.
    """
    k_dev = psi.shape[1]
    c_all = khatri_rao(gamma_hat, a_hat) @ psi  # MQ x K
    lps = [p.s_tilde.shape[1] for p in pilots]
    offsets = np.concatenate(([0], np.cumsum(lps)))
    n = offsets[-1]

    gram = np.empty((n, n), dtype=complex)
    rhs = np.empty(n, dtype=complex)
    for k1 in range(k_dev):
        s1 = pilots[k1].s_tilde
        rhs[offsets[k1] : offsets[k1 + 1]] = s1.conj().T @ (w1 @ np.conj(c_all[:, k1]))
        for k2 in range(k_dev):
            s2 = pilots[k2].s_tilde
            scale = np.vdot(c_all[:, k1], c_all[:, k2])
            gram[offsets[k1] : offsets[k1 + 1], offsets[k2] : offsets[k2 + 1]] = (
                scale * (s1.conj().T @ s2)
            )
    z_stack = np.concatenate(z_prev)
    try:
        sol = scipy.linalg.solve(
            gram + tau * np.eye(n), rhs + tau * z_stack, assume_a="her"
        )
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise SolverError("rank-deficient fingerprint design matrix") from exc
    if not np.all(np.isfinite(sol)):
        raise SolverError("non-finite fingerprint solution")
    return [sol[offsets[k] : offsets[k + 1]] for k in range(k_dev)]


def update_gamma(w3, b3, gamma_prev, tau):
    """Regularized LS update of the fading factor from the mode-3 unfolding."""
    return regularized_rows_solve(w3, b3, gamma_prev, tau)


def normalize_ambiguity(z_hat: list[np.ndarray], gamma_hat: np.ndarray, psi: np.ndarray):
    """Fix the per-device gauge: z_k's second-to-last entry becomes 1, the
    device's fading columns absorb the scale; the reconstruction is unchanged."""
    gamma = gamma_hat.copy()
    z_out = []
    for k, z in enumerate(z_hat):
        c = z[z.shape[0] - 2]
        if c == 0:
            raise DegenerateProfileError(f"device {k}: zero normalization entry")
        z_out.append(z / c)
        gamma[:, psi[:, k] > 0] *= c
    return z_out, gamma


# ---------------------------------------------------------------------------
# Full estimators
# ---------------------------------------------------------------------------

def _envelope_factor(z_hat, pilots, psi) -> np.ndarray:
    """U = Y^T Z^T Psi^T for the current fingerprints (J x K~)."""
    v = np.stack([p.s_tilde @ z for p, z in zip(pilots, z_hat)], axis=1)
    return v @ psi.T


def _loss(w1, u_hat, gamma_hat, a_hat) -> float:
    return float(np.linalg.norm(w1 - u_hat @ khatri_rao(gamma_hat, a_hat).T))


def _align_factors_to_steering(a0: np.ndarray, w2: np.ndarray, dims):
    """Initial (U, Gamma) consistent with the structured steering columns:
    LS-fit the combined mode-2 factor, then split each column rank-1."""
    j, m = dims
    k_tilde = a0.shape[1]
    combined = np.linalg.pinv(a0) @ w2  # K~ x MJ, rows ~ (U (*) Gamma) columns
    u0 = np.empty((j, k_tilde), dtype=complex)
    gamma0 = np.empty((m, k_tilde), dtype=complex)
    for c in range(k_tilde):
        x = combined[c].reshape(j, m)
        uu, ss, vv = np.linalg.svd(x, full_matrices=False)
        u0[:, c] = uu[:, 0] * np.sqrt(ss[0])
        gamma0[:, c] = vv[0] * np.sqrt(ss[0])
    return u0, gamma0


def tals_run(
    tensor: np.ndarray,
    pilots,
    psi: np.ndarray,
    geom: ArrayGeometry,
    config: TalsConfig = TalsConfig(),
) -> Estimate:
    """Regularized tensor-ALS joint estimator."""
    j, q, m = tensor.shape
    k_tilde, k_dev = psi.shape
    path_counts = _path_counts_from_psi(psi)
    w1, w2, w3 = unfold(tensor, 1), unfold(tensor, 2), unfold(tensor, 3)

    # Two initialization candidates, scored by reconstruction loss: subspace
    # DoAs from smoothed MUSIC, and the full nominal-envelope factorization
    # warm start. Either may fail on a bad draw; one sufficing is enough.
    candidates = []
    try:
        theta0 = smoothing_music_init(
            w2, geom, k_tilde, grid_deg=config.music_grid_deg,
            n_subarrays=min(max(path_counts), geom.n_antennas - k_tilde),
        )
        a0 = steering_matrix(theta0, geom)
        _, gamma0 = _align_factors_to_steering(a0, w2, (j, m))
        z0 = [nominal_feature_vector(p.order) for p in pilots]
        z0 = update_z(w1, gamma0, a0, psi, pilots, z0, config.tau0)
        candidates.append((theta0, a0, z0, gamma0))
    except (InitializationError, SolverError):
        pass
    try:
        warm = krf_estimate(tensor, pilots, psi, geom, config)
        candidates.append((warm.theta, warm.a_hat, warm.z_hat, warm.gamma_hat))
    except (InitializationError, DegenerateProfileError, SolverError):
        pass
    if not candidates:
        raise InitializationError("no viable initialization candidate")

    def scored(cand):
        theta_c, a_c, z_c, gamma_c = cand
        return _loss(w1, _envelope_factor(z_c, pilots, psi), gamma_c, a_c)

    theta, a_hat, z_hat, gamma_hat = min(candidates, key=scored)
    u_hat = _envelope_factor(z_hat, pilots, psi)

    coarse_grid = np.deg2rad(
        np.arange(-90 + config.coarse_grid_deg, 90, config.coarse_grid_deg)
    )
    coarse_table = steering_matrix(coarse_grid, geom)

    trace: list[float] = []
    converged = False
    tau = config.tau0
    prev_loss = _loss(w1, u_hat, gamma_hat, a_hat)
    for _ in range(config.max_iters):
        state = (theta, a_hat, z_hat, u_hat, gamma_hat)

        a_ls = update_a(w2, khatri_rao(u_hat, gamma_hat).T, a_hat, tau)
        theta, a_hat = refine_angles(
            a_ls, geom, tol_rad=config.refine_tol_rad,
            coarse_table=coarse_table, coarse_grid=coarse_grid,
        )
        z_hat = update_z(w1, gamma_hat, a_hat, psi, pilots, z_hat, tau)
        u_hat = _envelope_factor(z_hat, pilots, psi)
        gamma_hat = update_gamma(w3, khatri_rao(a_hat, u_hat).T, gamma_hat, tau)

        loss = _loss(w1, u_hat, gamma_hat, a_hat)
        if loss > prev_loss:
            # Monotone guard: the angle re-structuring is a projection and can
            # raise the residual once the fit has hit its floor. Revert to the
            # previous iterate; the unchanged loss then trips the stopping rule.
            theta, a_hat, z_hat, u_hat, gamma_hat = state
            loss = prev_loss
        trace.append(loss)
        if abs(loss - prev_loss) / max(prev_loss, 1e-300) < config.rho:
            converged = True
            break
        prev_loss = loss
        tau *= config.delta

    z_hat, gamma_hat = normalize_ambiguity(z_hat, gamma_hat, psi)
    return Estimate(
        method="TALS",
        theta=theta,
        a_hat=a_hat,
        gamma_hat=gamma_hat,
        z_hat=z_hat,
        trace=trace,
        converged=converged,
    )


def _fingerprints_given_factors(w1, gamma_hat, a_hat, psi, pilots):
    nominal = [nominal_feature_vector(p.order) for p in pilots]
    return update_z(w1, gamma_hat, a_hat, psi, pilots, nominal, 0.0)


def ls_estimate(
    tensor: np.ndarray,
    pilots,
    psi: np.ndarray,
    geom: ArrayGeometry,
    config: TalsConfig = TalsConfig(),
) -> Estimate:
    """Conventional least-squares baseline.

    Per block: H_m = R_m Y^+; DoAs via smoothing MUSIC on the stacked H
    columns; fading and fingerprints from the per-device rank-1 structure of
    pinv(A) H_m."""
    j, q, m = tensor.shape
    k_tilde, k_dev = psi.shape
    path_counts = _path_counts_from_psi(psi)
    y = np.concatenate([p.s_tilde.T for p in pilots], axis=0)  # KLp x J
    if j < y.shape[0]:
        raise ValueError("need at least K*L_p snapshots for the LS baseline")
    y_pinv = np.linalg.pinv(y)

    blocks = [tensor[:, :, i].T for i in range(m)]  # Q x J each
    h = [b @ y_pinv for b in blocks]  # Q x KLp
    theta = smoothing_music_init(
        np.concatenate(h, axis=1), geom, k_tilde,
        n_subarrays=min(max(path_counts), geom.n_antennas - k_tilde),
    )
    a_hat = steering_matrix(theta, geom)
    a_pinv = np.linalg.pinv(a_hat)

    lps = [p.s_tilde.shape[1] for p in pilots]
    offsets = np.concatenate(([0], np.cumsum(lps)))
    row = 0
    gamma_hat = np.empty((m, k_tilde), dtype=complex)
    z_hat = []
    x = [a_pinv @ hm for hm in h]  # K~ x KLp per block
    for k in range(k_dev):
        cols = slice(offsets[k], offsets[k + 1])
        rows = range(row, row + path_counts[k])
        stacked = np.concatenate([x[i][rows, cols] for i in range(m)], axis=0)
        uu, ss, vv = np.linalg.svd(stacked, full_matrices=False)
        z_hat.append(ss[0] * vv[0])
        w = uu[:, 0].reshape(m, path_counts[k])
        gamma_hat[:, row : row + path_counts[k]] = w
        row += path_counts[k]
    z_hat, gamma_hat = normalize_ambiguity(z_hat, gamma_hat, psi)
    return Estimate(
        method="LS", theta=theta, a_hat=a_hat, gamma_hat=gamma_hat, z_hat=z_hat
    )


def _subspace_angles(
    rowspace_basis: np.ndarray,
    n_paths: int,
    geom: ArrayGeometry,
    grid_deg: float = 0.05,
    tol_rad: float = 1e-9,
) -> np.ndarray:
    """Angles whose steering vectors span the given Q x r row-space basis.

    Scans the projection residual onto the basis's orthogonal complement and
    refines each of the ``n_paths`` deepest nulls."""
    qb, _ = np.linalg.qr(rowspace_basis)

    def residual(theta):
        a = steering_vector(theta, geom)
        return float(np.sum(np.abs(a) ** 2) - np.sum(np.abs(qb.conj().T @ a) ** 2))

    grid = np.deg2rad(np.arange(-90 + grid_deg, 90, grid_deg))
    a_grid = steering_matrix(grid, geom)
    denom = np.sum(np.abs(a_grid) ** 2, axis=0) - np.sum(
        np.abs(qb.conj().T @ a_grid) ** 2, axis=0
    )
    spectrum = 1.0 / np.maximum(denom, 1e-300)
    peaks, _ = scipy.signal.find_peaks(spectrum)
    if peaks.size < n_paths:
        raise InitializationError(
            f"found {peaks.size} subspace peaks, need {n_paths}"
        )
    top = peaks[np.argsort(spectrum[peaks])[-n_paths:]]
    step = np.deg2rad(grid_deg)
    thetas = []
    for p in sorted(top):
        res = scipy.optimize.minimize_scalar(
            residual, bounds=(grid[p] - step, grid[p] + step), method="bounded",
            options={"xatol": tol_rad},
        )
        thetas.append(res.x)
    return np.sort(np.asarray(thetas))


def krf_estimate(
    tensor: np.ndarray,
    pilots,
    psi: np.ndarray,
    geom: ArrayGeometry,
    config: TalsConfig = TalsConfig(),
) -> Estimate:
    """Khatri-Rao factorization baseline.

    LS-estimates the combined (Gamma (*) A) factor from the mode-1 unfolding
    assuming nominal (impairment-free) envelopes.  A device's paths share one
    envelope column, so its slot columns coincide and hold a rank-l_k mix of
    the path terms; per device the angles come from the row space of that mix
    and the fading from a steering-matrix LS fit.  Fingerprints follow from
    the structured LS."""
    j, q, m = tensor.shape
    k_tilde, k_dev = psi.shape
    path_counts = _path_counts_from_psi(psi)
    w1 = unfold(tensor, 1)

    z_nom = [nominal_feature_vector(p.order) for p in pilots]
    u_nom = _envelope_factor(z_nom, pilots, psi)
    combined = (np.linalg.pinv(u_nom) @ w1).T  # MQ x K~, estimates Gamma (*) A

    theta = np.empty(k_tilde)
    gamma_hat = np.empty((m, k_tilde), dtype=complex)
    a_hat = np.empty((q, k_tilde), dtype=complex)
    row = 0
    for k in range(k_dev):
        l_k = path_counts[k]
        slots = slice(row, row + l_k)
        # identical up to noise; average them before the subspace split
        x = combined[:, slots].reshape(m, q, l_k).mean(axis=2)
        _, _, vh = np.linalg.svd(x, full_matrices=False)
        theta[slots] = _subspace_angles(
            vh[:l_k].T, l_k, geom, tol_rad=config.refine_tol_rad
        )
        a_k = steering_matrix(theta[slots], geom)
        a_hat[:, slots] = a_k
        gamma_hat[:, slots] = x @ np.linalg.pinv(a_k.T)
        row += l_k

    z_hat = _fingerprints_given_factors(w1, gamma_hat, a_hat, psi, pilots)
    z_hat, gamma_hat = normalize_ambiguity(z_hat, gamma_hat, psi)
    return Estimate(
        method="KRF", theta=theta, a_hat=a_hat, gamma_hat=gamma_hat, z_hat=z_hat
    )
