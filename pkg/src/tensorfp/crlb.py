"""Fisher information and Cramer-Rao lower bounds for the joint model.

The estimation-theoretic reference point for the benchmarks: variance bounds
on the DoAs, the gauge-fixed fingerprints and the fading gains under circular
complex Gaussian noise.  The primary route differentiates the noiseless mean
tensor with respect to every real parameter (analytic Jacobian); closed-form
Gram blocks and finite differences serve as independent cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import Scene, steering_derivative, steering_matrix


class IdentifiabilityError(RuntimeError):
    """Singular Fisher matrix; carries the offending null direction."""

    def __init__(self, message: str, null_direction: np.ndarray):
        super().__init__(message)
        self.null_direction = null_direction


@dataclass(frozen=True)
class ParamVector:
    """Identifiable parameter point: DoAs, reduced fingerprints, fading.

    ``z_bar[k]`` omits the gauge-fixed (unit, second-to-last) entry of device
    k's fingerprint, which is what keeps the Fisher matrix invertible.
    """

    theta: np.ndarray  # radians, K~
    z_bar: tuple[np.ndarray, ...]  # per device, length L_p - 1 each
    gamma: np.ndarray  # M x K~ complex

    def __post_init__(self):
        if self.gamma.shape[1] != self.theta.shape[0]:
            raise ValueError("gamma and theta disagree on the path count")

    @property
    def real_dim(self) -> int:
        k_tilde = self.theta.shape[0]
        m = self.gamma.shape[0]
        n_z = sum(z.shape[0] for z in self.z_bar)
        return k_tilde + 2 * n_z + 2 * m * k_tilde

    def slices(self):
        """(theta, per-device (re, im), gamma (re, im)) index ranges."""
        k_tilde = self.theta.shape[0]
        pos = k_tilde
        z_sl = []
        for z in self.z_bar:
            n = z.shape[0]
            z_sl.append((slice(pos, pos + n), slice(pos + n, pos + 2 * n)))
            pos += 2 * n
        n_g = self.gamma.size
        g_sl = (slice(pos, pos + n_g), slice(pos + n_g, pos + 2 * n_g))
        return slice(0, k_tilde), z_sl, g_sl

    @classmethod
    def from_scene(cls, scene: Scene) -> "ParamVector":
        z_norm, gamma_norm = scene.gauge_fixed_truth()
        z_bar = tuple(np.delete(z, z.shape[0] - 2) for z in z_norm)
        return cls(theta=scene.paths.flat, z_bar=z_bar, gamma=gamma_norm)


def _full_fingerprints(scene: Scene, params: ParamVector) -> list[np.ndarray]:
    """Reinsert the unit gauge entry into each reduced fingerprint."""
    out = []
    for k, z in enumerate(params.z_bar):
        lp = z.shape[0] + 1
        full = np.insert(z.astype(complex), lp - 2, 1.0)
        out.append(full)
    return out


def mean_tensor(scene: Scene, params: ParamVector) -> np.ndarray:
    """Noiseless (J, Q, M) cube at the given parameter point."""
    a = steering_matrix(params.theta, scene.geometry)
    z_full = _full_fingerprints(scene, params)
    v = np.stack([p.s_tilde @ z for p, z in zip(scene.pilots, z_full)], axis=1)
    u = v @ scene.psi.T
    return np.einsum("jk,qk,mk->jqm", u, a, params.gamma)


def _complex_jacobian_parts(scene: Scene, params: ParamVector):
    """Derivative columns of vec(mean) grouped by parameter family.

    Returns (d_theta, d_z per device, d_gamma) where each complex-parameter
    family carries one holomorphic column per complex coefficient; the real
    Jacobian follows from d/dRe = col and d/dIm = i*col.
    """
    j = scene.snapshots
    q = scene.geometry.n_antennas
    m = scene.blocks
    k_tilde = params.theta.shape[0]
    psi = scene.psi

    a = steering_matrix(params.theta, scene.geometry)
    z_full = _full_fingerprints(scene, params)
    v = np.stack([p.s_tilde @ z for p, z in zip(scene.pilots, z_full)], axis=1)
    u = v @ psi.T  # J x K~
    gamma = params.gamma

    d_theta = np.empty((j * q * m, k_tilde), dtype=complex)
    for k in range(k_tilde):
        da = steering_derivative(params.theta[k], scene.geometry)
        d_theta[:, k] = np.einsum("j,q,m->jqm", u[:, k], da, gamma[:, k]).ravel()

    d_z = []
    for k, pilot in enumerate(scene.pilots):
        lp = pilot.s_tilde.shape[1]
        keep = [i for i in range(lp) if i != lp - 2]
        # combined spatial-fading pattern of device k: sum over its paths
        t_k = np.einsum("qp,mp->qm", a[:, psi[:, k] > 0], gamma[:, psi[:, k] > 0])
        cols = np.einsum("ji,qm->ijqm", pilot.s_tilde[:, keep], t_k)
        d_z.append(cols.reshape(lp - 1, -1).T)

    d_gamma = np.zeros((j * q * m, m * k_tilde), dtype=complex)
    cube = np.zeros((j, q, m), dtype=complex)
    for idx, (mm, k) in enumerate((mm, k) for mm in range(m) for k in range(k_tilde)):
        cube[:, :, mm] = np.outer(u[:, k], a[:, k])
        d_gamma[:, idx] = cube.ravel()
        cube[:, :, mm] = 0.0
    return d_theta, d_z, d_gamma


def mean_jacobian(scene: Scene, params: ParamVector) -> np.ndarray:
    """Real-parameter Jacobian of vec(mean), shape (JQM, real_dim) complex."""
    d_theta, d_z, d_gamma = _complex_jacobian_parts(scene, params)
    cols = [d_theta]
    for dz in d_z:
        cols.extend([dz, 1j * dz])
    cols.extend([d_gamma, 1j * d_gamma])
    return np.concatenate(cols, axis=1)


def finite_difference_jacobian(
    scene: Scene, params: ParamVector, step: float = 1e-6
) -> np.ndarray:
    """Central-difference Jacobian, for verification of the analytic one."""

    def to_vec(p: ParamVector) -> np.ndarray:
        parts = [p.theta]
        for z in p.z_bar:
            parts.extend([z.real, z.imag])
        parts.extend([p.gamma.real.ravel(), p.gamma.imag.ravel()])
        return np.concatenate(parts)

    def from_vec(x: np.ndarray) -> ParamVector:
        k_tilde = params.theta.shape[0]
        m = params.gamma.shape[0]
        pos = k_tilde
        theta = x[:k_tilde]
        z_bar = []
        for z in params.z_bar:
            n = z.shape[0]
            z_bar.append(x[pos : pos + n] + 1j * x[pos + n : pos + 2 * n])
            pos += 2 * n
        n_g = m * k_tilde
        gamma = (x[pos : pos + n_g] + 1j * x[pos + n_g : pos + 2 * n_g]).reshape(
            m, k_tilde
        )
        return ParamVector(theta=theta, z_bar=tuple(z_bar), gamma=gamma)

    x0 = to_vec(params)
    cols = []
    for p in range(x0.shape[0]):
        hi, lo = x0.copy(), x0.copy()
        hi[p] += step
        lo[p] -= step
        diff = mean_tensor(scene, from_vec(hi)) - mean_tensor(scene, from_vec(lo))
        cols.append(diff.ravel() / (2 * step))
    return np.stack(cols, axis=1)


def fim(scene: Scene, params: ParamVector, sigma2: float) -> np.ndarray:
    """Fisher information over the real parameterization, (2/sigma2) Re(J^H J)."""
    if sigma2 <= 0:
        raise ValueError("noise variance must be positive")
    jac = mean_jacobian(scene, params)
    return (2.0 / sigma2) * np.real(jac.conj().T @ jac)


def _real_block(g: np.ndarray, sigma2: float) -> np.ndarray:
    """Map a holomorphic-column complex Gram G to its (Re, Im) real FIM block."""
    return (2.0 / sigma2) * np.block(
        [[g.real, -g.imag], [g.imag, g.real]]
    )


def closed_form_blocks(scene: Scene, params: ParamVector, sigma2: float) -> dict:
    """Literal Gram-formula blocks for regression against the Jacobian route.

    Keys: ``theta`` (real K~ x K~), ``z`` (complex Gram over stacked reduced
    fingerprints), ``gamma`` (per-block complex Grams; cross-block terms are
    exactly zero), ``m2`` (the holomorphic/antiholomorphic coupling, zero).
    """
    a = steering_matrix(params.theta, scene.geometry)
    z_full = _full_fingerprints(scene, params)
    v = np.stack([p.s_tilde @ z for p, z in zip(scene.pilots, z_full)], axis=1)
    u = v @ scene.psi.T
    gamma = params.gamma
    k_tilde = params.theta.shape[0]

    da = np.stack(
        [steering_derivative(t, scene.geometry) for t in params.theta], axis=1
    )
    g_theta = (
        (gamma.conj().T @ gamma) * (u.conj().T @ u) * (da.conj().T @ da)
    )
    theta_block = (2.0 / sigma2) * np.real(g_theta)

    psi = scene.psi
    t_cols = []
    for k in range(psi.shape[1]):
        sel = psi[:, k] > 0
        t_cols.append(np.einsum("qp,mp->qm", a[:, sel], gamma[:, sel]).ravel())
    lps = [p.s_tilde.shape[1] for p in scene.pilots]
    keeps = [[i for i in range(lp) if i != lp - 2] for lp in lps]
    sizes = [len(k) for k in keeps]
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    g_z = np.empty((offsets[-1], offsets[-1]), dtype=complex)
    for k1 in range(psi.shape[1]):
        s1 = scene.pilots[k1].s_tilde[:, keeps[k1]]
        for k2 in range(psi.shape[1]):
            s2 = scene.pilots[k2].s_tilde[:, keeps[k2]]
            g_z[offsets[k1] : offsets[k1 + 1], offsets[k2] : offsets[k2 + 1]] = (
                np.vdot(t_cols[k1], t_cols[k2]) * (s1.conj().T @ s2)
            )

    gram_per_block = (u.conj().T @ u) * (a.conj().T @ a)
    g_gamma = [gram_per_block for _ in range(scene.blocks)]

    return {
        "theta": theta_block,
        "z": g_z,
        "gamma": g_gamma,
        "m2": np.zeros((k_tilde, k_tilde)),
    }


@dataclass(frozen=True)
class CrlbResult:
    """Variance lower bounds per parameter family."""

    crlb_theta: np.ndarray  # radians^2, per path
    crlb_z: tuple[np.ndarray, ...]  # per device, per complex coefficient
    crlb_gamma: np.ndarray  # M x K~, per complex fading entry


def crlb_extract(f: np.ndarray, params: ParamVector) -> CrlbResult:
    """Bounds from the Fisher matrix, via two routes required to agree.

    Route one inverts F outright; route two applies the Schur-complement
    block identity to the DoA block. Disagreement or a singular F raises.
    """
    evals, evecs = np.linalg.eigh(f)
    if evals[0] <= evals[-1] * 1e-12:
        raise IdentifiabilityError(
            f"Fisher matrix singular (eigenvalue {evals[0]:.3e})", evecs[:, 0]
        )
    f_inv = np.linalg.inv(f)

    th_sl, z_sl, g_sl = params.slices()
    n_th = th_sl.stop
    f1 = f[:n_th, :n_th]
    f2 = f[n_th:, n_th:]
    f3 = f[n_th:, :n_th]
    schur = np.linalg.inv(f1 - f3.T @ np.linalg.solve(f2, f3))
    route1 = np.diag(f_inv[:n_th, :n_th])
    route2 = np.diag(schur)
    if not np.allclose(route1, route2, rtol=1e-8):
        raise IdentifiabilityError(
            "block-inverse routes disagree; ill-conditioned Fisher matrix",
            evecs[:, 0],
        )

    diag = np.diag(f_inv)
    crlb_z = tuple(diag[re] + diag[im] for re, im in z_sl)
    g_re, g_im = g_sl
    m, k_tilde = params.gamma.shape
    crlb_gamma = (diag[g_re] + diag[g_im]).reshape(m, k_tilde)
    return CrlbResult(
        crlb_theta=route1.copy(), crlb_z=crlb_z, crlb_gamma=crlb_gamma
    )


def crlb_for_scene(scene: Scene, sigma2: float | None = None) -> CrlbResult:
    """Bounds at the scene's own ground-truth parameter point."""
    if sigma2 is None:
        sigma2 = scene.noise_var
    params = ParamVector.from_scene(scene)
    return crlb_extract(fim(scene, params, sigma2), params)
