"""Ground-truth scene synthesis: array steering, multipath, fading, noise.

The noiseless received cube of shape (J, Q, M) is the rank-K~ PARAFAC model

    R[j, q, m] = sum_k  U[j, k] A[q, k] Gamma[m, k],      U = Y^T Z^T Psi^T

where column k of U is the impaired pilot envelope of the device owning
path k, A holds steering vectors and Gamma the per-block fading gains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hardware import HardwareProfile, PilotMatrix, build_pilot_matrix
from .tensor_core import khatri_rao


@dataclass(frozen=True)
class ArrayGeometry:
    """Antenna positions as distances from the reference element."""

    spacings: tuple[float, ...]  # d_1 .. d_{Q-1}, reference element excluded
    wavelength: float = 1.0

    def __post_init__(self):
        if len(self.spacings) < 1:
            raise ValueError("need at least two antennas")

    @property
    def n_antennas(self) -> int:
        return len(self.spacings) + 1

    @classmethod
    def ula(cls, n_antennas: int, wavelength: float = 1.0, spacing_factor: float = 0.5):
        d = spacing_factor * wavelength
        return cls(spacings=tuple(d * q for q in range(1, n_antennas)), wavelength=wavelength)


@dataclass(frozen=True)
class PathSet:
    """Per-device DoAs in radians; device k owns ``doas[k]``."""

    doas: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        flat = self.flat
        if any(abs(t) >= np.pi / 2 for t in flat):
            raise ValueError("DoAs must lie in (-pi/2, pi/2)")
        if len(set(flat)) != len(flat):
            raise ValueError("DoAs must be distinct")

    @property
    def path_counts(self) -> tuple[int, ...]:
        return tuple(len(d) for d in self.doas)

    @property
    def flat(self) -> np.ndarray:
        return np.array([t for dev in self.doas for t in dev])

    @property
    def total(self) -> int:
        return sum(self.path_counts)


def steering_vector(theta: float, geom: ArrayGeometry) -> np.ndarray:
    """Array response for a plane wave from angle theta (radians)."""
    phases = 2 * np.pi * np.asarray(geom.spacings) * np.sin(theta) / geom.wavelength
    return np.concatenate(([1.0], np.exp(-1j * phases)))


def steering_matrix(thetas, geom: ArrayGeometry) -> np.ndarray:
    return np.stack([steering_vector(t, geom) for t in np.atleast_1d(thetas)], axis=1)


def steering_derivative(theta: float, geom: ArrayGeometry) -> np.ndarray:
    """d a(theta) / d theta, elementwise -j 2 pi d_q cos(theta) / lambda factor."""
    d = np.concatenate(([0.0], np.asarray(geom.spacings)))
    factor = -1j * 2 * np.pi * d * np.cos(theta) / geom.wavelength
    return factor * steering_vector(theta, geom)


def build_selection_matrix(path_counts) -> np.ndarray:
    """Block-diagonal of all-ones columns mapping devices to their paths."""
    path_counts = list(path_counts)
    if any(l < 1 for l in path_counts):
        raise ValueError("each device needs at least one path")
    k_tilde = sum(path_counts)
    psi = np.zeros((k_tilde, len(path_counts)))
    row = 0
    for k, l in enumerate(path_counts):
        psi[row : row + l, k] = 1.0
        row += l
    return psi


def random_pilots(n: int, kind: str, rng: np.random.Generator) -> np.ndarray:
    """Unit-average-energy pilot symbols.

    Note: constant-modulus pilots (qpsk) make the odd-order monomials
    linearly dependent (s^a conj(s)^b depends on a - b only), so the
    fingerprint is not identifiable beyond PA order 1 with them; 16qam is
    the default waveform for that reason.
    """
    if kind == "qpsk":
        return np.exp(1j * (np.pi / 4 + np.pi / 2 * rng.integers(0, 4, size=n)))
    if kind == "16qam":
        levels = np.array([-3.0, -1.0, 1.0, 3.0])
        sym = levels[rng.integers(0, 4, size=n)] + 1j * levels[rng.integers(0, 4, size=n)]
        return sym / np.sqrt(10.0)
    if kind == "gaussian":
        sym = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
        return sym
    raise ValueError(f"unknown pilot kind {kind!r}")


@dataclass(frozen=True)
class Scene:
    """Immutable ground truth for one synthesis run."""

    geometry: ArrayGeometry
    paths: PathSet
    profiles: tuple[HardwareProfile, ...]
    pilots: tuple[PilotMatrix, ...]
    gamma: np.ndarray  # M x K~
    noise_var: float
    blocks: int
    snapshots: int

    def __post_init__(self):
        if len(self.profiles) != len(self.paths.doas):
            raise ValueError("one hardware profile per device required")
        if self.gamma.shape != (self.blocks, self.paths.total):
            raise ValueError("fading matrix shape mismatch")

    @property
    def n_devices(self) -> int:
        return len(self.profiles)

    @property
    def psi(self) -> np.ndarray:
        return build_selection_matrix(self.paths.path_counts)

    @property
    def steering(self) -> np.ndarray:
        return steering_matrix(self.paths.flat, self.geometry)

    @property
    def y_matrix(self) -> np.ndarray:
        """Stacked pilot regressors, K L_p x J."""
        return np.concatenate([p.s_tilde.T for p in self.pilots], axis=0)

    @property
    def envelope_matrix(self) -> np.ndarray:
        """V = Y^T Z^T: column k is device k's impaired pilot envelope (J x K)."""
        return np.stack(
            [p.s_tilde @ prof.z for p, prof in zip(self.pilots, self.profiles)], axis=1
        )

    @property
    def combined_factor(self) -> np.ndarray:
        """U = V Psi^T, one column per path (J x K~)."""
        return self.envelope_matrix @ self.psi.T

    def gauge_fixed_truth(self) -> tuple[list[np.ndarray], np.ndarray]:
        """Ground-truth (z per device, Gamma) in the normalized gauge: each z
        has unit second-to-last entry, fading columns absorb the scale, and
        the noiseless tensor is unchanged."""
        gamma = self.gamma.copy()
        psi = self.psi
        z_norm = []
        for k, prof in enumerate(self.profiles):
            c = prof.z[prof.feature_length - 2]
            z_norm.append(prof.z / c)
            gamma[:, psi[:, k] > 0] *= c
        return z_norm, gamma


def unit_entry_signal_power(combined_factor: np.ndarray) -> float:
    """Mean noiseless power per tensor entry when all fading gains have unit
    magnitude and uniform random phases."""
    j = combined_factor.shape[0]
    return float(np.sum(np.abs(combined_factor) ** 2) / j)


def draw_fading(
    snr_db: float,
    dims: tuple[int, int],
    rng: np.random.Generator,
    unit_power_gain: float = 1.0,
    noise_var: float = 1.0,
) -> np.ndarray:
    """Block-fading matrix with uniform phases and SNR-matched magnitude."""
    m, k_tilde = dims
    if m < 1 or k_tilde < 1:
        raise ValueError("fading dims must be positive")
    snr = 10 ** (snr_db / 10)
    # A noiseless scene keeps the magnitude it would have at unit noise power.
    ref_var = noise_var if noise_var > 0 else 1.0
    g = np.sqrt(snr * ref_var / unit_power_gain)
    phases = rng.uniform(-np.pi, np.pi, size=(m, k_tilde))
    return g * np.exp(1j * phases)


def make_scene(
    geometry: ArrayGeometry,
    paths: PathSet,
    profiles,
    pilots,
    snr_db: float,
    blocks: int,
    snapshots: int,
    rng: np.random.Generator,
    noise_var: float = 1.0,
) -> Scene:
    """Assemble a scene, scaling the fading magnitude to the requested SNR."""
    profiles = tuple(profiles)
    pilots = tuple(pilots)
    v = np.stack([p.s_tilde @ prof.z for p, prof in zip(pilots, profiles)], axis=1)
    u = v @ build_selection_matrix(paths.path_counts).T
    gamma = draw_fading(
        snr_db,
        (blocks, paths.total),
        rng,
        unit_power_gain=unit_entry_signal_power(u),
        noise_var=noise_var,
    )
    return Scene(
        geometry=geometry,
        paths=paths,
        profiles=profiles,
        pilots=pilots,
        gamma=gamma,
        noise_var=noise_var,
        blocks=blocks,
        snapshots=snapshots,
    )


def synthesize_block(scene: Scene, m: int, rng: np.random.Generator) -> np.ndarray:
    """One received block A diag(gamma_m) Psi Z Y + N_m, shape Q x J."""
    a = scene.steering
    signal = a @ np.diag(scene.gamma[m]) @ scene.combined_factor.T
    if scene.noise_var > 0:
        q, j = signal.shape
        noise = np.sqrt(scene.noise_var / 2) * (
            rng.standard_normal((q, j)) + 1j * rng.standard_normal((q, j))
        )
        signal = signal + noise
    return signal


def synthesize_tensor(scene: Scene, rng: np.random.Generator) -> np.ndarray:
    """Stack all blocks into the (J, Q, M) received cube."""
    slices = [synthesize_block(scene, m, rng).T for m in range(scene.blocks)]
    return np.stack(slices, axis=2)


def noiseless_tensor(scene: Scene) -> np.ndarray:
    """The exact PARAFAC cube U x A x Gamma without noise."""
    u = scene.combined_factor
    a = scene.steering
    w1 = u @ khatri_rao(scene.gamma, a).T
    from .tensor_core import fold

    return fold(w1, 1, (scene.snapshots, scene.geometry.n_antennas, scene.blocks))
