"""Transmitter impairment model: I/Q imbalance, PA nonlinearity, fingerprints.

The complex envelope after the I/Q modulator and an odd-order polynomial PA is

    e(t)     = mu s(t) + v conj(s(t))
    x~(t)    = sum_m  lambda_{2m+1} / 4^m * C(2m+1, m+1) * |e(t)|^{2m} e(t)

which is a polynomial in the monomials s^a conj(s)^b with a + b odd.  Writing
the monomials in the fixed basis of :func:`monomial_basis` gives the linear
form x~ = S~ z, where z is the device's hardware feature vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np


@dataclass(frozen=True)
class IqImbalance:
    """Per-branch gain errors (dimensionless) and phase errors (radians)."""

    eps_i: float = 0.0
    eps_q: float = 0.0
    beta_i: float = 0.0
    beta_q: float = 0.0

    def __post_init__(self):
        if abs(self.eps_i) >= 1 or abs(self.eps_q) >= 1:
            raise ValueError("gain errors must satisfy |eps| < 1")
        if not (np.isfinite(self.beta_i) and np.isfinite(self.beta_q)):
            raise ValueError("phase errors must be finite")

    @classmethod
    def symmetric(cls, eps: float, beta: float) -> "IqImbalance":
        """Anti-symmetric branch errors eps_I = -eps_Q, beta_I = -beta_Q."""
        return cls(eps_i=eps, eps_q=-eps, beta_i=beta, beta_q=-beta)


@dataclass(frozen=True)
class PaModel:
    """Odd-order polynomial power amplifier: coefficients lambda_1, lambda_3, ..."""

    lambdas: tuple[float, ...]

    def __post_init__(self):
        if len(self.lambdas) < 1:
            raise ValueError("at least lambda_1 required")
        if self.lambdas[0] == 0:
            raise ValueError("lambda_1 must be nonzero")

    @property
    def order(self) -> int:
        return 2 * len(self.lambdas) - 1

    @classmethod
    def from_full_row(cls, row) -> "PaModel":
        """Build from a dense coefficient row (lambda_1, lambda_2, ..., lambda_L).

        Even-order coefficients must be zero; only odd orders affect the
        complex baseband envelope.
        """
        row = list(row)
        if len(row) % 2 == 0:
            row = row + [0.0]
        if any(row[i] != 0 for i in range(1, len(row), 2)):
            raise ValueError("even-order PA coefficients must be zero")
        return cls(lambdas=tuple(row[0::2]))


def iq_coeffs(iq: IqImbalance) -> tuple[complex, complex]:
    """Direct/image coefficients (mu, v) of the I/Q modulator."""
    gi = (1 + iq.eps_i)
    gq = (1 + iq.eps_q)
    mu = (gi * np.exp(1j * iq.beta_i) + gq * np.exp(1j * iq.beta_q)) / 2
    v = (gi * np.exp(-1j * iq.beta_i) - gq * np.exp(-1j * iq.beta_q)) / 2
    return complex(mu), complex(v)


def feature_length(order: int) -> int:
    """Length of the feature vector for an odd PA order L: (L+1)(L+3)/4."""
    if order % 2 == 0 or order < 1:
        raise ValueError(f"PA order must be odd and >= 1, got {order}")
    return (order + 1) * (order + 3) // 4


def monomial_basis(order: int) -> list[tuple[int, int]]:
    """(a, b) exponents of s^a conj(s)^b per feature-vector entry.

    Blocks run from the highest odd degree 2m+1 = order down to 1; within a
    block the conjugate-free power a descends from 2m+1 to 0.
    """
    la = (order - 1) // 2
    basis = []
    for m in range(la, -1, -1):
        deg = 2 * m + 1
        basis.extend((a, deg - a) for a in range(deg, -1, -1))
    return basis


@dataclass(frozen=True)
class PilotMatrix:
    """A pilot sequence and its monomial regression matrix (J x L_p)."""

    s: np.ndarray
    s_tilde: np.ndarray
    order: int

    @property
    def n_samples(self) -> int:
        return self.s.shape[0]


def build_pilot_matrix(s: np.ndarray, pa_order: int) -> PilotMatrix:
    """Evaluate every basis monomial of the given PA order on a pilot vector."""
    s = np.asarray(s, dtype=complex).ravel()
    if s.size == 0:
        raise ValueError("empty pilot vector")
    lp = feature_length(pa_order)
    cols = [s**a * np.conj(s) ** b for a, b in monomial_basis(pa_order)]
    s_tilde = np.stack(cols, axis=1)
    if s.size < lp:
        raise ValueError(f"need at least L_p={lp} pilot samples, got {s.size}")
    return PilotMatrix(s=s, s_tilde=s_tilde, order=pa_order)


def build_feature_vector(iq: IqImbalance, pa: PaModel) -> np.ndarray:
    """Hardware feature vector z in the :func:`monomial_basis` ordering.

    Coefficients come from expanding
    ``lam~_{2m+1} (mu s + v s*)^{m+1} (mu* s* + v* s)^m`` on the monomial
    basis, with ``lam~_{2m+1} = lambda_{2m+1} C(2m+1, m+1) / 4^m``.
    """
    mu, v = iq_coeffs(iq)
    la = (pa.order - 1) // 2
    blocks = []
    for m in range(la, -1, -1):
        lam_t = pa.lambdas[m] * comb(2 * m + 1, m + 1) / 4**m
        # Coefficient arrays indexed by ascending power of s; the power of
        # conj(s) is implied by the fixed total degree of each factor.
        p1 = np.array(
            [comb(m + 1, i) * mu ** (m + 1 - i) * v**i for i in range(m + 1, -1, -1)],
            dtype=complex,
        )
        p2 = np.array(
            [comb(m, j) * np.conj(mu) ** (m - j) * np.conj(v) ** j for j in range(m + 1)],
            dtype=complex,
        )
        coeffs = np.convolve(p1, p2)  # index = power of s, from 0 to 2m+1
        blocks.append(lam_t * coeffs[::-1])  # basis orders a descending
    return np.concatenate(blocks)


@dataclass(frozen=True)
class HardwareProfile:
    """One device's impairments and the derived fingerprint."""

    iq: IqImbalance
    pa: PaModel
    mu: complex = field(init=False)
    v: complex = field(init=False)
    z: np.ndarray = field(init=False)

    def __post_init__(self):
        mu, v = iq_coeffs(self.iq)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "v", v)
        z = build_feature_vector(self.iq, self.pa)
        if not np.all(np.isfinite(z)):
            raise ValueError("non-finite feature vector")
        object.__setattr__(self, "z", z)

    @property
    def feature_length(self) -> int:
        return self.z.shape[0]


def nominal_feature_vector(order: int) -> np.ndarray:
    """z of a perfect device (no imbalance, purely linear PA with gain 1)."""
    lp = feature_length(order)
    z = np.zeros(lp, dtype=complex)
    z[lp - 2] = 1.0
    return z


def envelope_oracle(s: np.ndarray, iq: IqImbalance, pa: PaModel) -> np.ndarray:
    """Time-domain reference for the impaired envelope, bypassing S~ and z."""
    s = np.asarray(s, dtype=complex).ravel()
    mu, v = iq_coeffs(iq)
    e = mu * s + v * np.conj(s)
    out = np.zeros_like(e)
    for m, lam in enumerate(pa.lambdas):
        out += lam / 4**m * comb(2 * m + 1, m + 1) * np.abs(e) ** (2 * m) * e
    return out


def _alpha(a: int, b: int, m: int, mu: complex, v: complex) -> complex:
    """Coefficient of s^a conj(s)^b in |mu s + v conj(s)|^{2m}, for a + b = 2m."""
    if b > m:
        # The printed b >= m branch contains an undefined symbol; |e|^{2m} is
        # real-valued, so the mirrored coefficient is the conjugate.
        return np.conj(_alpha(b, a, m, mu, v))
    return sum(
        comb(m, k)
        * mu ** (m - k)
        * v**k
        * comb(m, b - k)
        * np.conj(v) ** (m + k - b)
        * np.conj(mu) ** (b - k)
        for k in range(b + 1)
    )


def alpha_recursion_reference(iq: IqImbalance, pa: PaModel) -> np.ndarray:
    """Literal block-recursion construction of z, for regression only (L <= 3)."""
    if pa.order > 3:
        raise ValueError("recursion reference supported for PA order <= 3 only")
    mu, v = iq_coeffs(iq)
    la = (pa.order - 1) // 2
    blocks = []
    for m in range(la, -1, -1):
        bar = np.empty(2 * m + 2, dtype=complex)
        for idx, a in enumerate(range(2 * m + 1, -1, -1)):
            b = 2 * m + 1 - a
            if a == 2 * m + 1:
                bar[idx] = mu * _alpha(2 * m, 0, m, mu, v)
            elif a == 0:
                bar[idx] = v * _alpha(0, 2 * m, m, mu, v)
            else:
                bar[idx] = mu * _alpha(a - 1, b, m, mu, v) + v * _alpha(
                    a, b - 1, m, mu, v
                )
        lam_t = pa.lambdas[m] * comb(2 * m + 1, m + 1) / 4**m
        blocks.append(lam_t * bar)
    return np.concatenate(blocks)
