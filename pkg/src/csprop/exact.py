"""Ground-truth propagator via truncated Fock-basis spectral decomposition."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .symbols import OperatorPoly, ScaleParams

__all__ = [
    "FockVector",
    "FockOperator",
    "SpectralPropagator",
    "TruncationError",
    "TruncationRiskWarning",
    "coherent_vector",
    "overlap",
    "fock_matrix",
    "exact_propagator",
    "auto_truncate",
]

logger = logging.getLogger(__name__)


class TruncationError(RuntimeError):
    """The doubling sequence failed to converge; the spectrum is likely
    unbounded below (e.g. a wrong-sign potential)."""


class TruncationRiskWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FockVector:
    coefficients: np.ndarray
    scales: ScaleParams = ScaleParams()

    @property
    def n_max(self) -> int:
        return len(self.coefficients) - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def inner(self, other: "FockVector") -> complex:
        n = min(len(self.coefficients), len(other.coefficients))
        return complex(np.vdot(self.coefficients[:n], other.coefficients[:n]))


@dataclass(frozen=True)
class FockOperator:
    matrix: np.ndarray
    hermitian: bool = field(default=False)

    @property
    def n_max(self) -> int:
        return self.matrix.shape[0] - 1


def coherent_vector(z: complex, n_max: int, scales: ScaleParams = ScaleParams()) -> FockVector:
    """Coherent-state coefficients exp(-|z|^2/2) z^k / sqrt(k!) for k <= n_max.

    Built by the multiplicative recurrence c[k+1] = c[k] z / sqrt(k+1), which
    avoids overflowing factorials.
    """
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    if abs(z) ** 2 > n_max:
        warnings.warn(
            f"|z|^2 = {abs(z)**2:.3g} exceeds n_max = {n_max}; "
            "truncation may remove significant weight",
            TruncationRiskWarning,
            stacklevel=2,
        )
    coeffs = np.zeros(n_max + 1, dtype=complex)
    coeffs[0] = np.exp(-0.5 * abs(z) ** 2)
    for k in range(n_max):
        coeffs[k + 1] = coeffs[k] * z / np.sqrt(k + 1)
    return FockVector(coeffs, scales)


def overlap(z2: complex, z1: complex) -> complex:
    """Coherent-state overlap <z2|z1>."""
    return complex(
        np.exp(-0.5 * abs(z2) ** 2 + np.conjugate(z2) * z1 - 0.5 * abs(z1) ** 2)
    )


def fock_matrix(op: OperatorPoly, n_max: int) -> FockOperator:
    """Dense matrix of a normal-ordered operator on the first n_max+1 levels.

    <k| ad^m a^n |l> = sqrt(l!/(l-n)!) sqrt(k!/(l-n)!) for k = l-n+m, l >= n;
    the down-then-up ladder path never exceeds the retained levels, so the
    truncated matrix elements are exact.
    """
    if n_max < op.degree:
        raise ValueError(
            f"n_max = {n_max} is smaller than the operator degree {op.degree}"
        )
    dim = n_max + 1
    M = np.zeros((dim, dim), dtype=complex)
    for (m, n), coeff in op.terms.items():
        l = np.arange(n, dim)
        k = l - n + m
        keep = k <= n_max
        l, k = l[keep], k[keep]
        if len(l) == 0:
            continue
        val = np.ones(len(l))
        for i in range(n):  # l!/(l-n)!
            val *= l - i
        for i in range(1, m + 1):  # k!/(l-n)!
            val *= l - n + i
        M[k, l] += coeff * np.sqrt(val)
    return FockOperator(M, hermitian=op.is_hermitian())


@dataclass(frozen=True)
class SpectralPropagator:
    """Eigendecomposition of a Hermitian Fock matrix, reusable across times."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    scales: ScaleParams
    n_max: int
    asymmetry: float

    @classmethod
    def build(cls, op: OperatorPoly, n_max: int) -> "SpectralPropagator":
        if not op.is_hermitian():
            raise ValueError("exact propagation requires a Hermitian operator")
        M = fock_matrix(op, n_max).matrix
        asym = float(np.max(np.abs(M - M.conj().T)))
        scale = float(np.max(np.abs(M))) or 1.0
        if asym > 1e-12 * scale:
            logger.warning("Fock matrix asymmetry %.3e relative to %.3e", asym, scale)
        else:
            logger.debug("Fock matrix asymmetry %.3e", asym)
        H = 0.5 * (M + M.conj().T)
        evals, evecs = np.linalg.eigh(H)
        return cls(evals, evecs, op.scales, n_max, asym)

    def evolution_matrix(self, T: float) -> np.ndarray:
        phases = np.exp(-1j * self.eigenvalues * T / self.scales.hbar)
        return (self.eigenvectors * phases) @ self.eigenvectors.conj().T

    def value(self, z1: complex, z2: complex, T: float) -> complex:
        """<z2| exp(-i H T / hbar) |z1> on the truncated basis."""
        c1 = coherent_vector(z1, self.n_max, self.scales).coefficients
        c2 = coherent_vector(z2, self.n_max, self.scales).coefficients
        phases = np.exp(-1j * self.eigenvalues * T / self.scales.hbar)
        a1 = self.eigenvectors.conj().T @ c1
        a2 = self.eigenvectors.conj().T @ c2
        return complex(np.sum(np.conjugate(a2) * phases * a1))


def exact_propagator(
    op: OperatorPoly, z1: complex, z2: complex, T: float, n_max: int
) -> complex:
    """Propagator matrix element between coherent states, via eigendecomposition."""
    return SpectralPropagator.build(op, n_max).value(z1, z2, T)


def auto_truncate(
    op: OperatorPoly,
    z1: complex,
    z2: complex,
    T: float,
    tol: float = 1e-10,
    n_start: int = 32,
    n_limit: int = 4096,
) -> int:
    """Smallest n_max in a doubling sequence with |K(n) - K(2n)| below tolerance."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = max(n_start, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationRiskWarning)
        K_n = exact_propagator(op, z1, z2, T, n)
        while 2 * n <= n_limit:
            K_2n = exact_propagator(op, z1, z2, T, 2 * n)
            if abs(K_n - K_2n) <= tol * max(abs(K_2n), 1e-12):
                return n
            n *= 2
            K_n = K_2n
    raise TruncationError(
        f"propagator did not converge by n_max = {n_limit}; "
        "the spectrum may be unbounded below"
    )
