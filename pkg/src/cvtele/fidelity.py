"""Fidelities, the sine distance ``P = sqrt(1 - F)`` and related closed forms."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .symplectic import GaussianState, symplectic_eigenvalues, symplectic_form, validate_covariance

CLAMP_TOL = 1e-12


class Method(str, Enum):
    CLOSED_FORM_THERMAL = "closed_form_thermal"
    TWO_MODE_OVERLAP = "two_mode_overlap"
    MULTIMODE_ZERO_MEAN = "multimode_zero_mean"
    CLASSICAL_GAUSSIAN = "classical_gaussian"
    FOCK_ORACLE = "fock_oracle"


def clamp_fidelity(f: float, tol: float = CLAMP_TOL) -> float:
    """Clamp a numerically evaluated fidelity into ``[0, 1]``.

    Raises:
        ArithmeticError: if ``f`` is further than ``tol`` outside the interval.
    """
    f = float(f)
    if not (-tol <= f <= 1 + tol):
        raise ArithmeticError(f"fidelity {f!r} lies outside [0, 1] beyond tolerance")
    return min(1.0, max(0.0, f))


def sine_distance(fidelity: float) -> float:
    return float(np.sqrt(max(0.0, 1.0 - fidelity)))


@dataclass(frozen=True)
class MetricValue:
    fidelity: float
    p_distance: float
    method: Method

    @classmethod
    def from_fidelity(cls, f: float, method: Method) -> "MetricValue":
        f = clamp_fidelity(f)
        return cls(f, sine_distance(f), Method(method))


def overlap_two_mode_zero_mean(V1, V2) -> float:
    """``Tr(omega sigma) = 4 / sqrt(det(V1 + V2))`` for zero-mean two-mode states."""
    V1 = np.asarray(V1, dtype=float)
    V2 = np.asarray(V2, dtype=float)
    if V1.shape != (4, 4) or V2.shape != (4, 4):
        raise ValueError("two-mode overlap needs 4x4 covariance matrices")
    det = np.linalg.det(V1 + V2)
    if not det > 0:
        raise np.linalg.LinAlgError("V1 + V2 is singular")
    return float(4.0 / np.sqrt(det))


def fidelity_thermal_thermal(n1: float, n2: float) -> MetricValue:
    """Fidelity between thermal states with mean photon numbers ``n1`` and ``n2``."""
    if n1 < 0 or n2 < 0:
        raise ValueError(f"mean photon numbers must be non-negative, got {n1}, {n2}")
    root = np.sqrt((n1 + 1) * (n2 + 1)) - np.sqrt(n1 * n2)
    return MetricValue.from_fidelity(root ** -2, Method.CLOSED_FORM_THERMAL)


def fidelity_classical_gaussian(xi1: float, xi2: float) -> MetricValue:
    """Fidelity of two circularly symmetric complex Gaussian densities of variances ``xi1``, ``xi2``."""
    if xi1 <= 0 or xi2 <= 0:
        raise ValueError(f"variances must be positive, got {xi1}, {xi2}")
    return MetricValue.from_fidelity(4 * xi1 * xi2 / (xi1 + xi2) ** 2, Method.CLASSICAL_GAUSSIAN)


def _zero_mean_fidelity(V1, V2) -> float:
    # Works in the convention where the vacuum covariance is I/2.
    W1, W2 = V1 / 2, V2 / 2
    m = W1.shape[0] // 2
    omega = symplectic_form(m)
    Wsum = W1 + W2
    det_sum = np.linalg.det(Wsum)
    V_aux = omega.T @ np.linalg.solve(Wsum, omega / 4 + W2 @ omega @ W1)
    lam = np.linalg.eigvals(V_aux @ omega)
    # eigenvalues come in pairs +-i v; each contributes 2 (1 + sqrt(1 - 1/(4 v^2)))
    v = np.sort(np.abs(lam.imag))[::2]
    factors = 2 * (1 + np.sqrt(np.clip(1 - 1 / (4 * v ** 2), 0, None)))
    f_tot = np.linalg.det(V_aux) * np.prod(factors ** 2)
    # this is the root fidelity Tr|sqrt(rho) sqrt(sigma)|; square it
    return float(np.real(f_tot) ** 0.5 / det_sum ** 0.5)


def fidelity_gaussian_zero_mean(s1: GaussianState, s2: GaussianState) -> MetricValue:
    """Uhlmann fidelity between two zero-mean multi-mode Gaussian states.

    Raises:
        ValueError: for nonzero means, mismatched mode counts or unphysical input.
    """
    if s1.modes != s2.modes:
        raise ValueError(f"mode mismatch: {s1.modes} vs {s2.modes}")
    if not (s1.is_zero_mean(1e-12) and s2.is_zero_mean(1e-12)):
        raise ValueError("only zero-mean states are supported")
    for s in (s1, s2):
        if not validate_covariance(s.cov):
            raise ValueError("covariance matrix violates the uncertainty relation")
    if any(np.allclose(symplectic_eigenvalues(s.cov), 1.0, atol=1e-9) for s in (s1, s2)):
        # one state is pure: the fidelity is the overlap Tr(rho sigma)
        det = np.linalg.det(s1.cov + s2.cov)
        f = 2.0 ** s1.modes / np.sqrt(det)
    else:
        f = 0.5 * (_zero_mean_fidelity(s1.cov, s2.cov) + _zero_mean_fidelity(s2.cov, s1.cov))
    return MetricValue.from_fidelity(f, Method.MULTIMODE_ZERO_MEAN)


def fuchs_van_de_graaf_bounds(fidelity: float) -> tuple[float, float]:
    """``(1 - sqrt(F), sqrt(1 - F))``: lower and upper bounds on the trace distance."""
    if not 0 <= fidelity <= 1:
        raise ValueError(f"fidelity must lie in [0, 1], got {fidelity}")
    return 1 - np.sqrt(fidelity), np.sqrt(1 - fidelity)
