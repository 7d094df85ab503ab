"""Finite-size upper bounds on secret-key rates over bosonic loss channels.

Logarithms are base 2 throughout.  ``g`` is the entropy of a thermal state,
``g(N) = (N + 1) log2(N + 1) - N log2(N)``, taken from the wider literature;
the relative-entropy variance ``V`` must be supplied by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


def _check_eps(eps: float):
    if not 0 < eps < 1:
        raise ValueError(f"error parameter must lie in (0, 1), got {eps}")


def _check_eta(eta: float):
    if not 0 < eta < 1:
        raise ValueError(f"transmissivity must lie in (0, 1), got {eta}")


def _check_n(n):
    if not (n == math.inf or (n >= 1 and float(n).is_integer())):
        raise ValueError(f"number of channel uses must be a positive integer or inf, got {n}")


def c_epsilon(eps: float) -> float:
    """``log2(6) + 2 log2((1 + eps) / (1 - eps))``."""
    _check_eps(eps)
    return math.log2(6) + 2 * math.log2((1 + eps) / (1 - eps))


def g_entropy(n: float) -> float:
    """Von Neumann entropy (bits) of a thermal state with mean photon number ``n``."""
    if n < 0:
        raise ValueError(f"mean photon number must be non-negative, got {n}")
    if n == 0:
        return 0.0
    return (n + 1) * math.log2(n + 1) - n * math.log2(n)


def pure_loss_bound(eta: float, n, eps: float) -> float:
    """``-log2(1 - eta) + C(eps) / n``; ``n = math.inf`` gives the asymptotic value."""
    _check_eta(eta)
    _check_n(n)
    leading = -math.log2(1 - eta)
    if n == math.inf:
        return leading
    return leading + c_epsilon(eps) / n


@dataclass(frozen=True)
class ThermalBoundTerms:
    leading: float
    entropy: float
    second_order: float
    finite_size: float

    @property
    def total(self) -> float:
        return self.leading - self.entropy + self.second_order + self.finite_size


def thermal_bound_terms(eta: float, n_b: float, n, eps: float, v_value: float) -> ThermalBoundTerms:
    """Terms of ``-log2((1-eta) eta^N_B) - g(N_B) + sqrt(2 V / (n (1 - eps))) + C(eps)/n``.

    Raises:
        ValueError: if ``v_value`` is missing or negative, or a parameter is out of range.
    """
    _check_eta(eta)
    _check_n(n)
    _check_eps(eps)
    if n_b < 0:
        raise ValueError(f"N_B must be non-negative, got {n_b}")
    if v_value is None:
        raise ValueError("the relative-entropy variance V must be supplied")
    if v_value < 0:
        raise ValueError(f"V must be non-negative, got {v_value}")
    leading = -(math.log2(1 - eta) + n_b * math.log2(eta))
    if n == math.inf:
        second, finite = 0.0, 0.0
    else:
        second = math.sqrt(2 * v_value / (n * (1 - eps)))
        finite = c_epsilon(eps) / n
    return ThermalBoundTerms(leading, g_entropy(n_b), second, finite)


def thermal_bound(eta: float, n_b: float, n, eps: float, v_value: float) -> float:
    return thermal_bound_terms(eta, n_b, n, eps, v_value).total
