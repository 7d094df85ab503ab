"""Teleportation simulation of Gaussian channels and uniform convergence bounds.

Teleporting the input of a channel ``G`` through an imperfect resource
realises ``G o T`` with ``T`` the additive-noise channel of variance
``sigma_bar``.  For the phase-insensitive families this composite stays in the
same family with a hotter environment, so the distance between ``G`` and its
simulation is bounded, uniformly over inputs, by the sine distance between
two environment states.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .channels import (
    GaussianChannel,
    UnsupportedChannelError,
    compose,
    make_additive_noise,
    make_amplifier,
    make_thermal,
    teleportation_channel,
    tensor,
)
from .fidelity import fidelity_classical_gaussian, fidelity_gaussian_zero_mean
from .symplectic import GaussianState, symplectic_form

# Multi-mode teleportation noise is Y -> Y + NOISE_SCALE * sigma_bar * I.  With
# the vacuum normalised to I the single-mode teleportation channel adds
# 2 sigma_bar to each quadrature, so 2 keeps the two cases consistent.
NOISE_SCALE = 2.0
RANK_TOL = 1e-10


class BoundKind(str, Enum):
    THERMAL = "thermal"
    PURE_LOSS = "pure_loss"
    AMPLIFIER = "amplifier"
    PURE_AMPLIFIER = "pure_amplifier"
    ADDITIVE_NOISE = "additive_noise"
    MULTIMODE = "multimode"


@dataclass(frozen=True)
class BoundReport:
    channel_descriptor: dict
    sigma_bar: float
    bound_value: float
    bound_kind: BoundKind

    def to_row(self) -> dict:
        row = {"kind": self.bound_kind.value}
        row.update(self.channel_descriptor)
        row["sigma_bar"] = self.sigma_bar
        row["bound_value"] = self.bound_value
        return row


@dataclass(frozen=True, eq=False)
class SimulationMap:
    """A channel, its teleportation simulation and the identity that relates them."""

    original: GaussianChannel
    sigma_bar: float
    simulated: GaussianChannel
    param_note: str = ""
    family: Optional[GaussianChannel] = field(default=None, repr=False)


def _teleport_all(modes: int, sigma_bar: float) -> GaussianChannel:
    if modes == 1:
        return teleportation_channel(sigma_bar)
    return tensor(*[teleportation_channel(sigma_bar)] * modes)


def _family_of(channel: GaussianChannel, sigma_bar: float):
    """Closed-form member of the channel's family that equals its simulation."""
    k, p = channel.kind, channel.params
    if k in ("thermal", "pure_loss"):
        eta, n_b = p["eta"], p.get("n_b", 0.0)
        n_new = n_b + eta * sigma_bar / (1 - eta)
        return make_thermal(eta, n_new), f"thermal: N_B -> N_B + eta*sigma/(1-eta) = {n_new!r}"
    if k in ("amplifier", "pure_amplifier"):
        g, n_b = p["gain"], p.get("n_b", 0.0)
        n_new = n_b + g * sigma_bar / (g - 1)
        return make_amplifier(g, n_new), f"amplifier: N_B -> N_B + G*sigma/(G-1) = {n_new!r}"
    if k in ("additive_noise", "teleportation"):
        xi = p["xi"] if k == "additive_noise" else p["sigma_bar"]
        return make_additive_noise(xi + sigma_bar), f"additive noise: xi -> xi + sigma = {xi + sigma_bar!r}"
    if k == "tensor" and channel.parts:
        fams = [_family_of(c, sigma_bar) for c in channel.parts]
        if all(f is not None for f in fams):
            return tensor(*[f[0] for f in fams]), "; ".join(f[1] for f in fams)
    return None


def simulate(channel: GaussianChannel, sigma_bar: float) -> SimulationMap:
    """Channel realised by teleporting every input mode before applying ``channel``.

    Raises:
        ValueError: for ``sigma_bar <= 0``.
        InvalidChannelError: for a non-CP channel.
    """
    if not sigma_bar > 0:
        raise ValueError(f"sigma_bar must be positive, got {sigma_bar}")
    channel.check()
    simulated = compose(channel, _teleport_all(channel.modes, sigma_bar))
    fam = _family_of(channel, sigma_bar)
    note, family = "no closed-form family identity", None
    if fam is not None:
        family, note = fam
        simulated = GaussianChannel(simulated.X, simulated.Y, simulated.d,
                                    kind=family.kind, params=family.params, parts=family.parts)
    return SimulationMap(channel, sigma_bar, simulated, note, family)


# ------------------------------------------------------------- single mode

def _thermal_radical(n1: float, n2: float) -> float:
    root = np.sqrt((n1 + 1) * (n2 + 1)) - np.sqrt(n1 * n2)
    return float(np.sqrt(max(0.0, 1 - root ** -2)))


def _check_sigma(sigma_bar):
    if not sigma_bar > 0:
        raise ValueError(f"sigma_bar must be positive, got {sigma_bar}")


def uniform_bound_thermal(eta: float, n_b: float, sigma_bar: float) -> BoundReport:
    """Sine distance between the environments of ``L_{eta,N_B}`` and its simulation."""
    if not 0 < eta < 1:
        raise ValueError(f"transmissivity must lie in the open interval (0, 1), got {eta}")
    if n_b < 0:
        raise ValueError(f"N_B must be non-negative, got {n_b}")
    _check_sigma(sigma_bar)
    n_new = n_b + eta * sigma_bar / (1 - eta)
    kind = BoundKind.PURE_LOSS if n_b == 0 else BoundKind.THERMAL
    return BoundReport({"eta": eta, "n_b": n_b}, sigma_bar, _thermal_radical(n_b, n_new), kind)


def uniform_bound_amplifier(gain: float, n_b: float, sigma_bar: float) -> BoundReport:
    if not gain > 1:
        raise ValueError(f"gain must exceed 1, got {gain}")
    if n_b < 0:
        raise ValueError(f"N_B must be non-negative, got {n_b}")
    _check_sigma(sigma_bar)
    n_new = n_b + gain * sigma_bar / (gain - 1)
    kind = BoundKind.PURE_AMPLIFIER if n_b == 0 else BoundKind.AMPLIFIER
    return BoundReport({"gain": gain, "n_b": n_b}, sigma_bar, _thermal_radical(n_b, n_new), kind)


def uniform_bound_additive(xi: float, sigma_bar: float) -> BoundReport:
    """``sqrt(1 - 4 xi (xi + sigma) / (2 xi + sigma)^2)``.

    Raises:
        ValueError: for ``xi <= 0``; the noiseless limit is the identity
            channel, which admits no uniform bound.
    """
    if not xi > 0:
        raise ValueError(f"noise variance must be positive, got {xi}")
    _check_sigma(sigma_bar)
    val = np.sqrt(max(0.0, 1 - 4 * xi * (xi + sigma_bar) / (2 * xi + sigma_bar) ** 2))
    return BoundReport({"xi": xi}, sigma_bar, float(val), BoundKind.ADDITIVE_NOISE)


def uniform_bound_additive_via_fidelity(xi: float, sigma_bar: float) -> float:
    return fidelity_classical_gaussian(xi, xi + sigma_bar).p_distance


# ------------------------------------------------------------- multi mode

def check_full_rank(X) -> float:
    """Smallest singular value of ``Omega - X^T Omega X``.

    Raises:
        UnsupportedChannelError: if it is below ``RANK_TOL``.
    """
    X = np.asarray(X, dtype=float)
    omega = symplectic_form(X.shape[0] // 2)
    s = np.linalg.svd(omega - X.T @ omega @ X, compute_uv=False)
    if s[-1] < RANK_TOL:
        raise UnsupportedChannelError(
            "Omega - X^T Omega X is rank deficient (smallest singular value "
            f"{s[-1]:.2e}); teleportation simulation of such channels does not "
            "converge uniformly"
        )
    return float(s[-1])


def phase_insensitive_environment(X) -> Callable:
    """Environment-state builder for ``X`` diagonal with entries ``x_j != 1``.

    Returns ``Y -> K Y K`` with ``K = diag(1 / sqrt(|1 - x_j^2|))``.
    """
    X = np.asarray(X, dtype=float)
    if np.max(np.abs(X - np.diag(np.diag(X)))) > 0:
        raise UnsupportedChannelError("default environment builder needs a diagonal X")
    x = np.diag(X)
    K = np.diag(1 / np.sqrt(np.abs(1 - x ** 2)))

    def build(Y) -> GaussianState:
        Y = np.asarray(Y, dtype=float)
        return GaussianState(np.zeros(Y.shape[0]), K @ Y @ K)

    return build


def uniform_bound_multimode(
    channel: GaussianChannel,
    sigma_bar: float,
    env_state_builder: Optional[Callable] = None,
    noise_scale: float = NOISE_SCALE,
    input_side: bool = False,
) -> BoundReport:
    """``P(gamma_E(Y), gamma_E(Y + c sigma_bar I))`` for a multi-mode channel.

    With ``input_side=True`` the added noise is ``c sigma_bar X^T X``, which is
    exactly the noise of ``channel o T`` as built by :func:`simulate`.  The
    plain ``c sigma_bar I`` form bounds ``channel o T`` only when
    ``X^T X <= I`` (loss); for gain it falls below the true distance.

    Args:
        channel: the channel ``(X, Y)``; ``Omega - X^T Omega X`` must be full rank.
        sigma_bar: teleportation noise.
        env_state_builder: maps a noise matrix to the zero-mean environment
            state; defaults to the phase-insensitive construction.
        noise_scale: the constant ``c``.
        input_side: use ``X^T X`` instead of ``I`` for the added noise.
    """
    _check_sigma(sigma_bar)
    check_full_rank(channel.X)
    build = env_state_builder or phase_insensitive_environment(channel.X)
    Y = np.asarray(channel.Y)
    added = channel.X.T @ channel.X if input_side else np.eye(Y.shape[0])
    e1 = build(Y)
    e2 = build(Y + noise_scale * sigma_bar * added)
    metric = fidelity_gaussian_zero_mean(e1, e2)
    desc = {"modes": channel.modes, "channel": channel.kind, "input_side": input_side}
    return BoundReport(desc, sigma_bar, metric.p_distance, BoundKind.MULTIMODE)


def uniform_bound(channel: GaussianChannel, sigma_bar: float) -> BoundReport:
    """Dispatch to the closed-form bound of a named single-mode family."""
    k, p = channel.kind, channel.params
    if k in ("thermal", "pure_loss"):
        return uniform_bound_thermal(p["eta"], p.get("n_b", 0.0), sigma_bar)
    if k in ("amplifier", "pure_amplifier"):
        return uniform_bound_amplifier(p["gain"], p.get("n_b", 0.0), sigma_bar)
    if k == "additive_noise":
        return uniform_bound_additive(p["xi"], sigma_bar)
    if k in ("identity", "teleportation", "unitary"):
        raise UnsupportedChannelError(
            f"{k} channels have no uniform bound: their simulation converges only strongly"
        )
    return uniform_bound_multimode(channel, sigma_bar, input_side=True)


# ------------------------------------------------------------- composition

def _check_entries(per_use_p: Sequence[float]) -> np.ndarray:
    p = np.asarray(list(per_use_p), dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("per-use distances must lie in [0, 1]")
    return p


def telescoping_bound_parallel(per_use_p: Sequence[float]) -> float:
    """Bound on the sine distance of a tensor product of channel uses."""
    return float(min(1.0, np.sum(_check_entries(per_use_p))))


def telescoping_bound_serial(per_use_p: Sequence[float]) -> float:
    """Bound on the sine distance of an adaptive sequence of channel uses."""
    return float(min(1.0, np.sum(_check_entries(per_use_p))))


def exact_p_distance(s1: GaussianState, s2: GaussianState) -> float:
    return fidelity_gaussian_zero_mean(s1, s2).p_distance

