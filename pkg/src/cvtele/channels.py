"""Gaussian channels in ``(X, Y, d)`` form.

A channel acts on first and second moments as::

    mu -> X^T mu + d,        V -> X^T V X + Y,

and is completely positive iff ``Y + i (Omega - X^T Omega X) >= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .symplectic import (
    GaussianState,
    direct_sum,
    is_symplectic,
    quadrature_indices,
    symplectic_form,
    thermal_state,
    validate_covariance,
)

CP_TOL = 1e-10


class InvalidChannelError(ValueError):
    pass


class UnsupportedChannelError(ValueError):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GaussianChannel:
    """An ``m``-mode to ``m``-mode Gaussian channel.

    ``kind`` and ``params`` are bookkeeping for named families (``"thermal"``,
    ``"amplifier"``, ``"additive_noise"``, ``"tensor"``, ...); they do not
    affect the action, which is fully determined by ``X``, ``Y`` and ``d``.
    """

    X: np.ndarray
    Y: np.ndarray
    d: np.ndarray = None
    kind: str = "raw"
    params: dict = field(default_factory=dict)
    parts: tuple = ()

    def __post_init__(self):
        X = _frozen(self.X)
        Y = _frozen(self.Y)
        n = X.shape[0]
        if X.ndim != 2 or X.shape != (n, n) or n % 2:
            raise ValueError(f"X must be 2m x 2m, got shape {X.shape}")
        if Y.shape != X.shape:
            raise ValueError(f"Y has shape {Y.shape}, expected {X.shape}")
        if np.max(np.abs(Y - Y.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(Y))):
            raise InvalidChannelError("Y must be symmetric")
        d = np.zeros(n) if self.d is None else np.asarray(self.d, dtype=float).reshape(-1)
        if d.shape != (n,):
            raise ValueError(f"d has length {d.shape[0]}, expected {n}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", _frozen(0.5 * (Y + Y.T)))
        object.__setattr__(self, "d", _frozen(d))
        object.__setattr__(self, "params", dict(self.params))

    @property
    def modes(self) -> int:
        return self.X.shape[0] // 2

    in_modes = out_modes = modes

    def cp_min_eigenvalue(self) -> float:
        omega = symplectic_form(self.modes)
        M = self.Y + 1j * (omega - self.X.T @ omega @ self.X)
        return float(np.linalg.eigvalsh(M)[0])

    def is_valid(self, tol: float = CP_TOL) -> bool:
        return (
            float(np.linalg.eigvalsh(self.Y)[0]) >= -tol
            and self.cp_min_eigenvalue() >= -tol
        )

    def check(self, tol: float = CP_TOL) -> "GaussianChannel":
        if not self.is_valid(tol):
            raise InvalidChannelError(
                f"{self.kind} channel violates complete positivity "
                f"(min eigenvalue {self.cp_min_eigenvalue():.3e})"
            )
        return self

    def same_action(self, other: "GaussianChannel", atol: float = 1e-12) -> bool:
        return (
            self.X.shape == other.X.shape
            and np.allclose(self.X, other.X, rtol=0, atol=atol)
            and np.allclose(self.Y, other.Y, rtol=0, atol=atol)
            and np.allclose(self.d, other.d, rtol=0, atol=atol)
        )

    def __repr__(self):
        if self.kind != "raw":
            args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
            return f"GaussianChannel.{self.kind}({args})"
        return f"GaussianChannel(modes={self.modes})"


# ---------------------------------------------------------------- constructors

def identity_channel(modes: int = 1) -> GaussianChannel:
    n = 2 * modes
    return GaussianChannel(np.eye(n), np.zeros((n, n)), kind="identity", params={"modes": modes})


def make_thermal(eta: float, n_b: float) -> GaussianChannel:
    """Thermal-loss channel of transmissivity ``eta`` in (0, 1)."""
    if not 0 < eta < 1:
        raise ValueError(f"transmissivity must lie in (0, 1), got {eta}")
    if n_b < 0:
        raise ValueError(f"thermal photon number must be non-negative, got {n_b}")
    I2 = np.eye(2)
    return GaussianChannel(
        np.sqrt(eta) * I2, (1 - eta) * (2 * n_b + 1) * I2,
        kind="thermal", params={"eta": eta, "n_b": n_b},
    )


def make_pure_loss(eta: float) -> GaussianChannel:
    ch = make_thermal(eta, 0.0)
    return GaussianChannel(ch.X, ch.Y, kind="pure_loss", params={"eta": eta})


def make_amplifier(gain: float, n_b: float) -> GaussianChannel:
    """Phase-insensitive amplifier with gain ``G > 1``."""
    if not gain > 1:
        raise ValueError(f"gain must exceed 1, got {gain}")
    if n_b < 0:
        raise ValueError(f"thermal photon number must be non-negative, got {n_b}")
    I2 = np.eye(2)
    return GaussianChannel(
        np.sqrt(gain) * I2, (gain - 1) * (2 * n_b + 1) * I2,
        kind="amplifier", params={"gain": gain, "n_b": n_b},
    )


def make_pure_amplifier(gain: float) -> GaussianChannel:
    ch = make_amplifier(gain, 0.0)
    return GaussianChannel(ch.X, ch.Y, kind="pure_amplifier", params={"gain": gain})


def make_additive_noise(xi: float) -> GaussianChannel:
    """Random-displacement channel adding ``xi`` photons: ``X = I``, ``Y = 2 xi I``."""
    if not xi > 0:
        raise ValueError(f"noise variance must be positive, got {xi}")
    I2 = np.eye(2)
    return GaussianChannel(I2, 2 * xi * I2, kind="additive_noise", params={"xi": xi})


def teleportation_channel(sigma_bar: float) -> GaussianChannel:
    """Channel realised by imperfect CV teleportation with noise variance ``sigma_bar``."""
    ch = make_additive_noise(sigma_bar)
    return GaussianChannel(ch.X, ch.Y, kind="teleportation", params={"sigma_bar": sigma_bar})


def symplectic_channel(S) -> GaussianChannel:
    """Gaussian unitary with symplectic matrix ``S`` (acting as ``V -> S V S^T``)."""
    S = np.asarray(S, dtype=float)
    if not is_symplectic(S, 1e-9):
        raise InvalidChannelError("matrix is not symplectic")
    n = S.shape[0]
    return GaussianChannel(S.T, np.zeros((n, n)), kind="unitary")


# ------------------------------------------------------------------ operations

def apply(channel: GaussianChannel, state: GaussianState, check: bool = True) -> GaussianState:
    if channel.modes != state.modes:
        raise ValueError(
            f"channel acts on {channel.modes} modes but state has {state.modes}"
        )
    if check:
        channel.check()
    X = channel.X
    return GaussianState(X.T @ state.mean + channel.d, X.T @ state.cov @ X + channel.Y)


def embed(channel: GaussianChannel, modes: int, targets) -> GaussianChannel:
    """Lift ``channel`` to ``modes`` modes, acting on ``targets`` and as identity elsewhere."""
    targets = list(targets)
    if len(targets) != channel.modes:
        raise ValueError(f"{channel.modes}-mode channel needs {channel.modes} targets")
    if len(set(targets)) != len(targets):
        raise ValueError(f"target modes must be distinct, got {targets}")
    for t in targets:
        if not 0 <= t < modes:
            raise IndexError(f"target mode {t} out of range for {modes} modes")
    idx = quadrature_indices(modes, targets)
    X = np.eye(2 * modes)
    Y = np.zeros((2 * modes, 2 * modes))
    d = np.zeros(2 * modes)
    X[np.ix_(idx, idx)] = channel.X
    Y[np.ix_(idx, idx)] = channel.Y
    d[idx] = channel.d
    return GaussianChannel(X, Y, d)


def apply_on_subsystem(channel: GaussianChannel, state: GaussianState, target_modes) -> GaussianState:
    """Apply ``id (x) channel`` with the channel acting on ``target_modes``."""
    if isinstance(target_modes, (int, np.integer)):
        target_modes = [int(target_modes)]
    return apply(embed(channel, state.modes, target_modes), state, check=False)


def compose(second: GaussianChannel, first: GaussianChannel) -> GaussianChannel:
    """The channel ``second o first`` (``first`` acts on the input)."""
    if second.modes != first.modes:
        raise ValueError(f"cannot compose {second.modes}-mode after {first.modes}-mode channel")
    X2 = second.X
    return GaussianChannel(
        first.X @ X2,
        X2.T @ first.Y @ X2 + second.Y,
        X2.T @ first.d + second.d,
    )


def tensor(*channels: GaussianChannel) -> GaussianChannel:
    """Parallel composition, mode order following the argument order."""
    m = sum(c.modes for c in channels)
    X = np.zeros((2 * m, 2 * m))
    Y = np.zeros((2 * m, 2 * m))
    d = np.zeros(2 * m)
    offset = 0
    for c in channels:
        idx = quadrature_indices(m, range(offset, offset + c.modes))
        X[np.ix_(idx, idx)] = c.X
        Y[np.ix_(idx, idx)] = c.Y
        d[idx] = c.d
        offset += c.modes
    return GaussianChannel(X, Y, d, kind="tensor", parts=tuple(channels))


def check_displacement_covariance(channel: GaussianChannel, z, state: GaussianState) -> float:
    """Moment-level residual of ``N(D(z) rho D(z)^+) = D(X^T z) N(rho) D(X^T z)^+``."""
    z = np.asarray(z, dtype=float)
    lhs = apply(channel, state.displaced(z), check=False)
    rhs = apply(channel, state, check=False).displaced(channel.X.T @ z)
    return float(max(np.max(np.abs(lhs.mean - rhs.mean)), np.max(np.abs(lhs.cov - rhs.cov))))


# -------------------------------------------------------------------- dilation

@dataclass(frozen=True)
class Dilation:
    """Gaussian unitary on system + environment plus the environment state.

    ``symplectic`` is expressed in the global quadrature order of the ``2m``
    modes ``(A_1..A_m, E_1..E_m)``; :meth:`blocks` returns the
    ``[[X^T, Z], [X_E^T, Z_E]]`` view grouped by subsystem.
    """

    symplectic: np.ndarray
    env_state: GaussianState

    @property
    def modes(self) -> int:
        return self.env_state.modes

    def blocks(self):
        m = self.modes
        a = quadrature_indices(2 * m, range(m))
        e = quadrature_indices(2 * m, range(m, 2 * m))
        S = self.symplectic
        return S[np.ix_(a, a)], S[np.ix_(a, e)], S[np.ix_(e, a)], S[np.ix_(e, e)]

    def output(self, state: GaussianState) -> GaussianState:
        """Marginal on the system modes after the joint unitary."""
        joint = direct_sum(state, self.env_state).transformed(self.symplectic)
        return joint.reduced(range(self.modes))

    def channel(self) -> GaussianChannel:
        XT, Z, _, _ = self.blocks()
        return GaussianChannel(XT.T, Z @ self.env_state.cov @ Z.T, Z @ self.env_state.mean)


def _beamsplitter_dilation(eta):
    t, r = np.sqrt(eta), np.sqrt(1 - eta)
    B = np.array([[t, r], [-r, t]])
    return np.kron(np.eye(2), B)


def _two_mode_squeezer_dilation(gain):
    ch, sh = np.sqrt(gain), np.sqrt(gain - 1)
    Sq = np.array([[ch, sh], [sh, ch]])
    Sp = np.array([[ch, -sh], [-sh, ch]])
    S = np.zeros((4, 4))
    S[:2, :2] = Sq
    S[2:, 2:] = Sp
    return S


def dilate(channel: GaussianChannel) -> Dilation:
    """Beamsplitter / two-mode-squeezer dilation with a thermal environment.

    Supported: thermal, pure-loss, amplifier and pure-amplifier channels, and
    tensor products of these.

    Raises:
        UnsupportedChannelError: for any other channel.
    """
    singles = channel.parts if channel.kind == "tensor" else (channel,)
    blocks, envs = [], []
    for c in singles:
        if c.kind in ("thermal", "pure_loss"):
            blocks.append(_beamsplitter_dilation(c.params["eta"]))
        elif c.kind in ("amplifier", "pure_amplifier"):
            blocks.append(_two_mode_squeezer_dilation(c.params["gain"]))
        else:
            raise UnsupportedChannelError(f"no dilation available for {c.kind!r} channels")
        envs.append(c.params.get("n_b", 0.0))
    m = len(singles)
    # each 4x4 block is in (q_A, q_E, p_A, p_E) order for its own pair of modes
    S = np.zeros((4 * m, 4 * m))
    for k, B in enumerate(blocks):
        idx = quadrature_indices(2 * m, [k, m + k])
        S[np.ix_(idx, idx)] = B
    return Dilation(_frozen(S), thermal_state(envs))


# --------------------------------------------------------------- serialisation

_NAMED = {
    "identity": lambda p: identity_channel(int(p.get("modes", 1))),
    "thermal": lambda p: make_thermal(p["eta"], p["n_b"]),
    "pure_loss": lambda p: make_pure_loss(p["eta"]),
    "amplifier": lambda p: make_amplifier(p["gain"], p["n_b"]),
    "pure_amplifier": lambda p: make_pure_amplifier(p["gain"]),
    "additive_noise": lambda p: make_additive_noise(p["xi"]),
    "teleportation": lambda p: teleportation_channel(p["sigma_bar"]),
}

CHANNEL_KINDS = tuple(_NAMED) + ("tensor",)


def channel_from_dict(doc: dict) -> GaussianChannel:
    """Build a channel from ``{"kind", "params"}``, ``{"kind": "tensor", "parts"}`` or ``{"X", "Y", "d"}``."""
    if "kind" in doc:
        kind = doc["kind"]
        if kind == "tensor":
            return tensor(*(channel_from_dict(p) for p in doc["parts"]))
        if kind not in _NAMED:
            raise UnsupportedChannelError(f"unknown channel kind {kind!r}")
        return _NAMED[kind](doc.get("params", {}))
    if "X" in doc and "Y" in doc:
        return GaussianChannel(np.array(doc["X"]), np.array(doc["Y"]), doc.get("d"))
    raise ValueError("channel document needs either 'kind' or 'X' and 'Y'")


def channel_to_dict(channel: GaussianChannel) -> dict:
    if channel.kind == "tensor":
        return {"kind": "tensor", "parts": [channel_to_dict(p) for p in channel.parts]}
    if channel.kind in _NAMED:
        return {"kind": channel.kind, "params": dict(channel.params)}
    return {"X": channel.X.tolist(), "Y": channel.Y.tolist(), "d": channel.d.tolist()}


def output_is_physical(channel: GaussianChannel, state: GaussianState) -> bool:
    return bool(validate_covariance(apply(channel, state, check=False).cov))
