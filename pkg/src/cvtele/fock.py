"""Truncated photon-number-basis oracle.

Two representations are provided:

* :class:`FockState` is a dense density matrix on a product of truncated
  modes.  It is exact but limited to a few thousand basis states.
* :class:`SectorState` covers the two-mode outputs ``(id (x) N)(|psi><psi|)``
  with ``|psi> = sum_n c_n |n>|n>`` and ``N`` phase covariant.  Such outputs
  are block diagonal in ``k = n_R - n_A`` and can be handled at cutoffs of
  several hundred.

Single-mode phase-covariant maps are stored as transfer tensors
``W[d, a, n] = <a| N(|n><n-d|) |a-d>``, which compose by matrix products
per ``d``.  Pure loss and pure amplification have closed-form Kraus
elements; every other phase-insensitive Gaussian channel is a pure
amplifier after a pure loss.  The teleportation channel is also available by
direct quadrature over displacement matrix elements, independent of that
decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gammaln, roots_laguerre, roots_legendre

DEFAULT_FLOOR = 1 - 1e-6
DEFAULT_LEAKAGE_TOL = 1e-12
DENSE_DIM_LIMIT = 2500
BASEL_NORM = np.pi ** 2 / 6


class TruncationError(RuntimeError):
    """Raised when retained probability falls below the configured floor."""


class QuadratureError(RuntimeError):
    """Raised when an adaptive quadrature fails to converge."""


# ---------------------------------------------------------------------------
# dense states


@dataclass(frozen=True, eq=False)
class FockState:
    """Dense density matrix on ``prod(dims)`` truncated number states.

    Args:
        matrix: Hermitian unit-trace matrix, row-major over ``dims``.
        dims: local dimension (cutoff + 1) of each subsystem.
        truncation_weight: trace captured before renormalisation.
        floor: minimal acceptable truncation weight.
        ket: optional state vector when the state is known to be pure.
    """

    matrix: np.ndarray
    dims: tuple
    truncation_weight: float = 1.0
    floor: float = DEFAULT_FLOOR
    ket: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        rho = np.asarray(self.matrix, dtype=complex)
        n = int(np.prod(dims))
        if rho.shape != (n, n):
            raise ValueError(f"matrix shape {rho.shape} does not match dims {dims}")
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > 1e-12:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1) > 1e-12:
            raise ValueError(f"density matrix has trace {tr}, expected 1")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", rho)

    @classmethod
    def from_ket(cls, psi, dims, floor: float = DEFAULT_FLOOR) -> "FockState":
        """Normalise ``psi`` and record its squared norm as truncation weight."""
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        w = float(np.vdot(psi, psi).real)
        if w <= 0:
            raise ValueError("zero state vector")
        psi = psi / np.sqrt(w)
        return cls(np.outer(psi, psi.conj()), dims, min(w, 1.0), floor, psi)

    @classmethod
    def from_matrix(cls, rho, dims, floor: float = DEFAULT_FLOOR, weight: float = 1.0) -> "FockState":
        """Hermitise and renormalise ``rho``; the removed trace multiplies ``weight``."""
        rho = np.asarray(rho, dtype=complex)
        rho = 0.5 * (rho + rho.conj().T)
        tr = float(np.trace(rho).real)
        if tr <= 0:
            raise ValueError("matrix has non-positive trace")
        return cls(rho / tr, dims, weight * tr, floor)

    @property
    def modes(self) -> int:
        return len(self.dims)

    @property
    def cutoff(self) -> int:
        return self.dims[0] - 1

    @property
    def flagged(self) -> bool:
        return self.truncation_weight < self.floor

    def require_weight(self) -> "FockState":
        if self.flagged:
            raise TruncationError(
                f"truncation weight {self.truncation_weight:.12f} below floor {self.floor}"
            )
        return self

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def is_diagonal(self, atol: float = 1e-14) -> bool:
        off = self.matrix - np.diag(np.diag(self.matrix))
        return bool(np.max(np.abs(off), initial=0.0) <= atol)

    def populations(self) -> np.ndarray:
        return np.diag(self.matrix).real.copy()

    def tensor(self) -> np.ndarray:
        return self.matrix.reshape(self.dims + self.dims)

    def reduced(self, keep: Sequence[int]) -> "FockState":
        """Partial trace onto the subsystems listed in ``keep``."""
        keep = list(keep)
        m = self.modes
        letters = "abcdefghij"
        rows = list(letters[:m])
        cols = [c.upper() for c in rows]
        for j in range(m):
            if j not in keep:
                cols[j] = rows[j]
        out = "".join(rows[j] for j in keep) + "".join(cols[j] for j in keep)
        t = np.einsum("".join(rows) + "".join(cols) + "->" + out, self.tensor())
        dims = tuple(self.dims[j] for j in keep)
        d = int(np.prod(dims))
        return FockState(t.reshape(d, d), dims, self.truncation_weight, self.floor)

    def padded(self, dims) -> "FockState":
        """Embed into larger local dimensions by zero padding."""
        dims = tuple(int(d) for d in dims)
        if len(dims) != self.modes or any(a < b for a, b in zip(dims, self.dims)):
            raise ValueError(f"cannot pad dims {self.dims} to {dims}")
        if dims == self.dims:
            return self
        t = np.zeros(dims + dims, dtype=complex)
        sl = tuple(slice(0, d) for d in self.dims)
        t[sl + sl] = self.tensor()
        n = int(np.prod(dims))
        ket = None
        if self.ket is not None:
            k = np.zeros(dims, dtype=complex)
            k[sl] = self.ket.reshape(self.dims)
            ket = k.reshape(-1)
        return FockState(t.reshape(n, n), dims, self.truncation_weight, self.floor, ket)

    def kron(self, other: "FockState") -> "FockState":
        ket = None
        if self.ket is not None and other.ket is not None:
            ket = np.kron(self.ket, other.ket)
        return FockState(
            np.kron(self.matrix, other.matrix),
            self.dims + other.dims,
            self.truncation_weight * other.truncation_weight,
            min(self.floor, other.floor),
            ket,
        )

    def mean_photon_number(self, mode: int = 0) -> float:
        p = np.diag(self.reduced([mode]).matrix).real
        return float(np.arange(p.size) @ p)


def vacuum_fock(cutoff: int = 0, modes: int = 1) -> FockState:
    psi = np.zeros((cutoff + 1) ** modes)
    psi[0] = 1.0
    return FockState.from_ket(psi, (cutoff + 1,) * modes)


def _schmidt_state(c, floor) -> FockState:
    d = c.size
    psi = np.zeros((d, d), dtype=complex)
    psi[np.arange(d), np.arange(d)] = c
    return FockState.from_ket(psi.reshape(-1), (d, d), floor)


def tmsv_amplitudes(n_s: float, cutoff: int) -> np.ndarray:
    """Unnormalised Schmidt coefficients ``sqrt(n_s^n / (n_s+1)^(n+1))``, ``n <= cutoff``."""
    if n_s < 0:
        raise ValueError(f"mean photon number must be non-negative, got {n_s}")
    if cutoff < 0:
        raise ValueError("cutoff must be non-negative")
    n = np.arange(cutoff + 1)
    if n_s == 0:
        return (n == 0).astype(float)
    return np.exp(0.5 * (n * np.log(n_s) - (n + 1) * np.log1p(n_s)))


def basel_amplitudes(cutoff: int) -> np.ndarray:
    """Unnormalised Schmidt coefficients ``sqrt(6/pi^2) / n`` for ``1 <= n <= cutoff``."""
    if cutoff < 1:
        raise ValueError("Basel state needs cutoff >= 1")
    c = np.zeros(cutoff + 1)
    c[1:] = 1.0 / (np.sqrt(BASEL_NORM) * np.arange(1, cutoff + 1))
    return c


def make_tmsv_fock(n_s: float, cutoff: int, floor: float = DEFAULT_FLOOR) -> FockState:
    return _schmidt_state(tmsv_amplitudes(n_s, cutoff), floor)


def make_basel_state(cutoff: int, floor: float = DEFAULT_FLOOR) -> FockState:
    """Pure entangled Basel state truncated at ``cutoff``."""
    return _schmidt_state(basel_amplitudes(cutoff), floor)


def make_basel_classical(cutoff: int, floor: float = DEFAULT_FLOOR) -> FockState:
    """Classically correlated Basel state ``sum_n p_n |n><n| (x) |n><n|``."""
    p = basel_amplitudes(cutoff) ** 2
    d = cutoff + 1
    diag = np.zeros((d, d))
    diag[np.arange(d), np.arange(d)] = p
    return FockState.from_matrix(np.diag(diag.reshape(-1)), (d, d), floor)


def thermal_populations(n_b: float, cutoff: int) -> np.ndarray:
    if n_b < 0:
        raise ValueError(f"mean photon number must be non-negative, got {n_b}")
    return tmsv_amplitudes(n_b, cutoff) ** 2


def make_thermal_fock(n_b: float, cutoff: int, floor: float = DEFAULT_FLOOR) -> FockState:
    p = thermal_populations(n_b, cutoff)
    return FockState.from_matrix(np.diag(p), (cutoff + 1,), floor)


def diagonal_state(p, floor: float = DEFAULT_FLOOR) -> FockState:
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("populations must be non-negative")
    return FockState.from_matrix(np.diag(p), (p.size,), floor)


# ---------------------------------------------------------------------------
# characteristic functions and entanglement infidelity


def laguerre_table(n_max: int, x) -> np.ndarray:
    """``L_n(x)`` for ``n = 0..n_max`` by the three-term recurrence; shape ``(n_max+1,) + x.shape``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 1.0 - x
    for n in range(1, n_max):
        out[n + 1] = ((2 * n + 1 - x) * out[n] - n * out[n - 1]) / (n + 1)
    return out


def _radial_char(p, u):
    """``sum_n p_n exp(-u/2) L_n(u)`` without storing the full table."""
    u = np.asarray(u, dtype=float)
    acc = p[0] * np.ones_like(u)
    if p.size > 1:
        prev, cur = np.ones_like(u), 1.0 - u
        acc = acc + p[1] * cur
        for n in range(1, p.size - 1):
            prev, cur = cur, ((2 * n + 1 - u) * cur - n * prev) / (n + 1)
            acc = acc + p[n + 1] * cur
    return np.exp(-u / 2) * acc


@dataclass(frozen=True)
class CharacteristicFunction:
    """Symmetrically ordered characteristic function ``chi(alpha) = Tr[D(alpha) rho]``."""

    evaluator: Callable

    def __call__(self, alpha):
        return self.evaluator(alpha)


def char_function_fock_diagonal(state: FockState) -> CharacteristicFunction:
    """Characteristic function of a number-diagonal single-mode state.

    Raises:
        ValueError: if the state is multi-mode or has off-diagonal elements.
    """
    if state.modes != 1:
        raise ValueError("characteristic function is implemented for single-mode states")
    if not state.is_diagonal():
        raise ValueError("state must be diagonal in the number basis")
    p = state.populations()

    def chi(alpha):
        u = np.abs(np.asarray(alpha, dtype=complex)) ** 2
        return _radial_char(p, u).astype(complex)

    return CharacteristicFunction(chi)


def _gauss_legendre_panels(f, a, b, panels, order=32):
    x, w = roots_legendre(order)
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    pts = (mid[:, None] + half[:, None] * x[None, :]).reshape(-1)
    wts = (half[:, None] * w[None, :]).reshape(-1)
    return float(np.sum(wts * f(pts)))


def entanglement_infidelity_teleport(
    reduced: FockState,
    sigma_bar: float,
    tol: float = 1e-9,
    t_max: float = 60.0,
    max_panels: int = 4096,
) -> float:
    """``1 - int G(alpha) |chi(alpha)|^2 d^2 alpha`` for a number-diagonal reduced state.

    In ``t = |alpha|^2 / sigma_bar`` the integral is ``int_0^inf e^{-t} chi(sigma_bar t)^2 dt``;
    the range is cut at ``t_max`` (tail below ``e^{-t_max}``) and integrated on
    composite Gauss-Legendre panels, doubling until successive values agree to ``tol``.

    Raises:
        QuadratureError: when ``max_panels`` is reached without convergence.
    """
    if sigma_bar <= 0:
        raise ValueError(f"sigma_bar must be positive, got {sigma_bar}")
    if reduced.modes != 1 or not reduced.is_diagonal():
        raise ValueError("reduced state must be single-mode and number diagonal")
    p = reduced.populations()

    def integrand(t):
        return np.exp(-t) * _radial_char(p, sigma_bar * t) ** 2

    panels = 8
    prev = _gauss_legendre_panels(integrand, 0.0, t_max, panels)
    while True:
        panels *= 2
        cur = _gauss_legendre_panels(integrand, 0.0, t_max, panels)
        if abs(cur - prev) < tol:
            return float(min(1.0, max(0.0, 1.0 - cur)))
        if panels >= max_panels:
            raise QuadratureError(f"no convergence after {panels} panels (change {abs(cur - prev):.2e})")
        prev = cur


# ---------------------------------------------------------------------------
# phase-covariant single-mode maps


@dataclass(frozen=True, eq=False)
class PhaseCovariantMap:
    """Transfer tensor of a phase-covariant single-mode map.

    ``W[d + in_cutoff, a, n] = <a| N(|n><n-d|) |a-d>`` for ``|d| <= in_cutoff``,
    ``0 <= a <= out_cutoff``.  Entries with an index outside range are zero.
    """

    W: np.ndarray
    in_cutoff: int
    out_cutoff: int

    def block(self, d: int) -> np.ndarray:
        return self.W[d + self.in_cutoff]

    def leakage(self) -> np.ndarray:
        """Per-input-level probability lost above ``out_cutoff``."""
        return 1.0 - self.block(0).sum(axis=0)

    def then(self, second: "PhaseCovariantMap") -> "PhaseCovariantMap":
        """The map ``second o self``."""
        if second.in_cutoff < self.out_cutoff:
            raise ValueError("second map must accept the first map's output range")
        N = self.in_cutoff
        k = self.out_cutoff + 1
        W = np.empty((2 * N + 1, second.out_cutoff + 1, N + 1))
        for d in range(-N, N + 1):
            W[d + N] = second.block(d)[:, :k] @ self.block(d)
        return PhaseCovariantMap(W, N, second.out_cutoff)

    def trimmed(self, tol: float = DEFAULT_LEAKAGE_TOL) -> "PhaseCovariantMap":
        """Drop output levels while every input level keeps leakage below ``tol``."""
        cum = np.cumsum(self.block(0), axis=0)
        ok = np.all(1.0 - cum <= tol, axis=1)
        out = int(np.argmax(ok)) if ok.any() else self.out_cutoff
        return self.with_out_cutoff(max(out, 0))

    def with_out_cutoff(self, out_cutoff: int) -> "PhaseCovariantMap":
        if out_cutoff > self.out_cutoff:
            raise ValueError("cannot extend the output range")
        return PhaseCovariantMap(self.W[:, : out_cutoff + 1, :], self.in_cutoff, out_cutoff)


def _valid_mask(N, A):
    d = np.arange(-N, N + 1)[:, None, None]
    a = np.arange(A + 1)[None, :, None]
    n = np.arange(N + 1)[None, None, :]
    return d, a, n, (n - d >= 0) & (n - d <= N) & (a - d >= 0) & (a - d <= A)


def _log_factorials(n_max: int) -> np.ndarray:
    return gammaln(np.arange(n_max + 1) + 1.0)


def _log_binom(n, k, table=None):
    n = np.asarray(n, dtype=np.int64)
    k = np.asarray(k, dtype=np.int64)
    if table is None:
        table = _log_factorials(int(n.max(initial=0)))
    return table[n] - table[k] - table[n - k]


def identity_map(cutoff: int) -> PhaseCovariantMap:
    d, a, n, ok = _valid_mask(cutoff, cutoff)
    return PhaseCovariantMap((ok & (a == n)).astype(float), cutoff, cutoff)


def pure_loss_map(eta: float, cutoff: int) -> PhaseCovariantMap:
    """Pure loss with transmissivity ``eta``; output never exceeds the input cutoff."""
    if not 0 < eta <= 1:
        raise ValueError(f"transmissivity must lie in (0, 1], got {eta}")
    if eta == 1:
        return identity_map(cutoff)
    d, a, n, ok = _valid_mask(cutoff, cutoff)
    j = n - a
    ok = ok & (j >= 0) & (n - d - j >= 0)
    jj = np.where(ok, j, 0)
    nd = np.where(ok, n - d, 0)
    nn = np.where(ok, n, 0)
    logw = (
        0.5 * (_log_binom(nn, jj) + _log_binom(nd, jj))
        + (0.5 * (2 * nn - d) - jj) * np.log(eta)
        + jj * np.log1p(-eta)
    )
    return PhaseCovariantMap(np.where(ok, np.exp(np.where(ok, logw, 0.0)), 0.0), cutoff, cutoff)


def pure_amplifier_map(gain: float, cutoff: int, out_cutoff: int) -> PhaseCovariantMap:
    """Quantum-limited amplifier with gain ``gain >= 1`` truncated at ``out_cutoff``."""
    if gain < 1:
        raise ValueError(f"gain must be >= 1, got {gain}")
    if out_cutoff < cutoff:
        raise ValueError("out_cutoff must be at least the input cutoff")
    d, a, n, ok = _valid_mask(cutoff, out_cutoff)
    if gain == 1:
        return PhaseCovariantMap((ok & (a == n)).astype(float), cutoff, out_cutoff)
    j = a - n
    ok = ok & (j >= 0)
    jj = np.where(ok, j, 0)
    nd = np.where(ok, n - d, 0)
    nn = np.where(ok, n, 0)
    logw = (
        0.5 * (_log_binom(nn + jj, jj) + _log_binom(nd + jj, jj))
        + jj * np.log1p(-1 / gain)
        - (0.5 * (2 * nn - d) + 1) * np.log(gain)
    )
    return PhaseCovariantMap(np.where(ok, np.exp(np.where(ok, logw, 0.0)), 0.0), cutoff, out_cutoff)


def _amp_leakage(gain, cutoff, out_cutoff):
    """Diagonal leakage of the pure amplifier from its closed-form populations."""
    a = np.arange(out_cutoff + 1)[:, None]
    n = np.arange(cutoff + 1)[None, :]
    j = a - n
    ok = j >= 0
    jj = np.where(ok, j, 0)
    logp = _log_binom(n + jj, jj) + jj * np.log1p(-1 / gain) - (n + 1) * np.log(gain)
    p = np.where(ok, np.exp(np.where(ok, logp, 0.0)), 0.0)
    return 1 - p.sum(axis=0)


def choose_out_cutoff(gain: float, cutoff: int, tol: float = DEFAULT_LEAKAGE_TOL, hard_max: int = 4000) -> int:
    """Smallest output cutoff for which a pure amplifier leaks less than ``tol`` from every input level."""
    if gain <= 1:
        return cutoff
    out = max(cutoff + 8, int(gain * (cutoff + 1)) + 8)
    while True:
        leak = _amp_leakage(gain, cutoff, out)
        if np.max(leak) <= tol:
            break
        if out >= hard_max:
            raise TruncationError(f"amplifier with gain {gain} needs output cutoff above {hard_max}")
        out = min(hard_max, int(out * 1.5))
    # shrink back to the smallest passing value
    lo, hi = cutoff, out
    while lo < hi:
        mid = (lo + hi) // 2
        if np.max(_amp_leakage(gain, cutoff, mid)) <= tol:
            hi = mid
        else:
            lo = mid + 1
    return hi


def phase_insensitive_map(tau: float, y: float, cutoff: int, tol: float = DEFAULT_LEAKAGE_TOL) -> PhaseCovariantMap:
    """Fock transfer tensor of the channel ``X = sqrt(tau) I``, ``Y = y I``.

    The channel is realised as a pure amplifier of gain ``(y + 1 + tau) / 2``
    applied after a pure loss of transmissivity ``tau / gain``.  Results are
    cached; the returned tensor is read-only.
    """
    return _phase_insensitive_map(float(tau), float(y), int(cutoff), float(tol))


@lru_cache(maxsize=32)
def _phase_insensitive_map(tau, y, cutoff, tol):
    gain = 0.5 * (y + 1 + tau)
    if gain < 1 - 1e-12 or tau > gain * (1 + 1e-12) or tau <= 0:
        raise ValueError(f"(tau={tau}, y={y}) is not a completely positive phase-insensitive channel")
    gain = max(gain, 1.0)
    loss = pure_loss_map(min(1.0, tau / gain), cutoff)
    out = choose_out_cutoff(gain, cutoff, tol)
    fmap = loss.then(pure_amplifier_map(gain, cutoff, out))
    fmap.W.setflags(write=False)
    return fmap


def channel_map(channel, cutoff: int, tol: float = DEFAULT_LEAKAGE_TOL) -> PhaseCovariantMap:
    """Transfer tensor for a single-mode phase-insensitive :class:`GaussianChannel`."""
    X = np.asarray(channel.X)
    Y = np.asarray(channel.Y)
    if X.shape != (2, 2):
        raise ValueError("only single-mode channels have a Fock transfer tensor here")
    if channel.d is not None and np.any(np.asarray(channel.d) != 0):
        raise ValueError("displaced channels are not phase covariant")
    if not (np.allclose(X, X[0, 0] * np.eye(2), atol=1e-14) and np.allclose(Y, Y[0, 0] * np.eye(2), atol=1e-14)):
        raise ValueError("channel is not phase insensitive")
    if X[0, 0] <= 0:
        raise ValueError("phase-conjugating channels are not supported")
    return phase_insensitive_map(X[0, 0] ** 2, Y[0, 0], cutoff, tol)


def teleport_map(sigma_bar: float, cutoff: int, tol: float = DEFAULT_LEAKAGE_TOL) -> PhaseCovariantMap:
    """Additive-noise map via its loss/amplifier decomposition."""
    if sigma_bar <= 0:
        raise ValueError(f"sigma_bar must be positive, got {sigma_bar}")
    return phase_insensitive_map(1.0, 2.0 * sigma_bar, cutoff, tol)


def displacement_elements(r, m_max: int, n_max: int) -> np.ndarray:
    """``<m|D(r)|n>`` for real ``r`` (array), shape ``(m_max+1, n_max+1) + r.shape``."""
    r = np.asarray(r, dtype=float)
    D = np.zeros((m_max + 1, n_max + 1) + r.shape)
    D[0, 0] = np.exp(-0.5 * r ** 2)
    for m in range(1, m_max + 1):
        D[m, 0] = r / np.sqrt(m) * D[m - 1, 0]
    for n in range(1, n_max + 1):
        D[0, n] = -r * D[0, n - 1] / np.sqrt(n)
        for m in range(1, m_max + 1):
            D[m, n] = (np.sqrt(m) * D[m - 1, n - 1] - r * D[m, n - 1]) / np.sqrt(n)
    return D


def teleport_map_quadrature(sigma_bar: float, cutoff: int, out_cutoff: int) -> PhaseCovariantMap:
    """Additive-noise map by integrating ``D(alpha) . D(alpha)^dagger`` against the Gaussian weight.

    The angular integral is done analytically.  In the radial variable
    ``u = |alpha|^2`` the integrand is ``e^{-u (1 + 1/sigma_bar)}`` times a
    polynomial, so Gauss-Laguerre quadrature in ``t = u (1 + 1/sigma_bar)`` is
    exact once the node count exceeds half the polynomial degree.
    """
    if sigma_bar <= 0:
        raise ValueError(f"sigma_bar must be positive, got {sigma_bar}")
    nodes = (cutoff + out_cutoff) // 2 + 2
    if nodes > 150:
        raise ValueError("cutoff too large for the quadrature route")
    t, w = roots_laguerre(nodes)
    u = t / (1 + 1 / sigma_bar)
    D = displacement_elements(np.sqrt(u), out_cutoff, cutoff)
    # sum_i w_i e^{t_i} (1/sigma) e^{-u_i/sigma} f f  with  e^{t - u/sigma} = e^{u}
    scale = w * np.exp(u) / (1 + sigma_bar)
    N, A = cutoff, out_cutoff
    W = np.zeros((2 * N + 1, A + 1, N + 1))
    for d in range(-N, N + 1):
        a_lo, a_hi = max(0, d), min(A, A + d)
        n_lo, n_hi = max(0, d), min(N, N + d)
        if a_lo > a_hi or n_lo > n_hi:
            continue
        f1 = D[a_lo : a_hi + 1, n_lo : n_hi + 1]
        f2 = D[a_lo - d : a_hi - d + 1, n_lo - d : n_hi - d + 1]
        W[d + N, a_lo : a_hi + 1, n_lo : n_hi + 1] = np.einsum("ank,ank,k->an", f1, f2, scale)
    return PhaseCovariantMap(W, N, A)


def apply_map(state: FockState, fmap: PhaseCovariantMap, target: int = 0) -> FockState:
    """Apply a phase-covariant map to one subsystem of a dense state.

    The trace lost above the output cutoff reduces ``truncation_weight``.
    """
    dims = list(state.dims)
    if dims[target] - 1 > fmap.in_cutoff:
        raise ValueError("map input cutoff is smaller than the state's cutoff")
    N, A = dims[target] - 1, fmap.out_cutoff
    total = int(np.prod(dims)) // (N + 1) * (A + 1)
    if total > DENSE_DIM_LIMIT:
        raise MemoryError(f"dense output dimension {total} exceeds limit {DENSE_DIM_LIMIT}")
    t = np.moveaxis(state.tensor(), (target, state.modes + target), (0, state.modes))
    rest = t.shape[1 : state.modes]
    t = t.reshape(N + 1, -1, N + 1, int(np.prod(rest)) if rest else 1)
    out = np.zeros((A + 1, t.shape[1], A + 1, t.shape[3]), dtype=complex)
    for d in range(-N, N + 1):
        n = np.arange(max(0, d), min(N, N + d) + 1)
        if n.size == 0:
            continue
        a = np.arange(max(0, d), min(A, A + d) + 1)
        Wd = fmap.block(d)[np.ix_(a, n)]
        band = t[n, :, n - d, :]  # (len n, rest, rest)
        out[a, :, a - d, :] += np.einsum("an,nij->aij", Wd, band)
    out_dims = dims.copy()
    out_dims[target] = A + 1
    out = out.reshape((A + 1,) + rest + (A + 1,) + rest)
    out = np.moveaxis(out, (0, state.modes), (target, state.modes + target))
    n_tot = int(np.prod(out_dims))
    rho = out.reshape(n_tot, n_tot)
    tr = float(np.trace(rho).real)
    return FockState.from_matrix(rho, out_dims, state.floor, state.truncation_weight * tr)


def apply_teleport_channel_fock(state: FockState, sigma_bar: float, target_mode: int = 0,
                                tol: float = DEFAULT_LEAKAGE_TOL, quadrature: bool = True) -> FockState:
    """Teleportation (additive Gaussian noise) channel on one mode of a dense state.

    With ``quadrature=True`` the transfer tensor is obtained from displacement
    matrix elements; otherwise from the loss/amplifier decomposition.
    """
    N = state.dims[target_mode] - 1
    out = choose_out_cutoff(1 + sigma_bar, N, tol)
    if quadrature:
        fmap = teleport_map_quadrature(sigma_bar, N, out)
    else:
        fmap = teleport_map(sigma_bar, N, tol)
    return apply_map(state, fmap, target_mode)


def _psd_sqrt(rho):
    w, U = np.linalg.eigh(rho)
    w = np.clip(w, 0, None)
    return (U * np.sqrt(w)) @ U.conj().T


def _root_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    s = _psd_sqrt(a)
    ev = np.linalg.eigvalsh(s @ b @ s)
    return float(np.sum(np.sqrt(np.clip(ev, 0, None))))


def fidelity_fock(a: FockState, b: FockState) -> float:
    """Uhlmann fidelity ``||sqrt(a) sqrt(b)||_1^2``.

    Raises:
        ValueError: on mismatched dimensions.
    """
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    for x, y in ((a, b), (b, a)):
        if x.ket is not None:
            f = float(np.real(np.vdot(x.ket, y.matrix @ x.ket)))
            return min(1.0, max(0.0, f))
    f = _root_fidelity(a.matrix, b.matrix) ** 2
    return min(1.0, max(0.0, f))


def trace_distance_fock(a: FockState, b: FockState) -> float:
    """``(1/2) ||a - b||_1``."""
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    ev = np.linalg.eigvalsh(a.matrix - b.matrix)
    return float(min(1.0, 0.5 * np.sum(np.abs(ev))))


# ---------------------------------------------------------------------------
# block-sector representation


@dataclass(frozen=True, eq=False)
class SectorState:
    """Two-mode state that is block diagonal in ``k = n_R - n_A``.

    ``blocks[k][n, m]`` is the coefficient of ``|n, n-k><m, m-k|``; indices
    with a negative second label are zero.
    """

    blocks: dict
    size: int
    truncation_weight: float = 1.0
    floor: float = DEFAULT_FLOOR

    @property
    def flagged(self) -> bool:
        return self.truncation_weight < self.floor

    def trace(self) -> float:
        return float(sum(np.trace(b).real for b in self.blocks.values()))

    def to_dense(self, out_cutoff: int) -> FockState:
        R = self.size
        A = out_cutoff + 1
        rho = np.zeros((R, A, R, A), dtype=complex)
        for k, B in self.blocks.items():
            n = np.arange(R)
            ok = (n - k >= 0) & (n - k < A)
            idx = n[ok]
            for i in idx:
                rho[i, i - k, idx, idx - k] = B[i, idx]
        d = R * A
        return FockState(rho.reshape(d, d), (R, A), self.truncation_weight, self.floor)


def sector_output(amplitudes, fmap: Optional[PhaseCovariantMap], floor: float = DEFAULT_FLOOR,
                  weight: Optional[float] = None) -> SectorState:
    """``(id (x) N)(|psi><psi|)`` for ``|psi> = sum_n c_n |n>|n>``.

    Args:
        amplitudes: Schmidt coefficients ``c_n``; normalised internally and
            their squared norm is recorded as truncation weight unless
            ``weight`` is given.
        fmap: transfer tensor of ``N`` (``None`` for the identity).
    """
    c = np.asarray(amplitudes, dtype=complex)
    w0 = float(np.vdot(c, c).real)
    c = c / np.sqrt(w0)
    if weight is None:
        weight = min(1.0, w0)
    N = c.size - 1
    cc = np.outer(c, c.conj())
    if fmap is None:
        return SectorState({0: cc}, N + 1, weight, floor)
    if fmap.in_cutoff < N:
        raise ValueError("map input cutoff is smaller than the probe cutoff")
    if fmap.in_cutoff > N:
        fmap = PhaseCovariantMap(
            fmap.W[fmap.in_cutoff - N : fmap.in_cutoff + N + 1, :, : N + 1], N, fmap.out_cutoff
        )
    A = fmap.out_cutoff
    n = np.arange(N + 1)
    dmat = n[:, None] - n[None, :]
    blocks = {}
    for k in range(-A, N + 1):
        a = n - k
        ok = (a >= 0) & (a <= A)
        if not ok.any():
            continue
        aa = np.where(ok, a, 0)
        # W[d, a_n, n] for row n, column m
        vals = fmap.W[dmat + N, aa[:, None], n[:, None]]
        B = np.where(ok[:, None] & ok[None, :], cc * vals, 0.0)
        if np.any(B != 0):
            blocks[k] = B
    tr = sum(np.trace(b).real for b in blocks.values())
    blocks = {k: b / tr for k, b in blocks.items()}
    return SectorState(blocks, N + 1, weight * tr, floor)


def _aligned(a: SectorState, b: SectorState):
    if a.size != b.size:
        raise ValueError(f"sector size mismatch: {a.size} vs {b.size}")
    zero = np.zeros((a.size, a.size))
    for k in sorted(set(a.blocks) | set(b.blocks)):
        yield a.blocks.get(k, zero), b.blocks.get(k, zero)


def fidelity_sector(a: SectorState, b: SectorState) -> float:
    root = 0.0
    for x, y in _aligned(a, b):
        if not (np.any(x) and np.any(y)):
            continue
        root += _root_fidelity(x, y)
    return float(min(1.0, max(0.0, root ** 2)))


def trace_distance_sector(a: SectorState, b: SectorState) -> float:
    total = 0.0
    for x, y in _aligned(a, b):
        total += np.sum(np.abs(np.linalg.eigvalsh(x - y)))
    return float(min(1.0, 0.5 * total))
