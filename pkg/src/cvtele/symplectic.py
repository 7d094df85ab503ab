"""Mean-vector / covariance-matrix representation of multi-mode Gaussian states.

Conventions used throughout the package:

* quadratures are ordered ``(q_1, ..., q_m, p_1, ..., p_m)``;
* the symplectic form is ``Omega = [[0, 1], [-1, 0]] (x) I_m``;
* the vacuum has covariance matrix ``I`` (so a thermal state with mean photon
  number ``N`` has covariance ``(2N + 1) I``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SYMMETRY_TOL = 1e-12
PHYSICALITY_TOL = 1e-10
SYMPLECTIC_TOL = 1e-10


class UnphysicalCovarianceError(ValueError):
    """Raised when a covariance matrix violates ``V + i Omega >= 0``."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SymplecticForm:
    """The ``2m x 2m`` symplectic form in block convention."""

    modes: int
    matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.modes < 1:
            raise ValueError(f"modes must be positive, got {self.modes}")
        object.__setattr__(self, "matrix", _frozen(symplectic_form(self.modes)))


def symplectic_form(modes: int) -> np.ndarray:
    """Return ``Omega = [[0, 1], [-1, 0]] (x) I_m`` as a fresh array."""
    return np.kron(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.eye(modes))


def quadrature_indices(modes: int, targets) -> np.ndarray:
    """Indices of ``(q_t..., p_t...)`` for the listed target modes."""
    targets = list(targets)
    return np.array(targets + [modes + t for t in targets], dtype=int)


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Gaussian state described by its first two moments.

    Args:
        mean: length-``2m`` mean vector.
        cov: ``2m x 2m`` real symmetric covariance matrix.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _frozen(self.mean).reshape(-1)
        cov = _frozen(self.cov)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
            raise ValueError(f"covariance must be 2m x 2m, got shape {cov.shape}")
        if mean.shape[0] != cov.shape[0]:
            raise ValueError(
                f"mean has length {mean.shape[0]} but covariance is {cov.shape}"
            )
        if np.max(np.abs(cov - cov.T), initial=0.0) > SYMMETRY_TOL * max(1.0, np.max(np.abs(cov))):
            raise ValueError("covariance matrix is not symmetric")
        cov = _frozen(0.5 * (cov + cov.T))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def modes(self) -> int:
        return self.cov.shape[0] // 2

    def is_zero_mean(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.mean) <= atol))

    def reduced(self, targets) -> "GaussianState":
        """Marginal state on the listed modes (in the listed order)."""
        idx = quadrature_indices(self.modes, targets)
        return GaussianState(self.mean[idx], self.cov[np.ix_(idx, idx)])

    def displaced(self, z) -> "GaussianState":
        return GaussianState(self.mean + np.asarray(z, dtype=float), self.cov)

    def transformed(self, S) -> "GaussianState":
        """Apply the Gaussian unitary with symplectic matrix ``S``."""
        S = np.asarray(S, dtype=float)
        return GaussianState(S @ self.mean, S @ self.cov @ S.T)

    def __eq__(self, other):
        if not isinstance(other, GaussianState):
            return NotImplemented
        return (
            self.cov.shape == other.cov.shape
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.cov, other.cov)
        )

    __hash__ = None


def vacuum_state(modes: int = 1) -> GaussianState:
    return GaussianState(np.zeros(2 * modes), np.eye(2 * modes))


def thermal_state(n_mean) -> GaussianState:
    """Product of thermal states; ``n_mean`` is a scalar or one value per mode."""
    n = np.atleast_1d(np.asarray(n_mean, dtype=float))
    if np.any(n < 0):
        raise ValueError(f"mean photon numbers must be non-negative, got {n}")
    diag = np.concatenate([2 * n + 1, 2 * n + 1])
    return GaussianState(np.zeros(diag.size), np.diag(diag))


def make_tmsv_state(n_s: float) -> GaussianState:
    """Two-mode squeezed vacuum with mean photon number ``n_s`` per mode."""
    if n_s < 0:
        raise ValueError(f"mean photon number must be non-negative, got {n_s}")
    a = 2 * n_s + 1
    c = 2 * np.sqrt(n_s * (n_s + 1))
    cov = np.zeros((4, 4))
    cov[:2, :2] = [[a, c], [c, a]]
    cov[2:, 2:] = [[a, -c], [-c, a]]
    return GaussianState(np.zeros(4), cov)


def direct_sum(*states: GaussianState) -> GaussianState:
    """Tensor product of Gaussian states, keeping the block quadrature order."""
    m = sum(s.modes for s in states)
    mean = np.zeros(2 * m)
    cov = np.zeros((2 * m, 2 * m))
    offset = 0
    for s in states:
        idx = quadrature_indices(m, range(offset, offset + s.modes))
        mean[idx] = s.mean
        cov[np.ix_(idx, idx)] = s.cov
        offset += s.modes
    return GaussianState(mean, cov)


@dataclass(frozen=True)
class CovarianceCheck:
    valid: bool
    min_eigenvalue: float
    symmetry_residual: float

    def __bool__(self):
        return self.valid


def validate_covariance(V, omega=None, tol: float = PHYSICALITY_TOL) -> CovarianceCheck:
    """Check the uncertainty relation ``V + i Omega >= 0``.

    Args:
        V: real ``2m x 2m`` matrix.
        omega: a :class:`SymplecticForm` or raw matrix; built from ``V`` if omitted.
        tol: allowed negativity of the smallest eigenvalue.

    Returns:
        CovarianceCheck: truthy iff ``V`` is a valid quantum covariance matrix.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[0] != V.shape[1] or V.shape[0] % 2:
        raise ValueError(f"covariance must be 2m x 2m, got shape {V.shape}")
    if omega is None:
        omega = symplectic_form(V.shape[0] // 2)
    elif isinstance(omega, SymplecticForm):
        omega = omega.matrix
    omega = np.asarray(omega)
    if omega.shape != V.shape:
        raise ValueError(f"dimension mismatch: V {V.shape} vs Omega {omega.shape}")
    sym = float(np.max(np.abs(V - V.T), initial=0.0))
    Vs = 0.5 * (V + V.T)
    lam = float(np.linalg.eigvalsh(Vs + 1j * omega)[0])
    ok = lam >= -tol and sym <= SYMMETRY_TOL * max(1.0, float(np.max(np.abs(V))))
    return CovarianceCheck(bool(ok), lam, sym)


@dataclass(frozen=True)
class WilliamsonDecomposition:
    """``V = S (D + D) S^T`` with ``S`` symplectic and ``D = diag(nus)``."""

    symplectic: np.ndarray
    nus: np.ndarray

    def reconstruct(self) -> np.ndarray:
        d = np.concatenate([self.nus, self.nus])
        return self.symplectic @ np.diag(d) @ self.symplectic.T


def _sqrt_psd(V):
    w, U = np.linalg.eigh(V)
    if w[0] <= 0:
        raise UnphysicalCovarianceError(
            f"covariance is not positive definite (min eigenvalue {w[0]:.3e})"
        )
    return (U * np.sqrt(w)) @ U.T, (U / np.sqrt(w)) @ U.T


def williamson(state, tol: float = PHYSICALITY_TOL) -> WilliamsonDecomposition:
    """Symplectic diagonalisation of a covariance matrix.

    The spectrum of ``i V Omega`` is ``{+nu_k, -nu_k}``.  We diagonalise the
    similar Hermitian matrix ``i V^{1/2} Omega V^{1/2}``, whose orthonormal
    eigenvectors for the positive eigenvalues split into real and imaginary
    parts that form an orthonormal basis adapted to the symplectic structure.

    Args:
        state: :class:`GaussianState` or a raw covariance matrix.
        tol: tolerance for flagging symplectic eigenvalues below one.

    Returns:
        WilliamsonDecomposition with ``nus`` sorted ascending.

    Raises:
        UnphysicalCovarianceError: if some ``nu < 1 - tol``.
    """
    V = state.cov if isinstance(state, GaussianState) else np.asarray(state, dtype=float)
    m = V.shape[0] // 2
    omega = symplectic_form(m)
    root, _ = _sqrt_psd(0.5 * (V + V.T))
    K = root @ omega @ root
    H = 1j * K
    w, U = np.linalg.eigh(0.5 * (H + H.conj().T))
    # eigh sorts ascending: the last m eigenvalues are the positive ones
    nus = w[m:]
    vecs = U[:, m:]
    # deterministic column phases: make the largest-magnitude entry real positive
    for j in range(m):
        k = np.argmax(np.abs(vecs[:, j]))
        vecs[:, j] *= np.exp(-1j * np.angle(vecs[k, j]))
    x = np.sqrt(2) * vecs.real
    y = np.sqrt(2) * vecs.imag
    O = np.hstack([y, x])
    S = root @ O @ np.diag(1 / np.sqrt(np.concatenate([nus, nus])))
    # each (q_j, p_j) column pair is only fixed up to a rotation; pick the one
    # maximising the trace of the dominant 2x2 block (gives S = I when V is diagonal)
    for j in range(m):
        cols = [j, m + j]
        norms = [np.linalg.norm(S[[r, m + r]][:, cols]) for r in range(m)]
        r = int(np.argmax(norms))
        B = S[[r, m + r]][:, cols]
        phi = np.arctan2(B[0, 1] - B[1, 0], B[0, 0] + B[1, 1])
        c, s = np.cos(phi), np.sin(phi)
        S[:, cols] = S[:, cols] @ np.array([[c, -s], [s, c]])
    if nus[0] < 1 - tol:
        raise UnphysicalCovarianceError(
            f"symplectic eigenvalue {nus[0]:.12g} < 1: covariance is not physical"
        )
    return WilliamsonDecomposition(_frozen(S), _frozen(nus))


def symplectic_eigenvalues(V) -> np.ndarray:
    """Symplectic spectrum without constructing ``S`` (no physicality check)."""
    V = np.asarray(V, dtype=float)
    m = V.shape[0] // 2
    ev = np.linalg.eigvals(1j * V @ symplectic_form(m))
    return np.sort(np.abs(ev.real))[::2]


def is_symplectic(S, tol: float = SYMPLECTIC_TOL) -> bool:
    S = np.asarray(S, dtype=float)
    omega = symplectic_form(S.shape[0] // 2)
    return bool(np.max(np.abs(S @ omega @ S.T - omega)) <= tol)


# Gaussian unitaries used to build random symplectic matrices.

def beamsplitter(modes: int, i: int, j: int, theta: float) -> np.ndarray:
    """Real beamsplitter mixing modes ``i`` and ``j`` with angle ``theta``."""
    S = np.eye(2 * modes)
    c, s = np.cos(theta), np.sin(theta)
    for off in (0, modes):
        a, b = i + off, j + off
        S[a, a], S[a, b], S[b, a], S[b, b] = c, s, -s, c
    return S


def squeezer(modes: int, i: int, r: float) -> np.ndarray:
    S = np.eye(2 * modes)
    S[i, i] = np.exp(-r)
    S[modes + i, modes + i] = np.exp(r)
    return S


def phase_rotation(modes: int, i: int, phi: float) -> np.ndarray:
    S = np.eye(2 * modes)
    c, s = np.cos(phi), np.sin(phi)
    q, p = i, modes + i
    S[q, q], S[q, p], S[p, q], S[p, p] = c, s, -s, c
    return S


def two_mode_squeezer(modes: int, i: int, j: int, r: float) -> np.ndarray:
    S = np.eye(2 * modes)
    ch, sh = np.cosh(r), np.sinh(r)
    qi, qj, pi, pj = i, j, modes + i, modes + j
    S[qi, qi] = S[qj, qj] = S[pi, pi] = S[pj, pj] = ch
    S[qi, qj] = S[qj, qi] = sh
    S[pi, pj] = S[pj, pi] = -sh
    return S


def random_symplectic(modes: int, rng, max_squeezing: float = 0.5, layers: int = 2) -> np.ndarray:
    """Random symplectic matrix built from beamsplitters, squeezers and rotations."""
    S = np.eye(2 * modes)
    for _ in range(layers):
        for i in range(modes):
            S = phase_rotation(modes, i, rng.uniform(0, 2 * np.pi)) @ S
            S = squeezer(modes, i, rng.uniform(-max_squeezing, max_squeezing)) @ S
        for i in range(modes):
            for j in range(i + 1, modes):
                S = beamsplitter(modes, i, j, rng.uniform(0, 2 * np.pi)) @ S
    return S


def random_gaussian_state(modes: int, rng, max_thermal: float = 1.0, max_squeezing: float = 0.5,
                          zero_mean: bool = True) -> GaussianState:
    """Thermal product conjugated by a random symplectic (optionally displaced)."""
    nus = 2 * rng.uniform(0, max_thermal, size=modes) + 1
    S = random_symplectic(modes, rng, max_squeezing)
    cov = S @ np.diag(np.concatenate([nus, nus])) @ S.T
    mean = np.zeros(2 * modes) if zero_mean else rng.normal(size=2 * modes)
    return GaussianState(mean, cov)
