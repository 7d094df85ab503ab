"""Parameter sweeps contrasting strong and uniform convergence of teleportation simulation.

Every sweep returns a list of :class:`SweepRow` and can be written to CSV
with :func:`write_csv`.  Fock-oracle columns are filled only where the probe
is representable at the requested cutoff; a row whose retained probability
drops below the configured floor raises :class:`TruncationError`.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .channels import (
    GaussianChannel,
    apply_on_subsystem,
    channel_from_dict,
    channel_to_dict,
    identity_channel,
    symplectic_channel,
    apply,
)
from .fidelity import fidelity_gaussian_zero_mean
from .fock import (
    DEFAULT_FLOOR,
    FockState,
    TruncationError,
    apply_map,
    basel_amplitudes,
    channel_map,
    diagonal_state,
    entanglement_infidelity_teleport,
    fidelity_fock,
    fidelity_sector,
    identity_map,
    make_tmsv_fock,
    sector_output,
    teleport_map,
    tmsv_amplitudes,
    vacuum_fock,
)
from .symplectic import (
    direct_sum,
    make_tmsv_state,
    random_gaussian_state,
    random_symplectic,
    vacuum_state,
)
from .teleport import simulate, telescoping_bound_parallel, telescoping_bound_serial, uniform_bound

log = logging.getLogger(__name__)

EXPERIMENTS = ("strong_fixed_state", "uniform_divergence", "tensor_power", "adaptive_serial", "bound_vs_oracle")
PROBE_KINDS = ("vacuum", "tmsv", "basel")
ORACLE_TOL = 1e-4
BASEL_SCALAR_CUTOFF = 2000

COLUMNS = {
    "strong_fixed_state": ["state", "n_s", "sigma_bar", "infidelity", "closed_form", "truncation_weight"],
    "uniform_divergence": ["sigma_bar", "n_s", "infidelity", "oracle_value", "truncation_weight"],
    "tensor_power": ["state", "n_s", "channel", "sigma_bar", "p_exact", "oracle_value", "bound_value",
                     "infidelity", "truncation_weight"],
    "adaptive_serial": ["channel", "sigma_bar", "instance", "uses", "p_exact", "oracle_value", "bound_value",
                        "truncation_weight"],
    "bound_vs_oracle": ["channel", "probe", "n_s", "sigma_bar", "oracle_value", "bound_value",
                        "truncation_weight"],
}


class SweepValidationError(ValueError):
    """Raised for malformed sweep specifications."""


# ------------------------------------------------------------------- specs

@dataclass
class SweepSpec:
    """What to sweep and where to write it.

    Args:
        experiment: one of :data:`EXPERIMENTS`.
        state: probe descriptor ``{"kind": "vacuum" | "tmsv" | "basel", "n_s": ...}``.
        sigma_grid: strictly decreasing positive teleportation noise values.
        n_s_grid: strictly increasing probe photon numbers.
        cutoff: Fock cutoff for matrix-level oracles (scalar Basel integrals
            use ``basel_cutoff``).
        channel: channel document for the channel-based experiments.
        floor: minimal acceptable truncation weight.
    """

    experiment: str
    state: dict = field(default_factory=lambda: {"kind": "vacuum"})
    sigma_grid: list = field(default_factory=lambda: [1.0, 0.1, 0.01])
    n_s_grid: list = field(default_factory=lambda: [0.0])
    cutoff: int = 60
    basel_cutoff: int = BASEL_SCALAR_CUTOFF
    channel: Optional[dict] = None
    probes: list = field(default_factory=list)
    uses: int = 2
    instances: int = 5
    seed: int = 0
    floor: float = DEFAULT_FLOOR
    output_path: Optional[str] = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise SweepValidationError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        s = np.asarray(self.sigma_grid, dtype=float)
        if s.size == 0 or np.any(s <= 0) or np.any(np.diff(s) >= 0):
            raise SweepValidationError("sigma_grid must be nonempty, positive and strictly decreasing")
        n = np.asarray(self.n_s_grid, dtype=float)
        if n.size == 0 or np.any(n < 0) or np.any(np.diff(n) <= 0):
            raise SweepValidationError("n_s_grid must be nonempty, non-negative and strictly increasing")
        if self.state.get("kind") not in PROBE_KINDS:
            raise SweepValidationError(f"state kind must be one of {PROBE_KINDS}")
        if self.cutoff < 1 or self.basel_cutoff < 1:
            raise SweepValidationError("cutoffs must be positive")
        if not 0 < self.floor <= 1:
            raise SweepValidationError("floor must lie in (0, 1]")
        if self.uses < 1 or self.instances < 1:
            raise SweepValidationError("uses and instances must be positive")
        if self.experiment == "adaptive_serial" and self.uses > 3:
            raise SweepValidationError("adaptive_serial supports at most 3 uses")
        if self.experiment in ("bound_vs_oracle", "adaptive_serial") and self.channel is None:
            raise SweepValidationError(f"{self.experiment} needs a channel")
        for p in self.probes:
            if p.get("kind") not in PROBE_KINDS:
                raise SweepValidationError(f"probe kind must be one of {PROBE_KINDS}")

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise SweepValidationError(f"unknown fields: {sorted(unknown)}")
        if "experiment" not in doc:
            raise SweepValidationError("missing field 'experiment'")
        return cls(**doc)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class SweepRow:
    parameters: dict
    value: Optional[float] = None
    oracle_value: Optional[float] = None
    bound_value: Optional[float] = None
    truncation_weight: float = 1.0
    extra: dict = field(default_factory=dict)

    def flat(self, value_name: str) -> dict:
        out = dict(self.parameters)
        out[value_name] = self.value
        out["oracle_value"] = self.oracle_value
        out["bound_value"] = self.bound_value
        out["truncation_weight"] = self.truncation_weight
        out.update(self.extra)
        return out


def _threads(threads: Optional[int]) -> int:
    if os.environ.get("GT_DETERMINISTIC") == "1":
        return 1
    return max(1, int(threads or 1))


def _map(fn, items, threads):
    items = list(items)
    n = _threads(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _check_floor(rows, floor):
    for i, r in enumerate(rows):
        if r.truncation_weight < floor:
            raise TruncationError(
                f"row {i} ({r.parameters}) has truncation weight {r.truncation_weight:.9f} below floor {floor}"
            )
    return rows


# ------------------------------------------------------------------ probes

def probe_amplitudes(probe: dict, cutoff: int) -> np.ndarray:
    """Schmidt coefficients of a probe ``sum_n c_n |n>|n>`` (unnormalised, truncated)."""
    kind = probe.get("kind")
    if kind == "vacuum":
        c = np.zeros(cutoff + 1)
        c[0] = 1.0
        return c
    if kind == "tmsv":
        return tmsv_amplitudes(float(probe["n_s"]), cutoff)
    if kind == "basel":
        return basel_amplitudes(cutoff)
    raise SweepValidationError(f"unknown probe kind {kind!r}")


def closed_form_infidelity(probe: dict, sigma_bar: float) -> Optional[float]:
    """``1 - 1/(sigma + 2 sigma N_S + 1)`` for Gaussian probes; ``None`` otherwise."""
    kind = probe.get("kind")
    if kind == "vacuum":
        return sigma_bar / (1 + sigma_bar)
    if kind == "tmsv":
        return 1 - 1 / (sigma_bar + 2 * sigma_bar * float(probe["n_s"]) + 1)
    return None


def oracle_channel_distance(channel: GaussianChannel, sigma_bar: float, probe: dict, cutoff: int,
                            floor: float = DEFAULT_FLOOR):
    """Sine distance between ``(id x G)(psi)`` and ``(id x G o T)(psi)`` in the sector oracle.

    The simulated map is built by composing the two transfer tensors, not from
    the closed-form parameter identity.

    Returns:
        tuple: ``(P, truncation_weight)``.
    """
    c = probe_amplitudes(probe, cutoff)
    ideal = channel_map(channel, cutoff)
    tele = teleport_map(sigma_bar, cutoff)
    sim = tele.then(channel_map(channel, tele.out_cutoff))
    a = sector_output(c, ideal, floor)
    b = sector_output(c, sim, floor)
    w = min(a.truncation_weight, b.truncation_weight)
    return float(np.sqrt(max(0.0, 1 - fidelity_sector(a, b)))), w


def oracle_teleport_fidelity(probe: dict, sigma_bar: float, cutoff: int, floor: float = DEFAULT_FLOOR):
    """``<psi| (id x T)(psi) |psi>`` in the sector oracle; returns ``(F, weight)``."""
    c = probe_amplitudes(probe, cutoff)
    a = sector_output(c, None, floor)
    b = sector_output(c, teleport_map(sigma_bar, cutoff), floor)
    return fidelity_sector(a, b), min(a.truncation_weight, b.truncation_weight)


def required_tmsv_cutoff(n_s: float, floor: float) -> int:
    """Smallest cutoff at which a TMSV keeps at least ``floor`` of its norm."""
    if n_s == 0:
        return 0
    r = n_s / (n_s + 1)
    return max(0, int(np.ceil(np.log(1 - floor) / np.log(r))) - 1)


# ------------------------------------------------------------- experiments

def _reduced_populations(probe: dict, cutoff: int):
    c = probe_amplitudes(probe, cutoff)
    w = float(np.sum(c ** 2))
    return diagonal_state(c ** 2), w


def run_strong_convergence(spec: SweepSpec, threads: Optional[int] = None):
    """Entanglement infidelity of the teleportation channel on a fixed probe along ``sigma_grid``."""
    probe = spec.state
    cutoff = spec.basel_cutoff if probe["kind"] == "basel" else max(spec.cutoff, 200)
    if probe["kind"] == "tmsv":
        cutoff = max(cutoff, required_tmsv_cutoff(float(probe["n_s"]), spec.floor))
    reduced, weight = _reduced_populations(probe, cutoff)

    def row(s):
        eps = entanglement_infidelity_teleport(reduced, s)
        return SweepRow(
            {"state": probe["kind"], "n_s": probe.get("n_s", ""), "sigma_bar": s},
            eps, truncation_weight=min(weight, 1.0),
            extra={"closed_form": closed_form_infidelity(probe, s)},
        )

    return _check_floor(_map(row, spec.sigma_grid, threads), spec.floor)


def run_uniform_divergence(spec: SweepSpec, threads: Optional[int] = None):
    """Infidelity at fixed ``sigma_grid[0]`` as the TMSV photon number grows.

    The oracle column is filled from the sector oracle whenever the TMSV is
    representable at ``spec.cutoff``.
    """
    s = float(spec.sigma_grid[0])

    def row(n_s):
        probe = {"kind": "tmsv", "n_s": n_s}
        closed = closed_form_infidelity(probe, s)
        oracle, weight = None, 1.0
        if required_tmsv_cutoff(n_s, spec.floor) <= spec.cutoff:
            f, weight = oracle_teleport_fidelity(probe, s, spec.cutoff, spec.floor)
            oracle = 1 - f
        return SweepRow({"sigma_bar": s, "n_s": n_s}, closed, oracle, truncation_weight=weight)

    return _check_floor(_map(row, spec.n_s_grid, threads), spec.floor)


# tensor power ----------------------------------------------------------------

def _two_use_gaussian_input(probe: dict):
    if probe["kind"] == "vacuum":
        return direct_sum(vacuum_state(), vacuum_state())
    if probe["kind"] == "tmsv":
        return make_tmsv_state(float(probe["n_s"]))
    raise SweepValidationError("tensor_power supports vacuum and tmsv probes")


def _two_use_fock_input(probe: dict, cutoff: int, floor: float) -> FockState:
    if probe["kind"] == "vacuum":
        return vacuum_fock(0, 2)
    return make_tmsv_fock(float(probe["n_s"]), cutoff, floor)


DENSE_TRIM_TOL = 1e-9


def _fock_two_use_map(channel: Optional[GaussianChannel], sigma_bar: Optional[float], cutoff: int):
    """Transfer tensor of ``G`` (``sigma_bar=None``) or ``G o T`` on one mode."""
    if sigma_bar is None:
        return channel_map(channel, cutoff).trimmed(DENSE_TRIM_TOL) if channel is not None else identity_map(cutoff)
    tele = teleport_map(sigma_bar, cutoff)
    if channel is None:
        return tele.trimmed(DENSE_TRIM_TOL)
    return tele.then(channel_map(channel, tele.out_cutoff)).trimmed(DENSE_TRIM_TOL)


def fock_tensor_power_distance(channel: Optional[GaussianChannel], sigma_bar: float, probe: dict,
                               cutoff: int, floor: float = DEFAULT_FLOOR):
    """Dense-oracle sine distance between ``G (x) G`` and its simulation on a two-mode input."""
    state = _two_use_fock_input(probe, cutoff, floor)
    n = state.dims[0] - 1
    ideal = state  # keeps the state vector, so the fidelity below is a plain overlap
    if channel is not None:
        for mode in (0, 1):
            ideal = apply_map(ideal, _fock_two_use_map(channel, None, n), mode)
    sim = state
    for mode in (0, 1):
        sim = apply_map(sim, _fock_two_use_map(channel, sigma_bar, n), mode)
    dims = tuple(max(a, b) for a, b in zip(ideal.dims, sim.dims))
    f = fidelity_fock(ideal.padded(dims), sim.padded(dims))
    w = min(ideal.truncation_weight, sim.truncation_weight)
    return float(np.sqrt(max(0.0, 1 - f))), w


def run_tensor_power(spec: SweepSpec, threads: Optional[int] = None):
    """Two parallel uses of ``G`` (the identity if no channel) versus their simulations.

    ``p_exact`` is the covariance-level distance, ``oracle_value`` the dense
    Fock distance and ``bound_value`` the sum of the per-use distances.  For
    the identity channel the per-use distance is the state-dependent
    ``P(psi, (T x id) psi)``; for channels with a uniform bound it is that
    bound.
    """
    probe = spec.state
    channel = channel_from_dict(spec.channel) if spec.channel else None
    rho = _two_use_gaussian_input(probe)
    oracle_cutoff = 0 if probe["kind"] == "vacuum" else min(spec.cutoff, 14)
    representable = probe["kind"] == "vacuum" or required_tmsv_cutoff(float(probe["n_s"]), spec.floor) <= oracle_cutoff

    def row(s):
        base = channel or identity_channel(1)
        sim = simulate(base, s).simulated
        ideal_out = apply_on_subsystem(base, apply_on_subsystem(base, rho, 0), 1)
        sim_out = apply_on_subsystem(sim, apply_on_subsystem(sim, rho, 0), 1)
        f = fidelity_gaussian_zero_mean(ideal_out, sim_out).fidelity
        p_exact = float(np.sqrt(max(0.0, 1 - f)))
        if channel is None:
            per_use = []
            for mode in (0, 1):
                one = apply_on_subsystem(sim, rho, mode)
                per_use.append(fidelity_gaussian_zero_mean(rho, one).p_distance)
        else:
            per_use = [uniform_bound(channel, s).bound_value] * 2
        oracle, weight = None, 1.0
        if representable:
            try:
                oracle, weight = fock_tensor_power_distance(channel, s, probe, oracle_cutoff, spec.floor)
            except MemoryError as exc:
                log.warning("dense oracle skipped at sigma=%g: %s", s, exc)
        return SweepRow(
            {"state": probe["kind"], "n_s": probe.get("n_s", ""), "channel": base.kind, "sigma_bar": s},
            p_exact, oracle, telescoping_bound_parallel(per_use), weight,
            extra={"infidelity": 1 - f},
        )

    return _check_floor(_map(row, spec.sigma_grid, threads), spec.floor)


# adaptive serial -------------------------------------------------------------

def gaussian_adaptive_distance(channel: GaussianChannel, sigma_bar: float, uses: int, modes: int,
                               rng: np.random.Generator):
    """Exact sine distance between an adaptive protocol and its simulated version.

    The protocol starts from a random zero-mean Gaussian state on ``modes``
    modes and alternates a use of ``channel`` on mode 0 with a random
    Gaussian unitary on all modes.

    Returns:
        tuple: ``(P_exact, per_use_bounds)``.
    """
    if channel.modes != 1:
        raise SweepValidationError("adaptive protocols use a single-mode channel")
    sim = simulate(channel, sigma_bar).simulated
    state = random_gaussian_state(modes, rng)
    adaptors = [symplectic_channel(random_symplectic(modes, rng)) for _ in range(uses)]
    ideal, tele = state, state
    for A in adaptors:
        ideal = apply(A, apply_on_subsystem(channel, ideal, 0), check=False)
        tele = apply(A, apply_on_subsystem(sim, tele, 0), check=False)
    p = fidelity_gaussian_zero_mean(ideal, tele).p_distance
    return p, [uniform_bound(channel, sigma_bar).bound_value] * uses


def fock_serial_distance(channel: GaussianChannel, sigma_bar: float, probe: dict, cutoff: int,
                         floor: float = DEFAULT_FLOOR):
    """Two adaptive uses of ``channel`` on the A mode of a two-mode probe.

    Between the uses the adaptor discards mode 0 and prepares it afresh in
    the vacuum, so the second use acts on the output of the first.

    Returns:
        tuple: ``(P, truncation_weight)``.
    """
    state = _two_use_fock_input(probe, cutoff, floor)

    def run(s):
        st = state
        for step in range(2):
            st = apply_map(st, _fock_two_use_map(channel, s, st.dims[1] - 1), 1)
            if step == 0:
                st = vacuum_fock(0).kron(st.reduced([1]))
        return st

    ideal, sim = run(None), run(sigma_bar)
    dims = tuple(max(a, b) for a, b in zip(ideal.dims, sim.dims))
    f = fidelity_fock(ideal.padded(dims), sim.padded(dims))
    return float(np.sqrt(max(0.0, 1 - f))), min(ideal.truncation_weight, sim.truncation_weight)


def run_adaptive_serial(spec: SweepSpec, threads: Optional[int] = None):
    """Random adaptive Gaussian protocols with ``spec.uses`` channel uses, one row per (sigma, instance)."""
    channel = channel_from_dict(spec.channel)
    seqs = np.random.SeedSequence(spec.seed).spawn(len(spec.sigma_grid) * spec.instances)
    jobs = [(s, i, seqs[k * spec.instances + i]) for k, s in enumerate(spec.sigma_grid) for i in range(spec.instances)]

    def row(job):
        s, i, seq = job
        p, per_use = gaussian_adaptive_distance(channel, s, spec.uses, 2, np.random.default_rng(seq))
        return SweepRow(
            {"channel": channel.kind, "sigma_bar": s, "instance": i, "uses": spec.uses},
            p, None, telescoping_bound_serial(per_use),
        )

    rows = _map(row, jobs, threads)
    return _check_floor(rows, spec.floor)


def run_bound_vs_oracle(spec: SweepSpec, threads: Optional[int] = None):
    """Sector-oracle distance against the closed-form uniform bound for each probe and sigma."""
    channel = channel_from_dict(spec.channel)
    probes = spec.probes or [spec.state]
    jobs = [(p, s) for p in probes for s in spec.sigma_grid]

    def row(job):
        probe, s = job
        p, w = oracle_channel_distance(channel, s, probe, spec.cutoff, spec.floor)
        return SweepRow(
            {"channel": json.dumps(channel_to_dict(channel), sort_keys=True), "probe": probe["kind"],
             "n_s": probe.get("n_s", ""), "sigma_bar": s},
            None, p, uniform_bound(channel, s).bound_value, w,
        )

    return _check_floor(_map(row, jobs, threads), spec.floor)


RUNNERS = {
    "strong_fixed_state": (run_strong_convergence, "infidelity"),
    "uniform_divergence": (run_uniform_divergence, "infidelity"),
    "tensor_power": (run_tensor_power, "p_exact"),
    "adaptive_serial": (run_adaptive_serial, "p_exact"),
    "bound_vs_oracle": (run_bound_vs_oracle, "value"),
}


def run_sweep(spec: SweepSpec, threads: Optional[int] = None):
    fn, _ = RUNNERS[spec.experiment]
    log.info("running %s over %d sigma values", spec.experiment, len(spec.sigma_grid))
    return fn(spec, threads)


# --------------------------------------------------------------------- CSV

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    s = str(v)
    if any(ch in s for ch in ',"\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def metadata_line(config_hash: str) -> str:
    return f"# version={__version__} config_sha256={config_hash}"


def format_csv(records, columns, config_hash: str) -> str:
    lines = [",".join(columns)]
    for r in records:
        lines.append(",".join(_fmt(r.get(c)) for c in columns))
    lines.append(metadata_line(config_hash))
    return "\n".join(lines) + "\n"


def rows_to_csv(spec: SweepSpec, rows) -> str:
    _, value_name = RUNNERS[spec.experiment]
    records = [r.flat(value_name) for r in rows]
    return format_csv(records, COLUMNS[spec.experiment], spec.config_hash())


def write_csv(text: str, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)
