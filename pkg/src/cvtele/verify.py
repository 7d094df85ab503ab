"""Acceptance checks with machine-readable results.

Each check returns a :class:`CheckResult`.  ``fast`` runs the closed-form
identities only; ``full`` adds the Fock-oracle cross-checks, the game
simulations and the randomised composition tests.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from decimal import Decimal, getcontext
from fractions import Fraction

import numpy as np
from scipy import integrate

from .channels import (
    apply_on_subsystem,
    compose,
    make_amplifier,
    make_thermal,
    teleportation_channel,
    tensor,
)
from .experiments import (
    SweepSpec,
    fock_serial_distance,
    fock_tensor_power_distance,
    gaussian_adaptive_distance,
    oracle_channel_distance,
    oracle_teleport_fidelity,
    run_strong_convergence,
)
from .fidelity import fidelity_gaussian_zero_mean, fidelity_thermal_thermal, overlap_two_mode_zero_mean
from .skc import c_epsilon, pure_loss_bound
from .symplectic import make_tmsv_state, random_gaussian_state
from .telegame import GameConfig, play_games
from .teleport import (
    NOISE_SCALE,
    simulate,
    telescoping_bound_parallel,
    telescoping_bound_serial,
    uniform_bound,
    uniform_bound_additive,
    uniform_bound_multimode,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    runtime_s: float
    runtime_limit_s: float
    identities: list
    details: dict = field(default_factory=dict)
    level: str = "fast"

    @property
    def within_time(self) -> bool:
        return self.runtime_s < self.runtime_limit_s

    def line(self) -> str:
        status = "PASS" if self.passed and self.within_time else "FAIL"
        return f"{status} {self.name} ({self.runtime_s:.2f}s / limit {self.runtime_limit_s:g}s)"


def _timed(fn):
    def wrapper(level="full"):
        t0 = time.perf_counter()
        res = fn(level)
        res.runtime_s = time.perf_counter() - t0
        res.level = level
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ----------------------------------------------------------------- checks

@_timed
def check_composition_identity(level="full"):
    """Teleported thermal and amplifier channels stay in their families with a hotter environment."""
    worst = 0.0
    for eta in np.linspace(0.1, 0.9, 5):
        for n_b in np.linspace(0.0, 2.0, 5):
            for s in np.geomspace(1e-3, 1.0, 5):
                comp = compose(make_thermal(eta, n_b), teleportation_channel(s))
                ref = make_thermal(eta, n_b + eta * s / (1 - eta))
                worst = max(worst, np.max(np.abs(comp.X - ref.X)), np.max(np.abs(comp.Y - ref.Y)))
    worst_amp = 0.0
    for g in np.linspace(1.2, 5.0, 5):
        for n_b in np.linspace(0.0, 2.0, 5):
            for s in np.geomspace(1e-3, 1.0, 5):
                comp = compose(make_amplifier(g, n_b), teleportation_channel(s))
                ref = make_amplifier(g, n_b + g * s / (g - 1))
                worst_amp = max(worst_amp, np.max(np.abs(comp.X - ref.X)), np.max(np.abs(comp.Y - ref.Y)))
    ok = worst <= 1e-12 and worst_amp <= 1e-12
    return CheckResult(
        "thermal_and_amplifier_composition_identity", ok, 0.0, 1.0,
        ["L(eta,N_B) o T(sigma) = L(eta, N_B + eta sigma/(1-eta))",
         "A(G,N_B) o T(sigma) = A(G, N_B + G sigma/(G-1))"],
        {"max_abs_error_thermal": worst, "max_abs_error_amplifier": worst_amp, "grid": "5x5x5"},
    )


@_timed
def check_ideal_channel_nonuniform(level="full"):
    """TMSV overlap with its teleported version, by closed form, determinant formula and Fock oracle."""
    def max_error(n_grid):
        err = 0.0
        for n_s in n_grid:
            psi = make_tmsv_state(n_s)
            for s in [1.0, 0.5, 0.1, 0.01, 1e-3]:
                tau = apply_on_subsystem(teleportation_channel(s), psi, 1)
                closed = 1 / (s + 2 * s * n_s + 1)
                err = max(err, abs(overlap_two_mode_zero_mean(psi.cov, tau.cov) - closed))
        return err

    worst = max_error([0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0])
    # det(V1 + V2) cancels ~N_S^2 in double precision (a^2 - c^2 = 1 with
    # a ~ 2 N_S), so the error grows like 1e-16 N_S^2; larger N_S is reported only.
    worst_large = max_error([100.0, 1000.0])
    exact = Fraction(1) - 1 / (Fraction(1, 10) + 2 * Fraction(1, 10) * 1000 + 1)
    formula = 1 - 1 / (0.1 + 2 * 0.1 * 1000 + 1)
    details = {
        "max_abs_error_determinant": worst,
        "max_abs_error_determinant_n_s_100_1000": worst_large,
        "infidelity_sigma_0.1_ns_1000": formula,
        "rational_arithmetic_value": float(exact),
        "abs_error_vs_rational": abs(formula - float(exact)),
    }
    ok = worst <= 1e-12 and abs(formula - float(exact)) <= 1e-9
    identities = ["<Phi|tau|Phi> = 1/(sigma + 2 sigma N_S + 1)", "Tr(rho sigma) = 4/sqrt(det(V1+V2))"]
    if level == "full":
        worst_oracle = 0.0
        for n_s in [0.0, 0.5, 1.0, 2.0]:
            for s in [1.0, 0.5, 0.1]:
                probe = {"kind": "tmsv", "n_s": n_s}
                f, w = oracle_teleport_fidelity(probe, s, 60)
                worst_oracle = max(worst_oracle, abs(f - 1 / (s + 2 * s * n_s + 1)))
        details["max_abs_error_fock_oracle"] = worst_oracle
        ok = ok and worst_oracle <= 1e-4
        identities.append("Fock-oracle overlap at cutoff 60")
    return CheckResult("ideal_channel_nonuniform_convergence", ok, 0.0, 30.0, identities, details)


@_timed
def check_basel_strong_convergence(level="full"):
    """Entanglement infidelity of the Basel state decreases along the sigma grid."""
    spec = SweepSpec("strong_fixed_state", state={"kind": "basel"}, sigma_grid=[1.0, 0.1, 0.01, 0.001],
                     basel_cutoff=2000, floor=0.999)
    rows = run_strong_convergence(spec)
    eps = [r.value for r in rows]
    ok = bool(np.all(np.diff(eps) < 0) and eps[-1] < 0.02)
    return CheckResult(
        "strong_convergence_on_basel_state", ok, 0.0, 10.0,
        ["epsilon(sigma, Basel) = 1 - int G_sigma |chi|^2 decreases to 0"],
        {"sigma_grid": spec.sigma_grid, "infidelity": eps, "truncation_weight": rows[0].truncation_weight},
    )


@_timed
def check_uniform_bounds_dominate(level="full"):
    """Fock-oracle distances for several probes never exceed the closed-form uniform bounds."""
    channels = [make_thermal(0.5, 0.0), make_thermal(0.5, 1.0), make_amplifier(2.0, 0.0), make_amplifier(2.0, 1.0)]
    probes = [{"kind": "vacuum"}, {"kind": "tmsv", "n_s": 1.0}, {"kind": "tmsv", "n_s": 2.0}, {"kind": "basel"}]
    table = []
    ok = True
    for ch in channels:
        for s in [0.1, 0.3]:
            bound = uniform_bound(ch, s).bound_value
            ps = []
            for p in probes:
                val, w = oracle_channel_distance(ch, s, p, 60, floor=0.98)
                ps.append(val)
                ok = ok and val <= bound + 1e-4
            monotone = ps[0] <= ps[1] + 1e-12 and ps[1] <= ps[2] + 1e-12
            ok = ok and monotone
            table.append({"channel": repr(ch), "sigma_bar": s, "bound": bound,
                          "oracle": dict(zip(["vacuum", "tmsv1", "tmsv2", "basel60"], ps)),
                          "nondecreasing_in_n_s": monotone})
    return CheckResult(
        "uniform_bounds_dominate_oracle_distances", ok, 0.0, 120.0,
        ["P(id x L(rho), id x L o T(rho)) <= e(N_B, eta, sigma)",
         "P(id x A(rho), id x A o T(rho)) <= e(N_B, G, sigma)"],
        {"rows": table},
    )


def bhattacharyya_p_distance(xi1: float, xi2: float) -> float:
    """Sine distance of two circular complex Gaussians from the Bhattacharyya integral.

    Each density factorises over the real and imaginary parts, each normal
    with variance ``xi / 2``.
    """
    def one_dim(x):
        p = np.exp(-x ** 2 / xi1) / np.sqrt(np.pi * xi1)
        q = np.exp(-x ** 2 / xi2) / np.sqrt(np.pi * xi2)
        return np.sqrt(p * q)

    bc1, _ = integrate.quad(one_dim, -np.inf, np.inf, epsabs=1e-14, epsrel=1e-13)
    bc = bc1 ** 2
    return float(np.sqrt(max(0.0, 1 - bc ** 2)))


@_timed
def check_classical_gaussian_bound(level="full"):
    """Additive-noise bound against numerical Bhattacharyya integration."""
    worst = 0.0
    for xi in [0.1, 0.5, 1.0, 3.0]:
        for s in [0.01, 0.1, 0.5, 2.0]:
            worst = max(worst, abs(uniform_bound_additive(xi, s).bound_value - bhattacharyya_p_distance(xi, xi + s)))
    return CheckResult(
        "classical_gaussian_bound_matches_bhattacharyya", worst <= 1e-8, 0.0, 1.0,
        ["sqrt(1 - 4 xi (xi + sigma)/(2 xi + sigma)^2) = sqrt(1 - (int sqrt(p q))^2)"],
        {"max_abs_error": worst, "grid": "4x4"},
    )


@_timed
def check_multimode_bound(level="full"):
    """Multi-mode environment bound against the product of single-mode thermal fidelities."""
    cases = [((0.5, 1.0), (0.3, 0.5)), ((0.9, 0.0), (0.2, 2.0)), ((0.7, 0.3), (0.7, 0.3))]
    worst = 0.0
    trend = []
    for (e1, n1), (e2, n2) in cases:
        ch = tensor(make_thermal(e1, n1), make_thermal(e2, n2))
        for s in [0.5, 0.1, 0.01]:
            val = uniform_bound_multimode(ch, s).bound_value
            shift = NOISE_SCALE * s / 2
            f = (fidelity_thermal_thermal(n1, n1 + shift / (1 - e1)).fidelity
                 * fidelity_thermal_thermal(n2, n2 + shift / (1 - e2)).fidelity)
            worst = max(worst, abs(val - np.sqrt(1 - f)))
    ch = tensor(make_thermal(0.5, 1.0), make_thermal(0.3, 0.5))
    grid = [1.0, 1e-1, 1e-2, 1e-4, 1e-6, 1e-8]
    trend = [uniform_bound_multimode(ch, s).bound_value for s in grid]
    to_zero = bool(np.all(np.diff(trend) < 0) and trend[-1] < 1e-3)
    return CheckResult(
        "multimode_bound_matches_thermal_product", worst <= 1e-8 and to_zero, 0.0, 5.0,
        ["P(gamma_E(Y), gamma_E(Y + c sigma I)) with c = 2", "fidelity is multiplicative over tensor products"],
        {"max_abs_error": worst, "sigma_grid": grid, "bound_along_grid": trend},
    )


def _random_channel(rng):
    if rng.random() < 0.5:
        return make_thermal(float(rng.uniform(0.1, 0.9)), float(rng.uniform(0, 2)))
    return make_amplifier(float(rng.uniform(1.2, 3.0)), float(rng.uniform(0, 2)))


@_timed
def check_telescoping(level="full"):
    """Parallel and adaptive compositions never exceed the sum of per-use distances."""
    rng = np.random.default_rng(20240611)
    par_margin, ser_margin = np.inf, np.inf
    par_ok = ser_ok = True
    for _ in range(50):
        n = int(rng.integers(2, 4))
        ch = _random_channel(rng)
        s = float(10 ** rng.uniform(-3, 0))
        sim = simulate(ch, s).simulated
        state = random_gaussian_state(n + 1, rng)
        ideal, tele = state, state
        for j in range(n):
            ideal = apply_on_subsystem(ch, ideal, j)
            tele = apply_on_subsystem(sim, tele, j)
        p = fidelity_gaussian_zero_mean(ideal, tele).p_distance
        bound = telescoping_bound_parallel([uniform_bound(ch, s).bound_value] * n)
        par_ok = par_ok and p <= bound + 1e-12
        par_margin = min(par_margin, bound - p)
    for _ in range(50):
        uses = int(rng.integers(1, 4))
        ch = _random_channel(rng)
        s = float(10 ** rng.uniform(-3, 0))
        p, per_use = gaussian_adaptive_distance(ch, s, uses, 2, rng)
        bound = telescoping_bound_serial(per_use)
        ser_ok = ser_ok and p <= bound + 1e-12
        ser_margin = min(ser_margin, bound - p)
    details = {"parallel_min_margin": float(par_margin), "serial_min_margin": float(ser_margin), "instances": 50}
    ok = par_ok and ser_ok
    identities = ["P(G^n, (G o T)^n) <= sum_j P_j", "adaptive protocol distance <= sum_j P_j"]
    if level == "full":
        spots = []
        probe = {"kind": "tmsv", "n_s": 0.5}
        for ch in [make_thermal(0.5, 0.0), make_thermal(0.5, 0.5)]:
            for s in [0.3, 0.1]:
                e = uniform_bound(ch, s).bound_value
                p_par, _ = fock_tensor_power_distance(ch, s, probe, 12)
                p_ser, _ = fock_serial_distance(ch, s, probe, 12)
                spots.append({"channel": repr(ch), "sigma_bar": s, "parallel": p_par, "serial": p_ser,
                              "bound": 2 * e})
                ok = ok and p_par <= 2 * e + 1e-4 and p_ser <= 2 * e + 1e-4
        details["fock_spot_checks"] = spots
        identities.append("two-use Fock oracle spot checks")
    return CheckResult("telescoping_bounds_parallel_and_serial", ok, 0.0, 60.0, identities, details)


GAME_FIXTURES = {
    "ideal_distinguisher_first": (
        dict(variant="ideal_channel", reveal_order="distinguisher_first",
             distinguisher_strategy={"probe": "tmsv", "n_s_schedule": [1, 2, 5, 10]},
             teleporter_strategy={"rule": "target_probability", "target": 0.7}),
        "teleporter",
    ),
    "ideal_teleporter_first": (
        dict(variant="ideal_channel", reveal_order="teleporter_first",
             distinguisher_strategy={"probe": "tmsv", "n_s_schedule": [1, 10, 100, 1000],
                                     "target_probability": 0.85},
             teleporter_strategy={"rule": "fixed", "sigma_bar": 0.1}),
        "distinguisher",
    ),
    "gaussian_distinguisher_first": (
        dict(variant="gaussian_channel", reveal_order="distinguisher_first",
             channel={"kind": "thermal", "params": {"eta": 0.5, "n_b": 0.0}},
             distinguisher_strategy={"probe": "tmsv", "n_s_schedule": [1, 10, 100]},
             teleporter_strategy={"rule": "uniform_bound", "target_p": 0.035}),
        "teleporter",
    ),
    "gaussian_teleporter_first": (
        dict(variant="gaussian_channel", reveal_order="teleporter_first",
             channel={"kind": "thermal", "params": {"eta": 0.5, "n_b": 0.0}},
             distinguisher_strategy={"probe": "tmsv", "n_s_schedule": [1, 10, 100], "target_probability": 0.75},
             teleporter_strategy={"rule": "uniform_bound", "target_p": 0.035}),
        "teleporter",
    ),
}


@_timed
def check_game_verdicts(level="full"):
    """Seeded game fixtures reach the expected winner in more than 99.9% of 100 games."""
    out = {}
    ok = True
    for name, (cfg, expected) in GAME_FIXTURES.items():
        config = GameConfig(rounds=10_000, rng_seed=12345, games=100, **cfg)
        summary, _ = play_games(config)
        freq = summary.teleporter_win_frequency if expected == "teleporter" else summary.distinguisher_win_frequency
        out[name] = {"expected": expected, "win_frequency": freq, "round_probability": summary.per_round_success_prob,
                     "sigma_bar": summary.sigma_bar, "n_s": summary.n_s}
        ok = ok and freq > 0.999
    return CheckResult(
        "teleportation_game_verdicts", ok, 0.0, 60.0,
        ["Pr{X=Y} = (1 + T)/2", "Fuchs-van de Graaf endpoints against the claimant", "3/4 threshold"],
        out,
    )


def _log2_decimal(x: Decimal) -> Decimal:
    return x.ln() / Decimal(2).ln()


@_timed
def check_skc_formulas(level="full"):
    """C(eps) and the pure-loss bound against 40-digit decimal arithmetic."""
    getcontext().prec = 40
    worst = 0.0
    for eps in ["0.1", "0.5", "0.01", "0.9"]:
        e = Decimal(eps)
        ref = _log2_decimal(Decimal(6)) + 2 * _log2_decimal((1 + e) / (1 - e))
        worst = max(worst, abs(c_epsilon(float(eps)) - float(ref)))
    c01 = c_epsilon(0.1)
    for eta in ["0.1", "0.5", "0.9"]:
        for n in [1, 10, 100, 10_000]:
            ref = -_log2_decimal(1 - Decimal(eta)) + (
                _log2_decimal(Decimal(6)) + 2 * _log2_decimal(Decimal(11) / Decimal(9))) / n
            worst = max(worst, abs(pure_loss_bound(float(eta), n, 0.1) - float(ref)))
        worst = max(worst, abs(pure_loss_bound(float(eta), math.inf, 0.1) + float(_log2_decimal(1 - Decimal(eta)))))
    return CheckResult(
        "secret_key_bound_formulas", worst <= 1e-12, 0.0, 1.0,
        ["C(eps) = log2 6 + 2 log2((1+eps)/(1-eps))", "P(n, eps) <= -log2(1-eta) + C(eps)/n"],
        {"max_abs_error": worst, "c_epsilon_0.1": c01, "pure_loss_0.5_100_0.1": pure_loss_bound(0.5, 100, 0.1)},
    )


CHECKS = [
    check_composition_identity,
    check_ideal_channel_nonuniform,
    check_basel_strong_convergence,
    check_uniform_bounds_dominate,
    check_classical_gaussian_bound,
    check_multimode_bound,
    check_telescoping,
    check_game_verdicts,
    check_skc_formulas,
]
FAST_CHECKS = [check_composition_identity, check_ideal_channel_nonuniform, check_classical_gaussian_bound,
               check_multimode_bound, check_skc_formulas]


def run_checks(level: str = "fast"):
    if level not in ("fast", "full"):
        raise ValueError(f"level must be 'fast' or 'full', got {level!r}")
    checks = FAST_CHECKS if level == "fast" else CHECKS
    return [c(level) for c in checks]


def report_json(results) -> str:
    doc = {
        "passed": all(r.passed and r.within_time for r in results),
        "checks": [dict(asdict(r), within_time=r.within_time) for r in results],
    }
    return json.dumps(doc, indent=2, sort_keys=True, default=float)
