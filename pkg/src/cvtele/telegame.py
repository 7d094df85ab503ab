"""Monte Carlo simulation of the teleportation discrimination game.

A referee flips a fair coin to decide whether the distinguisher's probe goes
through the target channel or through its teleportation simulation.  The
distinguisher measures and guesses; its single-round success probability is
``(1 + T) / 2`` with ``T`` the trace distance between the two outputs.  Over
many rounds the distinguisher wins if the fraction of correct guesses
exceeds 3/4.

Rounds are drawn as Bernoulli trials at the computed success probability.
When the trace distance is not available exactly the Fuchs-van de Graaf
interval is used, taking the endpoint least favourable to the player whose
win is being certified.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .channels import GaussianChannel, UnsupportedChannelError, apply_on_subsystem, channel_from_dict
from .experiments import probe_amplitudes, required_tmsv_cutoff
from .fidelity import fidelity_gaussian_zero_mean, fuchs_van_de_graaf_bounds
from .fock import DEFAULT_FLOOR, sector_output, teleport_map, trace_distance_sector, channel_map
from .symplectic import make_tmsv_state
from .teleport import simulate, uniform_bound

THRESHOLD = 0.75
BISECTION_TOL = 1e-10


class Variant(str, Enum):
    IDEAL = "ideal_channel"
    GAUSSIAN = "gaussian_channel"


class RevealOrder(str, Enum):
    DISTINGUISHER_FIRST = "distinguisher_first"
    TELEPORTER_FIRST = "teleporter_first"


class Player(str, Enum):
    DISTINGUISHER = "distinguisher"
    TELEPORTER = "teleporter"


class GameConfigError(ValueError):
    """Raised for inconsistent game configurations."""


@dataclass(frozen=True)
class RoundProbability:
    """Success probability used for the rounds plus the information behind it."""

    value: float
    lower: float
    upper: float
    exact: bool
    fidelity: Optional[float] = None

    def __post_init__(self):
        if not 0.5 - 1e-12 <= self.value <= 1 + 1e-12:
            raise ArithmeticError(f"round success probability {self.value} outside [1/2, 1]")


def helstrom_probability(trace_distance: float) -> float:
    return 0.5 * (1 + trace_distance)


def fvdg_probability_interval(fidelity: float) -> tuple:
    """Range of ``(1 + T) / 2`` allowed by the Fuchs-van de Graaf inequalities."""
    lo, hi = fuchs_van_de_graaf_bounds(fidelity)
    return float(helstrom_probability(lo)), float(helstrom_probability(hi))


def _probe_n_s(probe: dict) -> float:
    if probe.get("kind") == "vacuum":
        return 0.0
    if probe.get("kind") == "tmsv":
        return float(probe["n_s"])
    raise GameConfigError(f"unsupported probe {probe!r}; use vacuum or tmsv")


def round_success_probability(
    probe: dict,
    channel: Optional[GaussianChannel],
    sigma_bar: float,
    claimant: Player = Player.TELEPORTER,
    cutoff: int = 60,
    floor: float = DEFAULT_FLOOR,
) -> RoundProbability:
    """Single-round success probability for discriminating ``G`` from ``G o T``.

    Args:
        probe: ``{"kind": "tmsv", "n_s": ...}`` or ``{"kind": "vacuum"}``.
        channel: ``G``; ``None`` for the ideal (identity) channel.
        sigma_bar: teleportation noise.
        claimant: the player whose win is being certified when only a
            fidelity interval is available.
        cutoff: Fock cutoff for the exact trace distance.
    """
    if sigma_bar < 0:
        raise ValueError("sigma_bar must be non-negative")
    n_s = _probe_n_s(probe)
    if sigma_bar == 0:
        return RoundProbability(0.5, 0.5, 0.5, True, 1.0)
    psi = make_tmsv_state(n_s)
    base = channel
    if base is None:
        f = 1 / (sigma_bar + 2 * sigma_bar * n_s + 1)
    else:
        sim = simulate(base, sigma_bar).simulated
        f = fidelity_gaussian_zero_mean(apply_on_subsystem(base, psi, 1), apply_on_subsystem(sim, psi, 1)).fidelity
    lo, hi = fvdg_probability_interval(f)
    if required_tmsv_cutoff(n_s, floor) <= cutoff:
        c = probe_amplitudes(probe, cutoff)
        if base is None:
            a = sector_output(c, None, floor)
            b = sector_output(c, teleport_map(sigma_bar, cutoff), floor)
        else:
            ideal = channel_map(base, cutoff)
            tele = teleport_map(sigma_bar, cutoff)
            a = sector_output(c, ideal, floor)
            b = sector_output(c, tele.then(channel_map(base, tele.out_cutoff)), floor)
        t = trace_distance_sector(a, b)
        return RoundProbability(helstrom_probability(t), lo, hi, True, f)
    value = hi if claimant == Player.TELEPORTER else lo
    return RoundProbability(value, lo, hi, False, f)


def required_sigma_for_target(channel: GaussianChannel, target_p: float, tol: float = BISECTION_TOL) -> float:
    """Largest ``sigma_bar`` whose uniform bound does not exceed ``target_p``, by bisection.

    A target of 0 returns 0, which is the infimum and is never attained.

    Raises:
        UnsupportedChannelError: for the identity or other channels without a uniform bound.
    """
    if channel is None or channel.kind in ("identity", "teleportation", "unitary"):
        raise UnsupportedChannelError("the ideal channel has no uniform bound to invert")
    if not 0 <= target_p < 1:
        raise ValueError(f"target must lie in [0, 1), got {target_p}")
    if target_p == 0:
        return 0.0
    bound = lambda s: uniform_bound(channel, s).bound_value
    lo, hi = 0.0, 1.0
    while bound(hi) < target_p:
        hi *= 2
        if hi > 1e12:
            raise ArithmeticError("target not reachable")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bound(mid) <= target_p:
            lo = mid
        else:
            hi = mid
    return lo


def ideal_sigma_for_probability(n_s: float, target_probability: float) -> float:
    """Largest ``sigma_bar`` for which the conservative round probability on TMSV(``n_s``) is ``target_probability``.

    Inverts ``(1 + sqrt(1 - F)) / 2 = target`` with ``F = 1 / (sigma (1 + 2 N_S) + 1)``.
    """
    if not 0.5 < target_probability < 1:
        raise ValueError("target probability must lie in (1/2, 1)")
    f = 1 - (2 * target_probability - 1) ** 2
    return (1 / f - 1) / (1 + 2 * n_s)


# ------------------------------------------------------------------ config

@dataclass
class GameConfig:
    """Parameters of one game (or a batch of seeded games).

    ``distinguisher_strategy``: ``{"probe": "tmsv", "n_s_schedule": [...],
    "target_probability": p}``.  Moving first, the distinguisher commits to
    the largest photon number of its schedule; moving second, it picks the
    smallest scheduled value whose certified round probability exceeds
    ``target_probability`` (or the largest otherwise).

    ``teleporter_strategy``: ``{"rule": "fixed", "sigma_bar": s}``,
    ``{"rule": "target_probability", "target": p}`` (ideal variant) or
    ``{"rule": "uniform_bound", "target_p": e}`` (Gaussian variant).
    """

    variant: str
    reveal_order: str
    rounds: int = 10_000
    rng_seed: int = 0
    games: int = 1
    channel: Optional[dict] = None
    distinguisher_strategy: dict = field(default_factory=lambda: {"probe": "tmsv", "n_s_schedule": [1.0]})
    teleporter_strategy: dict = field(default_factory=lambda: {"rule": "fixed", "sigma_bar": 0.1})
    threshold: float = THRESHOLD
    cutoff: int = 60

    def __post_init__(self):
        try:
            self.variant = Variant(self.variant).value
            self.reveal_order = RevealOrder(self.reveal_order).value
        except ValueError as exc:
            raise GameConfigError(str(exc)) from None
        if self.threshold != THRESHOLD:
            raise GameConfigError("the win threshold is fixed at 3/4")
        if self.rounds < 1 or self.games < 1:
            raise GameConfigError("rounds and games must be positive")
        if self.variant == Variant.GAUSSIAN.value and self.channel is None:
            raise GameConfigError("the Gaussian variant needs a channel")
        if self.variant == Variant.IDEAL.value and self.channel is not None:
            raise GameConfigError("the ideal variant takes no channel")
        rule = self.teleporter_strategy.get("rule")
        allowed = {
            Variant.IDEAL.value: ("fixed", "target_probability"),
            Variant.GAUSSIAN.value: ("fixed", "uniform_bound"),
        }[self.variant]
        if rule not in allowed:
            raise GameConfigError(f"teleporter rule {rule!r} not available for {self.variant}; use one of {allowed}")
        sched = self.distinguisher_strategy.get("n_s_schedule")
        if not sched or any(float(x) < 0 for x in sched):
            raise GameConfigError("distinguisher needs a nonempty non-negative n_s_schedule")
        if rule == "target_probability" and self.reveal_order == RevealOrder.TELEPORTER_FIRST.value:
            raise GameConfigError("a teleporter moving first cannot target a probe it has not seen")

    @classmethod
    def from_dict(cls, doc: dict) -> "GameConfig":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise GameConfigError(f"unknown fields: {sorted(unknown)}")
        return cls(**doc)

    def channel_obj(self) -> Optional[GaussianChannel]:
        return channel_from_dict(self.channel) if self.channel else None

    def claimant(self) -> Player:
        if self.variant == Variant.GAUSSIAN.value or self.reveal_order == RevealOrder.DISTINGUISHER_FIRST.value:
            return Player.TELEPORTER
        return Player.DISTINGUISHER


@dataclass
class GameTranscript:
    coins: np.ndarray
    outcomes: np.ndarray
    matches: np.ndarray
    match_fraction: float
    winner: str
    per_round_success_prob: float
    sigma_bar: float
    n_s: float
    probability_exact: bool
    threshold: float = THRESHOLD
    seed_entropy: Optional[list] = None

    def to_dict(self, include_rounds: bool = True) -> dict:
        d = asdict(self)
        for key in ("coins", "outcomes", "matches"):
            d[key] = "".join(map(str, getattr(self, key).tolist())) if include_rounds else None
        return d


def verdict(matches, threshold: float = THRESHOLD) -> str:
    """Winner from the per-round match flags."""
    frac = float(np.mean(np.asarray(matches)))
    return Player.DISTINGUISHER.value if frac > threshold else Player.TELEPORTER.value


def choose_moves(config: GameConfig):
    """Resolve both players' choices.

    Returns:
        tuple: ``(sigma_bar, n_s, RoundProbability)``.
    """
    channel = config.channel_obj()
    claimant = config.claimant()
    dist = config.distinguisher_strategy
    tele = config.teleporter_strategy
    sched = sorted(float(x) for x in dist["n_s_schedule"])

    def probe(n):
        return {"kind": "tmsv", "n_s": n} if n > 0 else {"kind": "vacuum"}

    def teleporter_sigma(n_s):
        rule = tele["rule"]
        if rule == "fixed":
            return float(tele["sigma_bar"])
        if rule == "target_probability":
            return ideal_sigma_for_probability(n_s, float(tele["target"])) * (1 - 1e-6)
        return required_sigma_for_target(channel, float(tele["target_p"]))

    def prob(n_s, s):
        return round_success_probability(probe(n_s), channel, s, claimant, config.cutoff)

    if config.reveal_order == RevealOrder.DISTINGUISHER_FIRST.value:
        n_s = sched[-1]
        s = teleporter_sigma(n_s)
    else:
        s = teleporter_sigma(None)
        target = float(dist.get("target_probability", 1.0))
        n_s = sched[-1]
        for n in sched:
            if prob(n, s).value > target:
                n_s = n
                break
    return s, n_s, prob(n_s, s)


def play_game(config: GameConfig, seed=None) -> GameTranscript:
    """Play one seeded game.  ``seed`` may be an int or a ``SeedSequence``."""
    s, n_s, rp = choose_moves(config)
    return _play(config, s, n_s, rp, seed if seed is not None else config.rng_seed)


def _play(config, s, n_s, rp, seed) -> GameTranscript:
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(seq)
    coins = rng.integers(0, 2, size=config.rounds, dtype=np.int8)
    matches = (rng.random(config.rounds) < rp.value).astype(np.int8)
    outcomes = np.where(matches == 1, coins, 1 - coins).astype(np.int8)
    frac = float(matches.mean())
    return GameTranscript(
        coins, outcomes, matches, frac, verdict(matches, config.threshold), rp.value,
        float(s), float(n_s), rp.exact, config.threshold,
        list(np.atleast_1d(seq.entropy)) + list(seq.spawn_key),
    )


@dataclass
class GameSummary:
    games: int
    rounds: int
    sigma_bar: float
    n_s: float
    per_round_success_prob: float
    probability_exact: bool
    teleporter_wins: int
    distinguisher_wins: int
    teleporter_win_frequency: float
    distinguisher_win_frequency: float
    mean_match_fraction: float


def play_games(config: GameConfig, games: Optional[int] = None):
    """Play ``games`` games with independent streams spawned from ``config.rng_seed``.

    Returns:
        tuple: ``(summary, transcripts)``.
    """
    games = games or config.games
    s, n_s, rp = choose_moves(config)
    seqs = np.random.SeedSequence(config.rng_seed).spawn(games)
    transcripts = [_play(config, s, n_s, rp, q) for q in seqs]
    t_wins = sum(t.winner == Player.TELEPORTER.value for t in transcripts)
    summary = GameSummary(
        games, config.rounds, float(s), float(n_s), rp.value, rp.exact,
        t_wins, games - t_wins, t_wins / games, 1 - t_wins / games,
        float(np.mean([t.match_fraction for t in transcripts])),
    )
    return summary, transcripts


def transcripts_to_json(summary: GameSummary, transcripts, include_rounds: bool = True) -> str:
    doc = {"summary": asdict(summary), "games": [t.to_dict(include_rounds) for t in transcripts]}
    return json.dumps(doc, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not serialisable: {type(o)}")
