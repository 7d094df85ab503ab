import json

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from cvtele.channels import make_amplifier, make_thermal
from cvtele.telegame import (
    THRESHOLD,
    GameConfig,
    GameConfigError,
    Player,
    fvdg_probability_interval,
    helstrom_probability,
    ideal_sigma_for_probability,
    play_game,
    play_games,
    required_sigma_for_target,
    round_success_probability,
    transcripts_to_json,
    verdict,
)
from cvtele.teleport import uniform_bound
from cvtele.verify import GAME_FIXTURES

TMSV1 = {"kind": "tmsv", "n_s": 1.0}


def fixture(name, **over):
    cfg, expected = GAME_FIXTURES[name]
    return GameConfig(**dict(cfg, **over)), expected


def test_helstrom_probability():
    assert helstrom_probability(0.0) == 0.5
    assert helstrom_probability(1.0) == 1.0


def test_fvdg_interval_for_fidelity_0_4():
    lo, hi = fvdg_probability_interval(0.4)
    assert_allclose([lo, hi], [0.5 * (2 - np.sqrt(0.4)), 0.5 * (1 + np.sqrt(0.6))])
    assert_allclose([lo, hi], [0.683772, 0.887298], atol=1e-6)


@pytest.mark.xfail(strict=True, reason="quoted interval halves the trace-distance bounds twice; "
                                       "correct endpoints are 0.683772 and 0.887298")
def test_fvdg_interval_quoted_digits():
    assert_allclose(fvdg_probability_interval(0.4), [0.5919, 0.6936], atol=1e-4)


def test_exact_round_probability_inside_interval():
    rp = round_success_probability(TMSV1, None, 0.5)
    assert rp.exact
    assert_allclose(rp.fidelity, 0.4, atol=1e-12)
    assert rp.lower <= rp.value <= rp.upper
    assert_allclose(rp.value, 0.80999, atol=1e-4)


def test_round_probability_falls_back_to_claimant_endpoint():
    probe = {"kind": "tmsv", "n_s": 1000.0}
    t = round_success_probability(probe, None, 0.1, Player.TELEPORTER)
    d = round_success_probability(probe, None, 0.1, Player.DISTINGUISHER)
    assert not t.exact and not d.exact
    assert t.value == t.upper and d.value == d.lower


def test_gaussian_round_probability_matches_covariance_fidelity():
    ch = make_thermal(0.5, 0.0)
    rp = round_success_probability(TMSV1, ch, 0.2)
    assert rp.exact
    assert rp.lower - 1e-9 <= rp.value <= rp.upper + 1e-9


def test_required_sigma_hits_target():
    for ch in (make_thermal(0.5, 0.0), make_amplifier(2.0, 0.0)):
        s = required_sigma_for_target(ch, 0.035)
        assert_allclose(uniform_bound(ch, s).bound_value, 0.035, atol=1e-8)


def test_ideal_sigma_for_probability():
    s = ideal_sigma_for_probability(10.0, 0.7)
    f = 1 / (s + 20 * s + 1)
    assert_allclose(fvdg_probability_interval(f)[1], 0.7, atol=1e-12)


def test_round_probability_rejects_unknown_probe():
    with pytest.raises(GameConfigError):
        round_success_probability({"kind": "cat"}, None, 0.1)


def test_verdict_threshold():
    assert THRESHOLD == 0.75
    assert verdict(np.array([1, 1, 1, 0])) == "teleporter"  # exactly 3/4 is not above
    assert verdict(np.array([1, 1, 1, 1, 0])) == "distinguisher"


def test_config_validation():
    with pytest.raises(GameConfigError):
        GameConfig("ideal_channel", "distinguisher_first", threshold=0.8)
    with pytest.raises(GameConfigError):
        GameConfig("gaussian_channel", "distinguisher_first")
    with pytest.raises(GameConfigError):
        GameConfig("ideal_channel", "teleporter_first",
                   teleporter_strategy={"rule": "target_probability", "target": 0.7})
    with pytest.raises(GameConfigError):
        GameConfig("sideways", "teleporter_first")
    with pytest.raises(GameConfigError):
        GameConfig.from_dict({"variant": "ideal_channel", "reveal_order": "teleporter_first", "turns": 3})


def test_claimant_rule():
    assert fixture("ideal_distinguisher_first")[0].claimant() is Player.TELEPORTER
    assert fixture("ideal_teleporter_first")[0].claimant() is Player.DISTINGUISHER
    assert fixture("gaussian_teleporter_first")[0].claimant() is Player.TELEPORTER


@pytest.mark.parametrize("name", list(GAME_FIXTURES))
def test_fixture_verdicts(name):
    config, expected = fixture(name, rounds=10_000, games=100, rng_seed=99)
    summary, transcripts = play_games(config)
    wins = summary.teleporter_wins if expected == "teleporter" else summary.distinguisher_wins
    assert wins / 100 > 0.999
    # binomial margin: p is far enough from 3/4 that 10^4 rounds decide the game
    p = summary.per_round_success_prob
    if expected == "teleporter":
        assert stats.binom.sf(7500, 10_000, p) < 1e-6
    else:
        assert stats.binom.cdf(7500, 10_000, p) < 1e-6


def test_teleporter_first_ideal_probability_above_0_85():
    config, _ = fixture("ideal_teleporter_first")
    summary, _ = play_games(config, games=1)
    assert summary.per_round_success_prob > 0.85


def test_gaussian_fixture_probability_below_0_52():
    for name in ("gaussian_distinguisher_first", "gaussian_teleporter_first"):
        summary, _ = play_games(fixture(name)[0], games=1)
        assert summary.per_round_success_prob < 0.52


@pytest.mark.xfail(strict=True, reason="a uniform bound just under 0.05 certifies only Pr <= (1 + 0.05)/2 = 0.525")
def test_gaussian_bound_0_05_implies_probability_below_0_52():
    ch = make_thermal(0.5, 0.0)
    s = required_sigma_for_target(ch, 0.0499)
    rp = round_success_probability({"kind": "tmsv", "n_s": 1e6}, ch, s, Player.TELEPORTER)
    assert rp.value < 0.52


def test_same_seed_same_transcript():
    config, _ = fixture("ideal_distinguisher_first", rounds=500)
    a, b = play_game(config, 5), play_game(config, 5)
    assert np.array_equal(a.coins, b.coins) and np.array_equal(a.outcomes, b.outcomes)
    c = play_game(config, 6)
    assert not np.array_equal(a.coins, c.coins)


def test_transcript_consistency():
    config, _ = fixture("ideal_distinguisher_first", rounds=2000)
    t = play_game(config)
    assert np.array_equal(t.matches, (t.coins == t.outcomes).astype(np.int8))
    assert t.match_fraction == pytest.approx(t.matches.mean())


def test_json_output_is_deterministic():
    config, _ = fixture("gaussian_distinguisher_first", rounds=200, games=3)
    one = transcripts_to_json(*play_games(config))
    two = transcripts_to_json(*play_games(config))
    assert one == two
    doc = json.loads(one)
    assert doc["summary"]["games"] == 3 and len(doc["games"]) == 3
