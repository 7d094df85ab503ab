import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from cvtele.channels import (
    GaussianChannel,
    InvalidChannelError,
    UnsupportedChannelError,
    apply,
    apply_on_subsystem,
    channel_from_dict,
    channel_to_dict,
    check_displacement_covariance,
    compose,
    dilate,
    embed,
    identity_channel,
    make_additive_noise,
    make_amplifier,
    make_pure_amplifier,
    make_pure_loss,
    make_thermal,
    output_is_physical,
    symplectic_channel,
    teleportation_channel,
    tensor,
)
from cvtele.symplectic import (
    make_tmsv_state,
    random_gaussian_state,
    random_symplectic,
    thermal_state,
    vacuum_state,
)


def test_thermal_channel_on_vacuum_gives_thermal_output():
    out = apply(make_thermal(0.3, 2.0), vacuum_state())
    # eta * 1 + (1 - eta)(2 N + 1)
    assert_allclose(out.cov, (0.3 + 0.7 * 5) * np.eye(2))


def test_amplifier_on_vacuum():
    out = apply(make_amplifier(2.0, 0.5), vacuum_state())
    assert_allclose(out.cov, (2 + 1 * 2) * np.eye(2))


def test_teleportation_channel_adds_noise():
    ch = teleportation_channel(0.25)
    assert_allclose(ch.X, np.eye(2))
    assert_allclose(ch.Y, 0.5 * np.eye(2))


def test_constructors_validate_parameters():
    with pytest.raises(ValueError):
        make_thermal(1.0, 0.0)
    with pytest.raises(ValueError):
        make_thermal(0.5, -1.0)
    with pytest.raises(ValueError):
        make_amplifier(1.0, 0.0)
    with pytest.raises(ValueError):
        make_additive_noise(0.0)


def test_non_cp_channel_is_rejected():
    # amplification without added noise violates complete positivity
    bad = GaussianChannel(np.sqrt(2) * np.eye(2), np.zeros((2, 2)))
    assert not bad.is_valid()
    with pytest.raises(InvalidChannelError):
        bad.check()
    with pytest.raises(InvalidChannelError):
        apply(bad, vacuum_state())


@pytest.mark.parametrize("ch", [make_thermal(0.4, 1.0), make_pure_loss(0.9), make_amplifier(3.0, 0.2),
                                make_pure_amplifier(1.5), make_additive_noise(0.3), identity_channel()])
def test_named_channels_are_cp(ch):
    assert ch.is_valid()
    assert ch.cp_min_eigenvalue() >= -1e-12


def test_compose_matches_sequential_application():
    rng = np.random.default_rng(0)
    f, g = make_thermal(0.6, 0.4), make_amplifier(1.7, 0.1)
    for _ in range(10):
        state = random_gaussian_state(1, rng, zero_mean=False)
        one = apply(compose(g, f), state)
        two = apply(g, apply(f, state))
        assert_allclose(one.cov, two.cov, atol=1e-12)
        assert_allclose(one.mean, two.mean, atol=1e-12)


def test_compose_is_associative():
    a, b, c = make_thermal(0.2, 1.0), make_amplifier(2.5, 0.3), teleportation_channel(0.1)
    left, right = compose(a, compose(b, c)), compose(compose(a, b), c)
    assert left.same_action(right)


def test_compose_rejects_mode_mismatch():
    with pytest.raises(ValueError):
        compose(make_thermal(0.5, 0.0), identity_channel(2))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.0, 3.0), st.floats(1e-3, 2.0))
def test_thermal_teleport_composition_stays_thermal(eta, n_b, s):
    comp = compose(make_thermal(eta, n_b), teleportation_channel(s))
    ref = make_thermal(eta, n_b + eta * s / (1 - eta))
    assert comp.same_action(ref, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.05, 6.0), st.floats(0.0, 3.0), st.floats(1e-3, 2.0))
def test_amplifier_teleport_composition_stays_amplifier(gain, n_b, s):
    comp = compose(make_amplifier(gain, n_b), teleportation_channel(s))
    ref = make_amplifier(gain, n_b + gain * s / (gain - 1))
    assert comp.same_action(ref, atol=1e-11)


def test_apply_on_subsystem_of_tmsv():
    psi = make_tmsv_state(1.0)
    out = apply_on_subsystem(make_pure_loss(0.5), psi, 1)
    # reference mode untouched
    assert_allclose(out.reduced([0]).cov, thermal_state(1.0).cov)
    assert_allclose(out.reduced([1]).cov, (0.5 * 3 + 0.5) * np.eye(2))
    assert output_is_physical(make_pure_loss(0.5), vacuum_state())


def test_embed_rejects_bad_targets():
    with pytest.raises(ValueError):
        embed(make_thermal(0.5, 0.0), 2, [0, 1])
    with pytest.raises(IndexError):
        embed(make_thermal(0.5, 0.0), 2, [2])


def test_tensor_acts_independently():
    ch = tensor(make_thermal(0.5, 0.0), make_amplifier(2.0, 0.0))
    out = apply(ch, vacuum_state(2))
    assert_allclose(np.diag(out.cov), [1, 3, 1, 3])


def test_displacement_covariance_residual():
    rng = np.random.default_rng(5)
    for ch in [make_thermal(0.3, 1.0), make_amplifier(2.0, 0.5)]:
        state = random_gaussian_state(1, rng)
        assert check_displacement_covariance(ch, rng.normal(size=2), state) < 1e-12


def test_symplectic_channel_acts_as_unitary():
    rng = np.random.default_rng(2)
    S = random_symplectic(2, rng)
    state = random_gaussian_state(2, rng)
    assert_allclose(apply(symplectic_channel(S), state).cov, state.transformed(S).cov, atol=1e-12)
    with pytest.raises(InvalidChannelError):
        symplectic_channel(2 * np.eye(4))


@pytest.mark.parametrize("ch", [make_thermal(0.3, 0.7), make_amplifier(2.2, 0.4),
                                tensor(make_pure_loss(0.6), make_amplifier(1.5, 1.0))])
def test_dilation_reproduces_channel(ch):
    dil = dilate(ch)
    assert dil.channel().same_action(ch, atol=1e-12)
    rng = np.random.default_rng(1)
    state = random_gaussian_state(ch.modes, rng)
    assert_allclose(dil.output(state).cov, apply(ch, state).cov, atol=1e-12)


def test_dilation_unsupported():
    with pytest.raises(UnsupportedChannelError):
        dilate(make_additive_noise(1.0))


def test_dict_round_trip():
    for ch in [make_thermal(0.3, 0.7), tensor(make_pure_loss(0.6), make_additive_noise(0.2))]:
        back = channel_from_dict(channel_to_dict(ch))
        assert back.same_action(ch)
        assert back.kind == ch.kind
    with pytest.raises(UnsupportedChannelError):
        channel_from_dict({"kind": "squeezing"})
