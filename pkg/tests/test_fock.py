import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import linalg, special, stats

from cvtele.channels import apply_on_subsystem, make_amplifier, make_thermal
from cvtele.fidelity import fidelity_gaussian_zero_mean
from cvtele.fock import (
    DENSE_DIM_LIMIT,
    FockState,
    TruncationError,
    apply_map,
    apply_teleport_channel_fock,
    basel_amplitudes,
    channel_map,
    choose_out_cutoff,
    diagonal_state,
    displacement_elements,
    entanglement_infidelity_teleport,
    fidelity_fock,
    fidelity_sector,
    identity_map,
    laguerre_table,
    make_basel_state,
    make_thermal_fock,
    make_tmsv_fock,
    phase_insensitive_map,
    pure_amplifier_map,
    pure_loss_map,
    sector_output,
    teleport_map,
    teleport_map_quadrature,
    thermal_populations,
    tmsv_amplitudes,
    trace_distance_fock,
    trace_distance_sector,
    vacuum_fock,
)
from cvtele.symplectic import make_tmsv_state
from cvtele.teleport import simulate


def annihilation(dim):
    return np.diag(np.sqrt(np.arange(1, dim)), 1)


def test_vacuum_fock():
    v = vacuum_fock(3)
    assert v.dims == (4,)
    assert_allclose(v.populations(), [1, 0, 0, 0])


def test_tmsv_amplitudes_are_geometric():
    c = tmsv_amplitudes(1.5, 200)
    assert_allclose(c ** 2, stats.geom.pmf(np.arange(1, 202), 1 / 2.5), rtol=1e-12)
    assert_allclose(tmsv_amplitudes(0.0, 3), [1, 0, 0, 0])


def test_truncation_weight_and_flag():
    st = make_tmsv_fock(5.0, 10)
    assert st.flagged
    assert_allclose(st.truncation_weight, 1 - (5 / 6) ** 11, rtol=1e-12)
    with pytest.raises(TruncationError):
        st.require_weight()
    assert not make_tmsv_fock(0.5, 60).flagged


def test_basel_weight():
    c = basel_amplitudes(1000)
    # tail of sum 1/n^2 is about 1/N
    assert_allclose(np.sum(c ** 2), 1 - 6 / np.pi ** 2 / 1000, atol=1e-6)
    assert make_basel_state(30, floor=0.9).dims == (31, 31)


def test_reduced_tmsv_is_thermal():
    red = make_tmsv_fock(0.7, 40).reduced([1])
    assert red.is_diagonal()
    assert_allclose(red.populations(), thermal_populations(0.7, 40) / thermal_populations(0.7, 40).sum())
    assert_allclose(red.mean_photon_number(), 0.7, atol=1e-6)


def test_fock_state_validation():
    with pytest.raises(ValueError):
        FockState(np.array([[1.0, 1.0], [0.0, 0.0]]), (2,))
    with pytest.raises(ValueError):
        FockState(np.eye(2), (2,))
    with pytest.raises(ValueError):
        FockState.from_matrix(np.zeros((2, 2)), (2,))
    with pytest.raises(ValueError):
        diagonal_state([0.5, -0.1])


def test_laguerre_table_matches_scipy():
    x = np.linspace(0, 30, 13)
    tab = laguerre_table(25, x)
    for n in (0, 1, 7, 25):
        assert_allclose(tab[n], special.eval_laguerre(n, x), rtol=1e-10, atol=1e-10)


def test_displacement_elements_match_matrix_exponential():
    dim = 80
    a = annihilation(dim)
    for r in (0.3, 1.1):
        D = linalg.expm(r * (a.T - a))
        el = displacement_elements(np.array(r), 8, 8)
        assert_allclose(el, D[:9, :9], atol=1e-12)


def test_pure_loss_map_is_binomial():
    fmap = pure_loss_map(0.3, 12)
    for n in (1, 5, 12):
        assert_allclose(fmap.block(0)[: n + 1, n], stats.binom.pmf(np.arange(n + 1), n, 0.3), atol=1e-13)
    assert_allclose(fmap.leakage(), 0, atol=1e-13)


def test_pure_amplifier_on_vacuum_is_thermal():
    fmap = pure_amplifier_map(1.8, 4, 200)
    assert_allclose(fmap.block(0)[:, 0], thermal_populations(0.8, 200), atol=1e-13)


def test_choose_out_cutoff_meets_tolerance():
    out = choose_out_cutoff(2.0, 10, 1e-12)
    fmap = pure_amplifier_map(2.0, 10, out)
    assert np.max(fmap.leakage()) <= 1e-12
    assert np.max(pure_amplifier_map(2.0, 10, out - 1).leakage()) > 1e-12


def test_teleport_map_on_vacuum_is_thermal():
    # additive noise sigma turns the vacuum into a thermal state with N = sigma
    fmap = teleport_map(0.5, 6)
    assert_allclose(fmap.block(0)[:, 0], thermal_populations(0.5, fmap.out_cutoff), atol=1e-12)


def test_teleport_quadrature_matches_decomposition():
    dec = teleport_map(0.3, 10)
    quad = teleport_map_quadrature(0.3, 10, dec.out_cutoff)
    assert_allclose(quad.W, dec.W, atol=1e-12)


def test_map_composition_matches_sequential_dense_application():
    loss, tele = pure_loss_map(0.6, 6), teleport_map(0.2, 6)
    both = loss.then(teleport_map(0.2, loss.out_cutoff))
    st = make_tmsv_fock(0.4, 6, floor=0.9)
    one = apply_map(st, both, 1)
    two = apply_map(apply_map(st, loss, 1), teleport_map(0.2, 6), 1)
    assert_allclose(one.matrix, two.matrix, atol=1e-12)
    assert tele.in_cutoff == 6


def test_phase_insensitive_thermal_channel_output_is_thermal():
    ch = make_thermal(0.4, 1.5)
    out = apply_map(make_thermal_fock(2.0, 60), channel_map(ch, 60))
    n_out = 0.4 * 2.0 + 0.6 * 1.5
    ref = make_thermal_fock(n_out, out.cutoff)
    assert_allclose(out.populations(), ref.populations(), atol=1e-8)


def test_phase_insensitive_map_is_read_only_and_cached():
    a = phase_insensitive_map(0.5, 1.0, 8)
    assert a is not None
    with pytest.raises(ValueError):
        a.W[0, 0, 0] = 1.0


def test_identity_map_leaves_state():
    st = make_tmsv_fock(0.3, 8, floor=0.9)
    assert_allclose(apply_map(st, identity_map(8), 1).matrix, st.matrix, atol=1e-15)


def test_dense_teleport_fidelity_matches_gaussian():
    n_s, s = 0.5, 0.4
    st = make_tmsv_fock(n_s, 25)
    out = apply_teleport_channel_fock(st, s, 1)
    assert_allclose(fidelity_fock(st.padded(out.dims), out), 1 / (s + 2 * s * n_s + 1), atol=1e-5)


@pytest.mark.parametrize("ch", [make_thermal(0.5, 0.5), make_amplifier(1.6, 0.2)])
def test_sector_fidelity_matches_gaussian_fidelity(ch):
    # both outputs mixed: sector fidelity against the multimode Gaussian formula
    s, n_s, cutoff = 0.3, 0.8, 60
    sim = simulate(ch, s).simulated
    c = tmsv_amplitudes(n_s, cutoff)
    a = sector_output(c, channel_map(ch, cutoff))
    b = sector_output(c, channel_map(sim, cutoff))
    psi = make_tmsv_state(n_s)
    ref = fidelity_gaussian_zero_mean(apply_on_subsystem(ch, psi, 1), apply_on_subsystem(sim, psi, 1)).fidelity
    assert_allclose(fidelity_sector(a, b), ref, atol=1e-6)


def test_sector_and_dense_agree():
    cutoff, s = 12, 0.5
    c = tmsv_amplitudes(1.0, cutoff)
    tmap = teleport_map(s, cutoff)
    a, b = sector_output(c, None), sector_output(c, tmap)
    dense_a = make_tmsv_fock(1.0, cutoff, floor=0.5)
    dense_b = apply_map(dense_a, tmap, 1)
    dims = dense_b.dims
    da = dense_a.padded(dims)
    assert_allclose(fidelity_sector(a, b), fidelity_fock(da, dense_b), atol=1e-10)
    assert_allclose(trace_distance_sector(a, b), trace_distance_fock(da, dense_b), atol=1e-10)
    assert_allclose(b.to_dense(tmap.out_cutoff).matrix, dense_b.matrix, atol=1e-12)


def test_trace_distance_of_orthogonal_states():
    a, b = diagonal_state([1.0, 0.0]), diagonal_state([0.0, 1.0])
    assert trace_distance_fock(a, b) == pytest.approx(1.0)
    assert fidelity_fock(a, b) == pytest.approx(0.0)


@pytest.mark.parametrize("n_s", [0.0, 1.0, 3.0])
@pytest.mark.parametrize("s", [1.0, 0.1, 0.01])
def test_entanglement_infidelity_closed_form(n_s, s):
    red = make_thermal_fock(n_s, 300)
    eps = entanglement_infidelity_teleport(red, s)
    assert_allclose(eps, 1 - 1 / (s * (2 * n_s + 1) + 1), atol=1e-8)


def test_entanglement_infidelity_rejects_offdiagonal():
    rho = np.full((2, 2), 0.5)
    with pytest.raises(ValueError):
        entanglement_infidelity_teleport(FockState.from_matrix(rho, (2,)), 0.1)


def test_dense_limit_enforced():
    st = make_tmsv_fock(0.5, 40, floor=0.9)
    with pytest.raises(MemoryError):
        apply_map(st, pure_amplifier_map(3.0, 40, 200), 1)
    assert DENSE_DIM_LIMIT > 0
