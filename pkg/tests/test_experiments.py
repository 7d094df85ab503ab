import csv
import io

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cvtele.experiments import (
    COLUMNS,
    SweepSpec,
    SweepValidationError,
    closed_form_infidelity,
    fock_serial_distance,
    fock_tensor_power_distance,
    gaussian_adaptive_distance,
    oracle_channel_distance,
    oracle_teleport_fidelity,
    probe_amplitudes,
    required_tmsv_cutoff,
    rows_to_csv,
    run_sweep,
    write_csv,
)
from cvtele.channels import make_amplifier, make_thermal
from cvtele.fock import TruncationError
from cvtele.teleport import uniform_bound

THERMAL = {"kind": "thermal", "params": {"eta": 0.5, "n_b": 0.5}}


def parse(text):
    lines = text.splitlines()
    assert lines[-1].startswith("# version=") and "config_sha256=" in lines[-1]
    return list(csv.DictReader(io.StringIO("\n".join(lines[:-1]))))


def test_spec_validation():
    with pytest.raises(SweepValidationError):
        SweepSpec("nonsense")
    with pytest.raises(SweepValidationError):
        SweepSpec("strong_fixed_state", sigma_grid=[0.1, 1.0])
    with pytest.raises(SweepValidationError):
        SweepSpec("strong_fixed_state", sigma_grid=[1.0, -0.1])
    with pytest.raises(SweepValidationError):
        SweepSpec("uniform_divergence", n_s_grid=[2.0, 1.0])
    with pytest.raises(SweepValidationError):
        SweepSpec("bound_vs_oracle")
    with pytest.raises(SweepValidationError):
        SweepSpec("adaptive_serial", channel=THERMAL, uses=4)
    with pytest.raises(SweepValidationError):
        SweepSpec("strong_fixed_state", state={"kind": "cat"})


def test_from_dict_rejects_unknown_fields():
    with pytest.raises(SweepValidationError, match="unknown"):
        SweepSpec.from_dict({"experiment": "strong_fixed_state", "sigmas": [1.0]})
    with pytest.raises(SweepValidationError, match="experiment"):
        SweepSpec.from_dict({"sigma_grid": [1.0]})


def test_config_hash_is_stable_and_sensitive():
    a = SweepSpec("strong_fixed_state", sigma_grid=[1.0, 0.1])
    b = SweepSpec.from_dict(a.to_dict())
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != SweepSpec("strong_fixed_state", sigma_grid=[1.0, 0.2]).config_hash()


def test_probe_amplitudes_and_cutoff():
    assert_allclose(probe_amplitudes({"kind": "vacuum"}, 3), [1, 0, 0, 0])
    n = required_tmsv_cutoff(1.0, 1 - 1e-6)
    # weight 1 - (1/2)^(n+1) must reach the floor
    assert 1 - 0.5 ** (n + 1) >= 1 - 1e-6 > 1 - 0.5 ** n


def test_strong_convergence_tmsv_matches_closed_form():
    spec = SweepSpec("strong_fixed_state", state={"kind": "tmsv", "n_s": 2.0}, sigma_grid=[1.0, 0.1, 0.01])
    rows = run_sweep(spec)
    for r in rows:
        assert_allclose(r.value, r.extra["closed_form"], atol=1e-8)


def test_strong_convergence_basel_monotone():
    spec = SweepSpec("strong_fixed_state", state={"kind": "basel"}, sigma_grid=[1.0, 0.1, 0.01, 0.001],
                     floor=0.999)
    eps = [r.value for r in run_sweep(spec)]
    assert np.all(np.diff(eps) < 0)
    assert eps[-1] < 0.02


def test_basel_default_floor_is_violated():
    spec = SweepSpec("strong_fixed_state", state={"kind": "basel"}, sigma_grid=[1.0], basel_cutoff=100)
    with pytest.raises(TruncationError, match="row 0"):
        run_sweep(spec)


def test_uniform_divergence_grows_to_one():
    spec = SweepSpec("uniform_divergence", sigma_grid=[0.1], n_s_grid=[0.0, 1.0, 2.0, 100.0, 1000.0])
    rows = run_sweep(spec)
    vals = [r.value for r in rows]
    assert np.all(np.diff(vals) > 0)
    assert_allclose(vals[-1], 1 - 1 / 201.1, rtol=1e-12)
    for r in rows[:3]:
        assert_allclose(r.oracle_value, r.value, atol=1e-4)
    assert rows[-1].oracle_value is None


def test_closed_form_infidelity():
    assert_allclose(closed_form_infidelity({"kind": "tmsv", "n_s": 1.0}, 0.5), 1 - 1 / 2.5)
    assert closed_form_infidelity({"kind": "basel"}, 0.5) is None


def test_oracle_teleport_fidelity_closed_form():
    f, w = oracle_teleport_fidelity({"kind": "tmsv", "n_s": 1.0}, 0.5, 60)
    assert_allclose(f, 0.4, atol=1e-6)
    assert w > 1 - 1e-6


def test_oracle_channel_distance_below_bound():
    ch = make_amplifier(2.0, 0.0)
    for probe in ({"kind": "vacuum"}, {"kind": "tmsv", "n_s": 1.0}):
        p, _ = oracle_channel_distance(ch, 0.1, probe, 60)
        assert p <= uniform_bound(ch, 0.1).bound_value


def test_tensor_power_identity_oracle_agrees():
    spec = SweepSpec("tensor_power", state={"kind": "tmsv", "n_s": 0.1}, sigma_grid=[0.5, 0.1], cutoff=14)
    rows = run_sweep(spec)
    for r in rows:
        assert r.oracle_value is not None
        assert_allclose(r.oracle_value, r.value, atol=1e-5)
        assert r.value <= r.bound_value + 1e-12


def test_tensor_power_channel_rows_respect_bound():
    spec = SweepSpec("tensor_power", state={"kind": "tmsv", "n_s": 0.2}, sigma_grid=[0.3, 0.1], channel=THERMAL,
                     cutoff=14)
    for r in run_sweep(spec):
        assert r.value <= r.bound_value
        assert_allclose(r.oracle_value, r.value, atol=1e-5)


def test_fock_tensor_power_distance_zero_at_tiny_sigma():
    p, _ = fock_tensor_power_distance(make_thermal(0.5, 0.0), 1e-8, {"kind": "vacuum"}, 0)
    assert p < 1e-3


def test_adaptive_serial_rows():
    spec = SweepSpec("adaptive_serial", channel=THERMAL, sigma_grid=[0.3, 0.03], uses=3, instances=4, seed=7)
    rows = run_sweep(spec)
    assert len(rows) == 8
    for r in rows:
        assert 0 < r.value <= r.bound_value


def test_gaussian_adaptive_distance_deterministic():
    a = gaussian_adaptive_distance(make_thermal(0.5, 0.5), 0.1, 2, 2, np.random.default_rng(1))
    b = gaussian_adaptive_distance(make_thermal(0.5, 0.5), 0.1, 2, 2, np.random.default_rng(1))
    assert a == b


def test_fock_serial_distance_below_two_uses():
    ch = make_thermal(0.5, 0.0)
    p, w = fock_serial_distance(ch, 0.2, {"kind": "tmsv", "n_s": 0.5}, 12)
    assert 0 < p <= 2 * uniform_bound(ch, 0.2).bound_value
    assert w > 1 - 1e-3


def test_bound_vs_oracle_rows():
    spec = SweepSpec("bound_vs_oracle", channel=THERMAL, sigma_grid=[0.3, 0.1],
                     probes=[{"kind": "vacuum"}, {"kind": "tmsv", "n_s": 1.0}])
    rows = run_sweep(spec)
    assert len(rows) == 4
    for r in rows:
        assert r.oracle_value <= r.bound_value + 1e-4


def test_csv_format_and_round_trip(tmp_path):
    spec = SweepSpec("strong_fixed_state", state={"kind": "tmsv", "n_s": 1.0}, sigma_grid=[1.0, 0.1])
    rows = run_sweep(spec)
    text = rows_to_csv(spec, rows)
    recs = parse(text)
    assert list(recs[0]) == COLUMNS["strong_fixed_state"]
    for rec, row in zip(recs, rows):
        assert float(rec["infidelity"]) == row.value
    assert spec.config_hash() in text.splitlines()[-1]
    path = tmp_path / "out.csv"
    write_csv(text, path)
    assert path.read_text() == text


def test_threads_do_not_change_output(monkeypatch):
    spec = SweepSpec("adaptive_serial", channel=THERMAL, sigma_grid=[0.3, 0.1], instances=3, seed=2)
    one = rows_to_csv(spec, run_sweep(spec, threads=1))
    four = rows_to_csv(spec, run_sweep(spec, threads=4))
    assert one == four
    monkeypatch.setenv("GT_DETERMINISTIC", "1")
    assert rows_to_csv(spec, run_sweep(spec, threads=4)) == one
