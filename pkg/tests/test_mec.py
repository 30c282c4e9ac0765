import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aerial_mec import mec
from aerial_mec.mec import ComputeParams, CostWeights, EnergyLedger, PropulsionParams, UserTaskState

CP = ComputeParams()


def test_local_step_peak_frequency():
    bits, energy = mec.local_step(0.1e9, CP)
    assert bits == pytest.approx(50_000)
    assert energy == pytest.approx(5e-5, rel=1e-12)
    assert mec.local_step(0.0, CP) == (0.0, 0.0)


def test_local_step_cubic_law():
    b1, e1 = mec.local_step(0.03e9, CP)
    b2, e2 = mec.local_step(0.06e9, CP)
    assert b2 == pytest.approx(2 * b1)
    assert e2 == pytest.approx(8 * e1)


def test_local_step_rejects_out_of_range():
    with pytest.raises(ValueError):
        mec.local_step(0.2e9, CP)
    with pytest.raises(ValueError):
        mec.local_step(-1.0, CP)


def test_offload_gate():
    assert mec.offload_step(10e6, 0.1, CP, 0.9e6)[0] == pytest.approx(5e6)
    bits, energy = mec.offload_step(0.5e6, 0.1, CP, 0.9e6)
    assert bits == 0.0 and energy == pytest.approx(0.05)
    assert mec.offload_step(10e6, 0.0, CP, 0.9e6)[1] == 0.0
    assert mec.offload_step(10e6, 0.1, CP, 0.9e6, airtime=0.2)[1] == pytest.approx(0.01)


def test_server_load_examples():
    f, total, energy, ok = mec.server_load([5e5], CP)
    assert f[0] == pytest.approx(1e9) and total == pytest.approx(1e9)
    assert energy == pytest.approx(0.05, rel=1e-12)
    assert ok
    _, total, energy, ok = mec.server_load([0.0, 0.0], CP)
    assert (total, energy, ok) == (0.0, 0.0, True)
    # 21 GHz of demand against a 20 GHz server
    assert not mec.server_load([10.5e6], CP)[3]


def test_server_energy_cubic():
    e1 = mec.server_load([1e5], CP)[2]
    e2 = mec.server_load([2e5], CP)[2]
    assert e2 == pytest.approx(8 * e1)


def _propulsion_oracle(v, P0=79.86, Pi=88.63, U=120.0, v0=4.03, d0=0.6, rho=1.225, s=0.05, A=0.503):
    blade = P0 * (1 + 3 * v * v / (U * U))
    induced = Pi * math.sqrt(math.sqrt(1 + v ** 4 / (4 * v0 ** 4)) - v * v / (2 * v0 * v0))
    parasite = 0.5 * d0 * rho * s * A * v ** 3
    return blade + induced + parasite


def test_propulsion_hover_and_grid():
    assert mec.propulsion_power(0.0) == pytest.approx(168.49, abs=1e-12)
    assert mec.propulsion_power(10.0) == pytest.approx(126.0336867737, rel=1e-9)
    for v in np.linspace(0, 20, 41):
        assert mec.propulsion_power(v) == pytest.approx(_propulsion_oracle(v), rel=1e-9)
    with pytest.raises(ValueError):
        mec.propulsion_power(-1.0)


def test_energy_ledger():
    ledger = EnergyLedger(20000.0)
    slots = 0
    while not ledger.exhausted:
        ledger = mec.energy_update(ledger, 100.0, 0.0)
        slots += 1
    assert slots == 200
    same = mec.energy_update(EnergyLedger(), 0.0, 0.0)
    assert same == EnergyLedger()
    with pytest.raises(ValueError):
        mec.energy_update(EnergyLedger(), -1.0, 0.0)


def test_data_update():
    task = UserTaskState(100e6)
    assert mec.data_update(task, 0.05e6, 0.05e6).remaining_bits == pytest.approx(99.9e6)
    assert mec.data_update(UserTaskState(10.0), 20.0, 0.0).remaining_bits == 0.0


@given(st.floats(0, 1e8), st.floats(0, 1e6), st.floats(0, 1e6))
def test_data_update_non_increasing(rem, a, b):
    out = mec.data_update(UserTaskState(rem), a, b)
    assert 0.0 <= out.remaining_bits <= rem


def test_episode_cost():
    assert mec.episode_cost(100.0, 200.0, CostWeights(), 5) == pytest.approx(30.0)
    assert mec.episode_cost(100.0, 200.0, CostWeights(0.0, 1.0), 5) == pytest.approx(40.0)


@given(st.floats(0, 1), st.floats(0, 1e4), st.floats(0, 1e4))
def test_cost_interpolates_between_pure_costs(w, e, t):
    pure_e = mec.episode_cost(e, t, CostWeights(1.0, 0.0), 5)
    pure_t = mec.episode_cost(e, t, CostWeights(0.0, 1.0), 5)
    mixed = mec.episode_cost(e, t, CostWeights(w, 1.0 - w), 5)
    assert mixed == pytest.approx(w * pure_e + (1 - w) * pure_t, rel=1e-12, abs=1e-12)


def test_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        CostWeights(0.5, 0.6)


def test_local_only_cost_table_values():
    out = mec.local_only_cost(100e6, CP, CostWeights(), 5)
    assert out["delay_per_user_s"] == pytest.approx(1000.0)
    assert out["energy_per_user_j"] == pytest.approx(0.1)
    assert out["average_cost"] == pytest.approx(0.5 * 0.1 + 0.5 * 1000.0)
    assert out["energy_cost"] + out["delay_cost"] == pytest.approx(out["average_cost"])


def test_param_validation():
    with pytest.raises(ValueError):
        ComputeParams(slot_s=0.0)
    with pytest.raises(ValueError):
        PropulsionParams(tip_speed_mps=-1.0)
    with pytest.raises(ValueError):
        UserTaskState(-1.0)
