import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bilat.dynamics import RobotParams
from bilat.sysid import (ExcitationSchedule, IdentificationError,
                         IdentificationResult, excite_and_record,
                         identify, identify_from_signals)

SLAVE = RobotParams(J=[2.71e-3, 3.08e-3, 1.07e-3], D=12.0e-3,
                    g_c=[106e-3, 96.3e-3, 85.1e-3])
MASTER = RobotParams(J=[2.92e-3, 3.44e-3, 1.05e-3], D=6.87e-3,
                     g_c=[124e-3, 81.6e-3, 81.6e-3])


def _synthetic_signals(params, n=4000, dt=1e-3, seed=0):
    """Exact trajectories + exact derivatives; torque from the model."""
    rng = np.random.default_rng(seed)
    t = np.arange(n) * dt
    theta = np.zeros((n, 3))
    omega = np.zeros((n, 3))
    acc = np.zeros((n, 3))
    for j in range(3):
        for amp, f in zip(rng.uniform(0.2, 0.5, 3), (0.3, 0.7, 1.3)):
            w = 2 * math.pi * f
            theta[:, j] += amp * np.sin(w * t)
            omega[:, j] += amp * w * np.cos(w * t)
            acc[:, j] -= amp * w * w * np.sin(w * t)
    tau = np.empty((n, 3))
    tau[:, 0] = params.J[0] * acc[:, 0] + params.D * omega[:, 0]
    tau[:, 1] = (params.J[1] * acc[:, 1]
                 + params.g_c[0] * np.cos(theta[:, 1])
                 + params.g_c[1] * np.sin(theta[:, 2]))
    tau[:, 2] = params.J[2] * acc[:, 2] + params.g_c[2] * np.sin(theta[:, 2])
    return tau, theta, omega, acc


def test_exact_recovery_on_perfect_signals():
    tau, theta, omega, acc = _synthetic_signals(SLAVE)
    res = identify_from_signals(tau, theta, omega, acc)
    assert np.all(np.abs(res.params_hat.J / SLAVE.J - 1) < 1e-9)
    assert np.all(np.abs(res.params_hat.g_c / SLAVE.g_c - 1) < 1e-9)
    assert abs(res.params_hat.D / SLAVE.D - 1) < 1e-9
    assert np.all(res.residual_rms < 1e-6)


def test_master_fixture_recovery():
    tau, theta, omega, acc = _synthetic_signals(MASTER, seed=3)
    res = identify_from_signals(tau, theta, omega, acc)
    assert res.params_hat.J[0] == pytest.approx(2.92e-3, rel=1e-9)
    assert res.params_hat.g_c[0] == pytest.approx(0.124, rel=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.2, 5.0))
def test_scale_consistency(k):
    """Scaling torques and inertial parameters by k scales the estimate by k."""
    tau, theta, omega, acc = _synthetic_signals(SLAVE, n=2000)
    base = identify_from_signals(tau, theta, omega, acc)
    scaled = identify_from_signals(k * tau, theta, omega, acc)
    assert np.allclose(scaled.params_hat.J, k * base.params_hat.J, rtol=1e-9)
    assert np.allclose(scaled.params_hat.g_c, k * base.params_hat.g_c,
                       rtol=1e-9)
    assert scaled.params_hat.D == pytest.approx(k * base.params_hat.D,
                                                rel=1e-9)


def test_zero_amplitude_rejected():
    with pytest.raises(IdentificationError, match="unexcited|rank"):
        excite_and_record(SLAVE,
                          ExcitationSchedule(amplitudes=(0.0, 0.0, 0.0)),
                          seed=1)


def test_unexcited_signals_rank_deficient():
    n = 1000
    still = np.zeros((n, 3))
    with pytest.raises(IdentificationError, match="rank deficient"):
        identify_from_signals(still, still, still, still)


def test_short_log_rejected():
    log = excite_and_record(SLAVE, ExcitationSchedule(duration=2.0), seed=1)
    with pytest.raises(IdentificationError, match="too short"):
        identify(log)


def test_simulated_excitation_recovery():
    """Shorter-than-acceptance run: still inside the 2%/5% envelope."""
    log = excite_and_record(SLAVE, ExcitationSchedule(duration=12.0), seed=5)
    res = identify(log)
    assert np.all(np.abs(res.params_hat.J / SLAVE.J - 1) < 0.02)
    assert np.all(np.abs(res.params_hat.g_c / SLAVE.g_c - 1) < 0.02)
    assert abs(res.params_hat.D / SLAVE.D - 1) < 0.05
    assert all(c < 1e3 for c in res.condition_numbers)


def test_config_fragment_units():
    tau, theta, omega, acc = _synthetic_signals(SLAVE, n=2000)
    frag = identify_from_signals(tau, theta, omega, acc).to_config_fragment()
    assert frag["J_mkgm2"][0] == pytest.approx(2.71, rel=1e-6)
    assert frag["g_c_mNm"][2] == pytest.approx(85.1, rel=1e-6)
    assert frag["D_mkgm2s"] == pytest.approx(12.0, rel=1e-6)


def test_result_requires_finite_residuals():
    with pytest.raises(ValueError):
        IdentificationResult(SLAVE, np.array([np.nan, 0, 0]), (1, 1, 1))
