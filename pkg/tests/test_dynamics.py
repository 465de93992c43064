import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from airshipsim.dynamics import (
    UNLIMITED_ENDURANCE,
    ActuatorCommand,
    AirshipParams,
    PowerState,
    VehicleTrueState,
    derive_geometry,
    endurance_estimate,
    power_draw,
    step_dynamics,
)
from airshipsim.errors import ConfigurationError
from airshipsim.quat import quat_from_yaw


@pytest.fixture(scope="module")
def params():
    return AirshipParams()


def run_open_loop(params, throttle, seconds, wind=(0.0, 0.0, 0.0), state=None):
    s = state or VehicleTrueState.at_rest((0.0, 0.0, 50.0))
    cmd = ActuatorCommand(throttle, throttle, 0.0, 0.0)
    w = np.asarray(wind, dtype=float)
    dt = 0.002
    for _ in range(int(seconds / dt)):
        s, diag = step_dynamics(params, s, cmd, w, dt)
    return s, diag


class TestGeometry:
    def test_prototype_hull(self):
        hull = derive_geometry(5.5, 3.6)
        assert hull.semi_major == pytest.approx(2.75)
        # independent check: (4/3) pi a b^2 must reproduce the volume
        assert (4.0 / 3.0) * math.pi * hull.semi_major * hull.semi_minor**2 == pytest.approx(3.6)
        assert hull.semi_minor == pytest.approx(0.559, abs=1e-3)
        assert hull.fineness_ratio == pytest.approx(5.5 / (2 * 0.5590512), abs=1e-3)

    def test_constructed_inverse(self):
        vol = (4.0 / 3.0) * math.pi * 1.0 * 0.5**2
        hull = derive_geometry(2.0, vol)
        assert hull.semi_minor == pytest.approx(0.5, abs=1e-12)

    def test_nonphysical_hull_rejected(self):
        with pytest.raises(ConfigurationError):
            derive_geometry(20.0, 3.6)  # fineness > 10
        with pytest.raises(ConfigurationError):
            derive_geometry(1.0, 3.6)  # fineness < 2

    def test_lighter_than_air_rejected(self):
        with pytest.raises(ConfigurationError):
            AirshipParams(ballast_mass=0.0, payload_mass=0.5)


class TestStepDynamics:
    def test_heavier_than_air_sinks(self, params):
        s, _ = run_open_loop(params, 0.0, 5.0)
        assert s.velocity[2] < 0.0

    def test_full_cap_airspeed_matches_field_measurement(self, params):
        s, _ = run_open_loop(params, 0.8, 40.0)
        assert s.airspeed == pytest.approx(11.0, abs=0.5)

    def test_half_cap_airspeed(self, params):
        s, _ = run_open_loop(params, 0.4, 40.0)
        assert s.airspeed == pytest.approx(6.0, abs=0.5)

    def test_uniform_wind_frame_equivalence(self, params):
        """Galilean oracle: stepping in uniform wind w equals stepping in calm
        air with the initial velocity shifted by -w, positions apart by w*t."""
        wind = np.array([3.0, -2.0, 0.5])
        dt, seconds = 0.002, 10.0
        n = int(seconds / dt)
        sa = VehicleTrueState.at_rest((0.0, 0.0, 50.0), yaw=0.7)
        sb = VehicleTrueState(
            position=sa.position.copy(),
            velocity=sa.velocity - wind,
            attitude=sa.attitude.copy(),
            body_rates=sa.body_rates.copy(),
        )
        cmd = ActuatorCommand(0.6, 0.6, 0.1, -0.05)
        calm = np.zeros(3)
        for _ in range(n):
            sa, _ = step_dynamics(params, sa, cmd, wind, dt)
            sb, _ = step_dynamics(params, sb, cmd, calm, dt)
        t = n * dt
        scale = max(1.0, float(np.linalg.norm(sa.position)))
        assert np.allclose(sa.position, sb.position + wind * t, atol=1e-6 * scale)
        assert np.allclose(sa.velocity, sb.velocity + wind, atol=1e-6)
        assert np.allclose(sa.attitude, sb.attitude, atol=1e-9)

    def test_quaternion_norm_preserved(self, params):
        s = VehicleTrueState.at_rest((0, 0, 50))
        cmd = ActuatorCommand(0.7, 0.5, 0.3, 0.2)
        wind = np.array([2.0, 1.0, 0.0])
        for _ in range(20_000):
            s, _ = step_dynamics(params, s, cmd, wind, 0.002)
            n = np.linalg.norm(s.attitude)
            assert abs(n - 1.0) < 1e-9

    def test_trim_map_monotone(self, params):
        speeds = [run_open_loop(params, t, 40.0)[0].airspeed for t in (0.1, 0.3, 0.5, 0.8)]
        assert all(b > a for a, b in zip(speeds, speeds[1:]))

    def test_dt_bounds(self, params):
        s = VehicleTrueState.at_rest()
        with pytest.raises(ValueError):
            step_dynamics(params, s, ActuatorCommand(), np.zeros(3), 0.06)
        with pytest.raises(ValueError):
            step_dynamics(params, s, ActuatorCommand(), np.zeros(3), 0.0)

    def test_throttle_cap_enforced(self, params):
        s = VehicleTrueState.at_rest((0, 0, 50))
        capped, _ = run_open_loop(params, 1.0, 40.0)
        at_cap, _ = run_open_loop(params, 0.8, 40.0)
        assert capped.airspeed == pytest.approx(at_cap.airspeed, abs=1e-6)

    def test_yaw_rudder_turns_left(self, params):
        s, _ = run_open_loop(params, 0.5, 20.0)
        cmd = ActuatorCommand(0.5, 0.5, 0.5, 0.0)
        for _ in range(int(5 / 0.002)):
            s, _ = step_dynamics(params, s, cmd, np.zeros(3), 0.002)
        assert s.body_rates[2] > 0.02  # positive yaw rate = CCW = left


class TestPower:
    def test_paper_operating_points(self, params):
        assert power_draw(params, 0.8, 11.0) == pytest.approx(333.0, rel=0.10)
        assert power_draw(params, 0.4, 6.0) == pytest.approx(100.0, rel=0.15)

    def test_zero_throttle_is_avionics_baseline(self, params):
        assert power_draw(params, 0.0, 0.0) == params.power_avionics
        assert params.power_avionics > 0

    def test_current_matches_measured_peak(self, params):
        current = power_draw(params, 0.8, 11.0) / params.battery_voltage
        assert current == pytest.approx(23.0, rel=0.05)

    def test_energy_monotonic(self, params):
        ps = PowerState(params.battery_capacity_ah, params.battery_voltage)
        last = 0.0
        for throttle in (0.0, 0.5, 0.2, 0.8, 0.0):
            ps.update(power_draw(params, throttle), 1.0)
            assert ps.energy_used_wh >= last
            last = ps.energy_used_wh
        assert ps.current_draw >= params.power_avionics / params.battery_voltage - 1e-9


class TestEndurance:
    def test_constant_23a(self):
        assert endurance_estimate([23.0] * 10, 10.0) == pytest.approx(26.1, abs=0.5)

    def test_steady_cruise_8ms(self, params):
        throttle = params.trim_throttle(8.0)
        current = power_draw(params, throttle, 8.0) / params.battery_voltage
        minutes = endurance_estimate([current], params.battery_capacity_ah)
        assert minutes == pytest.approx(50.0, abs=5.0)

    def test_zero_current_unlimited(self):
        assert endurance_estimate([0.0, 0.0], 10.0) == UNLIMITED_ENDURANCE

    def test_empty_history_rejected(self):
        with pytest.raises(ValueError):
            endurance_estimate([], 10.0)


@given(
    throttle=st.floats(0.0, 1.0),
    yaw=st.floats(-1.0, 1.0),
    pitch=st.floats(-1.0, 1.0),
)
@settings(max_examples=25, deadline=None)
def test_actuator_clamp_is_idempotent(throttle, yaw, pitch):
    cmd = ActuatorCommand(throttle, throttle, yaw, pitch).clamped(0.8)
    again = cmd.clamped(0.8)
    assert cmd == again
    assert 0.0 <= cmd.throttle_left <= 0.8
    assert -1.0 <= cmd.rudder_yaw <= 1.0
