"""6-DOF rigid-body airship dynamics with an electrical power model.

The plant is a prolate-spheroid hull with Lamb added-mass factors, axis-wise
quadratic drag (axial entry grows linearly with speed to capture excrescence
flutter drag at high airspeed), tail-fin weathervane restoring moments,
pendulum stability from the low gondola, rudder control moments scaled by
dynamic pressure, and twin pull propellers with thrust proportional to
throttle squared.

Thrust, drag and electrical power coefficients are solved from two measured
operating points (throttle, airspeed, electrical watts) so the shipped
defaults reproduce the prototype's field calibration:
    0.8 throttle -> 11 m/s, 333 W;   0.4 throttle -> 6 m/s, 100 W.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, IntegrationFault
from .quat import (
    quat_identity,
    quat_integrate,
    quat_normalize,
    quat_rotate,
    quat_rotate_inverse,
)

GRAVITY = 9.81
RHO_AIR = 1.225
RHO_HELIUM = 0.1786

#: Sentinel returned by endurance_estimate when mean current is zero.
UNLIMITED_ENDURANCE = math.inf


# ---------------------------------------------------------------------------
# geometry and mass budget


@dataclass
class HullGeometry:
    """Prolate-spheroid equivalent hull."""

    length: float
    volume: float
    semi_major: float
    semi_minor: float
    fineness_ratio: float
    ref_area_frontal: float


def derive_geometry(length: float, volume: float) -> HullGeometry:
    """Solve the prolate spheroid matching a hull length and volume.

    Raises ConfigurationError when the implied fineness ratio leaves [2, 10]
    (a nonphysical hull for this vehicle class).
    """
    if length <= 0 or volume <= 0:
        raise ConfigurationError(
            "hull length and volume must be positive", ["length", "volume"]
        )
    a = 0.5 * length
    b = math.sqrt(volume / ((4.0 / 3.0) * math.pi * a))
    fineness = length / (2.0 * b)
    if not 2.0 <= fineness <= 10.0:
        raise ConfigurationError(
            f"fineness ratio {fineness:.2f} outside [2, 10]", ["length", "volume"]
        )
    return HullGeometry(
        length=length,
        volume=volume,
        semi_major=a,
        semi_minor=b,
        fineness_ratio=fineness,
        ref_area_frontal=math.pi * b * b,
    )


@dataclass
class MassBudget:
    envelope_mass: float
    fin_mass_each: float
    n_fins: int
    payload_mass: float
    battery_mass: float
    ballast_mass: float
    lift_gas_mass: float
    total_mass: float
    net_heaviness: float


def lamb_k_factors(fineness_ratio: float) -> tuple[float, float, float]:
    """Added-mass factors (axial k1, transverse k2, rotational k') for a
    prolate spheroid of the given fineness ratio."""
    ab = 1.0 / fineness_ratio  # b/a
    e = math.sqrt(max(1e-12, 1.0 - ab * ab))
    log_term = math.log((1.0 + e) / (1.0 - e))
    alpha0 = 2.0 * (1.0 - e * e) / e**3 * (0.5 * log_term - e)
    beta0 = 1.0 / (e * e) - (1.0 - e * e) / (2.0 * e**3) * log_term
    k1 = alpha0 / (2.0 - alpha0)
    k2 = beta0 / (2.0 - beta0)
    num = e**4 * (beta0 - alpha0)
    den = (2.0 - e * e) * (2.0 * e * e - (2.0 - e * e) * (beta0 - alpha0))
    k_rot = num / den
    return k1, k2, k_rot


# ---------------------------------------------------------------------------
# vehicle parameters


@dataclass
class AirshipParams:
    """Physical and calibration parameters of one airship.

    Defaults mirror the 5.5 m / 3.6 m^3 prototype. Calibration inputs are the
    two measured (throttle, airspeed, electrical power) operating points; all
    force/power coefficients are derived in __post_init__.
    """

    hull_length: float = 5.5
    hull_volume: float = 3.6
    envelope_mass: float = 0.430
    fin_mass_each: float = 0.200
    n_fins: int = 3
    payload_mass: float = 1.800
    battery_mass: float = 0.735
    ballast_mass: float = 0.500

    rho_air: float = RHO_AIR
    rho_gas: float = RHO_HELIUM
    gravity: float = GRAVITY

    throttle_cap: float = 0.8
    # calibration operating points (throttle, steady airspeed m/s, electrical W)
    calib_hi: tuple[float, float, float] = (0.8, 11.0, 333.0)
    calib_lo: tuple[float, float, float] = (0.4, 6.0, 100.0)
    prop_efficiency: float = 0.45

    battery_capacity_ah: float = 10.0
    battery_voltage: float = 14.5

    # placement (body frame, z up): gondola lump under the hull, props on it
    gondola_z: float = -0.66
    prop_y_arm: float = 0.35
    prop_z: float = -0.66

    # aerodynamic moment / crossflow coefficients (m^3, m^4, N m s, m^2)
    fin_restore_coeff: float = 0.55
    rot_damp_coeff: tuple[float, float, float] = (0.4, 1.6, 1.6)
    rot_damp_floor: float = 0.3
    rudder_pitch_coeff: float = 0.50
    rudder_yaw_coeff: float = 0.50
    crossflow_drag_area: float = 3.9
    # depth of the axial-drag resultant: gondola/attachment drag below the
    # hull axis partly balances the low thrust line
    axial_drag_z: float = -0.45

    hull: HullGeometry = field(init=False)
    masses: MassBudget = field(init=False)

    def __post_init__(self):
        self.hull = derive_geometry(self.hull_length, self.hull_volume)
        gas = self.rho_gas * self.hull_volume
        parts = (
            self.envelope_mass
            + self.n_fins * self.fin_mass_each
            + self.payload_mass
            + self.battery_mass
            + self.ballast_mass
            + gas
        )
        displaced = self.rho_air * self.hull_volume
        heaviness = parts - displaced
        if heaviness < 0:
            raise ConfigurationError(
                "vehicle is lighter than air; add ballast", ["ballast_mass"]
            )
        if heaviness > 0.10 * parts:
            raise ConfigurationError(
                f"net heaviness {heaviness:.3f} kg exceeds 10% of total mass",
                ["ballast_mass", "payload_mass"],
            )
        self.masses = MassBudget(
            envelope_mass=self.envelope_mass,
            fin_mass_each=self.fin_mass_each,
            n_fins=self.n_fins,
            payload_mass=self.payload_mass,
            battery_mass=self.battery_mass,
            ballast_mass=self.ballast_mass,
            lift_gas_mass=gas,
            total_mass=parts,
            net_heaviness=heaviness,
        )
        self._derive_inertia()
        self._calibrate()

    def _derive_inertia(self):
        a, b = self.hull.semi_major, self.hull.semi_minor
        m_env = self.envelope_mass
        m_gas = self.masses.lift_gas_mass
        m_fins = self.n_fins * self.fin_mass_each
        m_gondola = self.payload_mass + self.battery_mass + self.ballast_mass
        x_fin = -0.85 * a
        # spheroid shell (envelope) + solid (gas) + point lumps
        ixx = (2.0 / 3.0) * m_env * b * b + 0.4 * m_gas * b * b
        ixx += m_fins * b * b + m_gondola * self.gondola_z**2
        iyy = (1.0 / 3.0) * m_env * (a * a + b * b) + 0.2 * m_gas * (a * a + b * b)
        iyy += m_fins * x_fin * x_fin + m_gondola * self.gondola_z**2
        izz = (1.0 / 3.0) * m_env * (a * a + b * b) + 0.2 * m_gas * (a * a + b * b)
        izz += m_fins * x_fin * x_fin

        k1, k2, k_rot = lamb_k_factors(self.hull.fineness_ratio)
        m_air = self.rho_air * self.hull_volume
        i_fluid = 0.2 * m_air * (a * a + b * b)
        m = self.masses.total_mass
        self.mass_eff = np.array([m + k1 * m_air, m + k2 * m_air, m + k2 * m_air])
        self.inertia_eff = np.array(
            [ixx, iyy + k_rot * i_fluid, izz + k_rot * i_fluid]
        )
        self.cg_z = m_gondola * self.gondola_z / m

    def _calibrate(self):
        """Solve power, thrust and axial-drag coefficients from the two
        measured operating points."""
        d1, v1, p1 = self.calib_hi
        d2, v2, p2 = self.calib_lo
        self.power_quad = (p1 - p2) / (d1 * d1 - d2 * d2)
        self.power_avionics = p1 - self.power_quad * d1 * d1
        # thrust from shaft power at the high point, T proportional to throttle^2
        thrust_hi = self.prop_efficiency * (p1 - self.power_avionics) / v1
        self.thrust_coeff = thrust_hi / (d1 * d1)
        thrust_lo = self.thrust_coeff * d2 * d2
        # drag D(v) = q v^2 + c3 v^3 through both points
        det = v1 * v1 * v2 * v2 * v2 - v2 * v2 * v1 * v1 * v1
        c3 = (thrust_lo * v1 * v1 - thrust_hi * v2 * v2) / det
        q = (thrust_hi - c3 * v1**3) / (v1 * v1)
        if c3 < 0 or q <= 0:  # degenerate calibration inputs: keep pure quadratic
            c3 = 0.0
            q = thrust_hi / (v1 * v1)
        self.axial_drag_area = 2.0 * q / self.rho_air
        self.flutter_per_speed = c3 / q if q > 0 else 0.0

    def steady_thrust(self, throttle: float) -> float:
        return self.thrust_coeff * throttle * throttle

    def axial_drag(self, v: float) -> float:
        q = 0.5 * self.rho_air * self.axial_drag_area
        return q * (1.0 + self.flutter_per_speed * v) * v * v

    def steady_airspeed(self, throttle: float) -> float:
        """Airspeed where axial drag balances thrust (bisection)."""
        thrust = self.steady_thrust(throttle)
        lo, hi = 0.0, 30.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self.axial_drag(mid) < thrust:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def trim_throttle(self, airspeed: float) -> float:
        """Throttle whose steady thrust balances drag at the given airspeed."""
        thrust = self.axial_drag(airspeed)
        return min(self.throttle_cap, math.sqrt(max(0.0, thrust / self.thrust_coeff)))


# ---------------------------------------------------------------------------
# state, commands, power


@dataclass
class VehicleTrueState:
    """Ground-truth rigid-body state (world ENU / body FLU frames)."""

    position: np.ndarray
    velocity: np.ndarray
    attitude: np.ndarray  # unit quaternion body->world
    body_rates: np.ndarray
    airspeed: float = 0.0

    @classmethod
    def at_rest(cls, position=(0.0, 0.0, 0.0), yaw: float = 0.0) -> "VehicleTrueState":
        from .quat import quat_from_yaw

        return cls(
            position=np.asarray(position, dtype=float).copy(),
            velocity=np.zeros(3),
            attitude=quat_from_yaw(yaw) if yaw else quat_identity(),
            body_rates=np.zeros(3),
        )


@dataclass
class ActuatorCommand:
    throttle_left: float = 0.0
    throttle_right: float = 0.0
    rudder_yaw: float = 0.0
    rudder_pitch: float = 0.0

    def clamped(self, throttle_cap: float) -> "ActuatorCommand":
        return ActuatorCommand(
            throttle_left=min(throttle_cap, max(0.0, self.throttle_left)),
            throttle_right=min(throttle_cap, max(0.0, self.throttle_right)),
            rudder_yaw=min(1.0, max(-1.0, self.rudder_yaw)),
            rudder_pitch=min(1.0, max(-1.0, self.rudder_pitch)),
        )


@dataclass
class PowerState:
    battery_capacity_ah: float = 10.0
    battery_voltage: float = 14.5
    current_draw: float = 0.0
    energy_used_wh: float = 0.0

    def update(self, power_w: float, dt: float):
        self.current_draw = power_w / self.battery_voltage
        self.energy_used_wh += power_w * dt / 3600.0


@dataclass
class StepDiagnostics:
    accel_world: np.ndarray
    specific_force_body: np.ndarray  # what an ideal accelerometer reads
    airspeed: float
    angle_of_attack: float
    sideslip: float
    thrust: float
    dynamic_pressure: float


# ---------------------------------------------------------------------------
# operations


def step_dynamics(
    params: AirshipParams,
    state: VehicleTrueState,
    cmd: ActuatorCommand,
    wind: np.ndarray,
    dt: float,
) -> tuple[VehicleTrueState, StepDiagnostics]:
    """Semi-implicit Euler step of the rigid-body dynamics.

    Forces: net buoyancy-minus-weight on world z, twin-prop thrust along body
    x, axis-wise quadratic drag against the air-relative velocity. Moments:
    fin weathervane restoring, rate damping, pendulum (CG below the buoyancy
    center), rudder deflections, differential thrust.
    """
    if not 0.0 < dt <= 0.05:
        raise ValueError(f"dt {dt} outside (0, 0.05]")
    cmd = cmd.clamped(params.throttle_cap)
    q = state.attitude
    v_air_world = state.velocity - wind
    u = quat_rotate_inverse(q, v_air_world)  # air-relative velocity, body frame
    ux, uy, uz = u
    v_mag = math.sqrt(ux * ux + uy * uy + uz * uz)
    qdyn = 0.5 * params.rho_air * v_mag * v_mag

    t_left = 0.5 * params.thrust_coeff * cmd.throttle_left**2
    t_right = 0.5 * params.thrust_coeff * cmd.throttle_right**2
    thrust = t_left + t_right

    half_rho_v = 0.5 * params.rho_air * v_mag
    cda_x = params.axial_drag_area * (1.0 + params.flutter_per_speed * v_mag)
    cda_c = params.crossflow_drag_area
    drag_x = -half_rho_v * cda_x * ux
    fx = thrust + drag_x
    fy = -half_rho_v * cda_c * uy
    fz = -half_rho_v * cda_c * uz

    # net buoyancy - weight acts on world z; rotate into body for the
    # per-axis effective-mass division
    g_net = -params.masses.net_heaviness * params.gravity
    bw_body = quat_rotate_inverse(q, (0.0, 0.0, g_net))
    fx += bw_body[0]
    fy += bw_body[1]
    fz += bw_body[2]

    # moments about the buoyancy center (body origin)
    wx, wy, wz = state.body_rates
    mx, my, mz = 0.0, 0.0, 0.0
    # fin weathervane: torque along x_hat x u_hat scaled by dynamic pressure
    k_fin = params.fin_restore_coeff * half_rho_v
    my += -k_fin * uz
    mz += k_fin * uy
    # rate damping
    dx, dy, dz = params.rot_damp_coeff
    damp = half_rho_v
    floor = params.rot_damp_floor
    mx -= (dx * damp + floor) * wx
    my -= (dy * damp + floor) * wy
    mz -= (dz * damp + floor) * wz
    # pendulum: weight at CG (below origin)
    w_body = quat_rotate_inverse(q, (0.0, 0.0, -params.masses.total_mass * params.gravity))
    mx += params.cg_z * (-w_body[1])
    my += params.cg_z * w_body[0]
    # rudders
    my += -params.rudder_pitch_coeff * qdyn * cmd.rudder_pitch
    mz += params.rudder_yaw_coeff * qdyn * cmd.rudder_yaw
    # thrust offsets: differential yaw, line-of-thrust pitch, and the
    # low-slung axial-drag resultant opposing it
    mz += params.prop_y_arm * (t_right - t_left)
    my += params.prop_z * thrust
    my += params.axial_drag_z * drag_x

    ix, iy, iz = params.inertia_eff
    # Euler's equations with diagonal inertia
    dwx = (mx - (iz - iy) * wy * wz) / ix
    dwy = (my - (ix - iz) * wz * wx) / iy
    dwz = (mz - (iy - ix) * wx * wy) / iz

    new_rates = np.array([wx + dt * dwx, wy + dt * dwy, wz + dt * dwz])
    new_q = quat_integrate(q, new_rates, dt)

    mex, mey, mez = params.mass_eff
    a_body = (fx / mex, fy / mey, fz / mez)
    accel_world = quat_rotate(q, a_body)
    g_body = quat_rotate_inverse(q, (0.0, 0.0, params.gravity))
    specific_force = np.array(
        [a_body[0] + g_body[0], a_body[1] + g_body[1], a_body[2] + g_body[2]]
    )
    new_v = state.velocity + dt * accel_world
    new_p = state.position + dt * new_v

    airspeed = max(0.0, ux)
    aoa = math.atan2(-uz, ux) if v_mag > 1e-6 else 0.0
    sideslip = math.asin(max(-1.0, min(1.0, uy / v_mag))) if v_mag > 1e-6 else 0.0

    if not (
        math.isfinite(new_p[0])
        and math.isfinite(new_p[1])
        and math.isfinite(new_p[2])
        and math.isfinite(new_v[0])
        and math.isfinite(new_v[1])
        and math.isfinite(new_v[2])
        and math.isfinite(new_q[0])
    ):
        raise IntegrationFault(
            "non-finite state after dynamics step",
            record={
                "position": [float(x) for x in new_p],
                "velocity": [float(x) for x in new_v],
                "dt": dt,
            },
        )

    new_state = VehicleTrueState(
        position=new_p,
        velocity=new_v,
        attitude=new_q,
        body_rates=new_rates,
        airspeed=airspeed,
    )
    diag = StepDiagnostics(
        accel_world=accel_world,
        specific_force_body=specific_force,
        airspeed=airspeed,
        angle_of_attack=aoa,
        sideslip=sideslip,
        thrust=thrust,
        dynamic_pressure=qdyn,
    )
    return new_state, diag


def power_draw(params: AirshipParams, throttle: float, airspeed: float = 0.0) -> float:
    """Electrical power in watts at a throttle setting.

    Quadratic in throttle; airspeed is accepted for interface symmetry (the
    calibration couples it to throttle through the steady-state trim map).
    """
    t = min(params.throttle_cap, max(0.0, throttle))
    return params.power_avionics + params.power_quad * t * t


def endurance_estimate(currents_a, battery_capacity_ah: float) -> float:
    """Remaining-endurance estimate in minutes from a current-draw history.

    capacity / mean current; returns UNLIMITED_ENDURANCE (inf) when the mean
    current is zero.
    """
    samples = list(currents_a)
    if not samples:
        raise ValueError("empty current history")
    if battery_capacity_ah <= 0:
        raise ValueError("battery capacity must be positive")
    mean = sum(samples) / len(samples)
    if mean <= 0:
        return UNLIMITED_ENDURANCE
    return battery_capacity_ah / mean * 60.0
