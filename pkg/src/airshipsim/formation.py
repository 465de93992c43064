"""Wind estimation and model-predictive formation planning.

The planner optimizes per-vehicle setpoint horizons (airspeed, turn-rate,
climb-rate) over a kinematic unicycle-with-climb plant displaced by the wind
estimate. The cost keeps the tracked subject centered in each starboard
camera, holds the standoff ring where the depressed boresight meets the
ground, spreads vehicles to equal angular gaps about the subject, and
penalizes collision / subject-overflight / sky-box proximity. The solver is
fixed-iteration projected gradient descent with analytic adjoint gradients,
a backtracking line search (cost never increases), and a one-step-shifted
warm start.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# wind estimation


@dataclass
class WindEstimate:
    vector: np.ndarray = field(default_factory=lambda: np.zeros(2))
    confidence: float = 0.0
    time_constant: float = 5.0


class WindEstimator:
    """Groundspeed-minus-airspeed wind estimate, gated during turns."""

    def __init__(self, time_constant: float = 5.0, turn_rate_gate: float = 0.2):
        self.tau = time_constant
        self.gate = turn_rate_gate
        self.estimate = WindEstimate(time_constant=time_constant)
        self._accepted_time = 0.0

    def update(self, ground_velocity, airspeed: float, heading: float,
               turn_rate: float, dt: float) -> WindEstimate:
        if abs(turn_rate) > self.gate:
            return self.estimate
        inst = np.array(
            [
                ground_velocity[0] - airspeed * math.cos(heading),
                ground_velocity[1] - airspeed * math.sin(heading),
            ]
        )
        alpha = 1.0 - math.exp(-dt / self.tau)
        self.estimate.vector = self.estimate.vector + alpha * (inst - self.estimate.vector)
        self._accepted_time += dt
        self.estimate.confidence = 1.0 - math.exp(-self._accepted_time / self.tau)
        return self.estimate


def instantaneous_wind(ground_velocity, airspeed: float, heading: float) -> np.ndarray:
    return np.array(
        [
            ground_velocity[0] - airspeed * math.cos(heading),
            ground_velocity[1] - airspeed * math.sin(heading),
        ]
    )


# ---------------------------------------------------------------------------
# configuration and plan containers


@dataclass
class MpcConfig:
    horizon: int = 20
    step_dt: float = 0.5
    w_cam: float = 100.0
    w_sep: float = 10.0
    w_dist: float = 0.03
    w_u: float = 0.05
    p_collision: float = 10.0
    p_subject: float = 10.0
    p_box: float = 10.0
    standoff_alt: float = 30.0
    cam_depression_deg: float = 30.0
    d_vehicle: float = 20.0
    r_subject_min: float = 15.0
    v_min: float = 4.0
    v_max: float = 11.0
    turn_rate_max: float = 0.25
    climb_rate_max: float = 1.0
    iterations: int = 50
    u_scales: tuple[float, float, float] = (1.0, 0.08, 0.4)

    @property
    def standoff_radius(self) -> float:
        return self.standoff_alt / math.tan(math.radians(self.cam_depression_deg))


@dataclass
class FormationPlan:
    controls: np.ndarray          # (n, N, 3): airspeed, turn_rate, climb_rate
    trajectories: np.ndarray      # (n, N+1, 4): x, y, z, heading
    total_cost: float
    breakdown: dict[str, float]
    residuals: dict[str, float]
    iterations: int
    degraded: bool = False
    created_at: float = 0.0

    def control_at(self, vehicle: int, elapsed: float, step_dt: float) -> np.ndarray:
        k = min(self.controls.shape[1] - 1, max(0, int(elapsed / step_dt)))
        return self.controls[vehicle, k]


# ---------------------------------------------------------------------------
# rollout


def rollout(states: np.ndarray, controls: np.ndarray, wind, cfg: MpcConfig) -> np.ndarray:
    """Forward-simulate the kinematic plant.

    states: (n, 4) -> x, y, z, heading; controls: (n, N, 3);
    returns (n, N+1, 4) including the initial state.
    """
    n, N, _ = controls.shape
    dt = cfg.step_dt
    v, om, cl = controls[:, :, 0], controls[:, :, 1], controls[:, :, 2]
    psi = np.empty((n, N + 1))
    psi[:, 0] = states[:, 3]
    psi[:, 1:] = states[:, 3:4] + dt * np.cumsum(om, axis=1)
    # displacement over step k uses the heading at the start of the step
    cos_p, sin_p = np.cos(psi[:, :-1]), np.sin(psi[:, :-1])
    x = np.empty((n, N + 1))
    y = np.empty((n, N + 1))
    z = np.empty((n, N + 1))
    x[:, 0], y[:, 0], z[:, 0] = states[:, 0], states[:, 1], states[:, 2]
    x[:, 1:] = states[:, 0:1] + dt * np.cumsum(v * cos_p + wind[0], axis=1)
    y[:, 1:] = states[:, 1:2] + dt * np.cumsum(v * sin_p + wind[1], axis=1)
    z[:, 1:] = states[:, 2:3] + dt * np.cumsum(cl, axis=1)
    return np.stack([x, y, z, psi], axis=2)


# ---------------------------------------------------------------------------
# cost, gradients


class _CostWork:
    """Cost evaluation with optional adjoint gradient accumulation."""

    def __init__(self, cfg: MpcConfig, subject_xy: np.ndarray, box=None):
        self.cfg = cfg
        self.subject_xy = subject_xy  # (N, 2) predicted subject positions (t=1..N)
        self.box = box  # (lo, hi, margin) or None
        dep = math.radians(cfg.cam_depression_deg)
        self.cos_dep = math.cos(dep)
        self.sin_dep = math.sin(dep)

    def evaluate(self, traj: np.ndarray, controls: np.ndarray, u_prev: np.ndarray,
                 want_grad: bool):
        """Returns (total, breakdown, residuals, grad_controls or None)."""
        cfg = self.cfg
        n, Np1, _ = traj.shape
        N = Np1 - 1
        dt = cfg.step_dt
        x, y, z, psi = traj[:, 1:, 0], traj[:, 1:, 1], traj[:, 1:, 2], traj[:, 1:, 3]
        sx, sy = self.subject_xy[:, 0], self.subject_xy[:, 1]

        gx = np.zeros((n, N))
        gy = np.zeros((n, N))
        gz = np.zeros((n, N))
        gp = np.zeros((n, N))

        # --- camera centering: chord^2 between boresight and line of sight
        dxs, dys, dzs = sx - x, sy - y, -z
        r = np.sqrt(dxs * dxs + dys * dys + dzs * dzs)
        r = np.maximum(r, 1e-6)
        lx, ly, lz = dxs / r, dys / r, dzs / r
        bx = self.cos_dep * np.sin(psi)
        by = -self.cos_dep * np.cos(psi)
        bz = -self.sin_dep
        dot = bx * lx + by * ly + bz * lz
        cam = cfg.w_cam * np.sum(2.0 - 2.0 * dot)
        if want_grad:
            c = -2.0 * cfg.w_cam
            # d dot / d psi
            gp += c * (lx * self.cos_dep * np.cos(psi) + ly * self.cos_dep * np.sin(psi))
            # d dot / d position: (l (l.b) - b)/r applied to (dl/dp = d/dp)
            fx = (lx * dot - bx) / r
            fy = (ly * dot - by) / r
            fz = (lz * dot - bz) / r
            # p enters l through (s - p): dl/dx = -(...), chain sign folds in
            gx += c * fx
            gy += c * fy
            gz += c * fz

        # --- standoff ring
        dh = np.sqrt(dxs * dxs + dys * dys)
        dh = np.maximum(dh, 1e-6)
        derr = dh - cfg.standoff_radius
        dist = cfg.w_dist * np.sum(derr * derr)
        if want_grad:
            k = 2.0 * cfg.w_dist * derr / dh
            gx += k * (-dxs)
            gy += k * (-dys)

        # --- equal angular separation about the subject
        sep = 0.0
        if n >= 2:
            theta = np.arctan2(y - sy, x - sx)  # (n, N)
            order = np.argsort(theta, axis=0, kind="stable")
            ts = np.take_along_axis(theta, order, axis=0)
            gaps = np.diff(ts, axis=0)
            wrap = ts[0] + TWO_PI - ts[-1]
            gaps = np.vstack([gaps, wrap[None, :]])  # (n, N) circular gaps
            gerr = gaps - TWO_PI / n
            sep = cfg.w_sep * np.sum(gerr * gerr)
            if want_grad:
                # d gap_k / d theta_sigma(k+1) = +1, / d theta_sigma(k) = -1
                gtheta_sorted = np.zeros_like(ts)
                gtheta_sorted += 2.0 * cfg.w_sep * (np.roll(gerr, 1, axis=0) - gerr)
                gtheta = np.zeros_like(theta)
                np.put_along_axis(gtheta, order, gtheta_sorted, axis=0)
                d2 = dh * dh
                gx += gtheta * (-(y - sy) / d2)
                gy += gtheta * ((x - sx) / d2)

        # --- smoothness on control increments
        su = np.asarray(cfg.u_scales)
        du = np.diff(np.concatenate([u_prev[:, None, :], controls], axis=1), axis=1)
        dun = du / su
        smooth = cfg.w_u * float(np.sum(dun * dun))
        gu_direct = np.zeros_like(controls)
        if want_grad:
            term = 2.0 * cfg.w_u * dun / su
            gu_direct += term
            gu_direct[:, :-1, :] -= term[:, 1:, :]

        # --- collision penalty (pairs, 3-D distance)
        coll = 0.0
        max_coll_violation = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                ddx = x[i] - x[j]
                ddy = y[i] - y[j]
                ddz = z[i] - z[j]
                dij = np.sqrt(ddx * ddx + ddy * ddy + ddz * ddz)
                dij = np.maximum(dij, 1e-6)
                h = np.maximum(0.0, cfg.d_vehicle - dij)
                coll += cfg.p_collision * float(np.sum(h * h))
                if h.max() > max_coll_violation:
                    max_coll_violation = float(h.max())
                if want_grad and h.any():
                    k = -2.0 * cfg.p_collision * h / dij
                    gx[i] += k * ddx
                    gy[i] += k * ddy
                    gz[i] += k * ddz
                    gx[j] -= k * ddx
                    gy[j] -= k * ddy
                    gz[j] -= k * ddz

        # --- no-overflight standoff floor (horizontal)
        hs = np.maximum(0.0, cfg.r_subject_min - dh)
        subj = cfg.p_subject * float(np.sum(hs * hs))
        if want_grad and hs.any():
            k = 2.0 * cfg.p_subject * hs / dh
            gx += k * dxs
            gy += k * dys

        # --- sky-box proximity
        box_cost = 0.0
        max_box_violation = 0.0
        if self.box is not None:
            lo, hi, margin = self.box
            for axis, (coord, g) in enumerate(((x, gx), (y, gy), (z, gz))):
                hlo = np.maximum(0.0, (lo[axis] + margin) - coord)
                hhi = np.maximum(0.0, coord - (hi[axis] - margin))
                box_cost += cfg.p_box * float(np.sum(hlo * hlo + hhi * hhi))
                viol = max(float(hlo.max(initial=0.0)), float(hhi.max(initial=0.0)))
                max_box_violation = max(max_box_violation, viol)
                if want_grad:
                    g += 2.0 * cfg.p_box * (hhi - hlo)

        breakdown = {
            "camera": float(cam),
            "separation": float(sep),
            "standoff": float(dist),
            "smoothness": float(smooth),
            "collision": float(coll),
            "subject_clearance": float(subj),
            "skybox": float(box_cost),
        }
        total = float(sum(breakdown.values()))
        residuals = {
            "collision_m": max_coll_violation,
            "subject_clearance_m": float(hs.max(initial=0.0)),
            "skybox_m": max_box_violation,
            "airspeed_bounds": 0.0,  # enforced by projection, reported anyway
        }
        if not want_grad:
            return total, breakdown, residuals, None

        # --- adjoint back-propagation through the rollout
        dt_ = self.cfg.step_dt
        v = controls[:, :, 0]
        psi_full = np.concatenate([traj[:, 0:1, 3], psi], axis=1)  # (n, N+1)
        lam_x = np.zeros((n, N + 1))
        lam_y = np.zeros((n, N + 1))
        lam_z = np.zeros((n, N + 1))
        lam_p = np.zeros((n, N + 1))
        # reverse cumulative sums: lam_t = g_t + lam_{t+1}
        lam_x[:, 1:] = np.cumsum(gx[:, ::-1], axis=1)[:, ::-1]
        lam_y[:, 1:] = np.cumsum(gy[:, ::-1], axis=1)[:, ::-1]
        lam_z[:, 1:] = np.cumsum(gz[:, ::-1], axis=1)[:, ::-1]
        # heading adjoint: direct terms plus coupling into x/y at the next step
        coup = np.zeros((n, N + 1))
        # psi_t (t = 1..N-1) steers displacement t -> t+1 with speed v_t
        coup[:, 1:N] = dt_ * v[:, 1:] * (
            -np.sin(psi_full[:, 1:N]) * lam_x[:, 2:]
            + np.cos(psi_full[:, 1:N]) * lam_y[:, 2:]
        )
        gp_all = np.zeros((n, N + 1))
        gp_all[:, 1:] = gp
        acc = gp_all + coup
        lam_p = np.cumsum(acc[:, ::-1], axis=1)[:, ::-1]

        grad = np.empty_like(controls)
        cos0 = np.cos(psi_full[:, :-1])
        sin0 = np.sin(psi_full[:, :-1])
        grad[:, :, 0] = dt_ * (cos0 * lam_x[:, 1:] + sin0 * lam_y[:, 1:]) + gu_direct[:, :, 0]
        grad[:, :, 1] = dt_ * lam_p[:, 1:] + gu_direct[:, :, 1]
        grad[:, :, 2] = dt_ * lam_z[:, 1:] + gu_direct[:, :, 2]
        return total, breakdown, residuals, grad


def predict_subject(track_mean: np.ndarray, cfg: MpcConfig) -> np.ndarray:
    """Constant-velocity subject prediction at t = 1..N."""
    t = cfg.step_dt * np.arange(1, cfg.horizon + 1)
    sx = track_mean[0] + t * track_mean[2]
    sy = track_mean[1] + t * track_mean[3]
    return np.column_stack([sx, sy])


def evaluate_cost(
    states: np.ndarray,
    controls: np.ndarray,
    track_mean: np.ndarray,
    wind,
    cfg: MpcConfig,
    u_prev: np.ndarray | None = None,
    box=None,
):
    """Deterministic cost of a control plan; breakdown sums to the total."""
    if u_prev is None:
        u_prev = controls[:, 0, :].copy()
    traj = rollout(states, controls, wind, cfg)
    work = _CostWork(cfg, predict_subject(track_mean, cfg), box)
    total, breakdown, residuals, _ = work.evaluate(traj, controls, u_prev, want_grad=False)
    return total, breakdown, residuals


def cost_gradient(
    states: np.ndarray,
    controls: np.ndarray,
    track_mean: np.ndarray,
    wind,
    cfg: MpcConfig,
    u_prev: np.ndarray | None = None,
    box=None,
) -> np.ndarray:
    if u_prev is None:
        u_prev = controls[:, 0, :].copy()
    traj = rollout(states, controls, wind, cfg)
    work = _CostWork(cfg, predict_subject(track_mean, cfg), box)
    _, _, _, grad = work.evaluate(traj, controls, u_prev, want_grad=True)
    return grad


def _project(controls: np.ndarray, cfg: MpcConfig) -> np.ndarray:
    out = controls.copy()
    out[:, :, 0] = np.clip(out[:, :, 0], cfg.v_min, cfg.v_max)
    out[:, :, 1] = np.clip(out[:, :, 1], -cfg.turn_rate_max, cfg.turn_rate_max)
    out[:, :, 2] = np.clip(out[:, :, 2], -cfg.climb_rate_max, cfg.climb_rate_max)
    return out


class FormationPlanner:
    """Receding-horizon planner for the whole fleet; owns the warm start."""

    def __init__(self, cfg: MpcConfig, n_vehicles: int, box=None):
        self.cfg = cfg
        self.n = n_vehicles
        self.box = box
        self.warm: np.ndarray | None = None
        self.u_prev: np.ndarray | None = None
        self.previous_plan: FormationPlan | None = None
        self.step_size = 0.2
        self.events: list[str] = []

    def loiter_plan(self, states: np.ndarray, now: float) -> FormationPlan:
        cfg = self.cfg
        controls = np.zeros((self.n, cfg.horizon, 3))
        controls[:, :, 0] = cfg.v_min + 1.0
        controls[:, :, 1] = 0.06
        controls[:, :, 2] = np.clip(
            (cfg.standoff_alt - states[:, 2:3]) / (cfg.horizon * cfg.step_dt),
            -cfg.climb_rate_max,
            cfg.climb_rate_max,
        )
        traj = rollout(states, controls, np.zeros(2), cfg)
        return FormationPlan(
            controls=controls,
            trajectories=traj,
            total_cost=float("nan"),
            breakdown={},
            residuals={},
            iterations=0,
            degraded=True,
            created_at=now,
        )

    def plan(self, states: np.ndarray, track, wind: np.ndarray, now: float) -> FormationPlan:
        """states: (n, 4) x,y,z,heading from the nav estimates."""
        cfg = self.cfg
        if not getattr(track, "initialized", False):
            self.events.append("mpc_degraded_no_track")
            plan = self.loiter_plan(states, now)
            self.previous_plan = plan
            return plan

        if self.warm is not None:
            U = np.concatenate([self.warm[:, 1:, :], self.warm[:, -1:, :]], axis=1)
        else:
            U = np.zeros((self.n, cfg.horizon, 3))
            U[:, :, 0] = 6.0
        U = _project(U, cfg)
        u_prev = self.u_prev if self.u_prev is not None else U[:, 0, :].copy()

        work = _CostWork(cfg, predict_subject(track.mean, cfg), self.box)
        scales = np.asarray(cfg.u_scales) ** 2

        def full_eval(Uc, want_grad):
            traj = rollout(states, Uc, wind, cfg)
            return work.evaluate(traj, Uc, u_prev, want_grad)

        cost, breakdown, residuals, grad = full_eval(U, True)
        if not math.isfinite(cost):
            self.events.append("mpc_fault_nonfinite")
            if self.previous_plan is not None:
                return self.previous_plan
            plan = self.loiter_plan(states, now)
            self.previous_plan = plan
            return plan

        alpha = self.step_size
        iterations = 0
        costs = [cost]
        for _ in range(cfg.iterations):
            step = grad * scales
            accepted = False
            for _ in range(25):
                cand = _project(U - alpha * step, cfg)
                c_new, b_new, r_new, _ = full_eval(cand, False)
                if math.isfinite(c_new) and c_new < cost:
                    U, cost, breakdown, residuals = cand, c_new, b_new, r_new
                    _, _, _, grad = full_eval(U, True)
                    alpha = min(alpha * 1.4, 5.0)
                    accepted = True
                    break
                alpha *= 0.5
                if alpha < 1e-9:
                    break
            iterations += 1
            costs.append(cost)
            if not accepted:
                break
        assert all(b <= a + 1e-12 for a, b in zip(costs, costs[1:])), "solver cost increased"

        self.warm = U
        self.u_prev = U[:, 0, :].copy()
        self.step_size = max(alpha, 1e-6)
        traj = rollout(states, U, wind, cfg)
        plan = FormationPlan(
            controls=U,
            trajectories=traj,
            total_cost=cost,
            breakdown=breakdown,
            residuals=residuals,
            iterations=iterations,
            created_at=now,
        )
        self.previous_plan = plan
        return plan
