"""Synthetic camera, foveated detection model, cooperative subject tracking.

The neural detector of the real system is replaced by a parametric hit model:
detections fire with high probability inside the predicted region of interest
(the foveation effect) and lower probability elsewhere, with Gaussian pixel
noise. Detections are converted to ground-plane pseudo-measurements at the
source vehicle and shared raw between vehicles, so every tracker fuses the
identical (z, R) stream and per-vehicle posteriors match a centralized filter
under lossless ordered delivery.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoGroundIntersection
from .quat import quat_to_matrix


@dataclass
class CameraModel:
    mount_azimuth_deg: float = 90.0  # positive toward starboard
    mount_depression_deg: float = 30.0
    hfov_deg: float = 82.0
    vfov_deg: float = 52.0
    max_range: float = 300.0

    def __post_init__(self):
        if not 0.0 < self.hfov_deg < 180.0 or not 0.0 < self.vfov_deg < 180.0:
            raise ValueError("field of view must lie in (0, 180) degrees")
        az = -math.radians(self.mount_azimuth_deg)  # body y is left; starboard = -y
        dep = math.radians(self.mount_depression_deg)
        f = np.array(
            [
                math.cos(dep) * math.cos(az),
                math.cos(dep) * math.sin(az),
                -math.sin(dep),
            ]
        )
        up = np.array([0.0, 0.0, 1.0])
        r = np.cross(f, up)
        n = np.linalg.norm(r)
        if n < 1e-9:  # straight-down mount: pick image right along body -x
            r = np.array([-1.0, 0.0, 0.0])
            n = 1.0
        r /= n
        d = np.cross(f, r)
        # camera frame: x right, y down, z forward (columns in body frame)
        self.rot_cam_to_body = np.column_stack([r, d, f])
        self.tan_half_h = math.tan(0.5 * math.radians(self.hfov_deg))
        self.tan_half_v = math.tan(0.5 * math.radians(self.vfov_deg))

    @property
    def boresight_body(self) -> np.ndarray:
        return self.rot_cam_to_body[:, 2]


@dataclass
class CameraPose:
    position: np.ndarray
    rot_cam_to_world: np.ndarray
    camera: CameraModel

    @classmethod
    def of_vehicle(cls, position, attitude, camera: CameraModel) -> "CameraPose":
        r_wb = quat_to_matrix(attitude)
        return cls(
            position=np.asarray(position, dtype=float),
            rot_cam_to_world=r_wb @ camera.rot_cam_to_body,
            camera=camera,
        )

    @property
    def boresight_world(self) -> np.ndarray:
        return self.rot_cam_to_world[:, 2]


def project_subject(pose: CameraPose, point) -> tuple[float, float] | None:
    """Pinhole projection to the normalized image; None when not visible."""
    cam = pose.camera
    rel = np.asarray(point, dtype=float) - pose.position
    xc = pose.rot_cam_to_world.T @ rel
    if xc[2] <= 1e-9:
        return None
    rng = float(np.linalg.norm(rel))
    if rng > cam.max_range:
        return None
    u = 0.5 + xc[0] / (2.0 * xc[2] * cam.tan_half_h)
    v = 0.5 + xc[1] / (2.0 * xc[2] * cam.tan_half_v)
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        return None
    return float(u), float(v)


def pixel_to_ground(pose: CameraPose, pixel) -> np.ndarray:
    """Intersect the pixel ray with the ground plane z = 0."""
    cam = pose.camera
    u, v = pixel
    dir_cam = np.array(
        [(u - 0.5) * 2.0 * cam.tan_half_h, (v - 0.5) * 2.0 * cam.tan_half_v, 1.0]
    )
    dir_world = pose.rot_cam_to_world @ dir_cam
    if dir_world[2] >= -1e-9:
        raise NoGroundIntersection("pixel ray points at or above the horizon")
    t = -pose.position[2] / dir_world[2]
    point = pose.position + t * dir_world
    point[2] = 0.0
    return point


# ---------------------------------------------------------------------------
# detection model


@dataclass
class Detection:
    pixel: tuple[float, float]
    timestamp: float
    source_vehicle: int
    pixel_noise_std: float


@dataclass
class DetectionConfig:
    p_hit_roi: float = 0.95
    p_hit_outside: float = 0.5
    pixel_noise_std: float = 0.004
    roi_sigma: float = 3.0


def detection_roi(pose: CameraPose, track: "SubjectTrack", cfg: DetectionConfig):
    """Projected track mean and pixel-space ROI half-sizes, or None."""
    if not track.initialized:
        return None
    mean_pt = np.array([track.mean[0], track.mean[1], 0.0])
    center = project_subject(pose, mean_pt)
    if center is None:
        return None
    sigma_pos = math.sqrt(max(track.covariance[0, 0], track.covariance[1, 1]))
    slant = max(1.0, float(np.linalg.norm(mean_pt - pose.position)))
    half_u = cfg.roi_sigma * sigma_pos / (slant * 2.0 * pose.camera.tan_half_h)
    half_v = cfg.roi_sigma * sigma_pos / (slant * 2.0 * pose.camera.tan_half_v)
    return center, max(0.02, half_u), max(0.02, half_v)


def simulate_detection(
    projection: tuple[float, float] | None,
    roi,
    cfg: DetectionConfig,
    rng: np.random.Generator,
    timestamp: float,
    source_vehicle: int,
) -> Detection | None:
    """Bernoulli hit (foveated probabilities) plus pixel noise."""
    if projection is None:
        return None
    in_roi = False
    if roi is not None:
        (cu, cv), hu, hv = roi
        in_roi = abs(projection[0] - cu) <= hu and abs(projection[1] - cv) <= hv
    p_hit = cfg.p_hit_roi if in_roi else cfg.p_hit_outside
    if rng.uniform() >= p_hit:
        return None
    u = projection[0] + rng.normal(0.0, cfg.pixel_noise_std)
    v = projection[1] + rng.normal(0.0, cfg.pixel_noise_std)
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        return None  # noise pushed the box out of frame: treat as a miss
    return Detection(
        pixel=(u, v),
        timestamp=timestamp,
        source_vehicle=source_vehicle,
        pixel_noise_std=cfg.pixel_noise_std,
    )


# ---------------------------------------------------------------------------
# ground-plane pseudo-measurements and the cooperative tracker


@dataclass
class GroundMeasurement:
    """Raw fusion payload shared between vehicles."""

    timestamp: float
    z: np.ndarray  # (x, y) ground point
    R: np.ndarray  # 2x2 covariance
    source_vehicle: int


def measurement_from_detection(
    det: Detection, pose: CameraPose, nav_pos_cov: np.ndarray | None = None
) -> GroundMeasurement | None:
    """Back-project a detection and build its ground covariance.

    R combines the pixel noise mapped through the projection Jacobian
    (finite differences) with the observer's own position uncertainty; both
    grow with range as the spec's range^2 scaling demands.
    """
    try:
        g0 = pixel_to_ground(pose, det.pixel)
    except NoGroundIntersection:
        return None
    eps = 1e-4
    cols = []
    for dp in ((eps, 0.0), (0.0, eps)):
        try:
            gp = pixel_to_ground(pose, (det.pixel[0] + dp[0], det.pixel[1] + dp[1]))
        except NoGroundIntersection:
            return None
        cols.append((gp[:2] - g0[:2]) / eps)
    J = np.column_stack(cols)
    R = det.pixel_noise_std**2 * (J @ J.T)
    if nav_pos_cov is not None:
        R = R + nav_pos_cov[0:2, 0:2]
    R = R + 0.05 * np.eye(2)  # floor: keeps R well-conditioned at short range
    return GroundMeasurement(
        timestamp=det.timestamp, z=g0[:2].copy(), R=R, source_vehicle=det.source_vehicle
    )


@dataclass
class SubjectTrack:
    mean: np.ndarray = field(default_factory=lambda: np.zeros(4))  # x y vx vy
    covariance: np.ndarray = field(default_factory=lambda: np.eye(4) * 1e4)
    last_update: float = 0.0
    initialized: bool = False


@dataclass
class TrackerConfig:
    accel_psd: float = 0.4  # white-acceleration spectral density
    init_pos_std: float = 5.0
    init_vel_std: float = 1.0


class SubjectTracker:
    """Constant-velocity Kalman filter over the subject ground state.

    Local and remote GroundMeasurements are fused identically; feeding the
    same ordered stream to every instance reproduces a centralized filter.
    """

    def __init__(self, cfg: TrackerConfig):
        self.cfg = cfg
        self.track = SubjectTrack()
        self.events: list[str] = []

    def reinitialize(self, world_point, time: float):
        cfg = self.cfg
        self.track = SubjectTrack(
            mean=np.array([world_point[0], world_point[1], 0.0, 0.0]),
            covariance=np.diag(
                [cfg.init_pos_std**2, cfg.init_pos_std**2, cfg.init_vel_std**2, cfg.init_vel_std**2]
            ),
            last_update=time,
            initialized=True,
        )

    def predict(self, time: float):
        tr = self.track
        dt = time - tr.last_update
        if dt <= 0.0 or not tr.initialized:
            return
        F = np.eye(4)
        F[0, 2] = dt
        F[1, 3] = dt
        q = self.cfg.accel_psd
        d3, d2 = dt**3 / 3.0, dt**2 / 2.0
        Q = q * np.array(
            [
                [d3, 0.0, d2, 0.0],
                [0.0, d3, 0.0, d2],
                [d2, 0.0, dt, 0.0],
                [0.0, d2, 0.0, dt],
            ]
        )
        tr.mean = F @ tr.mean
        tr.covariance = F @ tr.covariance @ F.T + Q
        tr.last_update = time

    def fuse(self, meas: GroundMeasurement):
        """Predict to the measurement time, then the standard KF update."""
        tr = self.track
        if not tr.initialized:
            return
        if meas.timestamp > tr.last_update:
            self.predict(meas.timestamp)
        H = np.zeros((2, 4))
        H[0, 0] = 1.0
        H[1, 1] = 1.0
        P = tr.covariance
        S = H @ P @ H.T + meas.R
        K = P @ H.T @ np.linalg.inv(S)
        innov = meas.z - tr.mean[0:2]
        tr.mean = tr.mean + K @ innov
        ikh = np.eye(4) - K @ H
        P = ikh @ P @ ikh.T + K @ meas.R @ K.T
        tr.covariance = 0.5 * (P + P.T)
        try:
            np.linalg.cholesky(tr.covariance + 1e-12 * np.eye(4))
        except np.linalg.LinAlgError:
            self.events.append("track_reset_non_spd")
            self.track = SubjectTrack()


# ---------------------------------------------------------------------------
# range-limited lossy link


@dataclass
class CommsConfig:
    range_m: float = 150.0
    drop_start_fraction: float = 0.8
    latency_s: float = 0.05
    jitter_s: float = 0.01


def comms_deliver(
    sender_pos, receiver_pos, cfg: CommsConfig, rng: np.random.Generator
) -> tuple[bool, float]:
    """(delivered?, latency). Drop probability is 0 below the start fraction
    of range and rises linearly to 1 at full range."""
    d = float(np.linalg.norm(np.asarray(sender_pos)[:3] - np.asarray(receiver_pos)[:3]))
    start = cfg.drop_start_fraction * cfg.range_m
    if d >= cfg.range_m:
        return False, 0.0
    if d > start:
        p_drop = (d - start) / (cfg.range_m - start)
        if rng.uniform() < p_drop:
            return False, 0.0
    latency = cfg.latency_s + rng.uniform(0.0, cfg.jitter_s)
    return True, latency
