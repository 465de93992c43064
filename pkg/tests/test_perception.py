import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from airshipsim.errors import NoGroundIntersection
from airshipsim.perception import (
    CameraModel,
    CameraPose,
    CommsConfig,
    Detection,
    DetectionConfig,
    GroundMeasurement,
    SubjectTracker,
    TrackerConfig,
    comms_deliver,
    detection_roi,
    measurement_from_detection,
    pixel_to_ground,
    project_subject,
    simulate_detection,
)
from airshipsim.quat import quat_from_yaw, quat_identity


def level_pose(position=(0.0, 0.0, 30.0), yaw=0.0, camera=None):
    camera = camera or CameraModel()
    att = quat_from_yaw(yaw) if yaw else quat_identity()
    return CameraPose.of_vehicle(np.asarray(position, dtype=float), att, camera)


class TestProjection:
    def test_boresight_maps_to_image_center(self):
        pose = level_pose()
        t = 30.0 / math.sin(math.radians(30.0))
        point = pose.position + t * pose.boresight_world
        u, v = project_subject(pose, point)
        assert u == pytest.approx(0.5, abs=1e-9)
        assert v == pytest.approx(0.5, abs=1e-9)

    def test_mount_points_starboard_and_down(self):
        pose = level_pose(yaw=0.0)  # nose east
        b = pose.boresight_world
        assert b[1] == pytest.approx(-math.cos(math.radians(30.0)), abs=1e-12)  # south
        assert b[2] == pytest.approx(-0.5, abs=1e-12)  # 30 deg down

    def test_subject_behind_camera_is_none(self):
        pose = level_pose()
        point = pose.position - 50.0 * pose.boresight_world
        assert project_subject(pose, point) is None

    def test_half_hfov_off_axis_hits_image_edge(self):
        pose = level_pose()
        cam = pose.camera
        z = 50.0
        point = pose.position + pose.rot_cam_to_world @ np.array(
            [z * cam.tan_half_h, 0.0, z]
        )
        u, v = project_subject(pose, point)
        assert u == pytest.approx(1.0, abs=1e-6)
        assert v == pytest.approx(0.5, abs=1e-9)

    def test_beyond_max_range_is_none(self):
        pose = level_pose(position=(0, 0, 200.0))
        t = 200.0 / math.sin(math.radians(30.0))  # slant 400 m > 300 m default
        point = pose.position + t * pose.boresight_world
        assert project_subject(pose, point) is None


class TestPixelToGround:
    def test_center_click_from_30m(self):
        pose = level_pose(position=(0.0, 0.0, 30.0))
        point = pixel_to_ground(pose, (0.5, 0.5))
        abeam = math.hypot(point[0], point[1])
        assert abeam == pytest.approx(30.0 / math.tan(math.radians(30.0)), abs=0.01)
        assert point[2] == 0.0

    def test_ray_above_horizon_raises(self):
        camera = CameraModel(vfov_deg=80.0)  # top of frame 10 deg above horizon
        pose = level_pose(camera=camera)
        with pytest.raises(NoGroundIntersection):
            pixel_to_ground(pose, (0.5, 0.0))

    def test_zero_altitude_degenerates_to_camera_foot(self):
        pose = level_pose(position=(3.0, 4.0, 0.0))
        point = pixel_to_ground(pose, (0.5, 0.5))
        assert point[0] == pytest.approx(3.0, abs=1e-9)
        assert point[1] == pytest.approx(4.0, abs=1e-9)

    @given(
        u=st.floats(0.01, 0.99),
        v=st.floats(0.01, 0.99),
        yaw=st.floats(-math.pi, math.pi),
    )
    @settings(max_examples=60, deadline=None)
    def test_roundtrip_pixel_ground_pixel(self, u, v, yaw):
        pose = level_pose(position=(5.0, -2.0, 12.0), yaw=yaw)
        point = pixel_to_ground(pose, (u, v))
        back = project_subject(pose, point)
        assert back is not None
        assert back[0] == pytest.approx(u, abs=1e-9)
        assert back[1] == pytest.approx(v, abs=1e-9)


class TestDetectionModel:
    def test_certain_hit_zero_noise_reproduces_projection(self):
        cfg = DetectionConfig(p_hit_roi=1.0, p_hit_outside=1.0, pixel_noise_std=0.0)
        rng = np.random.Generator(np.random.PCG64(0))
        det = simulate_detection((0.4, 0.6), None, cfg, rng, 1.0, 0)
        assert det.pixel == (0.4, 0.6)

    def test_no_projection_no_detection(self):
        cfg = DetectionConfig()
        rng = np.random.Generator(np.random.PCG64(0))
        assert simulate_detection(None, None, cfg, rng, 0.0, 0) is None

    def test_roi_hit_rate_matches_p_hi(self):
        cfg = DetectionConfig(p_hit_roi=0.95, pixel_noise_std=0.0)
        rng = np.random.Generator(np.random.PCG64(11))
        roi = ((0.5, 0.5), 0.2, 0.2)
        hits = sum(
            simulate_detection((0.5, 0.5), roi, cfg, rng, 0.0, 0) is not None
            for _ in range(10_000)
        )
        assert hits / 10_000 == pytest.approx(0.95, abs=0.02)

    def test_outside_roi_uses_low_probability(self):
        cfg = DetectionConfig(p_hit_roi=1.0, p_hit_outside=0.5, pixel_noise_std=0.0)
        rng = np.random.Generator(np.random.PCG64(12))
        roi = ((0.1, 0.1), 0.05, 0.05)
        hits = sum(
            simulate_detection((0.9, 0.9), roi, cfg, rng, 0.0, 0) is not None
            for _ in range(10_000)
        )
        assert hits / 10_000 == pytest.approx(0.5, abs=0.02)

    def test_roi_centers_on_reinitialized_track(self):
        tracker = SubjectTracker(TrackerConfig())
        tracker.reinitialize((30.0, -40.0), time=0.0)
        pose = level_pose(position=(30.0, 10.0, 30.0), yaw=0.0)  # subject to starboard
        roi = detection_roi(pose, tracker.track, DetectionConfig())
        assert roi is not None
        projected = project_subject(pose, np.array([30.0, -40.0, 0.0]))
        assert roi[0] == pytest.approx(projected, abs=1e-12)


class TestTracker:
    def measurement(self, t, x, y, r=1.0, src=0):
        return GroundMeasurement(t, np.array([x, y]), r * np.eye(2), src)

    def test_predict_only_grows_covariance_and_drifts_mean(self):
        tr = SubjectTracker(TrackerConfig())
        tr.reinitialize((0.0, 0.0), time=0.0)
        tr.track.mean[2:] = [1.0, -0.5]
        traces = []
        for k in range(1, 6):
            tr.predict(k * 1.0)
            traces.append(np.trace(tr.track.covariance))
        assert all(b > a for a, b in zip(traces, traces[1:]))
        assert tr.track.mean[0] == pytest.approx(5.0)
        assert tr.track.mean[1] == pytest.approx(-2.5)

    def test_reinitialize_exact_and_idempotent(self):
        tr = SubjectTracker(TrackerConfig())
        tr.reinitialize((12.5, -7.25), time=3.0)
        first = (tr.track.mean.copy(), tr.track.covariance.copy())
        tr.reinitialize((12.5, -7.25), time=3.0)
        assert np.array_equal(tr.track.mean, first[0])
        assert np.array_equal(tr.track.covariance, first[1])
        assert tr.track.mean[0] == 12.5 and tr.track.mean[1] == -7.25
        assert np.all(tr.track.mean[2:] == 0.0)

    def test_distributed_equals_centralized_lossless(self):
        """Identical ordered delivery: per-vehicle posteriors match the
        centralized single-filter posterior to 1e-9."""
        rng = np.random.Generator(np.random.PCG64(21))
        stream = []
        t = 0.0
        for k in range(120):
            t += 0.2
            src = k % 2
            stream.append(
                self.measurement(t, 5.0 + rng.normal(0, 1), -3.0 + rng.normal(0, 1), src=src)
            )
        filters = [SubjectTracker(TrackerConfig()) for _ in range(3)]  # 2 vehicles + central
        for f in filters:
            f.reinitialize((4.0, -2.0), time=0.0)
            for m in stream:
                f.fuse(m)
        for f in filters[1:]:
            assert np.allclose(f.track.mean, filters[0].track.mean, atol=1e-9)
            assert np.allclose(f.track.covariance, filters[0].track.covariance, atol=1e-9)

    def test_packet_loss_inflates_covariance(self):
        rng = np.random.Generator(np.random.PCG64(22))
        stream = [
            self.measurement(0.2 * (k + 1), rng.normal(0, 1), rng.normal(0, 1), src=k % 2)
            for k in range(150)
        ]
        lossless = SubjectTracker(TrackerConfig())
        lossy = SubjectTracker(TrackerConfig())
        for f in (lossless, lossy):
            f.reinitialize((0.0, 0.0), time=0.0)
        drop = np.random.Generator(np.random.PCG64(23))
        for m in stream:
            lossless.fuse(m)
            if m.source_vehicle == 0 or drop.uniform() > 0.3:
                lossy.fuse(m)
        final_t = stream[-1].timestamp
        lossless.predict(final_t)
        lossy.predict(final_t)
        assert np.trace(lossy.track.covariance) >= np.trace(lossless.track.covariance)

    def test_stationary_subject_converges_under_2m(self):
        """30 s of 5 Hz detections from 50 m: position error < 2 m."""
        rng = np.random.Generator(np.random.PCG64(31))
        subject = np.array([0.0, 0.0, 0.0])
        pose = level_pose(position=(0.0, 50.0, 30.0), yaw=0.0)  # subject to starboard
        cfg = DetectionConfig()
        tracker = SubjectTracker(TrackerConfig())
        tracker.reinitialize((5.0, 5.0), time=0.0)
        nav_cov = np.eye(3) * 0.8**2
        t = 0.0
        for _ in range(150):
            t += 0.2
            proj = project_subject(pose, subject)
            assert proj is not None
            det = simulate_detection(proj, None, cfg, rng, t, 0)
            if det is None:
                continue
            meas = measurement_from_detection(det, pose, nav_cov)
            tracker.fuse(meas)
        err = np.linalg.norm(tracker.track.mean[0:2] - subject[0:2])
        assert err < 2.0

    def test_measurement_covariance_grows_with_range(self):
        det = Detection((0.5, 0.5), 0.0, 0, 0.004)
        near = measurement_from_detection(det, level_pose(position=(0, 0, 30.0)))
        far = measurement_from_detection(det, level_pose(position=(0, 0, 90.0)))
        assert np.trace(far.R) > 4.0 * (np.trace(near.R) - 2 * 0.05)


class TestComms:
    def test_short_range_always_delivers(self):
        rng = np.random.Generator(np.random.PCG64(41))
        cfg = CommsConfig()
        for _ in range(200):
            ok, latency = comms_deliver((0, 0, 30), (10, 0, 30), cfg, rng)
            assert ok
            assert cfg.latency_s <= latency <= cfg.latency_s + cfg.jitter_s

    def test_beyond_range_always_drops(self):
        rng = np.random.Generator(np.random.PCG64(42))
        cfg = CommsConfig()
        assert all(
            not comms_deliver((0, 0, 30), (200, 0, 30), cfg, rng)[0] for _ in range(200)
        )

    def test_midpoint_drop_rate(self):
        """135 m is halfway through the 120..150 m drop ramp: p_drop = 0.5."""
        rng = np.random.Generator(np.random.PCG64(43))
        cfg = CommsConfig()
        n = 10_000
        delivered = sum(
            comms_deliver((0, 0, 30), (135.0, 0, 30), cfg, rng)[0] for _ in range(n)
        )
        assert 1.0 - delivered / n == pytest.approx(0.5, abs=0.05)
