"""Quaternion and small-rotation helpers.

Conventions: unit quaternions (w, x, y, z) rotating body frame into world
frame; world is ENU (x east, y north, z up), body is x forward, y left,
z up. Scalar math throughout -- these run inside the 500 Hz loop.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = [
    "quat_identity",
    "quat_normalize",
    "quat_multiply",
    "quat_conjugate",
    "quat_rotate",
    "quat_rotate_inverse",
    "quat_from_axis_angle",
    "quat_from_yaw",
    "quat_integrate",
    "quat_to_matrix",
    "yaw_of",
    "pitch_of",
    "roll_of",
    "wrap_angle",
]


def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return q / n


def quat_multiply(q: np.ndarray, r: np.ndarray) -> np.ndarray:
    qw, qx, qy, qz = q
    rw, rx, ry, rz = r
    return np.array(
        [
            qw * rw - qx * rx - qy * ry - qz * rz,
            qw * rx + qx * rw + qy * rz - qz * ry,
            qw * ry - qx * rz + qy * rw + qz * rx,
            qw * rz + qx * ry - qy * rx + qz * rw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v) -> np.ndarray:
    """Rotate vector v from body to world frame."""
    w, x, y, z = q
    vx, vy, vz = v[0], v[1], v[2]
    # t = 2 * (q_vec x v)
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return np.array(
        [
            vx + w * tx + (y * tz - z * ty),
            vy + w * ty + (z * tx - x * tz),
            vz + w * tz + (x * ty - y * tx),
        ]
    )


def quat_rotate_inverse(q: np.ndarray, v) -> np.ndarray:
    """Rotate vector v from world to body frame."""
    w, x, y, z = q
    vx, vy, vz = v[0], v[1], v[2]
    tx = 2.0 * (-y * vz + z * vy)
    ty = 2.0 * (-z * vx + x * vz)
    tz = 2.0 * (-x * vy + y * vx)
    return np.array(
        [
            vx + w * tx + (-y * tz + z * ty),
            vy + w * ty + (-z * tx + x * tz),
            vz + w * tz + (-x * ty + y * tx),
        ]
    )


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    ax, ay, az = axis[0], axis[1], axis[2]
    n = math.sqrt(ax * ax + ay * ay + az * az)
    if n < 1e-15:
        return quat_identity()
    half = 0.5 * angle
    s = math.sin(half) / n
    return np.array([math.cos(half), ax * s, ay * s, az * s])


def quat_from_yaw(yaw: float) -> np.ndarray:
    half = 0.5 * yaw
    return np.array([math.cos(half), 0.0, 0.0, math.sin(half)])


def quat_integrate(q: np.ndarray, omega, dt: float) -> np.ndarray:
    """Advance attitude by body rates omega over dt (exact exponential map)."""
    wx, wy, wz = omega[0] * dt, omega[1] * dt, omega[2] * dt
    angle = math.sqrt(wx * wx + wy * wy + wz * wz)
    if angle < 1e-12:
        dq = np.array([1.0, 0.5 * wx, 0.5 * wy, 0.5 * wz])
    else:
        half = 0.5 * angle
        s = math.sin(half) / angle
        dq = np.array([math.cos(half), wx * s, wy * s, wz * s])
    return quat_normalize(quat_multiply(q, dq))


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def yaw_of(q: np.ndarray) -> float:
    """Heading of the body x axis, CCW from world +x (east)."""
    w, x, y, z = q
    fwd_x = 1 - 2 * (y * y + z * z)
    fwd_y = 2 * (x * y + w * z)
    return math.atan2(fwd_y, fwd_x)


def pitch_of(q: np.ndarray) -> float:
    """Elevation of the body x axis above the horizon (positive nose-up)."""
    w, x, y, z = q
    fwd_z = 2 * (x * z - w * y)
    return math.asin(max(-1.0, min(1.0, fwd_z)))


def roll_of(q: np.ndarray) -> float:
    """Bank angle: rotation of body y axis out of the horizontal plane."""
    w, x, y, z = q
    left_z = 2 * (y * z + w * x)
    up_z = 1 - 2 * (x * x + y * y)
    return math.atan2(left_z, up_z)


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    return math.atan2(math.sin(a), math.cos(a))
