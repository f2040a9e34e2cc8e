"""Quaternion and rigid-transform helpers. Quaternions are (w, x, y, z)."""

import numpy as np

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def normalize(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def quat_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_from_axis_angle(axis, angle):
    axis = normalize(axis)
    return np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * axis])


def quat_angle(q):
    """Rotation angle (radians, in [0, pi]) of a unit quaternion."""
    return 2.0 * np.arctan2(np.linalg.norm(q[1:]), abs(q[0]))


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(R):
    """Shepperd's method; returns a unit quaternion with w >= 0."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = normalize(q)
    return -q if q[0] < 0 else q


def slerp(q0, q1, u):
    """Shortest-arc spherical interpolation; exact at u == 0 and u == 1."""
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    if u == 0:
        return q0.copy()
    d = float(np.dot(q0, q1))
    if d < 0:
        q1, d = -q1, -d
    if u == 1:
        return q1.copy()
    if d > 1.0 - 1e-12:
        q = q0 + u * (q1 - q0)
    else:
        theta = np.arccos(min(d, 1.0))
        s = np.sin(theta)
        q = (np.sin((1 - u) * theta) / s) * q0 + (np.sin(u * theta) / s) * q1
    return q / np.linalg.norm(q)


def look_at(eye, target, up=(0.0, 1.0, 0.0)):
    """Camera-to-world rotation (quaternion) for a camera at `eye` looking
    along -z towards `target`, y up."""
    eye = np.asarray(eye, dtype=float)
    back = eye - np.asarray(target, dtype=float)
    n = np.linalg.norm(back)
    if n == 0:
        raise ValueError("look_at: eye and target coincide")
    back /= n
    right = np.cross(up, back)
    if np.linalg.norm(right) < 1e-12:
        # looking straight up or down
        right = np.cross((0.0, 0.0, -1.0), back)
    right = normalize(right)
    upv = np.cross(back, right)
    return matrix_to_quat(np.column_stack([right, upv, back]))


def yaw_matrix(deg):
    """Rotation about +y that moves an equirectangular longitude phi to
    phi + deg (the same sense as `envlight.rotate_envmap`)."""
    a = np.deg2rad(deg)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])
