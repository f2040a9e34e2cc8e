"""Camera trajectories: analytic parametric moves, keyframe splines, and the
text trajectory format ``k tx ty tz qw qx qy qz fx fy cx cy``.

Poses are camera-to-world; the camera looks along its local -z with +y up.
"""

import math
from dataclasses import dataclass

import numpy as np

from .dsl import MOVES
from .errors import (
    BadParameter,
    FormatError,
    NonMonotoneTimes,
    TooFewKeys,
    UnknownMove,
)
from .geometry import look_at, quat_to_matrix, slerp


@dataclass
class CameraPose:
    rotation: np.ndarray
    translation: np.ndarray
    intrinsics: tuple  # fx, fy, cx, cy in pixels

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.translation = np.asarray(self.translation, dtype=float)
        self.intrinsics = tuple(float(x) for x in self.intrinsics)
        if abs(np.linalg.norm(self.rotation) - 1.0) > 1e-9:
            raise BadParameter("camera rotation quaternion is not unit norm")
        if not (self.intrinsics[0] > 0 and self.intrinsics[1] > 0):
            raise BadParameter("focal lengths must be positive")

    def is_finite(self):
        return bool(np.all(np.isfinite(self.rotation)) and np.all(np.isfinite(self.translation))
                    and all(math.isfinite(x) for x in self.intrinsics))

    def matrix(self):
        """4x4 camera-to-world transform."""
        T = np.eye(4)
        T[:3, :3] = quat_to_matrix(self.rotation)
        T[:3, 3] = self.translation
        return T


@dataclass
class CameraTrajectory:
    poses: list

    def __post_init__(self):
        self.poses = list(self.poses)
        if not self.poses:
            raise BadParameter("trajectory needs at least one pose")

    @property
    def frame_count(self):
        return len(self.poses)

    def __len__(self):
        return len(self.poses)

    def __getitem__(self, k):
        return self.poses[k]

    def positions(self):
        return np.array([p.translation for p in self.poses])

    def reversed(self):
        return CameraTrajectory(self.poses[::-1])


def default_intrinsics(width, height):
    f = 0.9 * width
    return (f, f, width / 2.0, height / 2.0)


def _scene_frame(scene):
    lo, hi = scene.bounds()
    center = (lo + hi) / 2
    radius = float(np.linalg.norm(hi - lo)) / 2
    return center, radius, (lo, hi)


def _direction(azimuth_deg, elevation_deg):
    az, el = math.radians(azimuth_deg), math.radians(elevation_deg)
    return np.array([math.cos(el) * math.sin(az), math.sin(el), math.cos(el) * math.cos(az)])


_PARAMS = {
    "static": {"distance", "azimuth", "elevation"},
    "orbit": {"span", "radius", "elevation", "start"},
    "dolly": {"start_x", "start_y", "start_z", "end_x", "end_y", "end_z"},
    "crane": {"radius", "forward", "height0", "height1", "azimuth"},
    "dolly_zoom": {"start", "end", "azimuth", "elevation"},
}


def _projected_height(pose, lo, hi):
    """Vertical pixel extent of the AABB `lo..hi` seen from `pose`."""
    corners = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1])
                        for z in (lo[2], hi[2])])
    R = quat_to_matrix(pose.rotation)
    pc = (corners - pose.translation) @ R  # world -> camera
    depth = -pc[:, 2]
    ratio = pc[:, 1] / depth
    return pose.intrinsics[1] * (ratio.max() - ratio.min())


def plan_camera(plan, scene, frames, width=128, height=128):
    """Analytic per-frame poses for a `CameraClause` around `scene`.

    Distances default to multiples of the scene's bounding radius; azimuth 0
    puts the camera on the +z side looking down -z.
    """
    if plan.move not in MOVES:
        raise UnknownMove(plan.move, 0)
    if frames < 2:
        raise BadParameter("a trajectory needs at least 2 frames")
    p = plan.params
    unknown = set(p) - _PARAMS[plan.move]
    if unknown:
        raise BadParameter(f"{plan.move}: unknown parameter(s) {sorted(unknown)}")
    center, rad, (lo, hi) = _scene_frame(scene)
    dist = max(2.0, 3.0 * rad)
    K = default_intrinsics(width, height)
    s = np.arange(frames) / (frames - 1)
    poses = []

    def positive(name, default):
        v = float(p.get(name, default))
        if not v > 0:
            raise BadParameter(f"{plan.move}: {name} must be positive, got {v}")
        return v

    if plan.move == "static":
        eye = center + positive("distance", dist) * _direction(p.get("azimuth", 0.0), p.get("elevation", 20.0))
        pose = CameraPose(look_at(eye, center), eye, K)
        poses = [CameraPose(pose.rotation.copy(), pose.translation.copy(), K) for _ in range(frames)]

    elif plan.move == "orbit":
        radius = positive("radius", dist)
        span, start, elev = p.get("span", 360.0), p.get("start", 0.0), p.get("elevation", 20.0)
        if not -90 < elev < 90:
            raise BadParameter("orbit: elevation must lie in (-90, 90)")
        for k in range(frames):
            eye = center + radius * _direction(start + span * k / (frames - 1), elev)
            poses.append(CameraPose(look_at(eye, center), eye, K))

    elif plan.move == "dolly":
        a = center + np.array([0.0, 0.25 * dist, dist])
        b = center + np.array([0.0, 0.25 * dist, 0.5 * dist])
        a = np.array([p.get("start_x", a[0]), p.get("start_y", a[1]), p.get("start_z", a[2])])
        b = np.array([p.get("end_x", b[0]), p.get("end_y", b[1]), p.get("end_z", b[2])])
        if np.allclose(a, center):
            raise BadParameter("dolly: start point coincides with the scene center")
        q = look_at(a, center)
        for u in s:
            poses.append(CameraPose(q.copy(), a + u * (b - a), K))

    elif plan.move == "crane":
        radius = positive("radius", dist)
        forward = float(p.get("forward", 0.25 * dist))
        h0, h1 = float(p.get("height0", 0.0)), float(p.get("height1", 0.75 * dist))
        if not radius - forward > 0:
            raise BadParameter("crane: forward must be smaller than radius")
        d = _direction(p.get("azimuth", 0.0), 0.0)
        for u in s:
            eye = center + (radius - forward * u) * d + np.array([0.0, h0 + (h1 - h0) * u, 0.0])
            poses.append(CameraPose(look_at(eye, center), eye, K))

    elif plan.move == "dolly_zoom":
        d0, d1 = positive("start", dist), positive("end", 0.5 * dist)
        if min(d0, d1) <= rad:
            raise BadParameter("dolly_zoom: camera would enter the scene bounds")
        d = _direction(p.get("azimuth", 0.0), p.get("elevation", 10.0))
        q = look_at(center + d0 * d, center)

        def pose_at(u, f):
            return CameraPose(q.copy(), center + (d0 + (d1 - d0) * u) * d, (f, f, K[2], K[3]))

        target = _projected_height(pose_at(0.5, K[0]), lo, hi)
        for u in s:
            h = _projected_height(pose_at(u, K[0]), lo, hi)
            poses.append(pose_at(u, K[0] * target / h))

    return CameraTrajectory(poses)


# -- keyframe spline ---------------------------------------------------------

def _knot(a, b):
    return math.sqrt(float(np.linalg.norm(b - a)))  # centripetal: |d|^0.5


def _lerp(pa, pb, ta, tb, t):
    if tb == ta:
        return pa
    return ((tb - t) * pa + (t - ta) * pb) / (tb - ta)


def _catmull_rom(p0, p1, p2, p3, u):
    """Barry-Goldman evaluation of the centripetal segment p1 -> p2."""
    t0 = 0.0
    t1 = t0 + _knot(p0, p1)
    t2 = t1 + _knot(p1, p2)
    t3 = t2 + _knot(p2, p3)
    if t2 == t1:
        return p1.copy()
    t = t1 + u * (t2 - t1)
    a1 = _lerp(p0, p1, t0, t1, t)
    a2 = _lerp(p1, p2, t1, t2, t)
    a3 = _lerp(p2, p3, t2, t3, t)
    b1 = _lerp(a1, a2, t0, t2, t)
    b2 = _lerp(a2, a3, t1, t3, t)
    return _lerp(b1, b2, t1, t2, t)


def interpolate_keyframes(keys, frames):
    """Resample ``[(time, CameraPose), ...]`` (times 0..1) to `frames` poses.

    Positions follow a centripetal Catmull-Rom spline through the keys (end
    tangents from reflected phantom points), orientations shortest-arc
    piecewise slerp, intrinsics piecewise linear. Frame k sits at time
    k / (frames - 1).
    """
    keys = list(keys)
    if len(keys) < 2:
        raise TooFewKeys("need at least 2 keyframes")
    times = [float(t) for t, _ in keys]
    if times[0] != 0.0 or times[-1] != 1.0 or any(b <= a for a, b in zip(times, times[1:])):
        raise NonMonotoneTimes("key times must increase strictly from 0 to 1")
    if frames < 2:
        raise BadParameter("need at least 2 frames")
    P = [k.translation for _, k in keys]
    n = len(P)
    ext = [2 * P[0] - P[1]] + P + [2 * P[-1] - P[-2]]
    # hemisphere-consistent key orientations
    Q = [keys[0][1].rotation.copy()]
    for _, k in keys[1:]:
        q = k.rotation.copy()
        Q.append(-q if np.dot(q, Q[-1]) < 0 else q)
    Ks = [np.array(k.intrinsics) for _, k in keys]

    poses = []
    for f in range(frames):
        s = f / (frames - 1)
        i = min(int(np.searchsorted(times, s, side="right")) - 1, n - 2)
        if s == times[i] or s == times[i + 1]:
            j = i if s == times[i] else i + 1
            k = keys[j][1]
            poses.append(CameraPose(Q[j].copy(), k.translation.copy(), k.intrinsics))
            continue
        u = (s - times[i]) / (times[i + 1] - times[i])
        pos = _catmull_rom(ext[i], ext[i + 1], ext[i + 2], ext[i + 3], u)
        q = slerp(Q[i], Q[i + 1], u)
        K = (1 - u) * Ks[i] + u * Ks[i + 1]
        poses.append(CameraPose(q, pos, K))
    # keep consecutive frames in one hemisphere
    for a, b in zip(poses, poses[1:]):
        if np.dot(a.rotation, b.rotation) < 0:
            b.rotation = -b.rotation
    return CameraTrajectory(poses)


# -- text format -------------------------------------------------------------

def format_trajectory(traj):
    lines = ["# k tx ty tz qw qx qy qz fx fy cx cy"]
    for k, p in enumerate(traj.poses):
        vals = [*p.translation, *p.rotation, *p.intrinsics]
        lines.append(" ".join([str(k)] + [repr(float(v)) for v in vals]))
    return "\n".join(lines) + "\n"


def save_trajectory(traj, path):
    with open(path, "w") as fh:
        fh.write(format_trajectory(traj))


def parse_trajectory(text, source="<string>"):
    poses = []
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 12:
            raise FormatError(f"{source}:{ln}: expected 12 fields, got {len(parts)}")
        try:
            k = int(parts[0])
            v = [float(x) for x in parts[1:]]
        except ValueError:
            raise FormatError(f"{source}:{ln}: non-numeric field") from None
        if k != len(poses):
            raise FormatError(f"{source}:{ln}: frame index {k}, expected {len(poses)}")
        q = np.array(v[3:7])
        norm = np.linalg.norm(q)
        if not abs(norm - 1.0) < 1e-6:
            raise FormatError(f"{source}:{ln}: quaternion is not unit norm")
        poses.append(CameraPose(q / norm if abs(norm - 1.0) > 1e-9 else q, v[0:3], v[7:11]))
    if not poses:
        raise FormatError(f"{source}: no poses")
    return CameraTrajectory(poses)


def load_trajectory(path):
    with open(path) as fh:
        return parse_trajectory(fh.read(), str(path))
