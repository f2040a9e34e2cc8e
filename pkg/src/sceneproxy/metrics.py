"""Control-fidelity metrics: Sim(3)-aligned camera errors, scale-invariant
lighting error and its temporal spread, and per-object mask IoU."""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .envlight import EnvMap, load_envmap, solid_angle_weights
from .errors import (
    DegenerateConfiguration,
    DimensionMismatch,
    FormatError,
    LengthMismatch,
    TooFewFrames,
    TooFewPoints,
)
from .geometry import matrix_to_quat, quat_to_matrix


@dataclass(frozen=True)
class Sim3Transform:
    scale: float
    rotation: np.ndarray     # unit quaternion, wxyz
    translation: np.ndarray

    @property
    def matrix3(self):
        return quat_to_matrix(self.rotation)

    def apply(self, points):
        return self.scale * np.asarray(points, dtype=float) @ self.matrix3.T + self.translation


@dataclass(frozen=True)
class TrajectoryMetrics:
    ate: float
    rpe_t: float
    rpe_r: float


def umeyama_sim3(pred, gt):
    """Least-squares (s, R, t) minimizing sum |s R p_i + t - g_i|^2."""
    P = np.asarray(pred, dtype=float)
    G = np.asarray(gt, dtype=float)
    if P.shape != G.shape or P.ndim != 2 or P.shape[1] != 3:
        raise LengthMismatch(f"point sets differ in shape: {P.shape} vs {G.shape}")
    if len(P) < 3:
        raise TooFewPoints("Sim(3) alignment needs at least 3 points")
    mp, mg = P.mean(axis=0), G.mean(axis=0)
    Pc, Gc = P - mp, G - mg
    var_p = float(np.mean(np.sum(Pc * Pc, axis=1)))
    if not var_p > 1e-300:
        raise DegenerateConfiguration("predicted points are all coincident")
    cov = Gc.T @ Pc / len(P)
    U, D, Vt = np.linalg.svd(cov)
    S = np.ones(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2] = -1.0
    R = U @ np.diag(S) @ Vt
    s = float(np.sum(D * S)) / var_p
    if not s > 0:
        raise DegenerateConfiguration("alignment scale is not positive")
    return Sim3Transform(s, matrix_to_quat(R), mg - s * R @ mp)


def _centers(traj):
    return np.array([p.translation for p in traj.poses])


def _check_pair(pred, gt, minimum):
    if len(pred.poses) != len(gt.poses):
        raise LengthMismatch(f"{len(pred.poses)} predicted vs {len(gt.poses)} reference frames")
    if len(gt.poses) < minimum:
        raise TooFewFrames(f"need at least {minimum} frames")


def compute_ate(pred, gt):
    """100 x RMSE of camera centers after Sim(3) alignment of pred onto gt."""
    _check_pair(pred, gt, 3)
    P, G = _centers(pred), _centers(gt)
    aligned = umeyama_sim3(P, G).apply(P)
    return 100.0 * math.sqrt(float(np.mean(np.sum((aligned - G) ** 2, axis=1))))


def _pose_matrix(q, t):
    T = np.eye(4)
    T[:3, :3] = quat_to_matrix(q)
    T[:3, 3] = t
    return T


def rotation_angle(R):
    """Angle of a rotation matrix in radians, via its quaternion."""
    q = matrix_to_quat(R)
    return 2.0 * math.atan2(float(np.linalg.norm(q[1:])), abs(float(q[0])))


def compute_rpe(pred, gt, step=1):
    """(rpe_t x100, rpe_r in degrees) averaged over frame pairs (i, i+step);
    pred translations are first multiplied by the Umeyama scale."""
    _check_pair(pred, gt, step + 1)
    P, G = _centers(pred), _centers(gt)
    try:
        s = umeyama_sim3(P, G).scale if len(P) >= 3 else 1.0
    except DegenerateConfiguration:
        s = 1.0
    Pm = [_pose_matrix(p.rotation, s * p.translation) for p in pred.poses]
    Gm = [_pose_matrix(g.rotation, g.translation) for g in gt.poses]
    ts, rs = [], []
    for i in range(len(Pm) - step):
        rel_g = np.linalg.inv(Gm[i]) @ Gm[i + step]
        rel_p = np.linalg.inv(Pm[i]) @ Pm[i + step]
        E = np.linalg.inv(rel_g) @ rel_p
        ts.append(float(np.linalg.norm(E[:3, 3])))
        rs.append(math.degrees(rotation_angle(E[:3, :3])))
    return 100.0 * float(np.mean(ts)), float(np.mean(rs))


def evaluate_trajectory(pred, gt, step=1):
    rpe_t, rpe_r = compute_rpe(pred, gt, step)
    return TrajectoryMetrics(compute_ate(pred, gt), rpe_t, rpe_r)


# -- lighting ----------------------------------------------------------------------

def _pixels(env):
    return np.asarray(env.pixels if isinstance(env, EnvMap) else env, dtype=np.float64)


def _si_terms(p, g):
    w = solid_angle_weights(p.shape[0])[:, None, None] * np.ones_like(p)
    return w, float(np.sum(w * p * g)), float(np.sum(w * p * p))


def _si_value(p, g, w, s):
    return float(np.sum(w * (s * p - g) ** 2) / np.sum(w))


def optimal_scale(pred, gt):
    p, g = _pixels(pred), _pixels(gt)
    _, pg, pp = _si_terms(p, g)
    return max(pg / pp, 0.0) if pp > 0 else 0.0


def si_mse(pred, gt):
    """Solid-angle weighted MSE after the best non-negative rescale of pred."""
    p, g = _pixels(pred), _pixels(gt)
    if p.shape != g.shape:
        raise DimensionMismatch(f"env maps differ in size: {p.shape} vs {g.shape}")
    w, pg, pp = _si_terms(p, g)
    s = max(pg / pp, 0.0) if pp > 0 else 0.0
    return _si_value(p, g, w, s)


def si_mse_sequence(preds, gts, mode="per_frame"):
    """Per-frame SI-MSE values. ``per_sequence`` shares one scale over all
    frames instead of fitting one per frame."""
    preds, gts = [_pixels(p) for p in preds], [_pixels(g) for g in gts]
    if len(preds) != len(gts):
        raise LengthMismatch(f"{len(preds)} predicted vs {len(gts)} reference maps")
    if mode == "per_frame":
        return [si_mse(p, g) for p, g in zip(preds, gts)]
    if mode != "per_sequence":
        raise ValueError(f"unknown SI-MSE mode {mode!r}")
    for p, g in zip(preds, gts):
        if p.shape != g.shape:
            raise DimensionMismatch("env maps differ in size")
    terms = [_si_terms(p, g) for p, g in zip(preds, gts)]
    pg = sum(t[1] for t in terms)
    pp = sum(t[2] for t in terms)
    s = max(pg / pp, 0.0) if pp > 0 else 0.0
    return [_si_value(p, g, t[0], s) for p, g, t in zip(preds, gts, terms)]


def lighting_instability(values):
    """Population standard deviation of per-frame errors."""
    v = np.asarray(list(values), dtype=np.float64)
    if len(v) < 2:
        raise TooFewFrames("instability needs at least 2 frames")
    return float(np.std(v))


# -- layout ------------------------------------------------------------------------

def compute_miou(pred, gt):
    """Mean IoU over (frame, object id) pairs; ids are taken from either
    sequence, background 0 excluded."""
    P, G = np.asarray(pred), np.asarray(gt)
    if P.shape != G.shape:
        raise DimensionMismatch(f"mask sequences differ in shape: {P.shape} vs {G.shape}")
    if P.ndim == 2:
        P, G = P[None], G[None]
    ious = []
    for p, g in zip(P, G):
        for k in np.union1d(np.unique(p), np.unique(g)):
            if k == 0:
                continue
            a, b = p == k, g == k
            union = np.count_nonzero(a | b)
            if union:
                ious.append(np.count_nonzero(a & b) / union)
    return float(np.mean(ious)) if ious else 1.0


def save_mask(mask, path):
    mask = np.asarray(mask)
    if mask.min(initial=0) < 0 or mask.max(initial=0) > 65535:
        raise ValueError("mask ids must fit in 16 bits")
    Image.fromarray(mask.astype(np.uint16)).save(path)


def load_mask(path):
    with Image.open(path) as im:
        if im.mode not in ("I;16", "I;16B", "I", "L"):
            raise FormatError(f"{path}: expected a 16-bit grayscale mask, got mode {im.mode}")
        return np.asarray(im).astype(np.int64)


def load_mask_sequence(directory):
    files = sorted(Path(directory).glob("frame_*.png"))
    if not files:
        raise FormatError(f"{directory}: no frame_*.png masks")
    return np.stack([load_mask(f) for f in files])


def load_env_sequence(directory):
    d = Path(directory)
    files = sorted(f for f in d.glob("frame_*") if f.suffix in (".lenv", ".hdr"))
    if not files:
        raise FormatError(f"{directory}: no frame_* env maps")
    return [load_envmap(f) for f in files]


# -- report ------------------------------------------------------------------------

REPORT_KEYS = ("ate", "rpe_t", "rpe_r", "lighting_error", "lighting_instability", "miou")


def write_report(directory, summary, per_frame=None):
    """``report.json`` with every metric key (null if not computed) and an
    optional ``per_frame.csv``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    out = {k: summary.get(k) for k in REPORT_KEYS}
    paths = [d / "report.json"]
    paths[0].write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    if per_frame:
        cols = sorted({k for row in per_frame for k in row if k != "frame"})
        paths.append(d / "per_frame.csv")
        with open(paths[1], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frame", *cols])
            for i, row in enumerate(per_frame):
                w.writerow([row.get("frame", i), *[row.get(c, "") for c in cols]])
    return paths

