"""Synthetic rigs, meshes, avatars, and driving streams.

Used by the demos, the benchmark, and the test suite; nothing here is part
of the per-frame runtime. Generated rigs are structurally FLAME-like
(topologically closed head blob, joint chain, normalized weights) but carry
random bases, so no real identity data is required anywhere.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import ConvexHull

from .asset import CanonicalGaussianAvatar, DrivingFrame
from .render import Camera
from .rig import RigTemplate
from .subdivision import AttributedMesh

FLAME_LIKE_JOINTS = 5        # global + neck + jaw + two eyes
FLAME_LIKE_N_EXPR = 100
FLAME_LIKE_N_SHAPE = 30


def make_closed_mesh(rng: np.random.Generator, n_points: int = 12) -> tuple:
    """Random closed triangulated surface (convex hull of a random sphere
    cloud): every edge borders exactly two faces."""
    pts = rng.standard_normal((n_points, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts *= 0.1 * (1.0 + 0.2 * rng.random((n_points, 1)))
    hull = ConvexHull(pts)
    verts = pts[hull.vertices]
    remap = {old: new for new, old in enumerate(hull.vertices)}
    faces = np.array([[remap[i] for i in simplex] for simplex in hull.simplices])
    return verts, faces


def make_mini_rig(
    rng: np.random.Generator,
    n_points: int = 12,
    joints: int = 3,
    n_shape: int = 4,
    n_expr: int = 5,
) -> RigTemplate:
    """Small random rig with a joint chain; bases have centimeter-scale
    columns so posed outputs stay in a plausible head-sized range."""
    verts, faces = make_closed_mesh(rng, n_points)
    V = verts.shape[0]
    shape_basis = rng.standard_normal((V, 3, n_shape)) * 0.01
    expr_basis = rng.standard_normal((V, 3, n_expr)) * 0.01
    pose_basis = rng.standard_normal((V, 3, 9 * (joints - 1))) * 0.005

    regressor = rng.random((joints, V)) ** 4
    regressor /= regressor.sum(axis=1, keepdims=True)
    weights = rng.random((V, joints)) ** 2
    weights /= weights.sum(axis=1, keepdims=True)
    parents = np.arange(joints) - 1
    return RigTemplate(
        vertices=verts,
        faces=faces,
        shape_basis=shape_basis,
        expr_basis=expr_basis,
        pose_basis=pose_basis,
        joint_regressor=regressor,
        skinning_weights=weights,
        parents=parents,
    )


def make_attributed_mesh(rng: np.random.Generator, n_points: int = 12) -> AttributedMesh:
    verts, faces = make_closed_mesh(rng, n_points)
    V = verts.shape[0]
    weights = rng.random((V, 3))
    weights /= weights.sum(axis=1, keepdims=True)
    channels = {
        "skinning_weights": weights,
        "feature": rng.standard_normal((V, 4)),
    }
    return AttributedMesh(verts, faces, channels, frozenset({"skinning_weights"}))


def make_avatar(
    rng: np.random.Generator,
    num_points: int,
    joints: int = FLAME_LIKE_JOINTS,
    n_expr: int = 10,
    radius: float = 0.12,
    opacity_range: tuple = (0.05, 0.95),
) -> CanonicalGaussianAvatar:
    """Direct synthetic asset with an exact point count (no baking)."""
    M = num_points
    lo, hi = opacity_range
    pos = rng.standard_normal((M, 3))
    pos = pos / np.linalg.norm(pos, axis=1, keepdims=True) * radius
    pos *= 1.0 + 0.15 * rng.random((M, 1))
    quats = rng.standard_normal((M, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    weights = rng.random((M, joints)) ** 2
    weights /= weights.sum(axis=1, keepdims=True)
    joint_pos = rng.standard_normal((joints, 3)) * 0.05
    # typical inter-point spacing on a sphere of that radius
    spacing = radius * np.sqrt(16.0 / M)
    return CanonicalGaussianAvatar(
        positions=pos,
        colors=rng.random((M, 3)),
        opacities=lo + (hi - lo) * rng.random(M),
        scales=spacing * (0.5 + rng.random((M, 3))),
        rotations=quats,
        expr_basis=rng.standard_normal((M, 3, n_expr)) * 0.01,
        pose_basis=rng.standard_normal((M, 3, 9 * (joints - 1))) * 0.005,
        skinning_weights=weights,
        joints=joint_pos,
        parents=np.arange(joints) - 1,
    )


def make_bench_avatar(
    num_points: int = 81424,
    n_expr: int = FLAME_LIKE_N_EXPR,
    joints: int = FLAME_LIKE_JOINTS,
    seed: int = 0,
) -> CanonicalGaussianAvatar:
    """Throughput-benchmark asset with FLAME-like animation widths
    (J joints, 100 expression coefficients, 9*(J-1) pose correctives) and
    near-opaque surface splats like a baked asset (bake defaults to 0.9)."""
    return make_avatar(
        np.random.default_rng(seed), num_points, joints, n_expr,
        opacity_range=(0.85, 0.95),
    )


def make_camera(
    width: int,
    height: int,
    distance: float = 0.8,
    azimuth: float = 0.0,
    elevation: float = 0.0,
    focal_scale: float = 1.4,
) -> Camera:
    """Orbit camera looking at the origin from (azimuth, elevation) radians;
    +z in camera space points at the scene."""
    ca, sa = np.cos(azimuth), np.sin(azimuth)
    ce, se = np.cos(elevation), np.sin(elevation)
    eye = distance * np.array([sa * ce, se, ca * ce])
    fwd = -eye / np.linalg.norm(eye)
    right = np.cross(np.array([0.0, 1.0, 0.0]), fwd)
    nr = np.linalg.norm(right)
    right = np.array([1.0, 0.0, 0.0]) if nr < 1e-9 else right / nr
    up = np.cross(fwd, right)
    # rows of R map world to camera axes (x right, y down-ish, z forward)
    R = np.stack([right, -up, fwd])
    t = -R @ eye
    w2c = np.eye(4)
    w2c[:3, :3] = R
    w2c[:3, 3] = t
    f = focal_scale * min(width, height)
    return Camera(
        fx=f, fy=f, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        w2c=w2c, width=width, height=height,
    )


def make_driving_frames(
    rng: np.random.Generator,
    count: int,
    n_expr: int,
    joints: int,
    width: int = 256,
    height: int = 256,
    pose_amp: float = 0.15,
    expr_amp: float = 1.0,
) -> list:
    """Random but bounded driving frames with a slow camera orbit."""
    frames = []
    for i in range(count):
        theta = rng.standard_normal(3 * joints) * pose_amp
        phi = rng.standard_normal(n_expr) * expr_amp
        cam = make_camera(width, height, azimuth=0.4 * np.sin(2 * np.pi * i / max(count, 1)))
        frames.append(DrivingFrame(theta=theta, phi=phi, camera=cam))
    return frames
