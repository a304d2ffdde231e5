"""Per-frame animation of a baked avatar: corrective blendshapes + LBS.

The hot path is allocation-free in steady state in the sense that matters
for throughput: no per-point buffer is ever allocated per frame. All
M-sized arrays live in the caller-owned :class:`PosedGaussianSet`, and one
fused compiled kernel applies blendshape offsets, skinning, rotation
blending, and quaternion composition in a single pass over the bases. Only
constant-size per-joint temporaries (a few hundred bytes) are created per
call.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import _kernels
from .asset import CanonicalGaussianAvatar, DrivingFrame
from .errors import InvalidParamsError, StreamParseError
from .rig import axis_angle_to_matrix, joint_world_transforms

_I3 = np.eye(3)


class PosedGaussianSet:
    """World-space Gaussians for one frame, plus reusable scratch buffers.

    ``positions`` and ``rotations`` are rewritten by every ``animate`` call;
    ``scales``, ``colors`` and ``opacities`` reference the asset's arrays
    (they are pose-independent).
    """

    def __init__(self, avatar: CanonicalGaussianAvatar):
        M = avatar.num_points
        self.source = avatar
        self.positions = np.empty((M, 3), dtype=np.float32)
        self.rotations = np.empty((M, 4), dtype=np.float32)
        self.scales = avatar.scales
        self.colors = avatar.colors
        self.opacities = avatar.opacities
        np.copyto(self.positions, avatar.positions)
        np.copyto(self.rotations, avatar.rotations)

        self._phi32 = np.zeros(avatar.n_expr, dtype=np.float32)
        self._feat32 = np.zeros(avatar.n_posecorr, dtype=np.float32)
        self._transforms32 = np.zeros((avatar.num_joints, 12), dtype=np.float32)
        self._joints64 = avatar.joints.astype(np.float64)

    @classmethod
    def for_avatar(cls, avatar: CanonicalGaussianAvatar) -> "PosedGaussianSet":
        return cls(avatar)


def animate(
    avatar: CanonicalGaussianAvatar,
    theta: np.ndarray,
    phi: np.ndarray,
    out: PosedGaussianSet,
) -> None:
    """Pose the canonical avatar for one frame, writing into ``out``.

    positions = LBS(Gbar + pose_basis . vec(R(theta) - I) + expr_basis . phi,
    joints, theta, weights); each point's rotation is the re-orthonormalized
    blended skinning rotation composed with its canonical rotation.
    """
    theta = np.asarray(theta, dtype=np.float64).ravel()
    phi = np.asarray(phi, dtype=np.float64).ravel()
    J = avatar.num_joints
    if theta.shape[0] != 3 * J:
        raise InvalidParamsError(f"theta length {theta.shape[0]} != 3*J = {3 * J}")
    if phi.shape[0] != avatar.n_expr:
        raise InvalidParamsError(f"phi length {phi.shape[0]} != n_expr = {avatar.n_expr}")
    if out.source is not avatar:
        raise InvalidParamsError("output buffers belong to a different avatar")

    transforms = joint_world_transforms(out._joints64, avatar.parents, theta)
    np.copyto(out._transforms32, transforms[:, :3, :].reshape(J, 12))

    rots = axis_angle_to_matrix(theta.reshape(J, 3))
    np.copyto(out._feat32, (rots[1:] - _I3).reshape(-1))
    np.copyto(out._phi32, phi)

    _kernels.animate_points(
        avatar.positions, avatar.expr_basis, avatar.pose_basis,
        out._phi32, out._feat32, avatar.skinning_weights,
        out._transforms32, avatar.rotations,
        out.positions, out.rotations,
    )


@dataclass
class SequenceStats:
    frames: int
    total_s: float
    mean_ms: float
    p95_ms: float
    steps_per_sec: float

    def as_dict(self) -> dict:
        return {
            "frames": self.frames,
            "total_s": self.total_s,
            "mean_ms": self.mean_ms,
            "p95_ms": self.p95_ms,
            "steps_per_sec": self.steps_per_sec,
        }


def animate_sequence(
    avatar: CanonicalGaussianAvatar,
    frames: Iterable[DrivingFrame],
    sink: Callable[[int, DrivingFrame, PosedGaussianSet], None] | None = None,
    out: PosedGaussianSet | None = None,
) -> SequenceStats:
    """Animate every frame of a driving stream, timing each step.

    ``sink`` (if given) sees each posed frame; the same output buffer is
    reused, so a sink must consume it before returning. Stream parse errors
    from a lazy reader propagate with their line numbers.
    """
    out = out or PosedGaussianSet.for_avatar(avatar)
    times = []
    count = 0
    for i, frame in enumerate(frames):
        if not isinstance(frame, DrivingFrame):
            raise StreamParseError(i + 1, f"expected DrivingFrame, got {type(frame).__name__}")
        t0 = time.perf_counter()
        animate(avatar, frame.theta, frame.phi, out)
        times.append(time.perf_counter() - t0)
        count += 1
        if sink is not None:
            sink(i, frame, out)
    if count == 0:
        return SequenceStats(0, 0.0, 0.0, 0.0, 0.0)
    arr = np.asarray(times)
    total = float(arr.sum())
    return SequenceStats(
        frames=count,
        total_s=total,
        mean_ms=float(arr.mean() * 1e3),
        p95_ms=float(np.percentile(arr, 95) * 1e3),
        steps_per_sec=count / total if total > 0 else float("inf"),
    )
