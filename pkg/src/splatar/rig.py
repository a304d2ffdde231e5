"""FLAME-compatible rig: template mesh, blendshape bases, joints, skinning.

Reference implementations here are pure float64 functions; the per-frame
fast path in :mod:`splatar.animator` is validated against them. Coefficient
vectors (shape beta, pose theta as per-joint axis-angle, expression phi) are
plain float arrays whose lengths must match the rig's basis widths.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import container
from .errors import InvalidParamsError, RigValidationError

_WEIGHT_TOL = 1e-6


@dataclass(frozen=True)
class RigTemplate:
    """Template mesh plus animation data.

    Attributes:
        vertices: (V, 3) canonical positions, meters.
        faces: (F, 3) vertex-index triples.
        shape_basis: (V, 3, n_shape) offset per unit shape coefficient.
        expr_basis: (V, 3, n_expr) offset per unit expression coefficient.
        pose_basis: (V, 3, 9*(J-1)) pose-corrective offsets, one column per
            element of the flattened non-root relative rotations minus identity.
        joint_regressor: (J, V) sparse-ish matrix, rows sum to 1.
        skinning_weights: (V, J) nonnegative rows summing to 1.
        parents: (J,) parent joint indices; parents[0] is -1 (root).
    """

    vertices: np.ndarray
    faces: np.ndarray
    shape_basis: np.ndarray
    expr_basis: np.ndarray
    pose_basis: np.ndarray
    joint_regressor: np.ndarray
    skinning_weights: np.ndarray
    parents: np.ndarray

    def __post_init__(self):
        f8 = lambda a: np.ascontiguousarray(a, dtype=np.float64)
        object.__setattr__(self, "vertices", f8(self.vertices))
        object.__setattr__(self, "faces", np.ascontiguousarray(self.faces, dtype=np.int64))
        object.__setattr__(self, "shape_basis", f8(self.shape_basis))
        object.__setattr__(self, "expr_basis", f8(self.expr_basis))
        object.__setattr__(self, "pose_basis", f8(self.pose_basis))
        object.__setattr__(self, "joint_regressor", f8(self.joint_regressor))
        object.__setattr__(self, "skinning_weights", f8(self.skinning_weights))
        object.__setattr__(self, "parents", np.ascontiguousarray(self.parents, dtype=np.int64))
        self._validate()
        for name in (
            "vertices", "faces", "shape_basis", "expr_basis", "pose_basis",
            "joint_regressor", "skinning_weights", "parents",
        ):
            getattr(self, name).flags.writeable = False

    def _validate(self):
        V = self.vertices.shape[0]
        J = self.joint_regressor.shape[0]
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise RigValidationError("vertices must be (V, 3)")
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= V):
            raise RigValidationError("face index out of range")
        for name in ("shape_basis", "expr_basis", "pose_basis"):
            b = getattr(self, name)
            if b.ndim != 3 or b.shape[0] != V or b.shape[1] != 3:
                raise RigValidationError(f"{name} must be (V, 3, n)")
        if self.pose_basis.shape[2] != 9 * (J - 1):
            raise RigValidationError(
                f"pose_basis width {self.pose_basis.shape[2]} != 9*(J-1) = {9 * (J - 1)}"
            )
        if self.joint_regressor.shape != (J, V):
            raise RigValidationError("joint_regressor must be (J, V)")
        row_sums = self.joint_regressor.sum(axis=1)
        if not np.allclose(row_sums, 1.0, atol=_WEIGHT_TOL, rtol=0):
            raise RigValidationError("joint_regressor rows must sum to 1")
        if self.skinning_weights.shape != (V, J):
            raise RigValidationError("skinning_weights must be (V, J)")
        if self.skinning_weights.min() < 0:
            raise RigValidationError("skinning_weights must be nonnegative")
        if not np.allclose(self.skinning_weights.sum(axis=1), 1.0, atol=_WEIGHT_TOL, rtol=0):
            raise RigValidationError("skinning_weights rows must sum to 1")
        if self.parents.shape != (J,) or self.parents[0] >= 0:
            raise RigValidationError("parents[0] must be negative (root joint)")
        # parent[i] < i gives a topologically ordered tree rooted at joint 0
        if J > 1 and not np.all((self.parents[1:] >= 0) & (self.parents[1:] < np.arange(1, J))):
            raise RigValidationError("parents must form a tree: 0 <= parents[i] < i")

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_joints(self) -> int:
        return self.joint_regressor.shape[0]

    @property
    def n_shape(self) -> int:
        return self.shape_basis.shape[2]

    @property
    def n_expr(self) -> int:
        return self.expr_basis.shape[2]


def axis_angle_to_matrix(axis_angle: np.ndarray) -> np.ndarray:
    """Rodrigues formula for a batch of axis-angle vectors.

    Args:
        axis_angle: (J, 3) rotation vectors (angle = norm, radians).

    Returns:
        (J, 3, 3) rotation matrices; exactly identity for zero vectors.
    """
    aa = np.asarray(axis_angle, dtype=np.float64).reshape(-1, 3)
    J = aa.shape[0]
    angle = np.linalg.norm(aa, axis=1)
    out = np.tile(np.eye(3), (J, 1, 1))
    nz = angle > 0.0
    if not np.any(nz):
        return out
    axis = aa[nz] / angle[nz, None]
    x, y, z = axis[:, 0], axis[:, 1], axis[:, 2]
    zeros = np.zeros_like(x)
    K = np.stack(
        [zeros, -z, y, z, zeros, -x, -y, x, zeros], axis=1
    ).reshape(-1, 3, 3)
    s = np.sin(angle[nz])[:, None, None]
    c = (1.0 - np.cos(angle[nz]))[:, None, None]
    out[nz] = np.eye(3) + s * K + c * (K @ K)
    return out


def basis_offsets(basis: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Linear blendshape offsets: (V, 3, n) basis times length-n coefficients.

    Shared by shape and expression blendshapes (and by pose correctives once
    theta is mapped to its rotation feature vector).
    """
    coeffs = np.asarray(coeffs, dtype=np.float64).ravel()
    if coeffs.shape[0] != basis.shape[2]:
        raise InvalidParamsError(
            f"coefficient length {coeffs.shape[0]} != basis width {basis.shape[2]}"
        )
    return np.tensordot(basis, coeffs, axes=([2], [0]))


def apply_shape(rig: RigTemplate, beta: np.ndarray) -> np.ndarray:
    """Template vertices plus shape-blendshape offsets; pure function."""
    return rig.vertices + basis_offsets(rig.shape_basis, beta)


def regress_joints(rig: RigTemplate, shaped_vertices: np.ndarray) -> np.ndarray:
    """Joint positions regressed from shaped vertices: (J, 3)."""
    shaped_vertices = np.asarray(shaped_vertices, dtype=np.float64)
    if shaped_vertices.shape != (rig.num_vertices, 3):
        raise InvalidParamsError(
            f"shaped_vertices shape {shaped_vertices.shape} != ({rig.num_vertices}, 3)"
        )
    return rig.joint_regressor @ shaped_vertices


def pose_feature(theta: np.ndarray, num_joints: int) -> np.ndarray:
    """Flattened (R - I) of the non-root relative joint rotations: (9*(J-1),)."""
    theta = np.asarray(theta, dtype=np.float64).ravel()
    if theta.shape[0] != 3 * num_joints:
        raise InvalidParamsError(f"theta length {theta.shape[0]} != 3*J = {3 * num_joints}")
    rots = axis_angle_to_matrix(theta.reshape(num_joints, 3))
    return (rots[1:] - np.eye(3)).reshape(-1)


def pose_correctives(rig: RigTemplate, theta: np.ndarray) -> np.ndarray:
    """Pose-corrective vertex offsets for per-joint axis-angle theta."""
    feat = pose_feature(theta, rig.num_joints)
    return np.tensordot(rig.pose_basis, feat, axes=([2], [0]))


def joint_world_transforms(
    joints: np.ndarray, parents: np.ndarray, theta: np.ndarray
) -> np.ndarray:
    """Per-joint skinning transforms composed down the parent chain.

    Each returned 4x4 maps rest-space points so that joint i itself lands on
    its posed position (the rest-pose offset is folded into the translation).

    Args:
        joints: (J, 3) rest joint positions.
        parents: (J,) parent indices, parents[0] < 0.
        theta: (3J,) axis-angle per joint.

    Returns:
        (J, 4, 4) float64 transforms.
    """
    joints = np.asarray(joints, dtype=np.float64)
    J = joints.shape[0]
    theta = np.asarray(theta, dtype=np.float64).ravel()
    if theta.shape[0] != 3 * J:
        raise InvalidParamsError(f"theta length {theta.shape[0]} != 3*J = {3 * J}")
    rots = axis_angle_to_matrix(theta.reshape(J, 3))

    world = np.zeros((J, 4, 4))
    for i in range(J):
        local = np.eye(4)
        local[:3, :3] = rots[i]
        if i == 0:
            local[:3, 3] = joints[0]
            world[0] = local
        else:
            local[:3, 3] = joints[i] - joints[parents[i]]
            world[i] = world[parents[i]] @ local

    out = world.copy()
    # fold the rest-pose joint position into the translation so that
    # out[i] @ [joints[i], 1] equals the posed joint position
    out[:, :3, 3] -= np.einsum("jab,jb->ja", world[:, :3, :3], joints)
    return out


def linear_blend_skin(
    vertices: np.ndarray,
    joints: np.ndarray,
    parents: np.ndarray,
    theta: np.ndarray,
    weights: np.ndarray,
) -> np.ndarray:
    """Weight-blended rigid skinning of vertices around a joint tree.

    Args:
        vertices: (V, 3) points to pose (template plus blendshape offsets).
        joints: (J, 3) rest joints.
        parents: (J,) tree.
        theta: (3J,) axis-angle per joint.
        weights: (V, J) rows summing to 1.

    Returns:
        (V, 3) posed points; pure function.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    transforms = joint_world_transforms(joints, parents, theta)
    # blend matrices per vertex, then apply: v' = B[:, :3, :3] @ v + B[:, :3, 3]
    blended = np.tensordot(weights, transforms, axes=([1], [0]))
    return np.einsum("vab,vb->va", blended[:, :3, :3], vertices) + blended[:, :3, 3]


# -- rig file I/O ------------------------------------------------------------

_RIG_SECTIONS = (
    "vertices", "faces", "shape_basis", "expr_basis", "pose_basis",
    "joint_regressor", "skinning_weights", "parents",
)


def save_rig(rig: RigTemplate, path: str | Path) -> None:
    container.write_container(path, {name: getattr(rig, name) for name in _RIG_SECTIONS})


def load_rig(path: str | Path) -> RigTemplate:
    """Load a rig from the binary container or from a JSON interchange dump
    of FLAME-exported arrays (sniffed by magic bytes)."""
    path = Path(path)
    with open(path, "rb") as f:
        head = f.read(4)
    if head == container.MAGIC:
        sections = container.read_container(path)
        missing = [n for n in _RIG_SECTIONS if n not in sections]
        if missing:
            raise RigValidationError(f"rig container missing sections: {missing}")
        return RigTemplate(**{n: sections[n] for n in _RIG_SECTIONS})
    return import_rig_json(path)


def import_rig_json(path: str | Path) -> RigTemplate:
    """Import from a JSON dump with the same field names as RigTemplate
    (nested lists, as produced by exporting FLAME arrays)."""
    with open(path) as f:
        data = json.load(f)
    try:
        return RigTemplate(**{name: np.asarray(data[name]) for name in _RIG_SECTIONS})
    except KeyError as e:
        raise RigValidationError(f"rig JSON missing field {e.args[0]!r}") from e
