"""Canonical Gaussian avatar: the baked, frozen per-identity asset.

Baking runs once in float64 (shape blendshapes, joint regression, subdivision
of the mesh and of every animation attribute, offset add) and freezes the
result as float32 arrays — everything the per-frame animator needs, with no
reference back to the rig. Assets serialize to the section-table container
(see ``docs/format.md``); ``load(save(a))`` is bit-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import container
from .errors import AssetInvariantError, BakeError, SectionFormatError, StreamParseError
from .render import Camera
from .rig import RigTemplate, apply_shape, regress_joints
from .subdivision import AttributedMesh, subdivide, unique_edges

SECTION_ORDER = (
    "positions", "colors", "opacities", "scales", "rotations",
    "expr_basis", "pose_basis", "skinning_weights", "joints", "parents",
)

DEFAULT_COLOR = 0.5
DEFAULT_OPACITY = 0.9


@dataclass(frozen=True)
class CanonicalGaussianAvatar:
    """Per-point Gaussian attributes plus animation attributes, canonical space.

    Per-point arrays share the leading dimension M; ``joints`` are the
    pre-regressed rest joints so animation never touches the rig again.
    """

    positions: np.ndarray         # (M, 3) meters
    colors: np.ndarray            # (M, 3) in [0, 1]
    opacities: np.ndarray         # (M,) in (0, 1)
    scales: np.ndarray            # (M, 3) meters, > 0
    rotations: np.ndarray         # (M, 4) unit quaternions, (w, x, y, z)
    expr_basis: np.ndarray        # (M, 3, n_expr)
    pose_basis: np.ndarray        # (M, 3, n_posecorr)
    skinning_weights: np.ndarray  # (M, J)
    joints: np.ndarray            # (J, 3)
    parents: np.ndarray           # (J,)

    def __post_init__(self):
        # arrays stay flag-writeable: the compiled kernels specialize badly
        # on readonly buffers. Immutability is by contract (frozen dataclass,
        # nothing in the package writes to an avatar after construction).
        for name in SECTION_ORDER:
            dtype = np.int32 if name == "parents" else np.float32
            object.__setattr__(
                self, name, np.ascontiguousarray(getattr(self, name), dtype=dtype)
            )

    @property
    def num_points(self) -> int:
        return self.positions.shape[0]

    @property
    def num_joints(self) -> int:
        return self.joints.shape[0]

    @property
    def n_expr(self) -> int:
        return self.expr_basis.shape[2]

    @property
    def n_posecorr(self) -> int:
        return self.pose_basis.shape[2]


@dataclass
class GaussianAttributes:
    """Optional per-point attributes supplied to ``bake`` (e.g. decoded by a
    reconstructor). Any field left as None falls back to bake defaults."""

    colors: np.ndarray | None = None
    opacities: np.ndarray | None = None
    scales: np.ndarray | None = None
    rotations: np.ndarray | None = None


@dataclass
class ValidationFinding:
    section: str
    message: str

    def as_dict(self) -> dict:
        return {"section": self.section, "message": self.message}


def validate(avatar: CanonicalGaussianAvatar) -> list[ValidationFinding]:
    """Check every avatar invariant; returns findings in deterministic
    (section) order. An empty list means the asset is valid."""
    findings: list[ValidationFinding] = []
    M = avatar.positions.shape[0]
    J = avatar.joints.shape[0]

    def bad(section, message):
        findings.append(ValidationFinding(section, message))

    if avatar.positions.ndim != 2 or avatar.positions.shape[1] != 3:
        bad("positions", f"expected (M, 3), got {avatar.positions.shape}")
    if not np.all(np.isfinite(avatar.positions)):
        bad("positions", "non-finite values")
    if avatar.colors.shape != (M, 3):
        bad("colors", f"expected ({M}, 3), got {avatar.colors.shape}")
    elif avatar.colors.size and (avatar.colors.min() < 0 or avatar.colors.max() > 1):
        bad("colors", "values outside [0, 1]")
    if avatar.opacities.shape != (M,):
        bad("opacities", f"expected ({M},), got {avatar.opacities.shape}")
    elif avatar.opacities.size and not np.all(
        (avatar.opacities > 0) & (avatar.opacities < 1)
    ):
        bad("opacities", "values outside open interval (0, 1)")
    if avatar.scales.shape != (M, 3):
        bad("scales", f"expected ({M}, 3), got {avatar.scales.shape}")
    elif avatar.scales.size and not np.all(avatar.scales > 0):
        bad("scales", "non-positive scale")
    if avatar.rotations.shape != (M, 4):
        bad("rotations", f"expected ({M}, 4), got {avatar.rotations.shape}")
    elif avatar.rotations.size:
        norms = np.linalg.norm(avatar.rotations.astype(np.float64), axis=1)
        if not np.allclose(norms, 1.0, atol=1e-6, rtol=0):
            bad("rotations", "quaternion norms deviate from 1 by more than 1e-6")
    if avatar.expr_basis.ndim != 3 or avatar.expr_basis.shape[:2] != (M, 3):
        bad("expr_basis", f"expected ({M}, 3, n_expr), got {avatar.expr_basis.shape}")
    if avatar.pose_basis.ndim != 3 or avatar.pose_basis.shape[:2] != (M, 3):
        bad("pose_basis", f"expected ({M}, 3, n_posecorr), got {avatar.pose_basis.shape}")
    elif avatar.pose_basis.shape[2] != 9 * (J - 1):
        bad("pose_basis", f"width {avatar.pose_basis.shape[2]} != 9*(J-1) = {9 * (J - 1)}")
    if avatar.skinning_weights.shape != (M, J):
        bad("skinning_weights", f"expected ({M}, {J}), got {avatar.skinning_weights.shape}")
    elif avatar.skinning_weights.size and not np.allclose(
        avatar.skinning_weights.astype(np.float64).sum(axis=1), 1.0, atol=1e-6, rtol=0
    ):
        bad("skinning_weights", "rows must sum to 1 within 1e-6")
    if avatar.joints.ndim != 2 or avatar.joints.shape[1] != 3:
        bad("joints", f"expected (J, 3), got {avatar.joints.shape}")
    if avatar.parents.shape != (J,):
        bad("parents", f"expected ({J},), got {avatar.parents.shape}")
    elif J and (
        avatar.parents[0] >= 0
        or (J > 1 and not np.all((avatar.parents[1:] >= 0) & (avatar.parents[1:] < np.arange(1, J))))
    ):
        bad("parents", "must form a tree: parents[0] < 0 and 0 <= parents[i] < i")
    return findings


def _mean_incident_edge_length(mesh: AttributedMesh) -> np.ndarray:
    """Per-vertex mean length of incident edges; drives the default scale."""
    edges = unique_edges(mesh.faces)
    if edges.shape[0] == 0:
        return np.full(mesh.num_vertices, 0.01)
    lengths = np.linalg.norm(mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1)
    total = np.zeros(mesh.num_vertices)
    count = np.zeros(mesh.num_vertices)
    np.add.at(total, edges[:, 0], lengths)
    np.add.at(total, edges[:, 1], lengths)
    np.add.at(count, edges[:, 0], 1.0)
    np.add.at(count, edges[:, 1], 1.0)
    mean = np.where(count > 0, total / np.maximum(count, 1.0), lengths.mean())
    return mean


def bake(
    rig: RigTemplate,
    beta: np.ndarray,
    iterations: int,
    offsets: np.ndarray | None = None,
    attributes: GaussianAttributes | None = None,
) -> CanonicalGaussianAvatar:
    """Run the once-per-identity precomputation and freeze the result.

    Shape blendshapes are applied at original resolution, joints regressed
    there too, then the mesh and every per-vertex animation channel are
    subdivided ``iterations`` times and the reconstruction offsets added.

    Args:
        rig: source rig.
        beta: shape coefficients, length rig.n_shape.
        iterations: midpoint subdivision passes (>= 0).
        offsets: (M, 3) canonical-space position offsets (post-subdivision
            count), or None for zero.
        attributes: optional per-point Gaussian attributes; defaults are
            mid-gray color, opacity 0.9, isotropic scale at half the mean
            incident edge length, identity rotation.

    Raises:
        BakeError: a supplied channel's row count does not match the
            post-subdivision point count.
    """
    shaped = apply_shape(rig, beta)
    joints = regress_joints(rig, shaped)
    V = rig.num_vertices
    channels = {
        "expr_basis": rig.expr_basis.reshape(V, -1),
        "pose_basis": rig.pose_basis.reshape(V, -1),
        "skinning_weights": rig.skinning_weights,
    }
    mesh = AttributedMesh(shaped, rig.faces, channels, frozenset({"skinning_weights"}))
    sub = subdivide(mesh, iterations)
    M = sub.num_vertices

    def checked(name, arr, shape):
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape != shape:
            raise BakeError(name, f"expected shape {shape}, got {arr.shape}")
        return arr

    if offsets is None:
        offsets = np.zeros((M, 3))
    offsets = checked("offsets", offsets, (M, 3))
    positions = sub.vertices + offsets

    attributes = attributes or GaussianAttributes()
    if attributes.colors is None:
        colors = np.full((M, 3), DEFAULT_COLOR)
    else:
        colors = checked("colors", attributes.colors, (M, 3))
    if attributes.opacities is None:
        opacities = np.full(M, DEFAULT_OPACITY)
    else:
        opacities = checked("opacities", attributes.opacities, (M,))
    if attributes.scales is None:
        iso = 0.5 * _mean_incident_edge_length(sub)
        scales = np.repeat(iso[:, None], 3, axis=1)
    else:
        scales = checked("scales", attributes.scales, (M, 3))
    if attributes.rotations is None:
        rotations = np.zeros((M, 4))
        rotations[:, 0] = 1.0
    else:
        rotations = checked("rotations", attributes.rotations, (M, 4))
        rotations = rotations / np.linalg.norm(rotations, axis=1, keepdims=True)

    return CanonicalGaussianAvatar(
        positions=positions,
        colors=colors,
        opacities=opacities,
        scales=scales,
        rotations=rotations,
        expr_basis=sub.channels["expr_basis"].reshape(M, 3, -1),
        pose_basis=sub.channels["pose_basis"].reshape(M, 3, -1),
        skinning_weights=sub.channels["skinning_weights"],
        joints=joints,
        parents=rig.parents,
    )


def save(avatar: CanonicalGaussianAvatar, path: str | Path) -> None:
    container.write_container(path, {name: getattr(avatar, name) for name in SECTION_ORDER})


def load(path: str | Path) -> CanonicalGaussianAvatar:
    """Read and fully validate an avatar; raises a distinct error naming the
    offending section on any format or invariant problem."""
    sections = container.read_container(path)
    missing = [n for n in SECTION_ORDER if n not in sections]
    if missing:
        raise SectionFormatError(missing[0], "required section missing")
    avatar = CanonicalGaussianAvatar(**{n: sections[n] for n in SECTION_ORDER})
    findings = validate(avatar)
    if findings:
        raise AssetInvariantError(findings[0].section, findings[0].message)
    return avatar


# -- driving stream ----------------------------------------------------------


@dataclass
class DrivingFrame:
    """One animation frame: pose theta (3 per joint), expression phi, camera."""

    theta: np.ndarray
    phi: np.ndarray
    camera: Camera

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64).ravel()
        self.phi = np.asarray(self.phi, dtype=np.float64).ravel()


def _parse_frame(obj: dict) -> DrivingFrame:
    cam = obj["camera"]
    w2c = np.asarray(cam["w2c"], dtype=np.float64)
    if w2c.size != 16:
        raise ValueError("camera.w2c must hold 16 floats (row-major 4x4)")
    return DrivingFrame(
        theta=np.asarray(obj["theta"], dtype=np.float64),
        phi=np.asarray(obj["phi"], dtype=np.float64),
        camera=Camera(
            fx=float(cam["fx"]),
            fy=float(cam["fy"]),
            cx=float(cam["cx"]),
            cy=float(cam["cy"]),
            w2c=w2c.reshape(4, 4),
            width=int(cam.get("width", 0)) or None,
            height=int(cam.get("height", 0)) or None,
        ),
    )


def read_driving_stream(path: str | Path) -> Iterator[DrivingFrame]:
    """Yield frames from a JSON Lines driving stream; a malformed line raises
    StreamParseError carrying its 1-based line number."""
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                yield _parse_frame(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise StreamParseError(lineno, str(e)) from e


def frame_to_json(frame: DrivingFrame) -> str:
    cam = frame.camera
    payload = {
        "theta": [float(v) for v in frame.theta],
        "phi": [float(v) for v in frame.phi],
        "camera": {
            "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
            "w2c": [float(v) for v in np.asarray(cam.w2c).reshape(-1)],
        },
    }
    return json.dumps(payload)


def write_driving_stream(path: str | Path, frames: Iterable[DrivingFrame]) -> None:
    with open(path, "w") as f:
        for frame in frames:
            f.write(frame_to_json(frame) + "\n")
