"""splatar: a runtime for rigged 3D Gaussian head avatars.

Bake a canonical Gaussian avatar from a FLAME-compatible rig, animate it
per frame with corrective blendshapes + linear blend skinning, and render
it with a deterministic CPU splatting rasterizer. A toy-scale point-query
transformer generates Gaussian attributes from image features.
"""

from .animator import PosedGaussianSet, SequenceStats, animate, animate_sequence
from .asset import (
    CanonicalGaussianAvatar,
    DrivingFrame,
    GaussianAttributes,
    ValidationFinding,
    bake,
    load,
    read_driving_stream,
    save,
    validate,
    write_driving_stream,
)
from .render import (
    Camera,
    ForwardRecords,
    RenderTarget,
    color_backward,
    project,
    render,
    render_oracle,
)
from .rig import (
    RigTemplate,
    apply_shape,
    axis_angle_to_matrix,
    linear_blend_skin,
    load_rig,
    pose_correctives,
    regress_joints,
    save_rig,
)
from .subdivision import AttributedMesh, subdivide, subdivide_once

__version__ = "0.1.0"

__all__ = [
    "AttributedMesh",
    "Camera",
    "CanonicalGaussianAvatar",
    "DrivingFrame",
    "ForwardRecords",
    "GaussianAttributes",
    "PosedGaussianSet",
    "RenderTarget",
    "RigTemplate",
    "SequenceStats",
    "ValidationFinding",
    "animate",
    "animate_sequence",
    "apply_shape",
    "axis_angle_to_matrix",
    "bake",
    "color_backward",
    "linear_blend_skin",
    "load",
    "load_rig",
    "pose_correctives",
    "project",
    "read_driving_stream",
    "regress_joints",
    "render",
    "render_oracle",
    "save",
    "save_rig",
    "subdivide",
    "subdivide_once",
    "validate",
    "write_driving_stream",
]
