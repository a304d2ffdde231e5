"""Deterministic CPU Gaussian splatting.

``render`` is the tiled production path (compiled kernels, parallel over
16x16 tiles, per-tile splats composited in global depth-then-index order).
``render_oracle`` re-does the compositing naively per pixel over all splats
in pure numpy — no tiling, no bounding boxes — applying only the same
alpha < 1/255 skip and 0.99 clamp, and is the reference the tiled path is
tested against. Both composite front to back:

    alpha_k = min(0.99, o_k * exp(-0.5 d^T conic d))
    C       = sum_k alpha_k c_k prod_{j<k} (1 - alpha_j) + background * prod (1 - alpha_k)
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

from . import _kernels, parallel
from .errors import InvalidParamsError, UsageError

ALPHA_CUTOFF = _kernels.ALPHA_CUTOFF
ALPHA_CLAMP = _kernels.ALPHA_CLAMP
NEAR_PLANE = _kernels.NEAR_PLANE
COV_REG = _kernels.COV_REG


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: intrinsics in pixels plus a rigid world-to-camera
    transform (camera looks down +z; points in front have positive depth)."""

    fx: float
    fy: float
    cx: float
    cy: float
    w2c: np.ndarray  # (4, 4) rigid, row-major
    width: int | None = None
    height: int | None = None

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidParamsError("focal lengths must be positive")
        if (self.width is not None and self.width <= 0) or (
            self.height is not None and self.height <= 0
        ):
            raise InvalidParamsError("image size must be positive")
        w2c = np.ascontiguousarray(self.w2c, dtype=np.float64).reshape(4, 4)
        w2c.flags.writeable = False
        object.__setattr__(self, "w2c", w2c)

    @property
    def rotation(self) -> np.ndarray:
        return self.w2c[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.w2c[:3, 3]

    def sized(self, width: int, height: int) -> "Camera":
        return replace(self, width=width, height=height)


class RenderTarget:
    """RGB + silhouette alpha buffers in [0, 1], float32."""

    def __init__(self, width: int, height: int, background=(0.0, 0.0, 0.0)):
        if width <= 0 or height <= 0:
            raise InvalidParamsError("target size must be positive")
        self.width = width
        self.height = height
        self.background = np.asarray(background, dtype=np.float32).reshape(3)
        self.rgb = np.zeros((height, width, 3), dtype=np.float32)
        self.alpha = np.zeros((height, width), dtype=np.float32)
        tiles = ((width + _kernels.TILE - 1) // _kernels.TILE) * (
            (height + _kernels.TILE - 1) // _kernels.TILE
        )
        # per-tile compositing scratch, reused across renders
        self._trans_buf = np.empty((tiles, _kernels.TILE, _kernels.TILE), dtype=np.float64)
        self._acc_buf = np.empty((tiles, _kernels.TILE, _kernels.TILE, 3), dtype=np.float64)
        self.clear()

    def clear(self):
        self.rgb[:] = self.background
        self.alpha[:] = 0.0

    def rgb_u8(self) -> np.ndarray:
        return np.clip(np.rint(self.rgb * 255.0), 0, 255).astype(np.uint8)

    def alpha_u8(self) -> np.ndarray:
        return np.clip(np.rint(self.alpha * 255.0), 0, 255).astype(np.uint8)

    def save_png(self, path: str | Path):
        Image.fromarray(self.rgb_u8(), mode="RGB").save(path)

    def save_silhouette_png(self, path: str | Path):
        Image.fromarray(self.alpha_u8(), mode="L").save(path)

    def save_ppm(self, path: str | Path):
        """Binary P6 PPM; the bit-exact reference format for tests."""
        u8 = self.rgb_u8()
        with open(path, "wb") as f:
            f.write(f"P6\n{self.width} {self.height}\n255\n".encode())
            f.write(u8.tobytes())


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    """(w, x, y, z) unit quaternion to 3x3 rotation matrix (normalizes)."""
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def project(position, scale, rotation, camera: Camera):
    """Project one Gaussian to screen space (reference, float64).

    Returns (mean2d, cov2d, depth) with the +COV_REG low-pass applied, or
    None when the point is culled behind the near plane.
    """
    p_cam = camera.rotation @ np.asarray(position, dtype=np.float64) + camera.translation
    depth = p_cam[2]
    if depth <= NEAR_PLANE:
        return None
    rot = quaternion_to_matrix(rotation)
    s2 = np.square(np.asarray(scale, dtype=np.float64))
    cov3d = rot @ np.diag(s2) @ rot.T
    cov_cam = camera.rotation @ cov3d @ camera.rotation.T
    x, y, z = p_cam
    jac = np.array(
        [
            [camera.fx / z, 0.0, -camera.fx * x / (z * z)],
            [0.0, camera.fy / z, -camera.fy * y / (z * z)],
        ]
    )
    cov2d = jac @ cov_cam @ jac.T + COV_REG * np.eye(2)
    mean = np.array([camera.fx * x / z + camera.cx, camera.fy * y / z + camera.cy])
    return mean, cov2d, depth


def _require_size(camera: Camera, target: RenderTarget) -> Camera:
    if camera.width is None or camera.height is None:
        camera = camera.sized(target.width, target.height)
    if (camera.width, camera.height) != (target.width, target.height):
        raise InvalidParamsError(
            f"camera size {(camera.width, camera.height)} != target "
            f"{(target.width, target.height)}"
        )
    return camera


def _project_all(particles, camera: Camera):
    """Vectorized projection of a particle set; see _kernels.project_points."""
    M = particles.positions.shape[0]
    mean2d = np.zeros((M, 2), dtype=np.float32)
    conic = np.zeros((M, 3), dtype=np.float32)
    depth = np.zeros(M, dtype=np.float32)
    radius = np.zeros(M, dtype=np.float32)
    if M:
        _kernels.project_points(
            particles.positions, particles.rotations, particles.scales,
            np.ascontiguousarray(camera.rotation), np.ascontiguousarray(camera.translation),
            camera.fx, camera.fy, camera.cx, camera.cy,
            camera.width, camera.height, mean2d, conic, depth, radius,
        )
    return mean2d, conic, depth, radius


def _depth_order(depth: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Indices of valid splats, front to back, ties broken by point index."""
    idx = np.nonzero(valid)[0]
    return idx[np.lexsort((idx, depth[idx]))]


def render(particles, camera: Camera, target: RenderTarget, threads: int | None = None):
    """Tile-based splatting of a posed Gaussian set into ``target``.

    Deterministic: splats are composited in increasing view depth with ties
    broken by point index, tiles are independent, and the output is
    byte-identical for any thread count.
    """
    camera = _require_size(camera, target)
    target.clear()
    if particles.positions.shape[0] == 0:
        return
    with parallel.thread_limit(threads):
        mean2d, conic, depth, radius = _project_all(particles, camera)

        M = particles.positions.shape[0]
        tiles_x = (camera.width + _kernels.TILE - 1) // _kernels.TILE
        tiles_y = (camera.height + _kernels.TILE - 1) // _kernels.TILE
        n_tiles = tiles_x * tiles_y
        splat_tiles = np.zeros(M, dtype=np.int64)
        tile_counts = np.zeros(n_tiles, dtype=np.int64)
        _kernels.count_tiles_per_splat_and_tile(
            mean2d, radius, camera.width, camera.height, splat_tiles, tile_counts
        )
        total = int(tile_counts.sum())
        if total == 0:
            return
        tile_starts = np.zeros(n_tiles + 1, dtype=np.int64)
        np.cumsum(tile_counts, out=tile_starts[1:])

        # visiting splats front to back while scattering keeps every tile's
        # list in global (depth, index) order; stable sort breaks depth ties
        # by point index
        depth_order = np.argsort(depth, kind="stable")
        sorted_splats = np.empty(total, dtype=np.int64)
        _kernels.fill_tile_lists(
            mean2d, radius, camera.width, camera.height,
            depth_order, tile_starts[:-1].copy(), sorted_splats,
        )

        _kernels.composite_tiles(
            sorted_splats, tile_starts, mean2d, conic, radius,
            particles.opacities, particles.colors, target.background,
            camera.width, camera.height, target._trans_buf, target._acc_buf,
            target.rgb, target.alpha,
        )


@dataclass
class ForwardRecords:
    """Per-contribution records retained by a forward oracle render; the
    inputs color_backward needs for exact gradients."""

    pixel: np.ndarray   # (P,) flat pixel index
    point: np.ndarray   # (P,) splat index
    alpha: np.ndarray   # (P,)
    trans: np.ndarray   # (P,) transmittance in front of the contribution
    shape: tuple        # (H, W)
    num_points: int


def render_oracle(particles, camera: Camera, target: RenderTarget,
                  keep_records: bool = False):
    """Per-pixel reference compositing over all splats, globally depth
    sorted; returns ForwardRecords when ``keep_records`` is set."""
    camera = _require_size(camera, target)
    target.clear()
    H, W = target.height, target.width
    M = particles.positions.shape[0]
    rec_px, rec_pt, rec_a, rec_t = [], [], [], []

    acc = np.zeros((H, W, 3), dtype=np.float64)
    trans = np.ones((H, W), dtype=np.float64)
    if M:
        mean2d, conic, depth, radius = _project_all(particles, camera)
        xs = np.arange(W, dtype=np.float64)[None, :]
        ys = np.arange(H, dtype=np.float64)[:, None]
        for s in _depth_order(depth, radius > 0.0):
            a = np.float64(conic[s, 0])
            b = np.float64(conic[s, 1])
            c = np.float64(conic[s, 2])
            dx = xs - np.float64(mean2d[s, 0])
            dy = ys - np.float64(mean2d[s, 1])
            e = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
            alpha = np.float64(particles.opacities[s]) * np.exp(-0.5 * e)
            hit = alpha >= ALPHA_CUTOFF
            if not np.any(hit):
                continue
            alpha = np.where(hit, np.minimum(alpha, ALPHA_CLAMP), 0.0)
            if keep_records:
                py, px = np.nonzero(hit)
                rec_px.append(py * W + px)
                rec_pt.append(np.full(py.size, s, dtype=np.int64))
                rec_a.append(alpha[hit])
                rec_t.append(trans[hit])
            w = trans * alpha
            acc += w[:, :, None] * particles.colors[s].astype(np.float64)
            trans *= 1.0 - alpha

    target.rgb[:] = (acc + trans[:, :, None] * target.background.astype(np.float64)).astype(
        np.float32
    )
    target.alpha[:] = (1.0 - trans).astype(np.float32)
    if keep_records:
        if rec_px:
            return ForwardRecords(
                np.concatenate(rec_px), np.concatenate(rec_pt),
                np.concatenate(rec_a), np.concatenate(rec_t), (H, W), M,
            )
        return ForwardRecords(
            np.zeros(0, np.int64), np.zeros(0, np.int64),
            np.zeros(0), np.zeros(0), (H, W), M,
        )
    return None


def color_backward(records: ForwardRecords | None, target_grad: np.ndarray) -> np.ndarray:
    """Exact dL/dcolor for a pixel-wise loss, given a retained forward pass.

    Compositing is linear in each color, so the gradient of pixel p w.r.t.
    color k is alpha_k(p) * transmittance_k(p).

    Args:
        records: ForwardRecords from ``render_oracle(..., keep_records=True)``.
        target_grad: (H, W, 3) loss gradient w.r.t. the rendered image.

    Raises:
        UsageError: no forward records were retained or shapes mismatch.
    """
    if records is None:
        raise UsageError("color_backward requires records from a forward render")
    target_grad = np.asarray(target_grad, dtype=np.float64)
    if target_grad.shape != (*records.shape, 3):
        raise UsageError(
            f"gradient shape {target_grad.shape} != rendered {(*records.shape, 3)}"
        )
    grad = np.zeros((records.num_points, 3), dtype=np.float64)
    if records.pixel.size:
        contrib = (records.alpha * records.trans)[:, None] * target_grad.reshape(-1, 3)[
            records.pixel
        ]
        np.add.at(grad, records.point, contrib)
    return grad
