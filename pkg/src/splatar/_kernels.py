"""Compiled hot-path kernels (numba).

Two rules hold everywhere here:
  * per-point / per-tile work is an independent pure map, so results are
    byte-identical for any thread count;
  * the rasterization kernels avoid fastmath so the compositing arithmetic
    matches the pure-numpy oracle expression for expression.
"""

from __future__ import annotations

import numba
import numpy as np
from numba import njit, prange

# skip the TBB probe: omp is present everywhere we run and probing TBB warns
numba.config.THREADING_LAYER = "omp"

ALPHA_CUTOFF = 1.0 / 255.0
ALPHA_CLAMP = 0.99
NEAR_PLANE = 1e-4
COV_REG = 0.3          # pixel^2 low-pass added to every 2D covariance
RADIUS_SIGMAS = 3.5    # beyond this many sigmas alpha is provably < 1/255
TILE = 16
TRANSMITTANCE_STOP = 1e-6


@njit(parallel=True, fastmath=True, cache=True)
def animate_points(gbar, expr_basis, pose_basis, phi, feat, weights, transforms,
                   canon_quat, out_pos, out_quat):
    """Fused per-point animation: expression + pose-corrective blendshape
    offsets, blended joint transforms, position skinning, re-orthonormalized
    blended rotation (Gram-Schmidt) composed with the canonical quaternion.

    Everything runs in one parallel region (no BLAS hand-off: alternating
    thread pools stalls badly on small machines). transforms is (J, 12),
    one 3x4 [R | t] per joint. Writes only out_pos / out_quat; allocates
    nothing.
    """
    M = gbar.shape[0]
    J = weights.shape[1]
    E = phi.shape[0]
    P = feat.shape[0]
    for k in prange(M):
        x = gbar[k, 0]
        y = gbar[k, 1]
        z = gbar[k, 2]
        for e in range(E):
            c = phi[e]
            x += expr_basis[k, 0, e] * c
            y += expr_basis[k, 1, e] * c
            z += expr_basis[k, 2, e] * c
        for p in range(P):
            c = feat[p]
            x += pose_basis[k, 0, p] * c
            y += pose_basis[k, 1, p] * c
            z += pose_basis[k, 2, p] * c

        b00 = np.float32(0.0); b01 = np.float32(0.0); b02 = np.float32(0.0); b03 = np.float32(0.0)
        b10 = np.float32(0.0); b11 = np.float32(0.0); b12 = np.float32(0.0); b13 = np.float32(0.0)
        b20 = np.float32(0.0); b21 = np.float32(0.0); b22 = np.float32(0.0); b23 = np.float32(0.0)
        for j in range(J):
            w = weights[k, j]
            b00 += w * transforms[j, 0]; b01 += w * transforms[j, 1]
            b02 += w * transforms[j, 2]; b03 += w * transforms[j, 3]
            b10 += w * transforms[j, 4]; b11 += w * transforms[j, 5]
            b12 += w * transforms[j, 6]; b13 += w * transforms[j, 7]
            b20 += w * transforms[j, 8]; b21 += w * transforms[j, 9]
            b22 += w * transforms[j, 10]; b23 += w * transforms[j, 11]

        out_pos[k, 0] = b00 * x + b01 * y + b02 * z + b03
        out_pos[k, 1] = b10 * x + b11 * y + b12 * z + b13
        out_pos[k, 2] = b20 * x + b21 * y + b22 * z + b23

        # orthonormalize the blended 3x3 (columns), then matrix -> quaternion
        n0 = np.sqrt(b00 * b00 + b10 * b10 + b20 * b20)
        r00 = b00 / n0; r10 = b10 / n0; r20 = b20 / n0
        d = r00 * b01 + r10 * b11 + r20 * b21
        u1x = b01 - d * r00; u1y = b11 - d * r10; u1z = b21 - d * r20
        n1 = np.sqrt(u1x * u1x + u1y * u1y + u1z * u1z)
        r01 = u1x / n1; r11 = u1y / n1; r21 = u1z / n1
        r02 = r10 * r21 - r20 * r11
        r12 = r20 * r01 - r00 * r21
        r22 = r00 * r11 - r10 * r01

        tr = r00 + r11 + r22
        qw = np.sqrt(max(np.float32(0.0), np.float32(1.0) + tr)) * np.float32(0.5)
        qx = np.sqrt(max(np.float32(0.0), np.float32(1.0) + r00 - r11 - r22)) * np.float32(0.5)
        qy = np.sqrt(max(np.float32(0.0), np.float32(1.0) - r00 + r11 - r22)) * np.float32(0.5)
        qz = np.sqrt(max(np.float32(0.0), np.float32(1.0) - r00 - r11 + r22)) * np.float32(0.5)
        if r21 - r12 < 0.0:
            qx = -qx
        if r02 - r20 < 0.0:
            qy = -qy
        if r10 - r01 < 0.0:
            qz = -qz

        cw = canon_quat[k, 0]; cx = canon_quat[k, 1]
        cy = canon_quat[k, 2]; cz = canon_quat[k, 3]
        ow = qw * cw - qx * cx - qy * cy - qz * cz
        ox = qw * cx + qx * cw + qy * cz - qz * cy
        oy = qw * cy - qx * cz + qy * cw + qz * cx
        oz = qw * cz + qx * cy - qy * cx + qz * cw
        n = np.sqrt(ow * ow + ox * ox + oy * oy + oz * oz)
        out_quat[k, 0] = ow / n
        out_quat[k, 1] = ox / n
        out_quat[k, 2] = oy / n
        out_quat[k, 3] = oz / n


@njit(parallel=True, cache=True)
def project_points(pos, quat, scale, cam_r, cam_t, fx, fy, cx, cy, width, height,
                   mean2d, conic, depth, radius):
    """EWA projection of every Gaussian to screen space.

    Per point: camera-space position, 3D covariance R diag(s^2) R^T rotated
    into camera frame, perspective Jacobian, 2D covariance + COV_REG, inverse
    (conic), and a conservative cull radius. radius[k] == 0 marks a culled or
    degenerate splat (behind the near plane, off screen, or singular).
    """
    M = pos.shape[0]
    for k in prange(M):
        px = np.float64(pos[k, 0]); py = np.float64(pos[k, 1]); pz = np.float64(pos[k, 2])
        tx = cam_r[0, 0] * px + cam_r[0, 1] * py + cam_r[0, 2] * pz + cam_t[0]
        ty = cam_r[1, 0] * px + cam_r[1, 1] * py + cam_r[1, 2] * pz + cam_t[1]
        tz = cam_r[2, 0] * px + cam_r[2, 1] * py + cam_r[2, 2] * pz + cam_t[2]
        radius[k] = 0.0
        depth[k] = tz
        if tz <= NEAR_PLANE:
            continue

        w = np.float64(quat[k, 0]); x = np.float64(quat[k, 1])
        y = np.float64(quat[k, 2]); z = np.float64(quat[k, 3])
        qn = np.sqrt(w * w + x * x + y * y + z * z)
        w /= qn; x /= qn; y /= qn; z /= qn
        r00 = 1.0 - 2.0 * (y * y + z * z); r01 = 2.0 * (x * y - w * z); r02 = 2.0 * (x * z + w * y)
        r10 = 2.0 * (x * y + w * z); r11 = 1.0 - 2.0 * (x * x + z * z); r12 = 2.0 * (y * z - w * x)
        r20 = 2.0 * (x * z - w * y); r21 = 2.0 * (y * z + w * x); r22 = 1.0 - 2.0 * (x * x + y * y)

        s0 = np.float64(scale[k, 0]) ** 2
        s1 = np.float64(scale[k, 1]) ** 2
        s2 = np.float64(scale[k, 2]) ** 2
        # world covariance C = R diag(s^2) R^T
        c00 = r00 * r00 * s0 + r01 * r01 * s1 + r02 * r02 * s2
        c01 = r00 * r10 * s0 + r01 * r11 * s1 + r02 * r12 * s2
        c02 = r00 * r20 * s0 + r01 * r21 * s1 + r02 * r22 * s2
        c11 = r10 * r10 * s0 + r11 * r11 * s1 + r12 * r12 * s2
        c12 = r10 * r20 * s0 + r11 * r21 * s1 + r12 * r22 * s2
        c22 = r20 * r20 * s0 + r21 * r21 * s1 + r22 * r22 * s2
        # rotate into camera frame: V = W C W^T
        t00 = cam_r[0, 0] * c00 + cam_r[0, 1] * c01 + cam_r[0, 2] * c02
        t01 = cam_r[0, 0] * c01 + cam_r[0, 1] * c11 + cam_r[0, 2] * c12
        t02 = cam_r[0, 0] * c02 + cam_r[0, 1] * c12 + cam_r[0, 2] * c22
        t10 = cam_r[1, 0] * c00 + cam_r[1, 1] * c01 + cam_r[1, 2] * c02
        t11 = cam_r[1, 0] * c01 + cam_r[1, 1] * c11 + cam_r[1, 2] * c12
        t12 = cam_r[1, 0] * c02 + cam_r[1, 1] * c12 + cam_r[1, 2] * c22
        t20 = cam_r[2, 0] * c00 + cam_r[2, 1] * c01 + cam_r[2, 2] * c02
        t21 = cam_r[2, 0] * c01 + cam_r[2, 1] * c11 + cam_r[2, 2] * c12
        t22 = cam_r[2, 0] * c02 + cam_r[2, 1] * c12 + cam_r[2, 2] * c22
        v00 = t00 * cam_r[0, 0] + t01 * cam_r[0, 1] + t02 * cam_r[0, 2]
        v01 = t00 * cam_r[1, 0] + t01 * cam_r[1, 1] + t02 * cam_r[1, 2]
        v02 = t00 * cam_r[2, 0] + t01 * cam_r[2, 1] + t02 * cam_r[2, 2]
        v11 = t10 * cam_r[1, 0] + t11 * cam_r[1, 1] + t12 * cam_r[1, 2]
        v12 = t10 * cam_r[2, 0] + t11 * cam_r[2, 1] + t12 * cam_r[2, 2]
        v22 = t20 * cam_r[2, 0] + t21 * cam_r[2, 1] + t22 * cam_r[2, 2]

        # perspective Jacobian rows at the camera-space point
        iz = 1.0 / tz
        iz2 = iz * iz
        j00 = fx * iz; j02 = -fx * tx * iz2
        j11 = fy * iz; j12 = -fy * ty * iz2
        a = j00 * (v00 * j00 + v02 * j02) + j02 * (v02 * j00 + v22 * j02) + COV_REG
        b = j00 * (v01 * j11 + v02 * j12) + j02 * (v12 * j11 + v22 * j12)
        c = j11 * (v11 * j11 + v12 * j12) + j12 * (v12 * j11 + v22 * j12) + COV_REG

        det = a * c - b * b
        if det <= 0.0:
            continue
        mx = fx * tx * iz + cx
        my = fy * ty * iz + cy
        inv = 1.0 / det
        lam_max = 0.5 * (a + c) + np.sqrt(max(0.0, 0.25 * (a - c) ** 2 + b * b))
        r = RADIUS_SIGMAS * np.sqrt(lam_max)
        if mx + r < 0.0 or mx - r > width - 1.0 or my + r < 0.0 or my - r > height - 1.0:
            continue
        mean2d[k, 0] = mx
        mean2d[k, 1] = my
        conic[k, 0] = c * inv
        conic[k, 1] = -b * inv
        conic[k, 2] = a * inv
        radius[k] = r


@njit(cache=True)
def count_tiles_per_splat_and_tile(mean2d, radius, width, height, splat_tiles, tile_counts):
    """splat_tiles[k] = tiles overlapped by splat k's bounding square;
    tile_counts[t] = number of splats listed in tile t."""
    tiles_x = (width + TILE - 1) // TILE
    tiles_y = (height + TILE - 1) // TILE
    for k in range(mean2d.shape[0]):
        splat_tiles[k] = 0
        r = radius[k]
        if r <= 0.0:
            continue
        x0 = max(0, int(np.floor((mean2d[k, 0] - r) / TILE)))
        x1 = min(tiles_x - 1, int(np.floor((mean2d[k, 0] + r) / TILE)))
        y0 = max(0, int(np.floor((mean2d[k, 1] - r) / TILE)))
        y1 = min(tiles_y - 1, int(np.floor((mean2d[k, 1] + r) / TILE)))
        if x1 < x0 or y1 < y0:
            continue
        splat_tiles[k] = (x1 - x0 + 1) * (y1 - y0 + 1)
        for ty in range(y0, y1 + 1):
            for tx in range(x0, x1 + 1):
                tile_counts[ty * tiles_x + tx] += 1


@njit(cache=True)
def fill_tile_lists(mean2d, radius, width, height, depth_order, cursors, sorted_splats):
    """Scatter splats into per-tile lists, visiting splats front to back so
    every tile's list is already in global (depth, index) order."""
    tiles_x = (width + TILE - 1) // TILE
    tiles_y = (height + TILE - 1) // TILE
    for i in range(depth_order.shape[0]):
        k = depth_order[i]
        r = radius[k]
        if r <= 0.0:
            continue
        x0 = max(0, int(np.floor((mean2d[k, 0] - r) / TILE)))
        x1 = min(tiles_x - 1, int(np.floor((mean2d[k, 0] + r) / TILE)))
        y0 = max(0, int(np.floor((mean2d[k, 1] - r) / TILE)))
        y1 = min(tiles_y - 1, int(np.floor((mean2d[k, 1] + r) / TILE)))
        for ty in range(y0, y1 + 1):
            for tx in range(x0, x1 + 1):
                t = ty * tiles_x + tx
                sorted_splats[cursors[t]] = k
                cursors[t] += 1


@njit(parallel=True, cache=True)
def composite_tiles(sorted_splats, tile_starts, mean2d, conic, radius, opacities,
                    colors, background, width, height, trans_buf, acc_buf,
                    out_rgb, out_alpha):
    """Front-to-back alpha compositing, one independent pass per tile.

    Splats are walked in global (depth, index) order and touch only the
    pixels inside their bounding square; per-pixel transmittance lives in a
    per-tile float64 scratch slice. A pixel past TRANSMITTANCE_STOP is done,
    and once every covered pixel of the tile is done the tile bails out
    early (neither shortcut moves a result more than the stop threshold).
    Output is byte-identical for any thread count.
    """
    tiles_x = (width + TILE - 1) // TILE
    n_tiles = tile_starts.shape[0] - 1
    for t in prange(n_tiles):
        start = tile_starts[t]
        end = tile_starts[t + 1]
        ty = t // tiles_x
        tx = t % tiles_x
        py0 = ty * TILE
        px0 = tx * TILE
        h = min(TILE, height - py0)
        w = min(TILE, width - px0)
        trans = trans_buf[t]
        acc = acc_buf[t]
        for ly in range(h):
            for lx in range(w):
                trans[ly, lx] = 1.0
                acc[ly, lx, 0] = 0.0
                acc[ly, lx, 1] = 0.0
                acc[ly, lx, 2] = 0.0
        alive = h * w
        for n in range(start, end):
            s = sorted_splats[n]
            mx = np.float64(mean2d[s, 0])
            my = np.float64(mean2d[s, 1])
            r = np.float64(radius[s])
            ix0 = max(px0, int(np.ceil(mx - r)))
            ix1 = min(px0 + w - 1, int(np.floor(mx + r)))
            iy0 = max(py0, int(np.ceil(my - r)))
            iy1 = min(py0 + h - 1, int(np.floor(my + r)))
            ca = np.float64(conic[s, 0])
            cb = np.float64(conic[s, 1])
            cc = np.float64(conic[s, 2])
            op = np.float64(opacities[s])
            c0 = np.float64(colors[s, 0])
            c1 = np.float64(colors[s, 1])
            c2 = np.float64(colors[s, 2])
            for py in range(iy0, iy1 + 1):
                ly = py - py0
                dy = np.float64(py) - my
                for px in range(ix0, ix1 + 1):
                    lx = px - px0
                    tr = trans[ly, lx]
                    if tr < TRANSMITTANCE_STOP:
                        continue
                    dx = np.float64(px) - mx
                    e = ca * dx * dx + 2.0 * cb * dx * dy + cc * dy * dy
                    alpha = op * np.exp(-0.5 * e)
                    if alpha < ALPHA_CUTOFF:
                        continue
                    if alpha > ALPHA_CLAMP:
                        alpha = ALPHA_CLAMP
                    wgt = tr * alpha
                    acc[ly, lx, 0] += wgt * c0
                    acc[ly, lx, 1] += wgt * c1
                    acc[ly, lx, 2] += wgt * c2
                    tr *= 1.0 - alpha
                    trans[ly, lx] = tr
                    if tr < TRANSMITTANCE_STOP:
                        alive -= 1
            if alive <= 0:
                break
        for ly in range(h):
            for lx in range(w):
                tr = trans[ly, lx]
                out_rgb[py0 + ly, px0 + lx, 0] = np.float32(acc[ly, lx, 0] + tr * background[0])
                out_rgb[py0 + ly, px0 + lx, 1] = np.float32(acc[ly, lx, 1] + tr * background[1])
                out_rgb[py0 + ly, px0 + lx, 2] = np.float32(acc[ly, lx, 2] + tr * background[2])
                out_alpha[py0 + ly, px0 + lx] = np.float32(1.0 - tr)


def warmup() -> None:
    """Compile every kernel on tiny inputs (first-call JIT cost otherwise
    lands inside a timed run)."""
    pos = np.zeros((2, 3), np.float32)
    pos[:, 2] = 2.0
    quat = np.zeros((2, 4), np.float32)
    quat[:, 0] = 1.0
    scale = np.full((2, 3), 0.1, np.float32)
    mean2d = np.zeros((2, 2), np.float32)
    conic = np.zeros((2, 3), np.float32)
    depth = np.zeros(2, np.float32)
    radius = np.zeros(2, np.float32)
    eye = np.eye(3)
    project_points(pos, quat, scale, eye, np.zeros(3), 10.0, 10.0, 8.0, 8.0, 16, 16,
                   mean2d, conic, depth, radius)
    splat_tiles = np.zeros(2, np.int64)
    tile_counts = np.zeros(1, np.int64)
    count_tiles_per_splat_and_tile(mean2d, radius, 16, 16, splat_tiles, tile_counts)
    total = int(tile_counts.sum())
    sorted_splats = np.zeros(max(total, 1), np.int64)
    fill_tile_lists(mean2d, radius, 16, 16, np.zeros(1, np.int64),
                    np.zeros(1, np.int64), sorted_splats)
    rgb = np.zeros((16, 16, 3), np.float32)
    alp = np.zeros((16, 16), np.float32)
    composite_tiles(sorted_splats, np.array([0, total], np.int64), mean2d, conic, radius,
                    np.full(2, 0.5, np.float32), np.full((2, 3), 0.5, np.float32),
                    np.zeros(3, np.float32), 16, 16,
                    np.empty((1, TILE, TILE), np.float64),
                    np.empty((1, TILE, TILE, 3), np.float64), rgb, alp)
    eb = np.zeros((2, 3, 2), np.float32)
    pb = np.zeros((2, 3, 1), np.float32)
    tr = np.zeros((1, 12), np.float32)
    tr[0, 0] = tr[0, 5] = tr[0, 10] = 1.0
    w = np.ones((2, 1), np.float32)
    animate_points(pos, eb, pb, np.zeros(2, np.float32), np.zeros(1, np.float32),
                   w, tr, quat, np.empty((2, 3), np.float32),
                   np.empty((2, 4), np.float32))
