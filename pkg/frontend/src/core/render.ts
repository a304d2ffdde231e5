// CPU Gaussian splatting, a port of the runtime's rasterizer: EWA
// projection with the same +0.3 px^2 covariance floor, alpha < 1/255
// cutoff, 0.99 clamp, and front-to-back compositing in global
// (depth, point index) order. Float64 math keeps it within 1/255 per
// channel of the reference renderer's float32 pipeline.

import { Avatar } from "./avatar.js";
import { PosedSet } from "./animate.js";
import { Camera } from "./camera.js";

export const ALPHA_CUTOFF = 1 / 255;
export const ALPHA_CLAMP = 0.99;
export const NEAR_PLANE = 1e-4;
export const COV_REG = 0.3;
export const RADIUS_SIGMAS = 3.5;
const TRANSMITTANCE_STOP = 1e-6;

export interface Framebuffer {
  width: number;
  height: number;
  rgb: Float64Array; // (H*W*3)
  alpha: Float64Array; // (H*W)
  background: [number, number, number];
}

export function makeFramebuffer(
  width: number,
  height: number,
  background: [number, number, number] = [0, 0, 0],
): Framebuffer {
  return {
    width,
    height,
    rgb: new Float64Array(width * height * 3),
    alpha: new Float64Array(width * height),
    background,
  };
}

type Projected = {
  meanX: Float64Array;
  meanY: Float64Array;
  conicA: Float64Array;
  conicB: Float64Array;
  conicC: Float64Array;
  depth: Float64Array;
  radius: Float64Array;
};

function project(avatar: Avatar, set: PosedSet, cam: Camera): Projected {
  const M = avatar.numPoints;
  const out: Projected = {
    meanX: new Float64Array(M),
    meanY: new Float64Array(M),
    conicA: new Float64Array(M),
    conicB: new Float64Array(M),
    conicC: new Float64Array(M),
    depth: new Float64Array(M),
    radius: new Float64Array(M),
  };
  const m = cam.w2c;
  for (let k = 0; k < M; k++) {
    const px = set.positions[3 * k], py = set.positions[3 * k + 1], pz = set.positions[3 * k + 2];
    const tx = m[0] * px + m[1] * py + m[2] * pz + m[3];
    const ty = m[4] * px + m[5] * py + m[6] * pz + m[7];
    const tz = m[8] * px + m[9] * py + m[10] * pz + m[11];
    out.depth[k] = tz;
    if (tz <= NEAR_PLANE) continue;

    let qw = set.rotations[4 * k], qx = set.rotations[4 * k + 1];
    let qy = set.rotations[4 * k + 2], qz = set.rotations[4 * k + 3];
    const qn = Math.hypot(qw, qx, qy, qz);
    qw /= qn; qx /= qn; qy /= qn; qz /= qn;
    const r00 = 1 - 2 * (qy * qy + qz * qz), r01 = 2 * (qx * qy - qw * qz), r02 = 2 * (qx * qz + qw * qy);
    const r10 = 2 * (qx * qy + qw * qz), r11 = 1 - 2 * (qx * qx + qz * qz), r12 = 2 * (qy * qz - qw * qx);
    const r20 = 2 * (qx * qz - qw * qy), r21 = 2 * (qy * qz + qw * qx), r22 = 1 - 2 * (qx * qx + qy * qy);

    const s0 = avatar.scales[3 * k] ** 2;
    const s1 = avatar.scales[3 * k + 1] ** 2;
    const s2 = avatar.scales[3 * k + 2] ** 2;
    const c00 = r00 * r00 * s0 + r01 * r01 * s1 + r02 * r02 * s2;
    const c01 = r00 * r10 * s0 + r01 * r11 * s1 + r02 * r12 * s2;
    const c02 = r00 * r20 * s0 + r01 * r21 * s1 + r02 * r22 * s2;
    const c11 = r10 * r10 * s0 + r11 * r11 * s1 + r12 * r12 * s2;
    const c12 = r10 * r20 * s0 + r11 * r21 * s1 + r12 * r22 * s2;
    const c22 = r20 * r20 * s0 + r21 * r21 * s1 + r22 * r22 * s2;

    // rotate world covariance into the camera frame: V = W C W^T
    const t00 = m[0] * c00 + m[1] * c01 + m[2] * c02;
    const t01 = m[0] * c01 + m[1] * c11 + m[2] * c12;
    const t02 = m[0] * c02 + m[1] * c12 + m[2] * c22;
    const t10 = m[4] * c00 + m[5] * c01 + m[6] * c02;
    const t11 = m[4] * c01 + m[5] * c11 + m[6] * c12;
    const t12 = m[4] * c02 + m[5] * c12 + m[6] * c22;
    const t20 = m[8] * c00 + m[9] * c01 + m[10] * c02;
    const t21 = m[8] * c01 + m[9] * c11 + m[10] * c12;
    const t22 = m[8] * c02 + m[9] * c12 + m[10] * c22;
    const v00 = t00 * m[0] + t01 * m[1] + t02 * m[2];
    const v01 = t00 * m[4] + t01 * m[5] + t02 * m[6];
    const v02 = t00 * m[8] + t01 * m[9] + t02 * m[10];
    const v11 = t10 * m[4] + t11 * m[5] + t12 * m[6];
    const v12 = t10 * m[8] + t11 * m[9] + t12 * m[10];
    const v22 = t20 * m[8] + t21 * m[9] + t22 * m[10];

    const iz = 1 / tz, iz2 = iz * iz;
    const j00 = cam.fx * iz, j02 = -cam.fx * tx * iz2;
    const j11 = cam.fy * iz, j12 = -cam.fy * ty * iz2;
    const a = j00 * (v00 * j00 + v02 * j02) + j02 * (v02 * j00 + v22 * j02) + COV_REG;
    const b = j00 * (v01 * j11 + v02 * j12) + j02 * (v12 * j11 + v22 * j12);
    const c = j11 * (v11 * j11 + v12 * j12) + j12 * (v12 * j11 + v22 * j12) + COV_REG;
    const det = a * c - b * b;
    if (det <= 0) continue;
    const mx = cam.fx * tx * iz + cam.cx;
    const my = cam.fy * ty * iz + cam.cy;
    const lamMax = 0.5 * (a + c) + Math.sqrt(Math.max(0, 0.25 * (a - c) ** 2 + b * b));
    const r = RADIUS_SIGMAS * Math.sqrt(lamMax);
    if (mx + r < 0 || mx - r > cam.width - 1 || my + r < 0 || my - r > cam.height - 1) {
      continue;
    }
    const inv = 1 / det;
    out.meanX[k] = mx;
    out.meanY[k] = my;
    out.conicA[k] = c * inv;
    out.conicB[k] = -b * inv;
    out.conicC[k] = a * inv;
    out.radius[k] = r;
  }
  return out;
}

/** Splat the posed set into the framebuffer (front to back, depth then
 * point index, the same order as the reference renderer). */
export function render(avatar: Avatar, set: PosedSet, cam: Camera, fb: Framebuffer): void {
  const { width: W, height: H } = fb;
  const M = avatar.numPoints;
  fb.alpha.fill(0);
  for (let p = 0; p < W * H; p++) {
    fb.rgb[3 * p] = fb.background[0];
    fb.rgb[3 * p + 1] = fb.background[1];
    fb.rgb[3 * p + 2] = fb.background[2];
  }
  if (M === 0) return;

  const proj = project(avatar, set, cam);
  const order: number[] = [];
  for (let k = 0; k < M; k++) if (proj.radius[k] > 0) order.push(k);
  order.sort((i, j) => proj.depth[i] - proj.depth[j] || i - j);

  const trans = new Float64Array(W * H).fill(1);
  const acc = new Float64Array(W * H * 3);
  for (const s of order) {
    const mx = proj.meanX[s], my = proj.meanY[s], r = proj.radius[s];
    const x0 = Math.max(0, Math.ceil(mx - r));
    const x1 = Math.min(W - 1, Math.floor(mx + r));
    const y0 = Math.max(0, Math.ceil(my - r));
    const y1 = Math.min(H - 1, Math.floor(my + r));
    const ca = proj.conicA[s], cb = proj.conicB[s], cc = proj.conicC[s];
    const op = avatar.opacities[s];
    const c0 = avatar.colors[3 * s], c1 = avatar.colors[3 * s + 1], c2 = avatar.colors[3 * s + 2];
    for (let py = y0; py <= y1; py++) {
      const dy = py - my;
      for (let px = x0; px <= x1; px++) {
        const idx = py * W + px;
        const tr = trans[idx];
        if (tr < TRANSMITTANCE_STOP) continue;
        const dx = px - mx;
        const e = ca * dx * dx + 2 * cb * dx * dy + cc * dy * dy;
        let alpha = op * Math.exp(-0.5 * e);
        if (alpha < ALPHA_CUTOFF) continue;
        if (alpha > ALPHA_CLAMP) alpha = ALPHA_CLAMP;
        const wgt = tr * alpha;
        acc[3 * idx] += wgt * c0;
        acc[3 * idx + 1] += wgt * c1;
        acc[3 * idx + 2] += wgt * c2;
        trans[idx] = tr * (1 - alpha);
      }
    }
  }
  for (let p = 0; p < W * H; p++) {
    const tr = trans[p];
    fb.rgb[3 * p] = acc[3 * p] + tr * fb.background[0];
    fb.rgb[3 * p + 1] = acc[3 * p + 1] + tr * fb.background[1];
    fb.rgb[3 * p + 2] = acc[3 * p + 2] + tr * fb.background[2];
    fb.alpha[p] = 1 - tr;
  }
}

/** 8-bit RGBA pixels for a canvas ImageData blit. */
export function toRGBA(fb: Framebuffer, out?: Uint8ClampedArray): Uint8ClampedArray {
  const n = fb.width * fb.height;
  const rgba = out ?? new Uint8ClampedArray(n * 4);
  for (let p = 0; p < n; p++) {
    rgba[4 * p] = Math.round(fb.rgb[3 * p] * 255);
    rgba[4 * p + 1] = Math.round(fb.rgb[3 * p + 1] * 255);
    rgba[4 * p + 2] = Math.round(fb.rgb[3 * p + 2] * 255);
    rgba[4 * p + 3] = 255;
  }
  return rgba;
}
