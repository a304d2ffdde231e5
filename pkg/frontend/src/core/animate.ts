// Per-frame animation: expression/pose corrective blendshapes + linear
// blend skinning, a straight port of the core runtime's math (float64).

import { Avatar } from "./avatar.js";

export interface PosedSet {
  positions: Float32Array; // (M, 3)
  rotations: Float32Array; // (M, 4)
}

export function makePosedSet(avatar: Avatar): PosedSet {
  return {
    positions: new Float32Array(avatar.positions),
    rotations: new Float32Array(avatar.rotations),
  };
}

export function axisAngleToMatrix(x: number, y: number, z: number): number[] {
  const angle = Math.hypot(x, y, z);
  if (angle === 0) return [1, 0, 0, 0, 1, 0, 0, 0, 1];
  const ux = x / angle, uy = y / angle, uz = z / angle;
  const s = Math.sin(angle), c = 1 - Math.cos(angle);
  // I + sin K + (1-cos) K^2 with K the cross-product matrix of the axis
  return [
    1 + c * (-uz * uz - uy * uy), -s * uz + c * ux * uy, s * uy + c * ux * uz,
    s * uz + c * ux * uy, 1 + c * (-ux * ux - uz * uz), -s * ux + c * uy * uz,
    -s * uy + c * ux * uz, s * ux + c * uy * uz, 1 + c * (-uy * uy - ux * ux),
  ];
}

/** World transforms per joint as 12 floats [R | t], rest joint folded in. */
export function jointTransforms(avatar: Avatar, theta: ArrayLike<number>): Float64Array {
  const J = avatar.numJoints;
  if (theta.length !== 3 * J) {
    throw new Error(`theta length ${theta.length} != 3*J = ${3 * J}`);
  }
  const world = new Float64Array(J * 12);
  for (let j = 0; j < J; j++) {
    const r = axisAngleToMatrix(theta[3 * j], theta[3 * j + 1], theta[3 * j + 2]);
    const jx = avatar.joints[3 * j], jy = avatar.joints[3 * j + 1], jz = avatar.joints[3 * j + 2];
    const p = avatar.parents[j];
    let tx: number, ty: number, tz: number;
    if (p < 0) {
      world.set(r.slice(0, 3), j * 12);
      world.set(r.slice(3, 6), j * 12 + 4);
      world.set(r.slice(6, 9), j * 12 + 8);
      tx = jx; ty = jy; tz = jz;
    } else {
      const px = avatar.joints[3 * p], py = avatar.joints[3 * p + 1], pz = avatar.joints[3 * p + 2];
      const rx = jx - px, ry = jy - py, rz = jz - pz;
      const pw = world.subarray(p * 12, p * 12 + 12);
      // world = parent_world . [r | rel]
      for (let row = 0; row < 3; row++) {
        for (let col = 0; col < 3; col++) {
          world[j * 12 + row * 4 + col] =
            pw[row * 4] * r[col] + pw[row * 4 + 1] * r[3 + col] + pw[row * 4 + 2] * r[6 + col];
        }
      }
      tx = pw[0] * rx + pw[1] * ry + pw[2] * rz + pw[3];
      ty = pw[4] * rx + pw[5] * ry + pw[6] * rz + pw[7];
      tz = pw[8] * rx + pw[9] * ry + pw[10] * rz + pw[11];
    }
    world[j * 12 + 3] = tx;
    world[j * 12 + 7] = ty;
    world[j * 12 + 11] = tz;
  }
  // fold the rest joint position in: t -= R_world . joint
  for (let j = 0; j < J; j++) {
    const jx = avatar.joints[3 * j], jy = avatar.joints[3 * j + 1], jz = avatar.joints[3 * j + 2];
    world[j * 12 + 3] -= world[j * 12] * jx + world[j * 12 + 1] * jy + world[j * 12 + 2] * jz;
    world[j * 12 + 7] -= world[j * 12 + 4] * jx + world[j * 12 + 5] * jy + world[j * 12 + 6] * jz;
    world[j * 12 + 11] -= world[j * 12 + 8] * jx + world[j * 12 + 9] * jy + world[j * 12 + 10] * jz;
  }
  return world;
}

/**
 * Pose the canonical avatar: positions through blendshapes + LBS, rotations
 * as the re-orthonormalized blended skinning rotation composed with the
 * canonical quaternion. Writes into `out`.
 */
export function animate(
  avatar: Avatar,
  theta: ArrayLike<number>,
  phi: ArrayLike<number>,
  out: PosedSet,
): void {
  const { numPoints: M, numJoints: J, nExpr: E, nPoseCorr: P } = avatar;
  if (phi.length !== E) throw new Error(`phi length ${phi.length} != n_expr = ${E}`);
  const transforms = jointTransforms(avatar, theta);

  // pose feature: flattened (R - I) of non-root joints
  const feat = new Float64Array(P);
  for (let j = 1; j < J; j++) {
    const r = axisAngleToMatrix(theta[3 * j], theta[3 * j + 1], theta[3 * j + 2]);
    for (let i = 0; i < 9; i++) {
      feat[(j - 1) * 9 + i] = r[i] - (i % 4 === 0 ? 1 : 0);
    }
  }

  const eb = avatar.exprBasis, pb = avatar.poseBasis, w = avatar.skinningWeights;
  for (let k = 0; k < M; k++) {
    let x = avatar.positions[3 * k];
    let y = avatar.positions[3 * k + 1];
    let z = avatar.positions[3 * k + 2];
    const ebase = k * 3 * E;
    for (let e = 0; e < E; e++) {
      const c = phi[e] as number;
      x += eb[ebase + e] * c;
      y += eb[ebase + E + e] * c;
      z += eb[ebase + 2 * E + e] * c;
    }
    const pbase = k * 3 * P;
    for (let p = 0; p < P; p++) {
      const c = feat[p];
      x += pb[pbase + p] * c;
      y += pb[pbase + P + p] * c;
      z += pb[pbase + 2 * P + p] * c;
    }

    // blend joint transforms
    let b00 = 0, b01 = 0, b02 = 0, b03 = 0;
    let b10 = 0, b11 = 0, b12 = 0, b13 = 0;
    let b20 = 0, b21 = 0, b22 = 0, b23 = 0;
    for (let j = 0; j < J; j++) {
      const wj = w[k * J + j];
      if (wj === 0) continue;
      const t = j * 12;
      b00 += wj * transforms[t]; b01 += wj * transforms[t + 1];
      b02 += wj * transforms[t + 2]; b03 += wj * transforms[t + 3];
      b10 += wj * transforms[t + 4]; b11 += wj * transforms[t + 5];
      b12 += wj * transforms[t + 6]; b13 += wj * transforms[t + 7];
      b20 += wj * transforms[t + 8]; b21 += wj * transforms[t + 9];
      b22 += wj * transforms[t + 10]; b23 += wj * transforms[t + 11];
    }
    out.positions[3 * k] = b00 * x + b01 * y + b02 * z + b03;
    out.positions[3 * k + 1] = b10 * x + b11 * y + b12 * z + b13;
    out.positions[3 * k + 2] = b20 * x + b21 * y + b22 * z + b23;

    // Gram-Schmidt on the blended 3x3 columns, then matrix -> quaternion
    const n0 = Math.hypot(b00, b10, b20);
    const r00 = b00 / n0, r10 = b10 / n0, r20 = b20 / n0;
    const d = r00 * b01 + r10 * b11 + r20 * b21;
    const u1x = b01 - d * r00, u1y = b11 - d * r10, u1z = b21 - d * r20;
    const n1 = Math.hypot(u1x, u1y, u1z);
    const r01 = u1x / n1, r11 = u1y / n1, r21 = u1z / n1;
    const r02 = r10 * r21 - r20 * r11;
    const r12 = r20 * r01 - r00 * r21;
    const r22 = r00 * r11 - r10 * r01;

    const tr = r00 + r11 + r22;
    let qw = Math.sqrt(Math.max(0, 1 + tr)) / 2;
    let qx = Math.sqrt(Math.max(0, 1 + r00 - r11 - r22)) / 2;
    let qy = Math.sqrt(Math.max(0, 1 - r00 + r11 - r22)) / 2;
    let qz = Math.sqrt(Math.max(0, 1 - r00 - r11 + r22)) / 2;
    if (r21 - r12 < 0) qx = -qx;
    if (r02 - r20 < 0) qy = -qy;
    if (r10 - r01 < 0) qz = -qz;

    const cw = avatar.rotations[4 * k], cx = avatar.rotations[4 * k + 1];
    const cy = avatar.rotations[4 * k + 2], cz = avatar.rotations[4 * k + 3];
    const ow = qw * cw - qx * cx - qy * cy - qz * cz;
    const ox = qw * cx + qx * cw + qy * cz - qz * cy;
    const oy = qw * cy - qx * cz + qy * cw + qz * cx;
    const oz = qw * cz + qx * cy - qy * cx + qz * cw;
    const n = Math.hypot(ow, ox, oy, oz);
    out.rotations[4 * k] = ow / n;
    out.rotations[4 * k + 1] = ox / n;
    out.rotations[4 * k + 2] = oy / n;
    out.rotations[4 * k + 3] = oz / n;
  }
}
