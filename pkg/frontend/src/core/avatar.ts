// Canonical Gaussian avatar asset: typed views over the container sections
// plus the validation the loader runs before an asset is accepted.

import { ContainerError, parseContainer, Section } from "./container.js";

export interface Avatar {
  numPoints: number;
  numJoints: number;
  nExpr: number;
  nPoseCorr: number;
  positions: Float32Array; // (M, 3)
  colors: Float32Array; // (M, 3)
  opacities: Float32Array; // (M,)
  scales: Float32Array; // (M, 3)
  rotations: Float32Array; // (M, 4) w,x,y,z
  exprBasis: Float32Array; // (M, 3, nExpr)
  poseBasis: Float32Array; // (M, 3, 9*(J-1))
  skinningWeights: Float32Array; // (M, J)
  joints: Float32Array; // (J, 3)
  parents: Int32Array; // (J,)
}

const REQUIRED = [
  "positions", "colors", "opacities", "scales", "rotations",
  "expr_basis", "pose_basis", "skinning_weights", "joints", "parents",
] as const;

function f32(sections: Map<string, Section>, name: string): Float32Array {
  const s = sections.get(name);
  if (!s) throw new ContainerError("required section missing", name);
  if (s.dtype !== "<f4") throw new ContainerError(`expected <f4, got ${s.dtype}`, name);
  return s.data as Float32Array;
}

export function parseAvatar(buffer: ArrayBuffer): Avatar {
  const sections = parseContainer(buffer);
  for (const name of REQUIRED) {
    if (!sections.has(name)) throw new ContainerError("required section missing", name);
  }
  const positions = sections.get("positions")!;
  const joints = sections.get("joints")!;
  const parentsSec = sections.get("parents")!;
  if (parentsSec.dtype !== "<i4") {
    throw new ContainerError("parents must be <i4", "parents");
  }
  const M = positions.shape[0];
  const J = joints.shape[0];
  const exprSec = sections.get("expr_basis")!;
  const poseSec = sections.get("pose_basis")!;

  const avatar: Avatar = {
    numPoints: M,
    numJoints: J,
    nExpr: exprSec.shape[2],
    nPoseCorr: poseSec.shape[2],
    positions: f32(sections, "positions"),
    colors: f32(sections, "colors"),
    opacities: f32(sections, "opacities"),
    scales: f32(sections, "scales"),
    rotations: f32(sections, "rotations"),
    exprBasis: f32(sections, "expr_basis"),
    poseBasis: f32(sections, "pose_basis"),
    skinningWeights: f32(sections, "skinning_weights"),
    joints: f32(sections, "joints"),
    parents: parentsSec.data as Int32Array,
  };
  const finding = validateAvatar(avatar);
  if (finding) throw new ContainerError(finding.message, finding.section);
  return avatar;
}

export function validateAvatar(a: Avatar): { section: string; message: string } | null {
  const { numPoints: M, numJoints: J } = a;
  if (a.positions.length !== M * 3) return bad("positions", "wrong length");
  if (a.colors.length !== M * 3) return bad("colors", "wrong length");
  if (a.opacities.length !== M) return bad("opacities", "wrong length");
  for (let k = 0; k < M; k++) {
    const o = a.opacities[k];
    if (!(o > 0 && o < 1)) return bad("opacities", `value ${o} outside (0, 1)`);
  }
  if (a.scales.length !== M * 3) return bad("scales", "wrong length");
  for (let i = 0; i < a.scales.length; i++) {
    if (!(a.scales[i] > 0)) return bad("scales", "non-positive scale");
  }
  if (a.rotations.length !== M * 4) return bad("rotations", "wrong length");
  for (let k = 0; k < M; k++) {
    const n = Math.hypot(
      a.rotations[4 * k], a.rotations[4 * k + 1],
      a.rotations[4 * k + 2], a.rotations[4 * k + 3],
    );
    if (Math.abs(n - 1) > 1e-6) return bad("rotations", `quaternion norm ${n}`);
  }
  if (a.exprBasis.length !== M * 3 * a.nExpr) return bad("expr_basis", "wrong length");
  if (a.poseBasis.length !== M * 3 * a.nPoseCorr) return bad("pose_basis", "wrong length");
  if (a.nPoseCorr !== 9 * (J - 1)) return bad("pose_basis", "width is not 9*(J-1)");
  if (a.skinningWeights.length !== M * J) return bad("skinning_weights", "wrong length");
  for (let k = 0; k < M; k++) {
    let s = 0;
    for (let j = 0; j < J; j++) s += a.skinningWeights[k * J + j];
    if (Math.abs(s - 1) > 1e-5) return bad("skinning_weights", `row ${k} sums to ${s}`);
  }
  if (a.parents.length !== J || a.parents[0] >= 0) return bad("parents", "no root joint");
  for (let j = 1; j < J; j++) {
    if (a.parents[j] < 0 || a.parents[j] >= j) return bad("parents", "not a tree");
  }
  return null;
}

function bad(section: string, message: string) {
  return { section, message };
}
