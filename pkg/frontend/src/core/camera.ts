// Pinhole camera plus the orbit parameterization the viewer drives.

export interface Camera {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  w2c: Float64Array; // 16 floats, row-major 4x4 rigid world-to-camera
  width: number;
  height: number;
}

export interface Orbit {
  azimuth: number; // radians
  elevation: number; // radians
  distance: number; // meters, > 0
}

/** Orbit camera looking at the origin; matches the runtime's convention
 * (camera space: x right, y down, z forward). */
export function orbitCamera(
  orbit: Orbit,
  width: number,
  height: number,
  focalScale = 1.4,
): Camera {
  const { azimuth, elevation } = orbit;
  const distance = Math.max(orbit.distance, 1e-3);
  const ca = Math.cos(azimuth), sa = Math.sin(azimuth);
  const ce = Math.cos(elevation), se = Math.sin(elevation);
  const eye = [distance * sa * ce, distance * se, distance * ca * ce];
  const fwd = normalize([-eye[0], -eye[1], -eye[2]]);
  let right = cross([0, 1, 0], fwd);
  const nr = Math.hypot(...right);
  right = nr < 1e-9 ? [1, 0, 0] : right.map((v) => v / nr);
  const up = cross(fwd, right);
  const rows = [right, up.map((v) => -v), fwd];
  const w2c = new Float64Array(16);
  for (let r = 0; r < 3; r++) {
    w2c[4 * r] = rows[r][0];
    w2c[4 * r + 1] = rows[r][1];
    w2c[4 * r + 2] = rows[r][2];
    w2c[4 * r + 3] = -(rows[r][0] * eye[0] + rows[r][1] * eye[1] + rows[r][2] * eye[2]);
  }
  w2c[15] = 1;
  const f = focalScale * Math.min(width, height);
  return {
    fx: f, fy: f, cx: (width - 1) / 2, cy: (height - 1) / 2,
    w2c, width, height,
  };
}

function cross(a: number[], b: number[]): number[] {
  return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
}

function normalize(v: number[]): number[] {
  const n = Math.hypot(...v);
  return v.map((x) => x / n);
}
