import { beforeAll, describe, expect, it } from "vitest";

import { animate, makePosedSet } from "../src/core/animate.js";
import { Avatar, parseAvatar } from "../src/core/avatar.js";
import { ensureFixtures, fixtureArrayBuffer } from "./helpers.js";

let avatar: Avatar;

beforeAll(() => {
  ensureFixtures();
  avatar = parseAvatar(fixtureArrayBuffer("avatar.gava"));
}, 120_000);

describe("core animate", () => {
  it("neutral parameters reproduce the canonical cloud", () => {
    const out = makePosedSet(avatar);
    animate(avatar, new Float64Array(3 * avatar.numJoints), new Float64Array(avatar.nExpr), out);
    let worst = 0;
    for (let i = 0; i < out.positions.length; i++) {
      worst = Math.max(worst, Math.abs(out.positions[i] - avatar.positions[i]));
    }
    expect(worst).toBeLessThan(1e-6);
    for (let k = 0; k < avatar.numPoints; k++) {
      let dot = 0;
      for (let c = 0; c < 4; c++) {
        dot += out.rotations[4 * k + c] * avatar.rotations[4 * k + c];
      }
      expect(Math.abs(dot)).toBeGreaterThan(1 - 1e-6);
    }
  });

  it("a one-hot expression slider adds exactly that basis column", () => {
    const out = makePosedSet(avatar);
    const phi = new Float64Array(avatar.nExpr);
    const idx = 2;
    phi[idx] = 1.0;
    animate(avatar, new Float64Array(3 * avatar.numJoints), phi, out);
    const E = avatar.nExpr;
    let worst = 0;
    for (let k = 0; k < avatar.numPoints; k++) {
      for (let c = 0; c < 3; c++) {
        const expected = avatar.positions[3 * k + c] + avatar.exprBasis[(k * 3 + c) * E + idx];
        worst = Math.max(worst, Math.abs(out.positions[3 * k + c] - expected));
      }
    }
    expect(worst).toBeLessThan(1e-6);
  });

  it("posed rotations stay unit quaternions", () => {
    const out = makePosedSet(avatar);
    const theta = new Float64Array(3 * avatar.numJoints);
    for (let i = 0; i < theta.length; i++) theta[i] = 0.3 * Math.sin(i + 1);
    animate(avatar, theta, new Float64Array(avatar.nExpr), out);
    for (let k = 0; k < avatar.numPoints; k++) {
      const n = Math.hypot(
        out.rotations[4 * k], out.rotations[4 * k + 1],
        out.rotations[4 * k + 2], out.rotations[4 * k + 3],
      );
      expect(Math.abs(n - 1)).toBeLessThan(1e-5);
    }
  });

  it("rejects mismatched parameter lengths", () => {
    const out = makePosedSet(avatar);
    expect(() =>
      animate(avatar, new Float64Array(1), new Float64Array(avatar.nExpr), out),
    ).toThrow(/theta/);
    expect(() =>
      animate(avatar, new Float64Array(3 * avatar.numJoints), new Float64Array(1), out),
    ).toThrow(/phi/);
  });
});
