// The secondary acceptance cross-check: for sampled frames of a reference
// driving stream, the viewer core's rendered pixels must match the CLI's
// renders within 1/255 per channel (same asset, same stream).

import { beforeAll, describe, expect, it } from "vitest";

import { animate, makePosedSet } from "../src/core/animate.js";
import { Avatar, parseAvatar } from "../src/core/avatar.js";
import { makeFramebuffer, render } from "../src/core/render.js";
import { parseDrivingStream } from "../src/core/stream.js";
import { ensureFixtures, fixtureArrayBuffer, parsePPM, readFixture } from "./helpers.js";

let avatar: Avatar;
let meta: { frames: number; size: number };

beforeAll(() => {
  ensureFixtures();
  avatar = parseAvatar(fixtureArrayBuffer("avatar.gava"));
  meta = JSON.parse(readFixture("meta.json").toString());
}, 120_000);

describe("viewer core vs CLI renders", () => {
  it("matches every reference frame within 1/255 per channel", () => {
    const size = meta.size;
    const frames = parseDrivingStream(readFixture("drive.jsonl").toString(), size, size);
    expect(frames.length).toBe(meta.frames);

    const out = makePosedSet(avatar);
    const fb = makeFramebuffer(size, size, [0, 0, 0]);
    for (let f = 0; f < frames.length; f++) {
      const frame = frames[f];
      animate(avatar, frame.theta, frame.phi, out);
      render(avatar, out, frame.camera, fb);

      const ref = parsePPM(readFixture(`frames/frame_${String(f).padStart(5, "0")}.ppm`));
      expect(ref.width).toBe(size);
      expect(ref.height).toBe(size);

      let worst = 0;
      let worstAt = -1;
      for (let p = 0; p < size * size * 3; p++) {
        const mine = Math.max(0, Math.min(255, Math.round(fb.rgb[p] * 255)));
        const diff = Math.abs(mine - ref.rgb[p]);
        if (diff > worst) {
          worst = diff;
          worstAt = p;
        }
      }
      // 1/255 per channel = at most one 8-bit step anywhere in the image
      expect(worst, `frame ${f}, flat index ${worstAt}`).toBeLessThanOrEqual(1);
    }
  });
});
