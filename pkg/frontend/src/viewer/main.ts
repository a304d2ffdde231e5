// Browser entry point: load an avatar asset, steer it with sliders or a
// driving stream, orbit with the mouse, and blit the core's framebuffer
// into a canvas. All math is in ../core; this file is plumbing only.

import { animate, makePosedSet, PosedSet } from "../core/animate.js";
import { Framebuffer, makeFramebuffer, render, toRGBA } from "../core/render.js";
import { EXPR_RANGE, POSE_RANGE, ViewerSession } from "./state.js";

const VIEW = 384;
const MAX_SLIDERS = 10;

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const banner = document.getElementById("banner")!;
const fpsLabel = document.getElementById("fps")!;
const sliderBox = document.getElementById("sliders")!;
const playBtn = document.getElementById("play") as HTMLButtonElement;
const scrub = document.getElementById("scrub") as HTMLInputElement;

const session = new ViewerSession(VIEW, VIEW);
let posed: PosedSet | null = null;
let fb: Framebuffer = makeFramebuffer(VIEW, VIEW, [0.04, 0.04, 0.08]);
let rgba = new Uint8ClampedArray(VIEW * VIEW * 4);
let image = new ImageData(rgba, VIEW, VIEW);

function showBanner(text: string | null, isError: boolean) {
  banner.textContent = text ?? "";
  banner.className = text ? (isError ? "error" : "notice") : "";
}

function refreshBanner() {
  if (session.error) showBanner(session.error, true);
  else showBanner(session.notice, false);
}

function buildSliders() {
  sliderBox.innerHTML = "";
  if (!session.avatar) return;
  const add = (label: string, range: [number, number],
               onInput: (v: number) => void) => {
    const row = document.createElement("label");
    row.className = "slider-row";
    const span = document.createElement("span");
    span.textContent = label;
    const input = document.createElement("input");
    input.type = "range";
    input.min = String(range[0]);
    input.max = String(range[1]);
    input.step = "0.01";
    input.value = "0";
    input.addEventListener("input", () => onInput(Number(input.value)));
    row.append(span, input);
    sliderBox.append(row);
  };
  const nExpr = Math.min(session.phi.length, MAX_SLIDERS);
  for (let i = 0; i < nExpr; i++) {
    add(`expr ${i}`, EXPR_RANGE, (v) => session.setExpression(i, v));
  }
  const nPose = Math.min(session.theta.length, MAX_SLIDERS);
  for (let i = 0; i < nPose; i++) {
    add(`pose ${i}`, POSE_RANGE, (v) => session.setPose(i, v));
  }
}

async function loadAssetFromUrl(url: string) {
  try {
    const resp = await fetch(url);
    if (!resp.ok) {
      showBanner(`asset fetch failed: HTTP ${resp.status}`, true);
      return;
    }
    loadAssetBuffer(await resp.arrayBuffer());
  } catch (e) {
    showBanner(`asset fetch failed: ${(e as Error).message}`, true);
  }
}

function loadAssetBuffer(buffer: ArrayBuffer) {
  if (session.loadAsset(buffer)) {
    const avatar = session.avatar!;
    posed = makePosedSet(avatar);
    buildSliders();
  } else {
    posed = null;
  }
  refreshBanner();
}

(document.getElementById("asset-file") as HTMLInputElement).addEventListener(
  "change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (file) loadAssetBuffer(await file.arrayBuffer());
  });

(document.getElementById("asset-url") as HTMLFormElement).addEventListener(
  "submit", (ev) => {
    ev.preventDefault();
    const url = (document.getElementById("asset-url-text") as HTMLInputElement).value;
    if (url) void loadAssetFromUrl(url);
  });

(document.getElementById("stream-file") as HTMLInputElement).addEventListener(
  "change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    if (session.loadSequence(await file.text())) {
      scrub.max = String(session.playback!.frames.length - 1);
      scrub.value = "0";
    }
    refreshBanner();
  });

playBtn.addEventListener("click", () => {
  if (!session.playback) return;
  if (session.playback.playing) {
    session.pause();
    playBtn.textContent = "play";
  } else {
    session.play(performance.now());
    playBtn.textContent = "pause";
  }
});

scrub.addEventListener("input", () => {
  session.seek(Number(scrub.value), performance.now());
});

// mouse orbit: drag rotates, wheel zooms
let dragging = false;
let lastX = 0, lastY = 0;
canvas.addEventListener("mousedown", (ev) => {
  dragging = true;
  lastX = ev.clientX;
  lastY = ev.clientY;
});
window.addEventListener("mouseup", () => (dragging = false));
window.addEventListener("mousemove", (ev) => {
  if (!dragging) return;
  const o = session.orbit;
  session.setOrbit({
    azimuth: o.azimuth + (ev.clientX - lastX) * 0.01,
    elevation: Math.min(1.4, Math.max(-1.4, o.elevation + (ev.clientY - lastY) * 0.01)),
  });
  lastX = ev.clientX;
  lastY = ev.clientY;
});
canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  session.setOrbit({ distance: session.orbit.distance * (ev.deltaY > 0 ? 1.1 : 0.9) });
});

function frame(nowMs: number) {
  const job = session.tick(nowMs);
  if (job && session.avatar && posed) {
    animate(session.avatar, job.theta, job.phi, posed);
    render(session.avatar, posed, job.camera, fb);
    toRGBA(fb, rgba);
    ctx.putImageData(image, 0, 0);
    if (job.playbackFrame !== null) scrub.value = String(job.playbackFrame);
    session.completeFrame(performance.now());
    fpsLabel.textContent = `${session.fps.toFixed(1)} fps`;
  }
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);

const params = new URLSearchParams(location.search);
const assetUrl = params.get("asset");
if (assetUrl) void loadAssetFromUrl(assetUrl);
else showBanner("load an avatar asset (.gava) to begin", false);
