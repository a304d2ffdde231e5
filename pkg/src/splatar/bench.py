"""Throughput benchmark: animate-only, render-only, and end-to-end FPS.

Protocol: rates are averaged over the requested frame count (default 100);
bake/reconstruction time is excluded, as is the one-time kernel JIT warmup.
"""

from __future__ import annotations

import time

import numpy as np

from . import _kernels, parallel, synth
from .animator import PosedGaussianSet, animate
from .asset import CanonicalGaussianAvatar
from .errors import InvalidParamsError
from .render import RenderTarget, render


def run_benchmark(
    avatar: CanonicalGaussianAvatar,
    frames: int = 100,
    threads: int | None = None,
    width: int = 256,
    height: int = 256,
    seed: int = 0,
) -> dict:
    """Measure steps/s for the animator, the rasterizer, and the combined
    loop on ``frames`` random driving frames.

    Returns a dict with animate_fps / render_fps / end_to_end_fps plus the
    measured per-stage wall times.
    """
    if frames < 1:
        raise InvalidParamsError("frames must be >= 1")
    rng = np.random.default_rng(seed)
    driving = synth.make_driving_frames(
        rng, frames, avatar.n_expr, avatar.num_joints, width, height
    )
    out = PosedGaussianSet.for_avatar(avatar)
    target = RenderTarget(width, height)
    n_threads = parallel.resolve_threads(threads)

    with parallel.thread_limit(n_threads):
        _kernels.warmup()
        animate(avatar, driving[0].theta, driving[0].phi, out)
        render(out, driving[0].camera, target)

        t0 = time.perf_counter()
        for frame in driving:
            animate(avatar, frame.theta, frame.phi, out)
        animate_s = time.perf_counter() - t0

        t0 = time.perf_counter()
        for frame in driving:
            render(out, frame.camera, target)
        render_s = time.perf_counter() - t0

        t0 = time.perf_counter()
        for frame in driving:
            animate(avatar, frame.theta, frame.phi, out)
            render(out, frame.camera, target)
        end_to_end_s = time.perf_counter() - t0

    return {
        "frames": frames,
        "threads": n_threads,
        "points": avatar.num_points,
        "resolution": [width, height],
        "animate_fps": frames / animate_s,
        "render_fps": frames / render_s,
        "end_to_end_fps": frames / end_to_end_s,
        "animate_s": animate_s,
        "render_s": render_s,
        "end_to_end_s": end_to_end_s,
    }
