"""Generate the cross-check fixtures: a baked asset, a driving stream, and
reference renders produced by the Python CLI (PPM = bit-exact reference).

Usage: python3 make_fixtures.py OUTDIR
"""

import json
import pathlib
import sys

import numpy as np

from splatar import bake, save, write_driving_stream
from splatar import synth
from splatar.cli import main as cli_main

SIZE = 96
FRAMES = 5


def run(outdir: pathlib.Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(2024)
    rig = synth.make_mini_rig(rng, n_points=40, joints=3, n_shape=6, n_expr=8)
    avatar = bake(rig, rng.standard_normal(rig.n_shape) * 0.4, iterations=2)
    asset_path = outdir / "avatar.gava"
    save(avatar, asset_path)

    frames = synth.make_driving_frames(
        rng, FRAMES, avatar.n_expr, avatar.num_joints, SIZE, SIZE,
        pose_amp=0.2, expr_amp=1.2,
    )
    stream_path = outdir / "drive.jsonl"
    write_driving_stream(stream_path, frames)

    code = cli_main([
        "render", str(asset_path), str(stream_path),
        "-o", str(outdir / "frames"), "--size", f"{SIZE}x{SIZE}", "--ppm",
    ])
    if code != 0:
        raise SystemExit(f"reference render failed with exit code {code}")

    (outdir / "meta.json").write_text(json.dumps({
        "points": avatar.num_points,
        "n_expr": avatar.n_expr,
        "joints": avatar.num_joints,
        "frames": FRAMES,
        "size": SIZE,
    }))
    print(f"fixtures written to {outdir}")


if __name__ == "__main__":
    run(pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else ".generated"))
