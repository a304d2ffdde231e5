"""Operator entry point: bake, render, bench, validate.

JSON goes to stdout, human logs to stderr. Exit codes: 0 ok, 1 I/O error,
2 validation failure. Every subcommand is deterministic given --seed, and
outputs are byte-identical across --threads values.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import asset as asset_mod
from . import bench as bench_mod
from . import container, parallel
from .animator import PosedGaussianSet, animate
from .asset import GaussianAttributes, bake, load, read_driving_stream, save, validate
from .errors import ContainerError, SplatarError, StreamParseError
from .render import RenderTarget, render, render_oracle
from .rig import load_rig

log = logging.getLogger("splatar")

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2


def _parse_size(text: str) -> tuple:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"size must be WxH, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splatar", description=__doc__)
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default: ${parallel.THREADS_ENV} or all cores)")
    p.add_argument("--seed", type=int, default=0, help="seed for any randomized step")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bake", help="precompute a canonical Gaussian avatar asset")
    b.add_argument("rig", type=Path, help="rig container or FLAME-export JSON")
    b.add_argument("beta", type=Path, help="JSON file with the shape coefficient list")
    b.add_argument("-o", "--output", type=Path, required=True)
    b.add_argument("--iterations", type=int, default=2, help="subdivision passes")
    b.add_argument("--attrs", type=Path, default=None,
                   help="container with per-point colors/opacities/scales/rotations/offsets")

    r = sub.add_parser("render", help="animate and rasterize a driving stream")
    r.add_argument("asset", type=Path)
    r.add_argument("stream", type=Path, help="JSON Lines driving stream")
    r.add_argument("-o", "--output", type=Path, required=True, help="output directory")
    r.add_argument("--size", type=_parse_size, default=(256, 256))
    r.add_argument("--oracle", action="store_true",
                   help="also run the per-pixel oracle and fail on mismatch")
    r.add_argument("--ppm", action="store_true", help="write PPM twins of every PNG")

    n = sub.add_parser("bench", help="throughput benchmark over synthetic frames")
    n.add_argument("asset", type=Path)
    n.add_argument("--frames", type=int, default=100)
    n.add_argument("--size", type=_parse_size, default=(256, 256))

    v = sub.add_parser("validate", help="check every asset invariant")
    v.add_argument("asset", type=Path)

    m = sub.add_parser("metrics", help="image metrics between two renders")
    m.add_argument("image_a", type=Path)
    m.add_argument("image_b", type=Path)
    return p


def cmd_bake(args) -> int:
    rig = load_rig(args.rig)
    with open(args.beta) as f:
        beta = np.asarray(json.load(f), dtype=np.float64)
    offsets = None
    attrs = None
    if args.attrs is not None:
        sections = container.read_container(args.attrs)
        offsets = sections.get("offsets")
        attrs = GaussianAttributes(
            colors=sections.get("colors"),
            opacities=sections.get("opacities"),
            scales=sections.get("scales"),
            rotations=sections.get("rotations"),
        )
    avatar = bake(rig, beta, args.iterations, offsets=offsets, attributes=attrs)
    save(avatar, args.output)
    sizes = {name: list(getattr(avatar, name).shape) for name in asset_mod.SECTION_ORDER}
    print(json.dumps({
        "asset": str(args.output),
        "points": avatar.num_points,
        "iterations": args.iterations,
        "sections": sizes,
        "bytes": args.output.stat().st_size,
    }))
    return EXIT_OK


def cmd_render(args) -> int:
    avatar = load(args.asset)
    args.output.mkdir(parents=True, exist_ok=True)
    width, height = args.size
    out = PosedGaussianSet.for_avatar(avatar)
    target = RenderTarget(width, height)
    oracle_target = RenderTarget(width, height) if args.oracle else None
    written = []
    max_oracle_err = 0.0
    for i, frame in enumerate(read_driving_stream(args.stream)):
        animate(avatar, frame.theta, frame.phi, out)
        camera = frame.camera.sized(width, height)
        render(out, camera, target, threads=args.threads)
        if args.oracle:
            render_oracle(out, camera, oracle_target)
            err = float(np.max(np.abs(target.rgb - oracle_target.rgb)))
            max_oracle_err = max(max_oracle_err, err)
            if err > 1e-5:
                log.error("frame %d: tiled render differs from oracle by %.3g", i, err)
                return EXIT_VALIDATION
        stem = args.output / f"frame_{i:05d}"
        target.save_png(stem.with_suffix(".png"))
        target.save_silhouette_png(args.output / f"frame_{i:05d}_alpha.png")
        if args.ppm:
            target.save_ppm(stem.with_suffix(".ppm"))
        written.append(stem.with_suffix(".png").name)
    result = {"frames": len(written), "directory": str(args.output), "files": written}
    if args.oracle:
        result["max_oracle_abs_err"] = max_oracle_err
    print(json.dumps(result))
    return EXIT_OK


def cmd_bench(args) -> int:
    avatar = load(args.asset)
    width, height = args.size
    report = bench_mod.run_benchmark(
        avatar, frames=args.frames, threads=args.threads,
        width=width, height=height, seed=args.seed,
    )
    print(json.dumps(report))
    return EXIT_OK


def cmd_validate(args) -> int:
    avatar = load_asset_unchecked(args.asset)
    findings = validate(avatar)
    print(json.dumps({
        "asset": str(args.asset),
        "valid": not findings,
        "findings": [f.as_dict() for f in findings],
    }))
    return EXIT_OK if not findings else EXIT_VALIDATION


def cmd_metrics(args) -> int:
    from PIL import Image

    from .losses import l1_loss, psnr, ssim

    def read(path):
        return np.asarray(Image.open(path).convert("RGB"), dtype=np.float64) / 255.0

    a, b = read(args.image_a), read(args.image_b)
    print(json.dumps({
        "l1": l1_loss(a, b),
        "psnr_db": psnr(a, b),
        "ssim": ssim(a, b),
    }))
    return EXIT_OK


def load_asset_unchecked(path: Path):
    """Parse the container without raising on invariants (cmd_validate wants
    the full findings list, not the first error)."""
    sections = container.read_container(path)
    missing = [n for n in asset_mod.SECTION_ORDER if n not in sections]
    if missing:
        raise ContainerError(f"{missing[0]}: required section missing")
    return asset_mod.CanonicalGaussianAvatar(
        **{n: sections[n] for n in asset_mod.SECTION_ORDER}
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    handlers = {
        "bake": cmd_bake,
        "render": cmd_render,
        "bench": cmd_bench,
        "validate": cmd_validate,
        "metrics": cmd_metrics,
    }
    try:
        with parallel.thread_limit(args.threads):
            return handlers[args.command](args)
    except StreamParseError as e:
        log.error("driving stream: %s", e)
        return EXIT_VALIDATION
    except (OSError, ContainerError) as e:
        log.error("%s", e)
        return EXIT_IO
    except SplatarError as e:
        log.error("%s", e)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
