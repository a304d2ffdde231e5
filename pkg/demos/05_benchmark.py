"""Throughput benchmark on an 81,424-point asset with FLAME-like widths.

Reports animate-only, render-only, and end-to-end rates averaged over the
frame count (default 100), excluding bake and JIT warmup. Thread counts are
clamped to the machine.
"""

import json
import sys

from splatar import synth
from splatar.bench import run_benchmark

frames = int(sys.argv[1]) if len(sys.argv) > 1 else 100

print("building 81,424-point benchmark asset (J=5, 100 expression, "
      "36 pose-corrective coefficients)...")
avatar = synth.make_bench_avatar()

for threads in (1, 8):
    result = run_benchmark(avatar, frames=frames, threads=threads)
    print(f"--threads {threads} (clamped to {result['threads']}):")
    print(json.dumps(result, indent=2))
