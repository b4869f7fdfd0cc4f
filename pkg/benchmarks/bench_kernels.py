"""Compare the compiled and NumPy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size 64] [--channels 16]

Times a full-map conv and maxpool per backend, then one fused tiled run of a
small network with each backend forced in turn, and checks that all outputs
are bit-identical.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from mafat import kernels


def bench_kernel(mod, x, w, repeat):
    h, wd = x.shape[:2]
    conv = min(timeit.repeat(
        lambda: mod.conv2d_region(x, 0, 0, h, wd, w, None, False, 1, 1, 0, h - 1, 0, wd - 1),
        number=1, repeat=repeat))
    pool = min(timeit.repeat(
        lambda: mod.maxpool_region(x, 0, 0, 2, 2, 0, h // 2 - 1, 0, wd // 2 - 1),
        number=1, repeat=repeat))
    out = mod.conv2d_region(x, 0, 0, h, wd, w, None, False, 1, 1, 0, h - 1, 0, wd - 1)
    return conv, pool, out


SIM_SNIPPET = """
import time
from mafat import kernels
from mafat.executor import random_input, random_weights, run_mafat, ScheduleMode
from mafat.network import parse_network
from mafat.search import MafatConfig
net = parse_network("input 96 96 3\\nconv 16 3 1\\nmax 2 2\\nconv 32 3 1\\nconv 16 1 1\\nconv 32 3 1")
x, w = random_input(net, 0), random_weights(net, 0)
t0 = time.perf_counter()
run = run_mafat(net, x, w, MafatConfig((3, 3), 2, (2, 2)), ScheduleMode.REUSE)
print(kernels.BACKEND, time.perf_counter() - t0, run.output.tobytes().hex()[:32])
"""


def bench_simulation():
    rows = []
    for pure in ("0", "1"):
        env = {**os.environ, "MAFAT_PURE_PYTHON": pure}
        out = subprocess.run([sys.executable, "-c", SIM_SNIPPET], env=env, check=True,
                             capture_output=True, text=True).stdout.split()
        rows.append((out[0], float(out[1]), out[2]))
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--channels", type=int, default=16)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, (args.size, args.size, args.channels)).astype(np.float32)
    w = rng.uniform(-1, 1, (3, 3, args.channels, args.channels)).astype(np.float32)

    backends = kernels.backends()
    if "cython" not in backends:
        print("compiled backend not built; only the NumPy backend is available")
    results = {}
    print(f"{'backend':<8} {'conv3x3 ms':>11} {'max2x2 ms':>10}")
    for name, mod in sorted(backends.items()):
        conv, pool, out = bench_kernel(mod, x, w, args.repeat)
        results[name] = out
        print(f"{name:<8} {conv * 1e3:>11.2f} {pool * 1e3:>10.3f}")
    if len(results) == 2:
        same = np.array_equal(results["cython"].view(np.uint32), results["python"].view(np.uint32))
        print(f"bit-identical conv outputs: {str(same).lower()}")

    print(f"\n{'backend':<8} {'fused run s':>11}  output digest")
    sims = bench_simulation()
    for name, secs, digest in sims:
        print(f"{name:<8} {secs:>11.3f}  {digest}")
    if len({d for _, _, d in sims}) == 1:
        print("fused runs agree across backends")
    return 0


if __name__ == "__main__":
    sys.exit(main())
