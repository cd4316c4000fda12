"""Compare the compiled and pure-Python kernel backends.

Times the three hot kernels (matmul, gram, solve_spd) and a full engine
run on a mid-size synthetic instance, once per backend.  Backends are
selected the same way the library does it, via the DMCSIM_KERNELS
environment variable, so each backend runs in a fresh subprocess.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

SHAPES = {
    "matmul 200x8 @ 8x240": (200, 8, 240),
    "matmul 500x32 @ 32x600": (500, 32, 600),
    "gram 200x8": (200, 8),
    "gram 500x32": (500, 32),
    "solve_spd 8": (8,),
    "solve_spd 64": (64,),
}


def bench_one_backend(repeats):
    import numpy as np

    from dmcsim import data, engine, linalg, topology

    rng = np.random.default_rng(0)
    results = {"backend": linalg.BACKEND}
    for label, shape in SHAPES.items():
        if label.startswith("matmul"):
            m, k, n = shape
            a = rng.standard_normal((m, k))
            b = rng.standard_normal((k, n))
            stmt = lambda: linalg.matmul(a, b)
        elif label.startswith("gram"):
            m, r = shape
            a = rng.standard_normal((m, r))
            stmt = lambda: linalg.gram(a)
        else:
            (r,) = shape
            a = rng.standard_normal((r, r))
            s = a @ a.T + r * np.eye(r)
            b = rng.standard_normal((r, r))
            stmt = lambda: linalg.solve_spd(s, b)
        results[label] = min(timeit.repeat(stmt, number=200,
                                           repeat=repeats)) / 200

    ratings, _ = data.synth_low_rank(200, 240, 8, 0.4, 0.0, 2)
    ds = data.split(ratings, 0.75, 11)
    shards = data.partition_columns(ds.train, 8)
    topo = topology.ring(8)

    def full_run():
        cfg = engine.EngineConfig(rank=8, iterations=50, seed=9)
        agents = engine.init_agents(shards, topo, cfg)
        engine.run(agents, topo, cfg, ds.train, ds.test)

    results["engine run (8 agents, 50 iters)"] = min(
        timeit.repeat(full_run, number=1, repeat=repeats))
    return results


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--worker", action="store_true",
                        help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        print(json.dumps(bench_one_backend(args.repeats)))
        return

    rows = {}
    for backend in ("c", "python"):
        env = dict(os.environ, DMCSIM_KERNELS=backend)
        out = subprocess.run(
            [sys.executable, __file__, "--worker",
             f"--repeats={args.repeats}"],
            env=env, capture_output=True, text=True, check=True)
        rows[backend] = json.loads(out.stdout)
        assert rows[backend]["backend"] == backend

    labels = [k for k in rows["c"] if k != "backend"]
    width = max(len(l) for l in labels)
    print(f"{'kernel':<{width}}  {'c (s)':>12}  {'python (s)':>12}  "
          f"{'speedup':>8}")
    for label in labels:
        c, py = rows["c"][label], rows["python"][label]
        print(f"{label:<{width}}  {c:12.3e}  {py:12.3e}  {py / c:7.2f}x")


if __name__ == "__main__":
    main()
