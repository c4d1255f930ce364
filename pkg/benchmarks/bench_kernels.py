"""Time the numba kernels against the pure-Python fallback.

Each backend runs in its own interpreter (the switch is read at import).
The numba timings exclude compilation: every workload runs once untimed.

    python3 benchmarks/bench_kernels.py [--horizon N] [--repeat R]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import hashlib, json, sys, time
import numpy as np
from physguard import _backend
from physguard.attack import AttackScenario, Stealthy
from physguard.detect import DetectorConfig, cusum_series, run_filter
from physguard.model import TankParams, build_tank_model
from physguard.noise import NoiseSpec, draw_noise
from physguard.sim import ControllerConfig, run_simulation

horizon, repeat = int(sys.argv[1]), int(sys.argv[2])
model = build_tank_model(TankParams(1.5, 0.002, 0.0015, 0.0, 1.0, 1.0)).with_noise([[1e-8]], [[2.5e-5]])
ctl = ControllerConfig(0.3, 0.8)
pn, mn = NoiseSpec(std=1e-4, seed=1), NoiseSpec(std=5e-3, seed=1)
scenario = AttackScenario(Stealthy(0.01), horizon // 2, horizon)
r = draw_noise(NoiseSpec(std=1.0, seed=2), horizon)
cfg = DetectorConfig(3.0, 0.5, 5.0)

def sim():
    return run_simulation(model, ctl, pn, mn, horizon, scenario, 0.3)

trace = sim()

def filt():
    return run_filter(model, trace.y_attacked, trace.u, [0.3], [[2.5e-5]])

def cusum():
    return cusum_series(r, cfg)

out = {"backend": _backend.BACKEND, "times": {}}
digest = hashlib.sha256()
for name, fn in (("simulate", sim), ("kalman_filter", filt), ("cusum", cusum)):
    res = fn()
    arrays = [trace.y_attacked, trace.u] if name == "simulate" else list(res)
    for a in arrays:
        digest.update(np.ascontiguousarray(a).tobytes())
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    out["times"][name] = best
out["digest"] = digest.hexdigest()
print(json.dumps(out))
"""


def run(disable, horizon, repeat):
    env = dict(os.environ)
    env.pop("PHYSGUARD_DISABLE_NUMBA", None)
    if disable:
        env["PHYSGUARD_DISABLE_NUMBA"] = "1"
    proc = subprocess.run([sys.executable, "-c", WORKER, str(horizon), str(repeat)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--horizon", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run(False, args.horizon, args.repeat)
    slow = run(True, args.horizon, args.repeat)
    print(f"horizon={args.horizon} best of {args.repeat}")
    print(f"{'kernel':<15}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}")
    for name, t in fast["times"].items():
        s = slow["times"][name]
        print(f"{name:<15}{t * 1e3:>10.2f}ms{s * 1e3:>10.2f}ms{s / t:>9.1f}x")
    same = fast["digest"] == slow["digest"]
    print(f"outputs identical: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
