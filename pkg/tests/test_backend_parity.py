"""The numba kernels and the pure-Python fallback must agree bit for bit."""

import os
import subprocess
import sys

import numpy as np
import pytest

PROBE = r"""
import sys
import numpy as np
from physguard import _backend
from physguard.attack import AttackScenario, Bias, Hold, Replay, Spoof, Stealthy
from physguard.detect import DetectorConfig, detect, run_filter
from physguard.model import StateSpaceModel, TankParams, build_tank_model
from physguard.noise import NoiseSpec
from physguard.sim import ControllerConfig, run_simulation

model = build_tank_model(TankParams(1.5, 0.002, 0.0015, 0.0, 1.0, 1.0)).with_noise([[1e-8]], [[2.5e-5]])
attacks = [AttackScenario(Bias(0.05), 500, 700), AttackScenario(Stealthy(0.01), 900, 1300),
           AttackScenario(Replay(source_start=100), 1500, 1700), AttackScenario(Hold(), 1800, 1900),
           AttackScenario(Spoof(NoiseSpec(std=0.01, seed=4), 0.5), 2000, 2100)]
pn, mn = NoiseSpec(std=1e-4, seed=7), NoiseSpec("gaussian_mixture", components=((0.9, 0, 5e-3), (0.1, 0, 2e-2)), seed=7)
tr = run_simulation(model, ControllerConfig(0.3, 0.8), pn, mn, 3000, attacks, 0.3, bounds=(0.0, 1.0))
res = detect(model, tr.y_attacked, tr.u, DetectorConfig(0.015, 0.0025, 0.025), [0.3], [[2.5e-5]])
rng = np.random.default_rng(0)
a = rng.normal(size=(2, 2)) * 0.4
m2 = StateSpaceModel(a, rng.normal(size=(2, 2)), rng.normal(size=(1, 2)), np.eye(2) * 0.1, [[0.3]])
yh, r2 = run_filter(m2, rng.normal(size=500), rng.integers(0, 2, size=(500, 2)), [0, 0], np.eye(2))
np.savez(sys.argv[1], backend=_backend.BACKEND, x=tr.x_true, u=tr.u, y=tr.y, ya=tr.y_attacked,
         act=tr.attack_active, sat=tr.saturated, r=res.r, sb=res.stat_baddata, sc=res.stat_cusum,
         ab=res.alarm_baddata, ac=res.alarm_cusum, yh=yh, r2=r2)
"""


def run_probe(tmp_path, disable):
    out = tmp_path / f"probe_{int(disable)}.npz"
    env = dict(os.environ)
    env.pop("PHYSGUARD_DISABLE_NUMBA", None)
    if disable:
        env["PHYSGUARD_DISABLE_NUMBA"] = "1"
    proc = subprocess.run([sys.executable, "-c", PROBE, str(out)], env=env,
                          capture_output=True, text=True, timeout=600)
    assert proc.returncode == 0, proc.stderr
    return dict(np.load(out))


@pytest.fixture(scope="module")
def both(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("parity")
    return run_probe(tmp, False), run_probe(tmp, True)


def test_backends_selected(both):
    jit, py = both
    assert str(jit["backend"]) == "numba" and str(py["backend"]) == "numpy"


@pytest.mark.parametrize("key", ["x", "u", "y", "ya", "act", "sat", "r", "sb", "sc", "ab", "ac", "yh", "r2"])
def test_bit_identical(both, key):
    jit, py = both
    assert jit[key].shape == py[key].shape
    assert np.array_equal(jit[key], py[key], equal_nan=True)
