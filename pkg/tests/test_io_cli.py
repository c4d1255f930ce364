import json
import os
import subprocess
import sys

import numpy as np
import pytest

from physguard import io
from physguard.cli import main
from physguard.config import ExperimentConfig, load_config, parse_config
from physguard.errors import ConfigError, InvalidParameterError
from physguard.pipeline import simulate

DYADIC = {
    "plant": {"area": 1.0, "q_in": 1 / 256, "q_out": 1 / 512},
    "controller": {"low_setpoint": 0.25, "high_setpoint": 0.75},
    "process_noise": {"std": 0.0},
    "meas_noise": {"std": 0.0},
    "horizon": 1000,
}


def write_cfg(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_defaults_filled():
    cfg = parse_config({})
    assert cfg == ExperimentConfig()
    assert (cfg.plant.area, cfg.controller.low_setpoint, cfg.horizon, cfg.seed) == (1.5, 0.3, 10000, 0)
    assert cfg.fingerprint.chunk_len == 300 and cfg.fingerprint.accept_quantile == 0.99
    assert cfg.start_level == 0.3 and cfg.attacks == []


def test_area_zero_names_field():
    with pytest.raises(ConfigError) as exc:
        parse_config({"plant": {"area": 0}})
    assert [e["loc"] for e in exc.value.errors] == ["plant.area"]


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_config({"foo": 1})
    assert exc.value.errors[0]["loc"] == "foo"


def test_every_violation_listed():
    with pytest.raises(ConfigError) as exc:
        parse_config({"plant": {"area": -1, "q_in": -1}, "horizon": 0})
    assert {e["loc"] for e in exc.value.errors} == {"plant.area", "plant.q_in", "horizon"}


def test_attack_union_and_seed_override():
    cfg = parse_config({"seed": 5, "attacks": [{"kind": "bias", "delta": 0.1, "start": 1, "end": 3},
                                               {"kind": "spoof", "base": 0.5, "start": 4, "end": 6}]},
                       seed=9)
    assert cfg.seed == 9 and cfg.meas_noise_spec().seed == 9
    kinds = [type(s.kind).__name__ for s in cfg.attack_scenarios()]
    assert kinds == ["Bias", "Spoof"]
    with pytest.raises(ConfigError):
        parse_config({"attacks": [{"kind": "warp", "start": 0, "end": 1}]})
    with pytest.raises(ConfigError):
        parse_config({"attacks": [{"kind": "replay", "start": 5, "end": 10, "source_start": 2}]})


def test_hash_tracks_content():
    a, b = parse_config({}), parse_config({"seed": 0})
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != parse_config({"seed": 1}).config_hash()


def test_load_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_trace_round_trip_is_byte_identical(tmp_path):
    cfg = parse_config({"horizon": 500, "attacks": [{"kind": "bias", "delta": 0.05, "start": 100, "end": 200}]})
    trace = simulate(cfg)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    io.write_trace(p1, trace, cfg.config_hash())
    back, h = io.read_trace(p1)
    io.write_trace(p2, back, h)
    assert p1.read_bytes() == p2.read_bytes()
    assert back.equals(trace)
    lines = p1.read_text().split("\n")
    assert lines[0] == f"# config_sha256={cfg.config_hash()}" and lines[1] == io.TRACE_HEADER


def test_read_trace_rejects_bad_files(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("k,t\n0,0.0\n")
    with pytest.raises(InvalidParameterError):
        io.read_trace(p)
    p.write_text(io.TRACE_HEADER + "\n0,0.0,0.5,1,0,0.5,0.5,0\n")
    with pytest.raises(InvalidParameterError):
        io.read_trace(p)


def test_json_nonfinite_becomes_null():
    text = io.dumps_json({"a": float("nan"), "b": np.float64(1.5), "c": [np.inf]}, "h")
    data = json.loads(text)
    assert list(data) == ["config_sha256", "a", "b", "c"]
    assert data["a"] is None and data["b"] == 1.5 and data["c"] == [None]


def sawtooth(k):
    m = k % 384
    return 0.25 + m / 256 if m <= 128 else 0.75 - (m - 128) / 512


def test_cli_simulate_sawtooth(tmp_path):
    cfg = write_cfg(tmp_path, {**DYADIC, "initial_level": 0.25})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 0
    trace, h = io.read_trace(tmp_path / "trace.csv")
    assert h == load_config(cfg).config_hash()
    assert trace.level.tolist() == [sawtooth(k) for k in range(1000)]


def test_cli_detect_bias_first_alarm(tmp_path):
    data = {**DYADIC, "initial_level": 0.25,
            "detector": {"tau": 0.01, "cusum_bias": 0.005, "cusum_threshold": 0.05},
            "attacks": [{"kind": "bias", "delta": 0.03, "start": 300, "end": 400}]}
    cfg = write_cfg(tmp_path, data)
    out = str(tmp_path / "run")
    assert main(["simulate", "--config", cfg, "--out", out, "--quiet"]) == 0
    assert main(["detect", "--config", cfg, "--out", out, "--quiet"]) == 0
    metrics = io.read_json(os.path.join(out, "metrics.json"))
    assert metrics["baddata"]["first_alarm"] == 300
    assert metrics["baddata"]["alarms"] == 100 and metrics["baddata"]["false_alarms"] == 0
    assert 300 <= metrics["cusum"]["first_alarm"] <= 302
    det, h = io.read_detection(os.path.join(out, "detection.csv"))
    assert h == metrics["config_sha256"] and det["alarm_baddata"].sum() == 100


def _fp_traces(tmp_path, stds):
    paths = []
    for i, std in enumerate(stds):
        cfg = write_cfg(tmp_path, {"horizon": 6000, "seed": 10 + i, "meas_noise": {"std": std},
                                   "fingerprint": {"chunk_len": 200}}, f"s{i}.json")
        out = tmp_path / f"s{i}"
        assert main(["simulate", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        paths.append(f"sensor{i}={out / 'trace.csv'}")
    return cfg, paths


def test_cli_fingerprint_and_report(tmp_path, capsys):
    cfg, traces = _fp_traces(tmp_path, [0.002, 0.005, 0.0125])
    out = str(tmp_path / "fp")
    assert main(["fingerprint-train", "--config", cfg, "--out", out, "--quiet", *traces]) == 0
    model = io.read_json(os.path.join(out, "fingerprint_model.json"))
    assert [p["label"] for p in model["profiles"]] == ["sensor0", "sensor1", "sensor2"]
    assert main(["fingerprint-eval", "--config", cfg, "--model", os.path.join(out, "fingerprint_model.json"),
                 "--out", out, "--quiet", *traces]) == 0
    report = io.read_json(os.path.join(out, "fingerprint_report.json"))
    assert report["accuracy"] == 1.0
    assert np.sum(report["confusion_matrix"]) == report["test_chunks"] == 90
    assert main(["report", os.path.join(out, "fingerprint_report.json")]) == 0
    text = capsys.readouterr().out
    assert text.startswith("file") and "fingerprint_report.json" in text


def test_cli_error_json(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"plant": {"area": 0}, "foo": 1})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config_error"
    assert {d["loc"] for d in err["details"]} == {"plant.area", "foo"}
    assert main(["detect", "--config", write_cfg(tmp_path, {}), "--trace", str(tmp_path / "none.csv")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "io_error"


def test_cli_entry_point_uses_env_out(tmp_path):
    cfg = write_cfg(tmp_path, {**DYADIC, "horizon": 50})
    out = tmp_path / "env_out"
    env = {**os.environ, "PHYSGUARD_OUT": str(out)}
    proc = subprocess.run([sys.executable, "-m", "physguard", "simulate", "--config", cfg, "--seed", "3"],
                          env=env, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "trace.csv").exists() and "wrote" in proc.stdout
