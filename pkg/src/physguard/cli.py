"""Command-line harness.

    physguard simulate          --config C [--out DIR] [--seed N] [--quiet]
    physguard detect            --config C [--trace CSV] [--out DIR] ...
    physguard fingerprint-train --config C [--out DIR] [LABEL=]TRACE.csv ...
    physguard fingerprint-eval  --config C --model M.json [--out DIR] [LABEL=]TRACE.csv ...
    physguard report            METRICS.json ... [--out DIR]

The output directory defaults to ``$PHYSGUARD_OUT`` or the current directory.
Failures exit non-zero and print ``{"error": ..., "message": ..., "details": [...]}``
to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .config import load_config
from .errors import ConfigError, PhysguardError
from .fingerprint import FingerprintModel, authentication_rates, evaluate, train
from .pipeline import detect_trace, simulate, trace_chunks


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("PHYSGUARD_OUT") or "."
    return Path(out)


def _say(args, msg):
    if not args.quiet:
        print(msg)


def _labelled(specs):
    out = []
    for spec in specs:
        label, sep, path = spec.partition("=")
        if not sep:
            label, path = Path(spec).stem, spec
        out.append((label, path))
    labels = [l for l, _ in out]
    if len(set(labels)) != len(labels):
        raise PhysguardError(f"duplicate trace labels: {labels}")
    return out


def _chunks(cfg, specs):
    chunks = []
    for label, path in _labelled(specs):
        trace, _ = io.read_trace(path)
        chunks.extend(trace_chunks(cfg, trace, label))
    return chunks


def cmd_simulate(args):
    cfg = load_config(args.config, args.seed)
    trace = simulate(cfg)
    path = _out_dir(args) / cfg.outputs.trace
    io.write_trace(path, trace, cfg.config_hash())
    _say(args, f"wrote {path} ({len(trace)} steps, {int(trace.attack_active.sum())} attacked)")


def cmd_detect(args):
    cfg = load_config(args.config, args.seed)
    out = _out_dir(args)
    trace_path = Path(args.trace) if args.trace else out / cfg.outputs.trace
    trace, trace_hash = io.read_trace(trace_path)
    result, metrics = detect_trace(cfg, trace)
    metrics = {"kind": "detection", "trace_config_sha256": trace_hash, **metrics}
    h = cfg.config_hash()
    io.write_detection(out / cfg.outputs.detection, result, h)
    io.write_json(out / cfg.outputs.metrics, metrics, h)
    bd, cs = metrics["baddata"], metrics["cusum"]
    _say(args, f"tau={metrics['tau']:.6g}  bad-data alarms={bd['alarms']} first={bd['first_alarm']}  "
               f"cusum alarms={cs['alarms']} first={cs['first_alarm']}")


def cmd_fingerprint_train(args):
    cfg = load_config(args.config, args.seed)
    chunks = _chunks(cfg, args.traces)
    model = train(chunks, cfg.fingerprint.accept_quantile)
    payload = {"kind": "fingerprint_model", "chunk_len": cfg.fingerprint.chunk_len,
               "mode": cfg.fingerprint.mode, "column": cfg.fingerprint.column,
               **model.to_dict()}
    path = _out_dir(args) / cfg.outputs.model
    io.write_json(path, payload, cfg.config_hash())
    _say(args, f"wrote {path} ({len(model.labels)} sensors, {len(chunks)} chunks, "
               f"accept_threshold={model.accept_threshold:.4g})")


def cmd_fingerprint_eval(args):
    cfg = load_config(args.config, args.seed)
    data = io.read_json(args.model)
    model = FingerprintModel.from_dict(data)
    chunks = _chunks(cfg, args.traces)
    report = evaluate(model, chunks)
    rates = authentication_rates(model, chunks)
    present = sorted({c.source_label for c in chunks})
    idx = [model.labels.index(l) for l in present]
    sub = rates[np.ix_(idx, idx)]
    off = sub[~np.eye(len(idx), dtype=bool)]
    payload = {
        "kind": "fingerprint_eval",
        "model_config_sha256": data.get("config_sha256"),
        "test_chunks": len(chunks),
        **report.to_dict(),
        "authentication": {
            "accept_threshold": model.accept_threshold,
            "genuine_accept": {l: float(rates[i, i]) for l, i in zip(present, idx)},
            "impostor_accept_mean": float(off.mean()) if off.size else None,
        },
    }
    path = _out_dir(args) / cfg.outputs.report
    io.write_json(path, payload, cfg.config_hash())
    _say(args, f"wrote {path} (accuracy={report.accuracy:.4f})")


def _fmt(v, spec=".4g"):
    if v is None:
        return "-"
    return format(v, spec) if isinstance(v, float) else str(v)


def summary_table(named_metrics) -> str:
    det = [(n, m) for n, m in named_metrics if m.get("kind") == "detection"]
    fp = [(n, m) for n, m in named_metrics if m.get("kind") == "fingerprint_eval"]
    lines = []
    if det:
        head = ("file", "tau", "attacked", "bd_alarms", "bd_first", "bd_FAR", "bd_DR",
                "cu_alarms", "cu_first", "cu_FAR", "cu_DR")
        rows = [head]
        for name, m in det:
            bd, cu = m["baddata"], m["cusum"]
            rows.append((name, _fmt(m["tau"]), _fmt(m["attack_steps"]),
                         _fmt(bd["alarms"]), _fmt(bd["first_alarm"]),
                         _fmt(bd["false_alarm_rate"]), _fmt(bd["detection_rate"]),
                         _fmt(cu["alarms"]), _fmt(cu["first_alarm"]),
                         _fmt(cu["false_alarm_rate"]), _fmt(cu["detection_rate"])))
        lines += _table(rows)
    if fp:
        if lines:
            lines.append("")
        rows = [("file", "sensors", "chunks", "accuracy", "min_tpr", "max_fpr",
                 "min_genuine", "impostor")]
        for name, m in fp:
            auth = m["authentication"]
            rows.append((name, _fmt(len(m["labels"])), _fmt(m["test_chunks"]),
                         _fmt(m["accuracy"]), _fmt(min(m["tpr"].values())),
                         _fmt(max(m["fpr"].values())),
                         _fmt(min(auth["genuine_accept"].values())),
                         _fmt(auth["impostor_accept_mean"])))
        lines += _table(rows)
    return "\n".join(lines) + "\n"


def _table(rows):
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]


def cmd_report(args):
    named = []
    for path in args.metrics:
        data = io.read_json(path)
        if data.get("kind") not in ("detection", "fingerprint_eval"):
            raise PhysguardError(f"{path}: not a detection metrics or fingerprint report file")
        named.append((Path(path).name, data))
    text = summary_table(named)
    combined = hashlib.sha256(
        "\n".join(m.get("config_sha256", "") for _, m in named).encode()).hexdigest()
    if args.out or os.environ.get("PHYSGUARD_OUT"):
        io.write_text(_out_dir(args) / "summary.txt", text, combined)
    if not args.quiet:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="physguard", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="experiment config (JSON)")
            p.add_argument("--seed", type=int, default=None, help="override the config seed (u64)")
        p.add_argument("--out", default=None, help="output directory (default $PHYSGUARD_OUT or .)")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("simulate", help="run the closed loop and write a trace CSV")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect", help="run estimator + detectors over a trace")
    common(p)
    p.add_argument("--trace", default=None, help="trace CSV (default <out>/<outputs.trace>)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("fingerprint-train", help="train sensor fingerprints from traces")
    common(p)
    p.add_argument("traces", nargs="+", help="trace CSVs, optionally LABEL=PATH")
    p.set_defaults(func=cmd_fingerprint_train)

    p = sub.add_parser("fingerprint-eval", help="evaluate a fingerprint model on traces")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("traces", nargs="+", help="trace CSVs, optionally LABEL=PATH")
    p.set_defaults(func=cmd_fingerprint_eval)

    p = sub.add_parser("report", help="summarise metric / report JSON files")
    common(p, config=False)
    p.add_argument("metrics", nargs="+")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 1 << 64:
        return _fail("config_error", "seed must be an unsigned 64-bit integer")
    try:
        args.func(args)
    except ConfigError as exc:
        return _fail("config_error", str(exc), exc.errors)
    except PhysguardError as exc:
        return _fail(type(exc).__name__, str(exc))
    except OSError as exc:
        return _fail("io_error", str(exc))
    return 0


def _fail(kind, message, details=None):
    payload = {"error": kind, "message": message}
    if details:
        payload["details"] = details
    sys.stderr.write(json.dumps(payload) + "\n")
    return 2


if __name__ == "__main__":
    sys.exit(main())
