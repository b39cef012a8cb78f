"""Batch command line: ``wassflow run`` and ``wassflow sweep``.

Exit codes: 0 when every applicable check passes, 1 on a failed check or a
numerical error (a diagnostic record is written), 2 on an invalid scenario.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import scenario as sc
from .expr import ExpressionError
from .inequalities.verdict import FAIL
from .runner import csv_text, run_task

DEFAULT_OUT = "wassflow_out"


def _plain(obj):
    """JSON-ready copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if not math.isfinite(v):
            return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
        return v
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def out_root(arg) -> Path:
    return Path(arg or os.environ.get("WASSFLOW_OUT") or DEFAULT_OUT)


def _write(dirpath: Path, files: dict) -> dict:
    dirpath.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for name in sorted(files):
        data = files[name].encode()
        (dirpath / name).write_bytes(data)
        hashes[name] = _sha(data)
    return hashes


def _prebuild(cfg, text, label):
    """Build domain, reference and initial data so that ill-posed settings
    are reported as scenario errors (exit 2) before any computation."""
    if cfg["task"] == "calculus":
        try:
            sc.build_p(cfg)
        except ValueError as exc:
            raise sc.ScenarioError(f"{label}:{sc._locate(text, ['m'])}: m: {exc}") from None
        return
    for section, fn in (("m", lambda: sc.build_p(cfg)),
                        ("domain", lambda: sc.build_domain(cfg)),
                        ("reference", lambda: sc.build_reference(cfg, sc.build_domain(cfg),
                                                                 sc.build_p(cfg)))):
        try:
            fn()
        except (ValueError, ExpressionError, ArithmeticError) as exc:
            raise sc.ScenarioError(f"{label}:{sc._locate(text, [section])}: {section}: {exc}") from None
    p, d = sc.build_p(cfg), sc.build_domain(cfg)
    ref = sc.build_reference(cfg, d, p)
    for section in ("initial", "initial_b"):
        if section in cfg:
            try:
                sc.build_initial(cfg[section], d, p, ref)
            except (ValueError, ExpressionError, ArithmeticError) as exc:
                raise sc.ScenarioError(
                    f"{label}:{sc._locate(text, [section])}: {section}: {exc}") from None


def execute(cfg: dict, raw: bytes, dest: Path, strict: bool = False) -> int:
    """Run a validated scenario and write its artifacts to ``dest``."""
    scale = 0.5 if strict else 1.0
    chash = sc.config_hash(cfg)
    tag = {"scenario_sha256": chash}
    try:
        verdicts, summary, files = run_task(cfg, scale)
        code = 1 if any(v["verdict"] == FAIL for v in verdicts) else 0
        files = dict(files)
        files["verdicts.json"] = dumps({**tag, "verdicts": verdicts})
        files["summary.json"] = dumps({**tag, **summary})
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        code = 1
        files = {"diagnostic.json": dumps({**tag, "error": type(exc).__name__,
                                           "message": str(exc), "task": cfg["task"]})}
        verdicts = []
    hashes = _write(dest, files)
    manifest = {"package": "wassflow", "version": __version__, "name": cfg["name"],
                "task": cfg["task"], "scenario": cfg, "scenario_sha256": chash,
                "source_sha256": _sha(raw), "strict": strict, "tolerance_scale": scale,
                "exit_code": code, "outputs": hashes}
    _write(dest, {"manifest.json": dumps(manifest)})
    return code


def _report(dest, code, stream=None):
    stream = stream or sys.stdout
    vpath = dest / "verdicts.json"
    if vpath.exists():
        for v in json.loads(vpath.read_text())["verdicts"]:
            print(f"{v['verdict']:>15}  {v['name']}", file=stream)
    else:
        diag = json.loads((dest / "diagnostic.json").read_text())
        print(f"numerical failure: {diag['error']}: {diag['message']}", file=stream)
    print(f"exit {code}  ->  {dest}", file=stream)


def cmd_run(args) -> int:
    cfg, raw, path = sc.load(args.file)
    text = raw.decode("utf-8", errors="replace")
    _prebuild(cfg, text, str(path))
    dest = out_root(args.out) / cfg["name"]
    code = execute(cfg, raw, dest, strict=args.strict)
    _report(dest, code)
    return code


def _parse_values(text: str) -> list:
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            vals.append(json.loads(tok))
        except json.JSONDecodeError:
            vals.append(tok)
    return vals


def _sweep_one(job):
    cfg, raw, dest, strict = job
    return execute(cfg, raw, Path(dest), strict=strict)


def cmd_sweep(args) -> int:
    cfg, raw, path = sc.load(args.file)
    label = str(path)
    values = _parse_values(args.values or "")
    if not values:
        raise sc.ScenarioError(f"{label}:1: --values: empty value list")
    base = out_root(args.out) / f"{cfg['name']}-sweep-{args.param}"
    jobs = []
    for i, val in enumerate(values):
        cv = sc.set_path(cfg, args.param, val)
        cv["name"] = f"{cfg['name']}-{i}"
        text = json.dumps(cv, indent=2)
        sc.validate(cv, text, f"{label} [{args.param}={val!r}]")
        _prebuild(cv, text, f"{label} [{args.param}={val!r}]")
        jobs.append((cv, raw, str(base / f"{i:03d}"), args.strict))
    workers = max(1, int(args.threads or 1))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            codes = list(pool.map(_sweep_one, jobs))
    else:
        codes = [_sweep_one(j) for j in jobs]
    summaries = []
    for _, _, dest, _ in jobs:
        sp = Path(dest) / "summary.json"
        summaries.append(json.loads(sp.read_text()) if sp.exists() else {})
    keys = sorted({k for s in summaries for k, v in s.items()
                   if k != "scenario_sha256" and not isinstance(v, (dict, list))})
    rows = [[i, json.dumps(val), code] + [s.get(k, "") for k in keys]
            for i, (val, code, s) in enumerate(zip(values, codes, summaries))]
    files = {"sweep.csv": csv_text(["index", args.param, "exit_code"] + keys, rows)}
    hashes = _write(base, files)
    manifest = {"package": "wassflow", "version": __version__, "scenario": cfg,
                "scenario_sha256": sc.config_hash(cfg), "source_sha256": _sha(raw),
                "param": args.param, "values": values, "strict": args.strict,
                "exit_codes": codes, "runs": [sc.config_hash(j[0]) for j in jobs],
                "outputs": hashes}
    _write(base, {"manifest.json": dumps(manifest)})
    print(files["sweep.csv"], end="")
    code = 0 if all(c == 0 for c in codes) else 1
    print(f"exit {code}  ->  {base}")
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wassflow", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"wassflow {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one scenario (file path or bundled name)")
    r.add_argument("file")
    r.add_argument("--out", help="output root (default: $WASSFLOW_OUT or ./wassflow_out)")
    r.add_argument("--threads", type=int, default=1,
                   help="accepted for symmetry with sweep; a single run is sequential")
    r.add_argument("--strict", action="store_true", help="halve all tolerances")
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep", help="run a scenario once per parameter value")
    s.add_argument("file")
    s.add_argument("--param", required=True, help="dotted key, e.g. reference.K or params.delta")
    s.add_argument("--values", required=True, help="comma separated values")
    s.add_argument("--out")
    s.add_argument("--threads", type=int, default=1, help="parallel runs across values")
    s.add_argument("--strict", action="store_true")
    s.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except sc.ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
