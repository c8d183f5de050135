"""Command line driver.

    mrpc gen   --config g.json --out ds.jsonl
    mrpc run   --config r.json --data ds.jsonl
    mrpc bench --config r.json --data ds.jsonl --out results.csv

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import data, pipeline
from .errors import ConfigError, DataFileError, IoError, MrpcError, NumericalError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

_SPD_KEYS = {"kind", "m", "per_cluster", "d", "center_spread", "noise_sigma", "seed"}
_GRASSMANN_KEYS = {"kind", "m", "per_cluster", "q", "d", "noise_sigma", "seed"}


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None


def _check_type(obj: dict, key: str, types) -> None:
    if key in obj and (not isinstance(obj[key], types) or isinstance(obj[key], bool)):
        raise ConfigError(f"{key} must be a number of type {types}, got {obj[key]!r}")


def gen_params(obj: dict):
    if not isinstance(obj, dict):
        raise ConfigError("generator config must be a JSON object")
    kind = obj.get("kind")
    if kind == "spd":
        allowed, required, cls = _SPD_KEYS, {"m", "per_cluster", "d"}, data.SpdClusterParams
    elif kind == "grassmann":
        allowed, required, cls = _GRASSMANN_KEYS, {"m", "per_cluster", "q", "d"}, \
            data.GrassmannClusterParams
    else:
        raise ConfigError(f"kind must be 'spd' or 'grassmann', got {kind!r}")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown generator keys: {', '.join(sorted(unknown))}")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"missing generator keys: {', '.join(sorted(missing))}")
    for key in ("m", "per_cluster", "d", "q", "seed"):
        _check_type(obj, key, int)
    for key in ("center_spread", "noise_sigma"):
        _check_type(obj, key, (int, float))
    return cls(**{k: v for k, v in obj.items() if k != "kind"})


def _run_config(args) -> pipeline.RunConfig:
    obj = _read_json(args.config) if args.config else {}
    if not isinstance(obj, dict):
        raise ConfigError("run config must be a JSON object")
    for key in ("method", "seed", "p", "m"):
        val = getattr(args, key, None)
        if val is not None:
            obj[key] = val
    return pipeline.RunConfig.from_dict(obj)


def cmd_gen(args) -> int:
    obj = _read_json(args.config) if args.config else {}
    if isinstance(obj, dict) and args.seed is not None:
        obj["seed"] = args.seed
    params = gen_params(obj)
    if isinstance(params, data.SpdClusterParams):
        ds = data.gen_spd_clusters(params)
    else:
        ds = data.gen_grassmann_clusters(params)
    data.save_dataset(ds, args.out)
    print(json.dumps({"n": len(ds), "kind": ds.kind.value, "dim": ds.dim, "out": str(args.out)}))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _run_config(args)
    ds = data.load_dataset(args.data)
    _, report = pipeline.run_method(cfg, ds)
    out = {"method": cfg.method, "n": len(ds), "m": cfg.m, **report.to_dict()}
    print(json.dumps(out))
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _run_config(args)
    ds = data.load_dataset(args.data)
    records = pipeline.bench(cfg, ds)
    text = pipeline.records_to_csv(records)
    try:
        Path(args.out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {args.out}: {exc}") from exc
    agg = pipeline.aggregate(records)
    print(f"method: {cfg.method}   runs: {len(records)}   n: {len(ds)}   m: {cfg.m}")
    for key in ("ri", "cp", "f_measure", "nmi"):
        mean, std = agg[key]
        print(f"{key:>10}: {mean:.4f} +/- {std:.4f}")
    print(f"{'runtime_s':>10}: {agg['runtime_s']:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrpc", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic dataset")
    gen.add_argument("--config", required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int)
    gen.set_defaults(func=cmd_gen)

    for name, func, help_ in (("run", cmd_run, "cluster a dataset once"),
                              ("bench", cmd_bench, "repeat runs and write a CSV")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config")
        p.add_argument("--data", required=True)
        p.add_argument("--method", choices=pipeline.METHODS)
        p.add_argument("--seed", type=int)
        p.add_argument("--p", type=int)
        p.add_argument("--m", type=int)
        if name == "bench":
            p.add_argument("--out", default="results.csv")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except MrpcError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)


def exit_code(exc: MrpcError) -> int:
    if isinstance(exc, DataFileError):
        return EXIT_IO
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
