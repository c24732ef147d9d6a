"""Command-line front end: ``capx analyze | bench | gen-weights | gen-corpus``.

Exit codes: 0 success, 1 usage/config error, 2 partial failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from . import bench, corpus
from .cnn import gen_random_weights, load_weights, save_weights
from .core import list_frame_files, load_frame, save_annotated
from .engine import ExecutorKind, run_batch
from .engine.executors import host_slots
from .errors import BatchError, CapxError, ConfigError, FormatError
from .pipeline import PipelineConfig

logger = logging.getLogger("capx")

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _csv_ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _csv_executors(text: str) -> List[ExecutorKind]:
    try:
        return [ExecutorKind.parse(v) for v in text.split(",") if v.strip()]
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _size(text: str):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}") from None
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError("size must be positive")
    return w, h


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="capx", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    executors = [k.value.replace("_", "-") for k in ExecutorKind] + [k.value for k in ExecutorKind]

    p = sub.add_parser("analyze", help="compute capillary density for every image in a directory")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--weights", type=Path)
    p.add_argument("--executor", default="worker-per-core", choices=executors)
    p.add_argument("--workers", type=int)
    p.add_argument("--config", type=Path)

    p = sub.add_parser("bench", help="benchmark executors on a synthetic corpus")
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--cores", type=_csv_ints)
    p.add_argument("--executors", "--executor", dest="executors", type=_csv_executors,
                   default=list(ExecutorKind))
    p.add_argument("--report", type=Path, default=Path("bench_report.json"))
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--weights", type=Path)
    p.add_argument("--input", type=Path, help="corpus cache directory")
    p.add_argument("--size", type=_size, default=(1920, 1080))
    p.add_argument("--config", type=Path)

    p = sub.add_parser("gen-weights", help="write deterministic random CXW1 weights")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--config", type=Path)

    p = sub.add_parser("gen-corpus", help="write a seeded synthetic PNG corpus")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--count", "--frames", dest="count", type=int, default=100)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--size", type=_size, default=(1920, 1080))
    return parser


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_json(args.config) if getattr(args, "config", None) else PipelineConfig()
    weights = getattr(args, "weights", None)
    return cfg.merged(weights_path=str(weights) if weights else None).validate()


def _env_workers() -> Optional[int]:
    raw = os.environ.get("CAPX_WORKERS")
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"CAPX_WORKERS must be an integer, got {raw!r}") from None


def _load_model(cfg: PipelineConfig):
    if not cfg.weights_path:
        raise ConfigError("no weights given (use --weights or weights_path in --config)")
    path = Path(cfg.weights_path)
    try:
        model = load_weights(path)
    except FileNotFoundError:
        raise ConfigError(f"weights file not found: {path}") from None
    except FormatError as exc:
        raise ConfigError(f"unusable weights file {path}: {exc}") from None
    if model.input_shape != (cfg.input_size, cfg.input_size, 1):
        raise ConfigError(f"weights {path} expect input {model.input_shape}, config has {cfg.input_size}")
    return model


def cmd_analyze(args) -> int:
    cfg = _config(args)
    kind = ExecutorKind.parse(args.executor)
    workers = args.workers if args.workers is not None else _env_workers()
    if workers is not None and workers < 1:
        raise ConfigError("--workers must be >= 1")
    if kind is ExecutorKind.SERIAL and workers not in (None, 1):
        raise ConfigError("the serial executor runs exactly one worker; drop --workers")
    if not args.input.is_dir():
        raise ConfigError(f"input directory not found: {args.input}")
    files = list_frame_files(args.input)
    if not files:
        raise ConfigError(f"no input frames in {args.input}")
    model = _load_model(cfg)

    entries = {}
    frames = []
    for path in files:
        try:
            frames.append(load_frame(path))
        except (FormatError, OSError) as exc:
            entries[path.stem] = {"frame_id": path.stem, "error": f"{type(exc).__name__}: {exc}"}
    seen = set()
    for f in frames:
        if f.id in seen:
            raise ConfigError(f"duplicate frame id {f.id!r} in {args.input}")
        seen.add(f.id)

    results = []
    if frames:
        try:
            results, _ = run_batch(kind, frames, model, cfg, slots=workers)
        except BatchError as exc:
            results = exc.results
            for fid, msg in exc.failures.items():
                entries[fid] = {"frame_id": fid, "error": msg}

    args.out.mkdir(parents=True, exist_ok=True)
    by_id = {f.id: f for f in frames}
    for r in results:
        save_annotated(by_id[r.frame_id], r, args.out / f"{r.frame_id}.png")
        entries[r.frame_id] = r.to_dict()
    ordered = [entries[k] for k in sorted(entries)]
    (args.out / "results.json").write_text(json.dumps(ordered, indent=2) + "\n")
    failed = [e for e in ordered if "error" in e]
    for e in failed:
        logger.error("frame %s failed: %s", e["frame_id"], e["error"])
    print(f"analyzed {len(results)} frame(s), {len(failed)} failed -> {args.out}")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_bench(args) -> int:
    cfg = _config(args)
    slots = host_slots()
    cores = args.cores or [slots]
    if max(cores) > slots:
        raise ConfigError(f"--cores {max(cores)} exceeds the {slots} slot(s) on this host")
    if min(cores) < 1:
        raise ConfigError("--cores values must be >= 1")
    if args.frames < 1:
        raise ConfigError("--frames must be >= 1")
    model = _load_model(cfg) if cfg.weights_path else gen_random_weights(args.seed, cfg.input_size)
    width, height = args.size
    cache = args.input or args.report.resolve().parent / f"capx-corpus-s{args.seed}-n{args.frames}-{width}x{height}"
    frames = corpus.ensure_corpus(cache, args.seed, args.frames, width, height)
    report = bench.speedup_curve(frames, cores, args.executors, model, cfg)
    fmt = args.format or ("csv" if args.report.suffix.lower() == ".csv" else "json")
    bench.write_report(report, args.report, fmt)
    for r in report.rows:
        print(f"{r.executor:>16} cores={r.cores:<3} avg_et={r.avg_et_s:.4f}s "
              f"total={r.total_s:.3f}s busy={r.busy_avg:.2f}")
    for p in report.faster:
        print(f"{p['faster']} vs {p['slower']} @ {p['cores']} cores: {p['percent']:.1f}% faster")
    rt = report.realtime
    if not rt["ok"]:
        print(f"WARNING: single frame took {rt['frame_s']:.3f}s (> {rt['limit_s']}s real-time budget)")
    return EXIT_OK


def cmd_gen_weights(args) -> int:
    cfg = _config(args)
    save_weights(gen_random_weights(args.seed, cfg.input_size), args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_gen_corpus(args) -> int:
    if args.count < 1:
        raise ConfigError("--count must be >= 1")
    width, height = args.size
    manifest = corpus.write_corpus(args.out, args.seed, args.count, width, height)
    print(f"wrote {manifest['count']} frame(s) to {args.out}")
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "bench": cmd_bench,
    "gen-weights": cmd_gen_weights,
    "gen-corpus": cmd_gen_corpus,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (CapxError, OSError) as exc:
        print(f"capx {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
