"""Command-line entry point: ``asrfair {transform,fairness,localize,gen-sentences}``.

Exit codes: 0 success, 1 partial result (holes), 2 usage/config error,
3 total failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import math
import os
import re
import sys

from . import __version__
from .asr_backend import (
    Registry,
    TranscriptCache,
    build_backend,
    default_mock_configs,
    load_backend_config,
)
from .audio_io import read_wav, write_wav
from .corpus import load_manifest
from .errors import AsrFairError
from .fairness import FairnessConfig, result_to_dict, run_fairness_test, sensitivity_report, sensitivity_rows
from .fault_localizer import localize_grid, word_drop_rows, word_drop_table
from .grammar_gen import default_grammar_path, derives, generate, load_grammar
from .transforms import DEFAULT_SCHEDULES, Kind, apply, format_theta, load_schedules

log = logging.getLogger("asrfair")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE, EXIT_FAILED = 0, 1, 2, 3


class UsageError(Exception):
    pass


def transformed_name(clip_id, kind, theta, seed):
    return f"{clip_id}__{Kind.parse(kind).value}__{format_theta(theta).replace('.', 'p')}__s{seed}.wav"


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(rows, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def _run_dir(out, prefix):
    """Fresh timestamped directory under ``out``; never reuses an existing one."""
    stamp = dt.datetime.now().strftime("%Y%m%dT%H%M%S")
    base = os.path.join(out, f"{prefix}-{stamp}")
    path, n = base, 1
    while True:
        try:
            os.makedirs(path)
            return path
        except FileExistsError:
            n += 1
            path = f"{base}-{n}"


def _schedules(args):
    return load_schedules(args.schedules) if args.schedules else DEFAULT_SCHEDULES


def _parse_omegas(values):
    default, per = 3, {}
    for v in values or []:
        name, _, val = v.rpartition("=")
        num = math.inf if val.strip().lower() in ("inf", "infinity") else int(val)
        if num < 0:
            raise UsageError(f"omega must be non-negative: {v}")
        if name:
            per[name] = num
        else:
            default = num
    return default, per


def _registry(args, manifest):
    """Build backends and pairs from --backends / --mock."""
    if args.backends:
        configs, pairs = load_backend_config(args.backends)
    elif args.mock:
        configs, pairs = default_mock_configs()
    else:
        raise UsageError("either --backends or --mock is required")
    if args.mock:
        mock_names = {c.name for c in configs if c.type == "mock"}
        configs = [c for c in configs if c.type == "mock"]
        pairs = [p for p in pairs if set(p) <= mock_names]
        if not configs:
            configs, pairs = default_mock_configs()
    cache_dir = args.cache_dir or (None if args.mock else ".asrfair-cache")
    cache = TranscriptCache(cache_dir) if cache_dir else None
    refs, groups = manifest.references, manifest.group_of
    registry = Registry([build_backend(c, refs, groups) for c in configs], cache)
    return registry, pairs, configs


def _run_header(args, command, configs, schedules):
    return {
        "tool": "asrfair",
        "version": __version__,
        "command": command,
        "seed": args.seed,
        "manifest": args.manifest,
        "backends": [
            {k: v for k, v in vars(c).items() if k not in ("timeout",)} for c in configs
        ],
        "schedules": {s.kind.value: list(s.thetas) for s in schedules},
        "mock": bool(args.mock),
    }


def cmd_transform(args):
    manifest = load_manifest(args.manifest)
    schedules = _schedules(args)
    os.makedirs(args.out, exist_ok=True)
    rows = [["output", "clip_id", "kind", "theta", "seed", "status", "error"]]
    ok = failed = 0
    for entry in manifest.entries:
        try:
            clip = read_wav(entry.clip_path, entry.clip_id)
        except (AsrFairError, OSError) as exc:
            clip, load_error = None, f"{type(exc).__name__}: {exc}"
        for sched in schedules:
            for t in sched.transformations(args.seed):
                name = transformed_name(entry.clip_id, t.kind, t.theta, t.seed)
                row = [name, entry.clip_id, t.kind.value, format_theta(t.theta), t.seed]
                try:
                    if clip is None:
                        raise AsrFairError(load_error)
                    write_wav(apply(clip, t), os.path.join(args.out, name))
                    rows.append(row + ["ok", ""])
                    ok += 1
                except (AsrFairError, OSError) as exc:
                    rows.append(row + ["error", f"{type(exc).__name__}: {exc}"])
                    failed += 1
    _write_csv(rows, os.path.join(args.out, "index.csv"))
    log.info("wrote %d clips, %d failures", ok, failed)
    if ok == 0 and failed:
        return EXIT_FAILED
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_fairness(args):
    manifest = load_manifest(args.manifest)
    if args.base_group not in manifest.groups:
        raise UsageError(f"base group {args.base_group!r} not in manifest groups {manifest.groups}")
    if len(manifest.groups) < 2:
        raise UsageError("the manifest needs at least one comparison group")
    schedules = _schedules(args)
    registry, pairs, configs = _registry(args, manifest)
    if not pairs:
        raise UsageError("no ASR pairs available")
    taus = tuple(args.tau) if args.tau else FairnessConfig().tau_sweep
    config = FairnessConfig(tau=args.threshold if args.threshold is not None else 0.1,
                            tau_sweep=taus, asr_pairs=pairs, schedules=schedules, seed=args.seed)
    result = run_fairness_test(manifest, args.base_group, config, registry, jobs=args.jobs)
    tables = sensitivity_report(result.violations, result.records, config, [args.base_group])
    report = {
        "run": _run_header(args, "fairness", configs, schedules),
        "config": config.to_dict(),
        "dataset": manifest.summary(),
        "result": result_to_dict(result),
        "sensitivity": tables,
    }
    run_dir = _run_dir(args.out, "fairness")
    _dump_json(report, os.path.join(run_dir, "report.json"))
    _write_csv(sensitivity_rows(tables), os.path.join(run_dir, "sensitivity.csv"))
    print(run_dir)
    if not result.records:
        return EXIT_FAILED
    return EXIT_PARTIAL if result.holes else EXIT_OK


def cmd_localize(args):
    manifest = load_manifest(args.manifest)
    schedules = _schedules(args)
    registry, pairs, configs = _registry(args, manifest)
    groups = args.group or manifest.groups
    for g in groups:
        if g not in manifest.groups:
            raise UsageError(f"unknown group {g!r}")
    asrs = args.asr or registry.names
    for a in asrs:
        if a not in registry:
            raise UsageError(f"unknown backend {a!r}")
    kinds = [Kind.parse(k) for k in (args.kind or [s.kind.value for s in schedules])]
    by_kind = {s.kind: s.thetas for s in schedules}
    default_omega, per_omega = _parse_omegas(args.omega)
    reports, failures = localize_grid(
        manifest, registry, groups, asrs, kinds,
        thetas_for=lambda k: by_kind[k],
        omega_for=lambda a: per_omega.get(a, default_omega),
        seed=args.seed, jobs=args.jobs,
    )
    table = word_drop_table(reports)
    doc = {
        "run": _run_header(args, "localize", configs, schedules),
        "omega": {"default": _omega_json(default_omega),
                  "per_backend": {k: _omega_json(v) for k, v in sorted(per_omega.items())}},
        "reports": [r.to_dict() for r in sorted(reports, key=lambda r: (r.group, r.asr, r.transformation_kind))],
        "failures": [{"group": g, "asr": a, "kind": k, "error": e} for (g, a, k), e in sorted(failures.items())],
        "word_drops": {
            "asr": [{"group": g, "asr": a, "average": v} for (g, a), v in table["asr"].items()],
            "kind": [{"group": g, "kind": k, "average": v} for (g, k), v in table["kind"].items()],
        },
    }
    run_dir = _run_dir(args.out, "localize")
    _dump_json(doc, os.path.join(run_dir, "fault_reports.json"))
    _write_csv(word_drop_rows(table), os.path.join(run_dir, "word_drops.csv"))
    print(run_dir)
    if not reports:
        return EXIT_FAILED
    return EXIT_PARTIAL if failures else EXIT_OK


def _omega_json(v):
    return "inf" if v == math.inf else v


def _safe_name(word):
    return re.sub(r"[^A-Za-z0-9_-]+", "_", word).strip("_") or "word"


def cmd_gen_sentences(args):
    path = args.grammar or default_grammar_path()
    grammar = load_grammar(path)
    with open(args.words, encoding="utf-8") as fh:
        words = [w.strip() for w in fh if w.strip() and not w.startswith("#")]
    if not words:
        raise UsageError(f"{args.words}: no target words")
    os.makedirs(args.out, exist_ok=True)
    rows = [["word", "file", "sentences"]]
    used = set()
    for word in words:
        sentences = generate(grammar, word, args.n, seed=args.seed)
        bad = [s for s in sentences if not derives(grammar, s, word)]
        if bad:
            raise AsrFairError(f"generated sentence not derivable: {bad[0]!r}")
        fname = _safe_name(word)
        while fname in used:
            fname += "_"
        used.add(fname)
        fname += ".txt"
        with open(os.path.join(args.out, fname), "w", encoding="utf-8") as fh:
            fh.write("\n".join(sentences) + "\n")
        rows.append([word, fname, len(sentences)])
    _write_csv(rows, os.path.join(args.out, "manifest.csv"))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="asrfair", description="Metamorphic fairness testing for ASR services.")
    p.add_argument("--version", action="version", version=f"asrfair {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, backends=True):
        sp.add_argument("--manifest", required=True, help="CSV or JSON-lines manifest")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--schedules", help="severity schedule file (defaults built in)")
        sp.add_argument("--out", required=True, help="output directory")
        if backends:
            sp.add_argument("--backends", help="backend config JSON")
            sp.add_argument("--mock", action="store_true", help="use simulated backends only")
            sp.add_argument("--cache-dir", help="transcript cache root")
            sp.add_argument("--jobs", type=int, default=1, help="worker threads")

    t = sub.add_parser("transform", help="write every (clip x kind x theta) WAV plus index.csv")
    common(t, backends=False)
    t.set_defaults(func=cmd_transform)

    f = sub.add_parser("fairness", help="differential fairness test for one base group")
    common(f)
    f.add_argument("--base-group", required=True)
    f.add_argument("--tau", type=float, action="append", help="tau for the sweep (repeatable)")
    f.add_argument("--threshold", type=float, help="tau of the primary error set (default 0.1)")
    f.set_defaults(func=cmd_fairness)

    lz = sub.add_parser("localize", help="find non-robust words per group/backend/kind")
    common(lz)
    lz.add_argument("--group", action="append", help="restrict to group (repeatable)")
    lz.add_argument("--asr", action="append", help="restrict to backend (repeatable)")
    lz.add_argument("--kind", action="append", help="transformation kind (repeatable; default all)")
    lz.add_argument("--omega", action="append",
                    help="threshold: N, inf, or NAME=N per backend (repeatable; default 3)")
    lz.set_defaults(func=cmd_localize)

    g = sub.add_parser("gen-sentences", help="carrier sentences for target words")
    g.add_argument("--grammar", help="grammar file (default: built-in adjective grammar)")
    g.add_argument("--words", required=True, help="one target word per line")
    g.add_argument("-n", type=int, default=50)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_sentences)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"asrfair: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"asrfair: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AsrFairError as exc:
        print(f"asrfair: failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except KeyboardInterrupt:
        print("asrfair: interrupted", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
