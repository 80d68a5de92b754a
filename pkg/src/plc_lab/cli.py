"""plc-lab command line: challenge workflows end to end.

Config precedence is flags > config file > defaults. The config file is plain
``key = value`` lines (keys match the long flag names, dashes or underscores).
Every run echoes its effective configuration to stderr; together with --seed
that line is enough to reproduce the run.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import FORMAT_VERSIONS, __version__
from .audio_io import read_wav, resample, write_wav
from .conceal import CONCEALERS, EngineConfig, conceal_waveform
from .degrade import build_corpus
from .errors import PlcError
from .harness import (
    ClipResult,
    CorpusReport,
    SystemUnderTest,
    aggregate,
    evaluate_system,
    format_markdown_table,
    load_corpus,
    summarize,
    write_per_clip_csv,
    write_summary_csv,
)
from .metrics import evaluate_clip
from .mushra import (
    RatingStore,
    StimulusSet,
    compute_ranking,
    format_ranking_table,
    read_ratings_csv,
    resolve_ratings,
    screen_assessors,
    write_ranking_csv,
    write_ratings_csv,
    write_trial_means_csv,
)
from .trace_model import burst_stats, classify_subset, group_by_subset, parse_trace


def _load_traces(trace_dir: Path):
    traces = []
    for path in sorted(Path(trace_dir).glob("*.txt")):
        traces.append(parse_trace(path.read_text(), path.stem))
    if not traces:
        raise PlcError(f"no trace files (*.txt) under {trace_dir}")
    return traces


def _engine_config(args) -> EngineConfig:
    return EngineConfig(
        ar_order=args.ar_order,
        context_packets=args.context_packets,
        extra_pred=args.crossfade,
        crossfade_len=args.crossfade,
        noise_comp=args.noise_comp,
    )


def _add_engine_flags(parser):
    parser.add_argument("--ar-order", type=int, default=256)
    parser.add_argument("--context-packets", type=int, default=8)
    parser.add_argument("--crossfade", type=int, default=256)
    parser.add_argument("--noise-comp", type=float, default=1e-3)


def _echo_config(args) -> None:
    skip = {"func", "config"}
    pairs = sorted((k, v) for k, v in vars(args).items() if k not in skip)
    line = " ".join(f"{k.replace('_', '-')}={v}" for k, v in pairs)
    print(f"plc-lab {args.command} config: {line}", file=sys.stderr)


def cmd_traces(args) -> int:
    traces = _load_traces(args.traces)
    counts = {"Subset1": 0, "Subset2": 0, "Subset3": 0}
    for t in traces:
        stats = burst_stats(t)
        label = classify_subset(stats)
        counts[label.value] += 1
        print(f"{t.source_id}: packets={len(t)} loss_rate={stats.loss_rate:.4f} "
              f"max_burst={stats.max_burst} subset={label.value}")
    print("pool sizes: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    return 0


def cmd_degrade(args) -> int:
    pools = group_by_subset(_load_traces(args.traces))
    clean_files = sorted(Path(args.clean).glob("*.wav"))
    if not clean_files:
        raise PlcError(f"no WAV files under {args.clean}")
    rows, skipped = build_corpus(clean_files, pools, Path(args.out), args.seed, segment=args.segment)
    for clip_id, reason in skipped:
        print(f"skipped {clip_id}: {reason}", file=sys.stderr)
    print(f"wrote {len(rows)} clips to {args.out} (manifest.csv, clean/, lossy/, traces/)")
    return 0


def cmd_conceal(args) -> int:
    lossy = read_wav(args.infile)
    trace = parse_trace(Path(args.trace).read_text(), Path(args.trace).stem)
    enhanced = conceal_waveform(lossy, trace, _engine_config(args), args.method)
    write_wav(enhanced, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_eval(args) -> int:
    if bool(args.manifest) == bool(args.ref):
        raise PlcError("pick one input mode: --manifest (built-in methods) or --ref/--est dirs")

    reports = []
    if args.manifest:
        corpus = load_corpus(args.manifest)
        methods = args.method or ["zero", "repeat", "ar"]
        for method in methods:
            sut = SystemUnderTest(name=method, method=method)
            reports.append(evaluate_system(sut, corpus, _engine_config(args), jobs=args.jobs))
    else:
        if not args.est:
            raise PlcError("--ref needs at least one --est directory")
        ref_dir = Path(args.ref)
        ref_files = sorted(ref_dir.glob("*.wav"))
        if not ref_files:
            raise PlcError(f"no WAV files under {ref_dir}")
        for est_dir in args.est:
            est_dir = Path(est_dir)
            sut_name = est_dir.name
            per_clip = []
            for ref_path in ref_files:
                est_path = est_dir / ref_path.name
                if not est_path.exists():
                    raise PlcError(f"{sut_name} is missing {ref_path.name}")
                report = evaluate_clip(read_wav(ref_path), read_wav(est_path))
                per_clip.append(ClipResult(ref_path.stem, sut_name, report))
            means, infs = summarize(per_clip)
            reports.append(CorpusReport(sut_name, per_clip, means, infs, rtf=None))

    write_per_clip_csv(reports, args.out)
    rows = aggregate(reports)
    if args.summary:
        write_summary_csv(rows, args.summary)
    if args.markdown:
        Path(args.markdown).write_text(format_markdown_table(rows))
    print(format_markdown_table(rows))
    return 0


def cmd_rank(args) -> int:
    records = read_ratings_csv(args.ratings)
    if args.screen:
        records, excluded = screen_assessors(records)
        for assessor in excluded:
            print(f"screened out assessor {assessor}", file=sys.stderr)
    systems = args.systems.split(",") if args.systems else sorted(
        {r.condition for r in records if not r.condition.startswith("__")}
    )
    result = compute_ranking(records, systems)
    print(format_ranking_table(result), end="")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_ranking_csv(result, out / "ranking.csv")
        write_trial_means_csv(result, out / "per_trial_means.csv")
    return 0


def _session_config(path) -> dict:
    cfg = json.loads(Path(path).read_text())
    for key in ("reference_dir", "anchor_dir", "systems", "clips", "master_seed"):
        if key not in cfg:
            raise PlcError(f"{path}: session config is missing {key!r}")
    return cfg


def _stimuli_from_config(cfg: dict) -> StimulusSet:
    return StimulusSet(
        reference_dir=Path(cfg["reference_dir"]),
        anchor_dir=Path(cfg["anchor_dir"]),
        system_dirs={name: Path(p) for name, p in cfg["systems"].items()},
    )


def cmd_mushra_build(args) -> int:
    systems = {}
    for item in args.system:
        name, _, directory = item.partition("=")
        if not directory:
            raise PlcError(f"--system wants NAME=DIR, got {item!r}")
        systems[name] = directory
    clips = [c for c in args.clips.split(",") if c]
    cfg = {
        "reference_dir": args.refs,
        "anchor_dir": args.anchors,
        "systems": systems,
        "clips": clips,
        "master_seed": args.seed,
    }
    if len(clips) != 10 or len(systems) != 4:
        raise PlcError(f"a session takes 10 clips and 4 systems, got {len(clips)} and {len(systems)}")
    stimuli = _stimuli_from_config(cfg)
    missing = stimuli.missing(clips, list(systems))
    if missing:
        raise PlcError("missing stimulus files: " + ", ".join(missing))
    Path(args.out).write_text(json.dumps(cfg, indent=2) + "\n")
    print(f"wrote {args.out}")
    return 0


def _service_from_args(args):
    from .service import SessionService

    cfg = _session_config(args.session)
    store = RatingStore(args.store)
    return SessionService(
        stimuli=_stimuli_from_config(cfg),
        trial_clips=list(cfg["clips"]),
        systems=sorted(cfg["systems"]),
        master_seed=int(cfg["master_seed"]),
        store=store,
    )


def cmd_mushra_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(_service_from_args(args), ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_mushra_report(args) -> int:
    service = _service_from_args(args)
    ratings = service.store.all_ratings()
    if not ratings:
        raise PlcError(f"{args.store}: no ratings recorded yet")
    sessions = {r.assessor_id: service.session_for(r.assessor_id) for r in ratings}
    from .mushra import resolve_ratings

    records = resolve_ratings(ratings, sessions)
    if args.screen:
        records, excluded = screen_assessors(records)
        for assessor in excluded:
            print(f"screened out assessor {assessor}", file=sys.stderr)
    result = compute_ranking(records, service.systems)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_ratings_csv(records, out / "ratings.csv")
    write_ranking_csv(result, out / "ranking.csv")
    write_trial_means_csv(result, out / "per_trial_means.csv")
    print(format_ranking_table(result), end="")
    print(f"wrote ratings.csv, ranking.csv, per_trial_means.csv to {out}")
    return 0


def cmd_export(args) -> int:
    w = read_wav(args.infile)
    write_wav(resample(w, args.rate), args.out)
    print(f"wrote {args.out} at {args.rate} Hz")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plc-lab",
        description="Music packet-loss-concealment challenge toolkit",
    )
    version = f"plc-lab {__version__} (formats: " + ", ".join(
        f"{k}={v}" for k, v in FORMAT_VERSIONS.items()) + ")"
    parser.add_argument("--version", action="version", version=version)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="master RNG seed")
        p.add_argument("--config", type=str, default=None, help="key = value config file")

    p = sub.add_parser("traces", help="classify packet traces into burst subsets")
    common(p)
    p.add_argument("--traces", required=True, help="directory of *.txt traces")
    p.set_defaults(func=cmd_traces)

    p = sub.add_parser("degrade", help="build a blind-set-style degraded corpus")
    common(p)
    p.add_argument("--clean", required=True, help="directory of clean 44.1 kHz mono WAVs")
    p.add_argument("--traces", required=True, help="directory of *.txt traces")
    p.add_argument("--out", required=True, help="output corpus directory")
    p.add_argument("--segment", action="store_true", help="cut long recordings into 11.6 s clips")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("conceal", help="conceal one lossy clip")
    common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--method", choices=CONCEALERS, default="ar")
    p.add_argument("--out", required=True)
    _add_engine_flags(p)
    p.set_defaults(func=cmd_conceal)

    p = sub.add_parser("eval", help="score systems over a corpus")
    common(p)
    p.add_argument("--manifest", help="corpus manifest.csv (scores built-in methods)")
    p.add_argument("--method", action="append", choices=CONCEALERS,
                   help="built-in method(s) to score (repeatable; default all)")
    p.add_argument("--ref", help="directory of reference WAVs (submission mode)")
    p.add_argument("--est", action="append", help="directory of enhanced WAVs (repeatable)")
    p.add_argument("--out", required=True, help="per-clip CSV path")
    p.add_argument("--summary", help="summary CSV path")
    p.add_argument("--markdown", help="markdown table path")
    p.add_argument("--jobs", type=int, default=1)
    _add_engine_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rank", help="rank systems from a resolved ratings CSV")
    common(p)
    p.add_argument("--ratings", required=True)
    p.add_argument("--systems", help="comma-separated system names (default: inferred)")
    p.add_argument("--out-dir", help="also write ranking.csv and per_trial_means.csv here")
    p.add_argument("--screen", action="store_true",
                   help="drop assessors who rate the hidden reference <90 in >15%% of trials")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("mushra-build", help="validate stimuli and write a session config")
    common(p)
    p.add_argument("--refs", required=True)
    p.add_argument("--anchors", required=True)
    p.add_argument("--system", action="append", required=True, metavar="NAME=DIR")
    p.add_argument("--clips", required=True, help="comma-separated list of 10 clip ids")
    p.add_argument("--out", required=True, help="session config JSON path")
    p.set_defaults(func=cmd_mushra_build)

    p = sub.add_parser("mushra-serve", help="serve the listening test")
    common(p)
    p.add_argument("--session", required=True, help="session config JSON")
    p.add_argument("--store", required=True, help="ratings JSONL path")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui", help="directory of built UI assets to serve at /")
    p.set_defaults(func=cmd_mushra_serve)

    p = sub.add_parser("mushra-report", help="export ratings and the ranking")
    common(p)
    p.add_argument("--session", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--screen", action="store_true",
                   help="drop assessors who rate the hidden reference <90 in >15%% of trials")
    p.set_defaults(func=cmd_mushra_report)

    p = sub.add_parser("export", help="resample a clip for external metric tools")
    common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--rate", type=int, required=True, help="target sample rate (48000 or 16000)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    return parser


def _read_config_file(path: str) -> dict[str, str]:
    overrides = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise PlcError(f"{path}:{lineno}: expected 'key = value'")
        overrides[key.strip().replace("-", "_")] = value.strip()
    return overrides


def _coerce(action: argparse.Action, raw: str):
    if isinstance(action, argparse._StoreTrueAction):
        return raw.lower() in ("1", "true", "yes", "on")
    value = action.type(raw) if action.type else raw
    return [value] if isinstance(action, argparse._AppendAction) else value


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    """Install config-file values as defaults on the subcommand parser, so
    explicit flags still win and file values can satisfy required flags."""
    if "--config" not in argv:
        return
    command = next((tok for tok in argv if not tok.startswith("-")), None)
    overrides = _read_config_file(argv[argv.index("--config") + 1])
    sub_actions = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    if command is None or command not in sub_actions[0].choices:
        return
    subparser = sub_actions[0].choices[command]
    known = {a.dest for a in subparser._actions}
    unknown = set(overrides) - known
    if unknown:
        raise PlcError(f"config file has keys no flag matches: {', '.join(sorted(unknown))}")
    for action in subparser._actions:
        if action.dest in overrides:
            action.default = _coerce(action, overrides[action.dest])
            action.required = False


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        _echo_config(args)
        return args.func(args)
    except PlcError as exc:
        print(f"plc-lab: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"plc-lab: error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    raise SystemExit(main())
