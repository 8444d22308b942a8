"""Command-line entry point.

Subcommands:

* ``validate``  load and validate a corpus (and optionally a benchmark file),
  printing role counts and subject/complexity histograms.
* ``presets``   list the registered experiment presets.
* ``run``       execute a preset against a corpus and write a run directory
  (hypotheses.jsonl, trace.jsonl, manifest.json). The manifest is written
  before the first generation call.
* ``judge``     score a run directory's hypotheses with the rubric judge,
  writing scores.jsonl.
* ``report``    aggregate scores from one or more run directories, optionally
  checking consistency against an expert score CSV.

Exit codes: 0 ok, 1 validation failure, 2 total run failure, 3 missing
artifacts, 64 usage.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Optional

from . import evaluation
from .corpus import (
    CorpusError,
    complexity_histogram,
    load_benchmark,
    load_corpus,
    select_corpus_view,
    subject_histogram,
)
from .engine.pipeline import (
    PipelineRunError,
    load_records_jsonl,
    run_ablation,
    run_baseline,
    run_pipeline,
    write_jsonl,
)
from .engine.prompts import TemplateError, TemplateSet
from .engine.records import PipelineConfig
from .gateway import (
    ChatCompletionsBackend,
    Gateway,
    GatewayError,
    MessagesBackend,
    RateLimiter,
    RunTrace,
    ScriptedBackend,
)
from .presets import EngineMode, UnknownPresetError, PRESETS, parse_user_presets, resolve_preset
from .retrieval import build_survey_index

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUN_FAILED = 2
EXIT_MISSING_ARTIFACTS = 3
EXIT_USAGE = 64

DEFAULT_MODELS = {
    "provider-a": "gpt-3.5-turbo",
    "provider-b": "claude-3-opus-20240229",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _build_backend(args) -> object:
    if args.backend == "scripted":
        if not args.script:
            raise _UsageError("--script is required with the scripted backend")
        return ScriptedBackend.from_jsonl(args.script)
    model = args.model or DEFAULT_MODELS[args.backend]
    if args.backend == "provider-a":
        return ChatCompletionsBackend(model_name=model)
    return MessagesBackend(model_name=model)


def _build_gateway(args, trace: Optional[RunTrace] = None) -> Gateway:
    backend = _build_backend(args)
    limiter = None
    if not getattr(backend, "deterministic", False) and args.rate_limit:
        limiter = RateLimiter(args.rate_limit)
    return Gateway(backend, trace=trace, rate_limiter=limiter)


def _load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


# ----------------------------------------------------------------------
# validate
# ----------------------------------------------------------------------

def cmd_validate(args) -> int:
    try:
        corpus = load_corpus(args.corpus)
    except (CorpusError, OSError) as exc:
        print(f"corpus validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    counts = corpus.role_counts()
    print(f"passages: {len(corpus)}")
    for role, count in sorted(counts.items(), key=lambda kv: kv[0].value):
        print(f"  {role.value}: {count}")
    if args.benchmark:
        try:
            entries = load_benchmark(args.benchmark, corpus)
        except (CorpusError, OSError) as exc:
            print(f"benchmark validation failed: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        print(f"benchmark entries: {len(entries)}")
        print("subjects:")
        for subject, count in sorted(subject_histogram(entries).items()):
            print(f"  {subject}: {count}")
        histograms = complexity_histogram(entries)
        for kind in ("reasoning", "association"):
            counts = histograms[kind]
            print(f"{kind} complexity:")
            for level in ("easy", "medium", "hard"):
                print(f"  {level}: {counts.get(level, 0)}")
    return EXIT_OK


# ----------------------------------------------------------------------
# run
# ----------------------------------------------------------------------

def _apply_flag_overrides(cfg: PipelineConfig, args) -> PipelineConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.present_iters is not None:
        overrides["present_iterations"] = args.present_iters
    if args.past_iters is not None:
        overrides["past_iterations"] = args.past_iters
    if args.proposals is not None:
        overrides["proposals_per_call"] = args.proposals
    return replace(cfg, **overrides) if overrides else cfg


def cmd_run(args) -> int:
    try:
        config_file = _load_config_file(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config file error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    extra_presets = parse_user_presets(config_file.get("presets", {}))
    base_cfg = PipelineConfig.from_dict(config_file.get("pipeline", {}))
    try:
        preset, cfg = resolve_preset(args.preset, base=base_cfg, extra_presets=extra_presets)
    except UnknownPresetError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    cfg = _apply_flag_overrides(cfg, args)

    out_dir = Path(args.out)
    if (out_dir / "manifest.json").exists():
        print(f"refusing to overwrite existing run in {out_dir}", file=sys.stderr)
        return EXIT_USAGE
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        corpus = load_corpus(args.corpus)
        benchmark = load_benchmark(args.benchmark, corpus) if args.benchmark else None
        view = select_corpus_view(corpus, cfg.corpus_mode)
    except (CorpusError, OSError) as exc:
        print(f"input validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    trace = RunTrace()
    try:
        templates = TemplateSet.load(Path(args.templates) if args.templates else None)
        gateway = _build_gateway(args, trace=trace)
        input_hashes = {str(args.corpus): _sha256(Path(args.corpus))}
        for optional in (args.benchmark, args.script, args.config):
            if optional:
                input_hashes[str(optional)] = _sha256(Path(optional))
    except _UsageError:
        raise
    except (GatewayError, OSError, json.JSONDecodeError) as exc:
        print(f"run setup failed: {exc}", file=sys.stderr)
        return EXIT_USAGE

    manifest = {
        "run_id": out_dir.name,
        "preset": preset.name,
        "engine_mode": preset.engine_mode.value,
        "config": cfg.to_dict(),
        "input_hashes": input_hashes,
        "template_hashes": templates.hashes(),
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "started_unix": time.time(),
        "finished": None,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))

    try:
        if preset.engine_mode is EngineMode.BASELINE:
            result = run_baseline(view, cfg, gateway, templates=templates)
        elif preset.engine_mode is EngineMode.MOOSE:
            survey = None
            if cfg.enable_survey_access:
                survey = build_survey_index(view.survey_pool, cfg.chunk_size_words)
            result = run_pipeline(view, survey, cfg, gateway, templates=templates)
        else:
            result = run_ablation(
                view,
                cfg,
                gateway,
                preset.ablation_variant,
                benchmark=benchmark,
                corpus=corpus,
                templates=templates,
            )
    except PipelineRunError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILED
    except (GatewayError, TemplateError, ValueError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILED

    write_jsonl(out_dir / "hypotheses.jsonl", result.records_jsonl_lines())
    write_jsonl(out_dir / "trace.jsonl", trace.jsonl_lines())
    manifest["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    manifest["finished_unix"] = time.time()
    manifest["record_count"] = len(result.records)
    manifest["failures"] = result.failures
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(f"wrote {len(result.records)} records to {out_dir}")
    return EXIT_OK


# ----------------------------------------------------------------------
# judge
# ----------------------------------------------------------------------

def cmd_judge(args) -> int:
    run_dir = Path(args.run)
    hypotheses_path = run_dir / "hypotheses.jsonl"
    if not hypotheses_path.exists():
        print(f"missing {hypotheses_path}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACTS
    records = load_records_jsonl(hypotheses_path)
    try:
        gateway = _build_gateway(args)
    except (GatewayError, OSError, json.JSONDecodeError) as exc:
        print(f"backend setup failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    lines = []
    try:
        for record in records:
            triple = evaluation.judge_triple(record.text, gateway)
            lines.append(
                json.dumps({"record_id": record.id, **triple.to_dict()}, sort_keys=True)
            )
    except (evaluation.JudgeError, GatewayError) as exc:
        print(f"judging failed: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILED
    write_jsonl(run_dir / "scores.jsonl", lines)
    print(f"judged {len(records)} records")
    return EXIT_OK


# ----------------------------------------------------------------------
# report
# ----------------------------------------------------------------------

def _load_scored_rows(run_dir: Path) -> list[evaluation.ScoredRecord]:
    manifest_path = run_dir / "manifest.json"
    scores_path = run_dir / "scores.jsonl"
    hypotheses_path = run_dir / "hypotheses.jsonl"
    for required in (manifest_path, scores_path, hypotheses_path):
        if not required.exists():
            raise FileNotFoundError(f"missing {required}")
    manifest = json.loads(manifest_path.read_text())
    method = manifest.get("preset", run_dir.name)
    iterations = {r.id: r.present_iteration for r in load_records_jsonl(hypotheses_path)}
    rows = []
    with scores_path.open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            rows.append(
                evaluation.ScoredRecord(
                    record_id=obj["record_id"],
                    method=method,
                    present_iteration=iterations.get(obj["record_id"], 0),
                    scores=evaluation.ScoreTriple(
                        validness=obj["validness"],
                        novelty=obj["novelty"],
                        helpfulness=obj["helpfulness"],
                    ),
                )
            )
    return rows


def cmd_report(args) -> int:
    rows: list[evaluation.ScoredRecord] = []
    try:
        for run in args.run:
            rows.extend(_load_scored_rows(Path(run)))
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_MISSING_ARTIFACTS
    if not rows:
        print("no scored records found", file=sys.stderr)
        return EXIT_MISSING_ARTIFACTS
    stats = evaluation.aggregate(rows, evaluation.GroupBy(args.group_by))
    print(evaluation.render_table(stats))
    if args.csv:
        Path(args.csv).write_text(evaluation.render_csv(stats) + "\n", encoding="utf-8")
        print(f"wrote {args.csv}")
    if args.expert_csv:
        try:
            expert_rows = evaluation.import_expert_scores(args.expert_csv)
        except OSError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_MISSING_ARTIFACTS
        except ValueError as exc:
            print(f"expert CSV invalid: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        expert_means = evaluation.mean_by_record(expert_rows)
        judged = {r.record_id: r.scores for r in rows}
        shared = sorted(set(expert_means) & set(judged))
        if not shared:
            print("no overlapping record ids between expert CSV and scores", file=sys.stderr)
            return EXIT_MISSING_ARTIFACTS
        print(f"\nconsistency vs expert scores (n={len(shared)}):")
        for aspect in evaluation.Aspect:
            expert = [evaluation.round_half_up(expert_means[rid].get(aspect)) for rid in shared]
            machine = [evaluation.round_half_up(judged[rid].get(aspect)) for rid in shared]
            report = evaluation.consistency(expert, machine)
            print(f"  {aspect.value}: hard {report.hard:.3f}  soft {report.soft:.3f}")
    return EXIT_OK


def cmd_presets(_args) -> int:
    width = max(len(name) for name in PRESETS)
    for name in sorted(PRESETS):
        print(f"{name:<{width}}  {PRESETS[name].description}")
    return EXIT_OK


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------

def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--backend",
        choices=["scripted", "provider-a", "provider-b"],
        default="scripted",
        help="generation backend (default: scripted)",
    )
    parser.add_argument("--script", help="JSONL script for the scripted backend")
    parser.add_argument("--model", help="model name for remote backends")
    parser.add_argument("--rate-limit", type=int, default=None, help="max remote calls per second")


def build_parser() -> _Parser:
    parser = _Parser(prog="moose", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="validate a corpus and optional benchmark")
    p_validate.add_argument("--corpus", required=True)
    p_validate.add_argument("--benchmark")
    p_validate.set_defaults(func=cmd_validate)

    p_presets = sub.add_parser("presets", help="list experiment presets")
    p_presets.set_defaults(func=cmd_presets)

    p_run = sub.add_parser("run", help="run a preset and write a run directory")
    p_run.add_argument("--preset", required=True)
    p_run.add_argument("--corpus", required=True)
    p_run.add_argument("--benchmark")
    p_run.add_argument("--out", required=True, help="run directory to create")
    p_run.add_argument("--config", help="JSON config file (pipeline defaults and user presets)")
    p_run.add_argument("--templates", help="directory of prompt template overrides")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--workers", type=int, default=None)
    p_run.add_argument("--present-iters", type=int, default=None)
    p_run.add_argument("--past-iters", type=int, default=None)
    p_run.add_argument("--proposals", type=int, default=None)
    _add_backend_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_judge = sub.add_parser("judge", help="judge a run directory's hypotheses")
    p_judge.add_argument("--run", required=True)
    _add_backend_flags(p_judge)
    p_judge.set_defaults(func=cmd_judge)

    p_report = sub.add_parser("report", help="aggregate scores across run directories")
    p_report.add_argument("--run", action="append", required=True, help="run directory (repeatable)")
    p_report.add_argument(
        "--group-by",
        choices=[g.value for g in evaluation.GroupBy],
        default=evaluation.GroupBy.METHOD.value,
    )
    p_report.add_argument("--csv", help="also write the table as CSV to this path")
    p_report.add_argument("--expert-csv", help="expert score CSV for consistency reporting")
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:  # console_scripts shim
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
