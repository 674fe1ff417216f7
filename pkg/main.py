import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import httpx

from oer_quality.analysis import analyze
from oer_quality.benchmark import Benchmark, derive_benchmark, paper_benchmark
from oer_quality.classifier import (
    ForestModel,
    extract_features,
    feature_importance,
    predict,
    train_forest,
)
from oer_quality.config import RunConfig, setup_logging, write_sidecar
from oer_quality.evaluation import evaluate, stratified_split
from oer_quality.harvester import HarvestConfig, harvest
from oer_quality.ingestion import (
    DatasetFormat,
    EntryError,
    IngestReport,
    dataset_summary,
    load_dataset,
    record_from_mapping,
    write_jsonl,
)
from oer_quality.metadata import (
    ModelFormatError,
    OerQualityError,
    QualityFlag,
)
from oer_quality.scoring import score_batch

logger = logging.getLogger("oer_quality.cli")

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_SERVICE_ERROR = 3


class InputError(OerQualityError):
    """Raised when command input is missing, empty or unusable."""

    def __init__(self, message="No usable input records."):
        super().__init__(message)


# --- Helpers ---


def _require(config: RunConfig, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(config, n) is None]
    if missing:
        raise InputError(f"{config.command} requires {', '.join(missing)}")


def _load(config: RunConfig) -> IngestReport:
    _require(config, "input")
    fmt = DatasetFormat.parse(config.format) if config.format else None
    try:
        report = load_dataset(config.input, fmt)
    except OSError as e:
        raise InputError(f"cannot read {config.input}: {e.strerror or e}") from e
    if not report.records:
        raise InputError(f"{config.input}: no records parsed")
    return report


def _labelled(records):
    labelled = [r for r in records if r.quality_flag.is_known]
    if len(labelled) < len(records):
        logger.warning(
            "ignoring %d records with an unknown quality flag", len(records) - len(labelled)
        )
    return labelled


def _controlled(records):
    return [r for r in records if r.quality_flag is QualityFlag.WITH_CONTROL]


def _resolve_benchmark(config: RunConfig, records) -> Benchmark:
    match config.benchmark:
        case "paper":
            return paper_benchmark()
        case "derive":
            controlled = _controlled(records)
            if not controlled:
                raise InputError("no quality-controlled records to derive a benchmark from")
            return derive_benchmark(controlled, provenance=f"dataset:{Path(config.input).name}")
        case path:
            try:
                return Benchmark.load(path)
            except OSError as e:
                raise InputError(f"cannot read benchmark {path}: {e.strerror or e}") from e


def _write_json(path, document) -> None:
    Path(path).write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")


def _http_client(config: RunConfig) -> httpx.Client:
    return httpx.Client(timeout=config.request_timeout)


# --- Subcommands ---


def cmd_ingest(config: RunConfig) -> int:
    report = _load(config)
    if config.output:
        with open(config.output, "w", encoding="utf-8") as stream:
            write_jsonl(report.records, stream)
        write_sidecar(config.output, config)
    print(report.summary_line())
    print(json.dumps(dataset_summary(report.records).to_dict()))
    if report.rejected:
        print(json.dumps({"rejected": report.rejections_to_dict()}), file=sys.stderr)
    return EXIT_OK


def cmd_harvest(config: RunConfig) -> int:
    _require(config, "base_url", "query", "output")
    harvest_config = HarvestConfig(
        base_url=config.base_url,
        query=config.query,
        page_size=config.page_size,
        max_records=config.max_records,
        retry_limit=config.retry_limit,
        request_timeout=config.request_timeout,
        backoff_seconds=config.backoff,
        mapping_path=Path(config.mapping) if config.mapping else None,
    )
    with _http_client(config) as client:
        report = harvest(harvest_config, client=client)

    # Partial results are kept even when the harvest failed.
    with open(config.output, "w", encoding="utf-8") as stream:
        write_jsonl(report.records, stream)
    write_sidecar(config.output, config)
    print(f"{report.summary_line()} ({report.status.name.lower()}, {report.pages_fetched} pages)")
    if report.rejected:
        print(json.dumps({"rejected": report.rejections_to_dict()}), file=sys.stderr)
    if report.failed:
        for error in report.errors:
            print(f"Error: {error}", file=sys.stderr)
        return EXIT_SERVICE_ERROR
    return EXIT_OK


def cmd_benchmark(config: RunConfig) -> int:
    _require(config, "output")
    if config.benchmark == "paper":
        benchmark = paper_benchmark()
    else:
        report = _load(config)
        benchmark = _resolve_benchmark(
            replace(config, benchmark="derive"), report.records
        )
    benchmark.save(config.output)
    write_sidecar(config.output, config)
    print(json.dumps(benchmark.to_dict(), indent=2))
    return EXIT_OK


def cmd_score(config: RunConfig) -> int:
    _require(config, "output")
    records = _load(config).records
    benchmark = _resolve_benchmark(config, records)
    scores = score_batch(records, benchmark)
    with open(config.output, "w", encoding="utf-8") as stream:
        for record, score in zip(records, scores):
            stream.write(json.dumps(score.to_dict(record.url)) + "\n")
    write_sidecar(config.output, config)
    print(f"scored {len(scores)} records with benchmark {benchmark.provenance}")
    return EXIT_OK


def cmd_train(config: RunConfig) -> int:
    _require(config, "output")
    params = config.hyperparams()
    records = _labelled(_load(config).records)
    train, test = stratified_split(records, config.split, config.seed)
    benchmark = _resolve_benchmark(config, train)
    features = [extract_features(r, benchmark) for r in train]
    model = train_forest(features, [r.quality_flag for r in train], params, n_jobs=config.jobs)
    model = model.with_metadata(benchmark=benchmark, config=config.settings())
    model.save(config.output)
    write_sidecar(config.output, config)

    summary = dict(model.training)
    summary["held_out"] = len(test)
    summary["feature_importance"] = feature_importance(model).entries
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_evaluate(config: RunConfig) -> int:
    _require(config, "model")
    model = ForestModel.load(config.model)
    if model.benchmark is None:
        raise ModelFormatError(f"{config.model} carries no benchmark")
    records = _labelled(_load(config).records)
    if not config.whole_input and "split" in model.config:
        _, records = stratified_split(records, model.config["split"], model.config["seed"])
    features = [extract_features(r, model.benchmark) for r in records]
    report = evaluate(model, features, [r.quality_flag for r in records])
    if config.output:
        _write_json(
            config.output,
            {"report": report.to_dict(), "model_config": dict(model.config), "config": config.settings()},
        )
        write_sidecar(config.output, config)
    print(report.to_table())
    return EXIT_OK


def cmd_analyze(config: RunConfig) -> int:
    _require(config, "output")
    records = _load(config).records
    report = analyze(records, config.low_confidence_below)
    report.write(config.output)
    write_sidecar(config.output, config)
    print(report.availability_frame().to_string(index=False))
    print()
    print(report.yearly_frame().to_string(index=False))
    return EXIT_OK


def cmd_predict(config: RunConfig) -> int:
    _require(config, "model")
    model = ForestModel.load(config.model)
    if model.benchmark is None:
        raise ModelFormatError(f"{config.model} carries no benchmark")
    try:
        entry = json.loads(sys.stdin.read())
        record = record_from_mapping(entry, 1)
    except (json.JSONDecodeError, EntryError) as e:
        raise InputError(f"invalid record on stdin: {e}") from e
    features = extract_features(record, model.benchmark)
    prediction = predict(model, features)
    print(
        json.dumps(
            {
                "url": record.url,
                "availability": features.availability_score,
                "normal": features.normal_score,
                "label": prediction.label.value,
                "vote_fraction": prediction.vote_fraction,
            }
        )
    )
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "harvest": cmd_harvest,
    "benchmark": cmd_benchmark,
    "score": cmd_score,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "analyze": cmd_analyze,
    "predict": cmd_predict,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML file with default settings (flags override it)")
    common.add_argument("-v", "--verbose", action="count", default=None, help="More log output")
    common.add_argument("--seed", type=int, help="Seed for every randomized step (default: 42)")

    parser = argparse.ArgumentParser(
        description="Score OER metadata quality and predict quality control."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def io_parser(name, help_text, output_help="Output file"):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("-i", "--input", help="Input dataset")
        p.add_argument("-o", "--output", help=output_help)
        p.add_argument("-f", "--format", choices=[f.value for f in DatasetFormat])
        return p

    def benchmark_option(p):
        p.add_argument(
            "-b",
            "--benchmark",
            help='"derive" (default), "paper", or a benchmark JSON file',
        )

    io_parser("ingest", "Parse a dataset into canonical JSON-lines")

    p = sub.add_parser("harvest", parents=[common], help="Harvest records from a search API")
    p.add_argument("-o", "--output", help="Output JSON-lines file")
    p.add_argument("--base-url", help="Search endpoint URL")
    p.add_argument("--query", help="Search term")
    p.add_argument("--page-size", type=int)
    p.add_argument("--max-records", type=int)
    p.add_argument("--retry-limit", type=int)
    p.add_argument("--request-timeout", type=float)
    p.add_argument("--backoff", type=float, help="Initial retry delay in seconds")
    p.add_argument("--mapping", help="YAML field mapping (default: bundled mapping)")

    p = io_parser("benchmark", "Derive a benchmark from controlled records", "Benchmark JSON file")
    p.add_argument(
        "--paper",
        dest="benchmark",
        action="store_const",
        const="paper",
        help="Write the published reference benchmark instead",
    )

    p = io_parser("score", "Score records against a benchmark", "Scored JSON-lines file")
    benchmark_option(p)

    p = io_parser("train", "Train the quality classifier", "Model JSON file")
    benchmark_option(p)
    p.add_argument("--trees", type=int, help="Number of trees (default: 100)")
    p.add_argument("--max-depth", type=int, help="Maximum tree depth (default: unlimited)")
    p.add_argument("--min-leaf", type=int, help="Minimum samples per leaf (default: 1)")
    p.add_argument("--features-per-split", type=int, help="Features tried per split (default: 2)")
    p.add_argument(
        "--no-bootstrap", dest="bootstrap", action="store_const", const=False,
        help="Train every tree on the full training set",
    )
    p.add_argument("--split", type=float, help="Training fraction (default: 0.8)")
    p.add_argument("--jobs", type=int, help="Worker threads; never changes the model")

    p = io_parser("evaluate", "Evaluate a model on held-out records", "Report JSON file")
    p.add_argument("-m", "--model", help="Model JSON file")
    p.add_argument(
        "--whole-input", action="store_const", const=True,
        help="Evaluate on every input record instead of the held-out split",
    )

    p = io_parser("analyze", "Exploratory analysis", "Report JSON file (CSV tables go next to it)")
    p.add_argument("--low-confidence-below", type=int)

    p = sub.add_parser("predict", parents=[common], help="Classify one JSON record from stdin")
    p.add_argument("-m", "--model", help="Model JSON file")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}

    try:
        config = RunConfig.resolve(args.command, flags, args.config)
        setup_logging(config.verbose)
        return COMMANDS[args.command](config)
    except (OerQualityError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
