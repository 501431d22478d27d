"""Command-line entry points.

Exit codes: 0 ok, 2 configuration error, 3 data error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dedup import (
    DEFAULT_BANDS,
    DEFAULT_BATCH_CAPACITY,
    DEFAULT_NUM_PERM,
    DEFAULT_ROWS,
    DEFAULT_THRESHOLD,
    MinHashDeduplicator,
    cluster_dump_lines,
)
from .errors import ConfigError, DataError
from .heuristics import (
    FilterConfig,
    PerplexityScorer,
    QualityFilter,
    default_filter_config,
)
from .langid import iter_labeled_jsonl, train_langid
from .pipeline import PipelineConfig, render_reports, run
from .shards import read_shards, write_shard
from .tokenizer import (
    BpeTokenizer,
    compare_tokenizers,
    evaluate,
    exact_score,
    token_to_word_ratio,
    train_clean,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def _guarded(fn) -> int:
    try:
        fn()
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def _iter_input_docs(path: str):
    """Documents from a shard prefix (dir with data.manifest) or a JSONL file."""
    from .ingest import documents_from_jsonl

    p = Path(path)
    if p.is_dir():
        return read_shards(p / "data", verify=False)
    if (p.parent / f"{p.name}.manifest").exists():
        return read_shards(p, verify=False)
    return documents_from_jsonl(p)


def _iter_texts(path: str):
    for doc in _iter_input_docs(path):
        yield doc.text


# ── refinery ─────────────────────────────────────────────────────────────


def main_refinery(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="refinery", description="Corpus refinement pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run a configured pipeline")
    run_p.add_argument("--config", required=True, help="pipeline TOML file")
    run_p.add_argument("--resume", action="store_true", help="resume a checkpointed run")
    report_p = sub.add_parser("report", help="render reports from a work dir")
    report_p.add_argument("--work-dir", required=True)
    args = parser.parse_args(argv)

    def go():
        if args.command == "run":
            config = PipelineConfig.from_toml(args.config)
            reports = run(config, resume=args.resume)
            print(render_reports(reports))
        else:
            from .pipeline import StageReport

            reports_dir = Path(args.work_dir) / "reports"
            if not reports_dir.exists():
                raise DataError(f"no reports under {args.work_dir}")
            reports = []
            for path in sorted(reports_dir.glob("*.json")):
                with open(path, encoding="utf-8") as f:
                    reports.append(StageReport.from_dict(json.load(f)))
            print(render_reports(reports))

    return _guarded(go)


# ── langid-train ─────────────────────────────────────────────────────────


def main_langid_train(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="langid-train", description="Train the character n-gram language model"
    )
    parser.add_argument("--in", dest="input", required=True, help="labeled JSONL (lang, text)")
    parser.add_argument("--out", dest="output", required=True, help="model file (.lid)")
    args = parser.parse_args(argv)

    def go():
        model = train_langid(iter_labeled_jsonl(args.input))
        model.save(args.output)
        print(f"trained {len(model.languages_)} languages -> {args.output}")

    return _guarded(go)


# ── filter ───────────────────────────────────────────────────────────────


def main_filter(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="filter", description="Apply heuristic quality filters"
    )
    parser.add_argument("--config", help="filter thresholds TOML (default: shipped table)")
    parser.add_argument("--mode", choices=("basic", "full"), default="basic")
    parser.add_argument("--calibrate-from", dest="calibrate_from", help="sample JSONL/shards for percentile calibration")
    parser.add_argument("--in", dest="input", required=True, help="input shards dir or JSONL")
    parser.add_argument("--out", dest="output", required=True, help="output shard prefix dir")
    parser.add_argument("--lang-confidence-min", type=float, default=None)
    parser.add_argument("--percentile", type=float, default=0.90)
    parser.add_argument("--max-docs-per-shard", type=int, default=1000)
    parser.add_argument("--report", help="write the stage report JSON here")
    args = parser.parse_args(argv)

    def go():
        if args.config:
            cfg = FilterConfig.from_toml(Path(args.config).read_text(encoding="utf-8"))
        else:
            cfg = default_filter_config()
        if args.lang_confidence_min is not None:
            cfg = cfg.with_confidence(args.lang_confidence_min)
        qf = QualityFilter(config=cfg, mode=args.mode, percentile=args.percentile)
        if args.mode == "full" and cfg.percentile_cutoffs is None:
            if not args.calibrate_from:
                raise ConfigError("full mode needs --calibrate-from or cutoffs in --config")
            sample = list(_iter_input_docs(args.calibrate_from))
            scorer = PerplexityScorer.fit((d.lang, d.text) for d in sample)
            qf = QualityFilter(
                config=cfg, mode="full", percentile=args.percentile, ppl_models=scorer
            )
            qf.fit(sample)
        else:
            qf.fit(())
        kept = []
        reasons: dict[str, int] = {}
        docs_in = 0
        for doc in _iter_input_docs(args.input):
            docs_in += 1
            keep, reason = qf.decide(doc)
            if keep:
                kept.append(doc)
            else:
                reasons[reason] = reasons.get(reason, 0) + 1
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        write_shard(kept, out / "data", args.max_docs_per_shard)
        report = {
            "stage": f"{args.mode}_filter",
            "docs_in": docs_in,
            "docs_out": len(kept),
            "drop_reasons": dict(sorted(reasons.items())),
        }
        if args.report:
            with open(args.report, "w", encoding="utf-8") as f:
                json.dump(report, f, indent=2, sort_keys=True)
        print(json.dumps(report, sort_keys=True))

    return _guarded(go)


# ── dedup ────────────────────────────────────────────────────────────────


def main_dedup(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dedup", description="MinHash LSH near-duplicate removal")
    parser.add_argument("--in", dest="input", required=True)
    parser.add_argument("--out", dest="output", required=True)
    parser.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    parser.add_argument("--bands", type=int, default=DEFAULT_BANDS)
    parser.add_argument("--rows", type=int, default=DEFAULT_ROWS)
    parser.add_argument("--perms", type=int, default=DEFAULT_NUM_PERM)
    parser.add_argument("--batch-size", type=int, default=DEFAULT_BATCH_CAPACITY)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--verify-exact", action="store_true", help="recompute true Jaccard for audit")
    parser.add_argument("--max-docs-per-shard", type=int, default=1000)
    args = parser.parse_args(argv)

    def go():
        dedup = MinHashDeduplicator(
            threshold=args.threshold,
            num_perm=args.perms,
            bands=args.bands,
            rows=args.rows,
            seed=args.seed,
            batch_capacity=args.batch_size,
            verify_exact=args.verify_exact,
        )
        survivors = dedup.transform(_iter_input_docs(args.input))
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        write_shard(survivors, out / "data", args.max_docs_per_shard)
        with open(out / "clusters.tsv", "w", encoding="utf-8") as f:
            for line in cluster_dump_lines(dedup.clusters_):
                f.write(line + "\n")
        total = {"docs_in": 0, "docs_out": 0}
        for report in dedup.reports_:
            total["docs_in"] += report["docs_in"]
            total["docs_out"] += report["docs_out"]
        print(json.dumps(total, sort_keys=True))

    return _guarded(go)


# ── tokenizer commands ───────────────────────────────────────────────────


def _tok_train_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--in", dest="input", required=True, help="corpus shards dir or JSONL")
    parser.add_argument("--out", dest="output", required=True, help="model file (.itok)")
    parser.add_argument("--vocab-size", type=int, default=8000)
    parser.add_argument("--character-coverage", type=float, default=0.997)
    parser.add_argument("--byte-fallback", action="store_true")
    parser.add_argument("--keep-digit-runs", action="store_true", help="do not split numbers into digits")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--vocab-dump", help="also write a token/id/freq text dump")


def main_tok_train(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tok-train", description="Train a BPE tokenizer")
    _tok_train_args(parser)
    args = parser.parse_args(argv)

    def go():
        model = BpeTokenizer(
            vocab_size=args.vocab_size,
            character_coverage=args.character_coverage,
            byte_fallback=args.byte_fallback,
            split_digits=not args.keep_digit_runs,
            seed=args.seed,
        ).fit(_iter_texts(args.input))
        model.save(args.output)
        if args.vocab_dump:
            model.save_vocab_dump(args.vocab_dump)
        print(f"vocab {len(model.ids_)}, merges {len(model.merges_)} -> {args.output}")

    return _guarded(go)


def main_tok_clean_train(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tok-clean-train",
        description="Two-pass training: dummy tokenizer, UNK cleaning, final tokenizer",
    )
    _tok_train_args(parser)
    parser.add_argument(
        "--banned-chars-file",
        help="file of extra banned characters, one per line (overrides the script-block allowlist)",
    )
    args = parser.parse_args(argv)

    def go():
        banned = None
        if args.banned_chars_file:
            banned = set()
            with open(args.banned_chars_file, encoding="utf-8") as f:
                for line in f:
                    entry = line.rstrip("\n")
                    if entry:
                        banned.add(entry)
        model, cleaned, banned_set = train_clean(
            list(_iter_texts(args.input)),
            vocab_size=args.vocab_size,
            character_coverage=args.character_coverage,
            byte_fallback=args.byte_fallback,
            split_digits=not args.keep_digit_runs,
            banned=banned,
            seed=args.seed,
        )
        model.save(args.output)
        if args.vocab_dump:
            model.save_vocab_dump(args.vocab_dump)
        print(
            f"vocab {len(model.ids_)}, merges {len(model.merges_)}, "
            f"banned {len(banned_set)} chars -> {args.output}"
        )

    return _guarded(go)


def main_tok_eval(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tok-eval", description="Evaluate a tokenizer")
    parser.add_argument("--model", required=True)
    parser.add_argument("--in", dest="input", required=True, help="eval shards dir or JSONL")
    parser.add_argument("--metric", choices=("ratio", "exact", "both"), default="both")
    parser.add_argument("--per-language", action="store_true")
    args = parser.parse_args(argv)

    def go():
        model = BpeTokenizer.load(args.model)
        if args.per_language:
            corpora: dict[str, list[str]] = {}
            for doc in _iter_input_docs(args.input):
                corpora.setdefault(doc.lang, []).append(doc.text)
            print(json.dumps(evaluate(model, dict(sorted(corpora.items()))), indent=2, sort_keys=True))
            return
        texts = list(_iter_texts(args.input))
        out = {}
        if args.metric in ("ratio", "both"):
            out["token_to_word_ratio"] = token_to_word_ratio(model, texts)
        if args.metric in ("exact", "both"):
            out["exact_score"] = exact_score(model, texts)
        print(json.dumps(out, sort_keys=True))

    return _guarded(go)


def main_tok_compare(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tok-compare", description="Compare tokenizers on per-language corpora"
    )
    parser.add_argument(
        "--model",
        action="append",
        default=[],
        metavar="NAME=PATH",
        help="named tokenizer model, repeatable",
    )
    parser.add_argument("--in", dest="input", required=True, help="eval shards dir or JSONL")
    parser.add_argument(
        "--external-counts",
        help="JSON file: name -> lang -> {tokens, words} from an external toolkit",
    )
    parser.add_argument("--rows-out", help="write machine-readable rows JSON here")
    args = parser.parse_args(argv)

    def go():
        models = {}
        for spec in args.model:
            name, sep, path = spec.partition("=")
            if not sep:
                raise ConfigError(f"--model must be NAME=PATH, got {spec!r}")
            models[name] = BpeTokenizer.load(path)
        corpora: dict[str, list[str]] = {}
        for doc in _iter_input_docs(args.input):
            corpora.setdefault(doc.lang, []).append(doc.text)
        external = None
        if args.external_counts:
            with open(args.external_counts, encoding="utf-8") as f:
                external = json.load(f)
        rows, text = compare_tokenizers(models, dict(sorted(corpora.items())), external)
        if args.rows_out:
            with open(args.rows_out, "w", encoding="utf-8") as f:
                json.dump(rows, f, indent=2, sort_keys=True)
        print(text)

    return _guarded(go)


if __name__ == "__main__":
    sys.exit(main_refinery())
