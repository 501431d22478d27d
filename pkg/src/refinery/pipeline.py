"""Pipeline orchestration: declarative stages, checkpoint/resume, shard parallelism.

The parallelism unit is the shard, not the document, so document order inside
shards is preserved and a run is deterministic regardless of worker count.
Every shard commit is atomic (write-to-temp + rename) and recorded in the
checkpoint together with its partial report, so a killed run resumes to
byte-identical outputs.
"""
from __future__ import annotations

import hashlib
import json
import os
import pickle
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .dedup import (
    DEFAULT_BANDS,
    DEFAULT_BATCH_CAPACITY,
    DEFAULT_NUM_PERM,
    DEFAULT_ROWS,
    DEFAULT_THRESHOLD,
    batch_planner,
    cluster_dump_lines,
    dedup_batch,
)
from .documents import Document
from .errors import ConfigError, DataError
from .heuristics import (
    FilterConfig,
    PerplexityScorer,
    apply_basic_filter,
    apply_full_filter,
    calibrate_percentiles,
    compute_features,
    default_filter_config,
)
from .ingest import documents_from_jsonl, documents_from_text_file, documents_from_warc
from .langid import CharNgramLangId, iter_labeled_jsonl, train_langid
from .shards import (
    Shard,
    file_checksum,
    read_manifest,
    read_shard,
    read_shards,
    shard_name,
    write_manifest,
    write_one_shard,
    write_shard,
)
from .tokenizer import BpeTokenizer, evaluate, train_clean

STAGES = (
    "extract",
    "langid",
    "basic_filter",
    "full_filter",
    "dedup",
    "sample",
    "tok_train",
    "tok_eval",
)
_CORPUS_STAGES = frozenset(
    {"extract", "langid", "basic_filter", "full_filter", "dedup", "sample"}
)
# stage -> acceptable predecessors (any one of them must appear earlier)
_REQUIRES_BEFORE = {
    "basic_filter": ("langid",),
    "full_filter": ("langid",),
    "dedup": ("basic_filter", "full_filter"),
    "tok_train": ("sample",),
    "tok_eval": ("tok_train",),
}
ENV_PREFIX = "REFINERY_"
FAULT_ENV = ENV_PREFIX + "FAULT_UNITS"
STAGE_DONE = "__stage__"
DATA_PREFIX = "data"


class SimulatedFault(RuntimeError):
    """Raised by the test-only fault injection hook (REFINERY_FAULT_UNITS)."""


@dataclass
class StageReport:
    stage: str
    docs_in: int = 0
    docs_out: int = 0
    tokens_in: int = 0
    tokens_out: int = 0
    drop_reasons: dict[str, int] = field(default_factory=dict)
    wall_time_s: float = 0.0
    per_language: dict[str, dict[str, int]] = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "docs_in": self.docs_in,
            "docs_out": self.docs_out,
            "tokens_in": self.tokens_in,
            "tokens_out": self.tokens_out,
            "drop_reasons": self.drop_reasons,
            "wall_time_s": self.wall_time_s,
            "per_language": self.per_language,
            "extras": self.extras,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "StageReport":
        return cls(**obj)


def _blank_partial() -> dict:
    return {
        "docs_in": 0,
        "docs_out": 0,
        "tokens_in": 0,
        "tokens_out": 0,
        "drop_reasons": {},
        "per_language": {},
    }


def _merge_partial(total: dict, part: dict) -> None:
    for key in ("docs_in", "docs_out", "tokens_in", "tokens_out"):
        total[key] += part.get(key, 0)
    for reason, n in part.get("drop_reasons", {}).items():
        total["drop_reasons"][reason] = total["drop_reasons"].get(reason, 0) + n
    for lang, row in part.get("per_language", {}).items():
        bucket = total["per_language"].setdefault(
            lang, {"docs_in": 0, "docs_out": 0, "tokens_in": 0, "tokens_out": 0}
        )
        for key, n in row.items():
            bucket[key] += n


@dataclass
class PipelineConfig:
    stages: list[str]
    input_dir: str
    work_dir: str
    worker_count: int = 1
    seed: int = 0
    max_docs_per_shard: int = 1000
    params: dict[str, dict] = field(default_factory=dict)

    def validate(self) -> None:
        seen: list[str] = []
        for stage in self.stages:
            if stage not in STAGES:
                raise ConfigError(f"unknown stage {stage!r}; valid: {', '.join(STAGES)}")
            if stage in seen:
                raise ConfigError(f"stage {stage!r} appears twice")
            required = _REQUIRES_BEFORE.get(stage)
            if required and not any(r in seen for r in required):
                raise ConfigError(
                    f"stage {stage!r} requires one of {required} earlier in the pipeline"
                )
            seen.append(stage)
        if "extract" in self.stages and self.stages[0] != "extract":
            raise ConfigError("extract must be the first stage")
        if not self.stages:
            raise ConfigError("no stages configured")
        if self.worker_count < 1:
            raise ConfigError("worker_count must be >= 1")
        if self.max_docs_per_shard < 1:
            raise ConfigError("max_docs_per_shard must be >= 1")

    def config_hash(self) -> str:
        # worker_count never changes outputs, so it may differ across resumes
        payload = {
            "stages": self.stages,
            "input_dir": self.input_dir,
            "seed": self.seed,
            "max_docs_per_shard": self.max_docs_per_shard,
            "params": self.params,
        }
        canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @classmethod
    def from_toml(cls, path: str | Path) -> "PipelineConfig":
        try:
            import tomllib  # type: ignore[import-not-found]
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as f:
            obj = tomllib.load(f)
        try:
            config = cls(
                stages=list(obj["stages"]),
                input_dir=obj["input_dir"],
                work_dir=obj["work_dir"],
                worker_count=int(obj.get("worker_count", 1)),
                seed=int(obj.get("seed", 0)),
                max_docs_per_shard=int(obj.get("max_docs_per_shard", 1000)),
                params={k: v for k, v in obj.items() if isinstance(v, dict)},
            )
        except KeyError as exc:
            raise ConfigError(f"pipeline config missing required key {exc}") from exc
        config.apply_env_overrides()
        return config

    def apply_env_overrides(self) -> None:
        mapping = {
            "WORKER_COUNT": ("worker_count", int),
            "SEED": ("seed", int),
            "INPUT_DIR": ("input_dir", str),
            "WORK_DIR": ("work_dir", str),
            "MAX_DOCS_PER_SHARD": ("max_docs_per_shard", int),
        }
        for env_key, (attr, cast) in mapping.items():
            value = os.environ.get(ENV_PREFIX + env_key)
            if value is not None:
                setattr(self, attr, cast(value))


# ── worker-side shard tasks (module level so they pickle) ────────────────

_WORKER_CACHE: dict = {}


def _cached(key, loader):
    if key not in _WORKER_CACHE:
        _WORKER_CACHE[key] = loader()
    return _WORKER_CACHE[key]


def _load_filter_config(task: dict) -> FilterConfig:
    def loader():
        path = task.get("filter_config")
        if path:
            cfg = FilterConfig.from_toml(Path(path).read_text(encoding="utf-8"))
        else:
            cfg = default_filter_config()
        cfg = cfg.with_confidence(task["lang_confidence_min"])
        cutoffs_path = task.get("cutoffs_path")
        if cutoffs_path:
            with open(cutoffs_path, encoding="utf-8") as f:
                cfg = cfg.with_cutoffs(json.load(f))
        return cfg

    return _cached(("filter_config", task.get("filter_config"), task.get("cutoffs_path"), task["lang_confidence_min"]), loader)


def _load_ppl_scorer(path: str | None) -> PerplexityScorer | None:
    if not path:
        return None

    def loader():
        with open(path, "rb") as f:
            return pickle.load(f)

    return _cached(("ppl", path), loader)


def _count_words(doc: Document) -> int:
    return len(doc.text.split())


def _track(partial: dict, lang: str, key: str, docs: int, tokens: int) -> None:
    bucket = partial["per_language"].setdefault(
        lang, {"docs_in": 0, "docs_out": 0, "tokens_in": 0, "tokens_out": 0}
    )
    partial[f"docs_{key}"] += docs
    partial[f"tokens_{key}"] += tokens
    bucket[f"docs_{key}"] += docs
    bucket[f"tokens_{key}"] += tokens


def run_shard_task(task: dict) -> dict:
    """Process one unit of a shard-parallel stage; returns a partial report."""
    kind = task["kind"]
    out_path = Path(task["out_path"])
    partial = _blank_partial()
    out_docs: list[Document] = []

    if kind == "extract":
        in_path = Path(task["in_path"])
        stats: dict = {}
        if in_path.name.endswith((".warc", ".warc.gz")):
            with open(in_path, "rb") as f:
                docs = list(documents_from_warc(f, stats))
        elif in_path.name.endswith(".jsonl"):
            docs = list(documents_from_jsonl(in_path))
        elif in_path.name.endswith(".txt"):
            docs = list(documents_from_text_file(in_path))
        else:
            docs = []
        for doc in docs:
            words = _count_words(doc)
            _track(partial, doc.lang, "in", 1, words)
            _track(partial, doc.lang, "out", 1, words)
            out_docs.append(doc)
        for key in ("malformed", "truncated", "empty"):
            if stats.get(key):
                partial["drop_reasons"][key] = stats[key]
        # records that never became documents still count as inputs
        partial["docs_in"] += stats.get("responses", 0) - stats.get("documents", 0)
    elif kind == "langid":
        model = _cached(("langid", task["model_path"]), lambda: CharNgramLangId.load(task["model_path"]))
        for doc in read_shard(task["in_path"]):
            words = _count_words(doc)
            lang, confidence = model.classify(doc.text)
            doc = doc.with_language(lang, confidence)
            _track(partial, doc.lang, "in", 1, words)
            _track(partial, doc.lang, "out", 1, words)
            out_docs.append(doc)
    elif kind == "filter":
        cfg = _load_filter_config(task)
        scorer = _load_ppl_scorer(task.get("ppl_path"))
        full = task["mode"] == "full"
        for doc in read_shard(task["in_path"]):
            words = _count_words(doc)
            _track(partial, doc.lang, "in", 1, words)
            lm = scorer.for_lang(doc.lang) if scorer else None
            fv = compute_features(doc, lm)
            keep, reason = (
                apply_full_filter(doc, fv, cfg) if full else apply_basic_filter(doc, fv, cfg)
            )
            if keep:
                _track(partial, doc.lang, "out", 1, words)
                out_docs.append(doc)
            else:
                partial["drop_reasons"][reason] = partial["drop_reasons"].get(reason, 0) + 1
    else:
        raise ConfigError(f"unknown shard task kind {kind!r}")

    write_one_shard(out_docs, out_path)
    return partial


# ── the runner ───────────────────────────────────────────────────────────


class PipelineRunner:
    def __init__(self, config: PipelineConfig, resume: bool = False):
        config.validate()
        self.config = config
        self.resume = resume
        self.work = Path(config.work_dir)
        self.reports_dir = self.work / "reports"
        self.checkpoint_path = self.work / "checkpoint.json"
        self._fault_budget = int(os.environ.get(FAULT_ENV, "0") or 0)
        self._units_committed = 0

    # checkpoint bookkeeping

    def _load_checkpoint(self) -> dict:
        if self.checkpoint_path.exists():
            with open(self.checkpoint_path, encoding="utf-8") as f:
                ckpt = json.load(f)
            if ckpt.get("config_hash") != self.config.config_hash():
                raise ConfigError(
                    "resume refused: config hash differs from the checkpointed run"
                )
            if not self.resume:
                raise ConfigError(
                    "work dir holds a previous run; pass --resume or use a fresh dir"
                )
            return ckpt
        return {"config_hash": self.config.config_hash(), "completed": {}}

    def _save_checkpoint(self) -> None:
        tmp = self.checkpoint_path.with_suffix(".json.partial")
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(self.ckpt, f, sort_keys=True)
        os.replace(tmp, self.checkpoint_path)

    def _completed(self, stage: str) -> dict:
        return self.ckpt["completed"].setdefault(stage, {})

    def _commit_unit(self, stage: str, unit: str, payload: dict) -> None:
        self._completed(stage)[unit] = payload
        self._save_checkpoint()
        self._units_committed += 1
        if self._fault_budget and self._units_committed >= self._fault_budget:
            raise SimulatedFault(
                f"fault injection: stopping after {self._units_committed} unit commits"
            )

    # stage plumbing

    def _stage_dir(self, stage: str) -> Path:
        path = self.work / stage
        path.mkdir(parents=True, exist_ok=True)
        return path

    def _corpus_prefix(self, stage: str) -> Path:
        return self._stage_dir(stage) / DATA_PREFIX

    def _finish_stage(self, stage: str, report: StageReport) -> StageReport:
        self.reports_dir.mkdir(parents=True, exist_ok=True)
        tmp = self.reports_dir / f"{stage}.json.partial"
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        os.replace(tmp, self.reports_dir / f"{stage}.json")
        self._commit_unit(stage, STAGE_DONE, report.to_dict())
        return report

    def _stage_report_if_done(self, stage: str) -> StageReport | None:
        payload = self._completed(stage).get(STAGE_DONE)
        return StageReport.from_dict(payload) if payload else None

    def _run_shard_stage(
        self, stage: str, tasks: list[tuple[str, dict]], wall_start: float
    ) -> StageReport:
        completed = self._completed(stage)
        pending = [(unit, task) for unit, task in tasks if unit not in completed]
        if pending:
            if self.config.worker_count == 1:
                for unit, task in pending:
                    self._commit_unit(stage, unit, run_shard_task(task))
            else:
                with ProcessPoolExecutor(max_workers=self.config.worker_count) as pool:
                    futures = {
                        pool.submit(run_shard_task, task): unit for unit, task in pending
                    }
                    for future in as_completed(futures):
                        self._commit_unit(stage, futures[future], future.result())
        total = _blank_partial()
        for unit, _ in tasks:  # deterministic merge order
            _merge_partial(total, completed[unit])
        out_dir = self._stage_dir(stage)
        shards = []
        for unit, task in tasks:
            out_path = Path(task["out_path"])
            shards.append(
                Shard(
                    out_path.name,
                    completed[unit]["docs_out"],
                    out_path.stat().st_size,
                    file_checksum(out_path),
                )
            )
        write_manifest(out_dir / DATA_PREFIX, shards)
        report = StageReport(stage=stage, wall_time_s=time.monotonic() - wall_start, **total)
        return self._finish_stage(stage, report)

    # individual stages

    def _stage_extract(self) -> StageReport:
        start = time.monotonic()
        input_dir = Path(self.config.input_dir)
        if not input_dir.exists():
            raise DataError(f"input dir {input_dir} does not exist")
        files = sorted(
            p
            for p in input_dir.iterdir()
            if p.name.endswith((".warc", ".warc.gz", ".jsonl", ".txt"))
        )
        out_dir = self._stage_dir("extract")
        tasks = []
        for i, path in enumerate(files):
            out_path = out_dir / shard_name(DATA_PREFIX, i)
            tasks.append(
                (out_path.name, {"kind": "extract", "in_path": str(path), "out_path": str(out_path)})
            )
        return self._run_shard_stage("extract", tasks, start)

    def _input_shards(self, prev_prefix: Path) -> list[Shard]:
        return read_manifest(prev_prefix)

    def _stage_langid(self, prev_prefix: Path) -> StageReport:
        start = time.monotonic()
        params = self.config.params.get("langid", {})
        out_dir = self._stage_dir("langid")
        model_path = params.get("model")
        if not model_path:
            train_from = params.get("train_from")
            if not train_from:
                raise ConfigError("langid stage needs 'model' or 'train_from'")
            model_path = str(out_dir / "model.lid")
            if "model.lid" not in self._completed("langid"):
                model = train_langid(iter_labeled_jsonl(train_from))
                tmp = out_dir / "model.lid.partial"
                model.save(str(tmp))
                os.replace(tmp, model_path)
                self._commit_unit("langid", "model.lid", {})
        tasks = []
        for i, shard in enumerate(self._input_shards(prev_prefix)):
            out_path = self._stage_dir("langid") / shard_name(DATA_PREFIX, i)
            tasks.append(
                (
                    out_path.name,
                    {
                        "kind": "langid",
                        "in_path": str(prev_prefix.parent / shard.path),
                        "out_path": str(out_path),
                        "model_path": model_path,
                    },
                )
            )
        return self._run_shard_stage("langid", tasks, start)

    def _stage_filter(self, stage: str, prev_prefix: Path) -> StageReport:
        start = time.monotonic()
        params = self.config.params.get(stage, {})
        mode = "full" if stage == "full_filter" else "basic"
        out_dir = self._stage_dir(stage)
        base_task = {
            "kind": "filter",
            "mode": mode,
            "filter_config": params.get("config"),
            "lang_confidence_min": float(
                params.get("lang_confidence_min", 0.6 if mode == "full" else 0.1)
            ),
        }
        if mode == "full":
            cutoffs_path, ppl_path = self._prepare_full_filter(out_dir, prev_prefix, params, base_task)
            base_task["cutoffs_path"] = cutoffs_path
            base_task["ppl_path"] = ppl_path
        tasks = []
        for i, shard in enumerate(self._input_shards(prev_prefix)):
            out_path = out_dir / shard_name(DATA_PREFIX, i)
            task = dict(base_task)
            task["in_path"] = str(prev_prefix.parent / shard.path)
            task["out_path"] = str(out_path)
            tasks.append((out_path.name, task))
        return self._run_shard_stage(stage, tasks, start)

    def _prepare_full_filter(
        self, out_dir: Path, prev_prefix: Path, params: dict, base_task: dict
    ) -> tuple[str, str]:
        """Train per-language perplexity models and calibrate percentile cutoffs
        on a deterministic sample (first N docs in shard order)."""
        cutoffs_path = out_dir / "cutoffs.json"
        ppl_path = out_dir / "ppl.pkl"
        if "calibration" in self._completed("full_filter"):
            return str(cutoffs_path), str(ppl_path)
        sample_size = int(params.get("calibration_sample", 1000))
        ppl_per_lang = int(params.get("ppl_sample_per_language", 200))
        percentile = float(params.get("percentile", 0.90))
        ppl_docs: dict[str, list[str]] = {}
        sample_docs: list[Document] = []
        for doc in read_shards(prev_prefix, verify=False):
            bucket = ppl_docs.setdefault(doc.lang, [])
            if len(bucket) < ppl_per_lang:
                bucket.append(doc.text)
            if len(sample_docs) < sample_size:
                sample_docs.append(doc)
        scorer = PerplexityScorer.fit(
            (lang, text) for lang, texts in sorted(ppl_docs.items()) for text in texts
        )
        tmp = ppl_path.with_suffix(".pkl.partial")
        with open(tmp, "wb") as f:
            pickle.dump(scorer, f)
        os.replace(tmp, ppl_path)
        if sample_docs:
            features = [
                compute_features(doc, scorer.for_lang(doc.lang)) for doc in sample_docs
            ]
            cutoffs = calibrate_percentiles(features, percentile)
        else:
            cutoffs = {}  # empty corpus: nothing to calibrate, nothing to drop
        tmp = cutoffs_path.with_suffix(".json.partial")
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(cutoffs, f, sort_keys=True)
        os.replace(tmp, cutoffs_path)
        self._commit_unit("full_filter", "calibration", {})
        return str(cutoffs_path), str(ppl_path)

    def _stage_dedup(self, prev_prefix: Path) -> StageReport:
        start = time.monotonic()
        params = self.config.params.get("dedup", {})
        out_dir = self._stage_dir("dedup")
        partial = _blank_partial()
        survivors_total = 0
        clusters: dict[str, list[str]] = {}
        survivors: list[Document] = []
        for batch in batch_planner(
            read_shards(prev_prefix, verify=False),
            int(params.get("batch_capacity", DEFAULT_BATCH_CAPACITY)),
        ):
            result = dedup_batch(
                batch,
                threshold=float(params.get("threshold", DEFAULT_THRESHOLD)),
                seed=int(params.get("seed", self.config.seed)),
                num_perm=int(params.get("num_perm", DEFAULT_NUM_PERM)),
                bands=int(params.get("bands", DEFAULT_BANDS)),
                rows=int(params.get("rows", DEFAULT_ROWS)),
                verify_exact=bool(params.get("verify_exact", False)),
            )
            clusters.update(result.clusters)
            for doc in batch:
                _track(partial, doc.lang, "in", 1, _count_words(doc))
            for doc in result.survivors:
                _track(partial, doc.lang, "out", 1, _count_words(doc))
            survivors.extend(result.survivors)
            survivors_total += len(result.survivors)
        removed = partial["docs_in"] - partial["docs_out"]
        if removed:
            partial["drop_reasons"]["near_duplicate"] = removed
        write_shard(survivors, out_dir / DATA_PREFIX, self.config.max_docs_per_shard)
        tmp = out_dir / "clusters.tsv.partial"
        with open(tmp, "w", encoding="utf-8") as f:
            for line in cluster_dump_lines(clusters):
                f.write(line + "\n")
        os.replace(tmp, out_dir / "clusters.tsv")
        report = StageReport(stage="dedup", wall_time_s=time.monotonic() - start, **partial)
        return self._finish_stage("dedup", report)

    def _stage_sample(self, prev_prefix: Path) -> StageReport:
        start = time.monotonic()
        import random

        params = self.config.params.get("sample", {})
        size = int(params.get("size", 1000))
        rng = random.Random(self.config.seed)
        reservoir: list[Document] = []
        partial = _blank_partial()
        for i, doc in enumerate(read_shards(prev_prefix, verify=False)):
            _track(partial, doc.lang, "in", 1, _count_words(doc))
            if len(reservoir) < size:
                reservoir.append(doc)
            else:
                j = rng.randint(0, i)
                if j < size:
                    reservoir[j] = doc
        for doc in reservoir:
            _track(partial, doc.lang, "out", 1, _count_words(doc))
        write_shard(reservoir, self._stage_dir("sample") / DATA_PREFIX, self.config.max_docs_per_shard)
        report = StageReport(stage="sample", wall_time_s=time.monotonic() - start, **partial)
        return self._finish_stage("sample", report)

    def _stage_tok_train(self, prev_prefix: Path) -> StageReport:
        start = time.monotonic()
        params = self.config.params.get("tok_train", {})
        out_dir = self._stage_dir("tok_train")
        partial = _blank_partial()
        texts: list[str] = []
        for doc in read_shards(prev_prefix, verify=False):
            _track(partial, doc.lang, "in", 1, _count_words(doc))
            texts.append(doc.text)
        extras: dict = {}
        if texts:
            kwargs = dict(
                vocab_size=int(params.get("vocab_size", 8000)),
                character_coverage=float(params.get("character_coverage", 0.997)),
                byte_fallback=bool(params.get("byte_fallback", False)),
                split_digits=bool(params.get("split_digits", True)),
                seed=self.config.seed,
            )
            if params.get("two_pass", False):
                model, cleaned, banned = train_clean(texts, **kwargs)
                extras["banned_characters"] = len(banned)
                extras["cleaned_words"] = sum(len(t.split()) for t in cleaned)
            else:
                model = BpeTokenizer(**kwargs).fit(texts)
            tmp = out_dir / "tokenizer.itok.partial"
            model.save(str(tmp))
            os.replace(tmp, out_dir / "tokenizer.itok")
            model.save_vocab_dump(str(out_dir / "tokenizer.vocab"))
            extras["vocab_size"] = len(model.ids_)
            extras["merges"] = len(model.merges_)
        partial["docs_out"] = partial["docs_in"]
        partial["tokens_out"] = partial["tokens_in"]
        for row in partial["per_language"].values():
            row["docs_out"] = row["docs_in"]
            row["tokens_out"] = row["tokens_in"]
        report = StageReport(
            stage="tok_train", wall_time_s=time.monotonic() - start, extras=extras, **partial
        )
        return self._finish_stage("tok_train", report)

    def _stage_tok_eval(self, prev_prefix: Path) -> StageReport:
        start = time.monotonic()
        params = self.config.params.get("tok_eval", {})
        model_path = params.get("model", str(self.work / "tok_train" / "tokenizer.itok"))
        partial = _blank_partial()
        corpora: dict[str, list[str]] = {}
        for doc in read_shards(prev_prefix, verify=False):
            words = _count_words(doc)
            _track(partial, doc.lang, "in", 1, words)
            _track(partial, doc.lang, "out", 1, words)
            corpora.setdefault(doc.lang, []).append(doc.text)
        extras: dict = {}
        if corpora and Path(model_path).exists():
            model = BpeTokenizer.load(model_path)
            extras["metrics"] = evaluate(model, dict(sorted(corpora.items())))
        report = StageReport(
            stage="tok_eval", wall_time_s=time.monotonic() - start, extras=extras, **partial
        )
        out_dir = self._stage_dir("tok_eval")
        with open(out_dir / "metrics.json", "w", encoding="utf-8") as f:
            json.dump(extras.get("metrics", {}), f, indent=2, sort_keys=True)
        return self._finish_stage("tok_eval", report)

    # driver

    def run(self) -> list[StageReport]:
        self.work.mkdir(parents=True, exist_ok=True)
        self.ckpt = self._load_checkpoint()
        self._save_checkpoint()
        reports: list[StageReport] = []
        corpus_prefix: Path | None = None
        for stage in self.config.stages:
            done = self._stage_report_if_done(stage)
            if done is not None:
                reports.append(done)
            elif stage == "extract":
                reports.append(self._stage_extract())
            elif stage == "langid":
                reports.append(self._stage_langid(self._prev(corpus_prefix)))
            elif stage in ("basic_filter", "full_filter"):
                reports.append(self._stage_filter(stage, self._prev(corpus_prefix)))
            elif stage == "dedup":
                reports.append(self._stage_dedup(self._prev(corpus_prefix)))
            elif stage == "sample":
                reports.append(self._stage_sample(self._prev(corpus_prefix)))
            elif stage == "tok_train":
                reports.append(self._stage_tok_train(self._prev(corpus_prefix)))
            elif stage == "tok_eval":
                reports.append(self._stage_tok_eval(self._prev(corpus_prefix)))
            if stage in _CORPUS_STAGES:
                corpus_prefix = self._corpus_prefix(stage)
        return reports

    def _prev(self, corpus_prefix: Path | None) -> Path:
        if corpus_prefix is None:
            return Path(self.config.input_dir) / DATA_PREFIX
        return corpus_prefix


def run(config: PipelineConfig, resume: bool = False) -> list[StageReport]:
    """Execute the configured stages; identical config + seed give identical outputs."""
    return PipelineRunner(config, resume=resume).run()


def render_reports(reports: Sequence[StageReport]) -> str:
    """Aligned per-language token accounting, stages as columns (exact integers)."""
    stages = [r.stage for r in reports]
    langs = sorted({lang for r in reports for lang in r.per_language})
    width = max([8] + [len(s) for s in stages]) + 2
    lines = ["language".ljust(10) + "".join(s.rjust(width) for s in stages)]
    for lang in langs:
        row = [lang.ljust(10)]
        for r in reports:
            cell = r.per_language.get(lang, {}).get("tokens_out", 0)
            row.append(str(cell).rjust(width))
        lines.append("".join(row))
    total_row = ["total".ljust(10)]
    for r in reports:
        total_row.append(str(r.tokens_out).rjust(width))
    lines.append("".join(total_row))
    return "\n".join(lines)


def recount_output(prefix: Path) -> tuple[int, int]:
    """(docs, whitespace tokens) across a corpus written by a stage."""
    docs = 0
    tokens = 0
    for doc in read_shards(prefix, verify=True):
        docs += 1
        tokens += len(doc.text.split())
    return docs, tokens
