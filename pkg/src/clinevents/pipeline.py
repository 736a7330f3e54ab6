"""Stage implementations behind the CLI.

Every stage reads files, writes files, and drops a manifest (config
snapshot + input hashes + version) so any stage can restart from disk and
re-runs with mock providers are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable

from . import __version__, annotation, chunking, retrieval, stats, timeline
from .config import PipelineConfig
from .corpus import CaseDocument, join, load_notes, load_queries
from .errors import ConfigError
from .providers import (
    ENV_EMBEDDING_ENDPOINT,
    ENV_LLM_ENDPOINT,
    EmbeddingProvider,
    HashEmbeddingProvider,
    HttpEmbeddingProvider,
    HttpLlmProvider,
    LlmProvider,
    ReplayLlmProvider,
    embed_batch,
)

logger = logging.getLogger(__name__)

CHUNKS_FILE = "chunks.jsonl"
RETRIEVAL_FILE = "retrieval.jsonl"
EVENTS_PARSED_FILE = "events_parsed.jsonl"
PARSE_REPORT_FILE = "parse_report.json"
EVENTS_CLEAN_FILE = "events_clean.jsonl"
CLEAN_REPORT_FILE = "clean_report.json"
RECORDS_FILE = "events.csv"
PAIRS_FILE = "pairs.csv"
SEQUENCES_FILE = "sequences.txt"
SEQUENCE_IDS_FILE = "sequences_ids.txt"
RAW_RESPONSES_DIR = "raw_responses"
SPLITS_DIR = "splits"
MANIFESTS_DIR = "manifests"
STATS_JSON = "stats.json"
STATS_TXT = "stats.txt"
FUNNEL_CSV = "funnel.csv"
CONCORDANCE_JSON = "concordance.json"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(cfg: PipelineConfig, stage: str, inputs: Iterable[Path]) -> Path:
    out = Path(cfg.output_dir) / MANIFESTS_DIR
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "stage": stage,
        "version": __version__,
        "config": cfg.to_dict(),
        "inputs": {str(p): _sha256(Path(p)) for p in inputs if Path(p).exists()},
    }
    path = out / f"{stage}.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def _write_jsonl(path: Path, rows: Iterable[dict]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False))
            fh.write("\n")


def _read_jsonl(path: Path) -> list[dict]:
    rows = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def load_documents(cfg: PipelineConfig) -> list[CaseDocument]:
    if not cfg.inputs.notes:
        raise ConfigError("inputs.notes", "no notes file configured")
    if not cfg.inputs.queries:
        raise ConfigError("inputs.queries", "no queries file configured")
    fmt = cfg.inputs.format or None
    notes = load_notes(cfg.inputs.notes, fmt)
    queries = load_queries(cfg.inputs.queries, fmt, strict=cfg.inputs.strict_queries)
    docs, report = join(notes, queries)
    if report.orphan_notes:
        logger.warning("notes without a query: %s", report.orphan_notes)
    if report.orphan_queries:
        logger.warning("queries without a note: %s", report.orphan_queries)
    return docs


def make_embedding_provider(cfg: PipelineConfig) -> EmbeddingProvider:
    emb = cfg.embedding
    if emb.provider == "hash":
        return HashEmbeddingProvider(dimension=emb.dimension, seed=emb.seed)
    endpoint = emb.endpoint or os.environ.get(ENV_EMBEDDING_ENDPOINT, "")
    if not endpoint:
        raise ConfigError("embedding.endpoint", "required for the http embedding provider")
    return HttpEmbeddingProvider(endpoint=endpoint, dimension=emb.dimension)


def make_llm_provider(cfg: PipelineConfig) -> LlmProvider:
    llm = cfg.llm
    if llm.provider == "replay":
        if not llm.replay_dir:
            raise ConfigError("llm.replay_dir", "required for the replay provider")
        return ReplayLlmProvider(llm.replay_dir)
    endpoint = llm.endpoint or os.environ.get(ENV_LLM_ENDPOINT, "")
    if not endpoint:
        raise ConfigError("llm.endpoint", "required for the http LLM provider")
    return HttpLlmProvider(
        endpoint=endpoint,
        model=llm.model,
        temperature=llm.temperature,
        max_tokens=llm.max_tokens,
        timeout=llm.timeout,
    )


def _outdir(cfg: PipelineConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- stages -----------------------------------------------------------------

def run_chunk(cfg: PipelineConfig) -> Path:
    """Tokenize and chunk every note; dump contextual chunks as JSONL."""
    out = _outdir(cfg)
    docs = load_documents(cfg)
    rows = []
    for doc in docs:
        for cc in chunking.chunk_note(
            doc.note_id, doc.note.text, cfg.chunk_size, cfg.context_tokens
        ):
            rows.append(
                {
                    "note_id": doc.note_id,
                    "chunk_id": cc.chunk.chunk_id,
                    "text": cc.chunk.text,
                    "rendered": cc.rendered,
                    "start": cc.chunk.start,
                    "end": cc.chunk.end,
                }
            )
    path = out / CHUNKS_FILE
    _write_jsonl(path, rows)
    write_manifest(cfg, "chunk", [Path(cfg.inputs.notes), Path(cfg.inputs.queries)])
    logger.info("chunk: %d chunks for %d notes", len(rows), len(docs))
    return path


def _chunks_by_note(out: Path) -> dict[str, list[dict]]:
    grouped: dict[str, list[dict]] = {}
    for row in _read_jsonl(out / CHUNKS_FILE):
        grouped.setdefault(row["note_id"], []).append(row)
    return grouped


def run_retrieve(cfg: PipelineConfig) -> Path:
    """Rank each note's chunks against its summary on both channels and fuse."""
    out = _outdir(cfg)
    provider = make_embedding_provider(cfg) if cfg.semantic.enabled else None
    docs = load_documents(cfg)
    grouped = _chunks_by_note(out)
    rows = []
    for doc in docs:
        chunks = grouped.get(doc.note_id, [])
        if not chunks:
            logger.warning("note %s has no chunks; skipping retrieval", doc.note_id)
            continue
        ids = [c["chunk_id"] for c in chunks]
        rendered = [c["rendered"] for c in chunks]
        index = retrieval.build_index_from_texts(
            rendered, note_id=doc.note_id, k1=cfg.bm25.k1, b=cfg.bm25.b, ids=ids
        )
        bm25_result = retrieval.top_k(index, doc.query.text.split(), k=cfg.bm25.top_k)
        if provider is not None:
            vectors = embed_batch(provider, [doc.query.text] + rendered)
            semantic_result = retrieval.semantic_filter(
                vectors[0],
                vectors[1:],
                threshold=cfg.semantic.threshold,
                chunk_ids=ids,
                note_id=doc.note_id,
                inclusive=cfg.semantic.inclusive,
            )
        else:
            semantic_result = retrieval.RetrievalResult(
                note_id=doc.note_id, chunk_ids=(), scores=(), channel="semantic"
            )
        fused = retrieval.fuse(bm25_result, semantic_result)
        for result in (bm25_result, semantic_result, fused):
            for cid, score in zip(result.chunk_ids, result.scores):
                rows.append(
                    {
                        "note_id": doc.note_id,
                        "chunk_id": cid,
                        "score": score,
                        "channel": result.channel,
                    }
                )
    path = out / RETRIEVAL_FILE
    _write_jsonl(path, rows)
    write_manifest(
        cfg,
        "retrieve",
        [Path(cfg.inputs.notes), Path(cfg.inputs.queries), out / CHUNKS_FILE],
    )
    return path


def build_note_prompts(cfg: PipelineConfig) -> list[tuple[CaseDocument, list[tuple[int, str]], annotation.PromptBundle]]:
    """Prompt bundle per note from the fused retrieval output.

    Returns (doc, [(chunk_id, core text), ...], bundle) triples; the chunk
    list shown to the model is the fused set's core chunk text in fused
    order. Exposed so hermetic tests can seed replay fixtures with the
    exact prompts the annotate stage will issue.
    """
    out = _outdir(cfg)
    docs = load_documents(cfg)
    grouped = _chunks_by_note(out)
    fused_ids: dict[str, list[int]] = {}
    for row in _read_jsonl(out / RETRIEVAL_FILE):
        if row["channel"] == "fused":
            fused_ids.setdefault(row["note_id"], []).append(row["chunk_id"])
    bundles = []
    for doc in docs:
        chunks = {c["chunk_id"]: c["text"] for c in grouped.get(doc.note_id, [])}
        selected = [(cid, chunks[cid]) for cid in fused_ids.get(doc.note_id, []) if cid in chunks]
        if not selected:
            logger.warning("note %s has no fused chunks; skipping annotation", doc.note_id)
            continue
        bundle = annotation.build_prompt(doc.note.text, [text for _, text in selected])
        bundles.append((doc, selected, bundle))
    return bundles


def run_annotate(cfg: PipelineConfig) -> Path:
    """Prompt the LLM per note, archive raw responses, parse into events."""
    out = _outdir(cfg)
    provider = make_llm_provider(cfg)
    bundles = build_note_prompts(cfg)

    def call(item):
        _, _, bundle = item
        return annotation.annotate(
            provider, bundle, max_retries=cfg.llm.max_retries, backoff=cfg.llm.backoff
        )

    with ThreadPoolExecutor(max_workers=cfg.llm.concurrency) as pool:
        responses = list(pool.map(call, bundles))

    raw_dir = out / RAW_RESPONSES_DIR
    raw_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    report_by_note: dict[str, dict] = {}
    for (doc, selected, _), raw in zip(bundles, responses):
        (raw_dir / f"{doc.note_id}.txt").write_text(raw, encoding="utf-8")
        report = annotation.parse_response(raw)
        events, unmatched = annotation.attribute_chunks(report.accepted, selected)
        for ev in events:
            rows.append(
                {
                    "note_id": doc.note_id,
                    "event": ev.event,
                    "time_hours": ev.time_hours,
                    "source_chunk_id": ev.source_chunk_id,
                    "provenance": ev.provenance,
                }
            )
        report_by_note[doc.note_id] = {
            "accepted": len(report.accepted),
            "rejected": len(report.rejected),
            "repairs": report.repairs,
            "unmatched_chunk_membership": unmatched,
            "rejected_lines": [list(r) for r in report.rejected],
        }
    path = out / EVENTS_PARSED_FILE
    _write_jsonl(path, rows)
    (out / PARSE_REPORT_FILE).write_text(
        json.dumps(report_by_note, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    write_manifest(
        cfg,
        "annotate",
        [Path(cfg.inputs.notes), Path(cfg.inputs.queries),
         out / CHUNKS_FILE, out / RETRIEVAL_FILE],
    )
    return path


def _events_by_note(path: Path) -> dict[str, list[annotation.AnnotatedEvent]]:
    grouped: dict[str, list[annotation.AnnotatedEvent]] = {}
    for row in _read_jsonl(path):
        grouped.setdefault(row["note_id"], []).append(
            annotation.AnnotatedEvent(
                event=row["event"],
                time_hours=float(row["time_hours"]),
                source_chunk_id=row.get("source_chunk_id"),
                provenance=row.get("provenance", "parsed"),
            )
        )
    return grouped


def run_clean(cfg: PipelineConfig) -> Path:
    """Apply the post-processing rules note by note."""
    out = _outdir(cfg)
    stop_phrases = (
        annotation.load_stop_phrases(cfg.stop_phrase_file)
        if cfg.stop_phrase_file
        else annotation.DEFAULT_STOP_PHRASES
    )
    grouped = _events_by_note(out / EVENTS_PARSED_FILE)
    rows = []
    totals = annotation.CleanReport()
    dropped_unmatched = 0
    for note_id, events in grouped.items():
        if cfg.strict_chunk_membership:
            kept = [ev for ev in events if ev.source_chunk_id is not None]
            dropped_unmatched += len(events) - len(kept)
            events = kept
        cleaned, report = annotation.clean(events, stop_phrases)
        totals.n_input += report.n_input
        totals.n_output += report.n_output
        totals.normalized += report.normalized
        totals.dropped_non_textual += report.dropped_non_textual
        totals.dropped_stop_phrase += report.dropped_stop_phrase
        totals.dropped_duplicate += report.dropped_duplicate
        for ev in cleaned:
            rows.append(
                {
                    "note_id": note_id,
                    "event": ev.event,
                    "time_hours": ev.time_hours,
                    "source_chunk_id": ev.source_chunk_id,
                    "provenance": ev.provenance,
                }
            )
    path = out / EVENTS_CLEAN_FILE
    _write_jsonl(path, rows)
    payload = dict(vars(totals))
    payload["dropped_unmatched_chunk"] = dropped_unmatched
    (out / CLEAN_REPORT_FILE).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    write_manifest(cfg, "clean", [out / EVENTS_PARSED_FILE])
    return path


def _hadm_map(cfg: PipelineConfig) -> dict[str, str]:
    fmt = cfg.inputs.format or None
    return {
        n.note_id: (n.hadm_id or n.note_id) for n in load_notes(cfg.inputs.notes, fmt)
    }


def run_bin(cfg: PipelineConfig) -> Path:
    """Emit the released four-column table with binned timestamps."""
    out = _outdir(cfg)
    hadm = _hadm_map(cfg)
    records = []
    for row in _read_jsonl(out / EVENTS_CLEAN_FILE):
        records.append(
            timeline.make_record(
                hadm.get(row["note_id"], row["note_id"]),
                row["event"],
                float(row["time_hours"]),
            )
        )
    path = out / RECORDS_FILE
    timeline.write_records_csv(records, path)
    write_manifest(cfg, "bin", [out / EVENTS_CLEAN_FILE, Path(cfg.inputs.notes)])
    return path


def run_pairs(cfg: PipelineConfig) -> Path:
    """Correlation-labeled event pairs per note."""
    out = _outdir(cfg)
    grouped = _events_by_note(out / EVENTS_CLEAN_FILE)
    pairs = []
    for events in grouped.values():
        pairs.extend(
            timeline.make_pairs(
                [(ev.event, ev.time_hours) for ev in events],
                strategy=cfg.pairing.strategy,
                window=cfg.pairing.window,
            )
        )
    path = out / PAIRS_FILE
    timeline.write_pairs_csv(pairs, path)
    write_manifest(cfg, "pairs", [out / EVENTS_CLEAN_FILE])
    return path


def run_sequences(cfg: PipelineConfig) -> Path:
    """One time-ordered '[TIME] t [EVENT] e' line per annotated note."""
    out = _outdir(cfg)
    grouped = _events_by_note(out / EVENTS_CLEAN_FILE)
    lines = []
    ids = []
    for note_id, events in grouped.items():
        lines.append(timeline.format_sequence([(ev.event, ev.time_hours) for ev in events]))
        ids.append(note_id)
    path = out / SEQUENCES_FILE
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    (out / SEQUENCE_IDS_FILE).write_text(
        "".join(i + "\n" for i in ids), encoding="utf-8"
    )
    write_manifest(cfg, "sequences", [out / EVENTS_CLEAN_FILE])
    return path


def run_split(cfg: PipelineConfig, seed: int | None = None) -> Path:
    """80/10/10 (configurable) note-level partition of annotated note ids."""
    out = _outdir(cfg)
    ids = []
    seen = set()
    for row in _read_jsonl(out / EVENTS_CLEAN_FILE):
        if row["note_id"] not in seen:
            seen.add(row["note_id"])
            ids.append(row["note_id"])
    train, val, test = timeline.split(
        ids, cfg.split.fractions, cfg.split.seed if seed is None else seed
    )
    split_dir = out / SPLITS_DIR
    split_dir.mkdir(parents=True, exist_ok=True)
    for name, subset in (("train", train), ("validation", val), ("test", test)):
        (split_dir / f"{name}_ids.txt").write_text(
            "".join(i + "\n" for i in subset), encoding="utf-8"
        )
    write_manifest(cfg, "split", [out / EVENTS_CLEAN_FILE])
    return split_dir


def _funnel_sets(cfg: PipelineConfig, out: Path) -> dict[str, dict[str, list[int]]]:
    per_note: dict[str, dict[str, list[int]]] = {}

    def add(note_id: str, stage: str, chunk_id) -> None:
        per_note.setdefault(note_id, {}).setdefault(stage, []).append(chunk_id)

    chunks_path = out / CHUNKS_FILE
    if chunks_path.exists():
        for row in _read_jsonl(chunks_path):
            add(row["note_id"], "original", row["chunk_id"])
    retrieval_path = out / RETRIEVAL_FILE
    if retrieval_path.exists():
        for row in _read_jsonl(retrieval_path):
            add(row["note_id"], row["channel"], row["chunk_id"])
    for stage, fname in (("llm", EVENTS_PARSED_FILE), ("cleaned", EVENTS_CLEAN_FILE)):
        path = out / fname
        if path.exists():
            for row in _read_jsonl(path):
                if row.get("source_chunk_id") is not None:
                    add(row["note_id"], stage, row["source_chunk_id"])
    return per_note


def run_stats(cfg: PipelineConfig) -> Path:
    """Dataset summary plus the per-stage chunk funnel."""
    out = _outdir(cfg)
    records = timeline.read_records_csv(out / RECORDS_FILE)
    summary = stats.summarize(records)
    funnel_stats = stats.funnel(_funnel_sets(cfg, out))

    payload = {
        "dataset": vars(summary),
        "funnel_warnings": funnel_stats.warnings,
    }
    (out / STATS_JSON).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )

    lines = ["metric" + " " * 18 + "value"]
    for key, value in vars(summary).items():
        rendered = f"{value:.4f}" if isinstance(value, float) else str(value)
        lines.append(f"{key:<24}{rendered}")
    (out / STATS_TXT).write_text("".join(l + "\n" for l in lines), encoding="utf-8")

    with (out / FUNNEL_CSV).open("w", encoding="utf-8") as fh:
        fh.write("stage,set_size,notes\n")
        for stage in stats.FUNNEL_STAGES:
            hist = funnel_stats.histograms.get(stage, {})
            for size in sorted(hist):
                fh.write(f"{stage},{size},{hist[size]}\n")
    write_manifest(cfg, "stats", [out / RECORDS_FILE])
    return out / STATS_JSON


def _read_event_times(path: Path) -> list[tuple[str, float]]:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return [(r.event, r.time_hours) for r in timeline.read_records_csv(path)]
    return [(row["event"], float(row["time_hours"])) for row in _read_jsonl(path)]


def run_concordance(
    cfg: PipelineConfig,
    reference: str | Path,
    candidate: str | Path,
    max_distance: float = stats.DEFAULT_MAX_DISTANCE,
) -> Path:
    """Match two annotation sets and report rate + time rank correlation."""
    out = _outdir(cfg)
    provider = make_embedding_provider(cfg)
    report = stats.concordance(
        _read_event_times(Path(reference)),
        _read_event_times(Path(candidate)),
        provider,
        max_distance=max_distance,
    )
    payload = vars(report).copy()
    if payload["time_concordance"] != payload["time_concordance"]:  # NaN
        payload["time_concordance"] = None
    (out / CONCORDANCE_JSON).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    lines = ["metric" + " " * 18 + "value"]
    for key, value in payload.items():
        rendered = f"{value:.4f}" if isinstance(value, float) else str(value)
        lines.append(f"{key:<24}{rendered}")
    (out / "concordance.txt").write_text(
        "".join(l + "\n" for l in lines), encoding="utf-8"
    )
    write_manifest(cfg, "concordance", [Path(reference), Path(candidate)])
    return out / CONCORDANCE_JSON


ALL_STAGES = ("chunk", "retrieve", "annotate", "clean", "bin", "pairs",
              "sequences", "split", "stats")


def run_all(cfg: PipelineConfig, seed: int | None = None) -> None:
    """The chained pipeline; equivalent to running each stage in order."""
    run_chunk(cfg)
    run_retrieve(cfg)
    run_annotate(cfg)
    run_clean(cfg)
    run_bin(cfg)
    run_pairs(cfg)
    run_sequences(cfg)
    run_split(cfg, seed=seed)
    run_stats(cfg)
