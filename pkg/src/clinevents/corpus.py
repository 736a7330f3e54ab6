"""Note and query ingestion.

Notes are full discharge-style documents; queries are the matching brief
hospital course summaries used downstream as retrieval queries. Both arrive
as flat files (CSV with RFC-4180 quoting, or JSONL which is the canonical
format for text containing newlines) and are inner-joined on note_id into
per-note case records.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

from .errors import CorpusError, EmptyText, MalformedRow, MissingColumn

logger = logging.getLogger(__name__)

NOTE_COLUMNS = ("note_id", "hadm_id", "text")
QUERY_COLUMNS = ("note_id", "text")

# Inclusion rule for brief-course summaries under strict validation.
STRICT_QUERY_MIN_CHARS = 100

FORMATS = ("csv", "jsonl")


@dataclass(frozen=True)
class NoteText:
    """One full note."""

    note_id: str
    hadm_id: str
    text: str


@dataclass(frozen=True)
class QueryText:
    """Brief hospital course summary for one note."""

    note_id: str
    text: str


@dataclass(frozen=True)
class CaseDocument:
    """A note joined with its summary; the unit the pipeline operates on."""

    note_id: str
    hadm_id: str
    note: NoteText
    query: QueryText


@dataclass
class JoinReport:
    orphan_notes: list[str] = field(default_factory=list)
    orphan_queries: list[str] = field(default_factory=list)


def _guess_format(path: Path, fmt: str | None) -> str:
    if fmt is not None:
        if fmt not in FORMATS:
            raise CorpusError(f"unsupported format {fmt!r}; expected one of {FORMATS}")
        return fmt
    suffix = path.suffix.lower().lstrip(".")
    return suffix if suffix in FORMATS else "jsonl"


def _iter_rows(path: Path, fmt: str, columns: Sequence[str]) -> Iterator[dict]:
    """Yield raw row dicts, validating the schema once up front."""
    if fmt == "csv":
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for col in columns:
                if col not in header:
                    raise MissingColumn(col, str(path))
            yield from reader
    else:
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise MalformedRow(lineno, f"invalid JSON: {exc}") from exc
                for col in columns:
                    if col not in obj:
                        raise MissingColumn(col, str(path))
                yield obj


def load_notes(path: str | Path, fmt: str | None = None) -> list[NoteText]:
    """Load notes from ``path``; input order preserved, duplicates reported.

    Raises MissingColumn on schema mismatch and MalformedRow (carrying the
    row index) on blank required fields.
    """
    path = Path(path)
    fmt = _guess_format(path, fmt)
    notes: list[NoteText] = []
    seen: set[str] = set()
    for row_idx, row in enumerate(_iter_rows(path, fmt, NOTE_COLUMNS)):
        note_id = str(row["note_id"] or "").strip()
        hadm_id = str(row["hadm_id"] or "").strip()
        text = str(row["text"] or "")
        if not note_id:
            raise MalformedRow(row_idx, "empty 'note_id' field")
        if not text:
            raise EmptyText(row_idx)
        if note_id in seen:
            logger.warning("duplicate note_id %r at row %d", note_id, row_idx)
        seen.add(note_id)
        notes.append(NoteText(note_id=note_id, hadm_id=hadm_id, text=text))
    return notes


def load_queries(
    path: str | Path,
    fmt: str | None = None,
    strict: bool = False,
) -> list[QueryText]:
    """Load brief-course queries.

    With ``strict=True`` the summary must be at least
    ``STRICT_QUERY_MIN_CHARS`` characters (the corpus inclusion rule);
    otherwise any non-empty text is accepted.
    """
    path = Path(path)
    fmt = _guess_format(path, fmt)
    queries: list[QueryText] = []
    seen: set[str] = set()
    for row_idx, row in enumerate(_iter_rows(path, fmt, QUERY_COLUMNS)):
        note_id = str(row["note_id"] or "").strip()
        text = str(row["text"] or "")
        if not note_id:
            raise MalformedRow(row_idx, "empty 'note_id' field")
        if not text:
            raise EmptyText(row_idx)
        if strict and len(text) < STRICT_QUERY_MIN_CHARS:
            raise MalformedRow(
                row_idx,
                f"query shorter than {STRICT_QUERY_MIN_CHARS} characters in strict mode",
            )
        if note_id in seen:
            logger.warning("duplicate note_id %r at row %d", note_id, row_idx)
        seen.add(note_id)
        queries.append(QueryText(note_id=note_id, text=text))
    return queries


def join(
    notes: Sequence[NoteText],
    queries: Sequence[QueryText],
) -> tuple[list[CaseDocument], JoinReport]:
    """Inner-join notes and queries on note_id.

    Output follows note input order; first occurrence wins on duplicate ids.
    Orphans on either side are reported, never fatal.
    """
    by_id: dict[str, QueryText] = {}
    for q in queries:
        by_id.setdefault(q.note_id, q)

    docs: list[CaseDocument] = []
    matched: set[str] = set()
    report = JoinReport()
    for note in notes:
        if note.note_id in matched:
            continue
        query = by_id.get(note.note_id)
        if query is None:
            report.orphan_notes.append(note.note_id)
            continue
        matched.add(note.note_id)
        docs.append(
            CaseDocument(
                note_id=note.note_id,
                hadm_id=note.hadm_id,
                note=note,
                query=query,
            )
        )
    report.orphan_queries = [q for q in by_id if q not in matched]
    if report.orphan_notes or report.orphan_queries:
        logger.warning(
            "join: %d orphan notes, %d orphan queries",
            len(report.orphan_notes),
            len(report.orphan_queries),
        )
    return docs, report


def write_notes(notes: Sequence[NoteText], path: str | Path, fmt: str | None = None) -> None:
    """Write notes back out; load(write(x)) round-trips byte-stable text."""
    path = Path(path)
    fmt = _guess_format(path, fmt)
    if fmt == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(NOTE_COLUMNS)
            for n in notes:
                writer.writerow([n.note_id, n.hadm_id, n.text])
    else:
        with path.open("w", encoding="utf-8") as fh:
            for n in notes:
                fh.write(json.dumps(
                    {"note_id": n.note_id, "hadm_id": n.hadm_id, "text": n.text},
                    ensure_ascii=False,
                ))
                fh.write("\n")


def write_queries(queries: Sequence[QueryText], path: str | Path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = _guess_format(path, fmt)
    if fmt == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(QUERY_COLUMNS)
            for q in queries:
                writer.writerow([q.note_id, q.text])
    else:
        with path.open("w", encoding="utf-8") as fh:
            for q in queries:
                fh.write(json.dumps({"note_id": q.note_id, "text": q.text}, ensure_ascii=False))
                fh.write("\n")
