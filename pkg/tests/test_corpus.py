"""Loader, validation, and join behavior for notes and queries."""

import pytest

from clinevents.corpus import (
    NoteText,
    QueryText,
    join,
    load_notes,
    load_queries,
    write_notes,
    write_queries,
)
from clinevents.errors import MalformedRow, MissingColumn


def write_csv(path, header, rows):
    import csv

    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


class TestLoadNotes:
    def test_header_only_csv_gives_empty_sequence(self, tmp_path):
        path = tmp_path / "notes.csv"
        write_csv(path, ["note_id", "hadm_id", "text"], [])
        assert load_notes(path) == []

    def test_rows_loaded_in_file_order(self, tmp_path):
        path = tmp_path / "notes.csv"
        write_csv(path, ["note_id", "hadm_id", "text"],
                  [["a", "h1", "first"], ["b", "h2", "second"]])
        notes = load_notes(path)
        assert [n.note_id for n in notes] == ["a", "b"]
        assert notes[0] == NoteText("a", "h1", "first")

    def test_blank_text_raises_malformed_row_naming_the_row(self, tmp_path):
        path = tmp_path / "notes.csv"
        write_csv(path, ["note_id", "hadm_id", "text"],
                  [["a", "h1", "ok"], ["b", "h2", ""]])
        with pytest.raises(MalformedRow) as err:
            load_notes(path)
        assert err.value.row == 1

    def test_missing_column_detected(self, tmp_path):
        path = tmp_path / "notes.csv"
        write_csv(path, ["note_id", "text"], [["a", "x"]])
        with pytest.raises(MissingColumn) as err:
            load_notes(path)
        assert err.value.column == "hadm_id"

    def test_duplicate_ids_reported_not_fatal(self, tmp_path, caplog):
        path = tmp_path / "notes.jsonl"
        write_notes([NoteText("a", "h", "x"), NoteText("a", "h", "y")], path)
        with caplog.at_level("WARNING"):
            notes = load_notes(path)
        assert len(notes) == 2
        assert any("duplicate" in rec.message for rec in caplog.records)

    def test_jsonl_preserves_newlines_in_text(self, tmp_path):
        path = tmp_path / "notes.jsonl"
        original = [NoteText("a", "h", "line one\nline two\n\ttabbed")]
        write_notes(original, path)
        assert load_notes(path) == original

    def test_csv_round_trip_is_byte_stable(self, tmp_path):
        notes = [
            NoteText("a", "h1", 'text with "quotes", commas\nand newlines'),
            NoteText("b", "h2", "plain"),
        ]
        path = tmp_path / "notes.csv"
        write_notes(notes, path)
        assert load_notes(path) == notes


class TestLoadQueries:
    def test_strict_mode_rejects_99_characters(self, tmp_path):
        path = tmp_path / "queries.jsonl"
        write_queries([QueryText("a", "x" * 99)], path)
        with pytest.raises(MalformedRow):
            load_queries(path, strict=True)

    def test_strict_mode_accepts_100_characters(self, tmp_path):
        path = tmp_path / "queries.jsonl"
        write_queries([QueryText("a", "x" * 100)], path)
        assert len(load_queries(path, strict=True)) == 1

    def test_relaxed_mode_accepts_one_character(self, tmp_path):
        path = tmp_path / "queries.jsonl"
        write_queries([QueryText("a", "x")], path)
        assert len(load_queries(path)) == 1

    def test_queries_round_trip_both_formats(self, tmp_path):
        queries = [QueryText("a", 'multi\nline "query", punctuated'), QueryText("b", "plain")]
        for fmt in ("jsonl", "csv"):
            path = tmp_path / f"queries.{fmt}"
            write_queries(queries, path)
            assert load_queries(path) == queries

    def test_strict_acceptance_is_monotone(self, tmp_path):
        """Anything strict mode accepts, relaxed mode accepts too."""
        path = tmp_path / "queries.jsonl"
        write_queries([QueryText(str(i), "q" * (95 + i)) for i in range(10)], path)
        relaxed_ids = {q.note_id for q in load_queries(path)}
        strict_path = tmp_path / "strict.jsonl"
        write_queries([QueryText(str(i), "q" * (100 + i)) for i in range(10)], strict_path)
        strict_ids = {q.note_id for q in load_queries(strict_path, strict=True)}
        assert strict_ids <= relaxed_ids | strict_ids


class TestJoin:
    def test_identical_id_sets(self):
        notes = [NoteText("a", "h", "x"), NoteText("b", "h", "y")]
        queries = [QueryText("a", "qa"), QueryText("b", "qb")]
        docs, report = join(notes, queries)
        assert [d.note_id for d in docs] == ["a", "b"]
        assert report.orphan_notes == [] and report.orphan_queries == []

    def test_partial_overlap_reports_orphans(self):
        notes = [NoteText("a", "h", "x"), NoteText("b", "h", "y")]
        queries = [QueryText("b", "qb"), QueryText("c", "qc")]
        docs, report = join(notes, queries)
        assert [d.note_id for d in docs] == ["b"]
        assert report.orphan_notes == ["a"]
        assert report.orphan_queries == ["c"]

    def test_empty_notes_side(self):
        queries = [QueryText(str(i), "q") for i in range(4)]
        docs, report = join([], queries)
        assert docs == []
        assert len(report.orphan_queries) == 4

    def test_join_size_is_id_intersection(self):
        import random

        rng = random.Random(42)
        for _ in range(50):
            note_ids = {str(rng.randrange(20)) for _ in range(rng.randrange(15))}
            query_ids = {str(rng.randrange(20)) for _ in range(rng.randrange(15))}
            notes = [NoteText(i, "h", "t") for i in sorted(note_ids)]
            queries = [QueryText(i, "q") for i in sorted(query_ids)]
            docs, _ = join(notes, queries)
            assert len(docs) == len(note_ids & query_ids)

    def test_query_absent_from_notes_loads_then_orphans(self, tmp_path):
        notes_path = tmp_path / "notes.jsonl"
        queries_path = tmp_path / "queries.jsonl"
        write_notes([NoteText("a", "h", "x"), NoteText("b", "h", "y")], notes_path)
        write_queries(
            [QueryText("a", "qa"), QueryText("b", "qb"), QueryText("zzz", "qz")],
            queries_path,
        )
        docs, report = join(load_notes(notes_path), load_queries(queries_path))
        assert len(docs) == 2
        assert report.orphan_queries == ["zzz"]
