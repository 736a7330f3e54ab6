"""clinevents: temporally anchored clinical event extraction.

Takes long free-text notes plus their brief-course summaries, retrieves
candidate chunks with contextual BM25 and embedding similarity, has an LLM
annotate event/timestamp pairs, then normalizes, bins, pairs, and packages
the results into training-ready datasets.
"""

__version__ = "0.1.0"

from .annotation import AnnotatedEvent, ParseReport, build_prompt, clean, parse_response
from .chunking import Chunk, ContextualChunk, Token, chunk, chunk_note, contextualize, tokenize
from .corpus import CaseDocument, NoteText, QueryText, join, load_notes, load_queries
from .retrieval import (
    Bm25Index,
    RetrievalResult,
    bm25_score,
    build_index,
    cosine,
    fuse,
    semantic_filter,
    top_k,
)
from .timeline import (
    BinScheme,
    EventPair,
    EventRecord,
    bin_time,
    format_sequence,
    label_pair,
    make_pairs,
    scan_sequence,
    split,
)

__all__ = [
    "__version__",
    "AnnotatedEvent",
    "BinScheme",
    "Bm25Index",
    "CaseDocument",
    "Chunk",
    "ContextualChunk",
    "EventPair",
    "EventRecord",
    "NoteText",
    "ParseReport",
    "QueryText",
    "RetrievalResult",
    "Token",
    "bin_time",
    "bm25_score",
    "build_index",
    "build_prompt",
    "chunk",
    "chunk_note",
    "clean",
    "contextualize",
    "cosine",
    "format_sequence",
    "fuse",
    "join",
    "label_pair",
    "load_notes",
    "load_queries",
    "make_pairs",
    "parse_response",
    "scan_sequence",
    "semantic_filter",
    "split",
    "tokenize",
    "top_k",
]
