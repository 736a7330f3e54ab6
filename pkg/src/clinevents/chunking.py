"""Whitespace tokenization and fixed-size chunking with context windows.

Chunks are short spans (default 5 tokens) cut greedily left to right;
each chunk is then wrapped with the adjacent tokens on both sides
(default 10 per side) to form the contextual text that retrieval and
embedding operate on. Offsets always slice the original note exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

DEFAULT_CHUNK_SIZE = 5
DEFAULT_CONTEXT_TOKENS = 10

_TOKEN_RE = re.compile(r"\S+")


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class Chunk:
    note_id: str
    chunk_id: int
    tokens: tuple[Token, ...]

    @property
    def text(self) -> str:
        return " ".join(t.text for t in self.tokens)

    @property
    def start(self) -> int:
        return self.tokens[0].start

    @property
    def end(self) -> int:
        return self.tokens[-1].end


@dataclass(frozen=True)
class ContextualChunk:
    chunk: Chunk
    left_context: tuple[Token, ...]
    right_context: tuple[Token, ...]

    @property
    def rendered(self) -> str:
        parts = [t.text for t in self.left_context]
        parts += [t.text for t in self.chunk.tokens]
        parts += [t.text for t in self.right_context]
        return " ".join(parts)


def tokenize(text: str) -> list[Token]:
    """Split on Unicode whitespace into maximal non-whitespace runs.

    Offsets are exact: text[tok.start:tok.end] == tok.text.
    """
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def chunk(
    tokens: Sequence[Token],
    note_id: str = "",
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> list[Chunk]:
    """Greedy left-to-right partition into chunks of ``chunk_size`` tokens.

    The final chunk may be shorter; nothing is merged or dropped, so the
    concatenation of all chunk tokens equals the input token stream.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    chunks: list[Chunk] = []
    for i in range(0, len(tokens), chunk_size):
        chunks.append(Chunk(note_id=note_id, chunk_id=len(chunks),
                            tokens=tuple(tokens[i:i + chunk_size])))
    return chunks


def contextualize(
    chunks: Sequence[Chunk],
    tokens: Sequence[Token],
    context_tokens: int = DEFAULT_CONTEXT_TOKENS,
) -> list[ContextualChunk]:
    """Attach up to ``context_tokens`` adjacent tokens on each side.

    Windows are truncated at note boundaries; ``chunks`` must have been
    produced from ``tokens``.
    """
    if context_tokens < 0:
        raise ValueError("context_tokens must be >= 0")
    out: list[ContextualChunk] = []
    pos = 0
    for ch in chunks:
        lo = pos
        hi = pos + len(ch.tokens)
        left = tokens[max(0, lo - context_tokens):lo]
        right = tokens[hi:hi + context_tokens]
        out.append(ContextualChunk(chunk=ch,
                                   left_context=tuple(left),
                                   right_context=tuple(right)))
        pos = hi
    return out


def chunk_note(
    note_id: str,
    text: str,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    context_tokens: int = DEFAULT_CONTEXT_TOKENS,
) -> list[ContextualChunk]:
    """tokenize -> chunk -> contextualize for one note."""
    tokens = tokenize(text)
    return contextualize(chunk(tokens, note_id, chunk_size), tokens, context_tokens)
