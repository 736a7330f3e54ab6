"""Prompt assembly, LLM calls, and response parsing/repair.

The extraction prompt is a fixed, versioned template (prompts/) wrapped
around the document and the fused chunk list. Raw model output is a line
oriented ``event | hours`` list in the wild sense of "line oriented":
bullets, numbering, code fences, swapped columns, junk timestamps and
boilerplate all occur, so parsing is total (never raises on arbitrary
bytes) and every input line is accounted for as accepted or rejected.
"""

from __future__ import annotations

import logging
import re
import time
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable, Iterable, Sequence

from .errors import NoChunks, ProviderError, RetriesExhausted
from .providers import LlmProvider

logger = logging.getLogger(__name__)

PROMPT_TEMPLATE_NAME = "event_extraction_v1"

DEFAULT_STOP_PHRASES = ("no acute process",)
DEFAULT_MAX_RETRIES = 3
DEFAULT_BACKOFF = 0.5

_FENCE_RE = re.compile(r"^\s*```")
# markers need trailing whitespace so a leading sign ("-48 | x") or a
# decimal ("2.5 | x") is never mistaken for list markup
_LIST_MARKUP_RE = re.compile(r"^\s*(?:[-*•>]+|\d{1,4}[.)])\s+")
_NUMBER_RE = re.compile(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)$")
_LETTER_RE = re.compile(r"[^\W\d_]")
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    document: str
    chunk_list: tuple[str, ...]
    rendered: str


@dataclass(frozen=True)
class AnnotatedEvent:
    event: str
    time_hours: float
    source_chunk_id: int | None = None
    provenance: str = "parsed"  # parsed | repaired


@dataclass
class ParseReport:
    accepted: list[AnnotatedEvent] = field(default_factory=list)
    rejected: list[tuple[str, str]] = field(default_factory=list)  # (raw line, reason)
    repairs: dict[str, int] = field(default_factory=dict)

    @property
    def n_candidates(self) -> int:
        return len(self.accepted) + len(self.rejected)


@dataclass
class CleanReport:
    n_input: int = 0
    n_output: int = 0
    normalized: int = 0
    dropped_non_textual: int = 0
    dropped_stop_phrase: int = 0
    dropped_duplicate: int = 0


def load_template(name: str = PROMPT_TEMPLATE_NAME) -> str:
    return (
        resources.files("clinevents")
        .joinpath(f"prompts/{name}.md")
        .read_text(encoding="utf-8")
    )


def build_prompt(document: str, chunks: Sequence[str]) -> PromptBundle:
    """Wrap the fixed template around the document and a numbered chunk list.

    Rendering is deterministic; the chunk order given is the order shown.
    """
    if not chunks:
        raise NoChunks("prompt needs at least one chunk")
    system_text = load_template()
    lines = [f"{i + 1}. {text}" for i, text in enumerate(chunks)]
    user = "Document:\n" + document + "\n\nChunks:\n" + "\n".join(lines)
    return PromptBundle(
        system_text=system_text,
        document=document,
        chunk_list=tuple(chunks),
        rendered=system_text + "\n\n" + user,
    )


def user_message(bundle: PromptBundle) -> str:
    """The non-system part of the rendered prompt."""
    return bundle.rendered[len(bundle.system_text) + 2:]


def annotate(
    provider: LlmProvider,
    bundle: PromptBundle,
    max_retries: int = DEFAULT_MAX_RETRIES,
    backoff: float = DEFAULT_BACKOFF,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Call the provider, retrying transient failures with exponential backoff.

    Returns the raw response text unmodified. Non-transient provider errors
    propagate immediately; transient ones raise RetriesExhausted once the
    retry budget is spent.
    """
    attempts = 0
    last: ProviderError | None = None
    while attempts <= max_retries:
        attempts += 1
        try:
            return provider.complete(bundle.system_text, user_message(bundle))
        except ProviderError as exc:
            if not exc.transient:
                raise
            last = exc
            logger.warning("annotation attempt %d failed: %s", attempts, exc)
            if attempts <= max_retries:
                sleep(backoff * 2 ** (attempts - 1))
    raise RetriesExhausted(attempts, last if last is not None else ProviderError("unknown"))


def _parse_number(text: str) -> float | None:
    text = text.strip().strip("`'\"")
    if _NUMBER_RE.match(text):
        return float(text)
    return None


def parse_response(raw: str) -> ParseReport:
    """Parse raw model output into events; total over arbitrary input.

    A candidate line is any non-blank, non-code-fence line. List markup is
    stripped, the line is split on its last pipe, and the right side must
    parse as a signed int or decimal. Lines with the columns the other way
    around (``<number> | <text>``) are swap-repaired and marked as such;
    everything else is rejected with a reason. Every candidate line lands
    in exactly one of accepted or rejected.
    """
    report = ParseReport()
    for line in raw.split("\n"):
        stripped = line.strip()
        if not stripped or _FENCE_RE.match(stripped):
            continue
        body = stripped
        while True:
            unwrapped = _LIST_MARKUP_RE.sub("", body)
            if unwrapped == body:
                break
            body = unwrapped
        if "|" not in body:
            report.rejected.append((line, "no_pipe"))
            continue
        event_part, _, time_part = body.rpartition("|")
        event = event_part.strip()
        time_str = time_part.strip()
        hours = _parse_number(time_str)
        if hours is not None:
            if not event:
                report.rejected.append((line, "empty_event"))
                continue
            report.accepted.append(AnnotatedEvent(event=event, time_hours=hours))
            continue
        swapped_hours = _parse_number(event)
        if swapped_hours is not None and _LETTER_RE.search(time_str):
            swapped_event = time_str
            while True:
                unwrapped = _LIST_MARKUP_RE.sub("", swapped_event)
                if unwrapped == swapped_event:
                    break
                swapped_event = unwrapped
            if swapped_event:
                report.accepted.append(
                    AnnotatedEvent(
                        event=swapped_event,
                        time_hours=swapped_hours,
                        provenance="repaired",
                    )
                )
                report.repairs["column_swap"] = report.repairs.get("column_swap", 0) + 1
                continue
        report.rejected.append((line, "invalid_timestamp"))
    return report


def format_event(event: AnnotatedEvent) -> str:
    """Inverse of parse for accepted events: ``event | hours``."""
    from .timeline import format_hours

    return f"{event.event} | {format_hours(event.time_hours)}"


def _normalize_text(text: str) -> str:
    text = _WS_RE.sub(" ", text)
    while True:
        stripped = text.strip().strip("|")
        if stripped == text:
            return text
        text = stripped


def load_stop_phrases(path) -> tuple[str, ...]:
    """One phrase per line; blank lines and # comments ignored."""
    phrases = []
    for line in open(path, encoding="utf-8"):
        line = line.strip()
        if line and not line.startswith("#"):
            phrases.append(line)
    return tuple(phrases)


def clean(
    events: Iterable[AnnotatedEvent],
    stop_phrases: Sequence[str] = DEFAULT_STOP_PHRASES,
) -> tuple[list[AnnotatedEvent], CleanReport]:
    """Normalize and filter one note's parsed events.

    In order: whitespace/pipe-fragment normalization, drop events with no
    alphabetic character, drop stop-phrase boilerplate (case-insensitive
    exact match), drop exact (event, time) duplicates keeping the first.
    Column swaps are already repaired at parse time, where the raw fields
    exist. Idempotent: clean(clean(x)) == clean(x).
    """
    stop_set = {_normalize_text(p).casefold() for p in stop_phrases}
    report = CleanReport()
    seen: set[tuple[str, float]] = set()
    out: list[AnnotatedEvent] = []
    for ev in events:
        report.n_input += 1
        text = _normalize_text(ev.event)
        if text != ev.event:
            report.normalized += 1
            ev = replace(ev, event=text)
        if not _LETTER_RE.search(text):
            report.dropped_non_textual += 1
            continue
        if text.casefold() in stop_set:
            report.dropped_stop_phrase += 1
            continue
        key = (text, ev.time_hours)
        if key in seen:
            report.dropped_duplicate += 1
            continue
        seen.add(key)
        out.append(ev)
    report.n_output = len(out)
    return out, report


_WORD_RE = re.compile(r"[^\W_]+")


def attribute_chunks(
    events: Sequence[AnnotatedEvent],
    chunks: Sequence[tuple[int, str]],
) -> tuple[list[AnnotatedEvent], int]:
    """Soft chunk-membership check.

    Each event is attributed to the first chunk sharing at least one
    case-insensitive token with it; events matching no chunk keep
    source_chunk_id=None (flagged, not dropped). Returns the annotated
    events and the number of unmatched ones.
    """
    chunk_tokens = [
        (cid, {t.lower() for t in _WORD_RE.findall(text)}) for cid, text in chunks
    ]
    out: list[AnnotatedEvent] = []
    unmatched = 0
    for ev in events:
        tokens = {t.lower() for t in _WORD_RE.findall(ev.event)}
        hit: int | None = None
        for cid, ctoks in chunk_tokens:
            if tokens & ctoks:
                hit = cid
                break
        if hit is None:
            unmatched += 1
        out.append(replace(ev, source_chunk_id=hit))
    return out, unmatched
