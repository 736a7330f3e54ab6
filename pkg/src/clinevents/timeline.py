"""Timestamp binning, pair labeling, sequence rendering, and note splits.

Timestamps are hours relative to admission (time 0, negative before).
Binning maps them onto nine half-open intervals over the boundary list
(-60, -30, -15, 0, 15, 30, 60, 120) with open ends, so time 0 lands in
[0, 15) = bin 4. Pair labels: 0 simultaneous, 1 the second event is later
(consequence), 2 the second event is earlier (antecedent).
"""

from __future__ import annotations

import csv
import math
import random
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import BadFractions, NonFiniteTime, TimelineError

DEFAULT_BIN_BOUNDARIES = (-60.0, -30.0, -15.0, 0.0, 15.0, 30.0, 60.0, 120.0)

RECORD_COLUMNS = ("Hadm_id", "Event", "Time", "Time_bin")
PAIR_COLUMNS = ("event_a", "event_b", "y", "t")

TIME_TOKEN = "[TIME]"
EVENT_TOKEN = "[EVENT]"


@dataclass(frozen=True)
class BinScheme:
    boundaries: tuple[float, ...] = DEFAULT_BIN_BOUNDARIES

    def __post_init__(self):
        if len(self.boundaries) < 1:
            raise TimelineError("bin scheme needs at least one boundary")
        if any(b2 <= b1 for b1, b2 in zip(self.boundaries, self.boundaries[1:])):
            raise TimelineError("bin boundaries must be strictly increasing")

    @property
    def n_bins(self) -> int:
        return len(self.boundaries) + 1


DEFAULT_SCHEME = BinScheme()


@dataclass(frozen=True)
class EventRecord:
    hadm_id: str
    event: str
    time_hours: float
    time_bin: int


@dataclass(frozen=True)
class EventPair:
    event_a: str
    event_b: str
    y: int  # 0 simultaneous, 1 consequence, 2 antecedent
    t: int  # time bin of event_a


def bin_time(hours: float, scheme: BinScheme = DEFAULT_SCHEME) -> int:
    """Index of the half-open interval [lo, hi) containing ``hours``."""
    if not math.isfinite(hours):
        raise NonFiniteTime(hours)
    return bisect_right(scheme.boundaries, hours)


def label_pair(time_a: float, time_b: float) -> int:
    """3-class correlation label for two events in document order."""
    if not (math.isfinite(time_a) and math.isfinite(time_b)):
        raise NonFiniteTime(time_a if not math.isfinite(time_a) else time_b)
    if time_a == time_b:
        return 0
    return 1 if time_b > time_a else 2


def make_record(
    hadm_id: str,
    event: str,
    time_hours: float,
    scheme: BinScheme = DEFAULT_SCHEME,
) -> EventRecord:
    return EventRecord(hadm_id, event, float(time_hours), bin_time(time_hours, scheme))


def make_pairs(
    events: Sequence[tuple[str, float]],
    strategy: str = "adjacent",
    window: int | None = None,
    scheme: BinScheme = DEFAULT_SCHEME,
) -> list[EventPair]:
    """Pair events of one note, given in document order.

    ``adjacent`` pairs consecutive events, ``all`` every ordered pair,
    ``window`` pairs up to ``window`` positions apart. The pair's t is the
    bin of the first event. Order is deterministic: by first index, then
    second.
    """
    if strategy == "adjacent":
        span = 1
    elif strategy == "all":
        span = max(len(events) - 1, 1)
    elif strategy == "window":
        if window is None or window < 1:
            raise TimelineError("window strategy needs window >= 1")
        span = window
    else:
        raise TimelineError(f"unknown pairing strategy {strategy!r}")

    pairs: list[EventPair] = []
    for i, (event_a, time_a) in enumerate(events):
        for j in range(i + 1, min(i + span, len(events) - 1) + 1):
            event_b, time_b = events[j]
            pairs.append(
                EventPair(
                    event_a=event_a,
                    event_b=event_b,
                    y=label_pair(time_a, time_b),
                    t=bin_time(time_a, scheme),
                )
            )
    return pairs


def format_hours(hours: float) -> str:
    """Render without trailing zeros or exponents: -72.0 -> '-72', 1.5 -> '1.5'.

    Positional notation keeps the text parseable by the plain
    sign/int/decimal grammar while still round-tripping the float exactly.
    """
    if hours == int(hours) and abs(hours) < 1e16:
        return str(int(hours))
    return np.format_float_positional(hours, trim="-")


def format_sequence(events: Sequence[tuple[str, float]]) -> str:
    """One note's events as '[TIME] t [EVENT] e' segments, time-ordered.

    The sort is stable, so simultaneous events keep their input order.
    """
    ordered = sorted(events, key=lambda ev: ev[1])
    return " ".join(
        f"{TIME_TOKEN} {format_hours(t)} {EVENT_TOKEN} {e}" for e, t in ordered
    )


def scan_sequence(text: str) -> list[tuple[str, float]]:
    """Inverse of format_sequence for marker-free event texts."""
    events: list[tuple[str, float]] = []
    segments = text.split(TIME_TOKEN)
    for segment in segments[1:]:
        time_part, sep, event_part = segment.partition(EVENT_TOKEN)
        if not sep:
            raise TimelineError(f"segment without {EVENT_TOKEN}: {segment!r}")
        events.append((event_part.strip(), float(time_part.strip())))
    return events


def split(
    note_ids: Sequence[str],
    fractions: Sequence[float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[list[str], list[str], list[str]]:
    """Shuffle ids with a seeded PRNG and slice by fraction.

    Sizes use largest-remainder rounding so the three non-overlapping sets
    always partition the input exactly.
    """
    if len(fractions) != 3:
        raise BadFractions("expected exactly three fractions")
    if any(f < 0 for f in fractions):
        raise BadFractions("fractions must be non-negative")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise BadFractions(f"fractions sum to {sum(fractions)}, expected 1")

    ids = list(note_ids)
    random.Random(seed).shuffle(ids)
    n = len(ids)
    raw = [f * n for f in fractions]
    sizes = [int(r) for r in raw]
    remainders = sorted(
        range(len(fractions)), key=lambda i: (-(raw[i] - sizes[i]), i)
    )
    for i in range(n - sum(sizes)):
        sizes[remainders[i]] += 1
    cuts = [0, sizes[0], sizes[0] + sizes[1], n]
    return ids[cuts[0]:cuts[1]], ids[cuts[1]:cuts[2]], ids[cuts[2]:cuts[3]]


# --- file interfaces --------------------------------------------------------

def write_records_csv(records: Iterable[EventRecord], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            writer.writerow([r.hadm_id, r.event, format_hours(r.time_hours), r.time_bin])


def read_records_csv(path: str | Path) -> list[EventRecord]:
    records: list[EventRecord] = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(
                EventRecord(
                    hadm_id=row["Hadm_id"],
                    event=row["Event"],
                    time_hours=float(row["Time"]),
                    time_bin=int(row["Time_bin"]),
                )
            )
    return records


def write_pairs_csv(pairs: Iterable[EventPair], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PAIR_COLUMNS)
        for p in pairs:
            writer.writerow([p.event_a, p.event_b, p.y, p.t])


def read_pairs_csv(path: str | Path) -> list[EventPair]:
    pairs: list[EventPair] = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            pairs.append(
                EventPair(
                    event_a=row["event_a"],
                    event_b=row["event_b"],
                    y=int(row["y"]),
                    t=int(row["t"]),
                )
            )
    return pairs
