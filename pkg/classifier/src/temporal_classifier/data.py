"""Dataset I/O: the upstream pipeline's pairs CSV and sequences files.

Both formats are consumed as emitted, never via the pipeline's code:
pairs CSV has columns event_a,event_b,y,t; a sequences file carries one
'[TIME] t [EVENT] e ...' line per note with a sidecar id list.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from pathlib import Path

from .errors import DataSchemaError

PAIR_COLUMNS = ("event_a", "event_b", "y", "t")
N_CLASSES = 3
N_BINS = 9

TIME_TOKEN = "[TIME]"
EVENT_TOKEN = "[EVENT]"


@dataclass(frozen=True)
class PairSample:
    event_a: str
    event_b: str
    y: int
    t: int

    @property
    def text(self) -> str:
        return f"{self.event_a} [SEP] {self.event_b}"


def load_pairs_csv(path: str | Path) -> list[PairSample]:
    """Read a pairs CSV, validating labels and bins row by row."""
    path = Path(path)
    samples: list[PairSample] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = tuple(reader.fieldnames or ())
        for column in PAIR_COLUMNS:
            if column not in header:
                raise DataSchemaError(f"{path}: missing column {column!r}")
        for idx, row in enumerate(reader):
            try:
                y = int(row["y"])
                t = int(row["t"])
            except (TypeError, ValueError) as exc:
                raise DataSchemaError(f"{path} row {idx}: {exc}") from exc
            if not 0 <= y < N_CLASSES:
                raise DataSchemaError(f"{path} row {idx}: label {y} outside [0, {N_CLASSES - 1}]")
            if not 0 <= t < N_BINS:
                raise DataSchemaError(f"{path} row {idx}: bin {t} outside [0, {N_BINS - 1}]")
            samples.append(PairSample(row["event_a"], row["event_b"], y, t))
    return samples


def load_sequences(path: str | Path, ids_path: str | Path | None = None):
    """Parse '[TIME] t [EVENT] e' lines into per-note (event, hours) lists."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    notes = []
    for line in lines:
        events = []
        for segment in line.split(TIME_TOKEN)[1:]:
            time_part, sep, event_part = segment.partition(EVENT_TOKEN)
            if not sep:
                raise DataSchemaError(f"sequence segment without {EVENT_TOKEN}: {segment!r}")
            events.append((event_part.strip(), float(time_part.strip())))
        notes.append(events)
    if ids_path is None:
        return notes
    ids = Path(ids_path).read_text(encoding="utf-8").split()
    if len(ids) != len(notes):
        raise DataSchemaError(
            f"{len(ids)} ids for {len(notes)} sequence lines"
        )
    return dict(zip(ids, notes))


_FILLERS = ("fever", "rash", "admitted", "surgery", "fluids", "pain",
            "imaging", "cultures", "stent", "therapy")
_MARKERS = {0: "concurrent", 1: "consequence", 2: "antecedent"}


def make_synthetic_pairs(n: int = 200, seed: int = 0) -> list[PairSample]:
    """Separable toy set: the second event carries a class keyword, so the
    label is a deterministic function of the pair text; bins are uniform."""
    rng = random.Random(seed)
    samples = []
    for i in range(n):
        y = i % N_CLASSES
        event_a = f"{rng.choice(_FILLERS)} {rng.choice(_FILLERS)}"
        event_b = f"{_MARKERS[y]} {_MARKERS[y]} {rng.choice(_FILLERS)}"
        samples.append(PairSample(event_a, event_b, y, rng.randrange(N_BINS)))
    return samples
