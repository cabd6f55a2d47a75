"""Patient corpus loading, validation, summary statistics, and persistence.

The corpus file format is UTF-8 JSON-lines; each line holds one record:

    {"patient_id": "<str>", "text": "<str>", "label": 0|1}

Note text is truncated to MAX_TEXT_CHARS characters at ingestion.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import DuplicateId, InvalidLabel, MalformedRecord

MAX_TEXT_CHARS = 200_000


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    text: str
    label: int


@dataclass(frozen=True)
class Corpus:
    records: tuple[PatientRecord, ...]
    source_path: str

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PatientRecord]:
        return iter(self.records)

    @property
    def patient_ids(self) -> list[str]:
        return [r.patient_id for r in self.records]

    @property
    def labels(self) -> list[int]:
        return [r.label for r in self.records]


@dataclass(frozen=True)
class CorpusStats:
    """Character-length statistics over a list of texts (one stats row per variant)."""

    count: int
    mean: float | None = None
    std: float | None = None
    min: float | None = None
    q25: float | None = None
    median: float | None = None
    q75: float | None = None
    max: float | None = None

    def to_dict(self) -> dict:
        if self.count == 0:
            return {"count": 0}
        return {
            "count": self.count,
            "mean": self.mean,
            "std": self.std,
            "min": self.min,
            "q25": self.q25,
            "median": self.median,
            "q75": self.q75,
            "max": self.max,
        }


def _parse_record(obj: object, line_no: int) -> PatientRecord:
    if not isinstance(obj, dict):
        raise MalformedRecord(line_no, "record is not a JSON object")
    try:
        patient_id = obj["patient_id"]
        text = obj["text"]
        label = obj["label"]
    except KeyError as e:
        raise MalformedRecord(line_no, f"missing field {e.args[0]!r}") from None
    if not isinstance(patient_id, str) or not patient_id:
        raise MalformedRecord(line_no, "patient_id must be a non-empty string")
    if not isinstance(text, str):
        raise MalformedRecord(line_no, "text must be a string")
    if isinstance(label, bool) or not isinstance(label, int) or label not in (0, 1):
        raise InvalidLabel(patient_id, label)
    return PatientRecord(patient_id=patient_id, text=text[:MAX_TEXT_CHARS], label=label)


def load_corpus(path: str | Path) -> Corpus:
    """Read a JSONL corpus file, validating every record.

    Raises MalformedRecord / InvalidLabel / DuplicateId on the first bad line;
    nothing is ever dropped silently.
    """
    path = Path(path)
    records: list[PatientRecord] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise MalformedRecord(line_no, f"invalid JSON: {e.msg}") from None
            rec = _parse_record(obj, line_no)
            if rec.patient_id in seen:
                raise DuplicateId(rec.patient_id)
            seen.add(rec.patient_id)
            records.append(rec)
    return Corpus(records=tuple(records), source_path=str(path))


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus back out in the canonical JSONL layout (stable byte-wise)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in corpus.records:
            fh.write(json.dumps(
                {"patient_id": rec.patient_id, "text": rec.text, "label": rec.label},
                ensure_ascii=False,
            ))
            fh.write("\n")


def corpus_stats(texts: Sequence[str]) -> CorpusStats:
    """Length statistics; quantiles use linear interpolation between order statistics."""
    if not texts:
        return CorpusStats(count=0)
    lengths = np.array([len(t) for t in texts], dtype=float)
    q25, median, q75 = np.quantile(lengths, [0.25, 0.5, 0.75])
    return CorpusStats(
        count=len(texts),
        mean=float(lengths.mean()),
        std=float(lengths.std()),
        min=float(lengths.min()),
        q25=float(q25),
        median=float(median),
        q75=float(q75),
        max=float(lengths.max()),
    )
