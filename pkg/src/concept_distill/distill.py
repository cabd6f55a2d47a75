"""Build the three per-patient input variants: full text, bag-of-concepts,
and unique concepts.

FULL is the cleansed raw note. BOC renders every extracted mention's preferred
name in source order, duplicates kept. UC deduplicates on (cui, negated),
drops concepts whose TF-IDF score for the patient is not positive, and renders
the survivors in first-occurrence order. Negated concepts carry a "NOT "
prefix in both BOC and UC.
"""
from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from .concepts import ConceptMention
from .corpus import PatientRecord
from .errors import EmptyCorpus

ConceptKey = tuple[str, bool]   # (cui, negated)

DEID_RE = re.compile(r"\[\*\*.*?\*\*\]", re.DOTALL)
WS_RE = re.compile(r"\s+")


class Variant(str, Enum):
    FULL = "full"
    BOC = "boc"
    UC = "uc"


@dataclass(frozen=True)
class DistilledDoc:
    patient_id: str
    variant: Variant
    text: str
    concept_keys: tuple[ConceptKey, ...] = ()


def _render(preferred_name: str, negated: bool) -> str:
    name = preferred_name.lower()
    return f"NOT {name}" if negated else name


def build_full(record: PatientRecord) -> DistilledDoc:
    """Standard cleansing: lowercase, strip [** ... **] de-id placeholders,
    collapse whitespace runs."""
    text = record.text.lower()
    text = DEID_RE.sub("", text)
    text = WS_RE.sub(" ", text).strip()
    return DistilledDoc(patient_id=record.patient_id, variant=Variant.FULL, text=text)


def build_boc(patient_id: str, mentions: Sequence[ConceptMention]) -> DistilledDoc:
    """All mentions in source order, duplicates retained."""
    keys = tuple((m.cui, m.negated) for m in mentions)
    text = " ".join(_render(m.preferred_name, m.negated) for m in mentions)
    return DistilledDoc(patient_id=patient_id, variant=Variant.BOC, text=text, concept_keys=keys)


@dataclass(frozen=True)
class TfidfTable:
    """Corpus-level document frequencies plus per-patient term frequencies."""

    n_docs: int
    df: Mapping[ConceptKey, int]
    tf: Mapping[str, Mapping[ConceptKey, int]]

    def score(self, key: ConceptKey, patient_id: str) -> float:
        """tf(key, patient) * ln(N / df(key)); 0.0 when the patient lacks the key."""
        count = self.tf.get(patient_id, {}).get(key, 0)
        if count == 0:
            return 0.0
        return count * math.log(self.n_docs / self.df[key])


def compute_tfidf(docs: Mapping[str, Sequence[ConceptKey]]) -> TfidfTable:
    """Build the TF-IDF table over all patients' concept multisets.

    Documents here are the per-patient BOC key multisets, not raw word text.
    """
    if not docs:
        raise EmptyCorpus("tf-idf requires at least one patient document")
    tf: dict[str, Counter] = {}
    df: Counter = Counter()
    for patient_id, keys in docs.items():
        counts = Counter(keys)
        tf[patient_id] = counts
        df.update(counts.keys())
    return TfidfTable(n_docs=len(docs), df=dict(df), tf=tf)


def build_uc(patient_id: str, mentions: Sequence[ConceptMention],
             tfidf: TfidfTable | None) -> DistilledDoc:
    """First occurrence of each (cui, negated) key, minus non-positive TF-IDF
    scores; tfidf=None disables the score filter."""
    seen: set[ConceptKey] = set()
    kept_keys: list[ConceptKey] = []
    kept_names: list[str] = []
    for m in mentions:
        key = (m.cui, m.negated)
        if key in seen:
            continue
        seen.add(key)
        if tfidf is not None and tfidf.score(key, patient_id) <= 0.0:
            continue
        kept_keys.append(key)
        kept_names.append(_render(m.preferred_name, m.negated))
    return DistilledDoc(
        patient_id=patient_id,
        variant=Variant.UC,
        text=" ".join(kept_names),
        concept_keys=tuple(kept_keys),
    )


def write_distilled(docs: Sequence[DistilledDoc], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(
                {"patient_id": doc.patient_id, "variant": doc.variant.value, "text": doc.text},
                ensure_ascii=False,
            ))
            fh.write("\n")


def read_distilled(path: str | Path) -> list[DistilledDoc]:
    docs = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            docs.append(DistilledDoc(
                patient_id=obj["patient_id"],
                variant=Variant(obj["variant"]),
                text=obj["text"],
            ))
    return docs
