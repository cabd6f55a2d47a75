"""Rule-based section detection for discharge notes.

A section header matches when a known header literal, followed by optional
spaces/tabs and a colon, begins a line (case-insensitive). Longer literals win
over shorter ones at the same position, so "PAST MEDICAL HISTORY" beats
"HISTORY". Everything between one header and the next is that section's body;
text before the first header becomes a single "unknown" section.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyHeader, RuleFileError, UnknownCanonicalId

# Canonical section ids the rules file may target. Discharge sheets carry many
# more section kinds than the pipeline consumes; the registry covers the common
# ones so user rule files can extend the defaults without code changes.
CANONICAL_SECTIONS = frozenset({
    "chief_complaint",
    "history_of_present_illness",
    "past_medical_history",
    "family_history",
    "physical_exam",
    "social_history",
    "allergies",
    "medications_on_admission",
    "discharge_medications",
    "discharge_diagnosis",
    "discharge_condition",
    "discharge_instructions",
    "hospital_course",
    "review_of_systems",
    "laboratory_data",
})

# The five high-value sections selected for concept extraction by default.
DEFAULT_ALLOWLIST = (
    "past_medical_history",
    "history_of_present_illness",
    "chief_complaint",
    "family_history",
    "physical_exam",
)

UNKNOWN_SECTION = "unknown"


@dataclass(frozen=True)
class SectionRule:
    canonical_id: str
    header_literal: str


@dataclass(frozen=True)
class Section:
    canonical_id: str
    header_raw: str   # matched header text incl. colon; "" for the unknown prefix
    body: str
    start: int        # [start, end) character offsets into the note
    end: int


def load_section_rules(path: str | Path) -> list[SectionRule]:
    """Load a two-column TSV (canonical_id, header_literal); '#' lines ignored.

    Returned rules are sorted by descending header length for longest-first
    matching.
    """
    rules: list[SectionRule] = []
    literal_owner: dict[str, str] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for row_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise RuleFileError(f"row {row_no}: expected 2 tab-separated columns, got {len(parts)}")
            canonical_id, header = parts[0].strip(), parts[1].strip()
            if canonical_id not in CANONICAL_SECTIONS:
                raise UnknownCanonicalId(row_no, canonical_id)
            if not header:
                raise EmptyHeader(row_no)
            key = header.lower()
            owner = literal_owner.get(key)
            if owner is not None and owner != canonical_id:
                raise RuleFileError(
                    f"row {row_no}: header {header!r} already maps to {owner!r}"
                )
            literal_owner[key] = canonical_id
            rules.append(SectionRule(canonical_id=canonical_id, header_literal=header))
    rules.sort(key=lambda r: (-len(r.header_literal), r.header_literal.lower()))
    return rules


def default_section_rules() -> list[SectionRule]:
    """Rules bundled with the package (five canonical sections plus aliases)."""
    ref = resources.files("concept_distill").joinpath("data/section_rules.tsv")
    with resources.as_file(ref) as path:
        return load_section_rules(path)


def _header_pattern(rules: Sequence[SectionRule]) -> re.Pattern:
    ordered = sorted(rules, key=lambda r: -len(r.header_literal))
    alternation = "|".join(re.escape(r.header_literal) for r in ordered)
    return re.compile(rf"(?im)^(?:{alternation})[ \t]*:")


def sectionize(note: str, rules: Sequence[SectionRule]) -> list[Section]:
    """Split a note into sections; concatenating header_raw+body over the
    result reconstructs the note exactly."""
    if not rules:
        raise ValueError("rules must be non-empty")
    if note == "":
        return []
    by_literal = {}
    for rule in rules:
        by_literal.setdefault(rule.header_literal.lower(), rule.canonical_id)
    hits = []  # (start, header_end, canonical_id)
    for m in _header_pattern(rules).finditer(note):
        literal = m.group(0)[:-1].rstrip(" \t")
        hits.append((m.start(), m.end(), by_literal[literal.lower()]))

    sections: list[Section] = []
    if not hits:
        return [Section(UNKNOWN_SECTION, "", note, 0, len(note))]
    first_start = hits[0][0]
    if first_start > 0:
        sections.append(Section(UNKNOWN_SECTION, "", note[:first_start], 0, first_start))
    for i, (start, header_end, canonical_id) in enumerate(hits):
        body_end = hits[i + 1][0] if i + 1 < len(hits) else len(note)
        sections.append(Section(
            canonical_id=canonical_id,
            header_raw=note[start:header_end],
            body=note[header_end:body_end],
            start=start,
            end=body_end,
        ))
    return sections


def select_sections(sections: Iterable[Section], allowlist: Iterable[str]) -> str:
    """Concatenate the bodies of allowlisted sections in document order,
    one newline between bodies."""
    allowed = set(allowlist)
    bodies = [s.body.strip() for s in sections if s.canonical_id in allowed]
    return "\n".join(b for b in bodies if b)
