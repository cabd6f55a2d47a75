"""Dictionary-based concept extraction: tokenize, match, link, negate.

Mentions are found by greedy left-to-right longest matching of token n-grams
against a lexicon of (cui, term, preferred name, semantic type, score) rows.
Candidates sharing a span are resolved to the highest-scoring entry, and each
linked mention is checked for negation with a NegEx-style trigger scan scoped
to its sentence.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import NamedTuple, Sequence

from .errors import EmptyCandidates, LexiconError, TriggerFileError

TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
SENTENCE_RE = re.compile(r"[^.!?\n]+")
CUI_RE = re.compile(r"^C\d+$")

SEMANTIC_TYPES = ("DISEASE", "CHEMICAL")
TRIGGER_CATEGORIES = ("PRE_NEG", "POST_NEG", "PSEUDO_NEG", "SCOPE_BREAK")

DEFAULT_NEGATION_WINDOW = 5   # classic NegEx scope, in tokens
DEFAULT_MAX_NGRAM = 6


class Token(NamedTuple):
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class LexiconEntry:
    cui: str
    term: str
    preferred_name: str
    semantic_type: str
    score: float = 1.0


@dataclass(frozen=True)
class ConceptMention:
    cui: str
    preferred_name: str
    semantic_type: str
    matched_text: str
    start: int
    end: int
    negated: bool
    score: float


@dataclass(frozen=True)
class NegationTrigger:
    phrase: str
    category: str


class CandidateSpan(NamedTuple):
    """One matched token range and all lexicon entries sharing its term."""
    token_start: int
    token_end: int
    start: int
    end: int
    candidates: tuple[LexiconEntry, ...]


def tokenize(text: str) -> list[Token]:
    """Lowercased alphanumeric tokens with [start, end) source offsets."""
    return [Token(m.group(0).lower(), m.start(), m.end()) for m in TOKEN_RE.finditer(text)]


class Lexicon:
    """Term index over lexicon entries, keyed by the term's token sequence."""

    def __init__(self, entries: Sequence[LexiconEntry], max_ngram: int = DEFAULT_MAX_NGRAM):
        self.entries = list(entries)
        self.max_ngram = max_ngram
        self._index: dict[tuple[str, ...], list[LexiconEntry]] = {}
        preferred: dict[str, str] = {}
        for e in self.entries:
            if not CUI_RE.match(e.cui):
                raise LexiconError(f"cui {e.cui!r} does not match C<digits>")
            if not e.term.strip():
                raise LexiconError(f"cui {e.cui}: empty term")
            if e.semantic_type not in SEMANTIC_TYPES:
                raise LexiconError(f"cui {e.cui}: semantic type {e.semantic_type!r}")
            if not 0.0 <= e.score <= 1.0:
                raise LexiconError(f"cui {e.cui}: score {e.score} outside [0, 1]")
            known = preferred.get(e.cui)
            if known is not None and known != e.preferred_name:
                raise LexiconError(
                    f"cui {e.cui}: conflicting preferred names {known!r} / {e.preferred_name!r}"
                )
            preferred[e.cui] = e.preferred_name
            key = tuple(t.text for t in tokenize(e.term))
            if not key:
                raise LexiconError(f"cui {e.cui}: term {e.term!r} has no tokens")
            if len(key) > max_ngram:
                raise LexiconError(
                    f"cui {e.cui}: term {e.term!r} longer than max n-gram {max_ngram}"
                )
            self._index.setdefault(key, []).append(e)

    def candidates(self, key: tuple[str, ...]) -> list[LexiconEntry] | None:
        return self._index.get(key)

    def __len__(self) -> int:
        return len(self.entries)


def load_lexicon(path: str | Path, max_ngram: int = DEFAULT_MAX_NGRAM) -> Lexicon:
    """Load a lexicon TSV: cui, term, preferred_name, semantic_type[, score].

    Score defaults to 1.0 when the column is absent.
    """
    entries = []
    with Path(path).open(encoding="utf-8") as fh:
        for row_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (4, 5):
                raise LexiconError(f"row {row_no}: expected 4 or 5 columns, got {len(parts)}")
            score = 1.0
            if len(parts) == 5:
                try:
                    score = float(parts[4])
                except ValueError:
                    raise LexiconError(f"row {row_no}: bad score {parts[4]!r}") from None
            entries.append(LexiconEntry(
                cui=parts[0].strip(),
                term=parts[1].strip().lower(),
                preferred_name=parts[2].strip(),
                semantic_type=parts[3].strip(),
                score=score,
            ))
    return Lexicon(entries, max_ngram=max_ngram)


def match_concepts(tokens: Sequence[Token], lexicon: Lexicon) -> list[CandidateSpan]:
    """Greedy left-to-right longest match of token n-grams against the lexicon.

    Matched ranges never overlap; every lexicon entry whose term equals the
    matched token sequence is returned as a candidate for that span.
    """
    spans: list[CandidateSpan] = []
    i = 0
    n = len(tokens)
    while i < n:
        matched = False
        for length in range(min(lexicon.max_ngram, n - i), 0, -1):
            key = tuple(t.text for t in tokens[i:i + length])
            cands = lexicon.candidates(key)
            if cands:
                spans.append(CandidateSpan(
                    token_start=i,
                    token_end=i + length,
                    start=tokens[i].start,
                    end=tokens[i + length - 1].end,
                    candidates=tuple(cands),
                ))
                i += length
                matched = True
                break
        if not matched:
            i += 1
    return spans


def link(candidates: Sequence[LexiconEntry]) -> LexiconEntry:
    """Pick the candidate with the highest score; ties go to the smallest cui."""
    if not candidates:
        raise EmptyCandidates("no candidates to link")
    return min(candidates, key=lambda e: (-e.score, e.cui))


class TriggerSet:
    """Negation triggers indexed by their token sequences."""

    def __init__(self, triggers: Sequence[NegationTrigger]):
        self.triggers = list(triggers)
        self._by_tokens: dict[tuple[str, ...], str] = {}
        self._max_len = 0
        for t in self.triggers:
            if not t.phrase.strip():
                raise TriggerFileError(f"empty trigger phrase (category {t.category})")
            if t.category not in TRIGGER_CATEGORIES:
                raise TriggerFileError(f"unknown trigger category {t.category!r}")
            key = tuple(tok.text for tok in tokenize(t.phrase))
            self._by_tokens[key] = t.category
            self._max_len = max(self._max_len, len(key))

    def scan(self, tokens: Sequence[Token]) -> list[tuple[int, int, str]]:
        """Greedy longest-first trigger occurrences as (tok_start, tok_end, category).

        Consuming matched tokens is what suppresses a PRE_NEG trigger embedded
        in a longer PSEUDO_NEG phrase ("no" inside "no increase").
        """
        out = []
        i = 0
        n = len(tokens)
        while i < n:
            hit = None
            for length in range(min(self._max_len, n - i), 0, -1):
                key = tuple(t.text for t in tokens[i:i + length])
                cat = self._by_tokens.get(key)
                if cat is not None:
                    hit = (i, i + length, cat)
                    break
            if hit is not None:
                out.append(hit)
                i = hit[1]
            else:
                i += 1
        return out


def load_triggers(path: str | Path) -> TriggerSet:
    """Load a triggers TSV: phrase, category (PRE_NEG|POST_NEG|PSEUDO_NEG|SCOPE_BREAK)."""
    triggers = []
    with Path(path).open(encoding="utf-8") as fh:
        for row_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise TriggerFileError(f"row {row_no}: expected 2 columns, got {len(parts)}")
            triggers.append(NegationTrigger(phrase=parts[0].strip().lower(), category=parts[1].strip()))
    return TriggerSet(triggers)


def default_triggers() -> TriggerSet:
    ref = resources.files("concept_distill").joinpath("data/negation_triggers.tsv")
    with resources.as_file(ref) as path:
        return load_triggers(path)


def detect_negation(
    tokens: Sequence[Token],
    mention_token_start: int,
    mention_token_end: int,
    triggers: TriggerSet,
    window: int = DEFAULT_NEGATION_WINDOW,
) -> bool:
    """NegEx-style check for one mention within its sentence's tokens.

    True iff a PRE_NEG trigger ends within `window` tokens before the mention
    (or a POST_NEG starts within `window` after it) with no SCOPE_BREAK token
    in between. Pseudo-negation phrases consume their tokens during the scan,
    so triggers embedded in them never fire.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    occurrences = triggers.scan(tokens)
    breaks = [(s, e) for s, e, cat in occurrences if cat == "SCOPE_BREAK"]

    def broken(lo: int, hi: int) -> bool:
        return any(s < hi and e > lo for s, e in breaks)

    for start, end, cat in occurrences:
        if cat == "PRE_NEG":
            gap = mention_token_start - end
            if 0 <= gap < window and not broken(end, mention_token_start):
                return True
        elif cat == "POST_NEG":
            gap = start - mention_token_end
            if 0 <= gap < window and not broken(mention_token_end, start):
                return True
    return False


def _sentences(text: str) -> list[tuple[int, str]]:
    """Sentence substrings with their start offsets; split on . ! ? and newline."""
    return [(m.start(), m.group(0)) for m in SENTENCE_RE.finditer(text)]


def extract(
    text: str,
    lexicon: Lexicon,
    triggers: TriggerSet,
    window: int = DEFAULT_NEGATION_WINDOW,
) -> list[ConceptMention]:
    """Full extraction pass: sentence split, match, link, negation check.

    Mentions come back in document order with non-overlapping spans.
    """
    mentions: list[ConceptMention] = []
    for offset, sentence in _sentences(text):
        tokens = tokenize(sentence)
        if not tokens:
            continue
        for span in match_concepts(tokens, lexicon):
            entry = link(span.candidates)
            negated = detect_negation(tokens, span.token_start, span.token_end, triggers, window)
            mentions.append(ConceptMention(
                cui=entry.cui,
                preferred_name=entry.preferred_name,
                semantic_type=entry.semantic_type,
                matched_text=sentence[span.start:span.end],
                start=offset + span.start,
                end=offset + span.end,
                negated=negated,
                score=entry.score,
            ))
    return mentions
