import random

import pytest

from concept_distill.concepts import (
    Lexicon,
    LexiconEntry,
    NegationTrigger,
    Token,
    TriggerSet,
    default_triggers,
    detect_negation,
    extract,
    link,
    load_lexicon,
    match_concepts,
    tokenize,
)
from concept_distill.errors import EmptyCandidates, LexiconError, TriggerFileError

from helpers import LEXICON_ROWS, write_lexicon


@pytest.fixture(scope="module")
def lexicon(tmp_path_factory):
    path = write_lexicon(tmp_path_factory.mktemp("lex") / "lexicon.tsv")
    return load_lexicon(path)


@pytest.fixture(scope="module")
def triggers():
    return default_triggers()


# --- tokenize ---

def test_tokenize_words_with_offsets():
    assert tokenize("Chest pain.") == [Token("chest", 0, 5), Token("pain", 6, 10)]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_hyphen_and_digits():
    assert tokenize("type-2 diabetes") == [
        Token("type", 0, 4), Token("2", 5, 6), Token("diabetes", 7, 15),
    ]


def test_tokenize_underscore_is_a_boundary():
    assert [t.text for t in tokenize("a_b")] == ["a", "b"]


# --- matching ---

def _oracle_longest_match(token_texts, terms, max_ngram=6):
    """Independent greedy longest-match scan over plain lists."""
    out = []
    i = 0
    while i < len(token_texts):
        hit = None
        for n in range(min(max_ngram, len(token_texts) - i), 0, -1):
            if tuple(token_texts[i:i + n]) in terms:
                hit = (i, i + n)
                break
        if hit:
            out.append(hit)
            i = hit[1]
        else:
            i += 1
    return out


def test_longest_match_beats_submatch(lexicon):
    tokens = tokenize("chest pain")
    spans = match_concepts(tokens, lexicon)
    assert len(spans) == 1
    assert (spans[0].token_start, spans[0].token_end) == (0, 2)
    terms = {tuple(t.split()) for _, t, *_ in LEXICON_ROWS}
    assert _oracle_longest_match(["chest", "pain"], terms) == [(0, 2)]


def test_no_lexicon_hits(lexicon):
    assert match_concepts(tokenize("fatigue"), lexicon) == []


def test_three_token_match_wins(lexicon):
    spans = match_concepts(tokenize("congestive heart failure"), lexicon)
    assert len(spans) == 1
    assert (spans[0].token_start, spans[0].token_end) == (0, 3)
    assert spans[0].candidates[0].cui == "C0018802"


def test_match_agrees_with_oracle_on_random_streams(lexicon):
    rng = random.Random(77)
    vocab = ["chest", "pain", "heart", "failure", "congestive", "fever",
             "aspirin", "word", "type", "2", "diabetes"]
    terms = {tuple(t.split()) for _, t, *_ in LEXICON_ROWS}
    for _ in range(200):
        words = rng.choices(vocab, k=rng.randint(0, 25))
        tokens = tokenize(" ".join(words))
        got = [(s.token_start, s.token_end) for s in match_concepts(tokens, lexicon)]
        assert got == _oracle_longest_match(words, terms)


def test_candidates_share_span(tmp_path):
    path = write_lexicon(tmp_path / "lex.tsv", [
        ("C0000001", "cold", "common cold", "DISEASE", 0.7),
        ("C0000002", "cold", "cold sensation", "DISEASE", 0.9),
    ])
    lex = load_lexicon(path)
    spans = match_concepts(tokenize("cold"), lex)
    assert len(spans) == 1
    assert {c.cui for c in spans[0].candidates} == {"C0000001", "C0000002"}


# --- linking ---

def test_link_highest_score():
    a = LexiconEntry("C0000001", "x", "X", "DISEASE", 0.7)
    b = LexiconEntry("C0000002", "x", "X2", "DISEASE", 0.9)
    assert link([a, b]) is b


def test_link_single_candidate():
    a = LexiconEntry("C0000009", "x", "X", "DISEASE", 0.5)
    assert link([a]) is a


def test_link_tie_breaks_to_smallest_cui():
    a = LexiconEntry("C0000003", "x", "X3", "DISEASE", 0.8)
    b = LexiconEntry("C0000001", "x", "X1", "DISEASE", 0.8)
    # oracle: sort by (-score, cui) and take the head
    expected = sorted([a, b], key=lambda e: (-e.score, e.cui))[0]
    assert link([a, b]) is expected is b


def test_link_empty_candidates():
    with pytest.raises(EmptyCandidates):
        link([])


# --- lexicon validation ---

def test_lexicon_rejects_bad_cui():
    with pytest.raises(LexiconError):
        Lexicon([LexiconEntry("X123", "t", "T", "DISEASE", 0.5)])


def test_lexicon_rejects_conflicting_preferred_names():
    with pytest.raises(LexiconError):
        Lexicon([
            LexiconEntry("C0000001", "a", "Name A", "DISEASE", 0.5),
            LexiconEntry("C0000001", "b", "Name B", "DISEASE", 0.5),
        ])


def test_lexicon_score_defaults_to_one(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("C0000001\tterm\tTerm\tDISEASE\n", encoding="utf-8")
    lex = load_lexicon(path)
    assert lex.entries[0].score == 1.0


def test_lexicon_rejects_out_of_range_score():
    with pytest.raises(LexiconError):
        Lexicon([LexiconEntry("C0000001", "t", "T", "DISEASE", 1.5)])


# --- negation ---

def test_pre_trigger_negates(triggers):
    tokens = tokenize("denies chest pain")
    assert detect_negation(tokens, 1, 3, triggers) is True


def test_no_trigger_not_negated(triggers):
    tokens = tokenize("chest pain")
    assert detect_negation(tokens, 0, 2, triggers) is False


def test_pseudo_trigger_suppresses(triggers):
    tokens = tokenize("no increase in chest pain")
    assert detect_negation(tokens, 3, 5, triggers) is False


def test_scope_break_flips_negation(triggers):
    with_break = tokenize("no fever but chest pain")
    without = tokenize("no fever and chest pain")
    assert detect_negation(without, 3, 5, triggers) is True
    assert detect_negation(with_break, 3, 5, triggers) is False


def test_out_of_window_not_negated(triggers):
    # five intervening tokens puts the mention outside the default window
    tokens = tokenize("no a b c d e fever")
    assert detect_negation(tokens, 6, 7, triggers) is False
    assert detect_negation(tokens, 6, 7, triggers, window=6) is True


def test_post_trigger(triggers):
    tokens = tokenize("pneumonia was ruled out")
    assert detect_negation(tokens, 0, 1, triggers) is True


def test_window_must_be_positive(triggers):
    with pytest.raises(ValueError):
        detect_negation(tokenize("no fever"), 1, 2, triggers, window=0)


def test_trigger_category_validated():
    with pytest.raises(TriggerFileError):
        TriggerSet([NegationTrigger("nope", "NOT_A_CATEGORY")])


# --- extraction ---

def test_extract_orders_and_negates(lexicon, triggers):
    mentions = extract("Denies fever. Has diabetes.", lexicon, triggers)
    assert [(m.cui, m.negated) for m in mentions] == [
        ("C0015967", True), ("C0011849", False),
    ]
    assert mentions[0].matched_text == "fever"


def test_extract_empty_text(lexicon, triggers):
    assert extract("", lexicon, triggers) == []


def test_extract_chemical_semantic_type(lexicon, triggers):
    mentions = extract("took aspirin today", lexicon, triggers)
    assert len(mentions) == 1
    assert mentions[0].semantic_type == "CHEMICAL"


def test_extract_negation_is_sentence_scoped(lexicon, triggers):
    # the trigger sits in the previous sentence, so the mention is affirmed
    mentions = extract("Denies anything new. Fever overnight.", lexicon, triggers)
    assert [(m.cui, m.negated) for m in mentions] == [("C0015967", False)]


def test_extract_spans_index_into_source(lexicon, triggers):
    text = "History includes chest pain\nand diabetes."
    mentions = extract(text, lexicon, triggers)
    for m in mentions:
        assert text[m.start:m.end].lower() == m.matched_text.lower()


def test_mentions_ordered_and_non_overlapping(lexicon, triggers):
    rng = random.Random(5)
    vocab = ["chest", "pain", "no", "fever", "aspirin", "but", "heart",
             "failure", "congestive", "word", "denies", "diabetes", "."]
    for _ in range(100):
        text = " ".join(rng.choices(vocab, k=rng.randint(0, 40)))
        mentions = extract(text, lexicon, triggers)
        for a, b in zip(mentions, mentions[1:]):
            assert a.start <= b.start
            assert a.end <= b.start
        assert mentions == extract(text, lexicon, triggers)  # determinism


def test_longest_match_dominance(lexicon, triggers):
    # no mention's span may be a strict sub-range of a longer lexicon term
    # that also matches at the same start
    mentions = extract("congestive heart failure and heart failure", lexicon, triggers)
    assert [m.cui for m in mentions] == ["C0018802", "C0018801"]
