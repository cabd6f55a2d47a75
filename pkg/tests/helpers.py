"""Shared fixture builders for the test suite."""
from __future__ import annotations

import json
import random
from pathlib import Path

LEXICON_ROWS = [
    # cui, term, preferred_name, semantic_type, score
    ("C0008031", "chest pain", "chest pain", "DISEASE", 0.90),
    ("C0011849", "diabetes", "diabetes mellitus", "DISEASE", 0.90),
    ("C0032285", "pneumonia", "pneumonia", "DISEASE", 0.92),
    ("C0015967", "fever", "fever", "DISEASE", 0.80),
    ("C0018801", "heart failure", "heart failure", "DISEASE", 0.85),
    ("C0018802", "congestive heart failure", "congestive heart failure", "DISEASE", 0.95),
    ("C0004057", "aspirin", "aspirin", "CHEMICAL", 0.90),
    ("C0020538", "hypertension", "hypertension", "DISEASE", 0.88),
    ("C0013404", "dyspnea", "dyspnea", "DISEASE", 0.85),
    ("C0036983", "septic shock", "septic shock", "DISEASE", 0.95),
    ("C0027051", "myocardial infarction", "myocardial infarction", "DISEASE", 0.93),
    ("C0024117", "copd", "chronic obstructive pulmonary disease", "DISEASE", 0.87),
]


def write_lexicon(path: Path, rows=None) -> Path:
    rows = LEXICON_ROWS if rows is None else rows
    lines = ["\t".join(str(c) for c in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_corpus_file(path: Path, records) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return path


def write_config(path: Path, **overrides) -> Path:
    cfg = {
        "corpus": "corpus.jsonl",
        "lexicon": "lexicon.tsv",
        "workdir": "work",
        "variants": ["full", "boc", "uc"],
        "providers": [
            {"kind": "builtin_hashed", "model_name": "hashed", "dim": 64, "seed": 0, "chunk_count": 20},
        ],
        "train": {"n_trees": 16, "max_depth": 3},
        "cv": {"k": 2, "runs": 2, "seed": 11},
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg, indent=2) + "\n", encoding="utf-8")
    return path


NOISE_CONCEPTS = [
    "hypertension", "diabetes", "chest pain", "dyspnea", "fever",
    "heart failure", "myocardial infarction", "copd",
]

FILLER_WORDS = (
    "the patient was admitted stable monitored overnight improved tolerating "
    "oral intake ambulating reviewed counseled follow up arranged vitals within "
    "normal limits labs pending imaging unremarkable plan continue current care"
).split()


def make_planted_note(rng: random.Random, died: bool, negated_decoy: bool) -> str:
    """Discharge note whose mortality signal is the presence of an affirmed
    'septic shock' mention in an allowlisted section.

    Survivors may carry a negated decoy ('denies septic shock') and all
    survivors carry the raw phrase inside a non-allowlisted section, so the
    signal survives only if sectionizing, negation, and section selection all
    work.
    """
    noise = rng.sample(NOISE_CONCEPTS, k=rng.randint(2, 4))
    hpi_lines = []
    if died:
        hpi_lines.append("Patient developed septic shock during the stay.")
    elif negated_decoy:
        hpi_lines.append("Denies septic shock at presentation.")
    for concept in noise:
        reps = rng.randint(3, 25)
        hpi_lines.extend(f"Ongoing {concept} noted." for _ in range(reps))
    rng.shuffle(hpi_lines)

    filler = " ".join(rng.choices(FILLER_WORDS, k=rng.randint(150, 400)))
    meds = "Aspirin 81mg daily." if died else "Aspirin 81mg daily. Monitor for septic shock."
    return "\n".join([
        f"Admission Date: [**{rng.randint(2100, 2199)}-{rng.randint(1, 12)}-{rng.randint(1, 28)}**]",
        f"Name: [**Patient {rng.randint(1, 99999)}**]",
        f"Chief Complaint: {noise[0]}",
        "History of Present Illness:",
        *hpi_lines,
        f"Past Medical History: {noise[-1]}",
        "Family History: noncontributory",
        "Physical Exam: tolerating aspirin without issue",
        f"Hospital Course: {filler}",
        f"Discharge Medications: {meds}",
    ])


def make_planted_corpus(path: Path, n_patients: int = 400, seed: int = 7,
                        died_rate: float = 0.3) -> list[int]:
    """Write a planted-signal corpus; returns the label list in file order."""
    rng = random.Random(seed)
    labels = []
    with path.open("w", encoding="utf-8") as fh:
        for i in range(n_patients):
            died = rng.random() < died_rate
            negated_decoy = (not died) and rng.random() < 0.35
            note = make_planted_note(rng, died, negated_decoy)
            labels.append(1 if died else 0)
            fh.write(json.dumps({
                "patient_id": f"p{i:04d}",
                "text": note,
                "label": 1 if died else 0,
            }, ensure_ascii=False) + "\n")
    return labels
