"""Clinical note distillation and embedding benchmark pipeline."""

__version__ = "0.1.0"

from .corpus import Corpus, CorpusStats, PatientRecord, corpus_stats, load_corpus, write_corpus
from .sectionizer import (
    DEFAULT_ALLOWLIST,
    Section,
    SectionRule,
    default_section_rules,
    load_section_rules,
    sectionize,
    select_sections,
)
from .concepts import (
    ConceptMention,
    LexiconEntry,
    NegationTrigger,
    default_triggers,
    detect_negation,
    extract,
    link,
    load_lexicon,
    load_triggers,
    match_concepts,
    tokenize,
)
from .distill import (
    DistilledDoc,
    TfidfTable,
    Variant,
    build_boc,
    build_full,
    build_uc,
    compute_tfidf,
)
from .embedding import (
    ProviderConfig,
    chunk_text,
    embed_builtin,
    embed_corpus,
    embed_document,
    embed_remote,
    make_provider,
)
from .balancing import SampledIndices, near_miss_1
from .gbdt import GbdtModel, TrainConfig, predict, predict_proba, train
from .evaluation import (
    ConfusionCounts,
    EvalReport,
    MetricSet,
    confusion,
    fold_fingerprint,
    make_folds,
    metrics,
    render_report,
    run_experiment,
)
