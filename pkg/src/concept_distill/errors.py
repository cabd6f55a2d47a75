"""Exception types shared across the pipeline modules."""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


# --- corpus ---

class MalformedRecord(PipelineError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class DuplicateId(PipelineError):
    def __init__(self, patient_id: str):
        self.patient_id = patient_id
        super().__init__(f"duplicate patient_id {patient_id!r}")


class InvalidLabel(PipelineError):
    def __init__(self, patient_id: str, value=None):
        self.patient_id = patient_id
        self.value = value
        super().__init__(f"patient {patient_id!r}: label must be 0 or 1, got {value!r}")


# --- sectionizer ---

class RuleFileError(PipelineError):
    """Malformed section rules file (bad column count, ambiguous literals)."""


class UnknownCanonicalId(RuleFileError):
    def __init__(self, row: int, canonical_id: str):
        self.row = row
        self.canonical_id = canonical_id
        super().__init__(f"row {row}: canonical id {canonical_id!r} not in registry")


class EmptyHeader(RuleFileError):
    def __init__(self, row: int):
        self.row = row
        super().__init__(f"row {row}: empty header literal")


# --- concept extraction ---

class LexiconError(PipelineError):
    """Malformed lexicon file or invariant violation within it."""


class TriggerFileError(PipelineError):
    """Malformed negation triggers file."""


class EmptyCandidates(PipelineError):
    """link() called with no candidates for a span."""


# --- distiller ---

class EmptyCorpus(PipelineError):
    """TF-IDF requested over zero patient documents."""


# --- embedding ---

class TransportError(PipelineError):
    """Remote embedding endpoint unreachable."""


class ProtocolError(PipelineError):
    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body
        super().__init__(f"embedding server protocol error (status {status}): {body[:200]}")


class DimMismatch(PipelineError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"expected embedding dim {expected}, got {got}")


# --- balancing / gbdt ---

class SingleClass(PipelineError):
    """Both classes are required but only one is present."""


class KTooLarge(PipelineError):
    def __init__(self, k: int, minority_count: int):
        self.k = k
        self.minority_count = minority_count
        super().__init__(f"k={k} exceeds minority class size {minority_count}")


class DimensionMismatch(PipelineError):
    """Feature matrix shape or content incompatible with the model."""


# --- evaluation ---

class LengthMismatch(PipelineError):
    """y_true and y_pred differ in length."""


class NonBinaryLabel(PipelineError):
    """A label outside {0, 1} reached a binary metric."""


class TooFewSamples(PipelineError):
    """Fewer samples than folds."""


class ExperimentError(PipelineError):
    """Evaluation-cell failure; carries (run, fold) context in the message."""


# --- cli ---

class ConfigError(PipelineError):
    """Invalid or incomplete pipeline configuration."""


class MissingArtifact(PipelineError):
    """A required stage output is absent from the workdir."""
