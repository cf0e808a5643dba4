"""Exception hierarchy shared across the toolkit.

Every error carries a stable ``category`` token so the CLI can emit
machine-readable failures (``error category=<token>: message``).
"""


class ConceptCxrError(Exception):
    """Base class for all toolkit errors."""

    category = "Error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ParseFailure(ConceptCxrError):
    """A file does not conform to its documented format."""

    category = "ParseFailure"


class DuplicateConcept(ConceptCxrError):
    category = "DuplicateConcept"


class UnknownCluster(ConceptCxrError):
    category = "UnknownCluster"


class EmptyPhraseList(ConceptCxrError):
    category = "EmptyPhraseList"


class OutOfRange(ConceptCxrError):
    category = "OutOfRange"


class LexiconMismatch(ConceptCxrError):
    """A vector, score file, or model was produced against a different lexicon."""

    category = "LexiconMismatch"


class MalformedRow(ConceptCxrError):
    category = "MalformedRow"


class ScoreOutOfRange(ConceptCxrError):
    category = "ScoreOutOfRange"


class DegenerateImage(ConceptCxrError):
    """Image that cannot survive preprocessing (e.g. entirely black)."""

    category = "DegenerateImage"


class EmptyClass(ConceptCxrError):
    category = "EmptyClass"


class DimensionMismatch(ConceptCxrError):
    """Feature dimensionality or aligned-list lengths do not agree."""

    category = "DimensionMismatch"


class EmptyTruth(ConceptCxrError):
    """A metric over ground-truth sets is undefined because all sets are empty."""

    category = "EmptyTruth"


class FileMissing(ConceptCxrError):
    category = "FileMissing"


class InvalidConfig(ConceptCxrError):
    category = "InvalidConfig"
