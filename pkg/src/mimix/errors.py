"""Exception types shared across the toolkit."""


class MimixError(Exception):
    """Base class for all toolkit errors."""


# --- caption grammar ---

class CaptionError(MimixError):
    pass


class MalformedTag(CaptionError):
    """A recognized tag key with an empty or invalid value, or a misplaced style tag."""


class UnterminatedTag(CaptionError):
    """A recognized tag opened with '[' but never closed before end of string."""


# --- registry ---

class RegistryError(MimixError):
    pass


class RegistryParseError(RegistryError):
    pass


class DuplicateName(RegistryError):
    pass


class DanglingCharacterRef(RegistryError):
    pass


class UnknownCharacter(RegistryError):
    pass


# --- ingest ---

class IngestError(MimixError):
    pass


class CropTooLarge(IngestError):
    pass


class DecodeError(IngestError):
    pass


# --- annotation ---

class AnnotationError(MimixError):
    pass


class MissingTemplate(AnnotationError):
    pass


class UnparseableCaption(AnnotationError):
    """VLM output still unparseable after the corrective retry."""


# --- clients ---

class ClientError(MimixError):
    """Transport or protocol failure talking to a model client."""


# --- compositing ---

class CompositeError(MimixError):
    pass


class EmptyMatte(CompositeError):
    pass


class DomainMismatch(CompositeError):
    pass


class TooShort(CompositeError):
    pass


class NoValidPlacement(CompositeError):
    pass


class MissingReferenceImages(CompositeError):
    pass


# --- assembly ---

class AssemblyError(MimixError):
    pass


class InsufficientSynthetic(AssemblyError):
    def __init__(self, needed: int, available: int):
        super().__init__(f"need {needed} synthetic clips, only {available} available")
        self.needed = needed
        self.available = available


# --- evaluation ---

class EvaluationError(MimixError):
    pass


class MissingEvalFlag(EvaluationError):
    pass


class NoScoreFound(EvaluationError):
    pass


class ScoreOutOfRange(EvaluationError):
    pass


class EmptyInput(EvaluationError):
    pass


# --- cli ---

class ConfigError(MimixError):
    pass


class MissingUpstream(MimixError):
    pass
