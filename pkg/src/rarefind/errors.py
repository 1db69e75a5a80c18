"""Domain errors raised by the rarefind engine.

Every error the CLI maps to exit code 1 derives from RarefindError; the
class name is the stable, documented error name surfaced to users.
"""


class RarefindError(Exception):
    """Base class for all domain errors."""


# --- ingest ---------------------------------------------------------------

class MalformedRow(RarefindError):
    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}")


class MissingRequiredColumn(RarefindError):
    pass


class EmptyNarrative(RarefindError):
    pass


# --- lexicon --------------------------------------------------------------

class EmptySample(RarefindError):
    pass


# --- embed ----------------------------------------------------------------

class EmptyVocabulary(RarefindError):
    pass


class MissingId(RarefindError):
    pass


class DuplicateId(RarefindError):
    pass


class DimensionMismatch(RarefindError):
    pass


# --- cluster --------------------------------------------------------------

class TooFewPoints(RarefindError):
    pass


class NonUnitInput(RarefindError):
    pass


# --- triage ---------------------------------------------------------------

class EmptyReference(RarefindError):
    pass


class InsufficientCandidates(RarefindError):
    pass


class TooFewReviewers(RarefindError):
    pass


class NoCandidates(RarefindError):
    pass


class UnfinishedRound(RarefindError):
    pass


# --- explain ----------------------------------------------------------------

class EmptyClass(RarefindError):
    pass


class SingleClass(RarefindError):
    pass


class TooManyFeaturesForExact(RarefindError):
    pass


class EmptyBackground(RarefindError):
    pass


# --- agreement --------------------------------------------------------------

class Degenerate(RarefindError):
    """Chance agreement is 1 while observed agreement is not; kappa undefined."""


class IncompleteRound(RarefindError):
    def __init__(self, unlabeled):
        self.unlabeled = list(unlabeled)
        super().__init__(f"{len(self.unlabeled)} items not fully labeled: "
                         f"{', '.join(self.unlabeled[:5])}"
                         f"{'...' if len(self.unlabeled) > 5 else ''}")


# --- store ------------------------------------------------------------------

class CorruptManifest(RarefindError):
    pass


class LockedByAnotherProcess(RarefindError):
    pass


class UnknownComplaint(RarefindError):
    pass


class ClosedRound(RarefindError):
    pass


class NoCompletedRound(RarefindError):
    pass
