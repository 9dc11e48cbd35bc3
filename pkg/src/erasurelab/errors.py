"""Exception hierarchy for erasurelab."""


class ErasureLabError(Exception):
    """Base class for all errors raised by this package."""


# quantum core
class DuplicateLabel(ErasureLabError):
    pass


class UnknownLabel(ErasureLabError):
    pass


class ArityMismatch(ErasureLabError):
    pass


class UnknownGate(ErasureLabError):
    pass


class NonHermitian(ErasureLabError):
    pass


class NonUnitTrace(ErasureLabError):
    pass


class NegativeEigenvalue(ErasureLabError):
    pass


class OverlappingParts(ErasureLabError):
    pass


class DimensionMismatch(ErasureLabError):
    pass


class SizeCap(ErasureLabError):
    pass


class NotAProduct(ErasureLabError):
    """Raised when a register expected to factor out is still entangled."""


# channel
class InvalidConfig(ErasureLabError):
    pass


class NotOwnedByAlice(ErasureLabError):
    pass


class NotOwnedByBob(ErasureLabError):
    pass


class BudgetExhausted(ErasureLabError):
    pass


class PEqualsOne(ErasureLabError):
    pass


# protocols / ledger
class RetransmitCapExceeded(ErasureLabError):
    pass


class NoEbitAvailable(ErasureLabError):
    pass


class IncompleteTrace(ErasureLabError):
    pass


class InfeasibleSupply(ErasureLabError):
    pass


class VerificationFailed(ErasureLabError):
    """A protocol run ended in a state other than the one it promises."""


# infotheory / bounds
class MissingE(ErasureLabError):
    pass


class OutOfValidityWindow(ErasureLabError):
    pass


class SnapshotsMissing(ErasureLabError):
    pass


class GridOutOfRange(ErasureLabError):
    pass


class InfoOutOfRange(ErasureLabError):
    pass


class TooFewTraces(ErasureLabError):
    pass
