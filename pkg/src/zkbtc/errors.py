"""Exception hierarchy shared across the package."""


class ZkBtcError(Exception):
    pass


# -- codec -----------------------------------------------------------------

class DecodeError(ZkBtcError, ValueError):
    pass


class WrongLength(DecodeError):
    pass


class Truncated(DecodeError):
    pass


class TrailingBytes(DecodeError):
    pass


class BadSegwitMarker(DecodeError):
    pass


class VarIntNonCanonical(DecodeError):
    pass


class MalformedTransaction(DecodeError):
    pass


class EmptyLeaves(ZkBtcError, ValueError):
    pass


class IndexOutOfRange(ZkBtcError, IndexError):
    pass


class NegativeTarget(ZkBtcError, ValueError):
    pass


class TargetOverflow(ZkBtcError, ValueError):
    pass


class ZeroTarget(ZkBtcError, ValueError):
    pass


# -- crypto ----------------------------------------------------------------

class InfinityPoint(ZkBtcError, ValueError):
    pass


class PubkeyMismatch(ZkBtcError, ValueError):
    pass


class InvalidPoint(ZkBtcError, ValueError):
    pass


# -- chain validation ------------------------------------------------------

class ChainValidationError(ZkBtcError):
    """A header failed consensus checks.

    ``height`` is the height the offending header would have occupied.
    """

    def __init__(self, message: str, height: int | None = None):
        super().__init__(message)
        self.height = height


class BadLinkage(ChainValidationError):
    pass


class PowNotSatisfied(ChainValidationError):
    pass


class WrongDifficulty(ChainValidationError):
    pass


# -- testchain -------------------------------------------------------------

class PlanInvalid(ZkBtcError, ValueError):
    pass


class TargetTooHard(ZkBtcError, ValueError):
    pass


# -- stark -----------------------------------------------------------------

class ThresholdNotMet(ZkBtcError, ValueError):
    pass


class NonPowerOfTwo(ZkBtcError, ValueError):
    pass


class LengthMismatch(ZkBtcError, ValueError):
    pass


# -- proof of reserve ------------------------------------------------------

class NotP2pkh(ZkBtcError, ValueError):
    pass


class RelationUnsatisfied(ZkBtcError):
    def __init__(self, failure):
        super().__init__(f"relation not satisfied: {failure.value}")
        self.failure = failure


class UnknownBackend(ZkBtcError, ValueError):
    pass


class MissingDvKey(ZkBtcError, ValueError):
    pass


# -- light client ----------------------------------------------------------

class InvalidEpoch(ZkBtcError):
    def __init__(self, message: str, height: int | None = None, check: str = ""):
        super().__init__(message)
        self.height = height
        self.check = check


class LinkageBroken(ZkBtcError):
    pass


class ProofInvalid(ZkBtcError):
    pass


class SyncError(ZkBtcError):
    """Wraps the failure of one epoch during :func:`sync`."""

    def __init__(self, index: int, cause: Exception, state):
        super().__init__(f"epoch {index} rejected: {cause}")
        self.index = index
        self.cause = cause
        self.state = state
