"""Exception hierarchy shared by every module of the package."""


class CausalChainError(Exception):
    """Base class; the CLI records ``type(err).__name__`` in its error column."""


class DimensionMismatch(CausalChainError, ValueError):
    pass


class RankDeficient(CausalChainError):
    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = list(columns)


class Separation(CausalChainError):
    pass


class NonConvergence(CausalChainError):
    pass


class InvalidConfig(CausalChainError, ValueError):
    pass


class EmptySubpopulation(CausalChainError):
    pass


class UnsupportedWorld(CausalChainError):
    pass


class IoFailure(CausalChainError, OSError):
    pass


class MissingColumn(CausalChainError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class IllegalWorld(CausalChainError):
    pass


class PositivityViolation(CausalChainError):
    pass


class EmptyArmInStratum(CausalChainError):
    def __init__(self, message, stratum=None):
        super().__init__(message)
        self.stratum = stratum


class NoTreatedUnits(CausalChainError):
    pass


class UnmatchedUnits(CausalChainError):
    pass


class InsufficientMatches(CausalChainError):
    pass


class WeakOrNullFirstStage(CausalChainError):
    pass


class TooManyFailedReplicates(CausalChainError):
    pass


class EmptyInput(CausalChainError):
    pass


class PositivityWarning(UserWarning):
    pass


class ExtremeWeightsWarning(UserWarning):
    pass


class UnmatchedUnitsWarning(UserWarning):
    pass


class WeakInstrumentWarning(UserWarning):
    pass
