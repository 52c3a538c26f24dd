class RbmError(Exception):
    """
    Root of all errors raised by the engine
    """
    pass


class ConfigError(RbmError):
    """
    Exception to indicate something is wrong with a run configuration
    """
    pass


class NumericsError(RbmError):
    pass


class SingularMatrix(NumericsError):
    pass


class NotSymmetric(NumericsError):
    pass


class LcpError(RbmError):
    """
    Exception to indicate the complementarity solver could not finish
    """
    pass


class RayTermination(LcpError):
    pass


class PivotLimitExceeded(LcpError):
    pass


class DimensionMismatch(LcpError):
    pass


class SkorokhodError(RbmError):
    pass


class OutsideDomain(SkorokhodError):
    pass


class AdmissibilityViolated(SkorokhodError):
    """
    The reflection data does not satisfy the admissibility gate; surfaced
    from a failing LCP solve inside the localization
    """
    pass


class ModelError(RbmError):
    pass


class NonpositiveDiagonal(ModelError):
    pass


class CoefficientBoundViolated(ModelError):
    pass


class ScheduleError(RbmError):
    pass


class ScheduleExhausted(ScheduleError):
    pass


class MeasureError(RbmError):
    pass


class UnregisteredFunctionInStreamingMode(MeasureError):
    pass


class EmptyMeasure(MeasureError):
    pass


class ConfigMismatch(MeasureError):
    pass


class CheckpointCorrupt(RbmError):
    pass


class ParameterOutOfRange(RbmError):
    pass


class CltError(RbmError):
    pass


class MissingDerivative(CltError):
    pass


class SinksNotRegistered(CltError):
    pass
