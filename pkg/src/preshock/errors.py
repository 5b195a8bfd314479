"""Exception hierarchy with stable machine-readable codes.

Every error that can surface through the CLI carries a ``code`` string that
is stable across releases; the CLI prints it on stderr and exits nonzero.
"""


class PreshockError(Exception):
    code = "Error"

    def __init__(self, message=""):
        super().__init__(message or self.code)


class NonFiniteField(PreshockError):
    code = "NonFiniteField"


class VacuumState(PreshockError):
    code = "VacuumState"


class NoBlowup(PreshockError):
    code = "NoBlowup"


class PastBlowup(PreshockError):
    code = "PastBlowup"


class InversionFailed(PreshockError):
    code = "InversionFailed"


class ProfileConstructionFailed(PreshockError):
    code = "ProfileConstructionFailed"


class NoBasisNeeded(PreshockError):
    code = "NoBasisNeeded"


class NotInAdmissibleSet(PreshockError):
    code = "NotInAdmissibleSet"


class NearBlowup(PreshockError):
    code = "NearBlowup"


class MonitorBreach(PreshockError):
    code = "MonitorBreach"


class NewtonEscapedBall(PreshockError):
    code = "NewtonEscapedBall"


class NewtonStalled(PreshockError):
    code = "NewtonStalled"


class FlatnessUndetermined(PreshockError):
    code = "FlatnessUndetermined"


class LeftParameterBox(PreshockError):
    code = "LeftParameterBox"


class ManifoldNewtonStalled(PreshockError):
    code = "ManifoldNewtonStalled"


class OutsideConvergenceBall(PreshockError):
    code = "OutsideConvergenceBall"


class FitDegenerate(PreshockError):
    code = "FitDegenerate"


class InconsistentTimes(PreshockError):
    code = "InconsistentTimes"


class BadArtifact(PreshockError):
    code = "BadArtifact"
