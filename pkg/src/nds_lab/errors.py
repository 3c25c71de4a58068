"""Exception hierarchy shared by every module.

Precondition failures map to CLI exit code 2, numeric failures to 3.
"""


class NdsError(Exception):
    exit_code = 3

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


class PreconditionError(NdsError, ValueError):
    exit_code = 2


class ConfigError(PreconditionError):
    pass


class RadiusTooLarge(PreconditionError):
    pass


class PrecondViolated(PreconditionError):
    pass


class KappaTooLarge(PreconditionError):
    pass


class NonPositiveDensity(PreconditionError):
    pass


class NumericFailure(NdsError, ArithmeticError):
    exit_code = 3


class NonConvergence(NumericFailure):
    pass


class CellBlowup(NumericFailure):
    pass


class NoConvergence(NumericFailure):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report

    def to_dict(self) -> dict:
        out = super().to_dict()
        if self.report is not None:
            out["residual_trace"] = list(self.report.get("contraction_trace", []))
            out["residual"] = self.report.get("residual")
        return out


class DegreeMismatch(NumericFailure):
    pass


class NonMonotone(NumericFailure):
    pass


class DepthInsufficient(NumericFailure):
    pass


class HypothesisViolated(NumericFailure):
    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["witness"] = self.witness
        return out
