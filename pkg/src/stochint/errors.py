"""Exception and warning types shared across the package."""


class StochintError(Exception):
    """Base class for all package errors."""


class ValidationError(StochintError):
    """Invalid inputs: bad files, bad shapes, bad configuration."""


class NumericalError(StochintError):
    """Computation produced unusable numbers."""


class MissingColumn(ValidationError):
    def __init__(self, column):
        super().__init__(f"required column {column!r} not found in header")
        self.column = column


class NonBinaryTreatment(ValidationError):
    def __init__(self, row, value):
        super().__init__(f"treatment value {value!r} at data row {row} is not 0 or 1")
        self.row = row
        self.value = value


class NonFiniteValue(ValidationError):
    def __init__(self, row, col, value=None):
        super().__init__(
            f"missing or non-finite value {value!r} at data row {row}, column {col!r}"
        )
        self.row = row
        self.col = col
        self.value = value


class TooFewUnits(ValidationError):
    pass


class DegenerateFold(ValidationError):
    pass


class InvalidSpec(ValidationError):
    pass


class SingleClass(ValidationError):
    pass


class EmptyArm(ValidationError):
    pass


class DegenerateDesign(NumericalError):
    pass


class NoGroundTruth(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class NonFiniteReward(NumericalError):
    def __init__(self, step):
        super().__init__(f"non-finite reward encountered at optimization step {step}")
        self.step = step


class PositivityWarning(UserWarning):
    """More than 5% of propensity predictions sit on the clip bounds."""


class NonConvergence(UserWarning):
    """Optimizer hit its iteration cap; the model is returned flagged."""
