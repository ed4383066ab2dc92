"""Exception hierarchy.

Every error carries a module-qualified ``code`` (``"eigensystem.RepeatedEigenvalues"``)
and an ``input_error`` flag that the CLI maps onto exit codes.
"""


class ModalError(Exception):
    module = "modalpf"
    input_error = False

    @property
    def code(self) -> str:
        return f"{self.module}.{type(self).__name__}"


class DimensionMismatch(ModalError, ValueError):
    input_error = True


class SchemaError(ModalError, ValueError):
    module = "cli"
    input_error = True


class RepeatedEigenvalues(ModalError):
    module = "eigensystem"


class NumericalFailure(ModalError):
    module = "eigensystem"


class DegenerateSamples(ModalError):
    module = "participation"


class ZeroLeftEigenvector(ModalError):
    module = "participation"


class BudgetExceeded(ModalError):
    module = "resonance"


class LinearPartMismatch(ModalError):
    module = "normalform"
    input_error = True


class SmallDivisor(ModalError):
    module = "normalform"


class NoConvergence(ModalError):
    module = "normalform"


class RegimeNotEstablished(ModalError):
    module = "normalform"


class StepUnderflow(ModalError):
    module = "dynamics"


class NonFinite(ModalError):
    module = "dynamics"


class RegionExceeded(ModalError):
    module = "dynamics"
