"""Exception hierarchy shared across the solver."""


class ConfigurationError(ValueError):
    """Invalid run parameters (bad order, dimension, scenario id, ...)."""


class ResourceBudgetError(ConfigurationError):
    """Grid allocation would exceed the configured memory budget."""

    def __init__(self, requested_bytes, budget_bytes):
        self.requested_bytes = requested_bytes
        self.budget_bytes = budget_bytes
        super().__init__(
            f"grid would allocate {requested_bytes} persistent bytes, "
            f"budget is {budget_bytes}"
        )


class DomainError(ValueError):
    """A state vector outside the PDE's admissible set was passed to a
    pointwise operation that requires admissibility."""


class SchedulingOrderError(RuntimeError):
    """A task consumed data its producer has not written yet.  Always a
    scheduler bug, never a data problem."""


class PredictorFailureError(RuntimeError):
    """The space-time predictor produced non-finite values."""

    def __init__(self, cell_index, message="predictor produced non-finite values"):
        self.cell_index = cell_index
        super().__init__(f"{message} (cell {cell_index})")


class NumericalError(RuntimeError):
    """Unrecoverable numerical breakdown (e.g. vanishing admissible step)."""
