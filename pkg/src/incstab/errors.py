"""Exception types shared across the toolkit."""


class ContractError(ValueError):
    """An argument violates a documented precondition (dimension, range, pairing)."""


class SingularMatrixError(ArithmeticError):
    """A mass or input matrix is numerically singular at the evaluation point."""


class DivergenceError(RuntimeError):
    """Integration produced a non-finite state."""

    def __init__(self, message, step_index=None, time=None, realizations=None):
        super().__init__(message)
        self.step_index = step_index
        self.time = time
        self.realizations = realizations


class GainBoundError(ValueError):
    """The design gain does not strictly exceed the synthesis lower bound."""

    def __init__(self, kappa1, bound):
        self.kappa1 = float(kappa1)
        self.bound = float(bound)
        self.margin = self.kappa1 - self.bound
        super().__init__(
            f"kappa1={self.kappa1:.12g} must strictly exceed the gain lower bound "
            f"{self.bound:.12g} (margin {self.margin:.3g})"
        )


class UnsupportedOrderError(ValueError):
    """Moment order k below 2 is not supported by the synthesis formulas."""


class DomainError(ValueError):
    """A state lies outside the validity box where the constants are certified."""


class ConfigError(ValueError):
    """An experiment configuration document was rejected."""

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"config error at '{path}': {message}" if path else message)
