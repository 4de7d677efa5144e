"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1,
NumericalContractError -> 2, SolverConvergenceError -> 3.
"""


class ConfigError(Exception):
    """Invalid configuration: unknown key, bad type, or violated invariant."""


class NumericalContractError(Exception):
    """A numerical contract (tolerance, bound, or convergence order) was violated."""


class SolverConvergenceError(Exception):
    """Iterative solver failed to reach its tolerance within the iteration budget."""

    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = history if history is not None else []
