"""Exception hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI maps it to.
"""


class CLBRError(Exception):
    exit_code = 1


class ConfigError(CLBRError, ValueError):
    exit_code = 2


class DataError(CLBRError, ValueError):
    exit_code = 3


class GraphError(DataError):
    pass


class NumericError(CLBRError, ArithmeticError):
    exit_code = 4


class StageDependencyError(CLBRError):
    exit_code = 5


class SamplerExhaustedError(CLBRError, RuntimeError):
    """A relation could not reach its perturbation quota."""

    exit_code = 6

    def __init__(self, relation, target, n_added, n_dropped, batches):
        self.relation = relation
        self.target = target
        self.n_added = n_added
        self.n_dropped = n_dropped
        self.batches = batches
        super().__init__(
            f"relation {relation}: reached {n_added} adds + {n_dropped} drops "
            f"of quota {target} after {batches} batches"
        )
