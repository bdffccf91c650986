"""Exception hierarchy.

The CLI maps these onto exit codes: contract violations exit 1, data and
file-format problems exit 2, numeric failures exit 3.
"""


class OrderembError(Exception):
    """Base class for all errors raised by this package."""


class ContractError(OrderembError, ValueError):
    """A caller violated an operation's precondition (bad shape, bad range)."""


class DataFormatError(OrderembError):
    """An input file or dataset is malformed or inconsistent."""


class CycleError(DataFormatError):
    """An edge list that must be acyclic contains a directed cycle."""

    def __init__(self, cycle):
        self.cycle = list(cycle)
        path = " -> ".join(str(c) for c in self.cycle)
        super().__init__(f"edge list contains a cycle: {path}")


class SamplingError(DataFormatError):
    """Negative sampling could not find a valid corruption (degenerate data)."""


class CheckpointError(DataFormatError):
    """A checkpoint file failed its integrity checksum."""


class CheckpointVersionError(DataFormatError):
    """A checkpoint does not match the expected task or tensor layout."""


class NumericError(OrderembError):
    """A non-finite value or degenerate norm showed up where it must not."""
