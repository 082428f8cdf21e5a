"""Exception types shared across the toolkit.

The CLI maps these onto its exit codes, so keep the hierarchy flat.
"""


class DataError(ValueError):
    """Input data is malformed, too short, or otherwise unusable."""


class IdentificationError(RuntimeError):
    """The identification problem is singular (input not exciting enough)."""


class SynthesisError(RuntimeError):
    """A synthesized element violates its design requirements."""

    def __init__(self, check, message):
        super().__init__(f"{check}: {message}")
        self.check = check


class DivergenceError(RuntimeError):
    """A closed-loop simulation produced non-finite values."""

    def __init__(self, sample_index, message=None):
        super().__init__(message or f"non-finite closed-loop state at sample {sample_index}")
        self.sample_index = sample_index
