"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a mathematical operation."""


class ConfigError(ValueError):
    """A configuration or construction argument is invalid."""


class DerivationError(ArithmeticError):
    """A derived parameter came out non-finite.

    ``item`` names the offending derivation step.
    """

    def __init__(self, item: str, value: float):
        super().__init__(f"non-finite value at item {item}: {value!r}")
        self.item = item
        self.value = value


class AccessError(PermissionError):
    """Latent positions were requested without the evaluation capability."""


class PreconditionError(ValueError):
    """An algorithm was called with inputs violating its precondition."""


class ClusterNotFound(RuntimeError):
    """A cluster-building stage produced no usable vertex set.

    ``stage`` is the filter stage inside the nearby-cluster routine
    (1..d for orthogonal filters, d+1 for the sharp filter). ``loop_index``
    is the round of the net builder, filled in when the error propagates
    out of it.
    """

    def __init__(self, stage: int, message: str = "", loop_index: int | None = None):
        self.stage = stage
        self.loop_index = loop_index
        super().__init__(self._format(message))
        self._message = message

    def _format(self, message: str) -> str:
        where = f"stage {self.stage}"
        if self.loop_index is not None:
            where += f", round {self.loop_index}"
        return f"cluster not found at {where}" + (f": {message}" if message else "")

    def with_loop_index(self, loop_index: int) -> "ClusterNotFound":
        return ClusterNotFound(self.stage, self._message, loop_index)
