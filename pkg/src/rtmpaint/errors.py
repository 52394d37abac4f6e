"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration (bad keys, inconsistent values, missing files)."""


class DataError(RuntimeError):
    """Missing or malformed data artifacts (audio, manifests, caches)."""


class ConstantInputError(ValueError):
    """Correlation requested on a constant sequence; the value is undefined."""


class MemoryBudgetError(MemoryError):
    """A dense tensor would exceed the configured memory budget."""

    def __init__(self, required_bytes: int, budget_bytes: int, what: str = "tensor"):
        self.required_bytes = int(required_bytes)
        self.budget_bytes = int(budget_bytes)
        super().__init__(
            f"{what} needs {self.required_bytes} bytes "
            f"but the budget is {self.budget_bytes} bytes"
        )
