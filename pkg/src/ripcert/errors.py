"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument is outside its documented domain."""


class DataError(ValueError):
    """Input data is malformed (non-finite entries, bad file header, ...)."""


class EnumerationRefused(RuntimeError):
    """Exhaustive subset enumeration would exceed the configured ceiling.

    Distinct from a "no" verdict: callers must treat it as a third outcome.
    """

    def __init__(self, n_subsets: int, ceiling: int, what: str = "subsets"):
        self.n_subsets = n_subsets
        self.ceiling = ceiling
        super().__init__(
            f"refusing to enumerate {n_subsets:,} {what} (ceiling {ceiling:,}); "
            "raise the ceiling or set override=True"
        )


class PhiOverflow(OverflowError):
    """A truncated phi series left the representable float range."""
