"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class DisconnectedGraphError(ValidationError):
    def __init__(self, u, v):
        super().__init__(f"graph is disconnected: no path between {u!r} and {v!r}")
        self.pair = (u, v)


class SizeCapError(ValueError):
    """Instance exceeds the size cap of an exact (exponential-time) solver."""

    def __init__(self, what: str, size: int, cap: int):
        super().__init__(f"{what} size {size} exceeds cap {cap}")
        self.size = size
        self.cap = cap
