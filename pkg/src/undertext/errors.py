"""Exception hierarchy shared by the library, CLI, and service.

Exit-code / HTTP mapping is done at the edges (cli.py, service.py); library
code only raises these types.
"""


class UndertextError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(UndertextError):
    """Caller supplied invalid parameters or an inconsistent configuration."""


class DataError(UndertextError):
    """Input data is missing, malformed, or inconsistent with itself."""


class NumericError(UndertextError):
    """A numerical procedure failed beyond recoverable regularization."""


class GraphDisconnectedError(DataError):
    """Neighbor graph split into several components.

    Carries the component sizes so callers can report them or opt into the
    largest-component fallback.
    """

    def __init__(self, component_sizes):
        self.component_sizes = sorted(component_sizes, reverse=True)
        super().__init__(
            "neighbor graph is disconnected; component sizes: "
            + ", ".join(str(s) for s in self.component_sizes)
        )
