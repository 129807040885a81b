"""Exception hierarchy. Every error carries a machine-readable category
that the CLI maps to a stable exit code."""


class ToolkitError(Exception):
    category = "error"


class ConfigError(ToolkitError):
    category = "config"


class RasterIOError(ToolkitError):
    category = "io"


class RasterFormatError(ToolkitError):
    category = "format"


class ContractError(ToolkitError):
    """A caller violated an operation's documented contract (shape mismatch,
    stale quantization spec, out-of-range step index, ...)."""

    category = "contract"


class BackendError(ToolkitError):
    """An external reconstruction backend failed: nonzero exit, timeout, or
    missing/partial outputs. Carries captured diagnostics."""

    category = "backend"

    def __init__(self, message, stdout="", stderr=""):
        super().__init__(message)
        self.stdout = stdout
        self.stderr = stderr


EXIT_CODES = {
    "config": 2,
    "io": 3,
    "format": 4,
    "contract": 5,
    "backend": 6,
}
