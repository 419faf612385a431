"""Exception hierarchy. Everything raised on bad input derives from NavExitError."""


class NavExitError(Exception):
    """Base class for domain and validation errors (CLI exit code 1)."""


class InputShapeError(NavExitError, ValueError):
    pass


class LayerIndexError(NavExitError, IndexError):
    pass


class EmptyInputError(NavExitError, ValueError):
    pass


class LabelDomainError(NavExitError, ValueError):
    pass


class StrategyConfigError(NavExitError, ValueError):
    pass


class OrderingError(NavExitError, ValueError):
    pass


class ConfigValidationError(NavExitError, ValueError):
    pass


class TraceBindingError(NavExitError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ReportShapeError(NavExitError, ValueError):
    pass


class UnsupportedBackendError(NavExitError, TypeError):
    pass


class FingerprintMismatchError(NavExitError):
    pass


class SpecValidationError(NavExitError, ValueError):
    """Invalid generator spec; ``fields`` lists every offending field."""

    def __init__(self, fields: dict[str, str]):
        self.fields = dict(fields)
        detail = "; ".join(f"{k}: {v}" for k, v in sorted(self.fields.items()))
        super().__init__(f"invalid spec fields: {detail}")


class ArtifactError(NavExitError, ValueError):
    """Unreadable or malformed artifact. ``offset`` is the byte offset of the failure, if known."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
