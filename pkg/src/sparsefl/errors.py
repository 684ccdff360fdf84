"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment configuration.

    ``errors`` holds field-level messages so callers (CLI, service) can
    report exactly which keys are wrong.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class DecodeError(ValueError):
    """A compressed payload failed to decode.

    ``field`` names the wire-format field that failed, e.g. ``"position-rank"``.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class IdxFormatError(ValueError):
    """An IDX dataset file is malformed (bad magic, truncated, count mismatch)."""
