"""Exception types raised across the package."""


class LnPairError(Exception):
    """Base class for domain errors (CLI maps these to exit code 3)."""


class SymmetryViolation(LnPairError):
    pass


class OutOfValidityRange(LnPairError):
    pass


class InvalidNA(LnPairError):
    pass


class InsufficientSidebands(LnPairError):
    pass


class IllConditionedFit(LnPairError):
    pass


class InvalidTransmission(LnPairError):
    pass


class ConfigError(Exception):
    """Malformed or inconsistent run configuration (CLI exit code 2)."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if field:
            where.append(field)
        if line is not None:
            where.append(f"line {line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
