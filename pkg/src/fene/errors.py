"""Exception types shared across the solver stack."""


class FeneError(Exception):
    """Base class for all solver errors."""


class ConfigError(FeneError):
    """Malformed or inconsistent run configuration."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"[{field}] "
        super().__init__(prefix + message)


class PositivityLoss(FeneError):
    """Transformed density dropped to or below zero."""


class CFLViolation(FeneError):
    """Requested time step exceeds the configured CFL bound."""


class StabilityViolation(FeneError):
    """Time step outside the stability region of the chosen scheme."""


class VersionError(FeneError):
    """Checkpoint file has wrong magic bytes or unsupported version."""


class EigenSolverError(FeneError):
    """Generalized eigensolver failed; carries the residual norms."""

    def __init__(self, message, residuals=None):
        self.residuals = residuals
        super().__init__(message)
