class LbmfError(Exception):
    """Base class for everything the toolkit raises on purpose."""


class ConfigError(LbmfError):
    """
    The config document could not be read. `where` is either a line number
    (malformed JSON) or a field path like `types/1/mu` (schema failure).
    """
    def __init__(self, message, where = None):
        self.where = where
        if where is not None:
            message = f"{where}: {message}"
        super().__init__(message)


class ValidationError(LbmfError):
    """The config parsed fine but the cluster/policy pair breaks a standing assumption."""
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "\n".join(f"  - {v}" for v in self.violations)
        super().__init__(f"{len(self.violations)} violation(s):\n{lines}")


class SolverError(LbmfError):
    """
    A nonlinear solve or a run-to-stationarity did not converge. The last iterate
    and its residual are kept so the caller can decide what to do with them.
    """
    def __init__(self, message, state = None, residual = None):
        self.state = state
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)


class IntegrationError(LbmfError):
    def __init__(self, t):
        self.t = t
        super().__init__(f"mean-field step produced non-finite values at t={t:.6g}")


class RegimeError(LbmfError):
    """Report and policy don't match, or the regime is outside what we can assemble."""
