"""Exception types shared across the package."""


class TransportError(Exception):
    """Base class for all library errors."""


class DomainError(TransportError, ValueError):
    """Input lies outside [-1,1]^k or has the wrong length."""


class ModelError(TransportError):
    """A density evaluator broke its contract (non-finite or non-positive)."""


class IntegrationError(TransportError):
    """Quadrature refinement failed to reach the requested tolerance."""


class CapabilityError(TransportError):
    """Request exceeds a configured budget (dimension cap, j_max, ...)."""


class ConvergenceError(TransportError):
    """Root finder exhausted its iteration budget."""


class ConfigError(TransportError):
    """Experiment configuration is malformed."""
