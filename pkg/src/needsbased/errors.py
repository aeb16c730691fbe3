class DomainError(ValueError):
    """Input outside the model's domain (negative duration, bad parameters, ...)."""


class ConfigError(ValueError):
    """Malformed configuration or CLI arguments."""


class InfeasibleError(RuntimeError):
    """No feasible solution for the requested problem."""


class HorizonCapError(RuntimeError):
    """Multi-week extension hit its cap without a non-negative objective."""


class DegenerateChoiceError(RuntimeError):
    """Every alternative in a choice set has -inf utility."""
