"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid scenario configuration or config file."""


class FrameError(ValueError):
    """Timestamp frame mismatch (absolute vs relative, cycle length)."""


class OrderingError(ValueError):
    """Absolute timestamps that are not strictly increasing."""


class BinningError(ValueError):
    """Bin width / histogram shape inconsistency."""


class EstimationError(RuntimeError):
    """EM cannot proceed (empty data, all components empty, ...)."""


class DomainError(ValueError):
    """Data outside the model's support [0, t_r)."""
