class ShapeError(ValueError):
    """Array dimensions do not chain or do not match."""


class DomainError(ValueError):
    """Input lies outside the domain of a statistic (empty group, constant target, ...)."""


class ConfigError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    pass
