class KlabError(Exception):
    pass


class DomainError(KlabError, ValueError):
    """Argument outside the domain where a quantity is defined."""


class PoleError(DomainError):
    """Evaluation at (or within tolerance of) a pole."""


class DivergenceError(DomainError):
    """The defining integral does not converge for these parameters."""


class NonConvergenceError(KlabError, RuntimeError):
    """Adaptive refinement stalled before reaching the requested tolerance."""


class StabilityError(KlabError, ValueError):
    """Explicit time step violates the stability guard."""


class ConfigError(KlabError, ValueError):
    pass
