"""Exception types shared across the toolkit."""


class CanndynError(Exception):
    """Base class for all domain errors raised by this package."""


class ConfigError(CanndynError):
    """A model configuration document is malformed.

    Carries the dotted path of the offending key so callers can point at it.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class SelectorError(CanndynError):
    """Unknown ingredient selector, or a derivative the family cannot supply."""


class GammaBoundError(CanndynError):
    """The growth rate dropped below its declared lower bound gamma0."""


class NoEquilibriumError(CanndynError):
    """The net-reproduction condition has no sign change on the given bracket."""


class ConvergenceError(CanndynError):
    """An iteration (fixed point or bisection) exhausted its budget."""


class LambdaDomainError(CanndynError):
    """Spectral quantity requested at lambda outside Re(lambda) > -mu0."""


class SeparabilityError(CanndynError):
    """Operation requires a strictly separable (single-term) attack kernel."""


class ModelAssumptionError(CanndynError):
    """A structural precondition on the model (proportional kernel,
    age-structured growth, ...) is not met."""


class PoleError(CanndynError):
    """Resolvent requested at a root of the characteristic function."""


class CFLError(CanndynError):
    """Time step violates the explicit-scheme stability bound."""


class SimulationError(CanndynError):
    """Simulator failure: non-finite state, negative growth rate, or an
    unsolvable boundary relation."""
