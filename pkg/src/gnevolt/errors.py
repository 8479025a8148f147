"""Exception hierarchy shared by every gnevolt module."""


class GneVoltError(Exception):
    """Base class for all library errors."""


class TopologyError(GneVoltError):
    """Feeder edge list does not describe a tree on buses 0..N."""


class DomainError(GneVoltError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(GneVoltError, ValueError):
    """Partition / communication layout is inconsistent with the feeder."""


class LocalityViolation(GneVoltError):
    """A bus read state it could not have received over its comm links."""


class UnsupportedFeatureError(GneVoltError):
    """Operation requires a cost structure the model does not have."""


class DivergenceError(GneVoltError):
    """Iterates left the divergence guard region."""


class NonUniqueEquilibrium(GneVoltError):
    """The reference oracle found several distinct equilibria."""

    def __init__(self, message, solutions=()):
        super().__init__(message)
        self.solutions = list(solutions)


class ScenarioError(GneVoltError, ValueError):
    """Scenario document failed schema or cross-reference validation."""
