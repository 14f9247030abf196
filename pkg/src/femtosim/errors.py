"""Exception hierarchy shared by all femtosim modules."""


class FemtosimError(Exception):
    """Base class for every error raised on purpose by femtosim."""


class DomainError(FemtosimError, ValueError):
    """A numeric input lies outside the domain of a formula."""


class ConfigError(FemtosimError, ValueError):
    """A configuration value violates an invariant."""


class ProtocolError(FemtosimError):
    """An illegal state transition or handover was requested."""


class MetricError(FemtosimError):
    """A metric was requested for a world state where it is undefined."""


class ScenarioSyntaxError(ConfigError):
    """Malformed or unknown entry in a scenario file."""

    def __init__(self, message, line=None, source="<scenario>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)
