"""Exception types shared across the toolkit."""


class DegenerateMeshError(ValueError):
    """Mesh spacing or element area fell below the configured minimum."""


class NonPositiveDensityError(ValueError):
    """Hamiltonian density evaluated non-positive at a quadrature point."""


class ConfigError(ValueError):
    """Run configuration is malformed, incomplete, or contains unknown keys."""


class NumericalFailure(RuntimeError):
    """Time integration produced a non-finite state or a failed solve."""


class InstabilityError(NumericalFailure):
    """Explicit time integration diverged beyond the growth threshold."""
