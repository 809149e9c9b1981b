"""Exception types shared across the package.

Every rejection carries enough structure for callers to report which
constraint failed without parsing message strings.
"""

from __future__ import annotations


class GwimmError(Exception):
    """Base class for all package-specific errors."""


class OutOfRangeError(GwimmError, ValueError):
    """A parameter violates its admissible range.

    Attributes
    ----------
    field : name of the offending parameter
    bound : human-readable statement of the violated constraint
    value : the rejected value
    """

    def __init__(self, field: str, bound: str, value: float):
        self.field = field
        self.bound = bound
        self.value = value
        super().__init__(f"{field}={value!r} violates {bound}")


class NonPmfError(OutOfRangeError):
    """The offspring parameters would make p1 = 1 - kappa1*(1+nu) negative."""


class DegenerateThetaError(GwimmError, ValueError):
    """Raised where theta = 1 has no continuous one-sided stable component."""


class CapTooSmallError(GwimmError, RuntimeError):
    """Truncated-state dynamic program lost too much mass for its cap M.

    Attributes
    ----------
    generation : first generation at which the cumulative lost mass
        exceeded the tolerance
    lost_mass : the cumulative lost mass at that generation
    """

    def __init__(self, generation: int, lost_mass: float, tol: float):
        self.generation = generation
        self.lost_mass = lost_mass
        self.tol = tol
        super().__init__(
            f"lost mass {lost_mass:.3e} exceeds {tol:.1e} at generation {generation}; "
            f"increase M"
        )


class WrongRegimeError(GwimmError, ValueError):
    """A limit-theorem checker was called outside its tail-index regime."""


class MissingConstantError(GwimmError, ValueError):
    """The requested limit requires a numerically estimated tail constant."""


class MissingRenewalError(GwimmError, ValueError):
    """A renewal table shorter than the requested horizon was supplied."""


class DegenerateConditioningError(GwimmError, RuntimeError):
    """Conditioning event {X_n > 0} had no Monte Carlo occurrences."""


class InsufficientLengthError(GwimmError, ValueError):
    """A sequence is too short for tail fitting."""


class TolUnreachableError(GwimmError, RuntimeError):
    """A requested tolerance cannot be met within the implementation's caps."""
