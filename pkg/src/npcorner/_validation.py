"""Input validation helpers shared by the estimators and functional API."""
import math
import numbers

import numpy as np

from .exceptions import ConfigError, DomainError

_ANGLE_TOL = 1e-12


def check_alpha(alpha):
    """Return ``alpha`` as float after checking 0 < alpha < 2pi, alpha != pi."""
    if isinstance(alpha, CornerAngle):
        return alpha.alpha
    try:
        a = float(alpha)
    except (TypeError, ValueError):
        raise DomainError(f"corner angle must be a real number, got {alpha!r}")
    if not math.isfinite(a):
        raise DomainError("corner angle must be finite")
    if a <= _ANGLE_TOL or a >= 2 * math.pi - _ANGLE_TOL:
        raise DomainError(f"corner angle {a} outside (0, 2pi)")
    if abs(a - math.pi) <= _ANGLE_TOL:
        raise DomainError("corner angle pi is a smooth point, not a corner")
    return a


def check_complex(value, name="value"):
    try:
        z = complex(value)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a complex number, got {value!r}")
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError(f"{name} must be finite, got {z}")
    return z


def check_int(value, name, low=None, high=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if low is not None and value < low:
        raise ConfigError(f"{name} must be >= {low}, got {value}")
    if high is not None and value > high:
        raise ConfigError(f"{name} must be <= {high}, got {value}")
    return value


def check_positive(value, name):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a real number, got {value!r}")
    if not (math.isfinite(v) and v > 0):
        raise ConfigError(f"{name} must be positive and finite, got {value!r}")
    return v


def check_vector(values, n=None, name="values", dtype=complex):
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ConfigError(f"{name} has length {arr.shape[0]}, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite entries")
    return arr


def check_eps_ladder(eps_ladder, min_length=1):
    eps = np.asarray(eps_ladder, dtype=float)
    if eps.ndim != 1 or eps.size < min_length:
        raise ConfigError(f"eps ladder needs at least {min_length} entries")
    if np.any(eps <= 0) or np.any(eps > 0.5):
        raise ConfigError("eps ladder entries must lie in (0, 0.5]")
    if np.any(np.diff(eps) >= 0):
        raise ConfigError("eps ladder must be strictly decreasing")
    return eps


class CornerAngle:
    """Interior corner angle, 0 < alpha < 2pi with alpha != pi."""

    __slots__ = ("alpha",)

    def __init__(self, alpha):
        object.__setattr__(self, "alpha", check_alpha(alpha))

    def __setattr__(self, name, value):
        raise AttributeError("CornerAngle is immutable")

    def __float__(self):
        return self.alpha

    def __repr__(self):
        return f"CornerAngle({self.alpha!r})"

    def __eq__(self, other):
        if isinstance(other, CornerAngle):
            return self.alpha == other.alpha
        return NotImplemented

    def __hash__(self):
        return hash(self.alpha)

    @classmethod
    def from_fraction(cls, text):
        """Parse ``p/q`` as (p/q)*pi."""
        p, _, q = str(text).partition("/")
        try:
            frac = float(p) / float(q or 1)
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"invalid angle fraction {text!r}")
        return cls(frac * math.pi)
