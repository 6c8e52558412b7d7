"""Small input-validation helpers used at public entry points."""

import numbers

import numpy as np

from .errors import ConfigError


def check_positive(name, value, strict=True):
    """Validate a positive scalar and return it as float."""
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ConfigError(f"{name} must be a finite number, got {value!r}")
    value = float(value)
    if strict and value <= 0.0:
        raise ConfigError(f"{name} must be > 0, got {value}")
    if not strict and value < 0.0:
        raise ConfigError(f"{name} must be >= 0, got {value}")
    return value


def check_count(name, value, minimum=1):
    """Validate an integer count >= minimum."""
    if not isinstance(value, numbers.Integral):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


def as_float_array(name, values, ndim=1):
    """Coerce to a float64 array of the expected dimensionality."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise ConfigError(f"{name} must be {ndim}-d, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite entries")
    return arr


def check_random_state(seed):
    """Return a PCG64-backed Generator for an int seed or pass through a Generator.

    PCG64 is the single PRNG used across the package: reproducible per seed
    and splittable via ``Generator.spawn`` for per-network streams.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, numbers.Integral):
        return np.random.Generator(np.random.PCG64(int(seed)))
    raise ConfigError(f"seed must be an int or numpy Generator, got {seed!r}")
