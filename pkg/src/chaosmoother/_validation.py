"""Small input validation helpers in the spirit of ``sklearn.utils.validation``."""

import numbers

import numpy as np

from .exceptions import ConfigError


def check_vector(x, name="x", dim=None, allow_empty=False):
    """Return ``x`` as a finite 1-D float array.

    Parameters
    ----------
    x : array_like
        Candidate vector.
    name : str
        Name used in error messages.
    dim : int, optional
        Required length.
    allow_empty : bool
        Accept zero-length input.

    Returns
    -------
    ndarray of shape (dim,)
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise ConfigError(f"{name} must not be empty")
    if dim is not None and arr.shape[0] != dim:
        raise ConfigError(f"{name} must have length {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite entries")
    return arr


def check_matrix(m, name="m", shape=None):
    """Return ``m`` as a finite 2-D float array with an optional shape check."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 1 and shape is not None and shape[0] == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ConfigError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if shape is not None:
        for axis, (got, want) in enumerate(zip(arr.shape, shape)):
            if want is not None and got != want:
                raise ConfigError(f"{name} has shape {arr.shape}, axis {axis} must be {want}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite entries")
    return arr


def check_positive(value, name, strict=True, allow_inf=False):
    """Validate a real scalar that must be positive (or nonnegative)."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ConfigError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if np.isnan(value) or (np.isinf(value) and not allow_inf):
        raise ConfigError(f"{name} must be finite, got {value}")
    if strict and value <= 0:
        raise ConfigError(f"{name} must be > 0, got {value}")
    if not strict and value < 0:
        raise ConfigError(f"{name} must be >= 0, got {value}")
    return value


def check_int(value, name, minimum=None):
    """Validate an integer scalar with an optional lower bound."""
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_rng(seed):
    """Return a ``numpy.random.Generator`` built on the Philox counter-based bit generator.

    ``Generator`` instances are passed through, anything else seeds a fresh
    Philox stream so that child streams can be spawned reproducibly.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn_rngs(seed, n):
    """Independent child generators, one per task, independent of execution order."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.Philox(c)) for c in ss.spawn(n)]
