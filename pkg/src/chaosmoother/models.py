"""Concrete quadratic systems: shifted Lorenz 63, Lorenz 96, random coefficients."""

import re
from dataclasses import dataclass

import numpy as np

from ._validation import check_int, check_positive, check_rng
from .exceptions import ConfigError
from .quadode import QuadraticSystem

FORCING_CONVENTIONS = ("shift", "printed")


@dataclass(frozen=True)
class Lorenz63Params:
    """Lorenz 63 parameters in the ``a (y - x)``, ``x (r - z) - y``, ``x y - b z`` form.

    ``forcing_convention`` selects the constant term of the shifted system:
    ``"shift"`` gives ``f3 = -b (r + a)``, the value produced by the change of
    variables ``u3 = z - r - a``; ``"printed"`` gives ``f3 = a - b / r``.
    """

    a: float = 27.0
    b: float = 8.0 / 3.0
    r: float = 10.0
    forcing_convention: str = "shift"

    def __post_init__(self):
        for name in ("a", "b", "r"):
            check_positive(getattr(self, name), name)
        if self.forcing_convention not in FORCING_CONVENTIONS:
            raise ConfigError(f"forcing_convention must be one of {FORCING_CONVENTIONS}")


@dataclass(frozen=True)
class Lorenz96Params:
    d: int = 5
    forcing: float = 8.0

    def __post_init__(self):
        check_int(self.d, "d", minimum=4)
        float(self.forcing)


def _default_radius(A, f):
    lam = float(np.linalg.eigvalsh(0.5 * (A + A.T)).min())
    if lam <= 0:
        raise ConfigError(f"symmetric part of A is not positive definite (λ_min = {lam:.3g})")
    R = 2.0 * np.linalg.norm(f) / lam
    if R == 0:
        R = 1.0
    return R, lam


def lorenz63_system(p=Lorenz63Params()):
    """Lorenz 63 in shifted coordinates ``(x, y, z - r - a)``.

    Examples
    --------
    >>> s = lorenz63_system()
    >>> s.A.tolist()[0]
    [27.0, -27.0, 0.0]
    """
    a, b, r = p.a, p.b, p.r
    A = np.array([[a, -a, 0.0], [a, 1.0, 0.0], [0.0, 0.0, b]])
    B = np.zeros((3, 3, 3))
    B[1, 0, 2] = B[1, 2, 0] = 0.5
    B[2, 0, 1] = B[2, 1, 0] = -0.5
    f3 = -b * (r + a) if p.forcing_convention == "shift" else a - b / r
    f = np.array([0.0, 0.0, f3])
    R, lam = _default_radius(A, f)
    return QuadraticSystem(A, B, f, R, R / 10.0, name="lorenz63",
                           meta={"params": p, "lambda_A": lam})


def lorenz63_shift(p=Lorenz63Params()):
    """Offset subtracted from ``z`` by the shifted coordinates (``r + a``)."""
    return p.r + p.a if p.forcing_convention == "shift" else 0.0


def lorenz63_from_xyz(xyz, p=Lorenz63Params()):
    """Map classical ``(x, y, z)`` coordinates to the shifted state."""
    u = np.array(xyz, dtype=float)
    u[2] -= lorenz63_shift(p)
    return u


def lorenz63_to_xyz(u, p=Lorenz63Params()):
    xyz = np.array(u, dtype=float)
    xyz[2] += lorenz63_shift(p)
    return xyz


def lorenz96_system(p=Lorenz96Params()):
    """Lorenz 96 with cyclic indices: ``du_i/dt = (u_{i+1} - u_{i-2}) u_{i-1} - u_i + F``."""
    d = p.d
    A = np.eye(d)
    B = np.zeros((d, d, d))
    for i in range(d):
        ip, im, imm = (i + 1) % d, (i - 1) % d, (i - 2) % d
        B[i, ip, im] -= 0.5
        B[i, im, ip] -= 0.5
        B[i, im, imm] += 0.5
        B[i, imm, im] += 0.5
    f = np.full(d, float(p.forcing))
    R, lam = _default_radius(A, f)
    return QuadraticSystem(A, B, f, R, R / 10.0, name=f"lorenz96-d{d}",
                           meta={"params": p, "lambda_A": lam})


def random_system(d, high=10, seed=0, R=None):
    """System with ``A, B, f`` and a start point drawn uniformly from ``{1, ..., high}``.

    Parameters
    ----------
    d : int
    high : int
        Largest admissible entry (10 reproduces the reference experiment).
    seed : int or Generator
    R : float, optional
        Radius recorded on the system; defaults to ``2 high sqrt(d)``, enough
        to contain every admissible start point. Trapping is not implied.

    Returns
    -------
    system : QuadraticSystem
    u : ndarray of shape (d,)
    """
    d = check_int(d, "d", minimum=1)
    high = check_int(high, "high", minimum=1)
    rng = check_rng(seed)
    A = rng.integers(1, high + 1, size=(d, d)).astype(float)
    B = rng.integers(1, high + 1, size=(d, d, d)).astype(float)
    f = rng.integers(1, high + 1, size=d).astype(float)
    u = rng.integers(1, high + 1, size=d).astype(float)
    R = 2.0 * high * np.sqrt(d) if R is None else R
    sys = QuadraticSystem(A, B, f, R, R / 10.0, name=f"random-d{d}",
                          meta={"u": u, "high": high})
    return sys, u


_L96 = re.compile(r"^lorenz96-d(\d+)$")
_RND = re.compile(r"^random-d(\d+)-seed(\d+)$")

PRESET_PATTERNS = ("lorenz63-paper", "lorenz63-classical", "lorenz96-d{N}",
                   "random-d{N}-seed{S}", "geo")


def get_preset(name):
    """Resolve a preset name to a :class:`QuadraticSystem` or :class:`GeoParams`."""
    if name == "lorenz63-paper":
        return lorenz63_system(Lorenz63Params(27.0, 8.0 / 3.0, 10.0))
    if name == "lorenz63-classical":
        return lorenz63_system(Lorenz63Params(10.0, 8.0 / 3.0, 28.0))
    if name == "geo":
        from .geo import GeoParams
        return GeoParams()
    m = _L96.match(name)
    if m:
        d = int(m.group(1))
        if d < 4:
            raise ConfigError("lorenz96 presets need d >= 4")
        return lorenz96_system(Lorenz96Params(d=d))
    m = _RND.match(name)
    if m:
        sys, _ = random_system(int(m.group(1)), seed=int(m.group(2)))
        sys.name = name
        return sys
    raise ConfigError(f"unknown preset {name!r}; known patterns: {', '.join(PRESET_PATTERNS)}")
