"""Quadratic ODEs ``du/dt = -A u - B(u, u) + f``: evaluation, flows, constants."""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _integrator as _ig
from ._validation import check_int, check_matrix, check_positive, check_rng, check_vector
from .exceptions import Blowup, ConfigError, NumericFailure, StepUnderflow

DEFAULT_TOL = 1e-10
DEFAULT_H_FLOOR = 1e-13
DEFAULT_MAX_STEPS = 5_000_000


@dataclass
class QuadraticSystem:
    """Coefficients of ``du/dt = -A u - B(u, u) + f`` with a trapping ball.

    Parameters
    ----------
    A : array_like of shape (d, d)
    B : array_like of shape (d, d, d)
        Bilinear form ``B(u, w)_i = Σ_jk B[i, j, k] u_j w_k``.
    f : array_like of shape (d,)
    R : float
        Trapping radius.
    delta : float
        Width of the shell ``R <= ‖v‖ <= R + delta`` used in the trapping check.
    name : str, optional
    trapping_verified : bool
        Set once :func:`check_trapping_ball` reported no violations.
    """

    A: np.ndarray
    B: np.ndarray
    f: np.ndarray
    R: float
    delta: float
    name: str = "custom"
    trapping_verified: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = check_matrix(self.A, "A")
        d = self.A.shape[0]
        if self.A.shape != (d, d):
            raise ConfigError(f"A must be square, got shape {self.A.shape}")
        self.B = np.asarray(self.B, dtype=float)
        if self.B.shape != (d, d, d):
            raise ConfigError(f"B must have shape {(d, d, d)}, got {self.B.shape}")
        if not np.all(np.isfinite(self.B)):
            raise ConfigError("B contains non-finite entries")
        self.B = np.ascontiguousarray(self.B)
        self.A = np.ascontiguousarray(self.A)
        self.f = check_vector(self.f, "f", dim=d)
        self.R = check_positive(self.R, "R")
        self.delta = check_positive(self.delta, "delta")

    @property
    def dim(self):
        return self.A.shape[0]

    def to_dict(self):
        """JSON-ready dict ``{dim, A (row-major), B (flat i-major), f, R, delta}``."""
        return {
            "dim": self.dim,
            "A": self.A.ravel().tolist(),
            "B": self.B.ravel().tolist(),
            "f": self.f.tolist(),
            "R": self.R,
            "delta": self.delta,
        }

    @classmethod
    def from_dict(cls, data, name="custom"):
        keys = {"dim", "A", "B", "f", "R", "delta"}
        missing = keys - set(data)
        if missing:
            raise ConfigError(f"system definition misses keys {sorted(missing)}")
        extra = set(data) - keys
        if extra:
            raise ConfigError(f"system definition has unknown keys {sorted(extra)}")
        d = check_int(data["dim"], "dim", minimum=1)
        A = np.asarray(data["A"], dtype=float)
        B = np.asarray(data["B"], dtype=float)
        if A.size != d * d or B.size != d ** 3:
            raise ConfigError("A or B length inconsistent with dim")
        return cls(A.reshape(d, d), B.reshape(d, d, d), data["f"], data["R"],
                   data["delta"], name=name)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()), name=Path(path).stem)


@dataclass
class Trajectory:
    """States (and optionally Jacobians) sampled on an increasing time grid."""

    times: np.ndarray
    states: np.ndarray
    jacobians: np.ndarray = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.times.ndim != 1 or np.any(np.diff(self.times) <= 0):
            raise ConfigError("trajectory times must be strictly increasing")
        if self.states.shape[0] != self.times.shape[0]:
            raise ConfigError("states and times lengths differ")

    def __len__(self):
        return self.times.shape[0]


@dataclass
class SystemConstants:
    """A-priori bounds derived from ``(A, B, f, R)``.

    ``opNormB`` is the multi-start ascent estimate of ``sup ‖B(u, w)‖`` over unit
    vectors; ``opNormB_upper`` is the Frobenius bound, which is rigorous.
    The remaining constants use whichever of the two was requested.
    """

    G: float
    v_max: float
    a_max: float
    C_0: float
    C_der: float
    C_J: float
    opNormA: float
    opNormB: float
    opNormB_upper: float
    rigorous: bool
    finite: bool = True


@dataclass
class TrappingReport:
    violations: int
    worst_inner_product: float
    n_samples: int


@dataclass
class DenseTrajectory:
    """Forward trajectory stored as a piecewise quartic dense-output table."""

    t_start: np.ndarray
    h: np.ndarray
    y: np.ndarray
    q: np.ndarray
    T: float

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t.size, self.y.shape[1]))
        for i, ti in enumerate(t):
            _ig.dense_eval(ti, self.t_start, self.h, self.y, self.q, out[i])
        return out


# ----------------------------------------------------------------------------
# algebra


def bilinear(sys, u, w):
    """``B(u, w)`` for the system's tensor."""
    u = check_vector(u, "u", dim=sys.dim)
    w = check_vector(w, "w", dim=sys.dim)
    return np.einsum("ijk,j,k->i", sys.B, u, w)


def eval_vector_field(sys, v):
    """Return ``-A v - B(v, v) + f``.

    Examples
    --------
    >>> from chaosmoother.models import lorenz96_system, Lorenz96Params
    >>> s = lorenz96_system(Lorenz96Params(d=5))
    >>> float(eval_vector_field(s, [1, 2, 3, 4, 5])[2])
    11.0
    """
    v = check_vector(v, "v", dim=sys.dim)
    return -sys.A @ v - np.einsum("ijk,j,k->i", sys.B, v, v) + sys.f


def field_jacobian(sys, v):
    """Jacobian ``-A - B(·, v) - B(v, ·)`` of the vector field at ``v``."""
    v = check_vector(v, "v", dim=sys.dim)
    return -sys.A - np.einsum("ijk,k->ij", sys.B, v) - np.einsum("ikj,k->ij", sys.B, v)


def taylor_derivatives(sys, v, n):
    """Time derivatives ``D^0 v, ..., D^n v`` of the solution through ``v``.

    Uses ``D^1 v = -A v - B(v, v) + f`` and for ``i >= 2``
    ``D^i v = -A D^{i-1} v - Σ_{j<i} C(i-1, j) B(D^j v, D^{i-1-j} v)``.

    Returns
    -------
    ndarray of shape (n + 1, d)
    """
    v = check_vector(v, "v", dim=sys.dim)
    n = check_int(n, "n", minimum=0)
    D = np.empty((n + 1, sys.dim))
    D[0] = v
    if n >= 1:
        D[1] = eval_vector_field(sys, v)
    for i in range(2, n + 1):
        acc = -sys.A @ D[i - 1]
        for j in range(i):
            acc -= math.comb(i - 1, j) * np.einsum("ijk,j,k->i", sys.B, D[j], D[i - 1 - j])
        D[i] = acc
    return D


# ----------------------------------------------------------------------------
# integration

_EMPTY_T = np.zeros(1)


def _empty_ref(d):
    return _EMPTY_T, _EMPTY_T, np.zeros((1, d)), np.zeros((1, d, 4))


def _raise_status(status, s_fail, sign, t0=0.0):
    t = t0 + sign * s_fail
    if status == _ig.STATUS_BLOWUP:
        raise Blowup(f"state left the escape ball at t = {t:.6g}", t=t)
    if status == _ig.STATUS_UNDERFLOW:
        raise StepUnderflow(f"adaptive step fell below the floor at t = {t:.6g}", t=t)
    if status == _ig.STATUS_MAXSTEPS:
        raise NumericFailure(f"step budget exhausted at t = {t:.6g}")


def _run(sys, mode, y0, s_out, sign, tol, escape, h_floor=DEFAULT_H_FLOOR,
         max_steps=DEFAULT_MAX_STEPS, ref=None, t0=0.0, record=False):
    ref = _empty_ref(sys.dim) if ref is None else ref
    res = _ig.integrate(mode, np.ascontiguousarray(y0, dtype=float),
                        np.ascontiguousarray(s_out, dtype=float), float(sign), float(t0),
                        sys.A, sys.B, sys.f, *ref, float(tol), float(tol), float(h_floor),
                        float(escape), int(max_steps), bool(record))
    out, status, s_fail = res[0], res[1], res[2]
    _raise_status(status, s_fail, sign, t0)
    return res if record else out


def _default_escape(sys, t, escape):
    if escape is not None:
        return float(escape)
    return 10.0 * sys.R if t < 0 else np.inf


def flow(sys, v, t, tol=DEFAULT_TOL, escape=None):
    """``Ψ_t(v)``; negative ``t`` integrates the time-reversed field.

    Parameters
    ----------
    sys : QuadraticSystem
    v : array_like of shape (d,)
    t : float
    tol : float
        Relative and absolute local error tolerance of the 5(4) pair.
    escape : float, optional
        Escape radius; defaults to ``10 R`` for ``t < 0`` and to none otherwise.

    Raises
    ------
    Blowup, StepUnderflow
    """
    v = check_vector(v, "v", dim=sys.dim)
    t = float(t)
    if t == 0.0:
        return v.copy()
    sign = 1.0 if t > 0 else -1.0
    out = _run(sys, 0, v, [abs(t)], sign, tol, _default_escape(sys, t, escape))
    return out[-1]


def flow_with_jacobian(sys, v, t, tol=DEFAULT_TOL, escape=None):
    """Return ``(Ψ_t(v), JΨ_t(v))`` by integrating the variational equation."""
    v = check_vector(v, "v", dim=sys.dim)
    d = sys.dim
    t = float(t)
    if t == 0.0:
        return v.copy(), np.eye(d)
    y0 = np.concatenate([v, np.eye(d).ravel()])
    sign = 1.0 if t > 0 else -1.0
    out = _run(sys, 1, y0, [abs(t)], sign, tol, _default_escape(sys, t, escape))
    return out[-1, :d], out[-1, d:].reshape(d, d)


def trajectory(sys, v, times, tol=DEFAULT_TOL, with_jacobian=False, escape=None):
    """Sample the forward solution through ``v`` at ``times`` (``times[0] >= 0``)."""
    v = check_vector(v, "v", dim=sys.dim)
    times = check_vector(times, "times")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ConfigError("times must be nonnegative and strictly increasing")
    d = sys.dim
    esc = np.inf if escape is None else escape
    if with_jacobian:
        y0 = np.concatenate([v, np.eye(d).ravel()])
        out = _run(sys, 1, y0, times, 1.0, tol, esc)
        return Trajectory(times, out[:, :d], out[:, d:].reshape(-1, d, d))
    return Trajectory(times, _run(sys, 0, v, times, 1.0, tol, esc))


def dense_trajectory(sys, v, T, tol=DEFAULT_TOL):
    """Integrate forward to ``T`` and keep the full dense-output table."""
    v = check_vector(v, "v", dim=sys.dim)
    T = check_positive(T, "T")
    res = _run(sys, 0, v, [T], 1.0, tol, np.inf, record=True)
    nrec = res[7]
    return DenseTrajectory(res[3][:nrec].copy(), res[4][:nrec].copy(),
                           res[5][:nrec].copy(), res[6][:nrec].copy(), T)


def perturbation_backward(sys, dense, delta_T, T, s_out=None, tol=DEFAULT_TOL, escape=None):
    """Integrate ``v = u + δ`` backward from ``T`` carrying ``δ`` explicitly.

    Parameters
    ----------
    dense : DenseTrajectory
        Reference solution ``u`` on ``[0, T]``.
    delta_T : array_like of shape (d,)
        Perturbation at time ``T``; may be far below machine epsilon
        relative to ``u(T)``.
    s_out : array_like, optional
        Backward elapsed times at which to report ``δ`` (default ``[T]``,
        i.e. time 0 only).

    Returns
    -------
    ndarray of shape (len(s_out), d)
    """
    delta_T = check_vector(delta_T, "delta_T", dim=sys.dim)
    s_out = np.array([T], dtype=float) if s_out is None else np.asarray(s_out, dtype=float)
    esc = 10.0 * sys.R if escape is None else escape
    ref = (dense.t_start, dense.h, dense.y, dense.q)
    return _run(sys, 2, delta_T, s_out, -1.0, tol, esc, ref=ref, t0=T)


def perturbation_forward(sys, u, delta0, times, tol=DEFAULT_TOL):
    """Jointly integrate ``u`` and ``δ = v - u`` forward; returns ``(U, Δ)`` on ``times``."""
    u = check_vector(u, "u", dim=sys.dim)
    delta0 = check_vector(delta0, "delta0", dim=sys.dim)
    d = sys.dim
    out = _run(sys, 3, np.concatenate([u, delta0]), times, 1.0, tol, np.inf)
    return out[:, :d], out[:, d:]


# ----------------------------------------------------------------------------
# constants


def _bilinear_norm_estimate(B, n_starts, rng, max_iter=500, tol=1e-12):
    """Block-coordinate ascent of ``‖B(u, w)‖`` on the unit bi-sphere."""
    d = B.shape[0]
    best = 0.0
    for _ in range(n_starts):
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        w = rng.standard_normal(d)
        w /= np.linalg.norm(w)
        val = 0.0
        for _ in range(max_iter):
            # maximize over u with w fixed: top singular pair of B(·, w)
            Mw = np.einsum("ijk,k->ij", B, w)
            _, s, vt = np.linalg.svd(Mw)
            u = vt[0]
            Mu = np.einsum("ijk,j->ik", B, u)
            _, s, vt = np.linalg.svd(Mu)
            w = vt[0]
            new = s[0]
            if new - val <= tol * max(new, 1.0):
                val = new
                break
            val = new
        best = max(best, val)
    return best


def system_constants(sys, n_starts=32, seed=0, rigorous=False):
    """A-priori constants ``G, v_max, a_max, C_0, C_der, C_J``.

    Parameters
    ----------
    n_starts : int
        Random starts of the ``‖B‖`` ascent (at least 32 recommended).
    rigorous : bool
        Build the constants from the Frobenius upper bound of ``‖B‖``
        instead of the ascent estimate.

    Examples
    --------
    >>> import numpy as np
    >>> s = QuadraticSystem(np.eye(2), np.zeros((2, 2, 2)), np.zeros(2), 1.0, 0.1)
    >>> c = system_constants(s)
    >>> (c.G, c.v_max, c.a_max)
    (1.0, 1.0, 1.0)
    """
    rng = check_rng(seed)
    nA = float(np.linalg.norm(sys.A, 2))
    nB_est = float(_bilinear_norm_estimate(sys.B, n_starts, rng)) if np.any(sys.B) else 0.0
    nB_up = float(np.sqrt(np.sum(sys.B ** 2)))
    nB = nB_up if rigorous else nB_est
    R = sys.R
    nf = float(np.linalg.norm(sys.f))
    G = nA + 2.0 * nB * R
    v_max = nA * R + nB * R * R + nf
    if nA > 0:
        C_0 = R + nf / nA
        C_der = nA + nB * R + nB * nf / nA
        finite = True
    else:
        C_0 = C_der = math.inf
        finite = False
    return SystemConstants(G=G, v_max=v_max, a_max=G, C_0=C_0, C_der=C_der, C_J=2.0 * C_der,
                           opNormA=nA, opNormB=nB_est, opNormB_upper=nB_up,
                           rigorous=rigorous, finite=finite)


def sample_shell(d, R, delta, n, rng):
    """Uniform samples from the spherical shell ``R <= ‖v‖ <= R + delta``."""
    x = rng.standard_normal((n, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    u = rng.random(n)
    r = (R ** d + u * ((R + delta) ** d - R ** d)) ** (1.0 / d)
    return x * r[:, None]


def sample_ball(d, R, n, rng):
    """Uniform samples from the ball ``‖v‖ <= R``."""
    x = rng.standard_normal((n, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x * (R * rng.random(n) ** (1.0 / d))[:, None]


def check_trapping_ball(sys, n_samples=10_000, seed=0, rel_tol=1e-12):
    """Sample the shell and count points where ``⟨Dv, v⟩ > 0``.

    A sample counts as a violation when the inner product exceeds
    ``rel_tol`` times the sum of magnitudes of its three contributions,
    which absorbs rounding in the exactly-cancelling energy term.
    """
    n_samples = check_int(n_samples, "n_samples", minimum=1)
    rng = check_rng(seed)
    V = sample_shell(sys.dim, sys.R, sys.delta, n_samples, rng)
    lin = -np.einsum("ni,ij,nj->n", V, sys.A, V)
    quad = -np.einsum("ijk,nj,nk,ni->n", sys.B, V, V, V)
    frc = V @ sys.f
    ip = lin + quad + frc
    scale = np.abs(lin) + np.abs(quad) + np.abs(frc)
    viol = int(np.sum(ip > rel_tol * scale))
    return TrappingReport(violations=viol, worst_inner_product=float(ip.max()),
                          n_samples=n_samples)
