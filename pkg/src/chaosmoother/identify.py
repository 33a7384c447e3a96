"""Derivative-based identifiability, explicit recovery and minimax estimation."""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator

from . import _integrator as _ig
from ._simplex import nelder_mead, project_ball
from ._validation import (check_int, check_matrix, check_positive, check_rng, check_vector,
                          spawn_rngs)
from .exceptions import ConfigError, UnidentifiableAtZero
from .models import Lorenz96Params, lorenz96_system, random_system
from .quadode import (DEFAULT_H_FLOOR, DEFAULT_TOL, flow, sample_ball, taylor_derivatives,
                      trajectory)


@dataclass
class DerivativeStack:
    """Observed derivatives ``H D^i v`` and their gradients, ``i = 0..j``."""

    j: int
    values: np.ndarray
    gradients: np.ndarray


@dataclass
class IdentifiabilityResult:
    """Spectrum of ``M_j(u) = Σ_i Σ_k ∇(H D^i u)_k ∇(H D^i u)_k'``.

    ``passed`` applies ``lambda_min > rank_tol * lambda_max`` to the Gram
    matrix of unit-normalized gradient rows (``lambda_min_normalized``),
    which has the same null space as ``M_j`` but does not mix scales
    across derivative orders.
    """

    lambda_min: float
    lambda_max: float
    lambda_min_normalized: float
    passed: bool


def _bil_left(B, w):
    # matrix of x -> B(x, w)
    return np.einsum("ijk,k->ij", B, w)


def _bil_right(B, w):
    # matrix of x -> B(w, x)
    return np.einsum("ijk,j->ik", B, w)


def derivative_stack(sys, H, v, j):
    """Values ``H D^i v`` and gradients ``H J_v(D^i v)`` for ``i = 0..j``.

    The gradients follow the differentiated recursion
    ``J(D^i) = -A J(D^{i-1}) - Σ_m C(i-1, m) [B(·, D^{i-1-m}) J(D^m) + B(D^m, ·) J(D^{i-1-m})]``.

    Returns
    -------
    DerivativeStack
    """
    d = sys.dim
    H = check_matrix(H, "H", shape=(None, d))
    j = check_int(j, "j", minimum=0)
    D = taylor_derivatives(sys, v, j)
    J = np.empty((j + 1, d, d))
    J[0] = np.eye(d)
    left = [_bil_left(sys.B, D[m]) for m in range(j)]
    right = [_bil_right(sys.B, D[m]) for m in range(j)]
    for i in range(1, j + 1):
        acc = -sys.A @ J[i - 1]
        for m in range(i):
            c = math.comb(i - 1, m)
            acc -= c * (left[i - 1 - m] @ J[m] + right[m] @ J[i - 1 - m])
        J[i] = acc
    return DerivativeStack(j, D @ H.T, np.einsum("rd,ide->ire", H, J))


def identifiability_rank(sys, H, u, j, rank_tol=1e-10):
    """Local identifiability test from the first ``j`` observed derivatives.

    Examples
    --------
    >>> import numpy as np
    >>> from chaosmoother.models import lorenz63_system
    >>> identifiability_rank(lorenz63_system(), np.array([[1.0, 0, 0]]), [1, 2, 3], 2).passed
    True
    """
    st = derivative_stack(sys, H, u, j)
    G = st.gradients.reshape(-1, sys.dim)
    M = G.T @ G
    ev = np.linalg.eigvalsh(M)
    norms = np.linalg.norm(G, axis=1)
    keep = norms > 0
    if not np.any(keep):
        return IdentifiabilityResult(float(ev[0]), float(ev[-1]), 0.0, False)
    Gn = G[keep] / norms[keep, None]
    evn = np.linalg.eigvalsh(Gn.T @ Gn)
    passed = bool(evn[0] > rank_tol * evn[-1])
    return IdentifiabilityResult(float(ev[0]), float(ev[-1]), float(evn[0]), passed)


# ----------------------------------------------------------------------------
# explicit recovery


def recover_lorenz63(values, params):
    """Recover ``(v1, v2, v3)`` from ``v1, Dv1, D^2 v1`` for shifted Lorenz 63.

    Uses ``v2 = Dv1 / a + v1`` and ``D^2 v1 = -(a^2 + a) v2 - a v1 v3``.

    Raises
    ------
    UnidentifiableAtZero
        When ``v1 = 0``.
    """
    y = np.asarray(values, dtype=float).reshape(-1)
    if y.size < 3:
        raise ConfigError("need v1, Dv1 and D^2 v1")
    a = params.a
    v1 = y[0]
    v2 = y[1] / a + v1
    if v1 == 0.0:
        raise UnidentifiableAtZero("v3 is not determined when v1 = 0", index=1)
    v3 = -(y[2] + (a * a + a) * v2) / (a * v1)
    return np.array([v1, v2, v3])


def _series_mul(a, b):
    n = min(a.size, b.size)
    return np.array([np.dot(a[:m + 1], b[m::-1]) for m in range(n)])


def _series_div(a, b):
    n = min(a.size, b.size)
    q = np.empty(n)
    for m in range(n):
        q[m] = (a[m] - np.dot(b[1:m + 1], q[m - 1::-1] if m > 0 else q[:0])) / b[0]
    return q


def _series_deriv(a):
    return a[1:] * np.arange(1, a.size)


def recover_lorenz96(values, d, forcing=8.0, refine=2):
    """Recover the full Lorenz 96 state from derivatives of ``u1, u2, u3``.

    Parameters
    ----------
    values : array_like of shape (j + 1, 3)
        ``D^i (u1, u2, u3)`` for ``i = 0..j`` with ``j >= d - 3``.
    d : int
    forcing : float
    refine : int
        Gauss-Newton steps on ``H D^i v = values`` started from the explicit
        solution. The recursion divides by ``u_2, ..., u_{d-1}`` repeatedly
        and loses digits for larger ``d``; the refinement restores them.

    Notes
    -----
    The cyclic equation for component ``c`` gives
    ``u_{c+1} = (D u_c + u_c - F) / u_{c-1} + u_{c-2}``. Each component is
    carried as a truncated Taylor series in time, so one order is spent per
    new component and ``j = d - 3`` orders reach ``u_d``.

    Raises
    ------
    UnidentifiableAtZero
        When a denominator ``u_2, ..., u_{d-1}`` vanishes; ``index`` is its
        1-based position.
    """
    vals = np.asarray(values, dtype=float)
    d = check_int(d, "d", minimum=4)
    if vals.ndim != 2 or vals.shape[1] != 3:
        raise ConfigError("values must have shape (j + 1, 3)")
    j = vals.shape[0] - 1
    if j < d - 3:
        raise ConfigError(f"need j >= d - 3 = {d - 3}, got {j}")
    fact = np.array([math.factorial(i) for i in range(j + 1)], dtype=float)
    series = [vals[:, c] / fact for c in range(3)]
    for c in range(2, d - 1):
        # 0-based c solves for component c + 1
        den = series[c - 1]
        if den[0] == 0.0:
            raise UnidentifiableAtZero(f"u{c} vanishes, u{c + 2} is not determined", index=c)
        num = _series_deriv(series[c]) + series[c][:-1]
        num = num.copy()
        num[0] -= forcing
        nxt = _series_div(num, den[:-1]) + series[c - 2][: num.size]
        series.append(nxt)
    v = np.array([s[0] for s in series[:d]])
    if refine:
        sys = lorenz96_system(Lorenz96Params(d=d, forcing=forcing))
        H = np.eye(d)[:3]
        for _ in range(int(refine)):
            st = derivative_stack(sys, H, v, j)
            step = np.linalg.lstsq(st.gradients.reshape(-1, d), (st.values - vals).ravel(),
                                   rcond=None)[0]
            if not np.all(np.isfinite(step)):
                break
            v = v - step
    return v


# ----------------------------------------------------------------------------
# finite differences


def fd_coefficients(i):
    """Forward-difference weights ``a_l = (-1)^(i-l) C(i, l)`` as fractions.

    The moments ``Σ_l a_l l^m / m!`` are checked to vanish for ``m < i`` and
    to equal one for ``m = i``.

    Examples
    --------
    >>> [int(c) for c in fd_coefficients(2)]
    [1, -2, 1]
    """
    i = check_int(i, "i", minimum=0)
    a = [Fraction((-1) ** (i - l) * math.comb(i, l)) for l in range(i + 1)]
    for m, b in enumerate(fd_moments(a)):
        if b != (1 if m == i else 0):
            raise ArithmeticError(f"moment {m} of order-{i} weights is {b}")
    return a


def fd_moments(a):
    """``b_m = Σ_l a_l l^m / m!`` for ``m = 0..len(a)-1`` in exact arithmetic."""
    return [sum(c * Fraction(l) ** m for l, c in enumerate(a)) / math.factorial(m)
            for m in range(len(a))]


def fd_derivative_estimate(sys, H, v, i, h, tol=1e-12):
    """``Σ_l a_l H Ψ_{l h}(v) / h^i``, an ``O(h)`` estimate of ``H D^i v``."""
    H = check_matrix(H, "H", shape=(None, sys.dim))
    h = check_positive(h, "h")
    a = np.array([float(c) for c in fd_coefficients(i)])
    if i == 0:
        return H @ check_vector(v, "v", dim=sys.dim)
    X = trajectory(sys, v, h * np.arange(i + 1), tol=tol).states
    return (a @ (X @ H.T)) / h ** i


def observed_derivatives_from_data(Y, h, j, window=None):
    """Least-squares polynomial estimate of ``H D^i u`` at ``t = 0``, ``i <= j``.

    Fits a polynomial of degree ``j + 2`` to the first ``window``
    observations (default ``3 (j + 2) + 1``) and differentiates it at 0.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    deg = j + 2
    m = min(Y.shape[0], window or 3 * deg + 1)
    deg = min(deg, m - 1)
    t = h * np.arange(m)
    scale = max(t[-1], h)
    V = np.vander(t / scale, deg + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, Y[:m], rcond=None)
    out = np.zeros((j + 1, Y.shape[1]))
    for i in range(min(j, deg) + 1):
        out[i] = coef[i] * math.factorial(i) / scale ** i
    return out


def derivative_match(sys, H, targets, x0, R=None):
    """Solve ``H D^i v ≈ targets[i]`` in the least-squares sense from ``x0``.

    Residuals of order ``i`` are divided by ``1 + max|targets[i]|`` so that
    high orders do not dominate.

    Returns
    -------
    v : ndarray of shape (d,)
    cost : float
    """
    targets = np.asarray(targets, dtype=float)
    j = targets.shape[0] - 1
    w = 1.0 / (1.0 + np.abs(targets).max(axis=1))

    def res(v):
        st = derivative_stack(sys, H, v, j)
        return ((st.values - targets) * w[:, None]).ravel()

    def jac(v):
        st = derivative_stack(sys, H, v, j)
        return (st.gradients * w[:, None, None]).reshape(-1, sys.dim)

    sol = least_squares(res, np.asarray(x0, dtype=float), jac=jac, method="lm",
                        xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=200)
    v = sol.x if R is None else project_ball(sol.x, R)
    return v, float(np.sum(res(v) ** 2))


# ----------------------------------------------------------------------------
# minimax estimation


@dataclass
class MinimaxResult:
    u_min: np.ndarray
    emax: float
    starts_used: int
    converged: bool
    emax_truth: float = None
    n_eval: int = 0
    start_values: np.ndarray = field(default=None, repr=False)


def emax(sys, H, times, Y, v, tol=DEFAULT_TOL):
    """``E_max(v) = max_i ‖H Ψ_{t_i}(v) − Y_i‖_2`` (``inf`` if the flow fails)."""
    H = np.ascontiguousarray(check_matrix(H, "H", shape=(None, sys.dim)))
    Y = np.ascontiguousarray(np.asarray(Y, dtype=float).reshape(len(times), H.shape[0]))
    return float(_ig.emax_objective(np.ascontiguousarray(v, dtype=float), sys.A, sys.B, sys.f,
                                    H, np.ascontiguousarray(times, dtype=float), Y, tol, tol,
                                    DEFAULT_H_FLOOR, 2_000_000))


class MinimaxEstimator(BaseEstimator):
    """Initial-condition estimator ``u_min = argmin_{v ∈ B_R} E_max(v)``.

    The search is a multi-start projected Nelder-Mead in two stages: every
    start gets a short run at a loose integration tolerance, then the
    ``n_polish`` best distinct candidates are refined at ``tol``.

    Parameters
    ----------
    system : QuadraticSystem
    H : array_like of shape (d_o, d)
    h : float
        Observation spacing; observations sit at ``t_i = i h``.
    n_starts : int
        Uniform random starts in ``B_R``; the prior mean (origin) is added.
    data_start : bool
        Add a start obtained by matching polynomial estimates of the observed
        derivatives at ``t = 0`` (see :func:`derivative_match`).
    radius : float, optional
        Search radius, defaults to ``system.R``.
    max_iter : int
        Iteration budget of each polishing run.
    coarse_iter : int
        Iteration budget of each first-stage run.
    coarse_tol : float
        Integration tolerance in the first stage.
    n_polish : int
    tol : float
        Integration tolerance of the final objective.
    xtol : float
        Simplex-size convergence threshold of the polishing runs.
    random_state : int or Generator

    Attributes
    ----------
    u_min_ : ndarray of shape (d,)
    emax_ : float
    converged_ : bool
    starts_used_ : int
    n_eval_ : int
    """

    def __init__(self, system=None, H=None, h=0.05, n_starts=32, data_start=True, radius=None,
                 max_iter=2000, coarse_iter=40, coarse_tol=1e-6, n_polish=2,
                 tol=DEFAULT_TOL, xtol=1e-9, random_state=0):
        self.system = system
        self.H = H
        self.h = h
        self.n_starts = n_starts
        self.data_start = data_start
        self.radius = radius
        self.max_iter = max_iter
        self.coarse_iter = coarse_iter
        self.coarse_tol = coarse_tol
        self.n_polish = n_polish
        self.tol = tol
        self.xtol = xtol
        self.random_state = random_state

    def _objective(self, Y, tol):
        sys = self.system
        H = self._H
        times = self._times
        A, B, f = sys.A, sys.B, sys.f

        def fun(v):
            return _ig.emax_objective(v, A, B, f, H, times, Y, tol, tol, DEFAULT_H_FLOOR,
                                      2_000_000)
        return fun

    def _data_starts(self, Y, R):
        sys = self.system
        d_o = self._H.shape[0]
        j = max(1, math.ceil(sys.dim / d_o) - 1)
        targets = observed_derivatives_from_data(Y, self.h, j)
        best, cost = None, np.inf
        for x0 in (np.zeros(sys.dim), np.linalg.pinv(self._H) @ Y[0]):
            try:
                v, c = derivative_match(sys, self._H, targets, x0, R)
            except (ValueError, np.linalg.LinAlgError, FloatingPointError):
                continue
            if np.all(np.isfinite(v)) and c < cost:
                best, cost = v, c
        return [] if best is None else [best]

    def fit(self, Y, y=None):
        """Estimate the initial condition from observations ``Y`` of shape (k + 1, d_o)."""
        sys = self.system
        if sys is None:
            raise ConfigError("MinimaxEstimator needs a system")
        d = sys.dim
        self._H = np.ascontiguousarray(check_matrix(self.H if self.H is not None else np.eye(d),
                                                    "H", shape=(None, d)))
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        Y = np.ascontiguousarray(check_matrix(Y, "Y", shape=(None, self._H.shape[0])))
        h = check_positive(self.h, "h")
        self._times = h * np.arange(Y.shape[0])
        R = sys.R if self.radius is None else check_positive(self.radius, "radius")
        rng = check_rng(self.random_state)

        starts = [np.zeros(d)]
        if self.data_start:
            starts += self._data_starts(Y, R)
        n_starts = check_int(self.n_starts, "n_starts", minimum=0)
        if n_starts:
            starts += list(sample_ball(d, R, n_starts, rng))

        coarse = self._objective(Y, self.coarse_tol)
        fine = self._objective(Y, self.tol)
        n_eval = 0
        stage1 = []
        for x0 in starts:
            r = nelder_mead(coarse, x0, R, 0.05 * R, max_iter=self.coarse_iter, max_restarts=0)
            n_eval += r.n_eval
            stage1.append(r)
        order = sorted(range(len(stage1)), key=lambda i: (stage1[i].fun, i))
        picked = []
        for i in order:
            x = stage1[i].x
            if all(np.linalg.norm(x - stage1[p].x) > 1e-6 * (1 + np.linalg.norm(x))
                   for p in picked):
                picked.append(i)
            if len(picked) >= self.n_polish:
                break
        best = None
        for i in picked:
            r0 = stage1[i]
            step = min(0.05 * R, max(1e-4, 0.1 * np.sqrt(max(r0.fun, 0.0))))
            r = nelder_mead(fine, r0.x, R, step, max_iter=self.max_iter, xtol=self.xtol,
                            ftol=1e-12)
            n_eval += r.n_eval
            if best is None or r.fun < best.fun:
                best = r
        self.u_min_ = best.x
        self.emax_ = float(best.fun)
        self.converged_ = bool(best.converged and np.isfinite(best.fun))
        self.starts_used_ = len(starts)
        self.n_eval_ = n_eval
        self.start_values_ = np.array([r.fun for r in stage1])
        return self

    def predict(self, t):
        """Push the estimate forward: ``Ψ_t(u_min)`` for each requested time."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.array([flow(self.system, self.u_min_, ti, tol=self.tol) for ti in t])

    def score(self, Y, y=None):
        """Negative ``E_max`` of the fitted estimate on observations ``Y``."""
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        times = check_positive(self.h, "h") * np.arange(Y.shape[0])
        return -emax(self.system, self._H, times, Y, self.u_min_, tol=self.tol)


def minimax_estimate(sys, rec, n_starts=32, max_iter=2000, tol=DEFAULT_TOL, radius=None,
                     seed=0, truth=None, **kwargs):
    """Functional front end of :class:`MinimaxEstimator` for an ``ObsRecord``.

    When ``truth`` is given its ``E_max`` is stored for validation.
    """
    est = MinimaxEstimator(system=sys, H=rec.setup.H, h=rec.setup.h, n_starts=n_starts,
                           max_iter=max_iter, tol=tol, radius=radius, random_state=seed,
                           **kwargs).fit(rec.Y)
    res = MinimaxResult(est.u_min_, est.emax_, est.starts_used_, est.converged_,
                        n_eval=est.n_eval_, start_values=est.start_values_)
    if truth is not None:
        res.emax_truth = emax(sys, rec.setup.H, rec.setup.times, rec.Y, truth, tol=tol)
    return res


def pushforward_estimate(sys, result, t_k, tol=DEFAULT_TOL):
    """``Ψ_{t_k}(u_min)``, the estimate of the current state."""
    return flow(sys, result.u_min, t_k, tol=tol)


def c_proxy(sys, H, u, times, n_samples=200, scale=1e-3, seed=0, tol=DEFAULT_TOL):
    """Empirical proxy ``min_v max_i ‖H Ψ_{t_i}(v) − H Ψ_{t_i}(u)‖ / ‖v − u‖``.

    Samples ``v`` on the sphere of radius ``scale`` around ``u``; an estimate,
    not a bound.
    """
    rng = check_rng(seed)
    H = check_matrix(H, "H", shape=(None, sys.dim))
    base = trajectory(sys, u, times, tol=tol).states @ H.T
    best = np.inf
    for _ in range(n_samples):
        w = rng.standard_normal(sys.dim)
        w *= scale / np.linalg.norm(w)
        obs = trajectory(sys, np.asarray(u) + w, times, tol=tol).states @ H.T
        best = min(best, np.max(np.linalg.norm(obs - base, axis=1)) / scale)
    return best


def mse_sweep(sys, u, H, h, k, sigmas, n_seeds, seed=0, estimator_params=None):
    """Gaussian-noise Monte Carlo of ``‖u_min − u‖²`` for each noise level.

    Returns
    -------
    list of dict
        One row per sigma with keys ``sigma, mse, ratio, worse_than_truth``;
        ``ratio = mse / sigma^2`` and ``worse_than_truth`` counts seeds with
        ``E_max(u_min) > E_max(u)``.
    """
    H = check_matrix(H, "H", shape=(None, sys.dim))
    times = h * np.arange(k + 1)
    clean = trajectory(sys, u, times).states @ H.T
    params = dict(estimator_params or {})
    rows = []
    for si, sigma in enumerate(sigmas):
        rngs = spawn_rngs(np.random.SeedSequence([seed, si]), n_seeds)
        err2 = []
        worse = 0
        for r in rngs:
            Y = clean + sigma * r.standard_normal(clean.shape)
            est = MinimaxEstimator(system=sys, H=H, h=h, random_state=r, **params).fit(Y)
            err2.append(float(np.sum((est.u_min_ - u) ** 2)))
            if est.emax_ > emax(sys, H, times, Y, u, tol=est.tol):
                worse += 1
        mse = math.fsum(err2) / len(err2)
        rows.append({"sigma": float(sigma), "mse": mse, "ratio": mse / sigma ** 2,
                     "worse_than_truth": worse, "n_seeds": n_seeds})
    return rows


# ----------------------------------------------------------------------------
# random coefficients


def random_coefficient_experiment(d, j, n_trials, seed=0, n_probe=4, rank_tol=1e-10):
    """Identifiability rate of random systems observed through the first coordinate.

    Parameters
    ----------
    d, j : int
    n_trials : int
    seed : int
        Trial ``i`` uses ``random_system(d, seed=seed + i)``.
    n_probe : int
        Random restarts of the derivative-matching root search per trial; a
        second solution inside ``B_R`` with tiny residual is reported as a
        possible uniqueness failure (evidence, not proof).

    Returns
    -------
    dict
        ``pass_count``, ``failures`` (trial seeds failing the rank test) and
        ``duplicates`` (trial seeds with a distinct near-solution).
    """
    n_trials = check_int(n_trials, "n_trials", minimum=0)
    H = np.zeros((1, d))
    H[0, 0] = 1.0
    passes, failures, dups = 0, [], []
    for i in range(n_trials):
        s = seed + i
        sys, u = random_system(d, seed=s)
        r = identifiability_rank(sys, H, u, j, rank_tol=rank_tol)
        if r.passed:
            passes += 1
        else:
            failures.append(s)
        if n_probe and r.passed:
            targets = derivative_stack(sys, H, u, j).values
            rng = check_rng(np.random.SeedSequence([seed, i, 1]))
            for x0 in sample_ball(d, sys.R, n_probe, rng):
                try:
                    v, cost = derivative_match(sys, H, targets, x0)
                except (ValueError, np.linalg.LinAlgError):
                    continue
                if (cost < 1e-20 and np.linalg.norm(v) <= sys.R
                        and np.linalg.norm(v - u) > 1e-6 * (1 + np.linalg.norm(u))):
                    dups.append(s)
                    break
    return {"d": d, "j": j, "n_trials": n_trials, "pass_count": passes,
            "failures": failures, "duplicates": dups}
