"""Leaf and anti-leaf constructions for general systems, and support-limit experiments."""

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from ._validation import check_int, check_positive, check_rng, check_vector, spawn_rngs
from .exceptions import (Blowup, ConfigError, ConvergenceError, DegenerateInputError,
                         NoPredecessor, StepUnderflow)
from .geo import GeoParams, geo_flow, geo_point, geo_trajectory, leaf_set_geo
from .observe import DistanceProfile, distance_profile
from .quadode import (DEFAULT_TOL, dense_trajectory, flow_with_jacobian, perturbation_backward,
                      perturbation_forward)

# the perturbation radii used in the reference experiments (sup-norm ball at time T)
LORENZ63_RADIUS = 1e-31
LORENZ96_RADIUS = 1e-62


@dataclass(frozen=True)
class Provenance:
    """How a sample was produced: ``kind`` is one of ``backward``, ``singular``, ``geo``."""

    kind: str
    params: dict = field(default_factory=dict)


@dataclass
class LeafSample:
    """A candidate ``v0 = u + delta0`` with its distance summaries.

    ``v0`` is rounded to float64; ``delta0`` keeps the offset exactly as
    computed, which matters when it is below the resolution of ``u``.
    """

    v0: np.ndarray
    delta0: np.ndarray
    offset: float
    I1: float = math.nan
    I2: float = math.nan
    profile: DistanceProfile = None
    provenance: Provenance = None

    @property
    def offset_l1(self):
        return float(np.abs(self.delta0).sum())

    @property
    def offset_l2sq(self):
        return float(np.dot(self.delta0, self.delta0))


@dataclass
class LeafSet:
    """Samples from :func:`construct_leaf_backward` plus what was dropped."""

    samples: list
    n_dropped: int
    T: float
    radius: float
    meta: dict = field(default_factory=dict)


@dataclass
class LeafFit:
    slope: float
    r2: float
    sup_ratio: float
    d_max: float


@dataclass(frozen=True)
class CroppedLeafSpec:
    """Candidate design for the support-limit experiment.

    Parameters
    ----------
    epsilon : float
        Noise level; leaf points are kept while their trajectory stays in a
        ``2 epsilon`` tube.
    t_max : float
        Largest time shift of the shifted leaf set ``W``.
    n_leaf : int
        Leaf grid size.
    n_shift : int
        Number of positive (and as many negative) shifts in ``(0, t_max]``.
    n_ambient : int
        Random points near ``u`` on the attractor.
    ambient_scale : float
        Half-width, in units of ``epsilon``, of the box the ambient
        candidates are drawn from.
    """

    epsilon: float
    t_max: float
    n_leaf: int = 201
    n_shift: int = 4
    n_ambient: int = 200
    ambient_scale: float = 4.0

    def __post_init__(self):
        check_positive(self.epsilon, "epsilon")
        check_positive(self.t_max, "t_max")
        check_int(self.n_leaf, "n_leaf", minimum=3)
        check_int(self.n_shift, "n_shift", minimum=0)
        check_int(self.n_ambient, "n_ambient", minimum=0)

    @staticmethod
    def t_max_bound(v_min, a_max, v_max):
        """Largest admissible ``t_max``: ``v_min / (6 a_max v_max)``."""
        return v_min / (6.0 * a_max * v_max)

    def admissible(self, v_min, a_max, v_max):
        return self.t_max < self.t_max_bound(v_min, a_max, v_max)


@dataclass
class SupportLimitResult:
    """Envelope of ``sup_{v in S_k} d(v, U(u, eps))`` over candidates, per ``k``.

    ``first_exclusion`` maps each shift magnitude to the median first ``k``
    at which no candidate with that shift or larger is still in the support
    (``-1`` if that never happened within the grid).
    """

    k: np.ndarray
    envelope: np.ndarray
    per_seed: np.ndarray
    leaf_inclusion: np.ndarray
    first_exclusion: dict
    n_skipped: int = 0

    def rows(self):
        return [{"k": int(k), "envelope": float(e)} for k, e in zip(self.k, self.envelope)]


# ----------------------------------------------------------------------------
# backward leaf construction


def construct_leaf_backward(sys, u, T=5.0, n=100, radius=None, tol=DEFAULT_TOL, seed=0,
                            with_integrals=True):
    """Sample the stable leaf through ``u`` by running perturbed endpoints backward.

    ``u`` is integrated to ``T``; ``n`` points are drawn uniformly from the
    sup-norm ball of ``radius`` around ``u(T)`` and flowed back to time 0.
    The offsets are carried as explicit perturbations of the stored forward
    solution, so ``radius`` may lie far below the float64 spacing of ``u(T)``.

    Parameters
    ----------
    sys : QuadraticSystem
    u : array_like of shape (d,)
    T : float
    n : int
    radius : float, optional
        Defaults to ``1e-31`` for ``d <= 3`` and ``1e-62`` otherwise.
    tol : float
    seed : int or Generator
    with_integrals : bool
        Also compute ``I1`` and ``I2`` for each sample.

    Returns
    -------
    LeafSet
        Samples sorted by L1 offset; blow-ups are dropped and counted.
    """
    u = check_vector(u, "u", dim=sys.dim)
    T = check_positive(T, "T")
    n = check_int(n, "n", minimum=1)
    if radius is None:
        radius = LORENZ63_RADIUS if sys.dim <= 3 else LORENZ96_RADIUS
    radius = check_positive(radius, "radius", strict=False)
    rng = check_rng(seed)
    dense = dense_trajectory(sys, u, T, tol)
    prov = Provenance("backward", {"T": T, "radius": radius})
    samples, dropped = [], 0
    for _ in range(n):
        dT = radius * rng.uniform(-1.0, 1.0, size=sys.dim)
        if radius == 0.0:
            d0 = np.zeros(sys.dim)
        else:
            try:
                d0 = perturbation_backward(sys, dense, dT, T, tol=tol)[-1]
            except (Blowup, StepUnderflow):
                dropped += 1
                continue
        s = LeafSample(u + d0, d0, float(np.abs(d0).sum()), provenance=prov)
        if with_integrals:
            s.I1, s.I2 = leaf_integrals(sys, u, T=T, delta0=d0, tol=tol)
        samples.append(s)
    samples.sort(key=lambda s: s.offset)
    return LeafSet(samples, dropped, T, radius, {"u": u.tolist(), "tol": tol})


def leaf_integrals(sys, u, v0=None, T=5.0, tol=DEFAULT_TOL, delta0=None, rel=1e-8,
                   m0=6, m_max=16):
    """``(∫_0^T ‖v − u‖_1 ds, ∫_0^T ‖v − u‖_2^2 ds)`` by composite Simpson with doubling.

    Either ``v0`` or ``delta0 = v0 − u`` must be given. The difference is
    integrated as its own variable, so offsets below float64 resolution of
    ``u`` are handled.
    """
    u = check_vector(u, "u", dim=sys.dim)
    if delta0 is None:
        if v0 is None:
            raise ConfigError("pass v0 or delta0")
        delta0 = check_vector(v0, "v0", dim=sys.dim) - u
    delta0 = np.asarray(delta0, dtype=float)
    if not np.any(delta0):
        return 0.0, 0.0
    prev = None
    for m in range(m0, m_max + 1):
        times = np.linspace(0.0, T, 2 ** m + 1)
        _, D = perturbation_forward(sys, u, delta0, times, tol)
        cur = np.array([_simpson_abs(D, T), _simpson((D ** 2).sum(axis=1), T)])
        if prev is not None and np.all(np.abs(cur - prev) <= rel * np.abs(cur)):
            return float(cur[0]), float(cur[1])
        prev = cur
    raise ConvergenceError(f"Simpson quadrature did not reach rel {rel} with 2^{m_max} panels")


def _simpson(y, T):
    n = y.size - 1
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(T / (3.0 * n) * np.dot(w, y))


def _simpson_abs(D, T):
    """Simpson rule for ``Σ_j ∫ |D_j|``; panels where a component changes sign
    fall back to the piecewise-linear rule split at the interpolated root."""
    n = D.shape[0] - 1
    dt = T / n
    a, m, b = D[0:-1:2], D[1::2], D[2::2]
    simpson = dt / 3.0 * (np.abs(a) + 4.0 * np.abs(m) + np.abs(b))
    crossing = (np.sign(a) * np.sign(m) < 0) | (np.sign(m) * np.sign(b) < 0)
    if np.any(crossing):
        simpson = np.where(crossing, _lin_abs(a, m, dt) + _lin_abs(m, b, dt), simpson)
    return math.fsum(simpson.ravel())


def _lin_abs(a, b, dt):
    # exact integral of |linear interpolant| between values a and b
    same = np.sign(a) * np.sign(b) >= 0
    denom = np.where(same, 1.0, np.abs(a) + np.abs(b))
    return np.where(same, 0.5 * dt * (np.abs(a) + np.abs(b)), 0.5 * dt * (a * a + b * b) / denom)


# ----------------------------------------------------------------------------
# fits


def _fit_through_origin(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3 or np.unique(x).size < 3:
        raise DegenerateInputError("need at least 3 samples with distinct offsets")
    if not np.any(x):
        raise DegenerateInputError("all offsets are zero")
    slope = float(np.dot(x, y) / np.dot(x, x))
    res = y - slope * x
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.dot(res, res)) / sst if sst > 0 else 1.0
    pos = x > 0
    sup_ratio = float(np.max(y[pos] / (slope * x[pos]))) if slope > 0 else math.inf
    return LeafFit(slope, r2, sup_ratio, float(x.max()))


def fit_leaf_constants(samples, norm="L1"):
    """Through-origin slope of ``I`` against the initial offset.

    Parameters
    ----------
    samples : list of LeafSample
    norm : {"L1", "L2sq"}
        ``I1`` against ``‖delta0‖_1`` or ``I2`` against ``‖delta0‖_2^2``.

    Returns
    -------
    LeafFit
        ``slope`` is the empirical leaf constant, ``r2`` the centered
        coefficient of determination, ``sup_ratio`` the largest
        ``I / (slope offset)`` and ``d_max`` the largest offset.

    Examples
    --------
    >>> import numpy as np
    >>> s = [LeafSample(np.zeros(1), np.array([x]), x, I1=2 * x) for x in (1.0, 2.0, 3.0)]
    >>> fit_leaf_constants(s).slope
    2.0
    """
    if norm == "L1":
        x = [s.offset_l1 for s in samples]
        y = [s.I1 for s in samples]
    elif norm == "L2sq":
        x = [s.offset_l2sq for s in samples]
        y = [s.I2 for s in samples]
    else:
        raise ConfigError("norm must be 'L1' or 'L2sq'")
    return _fit_through_origin(x, y)


class LeafConstantRegressor(RegressorMixin, BaseEstimator):
    """Through-origin linear fit of integrated distance against initial offset.

    Parameters
    ----------
    violation_tol : float
        Relative slack used by :meth:`violations`.

    Attributes
    ----------
    coef_ : float
    r2_ : float
    sup_ratio_ : float
    d_max_ : float
    """

    def __init__(self, violation_tol=1e-6):
        self.violation_tol = violation_tol

    def fit(self, X, y):
        X = np.asarray(X, dtype=float).reshape(-1)
        fit = _fit_through_origin(X, y)
        self.coef_, self.r2_, self.sup_ratio_, self.d_max_ = (fit.slope, fit.r2, fit.sup_ratio,
                                                              fit.d_max)
        return self

    def predict(self, X):
        return self.coef_ * np.asarray(X, dtype=float).reshape(-1)

    def violations(self, X, y, coef=None):
        """Count samples with ``y > coef X (1 + violation_tol)``; ``coef`` defaults to the sup ratio."""
        c = self.coef_ * self.sup_ratio_ if coef is None else coef
        X = np.asarray(X, dtype=float).reshape(-1)
        return int(np.sum(np.asarray(y) > c * X * (1.0 + self.violation_tol)))


# ----------------------------------------------------------------------------
# anti-leaf direction and profile


def antileaf_direction(sys, u, t_k, tol=DEFAULT_TOL, method="singular", power_tol=1e-10,
                       max_iter=10_000):
    """Unit direction of largest growth of ``JΨ_{t_k}(u)``.

    ``method="singular"`` runs power iteration on ``JᵀJ`` (leading right
    singular vector); ``method="eigen"`` returns the real part of the
    eigenvector of ``J`` with largest modulus eigenvalue. ``t_k = 0`` returns
    ``e1``. The sign is fixed so the largest-magnitude entry is positive.
    """
    u = check_vector(u, "u", dim=sys.dim)
    if t_k == 0:
        e = np.zeros(sys.dim)
        e[0] = 1.0
        return e
    _, J = flow_with_jacobian(sys, u, t_k, tol)
    if method == "eigen":
        vals, vecs = np.linalg.eig(J)
        w = np.real(vecs[:, int(np.argmax(np.abs(vals)))])
    elif method == "singular":
        w = _power_iteration(J.T @ J, power_tol, max_iter)
    else:
        raise ConfigError("method must be 'singular' or 'eigen'")
    w = w / np.linalg.norm(w)
    return w if w[np.argmax(np.abs(w))] > 0 else -w


def _power_iteration(M, tol, max_iter):
    M = M / np.abs(M).max()
    w = np.ones(M.shape[0]) / math.sqrt(M.shape[0])
    for _ in range(max_iter):
        z = M @ w
        nz = np.linalg.norm(z)
        if nz == 0:
            # start was orthogonal to the range; rotate it
            w = np.roll(w, 1) + 1e-3
            w /= np.linalg.norm(w)
            continue
        z /= nz
        if z @ w < 0:
            z = -z
        if np.linalg.norm(z - w) <= tol:
            return z
        w = z
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


@dataclass
class AntiLeafRow:
    tk: float
    C_hat: float
    C_hat_sum: float
    dmax_hat: float
    linear_ok: bool
    seg_len: float
    n_linear: int
    direction: np.ndarray = field(repr=False)
    endpoint: np.ndarray = field(repr=False)
    integral: np.ndarray = field(repr=False)

    def as_dict(self):
        return {"tk": self.tk, "C_hat": self.C_hat, "dmax_hat": self.dmax_hat,
                "linear_ok": self.linear_ok, "C_hat_sum": self.C_hat_sum,
                "seg_len": self.seg_len}


def _segment_measures(sys, u, w, s, t_k, tol):
    d0 = s * w
    I1, _ = leaf_integrals(sys, u, T=t_k, delta0=d0, tol=tol)
    _, D = perturbation_forward(sys, u, d0, np.array([0.0, t_k]), tol)
    return I1, float(np.abs(D[-1]).sum())


def antileaf_profile(sys, u, tk_grid, segment_steps=20, seg_len=None, h=None, tol=DEFAULT_TOL,
                     target=2.0, linear_tol=0.1, method="singular"):
    """Anti-leaf constant along a segment in the direction of largest growth.

    For each ``t_k`` the points ``u + s w``, ``s = seg_len j / segment_steps``,
    are flowed to ``t_k``; ``Ĉ`` is the through-origin slope of
    ``∫_0^{t_k} ‖v − u‖_1`` against ``‖v(t_k) − u(t_k)‖_1`` over the points
    whose ratio stays within ``linear_tol`` of the innermost one.

    Parameters
    ----------
    sys : QuadraticSystem
    u : array_like of shape (d,)
    tk_grid : array_like
    segment_steps : int
    seg_len : float, optional
        Segment length; by default chosen so the outermost endpoint distance
        is about ``target`` under the linearization.
    h : float, optional
        Observation step; when given ``C_hat_sum = C_hat / h`` approximates
        the constant for the Riemann sum ``D1``.

    Returns
    -------
    list of AntiLeafRow
    """
    u = check_vector(u, "u", dim=sys.dim)
    rows = []
    for tk in np.asarray(tk_grid, dtype=float):
        tk = check_positive(float(tk), "t_k")
        w = antileaf_direction(sys, u, tk, tol, method=method)
        if seg_len is None:
            _, J = flow_with_jacobian(sys, u, tk, tol)
            L = target / max(float(np.abs(J @ w).sum()), 1e-300)
        else:
            L = float(seg_len)
        for _ in range(6):
            try:
                s_vals = L * np.arange(1, segment_steps + 1) / segment_steps
                meas = np.array([_segment_measures(sys, u, w, s, tk, tol) for s in s_vals])
                break
            except (Blowup, StepUnderflow):
                L *= 0.5
        else:
            raise Blowup(f"segment blew up after 5 shrinks at t_k = {tk}")
        I1, E = meas[:, 0], meas[:, 1]
        ratio = I1 / E
        ok = np.abs(ratio - ratio[0]) <= linear_tol * abs(ratio[0])
        n_lin = int(np.argmin(ok)) if not ok.all() else ok.size
        n_lin = max(n_lin, 1)
        x, y = E[:n_lin], I1[:n_lin]
        C = float(np.dot(x, y) / np.dot(x, x))
        rows.append(AntiLeafRow(tk, C, C / h if h else math.nan, float(E[n_lin - 1]),
                                bool(ok.all()), L, n_lin, w, E, I1))
    return rows


# ----------------------------------------------------------------------------
# geometric model: leaf samples and the support limit


def geo_leaf_samples(u, offsets, times, params=GeoParams()):
    """Exact leaf points of the geometric model with their distance profiles.

    ``offsets`` are ``v2 − u2`` values (clipped to the leaf segment). The
    returned ``I1`` is the Riemann proxy ``h D1`` with ``h`` the spacing of
    ``times``.
    """
    seg = leaf_set_geo(u, params)
    times = np.asarray(times, dtype=float)
    h = float(times[1] - times[0]) if times.size > 1 else 1.0
    U = geo_trajectory(u, times, params)
    from .observe import ObsSetup

    setup = ObsSetup(np.eye(3), h, times.size - 1)
    prov = Provenance("geo", {"n_times": int(times.size)})
    out = []
    for o in np.clip(np.asarray(offsets, dtype=float), seg.offset_min, seg.offset_max):
        if o == 0.0:
            continue
        p = seg.point(float(o))
        V = geo_trajectory(p, times, params)
        prof = distance_profile(U, V, setup)
        d0 = np.asarray(p.ambient) - np.asarray(u.ambient)
        out.append(LeafSample(np.asarray(p.ambient), d0, float(np.abs(d0).sum()),
                              I1=h * prof.D1, I2=h * prof.D2, profile=prof, provenance=prov))
    return out


def _geo_obs(p, setup, params):
    return geo_trajectory(p, setup.times, params) @ setup.H.T


def characterize_support_limit(params, u, spec, setup, n_seeds=200, k_grid=None, seed=0):
    """Decay of the largest distance from the support to the cropped leaf set.

    Candidates are leaf points inside the ``2 eps`` tube (``U(u, eps)``),
    their flow-shifts by ``±s`` for ``s`` in ``(0, t_max]`` (``W``) and random
    attractor points near ``u``. For every noise draw the support at ``k`` is
    the set of candidates whose first ``k + 1`` residuals lie within ``eps``;
    these sets are nested, so the envelope is non-increasing in ``k``.

    Parameters
    ----------
    params : GeoParams
    u : GeoPoint
    spec : CroppedLeafSpec
    setup : ObsSetup
        Uniform noise with ``H = I``; ``setup.eps`` must equal ``spec.epsilon``.
    n_seeds : int
    k_grid : array_like of int, optional
        Defaults to ``0..setup.k``.

    Returns
    -------
    SupportLimitResult
    """
    if not isinstance(params, GeoParams):
        raise ConfigError("characterize_support_limit is implemented for the geometric model")
    if setup.noise != "uniform" or not np.array_equal(setup.H, np.eye(3)):
        raise ConfigError("the support characterization needs uniform noise and H = I")
    if not math.isclose(setup.eps, spec.epsilon):
        raise ConfigError("setup.eps and spec.epsilon differ")
    eps = spec.epsilon
    k_grid = np.arange(setup.k + 1) if k_grid is None else np.asarray(k_grid, dtype=int)
    if k_grid.min() < 0 or k_grid.max() > setup.k:
        raise ConfigError("k_grid must lie in 0..setup.k")

    # cropped leaf set: offsets whose whole observed trajectory stays in the 2 eps tube
    seg = leaf_set_geo(u, params)
    reach = min(2.0 * eps, seg.offset_max, -seg.offset_min)
    offsets = np.linspace(-reach, reach, spec.n_leaf)
    HU = _geo_obs(u, setup, params)
    leaf_pts, leaf_HX = [], []
    for o in offsets:
        p = u if o == 0.0 else seg.point(float(o))
        hx = _geo_obs(p, setup, params)
        if np.max(np.abs(hx - HU)) < 2.0 * eps:
            leaf_pts.append(p)
            leaf_HX.append(hx)
    leaf_amb = np.array([p.ambient for p in leaf_pts])

    cands, shift, kind = [], [], []
    for p, hx in zip(leaf_pts, leaf_HX):
        cands.append(hx)
        shift.append(0.0)
        kind.append(0)
    amb = [p.ambient for p in leaf_pts]
    n_skipped = 0
    s_vals = spec.t_max * np.arange(1, spec.n_shift + 1) / max(spec.n_shift, 1)
    for s in s_vals:
        for sg in (1.0, -1.0):
            for p in leaf_pts[:: max(1, len(leaf_pts) // 25)]:
                try:
                    q = geo_flow(p, sg * s, params)
                except NoPredecessor:
                    # the backward shift leaves the attractor; no such candidate exists
                    n_skipped += 1
                    continue
                cands.append(_geo_obs(q, setup, params))
                amb.append(q.ambient)
                shift.append(s)
                kind.append(1)
    rng = check_rng(seed)
    for _ in range(spec.n_ambient):
        d1, d2 = spec.ambient_scale * eps * rng.uniform(-1.0, 1.0, size=2)
        o1 = min(max(u.o1 + d1, -1.0 + 1e-9), 1.0 - 1e-9)
        o2 = min(max(u.o2 + d2, -0.5), 0.5)
        if o1 == 0.0:
            continue
        q = geo_point(o1, o2, u.elapsed, params)
        cands.append(_geo_obs(q, setup, params))
        amb.append(q.ambient)
        shift.append(math.nan)
        kind.append(2)
    HX = np.array(cands)
    amb = np.array(amb, dtype=float)
    shift = np.array(shift)
    kind = np.array(kind)
    # distance to the cropped leaf set (sup norm, nearest grid point)
    dist = np.abs(amb[:, None, :] - leaf_amb[None, :, :]).max(axis=2).min(axis=1)
    dist[kind == 0] = 0.0

    per_seed = np.empty((n_seeds, k_grid.size))
    leaf_inc = np.empty((n_seeds, k_grid.size))
    first = {float(s): [] for s in s_vals}
    for j, r in enumerate(spawn_rngs(np.random.SeedSequence(seed), n_seeds)):
        Y = HU + eps * r.uniform(-1.0, 1.0, size=HU.shape)
        ok = np.all(np.abs(HX - Y[None]) <= eps, axis=2)
        alive = np.logical_and.accumulate(ok, axis=1)
        A = alive[:, k_grid]
        per_seed[j] = np.where(A, dist[:, None], 0.0).max(axis=0)
        leaf_inc[j] = A[kind == 0].mean(axis=0)
        for s in s_vals:
            sel = (kind == 1) & (shift >= s - 1e-15)
            if not sel.any():
                first[float(s)].append(0)
                continue
            still = A[sel].any(axis=0)
            first[float(s)].append(int(k_grid[np.argmin(still)]) if not still.all() else -1)
    env = per_seed.mean(axis=0)
    if np.any(np.diff(per_seed, axis=1) > 0):
        raise AssertionError("support envelope increased in k")
    fx = {s: int(np.median(v)) if min(v) >= 0 else -1 for s, v in first.items()}
    return SupportLimitResult(k_grid, env, per_seed, leaf_inc.mean(axis=0), fx, n_skipped)
