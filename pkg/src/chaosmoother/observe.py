"""Observations, smoother/filter densities and support-inclusion probabilities."""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from ._validation import (check_int, check_matrix, check_positive, check_rng, check_vector,
                          spawn_rngs)
from .exceptions import Blowup, ConfigError, StepUnderflow
from .geo import GeoParams, GeoPoint, geo_trajectory
from .quadode import DEFAULT_TOL, QuadraticSystem, flow, trajectory

NOISE_KINDS = ("uniform", "gaussian")


@dataclass
class ObsSetup:
    """Observation design ``Y_i = H u(t_i) + Z_i`` for ``t_i = i h``, ``i = 0..k``.

    Parameters
    ----------
    H : array_like of shape (d_o, d)
    h : float
    k : int
    noise : {"uniform", "gaussian"}
        Uniform on ``[-eps, eps]^{d_o}`` or ``Z_i / eps`` standard normal.
    eps : float
    prior_radius : float, optional
        Radius of the uniform prior ball (the system's ``R`` when omitted).
    """

    H: np.ndarray
    h: float
    k: int
    noise: str = "uniform"
    eps: float = 0.01
    prior_radius: float = None

    def __post_init__(self):
        self.H = check_matrix(self.H, "H")
        self.h = check_positive(self.h, "h")
        self.k = check_int(self.k, "k", minimum=0)
        if self.noise not in NOISE_KINDS:
            raise ConfigError(f"noise must be one of {NOISE_KINDS}, got {self.noise!r}")
        self.eps = check_positive(self.eps, "eps")
        if self.prior_radius is not None:
            self.prior_radius = check_positive(self.prior_radius, "prior_radius")

    @property
    def times(self):
        return self.h * np.arange(self.k + 1)

    @property
    def d_o(self):
        return self.H.shape[0]

    def to_dict(self):
        return {"H": self.H.tolist(), "h": self.h, "k": self.k, "noise": self.noise,
                "eps": self.eps, "prior_radius": self.prior_radius}

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["H"], dtype=float), data["h"], data["k"], data["noise"],
                   data["eps"], data.get("prior_radius"))


@dataclass
class ObsRecord:
    """A realized observation sequence together with how it was generated."""

    setup: ObsSetup
    truth: np.ndarray
    Y: np.ndarray
    seed: object
    clean: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        truth = self.truth
        if isinstance(truth, GeoPoint):
            truth = {"o1": truth.o1, "o2": truth.o2, "elapsed": truth.elapsed}
        else:
            truth = np.asarray(truth).tolist()
        return {"setup": self.setup.to_dict(), "truth": truth, "seed": self.seed,
                "Y": np.asarray(self.Y).tolist()}

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def from_dict(cls, data):
        truth = data["truth"]
        if not isinstance(truth, dict):
            truth = np.asarray(truth, dtype=float)
        return cls(ObsSetup.from_dict(data["setup"]), truth, np.asarray(data["Y"], dtype=float),
                   data["seed"])


@dataclass
class DistanceProfile:
    """Sums and maxima of trajectory distances over ``i = 0..k``.

    ``D1 = Σ‖Δ_i‖_1``, ``D2 = Σ‖Δ_i‖_2^2``, ``D2H = Σ‖H Δ_i‖_2^2`` and
    ``Mk = max_i ‖H Δ_i‖_∞`` with ``Δ_i = v(t_i) − u(t_i)``.
    """

    D1: float
    D2: float
    D2H: float
    Mk: float
    per_step: np.ndarray


@dataclass
class SupportProbability:
    """Exact inclusion probability with its two closed-form bounds.

    ``upper`` is NaN unless ``H`` is square and invertible.
    """

    exact: float
    lower: float
    lower_valid: bool
    upper: float


@dataclass
class SupportReport:
    """Monte Carlo support diameters, one row per noise level."""

    epsilon: np.ndarray
    mean_diam: np.ndarray
    stderr: np.ndarray
    lower_env: np.ndarray
    upper_env: np.ndarray
    n_seeds: int

    def rows(self):
        return [
            {"epsilon": float(e), "mean_diam": float(m), "stderr": float(s),
             "lower_env": float(lo), "upper_env": float(up)}
            for e, m, s, lo, up in zip(self.epsilon, self.mean_diam, self.stderr,
                                       self.lower_env, self.upper_env)]


# ----------------------------------------------------------------------------
# trajectories and noise


def model_trajectory(model, u, times, tol=DEFAULT_TOL):
    """States of ``model`` started at ``u`` on ``times`` as an array (n, d)."""
    if isinstance(model, GeoParams):
        if not isinstance(u, GeoPoint):
            raise ConfigError("the geometric model needs a GeoPoint start")
        return geo_trajectory(u, times, model)
    if isinstance(model, QuadraticSystem):
        return trajectory(model, u, times, tol=tol).states
    raise ConfigError(f"unsupported model type {type(model).__name__}")


def draw_noise(setup, rng, size=()):
    """Noise array of shape ``size + (k + 1, d_o)``."""
    shape = tuple(size) + (setup.k + 1, setup.d_o)
    if setup.noise == "uniform":
        return setup.eps * rng.uniform(-1.0, 1.0, size=shape)
    return setup.eps * rng.standard_normal(shape)


def generate_observations(model, u, setup, seed=0, tol=DEFAULT_TOL):
    """Sample ``Y_i = H u(t_i) + Z_i``; deterministic given ``seed``."""
    X = model_trajectory(model, u, setup.times, tol)
    if X.shape[1] != setup.H.shape[1]:
        raise ConfigError("H does not match the state dimension")
    clean = X @ setup.H.T
    Y = clean + draw_noise(setup, check_rng(seed))
    truth = u if isinstance(u, GeoPoint) else np.asarray(u, dtype=float)
    return ObsRecord(setup, truth, Y, seed if not isinstance(seed, np.random.Generator) else None,
                     clean)


# ----------------------------------------------------------------------------
# distances and support probabilities


def norm1(H):
    """Operator 1-norm, the largest column sum of ``|H|``."""
    return float(np.abs(np.asarray(H, dtype=float)).sum(axis=0).max())


def distance_profile(traj_u, traj_v, setup):
    """Distance sums between two trajectories sampled on the setup's grid."""
    U = np.asarray(traj_u, dtype=float)
    V = np.asarray(traj_v, dtype=float)
    if U.shape != V.shape or U.shape[0] != setup.k + 1:
        raise ConfigError(f"trajectories must both have shape ({setup.k + 1}, d)")
    D = V - U
    HD = D @ setup.H.T
    per = np.abs(D).sum(axis=1)
    return DistanceProfile(
        D1=math.fsum(per), D2=math.fsum((D ** 2).sum(axis=1)),
        D2H=math.fsum((HD ** 2).sum(axis=1)), Mk=float(np.abs(HD).max()), per_step=per)


def support_inclusion_probability(traj_u, traj_v, H, eps):
    """``P(v ∈ S_k | u) = Π_i Π_j (1 − |(H Δ_i)_j| / (2 eps))_+`` and its bounds.

    The lower bound ``exp(−D1 ‖H‖_1 / eps)`` is valid when
    ``eps >= max |H Δ|``; the upper bound ``exp(−D1 / (2 eps ‖H^{-1}‖_1))``
    needs ``H`` square and invertible.

    Examples
    --------
    >>> import numpy as np
    >>> p = support_inclusion_probability([[0.0]], [[1.0]], np.eye(1), 1.0)
    >>> p.exact
    0.5
    """
    H = check_matrix(H, "H")
    eps = check_positive(eps, "eps")
    U = np.atleast_2d(np.asarray(traj_u, dtype=float))
    V = np.atleast_2d(np.asarray(traj_v, dtype=float))
    D = V - U
    HD = np.abs(D @ H.T)
    factors = np.clip(1.0 - HD / (2.0 * eps), 0.0, None)
    exact = float(np.prod(factors))
    D1 = math.fsum(np.abs(D).sum(axis=1))
    Mk = float(HD.max()) if HD.size else 0.0
    lower = math.exp(-D1 * norm1(H) / eps)
    upper = math.nan
    if H.shape[0] == H.shape[1]:
        try:
            Hinv = np.linalg.inv(H)
            upper = math.exp(-D1 / (2.0 * eps * norm1(Hinv)))
        except np.linalg.LinAlgError:
            pass
    return SupportProbability(exact, lower, bool(eps >= Mk), upper)


def is_in_support(v_traj, rec):
    """``max_i ‖H v(t_i) − Y_i‖_∞ <= eps`` for uniform noise."""
    if rec.setup.noise != "uniform":
        raise ConfigError("support membership is defined for uniform noise")
    HV = np.asarray(v_traj, dtype=float) @ rec.setup.H.T
    return bool(np.max(np.abs(HV - rec.Y)) <= rec.setup.eps)


def support_inclusion_frequency(traj_u, traj_v, H, eps, n_seeds, seed=0, chunk=4096):
    """Monte Carlo frequency of ``v`` lying in the support under uniform noise.

    Returns
    -------
    freq : float
    stderr : float
        Binomial standard error ``sqrt(p (1 - p) / n)`` evaluated at the
        exact probability.
    """
    H = check_matrix(H, "H")
    HU = np.asarray(traj_u, dtype=float) @ H.T
    HV = np.asarray(traj_v, dtype=float) @ H.T
    rng = check_rng(seed)
    hits = 0
    left = n_seeds
    while left > 0:
        m = min(chunk, left)
        Z = eps * rng.uniform(-1.0, 1.0, size=(m,) + HU.shape)
        Y = HU[None] + Z
        hits += int(np.sum(np.max(np.abs(HV[None] - Y), axis=(1, 2)) <= eps))
        left -= m
    p = support_inclusion_probability(traj_u, traj_v, H, eps).exact
    return hits / n_seeds, math.sqrt(max(p * (1 - p), 0.0) / n_seeds)


# ----------------------------------------------------------------------------
# densities


def log_prior(v, radius):
    """Log density of the uniform law on the ball of ``radius`` (−inf outside)."""
    v = np.asarray(v, dtype=float)
    d = v.size
    if np.linalg.norm(v) > radius:
        return -math.inf
    log_vol = (d / 2.0) * math.log(math.pi) - gammaln(d / 2.0 + 1.0) + d * math.log(radius)
    return -log_vol


def _log_likelihood(HX, Y, setup):
    R = np.asarray(Y, dtype=float) - HX
    if setup.noise == "uniform":
        if np.max(np.abs(R)) > setup.eps:
            return -math.inf
        return -R.size * math.log(2.0 * setup.eps)
    return float(-np.sum(R ** 2) / (2.0 * setup.eps ** 2)
                 - R.size * math.log(setup.eps * math.sqrt(2.0 * math.pi)))


def _radius(sys, setup):
    return setup.prior_radius if setup.prior_radius is not None else sys.R


def log_density_smoother(sys, v, rec, tol=DEFAULT_TOL):
    """Unnormalized ``log μ^sm(v | Y_0..Y_k)``."""
    v = check_vector(v, "v", dim=sys.dim)
    lp = log_prior(v, _radius(sys, rec.setup))
    if lp == -math.inf:
        return -math.inf
    HX = trajectory(sys, v, rec.setup.times, tol=tol).states @ rec.setup.H.T
    return _log_likelihood(HX, rec.Y, rec.setup) + lp


@dataclass
class FilterTerms:
    """Ingredients of the filter density at ``w``.

    ``origin = Ψ_{−t_k}(w)``, ``HX`` the observed trajectory from the origin,
    ``log_det = log det JΨ_{−t_k}(w) = −log det JΨ_{t_k}(origin)``.
    """

    origin: np.ndarray
    HX: np.ndarray
    log_det: float
    reachable: bool


def filter_terms(sys, w, setup, tol=DEFAULT_TOL):
    """Reverse flow from ``w`` and the determinant factor of the filter density."""
    w = check_vector(w, "w", dim=sys.dim)
    t_k = setup.times[-1]
    try:
        origin = flow(sys, w, -t_k, tol=tol)
    except (Blowup, StepUnderflow):
        return FilterTerms(None, None, -math.inf, False)
    tr = trajectory(sys, origin, setup.times, tol=tol, with_jacobian=True)
    sign, logdet = np.linalg.slogdet(tr.jacobians[-1])
    if sign <= 0:
        return FilterTerms(origin, None, -math.inf, False)
    return FilterTerms(origin, tr.states @ setup.H.T, -float(logdet), True)


def log_density_filter(sys, w, rec, tol=DEFAULT_TOL):
    """Unnormalized ``log μ^fi(w | Y_0..Y_k)``; −inf when ``w`` is not reachable."""
    ft = filter_terms(sys, w, rec.setup, tol)
    if not ft.reachable:
        return -math.inf
    lp = log_prior(ft.origin, _radius(sys, rec.setup))
    if lp == -math.inf:
        return -math.inf
    return _log_likelihood(ft.HX, rec.Y, rec.setup) + lp + ft.log_det


def gaussian_ratio_event_frequency(sys, u, v, setup, n_seeds, seed=0, variant="smoother",
                                   tol=DEFAULT_TOL):
    """Frequency of ``μ(v)/μ(u) >= (q(v)/q(u)) exp(−D2H / (2 eps^2))`` over noise draws.

    For the filter the densities are evaluated at ``v(t_k)`` and ``u(t_k)`` and
    the right-hand side carries ``det JΨ_{t_k}(u) / det JΨ_{t_k}(v)``; every
    term is recomputed through the filter's own reverse flow.

    Returns
    -------
    freq : float
    stderr : float
        Binomial standard error at ``p = 1/2``.
    """
    if setup.noise != "gaussian":
        raise ConfigError("the ratio event is defined for Gaussian noise")
    u = check_vector(u, "u", dim=sys.dim)
    v = check_vector(v, "v", dim=sys.dim)
    times = setup.times
    Xu = trajectory(sys, u, times, tol=tol, with_jacobian=True)
    Xv = trajectory(sys, v, times, tol=tol, with_jacobian=True)
    HU, HV = Xu.states @ setup.H.T, Xv.states @ setup.H.T
    R = _radius(sys, setup)
    D2H = float(np.sum((HV - HU) ** 2))
    if variant == "smoother":
        mu_u, mu_v = HU, HV
        extra = log_prior(v, R) - log_prior(u, R)
        log_rhs = extra - D2H / (2 * setup.eps ** 2)
    elif variant == "filter":
        fu = filter_terms(sys, Xu.states[-1], setup, tol)
        fv = filter_terms(sys, Xv.states[-1], setup, tol)
        if not (fu.reachable and fv.reachable):
            raise Blowup("reverse flow failed for a filter evaluation point")
        mu_u, mu_v = fu.HX, fv.HX
        extra = (fv.log_det + log_prior(fv.origin, R)) - (fu.log_det + log_prior(fu.origin, R))
        du = np.linalg.slogdet(Xu.jacobians[-1])[1]
        dv = np.linalg.slogdet(Xv.jacobians[-1])[1]
        log_rhs = log_prior(v, R) - log_prior(u, R) + du - dv - D2H / (2 * setup.eps ** 2)
    else:
        raise ConfigError("variant must be 'smoother' or 'filter'")
    rng = check_rng(seed)
    hits = 0
    chunk = 4096
    left = n_seeds
    e2 = 2.0 * setup.eps ** 2
    while left > 0:
        m = min(chunk, left)
        Y = HU[None] + setup.eps * rng.standard_normal((m,) + HU.shape)
        ll_v = -np.sum((Y - mu_v[None]) ** 2, axis=(1, 2)) / e2
        ll_u = -np.sum((Y - mu_u[None]) ** 2, axis=(1, 2)) / e2
        hits += int(np.sum(ll_v - ll_u + extra >= log_rhs))
        left -= m
    return hits / n_seeds, math.sqrt(0.25 / n_seeds)


# ----------------------------------------------------------------------------
# support diameters


@dataclass
class CandidateFamily:
    """Parametrized candidate points with their observed trajectories.

    ``points`` (n, d) are the positions used for distances, ``HX`` (n, k+1, d_o)
    their observed trajectories; ``truth_index`` marks the true state.
    """

    points: np.ndarray
    HX: np.ndarray
    truth_index: int = 0


def leaf_family_geo(u, offsets, setup, params=GeoParams()):
    """Leaf points ``v`` with ``v2 − u2`` in ``offsets`` (0 is added for ``u``)."""
    from .geo import leaf_set_geo

    seg = leaf_set_geo(u, params)
    offs = np.unique(np.concatenate([[0.0], np.clip(offsets, seg.offset_min, seg.offset_max)]))
    pts, HX = [], []
    for o in offs:
        p = seg.point(float(o)) if o != 0.0 else u
        pts.append(p.ambient)
        HX.append(geo_trajectory(p, setup.times, params) @ setup.H.T)
    return CandidateFamily(np.array(pts), np.array(HX), int(np.argmin(np.abs(offs))))


def _diameter_l1(mask, dist):
    idx = np.flatnonzero(mask)
    if idx.size < 2:
        return 0.0
    return float(dist[np.ix_(idx, idx)].max())


def expected_support_diameter(u, setup, family, n_seeds, seed=0, C_U=None, upper_coef=None):
    """Mean ``‖·‖_1`` diameter of the included candidates over uniform-noise draws.

    Parameters
    ----------
    u : array_like or GeoPoint
        True state; only used when ``family`` is a callable.
    setup : ObsSetup
        Uniform-noise setup.
    family : CandidateFamily or callable
        Candidates, or ``family(u, setup) -> CandidateFamily``.
    n_seeds : int
    C_U : float, optional
        Leaf constant; gives the lower envelope ``eps / (e C_U ‖H‖_1)``.
    upper_coef : float, optional
        Coefficient ``c`` of an upper envelope ``c eps``.

    Returns
    -------
    SupportReport
        A single row.
    """
    if setup.noise != "uniform":
        raise ConfigError("support diameters are defined for uniform noise")
    n_seeds = check_int(n_seeds, "n_seeds", minimum=1)
    fam = family(u, setup) if callable(family) else family
    P = np.asarray(fam.points, dtype=float)
    dist = np.abs(P[:, None, :] - P[None, :, :]).sum(axis=2)
    HX = np.asarray(fam.HX, dtype=float)
    base = HX[fam.truth_index]
    rngs = spawn_rngs(np.random.SeedSequence(seed), n_seeds)
    diams = np.empty(n_seeds)
    for s, r in enumerate(rngs):
        Y = base + setup.eps * r.uniform(-1.0, 1.0, size=base.shape)
        mask = np.max(np.abs(HX - Y[None]), axis=(1, 2)) <= setup.eps
        diams[s] = _diameter_l1(mask, dist)
    mean = math.fsum(diams) / n_seeds
    se = float(np.std(diams, ddof=1) / math.sqrt(n_seeds)) if n_seeds > 1 else math.nan
    lower = setup.eps / (math.e * C_U * norm1(setup.H)) if C_U else math.nan
    upper = upper_coef * setup.eps if upper_coef else math.nan
    return SupportReport(np.array([setup.eps]), np.array([mean]), np.array([se]),
                         np.array([lower]), np.array([upper]), n_seeds)


def support_sweep(u, setup, family, eps_values, n_seeds, seed=0, C_U=None, upper_coef=None):
    """:func:`expected_support_diameter` over several ``eps`` values."""
    reps = []
    for i, eps in enumerate(eps_values):
        s = ObsSetup(setup.H, setup.h, setup.k, "uniform", float(eps), setup.prior_radius)
        reps.append(expected_support_diameter(u, s, family, n_seeds, seed=[seed, i], C_U=C_U,
                                              upper_coef=upper_coef))
    cat = lambda name: np.concatenate([getattr(r, name) for r in reps])  # noqa: E731
    return SupportReport(cat("epsilon"), cat("mean_diam"), cat("stderr"), cat("lower_env"),
                         cat("upper_env"), n_seeds)


def write_support_csv(report, path, header=None):
    """CSV with columns ``epsilon,mean_diam,stderr,lower_env,upper_env``."""
    from .io import write_csv

    write_csv(path, report.rows(), ["epsilon", "mean_diam", "stderr", "lower_env", "upper_env"],
              header)
