"""Exact semigroup of the geometric Lorenz model and its leaf machinery.

The flow is linear, ``(u1 e^{λ1 t}, u2 e^{-λ2 t}, u3 e^{-λ3 t})``, from the
return square ``S = {u3 = 1, |u1|, |u2| <= 1/2}`` until ``|u1| = 1``; the exit
map ``L`` sends that point to a cusp ``Σ±`` and a rotation of duration
``3π/2`` brings it back to ``S``. Points are stored canonically as their last
origin on ``S`` plus the elapsed time, so every quantity here is closed form.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator

from ._validation import check_int, check_positive
from .exceptions import (AssumptionViolation, ConfigError, NoPredecessor, OnGammaError,
                         OrbitOnDiscontinuity)

ROT_TIME = 1.5 * math.pi
GAMMA_TOL = 1e-14
RETURN_SNAP = 1e-12
TUBE = 0.05


class Phase(str, Enum):
    ON_S = "OnS"
    LINEAR = "LinearDescent"
    ROTATION = "Rotation"
    ON_GAMMA = "OnGamma"


@dataclass(frozen=True)
class GeoParams:
    """Rates ``λ1, λ2, λ3`` and the rotation gain ``θ`` of the geometric model.

    Construction checks ``0 < λ3 < λ1 < λ2`` and, with ``α = λ3/λ1`` and
    ``β = λ2/λ1``, the inequalities ``1/√2 < α < 1``,
    ``β > log 6/log 2 - 1`` and ``2^α/(√2 α) < θ < 2^α``.
    """

    lambda1: float = 1.0
    lambda2: float = 2.0
    lambda3: float = 0.8
    theta: float = 1.6
    validate: bool = True

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "theta"):
            check_positive(getattr(self, name), name)
        if self.validate:
            for msg in self.violations():
                raise AssumptionViolation(msg)

    def violations(self):
        """Messages for every violated parameter inequality."""
        out = []
        if not (self.lambda3 < self.lambda1 < self.lambda2):
            out.append("need 0 < lambda3 < lambda1 < lambda2")
        a, b, th = self.alpha, self.beta, self.theta
        if not (1 / math.sqrt(2) < a < 1):
            out.append(f"need 1/sqrt(2) < alpha < 1, got alpha = {a:.6g}")
        if not (b > math.log(6) / math.log(2) - 1):
            out.append(f"need beta > log 6/log 2 - 1 = {math.log2(6) - 1:.6g}, got {b:.6g}")
        lo, hi = 2 ** a / (math.sqrt(2) * a), 2 ** a
        if not (lo < th < hi):
            out.append(f"need 2^alpha/(sqrt(2) alpha) = {lo:.6g} < theta < 2^alpha = {hi:.6g},"
                       f" got theta = {th:.6g}")
        return out

    @property
    def alpha(self):
        return self.lambda3 / self.lambda1

    @property
    def beta(self):
        return self.lambda2 / self.lambda1

    @property
    def v_max(self):
        return 4.0 + self.lambda1 + self.lambda2 + self.lambda3

    @property
    def v_min(self):
        return min(0.25, 0.9 * self.lambda3)


@dataclass(frozen=True)
class GeoPoint:
    """Point of the attractor as ``(origin on S, elapsed time)``.

    ``ambient`` and ``phase`` are derived; use :func:`geo_point` to build one.
    """

    o1: float
    o2: float
    elapsed: float
    ambient: tuple
    phase: Phase

    @property
    def origin(self):
        return (self.o1, self.o2)

    def as_array(self):
        return np.array(self.ambient)


@dataclass(frozen=True)
class PullbackInterval:
    level: int
    lo: float
    hi: float
    anchor: float

    @property
    def width(self):
        return self.hi - self.lo


# ----------------------------------------------------------------------------
# elementary maps


def _on_gamma(x):
    return abs(x) <= GAMMA_TOL


def tau_sigma(o1, params=GeoParams()):
    """Time ``(1/λ1) log(1/|o1|)`` for the linear flow to reach ``|u1| = 1``.

    Examples
    --------
    >>> round(tau_sigma(0.5), 4)
    0.6931
    """
    if _on_gamma(o1):
        raise OnGammaError("o1 = 0 lies on the stable line and never exits")
    return math.log(1.0 / abs(o1)) / params.lambda1


def tau_return(o1, params=GeoParams()):
    """Return time to ``S``: ``τ_Σ(o1) + 3π/2``."""
    return tau_sigma(o1, params) + ROT_TIME


def exit_map(u, params=GeoParams()):
    """``L(u) = (sgn u1, u2 |u1|^β, |u1|^α)`` for ``u`` on the square."""
    u1, u2 = float(u[0]), float(u[1])
    if _on_gamma(u1):
        raise OnGammaError("exit map undefined on u1 = 0")
    a1 = abs(u1)
    return (math.copysign(1.0, u1), u2 * a1 ** params.beta, a1 ** params.alpha)


def linear_flow(u, t, params=GeoParams()):
    """``Ψ^lin_t(u) = (u1 e^{λ1 t}, u2 e^{-λ2 t}, u3 e^{-λ3 t})``."""
    return (u[0] * math.exp(params.lambda1 * t), u[1] * math.exp(-params.lambda2 * t),
            u[2] * math.exp(-params.lambda3 * t))


def rot_flow(v, s, params=GeoParams()):
    """Rotation from a cusp point ``v`` for time ``s ∈ [0, 3π/2]``.

    ``r(s) = 1 - v3 + (1/2 - (θ - 1) v3) s / (3π/2)``; the ``Σ+`` branch is
    ``(1 + r sin s, v2 - s/(6π), 1 - r cos s)`` and ``Σ-`` mirrors it. The
    endpoint ``s = 3π/2`` returns :func:`sigma_to_s` exactly.
    """
    s = float(s)
    if s < 0.0 or s > ROT_TIME:
        raise ConfigError(f"rotation time must lie in [0, 3π/2], got {s}")
    v1, v2, v3 = (float(c) for c in v)
    frac = s / ROT_TIME
    r = 1.0 - v3 + (0.5 - (params.theta - 1.0) * v3) * frac
    if s == ROT_TIME:
        # 1 - r rounds differently from the closed form
        return sigma_to_s(v, params)
    sn, cs = math.sin(s), math.cos(s)
    if v1 > 0:
        return (1.0 + r * sn, v2 - 0.25 * frac, 1.0 - r * cs)
    return (-1.0 - r * sn, v2 + 0.25 * frac, 1.0 - r * cs)


def sigma_to_s(v, params=GeoParams()):
    """Landing point on ``S`` of the rotation started at ``v``."""
    if v[0] > 0:
        return (params.theta * v[2] - 0.5, v[1] - 0.25, 1.0)
    return (-params.theta * v[2] + 0.5, v[1] + 0.25, 1.0)


def return_map_f(x, params=GeoParams()):
    """``f(x) = θ|x|^α − 1/2`` for ``x > 0`` and ``−θ|x|^α + 1/2`` for ``x < 0``.

    Examples
    --------
    >>> round(return_map_f(0.5), 4)
    0.419
    """
    if _on_gamma(x):
        raise OnGammaError("f is undefined at 0")
    p = params.theta * abs(x) ** params.alpha
    return p - 0.5 if x > 0 else 0.5 - p


def return_map_g(x, y, params=GeoParams()):
    """``g(x, y) = y|x|^β ∓ 1/4`` (minus for ``x > 0``)."""
    if _on_gamma(x):
        raise OnGammaError("g is undefined at x = 0")
    q = y * abs(x) ** params.beta
    return q - 0.25 if x > 0 else q + 0.25


def f_prime(x, params=GeoParams()):
    """``f'(x) = θ α |x|^(α−1)`` (both branches are increasing)."""
    if _on_gamma(x):
        raise OnGammaError("f' is undefined at 0")
    return params.theta * params.alpha * abs(x) ** (params.alpha - 1.0)


def f_branch_range(branch, params=GeoParams()):
    """Closed image ``f(branch domain)``; ``pos`` maps ``(0, 1/2]`` and ``neg`` ``[-1/2, 0)``."""
    top = params.theta * 0.5 ** params.alpha - 0.5
    return (-0.5, top) if branch == "pos" else (-top, 0.5)


def f_inverse(y, branch, params=GeoParams()):
    """Preimage of ``y`` on the requested branch.

    ``None`` when ``y`` is outside the branch range or the preimage falls
    within ``GAMMA_TOL`` of the discontinuity.
    """
    lo, hi = f_branch_range(branch, params)
    if branch == "pos":
        if not (lo < y <= hi):
            return None
        x = ((y + 0.5) / params.theta) ** (1.0 / params.alpha)
    elif branch == "neg":
        if not (lo <= y < hi):
            return None
        x = -(((0.5 - y) / params.theta) ** (1.0 / params.alpha))
    else:
        raise ConfigError("branch must be 'pos' or 'neg'")
    return None if _on_gamma(x) else x


def return_map(o, params=GeoParams()):
    """First return ``P(o) = (f(o1), g(o1, o2))`` on the square."""
    return (return_map_f(o[0], params), return_map_g(o[0], o[1], params))


def return_map_inverse(o, params=GeoParams()):
    """Predecessor on the square; the branch follows from the sign of ``o2``."""
    y1, y2 = o
    branch = "pos" if y2 < 0 else "neg"
    x1 = f_inverse(y1, branch, params)
    if x1 is None:
        raise NoPredecessor(f"point {o} has no predecessor on the square")
    shift = 0.25 if branch == "pos" else -0.25
    x2 = (y2 + shift) / abs(x1) ** params.beta
    if abs(x2) > 0.5 + 1e-12:
        raise NoPredecessor(f"point {o} has no predecessor on the square")
    return (x1, x2)


# ----------------------------------------------------------------------------
# exact semigroup


def _ambient(o1, o2, elapsed, params):
    if _on_gamma(o1):
        return linear_flow((0.0, o2, 1.0), elapsed, params), (
            Phase.ON_S if elapsed == 0 else Phase.ON_GAMMA)
    ts = tau_sigma(o1, params)
    if elapsed == 0.0:
        return (o1, o2, 1.0), Phase.ON_S
    if elapsed < ts:
        return linear_flow((o1, o2, 1.0), elapsed, params), Phase.LINEAR
    s = min(elapsed - ts, ROT_TIME)
    return rot_flow(exit_map((o1, o2), params), s, params), Phase.ROTATION


def geo_point(o1, o2, elapsed=0.0, params=GeoParams()):
    """Canonical point with origin ``(o1, o2)`` on the square.

    ``elapsed`` is reduced through full returns so that it is below the
    return time of the stored origin.
    """
    if abs(o1) > 0.5 or abs(o2) > 0.5:
        raise ConfigError("origin must lie on the square |o1|, |o2| <= 1/2")
    if elapsed < 0:
        raise ConfigError("elapsed time must be nonnegative")
    return _canonical(float(o1), float(o2), float(elapsed), params)


def _canonical(o1, o2, total, params):
    if _on_gamma(o1):
        amb, ph = _ambient(0.0, o2, total, params)
        return GeoPoint(o1, o2, total, amb, ph)
    while True:
        tr = tau_return(o1, params)
        if total < tr - RETURN_SNAP:
            break
        # residues of the subtraction below RETURN_SNAP count as being on S
        total = total - tr
        if total < RETURN_SNAP:
            total = 0.0
        o1, o2 = return_map((o1, o2), params)
        if _on_gamma(o1):
            amb, ph = _ambient(0.0, o2, total, params)
            return GeoPoint(o1, o2, total, amb, ph)
    amb, ph = _ambient(o1, o2, total, params)
    return GeoPoint(o1, o2, total, amb, ph)


def geo_flow(p, t, params=GeoParams()):
    """Advance a :class:`GeoPoint` by ``t`` using only closed forms.

    Negative ``t`` is allowed as long as the backward orbit stays on the
    attractor (predecessors are found with :func:`return_map_inverse`).
    """
    total = p.elapsed + float(t)
    o1, o2 = p.o1, p.o2
    while total < 0:
        o1, o2 = return_map_inverse((o1, o2), params)
        total += tau_return(o1, params)
    return _canonical(o1, o2, total, params)


def geo_trajectory(p, times, params=GeoParams()):
    """Ambient coordinates at each time; returns an array of shape (len(times), 3)."""
    return np.array([geo_flow(p, t, params).ambient for t in np.asarray(times, dtype=float)])


def return_times(p, t_end, params=GeoParams()):
    """Times in ``(0, t_end]`` at which the orbit of ``p`` lies on the square."""
    out = []
    if _on_gamma(p.o1):
        return out
    o1, o2 = p.o1, p.o2
    t = tau_return(o1, params) - p.elapsed
    while t <= t_end:
        out.append(t)
        o1, o2 = return_map((o1, o2), params)
        if _on_gamma(o1):
            break
        t += tau_return(o1, params)
    return out


def in_tube_ws(p, s=0.1):
    """Membership of ``p`` in the slab ``|u1|, |u2| <= 1``, ``|u3 - 1| <= s``."""
    u = p.ambient
    return abs(u[0]) <= 1 and abs(u[1]) <= 1 and abs(u[2] - 1.0) <= s


# ----------------------------------------------------------------------------
# leaf sets


@dataclass(frozen=True)
class GeoLeafSegment:
    """The ``u2``-direction leaf ``{v : v1 = u1, v3 = u3, |v2 − u2| < w}``.

    ``offset_min`` and ``offset_max`` additionally keep the shifted origin on
    the square, so every returned point lies on the attractor.
    """

    base: GeoPoint
    half_width: float
    offset_min: float
    offset_max: float
    gain: float
    params: GeoParams

    def point(self, offset):
        """Leaf point whose ``u2`` differs from the base by ``offset``."""
        if not (self.offset_min <= offset <= self.offset_max):
            raise ConfigError(f"offset {offset} outside [{self.offset_min}, {self.offset_max}]")
        b = self.base
        return _canonical(b.o1, b.o2 + offset / self.gain, b.elapsed, self.params)


def _u2_gain(p, params):
    """``∂u2/∂o2`` at fixed ``(o1, elapsed)``."""
    if _on_gamma(p.o1):
        return math.exp(-params.lambda2 * p.elapsed)
    ts = tau_sigma(p.o1, params)
    if p.elapsed < ts:
        return math.exp(-params.lambda2 * p.elapsed)
    return abs(p.o1) ** params.beta


def leaf_set_geo(u, params=GeoParams()):
    """Leaf segment through ``u`` of half-width ``1/3 − 2^{−β}``."""
    w = 1.0 / 3.0 - 2.0 ** (-params.beta)
    gain = _u2_gain(u, params)
    lo = max(-w, (-0.5 - u.o2) * gain)
    hi = min(w, (0.5 - u.o2) * gain)
    return GeoLeafSegment(u, w, lo, hi, gain, params)


def geo_leaf_constants(params=GeoParams()):
    """``λ_g = λ2 (log 2/λ1) / (log 2/λ1 + 3π/2)`` and ``C_g = exp(3π λ_g / 2)``.

    Examples
    --------
    >>> round(geo_leaf_constants()[0], 4)
    0.2565
    """
    tmin = math.log(2.0) / params.lambda1
    lam = params.lambda2 * tmin / (tmin + ROT_TIME)
    return lam, math.exp(ROT_TIME * lam)


# ----------------------------------------------------------------------------
# interval pullbacks and anti-leaf sets


def dist_to_breaks(x):
    """``d(x) = min(|x − 1/2|, |x|, |x + 1/2|)``."""
    return min(abs(x - 0.5), abs(x), abs(x + 0.5))


def f_orbit(x, n, params=GeoParams()):
    """``[x, f(x), ..., f^n(x)]``; raises when the orbit meets 0."""
    orb = [float(x)]
    for i in range(n):
        if _on_gamma(orb[-1]):
            raise OrbitOnDiscontinuity(f"orbit hits 0 at step {i}", step=i)
        orb.append(return_map_f(orb[-1], params))
    if _on_gamma(orb[-1]):
        raise OrbitOnDiscontinuity(f"orbit hits 0 at step {n}", step=n)
    return orb


def pullback_intervals(x, j, params=GeoParams()):
    """Intervals ``I^(j,i)`` containing ``f^i(x)`` with ``f(I^(j,i-1)) ⊂ I^(j,i)``.

    ``I^(j,j)`` is centred at ``f^j(x)`` with half-width ``δ/2`` where
    ``δ = min_i 2^{(j−i)/2} d(f^i(x))``; lower levels are preimages under the
    branch containing the orbit point, cut to that branch's domain.

    Returns
    -------
    intervals : list of PullbackInterval, index ``i = 0..j``
    delta : float
    """
    j = check_int(j, "j", minimum=0)
    orb = f_orbit(x, j, params)
    delta = min(2.0 ** ((j - i) / 2.0) * dist_to_breaks(orb[i]) for i in range(j + 1))
    lo, hi = orb[j] - delta / 2.0, orb[j] + delta / 2.0
    out = [PullbackInterval(j, lo, hi, orb[j])]
    for i in range(j, 0, -1):
        branch = "pos" if orb[i - 1] > 0 else "neg"
        rlo, rhi = f_branch_range(branch, params)
        a, b = max(lo, rlo), min(hi, rhi)
        if branch == "pos":
            nlo = f_inverse(a, branch, params) if a > rlo else 0.0
            nhi = f_inverse(b, branch, params)
        else:
            nlo = f_inverse(a, branch, params)
            nhi = f_inverse(b, branch, params) if b < rhi else 0.0
        lo, hi = min(nlo, orb[i - 1]), max(nhi, orb[i - 1])
        out.append(PullbackInterval(j, lo, hi, orb[i - 1]))
    out.reverse()
    return out, delta


def D_l(x, l, params=GeoParams()):
    """``D_l(x) = Σ_{i<=l} 2^{−(l−i)/4} / d(f^i(x))^2``."""
    orb = f_orbit(x, l, params)
    return math.fsum(2.0 ** (-(l - i) / 4.0) / dist_to_breaks(orb[i]) ** 2 for i in range(l + 1))


@dataclass(frozen=True)
class AntiLeafConstants:
    """Constants of the anti-leaf bound, proof formulas side by side.

    ``C_U`` is ``(C_sum / h) D_l`` with the proof's ``C_sum``; ``dmax_lower``
    is ``min(1/20, C_S δ/2)`` and ``dmax_lower_Dl`` its weaker form
    ``(4/5) C_S / D_l``.
    """

    l: int
    D_l: float
    C_1: float
    C_ret: float
    C_S: float
    C_sum: float
    C_U: float
    delta: float
    dmax_lower: float
    dmax_lower_Dl: float
    h_S_max: float
    t_k_window: tuple


def proof_constants(params=GeoParams()):
    """``h^S_max, C_1, C^ret, C^S, C^sum`` of the per-return distance estimates."""
    vM, vm = params.v_max, params.v_min
    h_S_max = 1.0 / (20.0 * vM)
    C_S = vm ** 2 / (4.0 * vM * (vM + vm)) * math.exp(-h_S_max * params.lambda2)
    C_1 = 2.0 / 3.0 + 4.0 * params.alpha + 2.0 * vM / params.lambda1
    C_ret = max(2.0 * C_1, 2.0 * vM / params.lambda1)
    C_sum = 2.0 * (1.0 + 3.0 * math.pi * params.lambda1) / params.lambda1 * C_ret / C_S
    return {"h_S_max": h_S_max, "C_S": C_S, "C_1": C_1, "C_ret": C_ret, "C_sum": C_sum}


def crossing_count(u, t_k, params=GeoParams()):
    """``T(u, k)``: number of square crossings in ``(0, t_k]``."""
    return len(return_times(u, t_k, params))


def anti_leaf_constants(u, k, h, params=GeoParams()):
    """Anti-leaf constants for the observation index ``k`` at spacing ``h``."""
    t_k = k * h
    rts = return_times(u, t_k, params)
    l = len(rts)
    pc = proof_constants(params)
    Dl = D_l(u.o1, l, params)
    _, delta = pullback_intervals(u.o1, l, params)
    last = rts[-1] if rts else 0.0
    return AntiLeafConstants(
        l=l, D_l=Dl, C_1=pc["C_1"], C_ret=pc["C_ret"], C_S=pc["C_S"], C_sum=pc["C_sum"],
        C_U=pc["C_sum"] / h * Dl, delta=delta,
        dmax_lower=min(1.0 / 20.0, pc["C_S"] * delta / 2.0),
        dmax_lower_Dl=0.8 * pc["C_S"] / Dl, h_S_max=pc["h_S_max"],
        t_k_window=(last, last + pc["h_S_max"]))


@dataclass
class GeoAntiLeafSample:
    """One anti-leaf point with its per-step ``‖·‖_∞`` distances to ``u``."""

    w1: float
    point: GeoPoint
    dists: np.ndarray

    @property
    def endpoint(self):
        return float(self.dists[-1])

    @property
    def total(self):
        return math.fsum(self.dists)


def anti_leaf_set_geo(u, k, h, params=GeoParams(), n=101, tube=TUBE):
    """Sample ``Ũ(u, k)`` on the level-``T(u,k)`` pullback interval.

    ``u`` must sit on its origin's forward orbit; its origin ``O(u)`` is the
    stored ``(o1, o2)`` and ``τ_O(u)`` the stored elapsed time. Candidates
    ``w = (w1, o2)`` are flown for ``t_k + τ_O(u)``; walking outward from
    ``o1`` the segment stops at the first point whose trajectory leaves the
    ``tube`` around ``u(t_k)``, so each kept ``w`` has the whole sub-segment
    ``[O(u), w]`` inside the tube.

    Returns
    -------
    list of GeoAntiLeafSample
        Sorted by ``w1``; includes ``w1 = o1`` (zero profile).
    """
    k = check_int(k, "k", minimum=0)
    h = check_positive(h, "h")
    t_k = k * h
    l = crossing_count(u, t_k, params)
    ivs, _ = pullback_intervals(u.o1, l, params)
    iv = ivs[0]
    tau_o = u.elapsed
    times = tau_o + h * np.arange(k + 1)
    origin = geo_point(u.o1, u.o2, 0.0, params)
    ref = geo_trajectory(origin, times, params)
    end_ref = np.array(ref[-1])

    def sample(w1):
        p = geo_point(w1, u.o2, 0.0, params)
        tr = geo_trajectory(p, times, params)
        return p, np.max(np.abs(tr - ref), axis=1), tr[-1]

    out = [GeoAntiLeafSample(u.o1, geo_flow(origin, tau_o, params), np.zeros(k + 1))]
    for side_end in (iv.lo, iv.hi):
        grid = np.linspace(u.o1, side_end, n)[1:]
        for w1 in grid:
            if _on_gamma(w1):
                break
            p, dists, end = sample(w1)
            if np.max(np.abs(end - end_ref)) > tube:
                break
            out.append(GeoAntiLeafSample(w1, geo_flow(p, tau_o, params), dists))
    out.sort(key=lambda s: s.w1)
    return out


def calibrate_sum_constant(samples, h, Dl):
    """Smallest ``C`` with ``Σ_i dist_i <= (C/h) D_l dist_k`` on the samples."""
    ratios = [s.total * h / (Dl * s.endpoint) for s in samples if s.endpoint > 0]
    return max(ratios) if ratios else 0.0


# ----------------------------------------------------------------------------
# invariant density of f


@njit(cache=True)
def _f_orbit_counts(x, n_burn, n_iter, bins, theta, alpha, gamma_tol):
    counts = np.zeros(bins, dtype=np.int64)
    restarts = 0
    for i in range(n_burn + n_iter):
        if abs(x) <= gamma_tol:
            # alternate the side of the restart so the log is reproducible
            x = 1e-12 if restarts % 2 == 0 else -1e-12
            restarts += 1
        p = theta * abs(x) ** alpha
        x = p - 0.5 if x > 0 else 0.5 - p
        if i >= n_burn:
            b = int((x + 0.5) * bins)
            if b >= bins:
                b = bins - 1
            elif b < 0:
                b = 0
            counts[b] += 1
    return counts, restarts


def invariant_density_f(x0=0.1234, n_burn=1000, n_iter=10 ** 6, bins=100,
                        params=GeoParams()):
    """Birkhoff histogram of the orbit of ``f`` on ``[-1/2, 1/2]``.

    An orbit that hits 0 is restarted at ``±1e-12`` (sides alternate) and the
    restart is counted.

    Returns
    -------
    density : ndarray of shape (bins,)
        Normalized so that ``Σ density * width = 1``.
    edges : ndarray of shape (bins + 1,)
    n_restarts : int
    """
    counts, restarts = _f_orbit_counts(float(x0), n_burn, n_iter, bins, params.theta,
                                       params.alpha, GAMMA_TOL)
    edges = np.linspace(-0.5, 0.5, bins + 1)
    width = edges[1] - edges[0]
    density = counts / (counts.sum() * width)
    return density, edges, restarts


class InvariantDensityEstimator(BaseEstimator):
    """Histogram estimate of the absolutely continuous invariant density of ``f``.

    Parameters
    ----------
    params : GeoParams
    n_burn, n_iter, bins : int

    Attributes
    ----------
    density_ : ndarray of shape (bins,)
    bin_edges_ : ndarray of shape (bins + 1,)
    n_restarts_ : int
    """

    def __init__(self, params=None, n_burn=1000, n_iter=10 ** 6, bins=100):
        self.params = params
        self.n_burn = n_burn
        self.n_iter = n_iter
        self.bins = bins

    def fit(self, X=None, y=None):
        """Run the orbit from ``X`` (a scalar start, default 0.1234)."""
        x0 = 0.1234 if X is None else float(np.ravel(X)[0])
        params = self.params or GeoParams()
        self.density_, self.bin_edges_, self.n_restarts_ = invariant_density_f(
            x0, self.n_burn, self.n_iter, self.bins, params)
        return self

    def predict(self, X):
        """Density value of the bin containing each ``x``."""
        x = np.clip(np.ravel(np.asarray(X, dtype=float)), -0.5, 0.5)
        idx = np.clip(np.searchsorted(self.bin_edges_, x, side="right") - 1, 0,
                      self.density_.size - 1)
        return self.density_[idx]
