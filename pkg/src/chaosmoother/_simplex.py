"""Nelder-Mead simplex descent restricted to a Euclidean ball."""

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericFailure


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    n_eval: int
    n_iter: int
    converged: bool
    history: np.ndarray


def project_ball(x, radius):
    """Radial projection onto ``{‖x‖ <= radius}``."""
    n = np.linalg.norm(x)
    if n > radius:
        return x * (radius / n)
    return x


def nelder_mead(fun, x0, radius, step, max_iter=1000, xtol=1e-10, ftol=1e-12,
                max_restarts=5, record=False):
    """Minimize ``fun`` over the ball of ``radius`` by projected Nelder-Mead.

    Every trial point is projected onto the ball. After the simplex collapses
    the search restarts from the incumbent with a fresh simplex (a stall is
    declared when the restart fails to improve by more than ``ftol``).

    Parameters
    ----------
    fun : callable
        Objective; may return ``inf`` for infeasible points.
    x0 : ndarray of shape (n,)
    radius : float
    step : float
        Edge length of the initial simplex.
    max_iter : int
        Iteration budget shared by all restarts.
    xtol, ftol : float
        Convergence thresholds on simplex diameter (relative to
        ``1 + ‖x_best‖``) and on the spread of simplex values
        (relative to ``1 + |f_best|``).

    Returns
    -------
    SimplexResult
    """
    n = x0.shape[0]
    n_eval = 0
    n_iter = 0
    hist = []
    best_x = project_ball(np.asarray(x0, dtype=float), radius)
    best_f = fun(best_x)
    n_eval += 1
    converged = False
    restarts = 0
    cur_step = step

    while True:
        simplex = np.empty((n + 1, n))
        fvals = np.empty(n + 1)
        simplex[0] = best_x
        fvals[0] = best_f
        for i in range(n):
            p = best_x.copy()
            # step away from the boundary when the point sits on it
            p[i] += cur_step if np.linalg.norm(best_x) < radius or best_x[i] <= 0 else -cur_step
            simplex[i + 1] = project_ball(p, radius)
            fvals[i + 1] = fun(simplex[i + 1])
            n_eval += 1
        local_conv = False
        while n_iter < max_iter:
            n_iter += 1
            order = np.argsort(fvals, kind="stable")
            simplex, fvals = simplex[order], fvals[order]
            if record:
                hist.append(fvals[0])
            diam = np.max(np.abs(simplex[1:] - simplex[0]))
            if (diam <= xtol * (1.0 + np.linalg.norm(simplex[0]))
                    and fvals[-1] - fvals[0] <= ftol * (1.0 + abs(fvals[0]))):
                local_conv = True
                break
            centroid = simplex[:-1].mean(axis=0)
            xr = project_ball(centroid + (centroid - simplex[-1]), radius)
            fr = fun(xr)
            n_eval += 1
            if fr < fvals[0]:
                xe = project_ball(centroid + 2.0 * (centroid - simplex[-1]), radius)
                fe = fun(xe)
                n_eval += 1
                if fe < fr:
                    simplex[-1], fvals[-1] = xe, fe
                else:
                    simplex[-1], fvals[-1] = xr, fr
                continue
            if fr < fvals[-2]:
                simplex[-1], fvals[-1] = xr, fr
                continue
            if fr < fvals[-1]:
                xc = project_ball(centroid + 0.5 * (xr - centroid), radius)
            else:
                xc = project_ball(centroid + 0.5 * (simplex[-1] - centroid), radius)
            fc = fun(xc)
            n_eval += 1
            if fc < min(fr, fvals[-1]):
                simplex[-1], fvals[-1] = xc, fc
                continue
            for i in range(1, n + 1):
                simplex[i] = project_ball(simplex[0] + 0.5 * (simplex[i] - simplex[0]), radius)
                fvals[i] = fun(simplex[i])
                n_eval += 1
        i0 = int(np.argmin(fvals))
        if fvals[i0] > best_f:
            raise NumericFailure("incumbent value increased during simplex descent")
        improvement = best_f - fvals[i0]
        best_x, best_f = simplex[i0].copy(), float(fvals[i0])
        if n_iter >= max_iter:
            break
        if local_conv:
            if restarts > 0 and improvement <= ftol * (1.0 + abs(best_f)):
                converged = True
                break
            if restarts >= max_restarts:
                converged = True
                break
            restarts += 1
            spread = np.max(np.abs(simplex - simplex[i0]))
            cur_step = max(10.0 * spread, xtol * (1.0 + np.linalg.norm(best_x)) * 100.0)
    return SimplexResult(best_x, best_f, n_eval, n_iter, converged,
                         np.asarray(hist, dtype=float))
