"""Derivative-free Nelder-Mead simplex minimisation.

The algorithm is an ask/tell state machine compiled with numba, so any
driver loop can own the objective: :func:`nelder_mead` drives it from
Python with an arbitrary callable, and compiled callers can run the same
loop in nopython mode (see ``arima._minimise``). Coefficients and the
stopping rule are fixed so runs are reproducible:

* reflection 1.0, expansion 2.0, contraction 0.5, shrink 0.5;
* the initial simplex is ``x0`` plus ``x0 + step * e_i`` for each axis;
* vertices are ordered with a stable sort, so ties keep insertion order;
* the run converges when ``f_worst - f_best <= tol * max(1, |f_best|)``.
"""

from dataclasses import dataclass

import numba
import numpy as np

REFLECT = 1.0
EXPAND = 2.0
CONTRACT = 0.5
SHRINK = 0.5

# istate slots
_PHASE, _K, _IT, _NFEV, _CONVERGED, _DONE, _MAXIT = range(7)
# fstate slots
_FR, _TOL = range(2)

_INIT, _REFLECT, _EXPAND, _OUTSIDE, _INSIDE, _SHRINK = range(6)


@dataclass(frozen=True)
class SimplexResult:
    x: np.ndarray
    fun: float
    converged: bool
    iterations: int
    evaluations: int


@numba.njit(cache=True)
def simplex_start(x0, step, max_iter, tol):
    """Fresh state tuple ``(sim, fv, pts, istate, fstate)``."""
    n = x0.size
    sim = np.empty((n + 1, n))
    sim[0] = x0
    for i in range(n):
        sim[i + 1] = x0
        sim[i + 1, i] += step
    fv = np.full(n + 1, np.inf)
    # rows: centroid, reflected point, expansion/contraction trial
    pts = np.zeros((3, n))
    istate = np.zeros(7, dtype=np.int64)
    istate[_MAXIT] = max_iter
    fstate = np.zeros(2)
    fstate[_TOL] = tol
    return sim, fv, pts, istate, fstate


@numba.njit(cache=True)
def simplex_ask(state):
    sim, fv, pts, istate, fstate = state
    phase = istate[_PHASE]
    if phase == _INIT or phase == _SHRINK:
        return sim[istate[_K]]
    if phase == _REFLECT:
        return pts[1]
    return pts[2]


@numba.njit(cache=True)
def _begin_iteration(state):
    sim, fv, pts, istate, fstate = state
    n = fv.size - 1
    idx = np.argsort(fv, kind="mergesort")
    sim[:] = sim[idx]
    fv[:] = fv[idx]
    fbest = fv[0]
    if fv[n] - fbest <= fstate[_TOL] * max(1.0, abs(fbest)):
        istate[_CONVERGED] = 1
        istate[_DONE] = 1
        return
    if istate[_IT] >= istate[_MAXIT]:
        istate[_DONE] = 1
        return
    istate[_IT] += 1
    centroid = pts[0]
    centroid[:] = 0.0
    for i in range(n):
        centroid += sim[i]
    centroid /= n
    pts[1] = centroid + REFLECT * (centroid - sim[n])
    istate[_PHASE] = _REFLECT


@numba.njit(cache=True)
def _begin_shrink(state):
    sim, fv, pts, istate, fstate = state
    n = fv.size - 1
    for i in range(1, n + 1):
        sim[i] = sim[0] + SHRINK * (sim[i] - sim[0])
    istate[_K] = 1
    istate[_PHASE] = _SHRINK


@numba.njit(cache=True)
def simplex_tell(state, fx):
    """Record ``fx`` for the last asked point; returns True once finished."""
    sim, fv, pts, istate, fstate = state
    n = fv.size - 1
    istate[_NFEV] += 1
    phase = istate[_PHASE]
    if phase == _INIT or phase == _SHRINK:
        fv[istate[_K]] = fx
        istate[_K] += 1
        if istate[_K] > n:
            _begin_iteration(state)
    elif phase == _REFLECT:
        fstate[_FR] = fx
        centroid = pts[0]
        if fx < fv[0]:
            pts[2] = centroid + EXPAND * (pts[1] - centroid)
            istate[_PHASE] = _EXPAND
        elif fx < fv[n - 1]:
            sim[n] = pts[1]
            fv[n] = fx
            _begin_iteration(state)
        elif fx < fv[n]:
            pts[2] = centroid + CONTRACT * (pts[1] - centroid)
            istate[_PHASE] = _OUTSIDE
        else:
            pts[2] = centroid + CONTRACT * (sim[n] - centroid)
            istate[_PHASE] = _INSIDE
    elif phase == _EXPAND:
        if fx < fstate[_FR]:
            sim[n] = pts[2]
            fv[n] = fx
        else:
            sim[n] = pts[1]
            fv[n] = fstate[_FR]
        _begin_iteration(state)
    elif phase == _OUTSIDE:
        if fx <= fstate[_FR]:
            sim[n] = pts[2]
            fv[n] = fx
            _begin_iteration(state)
        else:
            _begin_shrink(state)
    else:
        if fx < fv[n]:
            sim[n] = pts[2]
            fv[n] = fx
            _begin_iteration(state)
        else:
            _begin_shrink(state)
    return istate[_DONE] == 1


@numba.njit(cache=True)
def simplex_result(state):
    """``(x_best, f_best, converged, iterations, evaluations)``."""
    sim, fv, pts, istate, fstate = state
    i = np.argmin(fv)
    return sim[i].copy(), fv[i], istate[_CONVERGED] == 1, istate[_IT], istate[_NFEV]


def as_result(raw):
    x, fun, converged, it, nfev = raw
    return SimplexResult(x=x, fun=float(fun), converged=bool(converged), iterations=int(it), evaluations=int(nfev))


def nelder_mead(f, x0, step=0.1, max_iter=2000, tol=1e-8):
    """Minimise the Python callable ``f`` starting from ``x0``.

    Parameters
    ----------
    f : callable
        Objective taking a float64 vector and returning a float.
    x0 : array_like
        Start point; the initial simplex has edge ``step`` along each axis.
    max_iter : int
        Cap on simplex iterations (not function evaluations).
    tol : float
        Relative spread of vertex values at which the run is converged.
    """
    x0 = np.ascontiguousarray(x0, dtype=float).reshape(-1)
    state = simplex_start(x0, float(step), int(max_iter), float(tol))
    done = False
    while not done:
        x = simplex_ask(state)
        done = simplex_tell(state, float(f(x.copy())))
    return as_result(simplex_result(state))
