"""ARIMA(p, d, q) estimation by conditional sum of squares.

On the d-times differenced series ``w`` the model is

    w(t) = c + sum_i phi_i w(t - i) + e(t) + sum_j theta_j e(t - j)

and residuals are recovered by running that recursion forward with
``e(t) = 0`` for the first ``p`` points. Parameters are packed as
``(c, phi_1..phi_p, theta_1..theta_q)``.
"""

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import (
    AlignmentError,
    FitFailedError,
    InsufficientDataError,
    InvalidParameterError,
)
from .optimize import as_result, simplex_ask, simplex_result, simplex_start, simplex_tell
from .rng import XorShift64Star
from .series import TimeSeries, difference, integrate_values

MIN_EXTRA_OBS = 20
# Root magnitudes must clear 1 + ROOT_MARGIN to count as causal / invertible.
ROOT_MARGIN = 1e-6
# The optimiser penalty bites slightly earlier so accepted fits clear ROOT_MARGIN.
_PENALTY_MARGIN = 1e-5
_SSE_CAP = 1e150
SIGMA2_FLOOR = 1e-300


@dataclass(frozen=True)
class ArimaOrder:
    p: int
    d: int
    q: int

    def __post_init__(self):
        for name in ("p", "d", "q"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @classmethod
    def parse(cls, text):
        """Parse ``"p,d,q"``."""
        parts = [s.strip() for s in str(text).split(",")]
        if len(parts) != 3:
            raise ValueError(f"order must look like p,d,q; got {text!r}")
        return cls(*(int(s) for s in parts))

    @property
    def n_params(self):
        return 1 + self.p + self.q

    def __str__(self):
        return f"({self.p},{self.d},{self.q})"


@dataclass(frozen=True)
class FitConfig:
    max_optimizer_iterations: int = 2000
    convergence_tolerance: float = 1e-8
    stationarity_penalty: float = 1e12
    seed: int = 0
    restarts: int = 2
    p_cap: int = 5
    q_cap: int = 5
    d_cap: int = 2

    def __post_init__(self):
        if self.max_optimizer_iterations <= 0:
            raise ValueError("max_optimizer_iterations must be positive")
        if not self.convergence_tolerance > 0:
            raise ValueError("convergence_tolerance must be positive")
        if not self.stationarity_penalty > 0:
            raise ValueError("stationarity_penalty must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be non-negative")

    def check_order(self, order):
        if order.p > self.p_cap or order.q > self.q_cap or order.d > self.d_cap:
            raise ValueError(
                f"order {order} exceeds caps p<={self.p_cap}, d<={self.d_cap}, q<={self.q_cap}"
            )


@dataclass(frozen=True)
class ArimaModel:
    """A fitted (or hand-specified) model.

    ``conditioning`` is how many leading differenced points are excluded from
    the sum of squares; it equals ``p`` for an ordinary fit and is larger when
    candidates are trimmed to a common sample.
    """

    order: ArimaOrder
    intercept: float
    ar_coeffs: tuple = ()
    ma_coeffs: tuple = ()
    sigma2: float = 1.0
    log_likelihood: float = float("nan")
    n_effective: int = 0
    conditioning: int = field(default=None)

    def __post_init__(self):
        ar = tuple(float(v) for v in self.ar_coeffs)
        ma = tuple(float(v) for v in self.ma_coeffs)
        if len(ar) != self.order.p or len(ma) != self.order.q:
            raise ValueError(f"coefficient counts do not match order {self.order}")
        object.__setattr__(self, "ar_coeffs", ar)
        object.__setattr__(self, "ma_coeffs", ma)
        object.__setattr__(self, "intercept", float(self.intercept))
        if self.conditioning is None:
            object.__setattr__(self, "conditioning", self.order.p)
        elif self.conditioning < self.order.p:
            raise ValueError("conditioning cannot be smaller than p")

    @property
    def params(self):
        return np.array((self.intercept,) + self.ar_coeffs + self.ma_coeffs)

    def to_dict(self):
        return {
            "order": {"p": self.order.p, "d": self.order.d, "q": self.order.q},
            "intercept": self.intercept,
            "ar_coeffs": list(self.ar_coeffs),
            "ma_coeffs": list(self.ma_coeffs),
            "sigma2": self.sigma2,
            "log_likelihood": self.log_likelihood,
            "n_effective": self.n_effective,
        }


def gaussian_loglik(sigma2, n):
    """Concentrated Gaussian log-likelihood ``-(n/2)(ln(2 pi sigma2) + 1)``."""
    return -0.5 * n * (math.log(2.0 * math.pi * sigma2) + 1.0)


def split_params(params, order):
    params = np.asarray(params, dtype=float)
    if params.size != order.n_params:
        raise ValueError(f"expected {order.n_params} parameters for {order}, got {params.size}")
    return params[0], params[1 : 1 + order.p], params[1 + order.p :]


def polynomial_roots(coeffs, sign):
    """Roots of ``1 + sign * (c_1 z + ... + c_k z^k)``, via numpy.

    The reciprocal roots come from the monic reversed polynomial, which
    stays well conditioned when ``c_k`` is tiny; zero reciprocals (roots at
    infinity) are dropped.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    recip = np.roots(np.concatenate(([1.0], sign * coeffs)))
    recip = recip[recip != 0]
    with np.errstate(over="ignore", divide="ignore"):
        return (1.0 / recip).astype(complex)


def is_causal_invertible(ar, ma, margin=ROOT_MARGIN):
    """True when the AR and MA polynomials both have all roots beyond ``1 + margin``."""
    for roots in (polynomial_roots(ar, -1.0), polynomial_roots(ma, 1.0)):
        if roots.size and np.min(np.abs(roots)) <= 1.0 + margin:
            return False
    return True


# ---------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True)
def _stable_scaled(coeffs, sign, limit):
    """Step-down (reverse Durbin-Levinson) test that every reciprocal root of
    ``1 + sign*(c_1 z + ...)`` has modulus below ``limit``."""
    k = coeffs.size
    a = np.empty(k)
    scale = 1.0
    for i in range(k):
        scale /= limit
        a[i] = -sign * coeffs[i] * scale
    for m in range(k, 0, -1):
        kappa = a[m - 1]
        if abs(kappa) >= 1.0:
            return False
        denom = 1.0 - kappa * kappa
        b = a[: m - 1].copy()
        for i in range(m - 1):
            b[i] = (a[i] + kappa * a[m - 2 - i]) / denom
        a[: m - 1] = b
    return True


@numba.njit(cache=True)
def _excess_modulus(coeffs, sign, limit):
    """Sum of reciprocal-root moduli above ``limit`` for ``1 + sign*(c_1 z + ...)``.

    Reciprocal roots are the eigenvalues of the companion matrix of
    ``z^k + sign*(c_1 z^(k-1) + ... + c_k)``.
    """
    k = coeffs.size
    if k == 0:
        return 0.0
    s = 0.0
    for i in range(k):
        s += abs(coeffs[i])
    if s < limit or _stable_scaled(coeffs, sign, limit):
        return 0.0
    m = np.zeros((k, k), dtype=np.complex128)
    for i in range(k):
        m[0, i] = -sign * coeffs[i]
    for i in range(1, k):
        m[i, i - 1] = 1.0
    ev = np.linalg.eigvals(m)
    out = 0.0
    for i in range(k):
        a = abs(ev[i])
        if a > limit:
            out += a - limit
    # The step-down test can flag a root sitting exactly on the limit.
    return max(out, 1e-300)


@numba.njit(cache=True)
def _residual_kernel(params, w, p, q):
    n = w.size
    c = params[0]
    e = np.zeros(n)
    # AR part first (no loop-carried dependency), then the MA recursion.
    for t in range(p, n):
        e[t] = w[t] - c
    for i in range(1, p + 1):
        phi = params[i]
        for t in range(p, n):
            e[t] -= phi * w[t - i]
    if q == 0:
        return e
    theta = params[p + 1 :]
    for t in range(p, n):
        acc = e[t]
        for j in range(1, min(q, t - p) + 1):
            acc -= theta[j - 1] * e[t - j]
        e[t] = acc
    return e


@numba.njit(cache=True)
def _sse_kernel(params, w, p, q, skip):
    e = _residual_kernel(params, w, p, q)
    s = 0.0
    for t in range(skip, w.size):
        s += e[t] * e[t]
    return s


@numba.njit(cache=True)
def _violation(params, p, q, limit):
    return _excess_modulus(params[1 : 1 + p], -1.0, limit) + _excess_modulus(params[1 + p :], 1.0, limit)


@numba.njit(cache=True)
def _objective(params, args):
    w, p, q, skip, penalty, limit = args
    v = _violation(params, p, q, limit)
    sse = _sse_kernel(params, w, p, q, skip)
    if not (sse < _SSE_CAP):
        sse = _SSE_CAP
    if v > 0.0:
        return sse + penalty * v
    return sse


@numba.njit(cache=True)
def _minimise(x0, args, max_iter, tol):
    state = simplex_start(x0, 0.1, max_iter, tol)
    done = False
    while not done:
        done = simplex_tell(state, _objective(simplex_ask(state), args))
    return simplex_result(state)


# ---------------------------------------------------------------------------
# public operations


def _check_length(n, order, what="series"):
    if n <= order.p + order.d:
        raise InsufficientDataError(f"{what} of length {n} too short for ARIMA{order}")


def _resolve_conditioning(order, conditioning, n_w):
    cond = order.p if conditioning is None else int(conditioning)
    if cond < order.p:
        raise ValueError("conditioning cannot be smaller than p")
    if cond >= n_w:
        raise InsufficientDataError(f"conditioning {cond} leaves no residuals out of {n_w}")
    return cond


def residuals(model, series):
    """Residuals from ``t = conditioning`` onward on the differenced scale."""
    order = model.order
    _check_length(len(series), order)
    w = difference(series, order.d)
    cond = _resolve_conditioning(order, model.conditioning, len(w))
    e = _residual_kernel(model.params, np.ascontiguousarray(w.values), order.p, order.q)
    return w.with_values(e[cond:], offset=cond)


def css_objective(params, series, order, config=None, conditioning=None):
    """Conditional sum of squares, plus the root-violation penalty."""
    config = config or FitConfig()
    _check_length(len(series), order)
    w = np.ascontiguousarray(difference(series, order.d).values)
    skip = _resolve_conditioning(order, conditioning, w.size)
    params = np.ascontiguousarray(params, dtype=float)
    split_params(params, order)
    args = (w, order.p, order.q, skip, float(config.stationarity_penalty), 1.0 / (1.0 + _PENALTY_MARGIN))
    return float(_objective(params, args))


def fit(series, order, config=None, conditioning=None):
    """Estimate ``order`` on ``series`` by minimising the conditional sum of squares.

    Each run is a Nelder-Mead search; the first starts from the mean of the
    differenced series with zero coefficients and every restart starts from
    the best point so far plus seeded Gaussian jitter of scale 0.1.

    Raises
    ------
    InsufficientDataError
        If ``len(series) < p + d + q + 20``.
    FitFailedError
        If no run converges or the best point violates the root constraints.
    """
    config = config or FitConfig()
    config.check_order(order)
    need = order.p + order.d + order.q + MIN_EXTRA_OBS
    if len(series) < need:
        raise InsufficientDataError(f"ARIMA{order} needs at least {need} observations, got {len(series)}")
    w = np.ascontiguousarray(difference(series, order.d).values)
    skip = _resolve_conditioning(order, conditioning, w.size)
    n_eff = w.size - skip
    limit = 1.0 / (1.0 + _PENALTY_MARGIN)
    args = (w, order.p, order.q, skip, float(config.stationarity_penalty), limit)

    x0 = np.zeros(order.n_params)
    x0[0] = w.mean()
    rng = XorShift64Star(config.seed)
    best = None
    start = x0
    for run in range(config.restarts + 1):
        if run > 0:
            start = best.x + 0.1 * rng.normals(order.n_params)
        res = as_result(
            _minimise(
                np.ascontiguousarray(start, dtype=float),
                args,
                config.max_optimizer_iterations,
                float(config.convergence_tolerance),
            )
        )
        if best is None or res.fun < best.fun:
            best = res
        if res is best and res.converged and _violation(res.x, order.p, order.q, limit) == 0.0:
            break
    else:
        if not best.converged:
            raise FitFailedError(f"ARIMA{order} did not converge after {config.restarts} restarts", best.fun)
    c, ar, ma = split_params(best.x, order)
    if _violation(best.x, order.p, order.q, limit) > 0.0 or not is_causal_invertible(ar, ma):
        raise FitFailedError(f"ARIMA{order} best point violates root constraints", best.fun)
    sse = float(_sse_kernel(best.x, w, order.p, order.q, skip))
    sigma2 = max(sse / n_eff, SIGMA2_FLOOR)
    return ArimaModel(
        order=order,
        intercept=c,
        ar_coeffs=ar,
        ma_coeffs=ma,
        sigma2=sigma2,
        log_likelihood=gaussian_loglik(sigma2, n_eff),
        n_effective=n_eff,
        conditioning=skip,
    )


def _predict_w(model, w_hist, e_hist, horizon):
    p, q = model.order.p, model.order.q
    phi = np.array(model.ar_coeffs)
    theta = np.array(model.ma_coeffs)
    w_ext = list(w_hist[-p:]) if p else []
    e_ext = list(e_hist[-q:]) if q else []
    out = np.empty(horizon)
    for h in range(horizon):
        val = model.intercept
        for i in range(1, p + 1):
            val += phi[i - 1] * w_ext[-i]
        for j in range(1, q + 1):
            val += theta[j - 1] * e_ext[-j]
        out[h] = val
        if p:
            w_ext.append(val)
        if q:
            e_ext.append(0.0)
    return out


def forecast(model, history, horizon):
    """``horizon`` point forecasts following ``history``, on the original scale."""
    if horizon < 1:
        raise ValueError("horizon must be positive")
    order = model.order
    _check_length(len(history), order, "history")
    w = np.ascontiguousarray(difference(history, order.d).values)
    e = _residual_kernel(model.params, w, order.p, order.q)
    w_hat = _predict_w(model, w, e, horizon)
    if order.d == 0:
        return w_hat
    return integrate_values(w_hat, history.values[-order.d :])


def rolling_one_step(model, train, test):
    """One-step forecasts for each point of ``test`` with parameters held fixed.

    The prediction for ``test[i]`` uses ``train`` plus ``test[:i]`` as history.
    """
    if len(test) == 0:
        raise InsufficientDataError("test series is empty")
    if train.interval_seconds != test.interval_seconds or test.start_time != train.end_time:
        raise AlignmentError(
            f"test starts {test.start_time.isoformat()} but train ends {train.end_time.isoformat()}"
        )
    order = model.order
    _check_length(len(train), order, "train")
    x = np.concatenate((train.values, test.values))
    d, p, q = order.d, order.p, order.q
    w = np.diff(x, n=d) if d else x.copy()
    w = np.ascontiguousarray(w)
    e = _residual_kernel(model.params, w, p, q)
    phi = np.array(model.ar_coeffs)
    theta = np.array(model.ma_coeffs)

    n_train = len(train)
    # Index into w of the first test point.
    first = n_train - d
    preds = np.empty(len(test))
    binom = [math.comb(d, k) * (-1) ** k for k in range(1, d + 1)]
    for i in range(len(test)):
        t = first + i
        val = model.intercept
        for k in range(1, p + 1):
            val += phi[k - 1] * w[t - k]
        for j in range(1, q + 1):
            if t - j >= p:
                val += theta[j - 1] * e[t - j]
        # Undo differencing with the observed original-scale values.
        xi = n_train + i
        for k in range(1, d + 1):
            val -= binom[k - 1] * x[xi - k]
        preds[i] = val
    return preds


def simulate_arima(order, params, n, seed, start_time=None, interval_seconds=900):
    """Draw a length-``n`` ARIMA path.

    ``params`` is ``(c, phi, theta, sigma2)``. The ARMA recursion runs from
    zero state for ``max(200, 10 (p + q))`` burn-in steps that are discarded,
    then the kept block is integrated ``d`` times from zero anchors.
    """
    c, phi, theta, sigma2 = params
    phi = np.asarray(phi, dtype=float).reshape(-1)
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if phi.size != order.p or theta.size != order.q:
        raise InvalidParameterError(f"coefficient counts do not match order {order}")
    if n <= 0:
        raise InvalidParameterError("n must be positive")
    if not sigma2 >= 0:
        raise InvalidParameterError("sigma2 must be non-negative")
    if not is_causal_invertible(phi, theta):
        raise InvalidParameterError("parameters are not causal and invertible")
    p, q = order.p, order.q
    burn = max(200, 10 * (p + q))
    total = n + burn
    rng = XorShift64Star(seed)
    innov = math.sqrt(sigma2) * rng.normals(total)
    w = np.zeros(total)
    for t in range(total):
        val = c + innov[t]
        for i in range(1, p + 1):
            if t - i >= 0:
                val += phi[i - 1] * w[t - i]
        for j in range(1, q + 1):
            if t - j >= 0:
                val += theta[j - 1] * innov[t - j]
        w[t] = val
    kept = w[burn:]
    values = integrate_values(kept, np.zeros(order.d)) if order.d else kept
    kwargs = {"interval_seconds": interval_seconds}
    if start_time is not None:
        kwargs["start_time"] = start_time
    return TimeSeries(values, **kwargs)
