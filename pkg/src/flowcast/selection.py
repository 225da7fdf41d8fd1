"""BIC-driven grid search over ARMA orders at a fixed differencing level."""

import math
from dataclasses import dataclass

from .arima import ArimaOrder, FitConfig, fit
from .errors import FitFailedError, InsufficientDataError, SelectionFailedError
from .series import difference

K_RULE = "k = p + q + 2 (AR and MA terms plus intercept and innovation variance)"


def bic(log_likelihood, k, n):
    """Bayesian information criterion ``k ln(n) - 2 log L``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return k * math.log(n) - 2.0 * log_likelihood


@dataclass(frozen=True)
class GridEntry:
    order: ArimaOrder
    bic: float = None
    failure: str = None
    n: int = None

    @property
    def failed(self):
        return self.failure is not None


@dataclass(frozen=True)
class SelectionResult:
    chosen: ArimaOrder
    chosen_model: object
    table: tuple
    n: int
    k_rule: str = K_RULE

    def to_dict(self):
        return {
            "chosen": {"p": self.chosen.p, "d": self.chosen.d, "q": self.chosen.q},
            "chosen_model": self.chosen_model.to_dict(),
            "n": self.n,
            "k_rule": self.k_rule,
            "table": [
                {
                    "p": e.order.p,
                    "d": e.order.d,
                    "q": e.order.q,
                    "bic": e.bic,
                    "failed": e.failure,
                    "n": e.n,
                }
                for e in self.table
            ],
        }


def grid_search(series, p_max=5, q_max=5, d=0, config=None):
    """Fit every ARIMA(p, d, q) with ``p <= p_max``, ``q <= q_max`` and keep the
    lowest BIC.

    All candidates skip the first ``p_max + q_max`` differenced points in their
    sum of squares, so every BIC is computed on the same ``n``. Ties go to the
    smaller ``p + q`` and then the smaller ``p``.
    """
    config = config or FitConfig()
    w_len = len(difference(series, d))
    conditioning = p_max + q_max
    if w_len - conditioning < 1:
        raise InsufficientDataError(f"grid with p_max={p_max}, q_max={q_max} leaves no common sample")

    n_common = w_len - conditioning
    table = []
    models = {}
    for p in range(p_max + 1):
        for q in range(q_max + 1):
            order = ArimaOrder(p, d, q)
            try:
                model = fit(series, order, config, conditioning=conditioning)
            except (FitFailedError, InsufficientDataError) as exc:
                table.append(GridEntry(order, failure=exc.kind, n=n_common))
                continue
            value = bic(model.log_likelihood, p + q + 2, model.n_effective)
            table.append(GridEntry(order, bic=value, n=model.n_effective))
            models[order] = model

    ok = [e for e in table if not e.failed]
    if not ok:
        raise SelectionFailedError(f"every candidate failed for d={d}, p_max={p_max}, q_max={q_max}")
    best = min(ok, key=lambda e: (e.bic, e.order.p + e.order.q, e.order.p))
    return SelectionResult(
        chosen=best.order,
        chosen_model=models[best.order],
        table=tuple(table),
        n=n_common,
    )
