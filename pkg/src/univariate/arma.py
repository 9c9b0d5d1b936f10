"""Conditional-sum-of-squares ARMA machinery shared by the univariate models.

Lag polynomials are coefficient arrays in the backshift operator:
``ar = [1, -phi_1, ..., -phi_p]`` and ``ma = [1, theta_1, ..., theta_q]`` so
that ``ar(B) z_t = ma(B) e_t``.
"""

import logging
from typing import Callable, Iterable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.optimize import least_squares
from scipy.signal import lfilter

logger = logging.getLogger(__name__)

ROOT_MARGIN = 1e-8


def ar_polynomial(phi: Iterable[float]) -> np.ndarray:
    return np.r_[1.0, -np.asarray(list(phi), dtype=float)]


def ma_polynomial(theta: Iterable[float]) -> np.ndarray:
    return np.r_[1.0, np.asarray(list(theta), dtype=float)]


def is_stable(poly: np.ndarray) -> bool:
    """True when every root of ``poly(z)`` lies outside the unit circle."""
    coefs = np.trim_zeros(np.asarray(poly, dtype=float), "b")
    if coefs.size <= 1:
        return True
    roots = np.roots(coefs[::-1])
    return bool(np.all(np.abs(roots) > 1.0 + ROOT_MARGIN))


def arma_residuals(z: np.ndarray, ar: np.ndarray, ma: np.ndarray) -> np.ndarray:
    """Innovations e with zero pre-sample values."""
    return lfilter(ar, ma, z)


def aicc(sse: float, n: int, k: int) -> float:
    sse = max(sse, np.finfo(float).tiny)
    if n - k - 1 <= 0:
        return np.inf
    return n * np.log(sse / n) + 2 * k + 2 * k * (k + 1) / (n - k - 1)


class ArmaFit(BaseModel):
    """One CSS fit of fixed orders."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    params: np.ndarray
    ar: np.ndarray
    ma: np.ndarray
    sse: float
    n: int


PolyBuilder = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


def fit_css(
    z: np.ndarray,
    n_params: int,
    build: PolyBuilder,
    x0: Optional[np.ndarray] = None,
) -> Optional[ArmaFit]:
    """Minimize the conditional sum of squares over `n_params` coefficients.

    `build` maps a parameter vector to (ar, ma) polynomials. Returns None when
    the optimum is not stationary and invertible.
    """
    n = z.size
    penalty = np.full(n, 1e6 * (np.std(z) + 1.0))

    def residuals(params: np.ndarray) -> np.ndarray:
        ar, ma = build(params)
        e = arma_residuals(z, ar, ma)
        if not np.all(np.isfinite(e)):
            return penalty
        return e

    if n_params == 0:
        ar, ma = build(np.zeros(0))
        e = arma_residuals(z, ar, ma)
        return ArmaFit(params=np.zeros(0), ar=ar, ma=ma, sse=float(e @ e), n=n)

    start = np.zeros(n_params) if x0 is None else np.asarray(x0, dtype=float)
    try:
        solution = least_squares(residuals, start, method="lm", xtol=1e-10, ftol=1e-10)
    except (ValueError, np.linalg.LinAlgError) as exc:
        logger.debug("CSS optimizer failed: %s", exc)
        return None
    ar, ma = build(solution.x)
    if not (is_stable(ar) and is_stable(ma)):
        return None
    e = arma_residuals(z, ar, ma)
    if not np.all(np.isfinite(e)):
        return None
    return ArmaFit(params=solution.x, ar=ar, ma=ma, sse=float(e @ e), n=n)


def plain_orders(p: int, q: int) -> PolyBuilder:
    """Builder for a non-seasonal ARMA(p, q)."""
    def build(params: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return ar_polynomial(params[:p]), ma_polynomial(params[p:p + q])
    return build


def candidate_orders(max_p: int, max_q: int) -> List[Tuple[int, int]]:
    """Orders sorted by the AICc tie-break: smallest p+q, then smallest p."""
    orders = [(p, q) for p in range(max_p + 1) for q in range(max_q + 1)]
    return sorted(orders, key=lambda o: (o[0] + o[1], o[0]))


def select_arma(z: np.ndarray, max_p: int, max_q: int, extra_params: int = 1) -> Tuple[Tuple[int, int], ArmaFit]:
    """Pick ARMA orders by AICc over {0..max_p} x {0..max_q}.

    Raises:
        ValueError: if no order yields a stationary, invertible fit
    """
    best: Optional[Tuple[float, Tuple[int, int], ArmaFit]] = None
    for p, q in candidate_orders(max_p, max_q):
        fit = fit_css(z, p + q, plain_orders(p, q))
        if fit is None:
            continue
        score = aicc(fit.sse, fit.n, p + q + extra_params)
        if best is None or score < best[0]:
            best = (score, (p, q), fit)
    if best is None:
        raise ValueError("no stationary and invertible ARMA fit")
    return best[1], best[2]


def arma_forecast(z: np.ndarray, ar: np.ndarray, ma: np.ndarray, horizon: int) -> np.ndarray:
    """Mean forecast of the ARMA recursion with future innovations set to zero."""
    e = arma_residuals(z, ar, ma)
    phi = -ar[1:]
    theta = ma[1:]
    p, q = phi.size, theta.size
    n = z.size
    z_ext = np.concatenate([z, np.zeros(horizon)])
    e_ext = np.concatenate([e, np.zeros(horizon)])
    for k in range(horizon):
        t = n + k
        value = 0.0
        if p:
            lo = max(t - p, 0)
            value += phi[: t - lo] @ z_ext[lo:t][::-1]
        if q:
            lo = max(t - q, 0)
            value += theta[: t - lo] @ e_ext[lo:t][::-1]
        z_ext[t] = value
    return z_ext[n:]
