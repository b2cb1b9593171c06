"""ARIMA / seasonal ARIMA with an optional exogenous regressor.

Estimation minimises the conditional sum of squares (CSS) of one-step
innovations with a Nelder-Mead simplex.  The model on the working series
``u`` (differenced, exogenous effect removed) is

    u_t = c + sum_i a_i u_{t-i} + e_t + sum_j m_j e_{t-j}

where ``a`` and ``m`` are the lag coefficients of the expanded products
``phi(B) Phi(B^s)`` and ``theta(B) Theta(B^s)``.  Pre-sample innovations are
zero and the first ``p + P*s`` working values only serve as conditioning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .stattests import SingularDesignError, ols

ROOT_MARGIN = 1e-6
Z95 = 1.96


class ArimaError(ValueError):
    pass


class ConvergenceError(ArimaError):
    def __init__(self, message: str, best_params: np.ndarray, best_value: float):
        super().__init__(message)
        self.best_params = best_params
        self.best_value = best_value


@dataclass(frozen=True)
class SeasonalOrder:
    P: int
    D: int
    Q: int
    s: int

    def __post_init__(self):
        if min(self.P, self.D, self.Q) < 0:
            raise ArimaError("seasonal orders must be >= 0")
        if self.s < 2:
            raise ArimaError(f"seasonal period must be >= 2, got {self.s}")


@dataclass(frozen=True)
class ArimaSpec:
    p: int
    d: int
    q: int
    seasonal: SeasonalOrder | None = None
    use_exogenous: bool = False

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0:
            raise ArimaError("orders must be >= 0")
        if isinstance(self.seasonal, (tuple, list)):
            object.__setattr__(self, "seasonal", SeasonalOrder(*self.seasonal))
        if self.p + self.q + self.P + self.Q == 0:
            raise ArimaError(f"{self.label} has no AR or MA terms to estimate")

    @property
    def P(self) -> int:
        return self.seasonal.P if self.seasonal else 0

    @property
    def D(self) -> int:
        return self.seasonal.D if self.seasonal else 0

    @property
    def Q(self) -> int:
        return self.seasonal.Q if self.seasonal else 0

    @property
    def s(self) -> int:
        return self.seasonal.s if self.seasonal else 0

    @property
    def n_arma(self) -> int:
        return self.p + self.q + self.P + self.Q

    @property
    def n_params(self) -> int:
        """Estimated parameters: intercept, ARMA terms, exogenous beta, sigma2."""
        return 1 + self.n_arma + int(self.use_exogenous) + 1

    @property
    def label(self) -> str:
        out = f"({self.p},{self.d},{self.q})"
        if self.seasonal:
            out += f"x({self.P},{self.D},{self.Q},{self.s})"
        return ("SARIMAX" if self.use_exogenous else "ARIMA") + out

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "d": self.d,
            "q": self.q,
            "seasonal": None
            if self.seasonal is None
            else {"P": self.P, "D": self.D, "Q": self.Q, "s": self.s},
            "use_exogenous": self.use_exogenous,
        }


# -- polynomial helpers ------------------------------------------------------


def _lag_poly(coefs, step: int = 1, sign: float = -1.0) -> np.ndarray:
    """``1 + sign * sum_k coefs[k] B^{step (k+1)}`` as ascending coefficients."""
    coefs = np.asarray(coefs, dtype=float)
    out = np.zeros(step * coefs.size + 1)
    out[0] = 1.0
    out[step::step] = sign * coefs
    return out


def _roots_ok(coefs, step: int = 1, sign: float = -1.0) -> bool:
    coefs = np.asarray(coefs, dtype=float)
    if coefs.size == 0 or not np.any(coefs):
        return True
    # inverse roots in u = B^step come from the monic reversed polynomial,
    # which stays well conditioned when the top coefficient is tiny;
    # |B| = |u|^(1/step) > 1 + margin  <=>  |1/u| < (1 + margin)^-step
    inverse = np.roots(np.concatenate(([1.0], sign * coefs)))
    return bool(np.all(np.abs(inverse) < (1.0 + ROOT_MARGIN) ** -step))


def ar_polynomial(phi, seasonal_phi=(), s: int = 0) -> np.ndarray:
    return np.convolve(_lag_poly(phi), _lag_poly(seasonal_phi, max(s, 1)))


def ma_polynomial(theta, seasonal_theta=(), s: int = 0) -> np.ndarray:
    return np.convolve(_lag_poly(theta, sign=1.0), _lag_poly(seasonal_theta, max(s, 1), sign=1.0))


def psi_weights(ar_poly, ma_poly, n: int) -> np.ndarray:
    """First ``n`` MA(infinity) weights of ``ma_poly(B) / ar_poly(B)``."""
    impulse = np.zeros(n)
    impulse[0] = 1.0
    return lfilter(ma_poly, ar_poly, impulse)


# -- differencing bookkeeping ------------------------------------------------


def _difference_stages(x: np.ndarray, spec: ArimaSpec) -> list[tuple[int, np.ndarray]]:
    """Successive differencing stages, seasonal first.

    Returns ``[(lag, input_to_this_stage), ...]`` plus the final working
    series as ``(0, w)``.
    """
    stages = []
    for _ in range(spec.D):
        stages.append((spec.s, x))
        x = x[spec.s :] - x[: -spec.s]
    for _ in range(spec.d):
        stages.append((1, x))
        x = np.diff(x)
    stages.append((0, x))
    return stages


def _integrate(stages, forecast: np.ndarray) -> np.ndarray:
    """Undo the differencing stages for values that follow the observed data."""
    out = forecast
    for lag, prev in reversed(stages[:-1]):
        ext = np.concatenate((prev, np.empty(out.size)))
        n0 = prev.size
        for h in range(out.size):
            ext[n0 + h] = out[h] + ext[n0 + h - lag]
        out = ext[n0:]
    return out


def _difference(x: np.ndarray, spec: ArimaSpec) -> np.ndarray:
    return _difference_stages(x, spec)[-1][1]


# -- CSS core ----------------------------------------------------------------


@dataclass(frozen=True)
class _Layout:
    spec: ArimaSpec

    def split(self, params: np.ndarray):
        s = self.spec
        i = 1
        phi = params[i : i + s.p]
        i += s.p
        theta = params[i : i + s.q]
        i += s.q
        sphi = params[i : i + s.P]
        i += s.P
        stheta = params[i : i + s.Q]
        return params[0], phi, theta, sphi, stheta

    def admissible(self, params: np.ndarray) -> bool:
        _, phi, theta, sphi, stheta = self.split(params)
        s = self.spec.s
        return (
            _roots_ok(phi)
            and _roots_ok(sphi, s)
            and _roots_ok(theta, sign=1.0)
            and _roots_ok(stheta, s, sign=1.0)
        )

    def polys(self, params: np.ndarray):
        c, phi, theta, sphi, stheta = self.split(params)
        s = self.spec.s
        return c, ar_polynomial(phi, sphi, s), ma_polynomial(theta, stheta, s)


def css_residuals(u: np.ndarray, c: float, ar_poly: np.ndarray, ma_poly: np.ndarray) -> np.ndarray:
    """Innovations ``e_t`` for ``t >= len(ar_poly) - 1`` with zero pre-sample shocks."""
    r = ar_poly.size - 1
    z = np.convolve(u, ar_poly)[r : u.size] - c
    return lfilter([1.0], ma_poly, z)


def css_fitted(u: np.ndarray, resid: np.ndarray, c: float, ar_poly: np.ndarray, ma_poly: np.ndarray) -> np.ndarray:
    """One-step predictions of ``u_t`` (``t >= r``) from the explicit recursion."""
    r = ar_poly.size - 1
    n = u.size
    ar_part = np.full(n - r, c)
    for i in range(1, ar_poly.size):
        if ar_poly[i]:
            ar_part -= ar_poly[i] * u[r - i : n - i]
    ma_part = np.zeros(n - r)
    for j in range(1, ma_poly.size):
        if ma_poly[j] and j < n - r:
            ma_part[j:] += ma_poly[j] * resid[: n - r - j]
    return ar_part + ma_part


def _yule_walker(x: np.ndarray, order: int) -> np.ndarray:
    if order == 0:
        return np.zeros(0)
    x = x - x.mean()
    n = x.size
    acov = np.array([x[: n - k] @ x[k:] / n for k in range(order + 1)])
    if acov[0] == 0:
        return np.zeros(order)
    idx = np.abs(np.subtract.outer(np.arange(order), np.arange(order)))
    try:
        phi = np.linalg.solve(acov[idx], acov[1:])
    except np.linalg.LinAlgError:
        return np.zeros(order)
    return phi if _roots_ok(phi) else np.zeros(order)


# -- fitted model ------------------------------------------------------------


@dataclass(frozen=True)
class ArimaFit:
    spec: ArimaSpec
    intercept: float
    phi: np.ndarray
    theta: np.ndarray
    seasonal_phi: np.ndarray
    seasonal_theta: np.ndarray
    beta_exog: float | None
    sigma2: float
    residuals: np.ndarray
    loglik: float
    aic: float
    bic: float
    n_obs: int
    series: np.ndarray = field(repr=False)
    exog: np.ndarray | None = field(default=None, repr=False)
    converged: bool = True
    iterations: int = 0

    @property
    def params(self) -> np.ndarray:
        return np.concatenate(
            ([self.intercept], self.phi, self.theta, self.seasonal_phi, self.seasonal_theta)
        )

    @property
    def ar_poly(self) -> np.ndarray:
        return ar_polynomial(self.phi, self.seasonal_phi, self.spec.s)

    @property
    def ma_poly(self) -> np.ndarray:
        return ma_polynomial(self.theta, self.seasonal_theta, self.spec.s)

    @property
    def offset(self) -> int:
        """Index in ``series`` of the first residual."""
        return self.spec.d + self.spec.D * self.spec.s + self.ar_poly.size - 1

    def working_series(self) -> np.ndarray:
        u = _difference(np.asarray(self.series, dtype=float), self.spec)
        if self.beta_exog:
            u = u - self.beta_exog * _difference(self.exog, self.spec)
        return u

    def fitted_working(self) -> np.ndarray:
        """In-sample one-step predictions of the working series."""
        return css_fitted(self.working_series(), self.residuals, self.intercept, self.ar_poly, self.ma_poly)

    def one_step_predictions(self) -> tuple[np.ndarray, np.ndarray]:
        """Level-scale one-step predictions ``(index, prediction)``.

        Undoing the differencing adds only observed values, so the level
        prediction error equals the working-series innovation.
        """
        idx = np.arange(self.offset, len(self.series))
        return idx, np.asarray(self.series)[idx] - self.residuals

    def roots_ok(self) -> bool:
        return _Layout(self.spec).admissible(self.params)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "label": self.spec.label,
            "intercept": self.intercept,
            "phi": self.phi.tolist(),
            "theta": self.theta.tolist(),
            "seasonal_phi": self.seasonal_phi.tolist(),
            "seasonal_theta": self.seasonal_theta.tolist(),
            "beta_exog": self.beta_exog,
            "sigma2": self.sigma2,
            "loglik": self.loglik,
            "aic": self.aic,
            "bic": self.bic,
            "n_obs": self.n_obs,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def information_criteria(loglik: float, k: int, n: int) -> tuple[float, float]:
    return -2.0 * loglik + 2.0 * k, -2.0 * loglik + k * math.log(n)


def _check_exog(spec: ArimaSpec, n: int, exog) -> np.ndarray | None:
    if spec.use_exogenous:
        if exog is None:
            raise ArimaError(f"{spec.label} needs an exogenous series")
        x = np.asarray(exog, dtype=float)
        if x.shape != (n,):
            raise ArimaError(f"exogenous series has length {x.size}, series has {n}")
        if not np.all(np.isfinite(x)):
            raise ArimaError("exogenous series must be finite")
        return x
    if exog is not None:
        raise ArimaError(f"{spec.label} does not take an exogenous series")
    return None


def _exog_beta(w: np.ndarray, wx: np.ndarray) -> float:
    """Slope of ``w`` on ``wx`` (with intercept); zero when ``wx`` is constant."""
    if np.ptp(wx) == 0:
        return 0.0
    try:
        fit = ols(np.column_stack((np.ones(w.size), wx)), w)
    except SingularDesignError:
        return 0.0
    return float(fit.coefficients[1])


def from_params(
    spec: ArimaSpec,
    series,
    params,
    exog=None,
    beta_exog: float | None = None,
    converged: bool = True,
    iterations: int = 0,
) -> ArimaFit:
    """Condition a model with fixed parameters on ``series``.

    ``params`` is ``[c, phi..., theta..., seasonal_phi..., seasonal_theta...]``.
    With an exogenous regressor and ``beta_exog=None`` the slope is estimated
    by least squares on the differenced data.  Used both for the final step
    of :func:`fit` and to roll a fitted model forward over new observations.
    """
    y = np.asarray(series, dtype=float)
    x = _check_exog(spec, y.size, exog)
    params = np.asarray(params, dtype=float)
    layout = _Layout(spec)
    if params.size != 1 + spec.n_arma:
        raise ArimaError(f"expected {1 + spec.n_arma} parameters, got {params.size}")
    w = _difference(y, spec)
    if x is not None:
        wx = _difference(x, spec)
        if beta_exog is None:
            beta_exog = _exog_beta(w, wx)
        if beta_exog:
            w = w - beta_exog * wx
    else:
        beta_exog = None
    c, ar, ma = layout.polys(params)
    if w.size <= ar.size - 1:
        raise ArimaError("series too short for the requested orders")
    resid = css_residuals(w, c, ar, ma)
    n = resid.size
    sigma2 = float(resid @ resid) / n
    if not math.isfinite(sigma2) or sigma2 <= 0:
        raise ArimaError(f"degenerate residual variance {sigma2}")
    loglik = -0.5 * n * (math.log(2.0 * math.pi * sigma2) + 1.0)
    aic, bic = information_criteria(loglik, spec.n_params, n)
    _, phi, theta, sphi, stheta = layout.split(params)
    resid.flags.writeable = False
    y.flags.writeable = False
    return ArimaFit(
        spec=spec,
        intercept=float(c),
        phi=phi.copy(),
        theta=theta.copy(),
        seasonal_phi=sphi.copy(),
        seasonal_theta=stheta.copy(),
        beta_exog=beta_exog,
        sigma2=sigma2,
        residuals=resid,
        loglik=loglik,
        aic=aic,
        bic=bic,
        n_obs=n,
        series=y,
        exog=x,
        converged=converged,
        iterations=iterations,
    )


def fit(
    series,
    spec: ArimaSpec,
    exog=None,
    maxiter: int = 2000,
    tol: float = 1e-8,
    restarts: int = 2,
    strict: bool = True,
) -> ArimaFit:
    """Estimate an ARIMA model by conditional sum of squares.

    Parameters
    ----------
    series : array_like or TimeSeries
        Level-scale observations.
    spec : ArimaSpec
    exog : array_like, optional
        Exogenous regressor aligned with ``series``; required iff
        ``spec.use_exogenous``.
    maxiter : int
        Simplex iterations per restart.
    tol : float
        Absolute tolerance on the objective (mean squared innovation).
    restarts : int
        Extra simplex runs started from the best point so far; a collapsed
        simplex in many dimensions often stalls short of the minimum.
    strict : bool
        Raise :class:`ConvergenceError` when the iteration budget runs out.
        Otherwise return the best point with ``converged=False``.
    """
    y = np.asarray(series, dtype=float)
    x = _check_exog(spec, y.size, exog)
    need = 10 * (spec.n_arma + 1) + spec.d + spec.D * spec.s
    if y.size < need:
        raise ArimaError(f"{spec.label} needs at least {need} observations, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise ArimaError("series must be finite")

    w = _difference(y, spec)
    beta = None
    if x is not None:
        beta = _exog_beta(w, _difference(x, spec))
        if beta:
            w = w - beta * _difference(x, spec)

    layout = _Layout(spec)
    phi0 = _yule_walker(w, spec.p)
    x0 = np.zeros(1 + spec.n_arma)
    x0[1 : 1 + spec.p] = phi0
    x0[0] = w.mean() * (1.0 - phi0.sum())

    def objective(params):
        if not layout.admissible(params):
            return np.inf
        c, ar, ma = layout.polys(params)
        e = css_residuals(w, c, ar, ma)
        v = float(e @ e) / e.size
        return v if math.isfinite(v) else np.inf

    scale = max(float(np.std(w)), 1e-8)
    best_x, best_f = x0, objective(x0)
    if not math.isfinite(best_f):
        raise ArimaError("initial parameters are not admissible")
    converged, iterations = False, 0
    for attempt in range(restarts + 1):
        simplex = np.tile(best_x, (best_x.size + 1, 1))
        steps = np.full(best_x.size, 0.1)
        steps[0] = 0.1 * scale
        simplex[1:] += np.diag(steps)
        res = minimize(
            objective,
            best_x,
            method="Nelder-Mead",
            options={
                "maxiter": maxiter,
                "maxfev": 4 * maxiter,
                "fatol": tol,
                "xatol": np.inf,
                "initial_simplex": simplex,
                "adaptive": best_x.size > 3,
            },
        )
        iterations += int(res.nit)
        improved = best_f - res.fun
        if res.fun <= best_f:
            best_x, best_f = res.x, float(res.fun)
        converged = bool(res.success)
        if converged and attempt > 0 and improved <= tol:
            break
    if not converged and strict:
        raise ConvergenceError(
            f"{spec.label}: simplex did not converge in {maxiter} iterations", best_x, best_f
        )
    return from_params(spec, y, best_x, x, beta, converged=converged, iterations=iterations)


def extend(fitted: ArimaFit, series, exog=None) -> ArimaFit:
    """Re-condition ``fitted``'s parameters (and beta) on a longer ``series``."""
    return from_params(
        fitted.spec,
        series,
        fitted.params,
        exog,
        beta_exog=fitted.beta_exog if fitted.spec.use_exogenous else None,
        converged=fitted.converged,
        iterations=fitted.iterations,
    )


@dataclass(frozen=True)
class Forecast:
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def forecast(fitted: ArimaFit, horizon: int, future_exog=None) -> Forecast:
    """Multi-step forecasts from the end of the conditioning series.

    Future innovations are set to zero; the 95% band uses the residual
    variance and the MA(infinity) weights of the integrated model.
    """
    spec = fitted.spec
    if horizon < 1:
        raise ArimaError("horizon must be >= 1")
    if spec.use_exogenous:
        if future_exog is None:
            raise ArimaError(f"{spec.label} needs future exogenous values")
        fx = np.asarray(future_exog, dtype=float)
        if fx.shape != (horizon,):
            raise ArimaError(f"future exogenous length {fx.size} != horizon {horizon}")
    elif future_exog is not None:
        raise ArimaError(f"{spec.label} does not take exogenous values")

    y = np.asarray(fitted.series, dtype=float)
    stages = _difference_stages(y, spec)
    u = fitted.working_series()
    ar, ma = fitted.ar_poly, fitted.ma_poly
    r, qm = ar.size - 1, ma.size - 1
    e = np.concatenate((np.zeros(max(qm - fitted.residuals.size, 0)), fitted.residuals))
    u_ext = np.concatenate((u, np.zeros(horizon)))
    e_ext = np.concatenate((e, np.zeros(horizon)))
    n, ne = u.size, e.size
    for h in range(horizon):
        t = n + h
        val = fitted.intercept
        for i in range(1, r + 1):
            val -= ar[i] * u_ext[t - i]
        for j in range(1, qm + 1):
            val += ma[j] * e_ext[ne + h - j]
        u_ext[t] = val
    w_fc = u_ext[n:].copy()
    if spec.use_exogenous and fitted.beta_exog:
        x_all = np.concatenate((fitted.exog, fx))
        w_fc += fitted.beta_exog * _difference(x_all, spec)[-horizon:]
    mean = _integrate(stages, w_fc)

    full_ar = ar.copy()
    for _ in range(spec.D):
        full_ar = np.convolve(full_ar, _lag_poly([1.0], spec.s))
    for _ in range(spec.d):
        full_ar = np.convolve(full_ar, [1.0, -1.0])
    psi = psi_weights(full_ar, ma, horizon)
    half = Z95 * np.sqrt(fitted.sigma2 * np.cumsum(psi**2))
    return Forecast(mean, mean - half, mean + half)


@dataclass(frozen=True)
class GridResult:
    ranked: list  # [(spec, ArimaFit)], best first
    failures: list  # [(spec, message)]


def grid_search(series, specs, exog=None, **fit_kwargs) -> GridResult:
    """Fit every candidate and rank the successes by AIC (BIC breaks ties)."""
    specs = list(specs)
    if not specs:
        raise ArimaError("grid_search needs at least one candidate spec")
    done, failures = [], []
    for spec in specs:
        try:
            done.append((spec, fit(series, spec, exog if spec.use_exogenous else None, **fit_kwargs)))
        except ArimaError as exc:
            failures.append((spec, str(exc)))
    if not done:
        detail = "; ".join(f"{s.label}: {m}" for s, m in failures)
        raise ArimaError(f"every candidate failed: {detail}")
    done.sort(key=lambda sf: (sf[1].aic, sf[1].bic))
    return GridResult(done, failures)


def simulate(
    n: int,
    phi=(),
    theta=(),
    intercept: float = 0.0,
    sigma: float = 1.0,
    seed: int | None = None,
    burn: int = 500,
) -> np.ndarray:
    """Draw an ARMA path; handy for tests and demos."""
    rng = np.random.default_rng(seed)
    e = rng.normal(0.0, sigma, n + burn)
    ar = _lag_poly(phi)
    ma = _lag_poly(theta, sign=1.0)
    x = lfilter(ma, ar, e) + intercept / ar.sum()
    return x[burn:]


__all__ = [
    "ArimaError",
    "ArimaFit",
    "ArimaSpec",
    "ConvergenceError",
    "Forecast",
    "GridResult",
    "SeasonalOrder",
    "extend",
    "fit",
    "forecast",
    "from_params",
    "grid_search",
    "information_criteria",
    "psi_weights",
    "simulate",
]
