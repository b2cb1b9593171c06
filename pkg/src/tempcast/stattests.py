"""Least squares and the augmented Dickey-Fuller unit-root test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Asymptotic critical values, constant-only regression without trend.
ADF_CRITICAL_VALUES = {"1%": -3.43, "5%": -2.86, "10%": -2.57}


class SingularDesignError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class OlsFit:
    coefficients: np.ndarray
    residuals: np.ndarray
    standard_errors: np.ndarray
    n_obs: int
    df_resid: int

    @property
    def sigma2(self) -> float:
        return float(self.residuals @ self.residuals) / self.df_resid

    @property
    def tvalues(self) -> np.ndarray:
        return self.coefficients / self.standard_errors


def ols(X, y, rcond: float = 1e-10) -> OlsFit:
    """Ordinary least squares through a column-scaled QR decomposition.

    Parameters
    ----------
    X : array_like, shape (n, k)
        Design matrix; must have full column rank and ``n > k``.
    y : array_like, shape (n,)
    rcond : float
        A diagonal entry of R smaller than ``rcond`` times the largest one
        marks the design as singular.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if y.shape != (n,):
        raise ValueError(f"y has shape {y.shape}, expected ({n},)")
    if n <= k:
        raise ValueError(f"need more rows ({n}) than columns ({k})")
    scale = np.sqrt((X * X).sum(axis=0))
    if np.any(scale == 0):
        raise SingularDesignError("design has an all-zero column")
    Q, R = np.linalg.qr(X / scale)
    diag = np.abs(np.diag(R))
    if diag.min() <= rcond * diag.max():
        raise SingularDesignError("design matrix is rank deficient")
    z = np.linalg.solve(R, Q.T @ y)
    beta = z / scale
    resid = y - X @ beta
    df = n - k
    sigma2 = float(resid @ resid) / df
    Rinv = np.linalg.solve(R, np.eye(k))
    cov_scaled = Rinv @ Rinv.T
    se = np.sqrt(sigma2 * np.diag(cov_scaled)) / scale
    return OlsFit(beta, resid, se, n, df)


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    lags_used: int
    n_obs: int
    critical_values: dict

    @property
    def is_stationary_5pct(self) -> bool:
        return self.statistic < self.critical_values["5%"]


def schwert_lag(n: int) -> int:
    return int(math.floor(12.0 * (n / 100.0) ** 0.25))


def adf_test(series, max_lag: int | None = None) -> AdfResult:
    """Augmented Dickey-Fuller test with a constant and no trend.

    Regresses ``dy_t`` on ``1, y_{t-1}, dy_{t-1}, ..., dy_{t-k}`` and returns the
    t-statistic of the ``y_{t-1}`` coefficient.  ``max_lag=None`` uses the
    Schwert rule ``floor(12 (n/100)^(1/4))``; the lag is used as given, not
    searched.
    """
    y = np.asarray(series, dtype=float)
    n = y.size
    if n < 20:
        raise ValueError(f"ADF needs at least 20 observations, got {n}")
    k = schwert_lag(n) if max_lag is None else int(max_lag)
    if k < 0:
        raise ValueError("lag must be >= 0")
    dy = np.diff(y)
    n_eff = dy.size - k
    # need the regression to keep some residual degrees of freedom
    if n_eff <= k + 2 + 1:
        raise ValueError(f"series of length {n} too short for {k} lags")
    cols = [np.ones(n_eff), y[k:-1]]
    cols += [dy[k - i : dy.size - i] for i in range(1, k + 1)]
    fit = ols(np.column_stack(cols), dy[k:])
    stat = float(fit.coefficients[1] / fit.standard_errors[1])
    return AdfResult(stat, k, n_eff, dict(ADF_CRITICAL_VALUES))
