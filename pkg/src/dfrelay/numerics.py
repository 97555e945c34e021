"""Exponential integral, tail quadrature and bracketed root finding."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize

EULER_GAMMA = 0.57721566490153286061

_FPMIN = 1e-300
_EPS = 1e-16


class NumericError(ArithmeticError):
    """A numerical routine failed to reach its tolerance.

    ``estimate`` carries the best value available when the routine gave up.
    """

    def __init__(self, message: str, estimate: float = math.nan):
        super().__init__(message)
        self.estimate = estimate


class BracketError(ValueError):
    pass


@dataclass(frozen=True)
class Tolerance:
    rel: float = 1e-12
    abs: float = 0.0
    max_iter: int = 200

    def __post_init__(self):
        if not (self.rel > 0 or self.abs > 0):
            raise ValueError("tolerance needs rel > 0 or abs > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


SPECIAL_TOL = Tolerance(rel=1e-12, abs=0.0, max_iter=200)
ROOT_TOL = Tolerance(rel=1e-9, abs=0.0, max_iter=200)


def exp_integral_e1(x: float) -> float:
    """E1(x) = integral of exp(-t)/t over (x, inf), for x > 0.

    Power series below 1, modified Lentz continued fraction from 1 upward.
    """
    x = float(x)
    if not x > 0:
        raise ValueError(f"E1 needs x > 0, got {x}")
    if x < 1.0:
        # E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
        total = 0.0
        term = 1.0
        k = 1
        while True:
            term *= -x / k
            contrib = term / k
            total += contrib
            if abs(contrib) < _EPS * abs(total) or k > 200:
                break
            k += 1
        return -EULER_GAMMA - math.log(x) - total
    if x > 745.0:
        return 0.0
    b = x + 1.0
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x)


def k_of_tau(tau: float) -> float:
    """Tail integral of exp(-x/2)/x over (tau, inf); equals E1(tau/2)."""
    if not tau > 0:
        raise ValueError(f"K(tau) needs tau > 0, got {tau}")
    return exp_integral_e1(0.5 * tau)


def integrate_tail(f: Callable[[float], float], lower: float,
                   tol: Tolerance = SPECIAL_TOL) -> float:
    """Adaptive quadrature of ``f`` over ``(lower, inf)``.

    Raises :class:`NumericError` when the reported error exceeds ``tol``.
    """
    with warnings.catch_warnings():
        # the error estimate below is the verdict, not quad's warning
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.quad(f, lower, np.inf, epsabs=tol.abs,
                                    epsrel=tol.rel, limit=tol.max_iter)
    bound = max(tol.abs, tol.rel * abs(value))
    if not err <= bound * 10:
        raise NumericError(
            f"quadrature error {err:.3g} above tolerance {bound:.3g}", value)
    return value


def bisect(g: Callable[[float], float], lo: float, hi: float,
           tol: Tolerance = ROOT_TOL) -> float:
    """Root of a monotone ``g`` bracketed by ``[lo, hi]``."""
    glo, ghi = g(lo), g(hi)
    if glo == 0:
        return lo
    if ghi == 0:
        return hi
    if np.sign(glo) == np.sign(ghi):
        raise BracketError(
            f"g({lo})={glo:.3g} and g({hi})={ghi:.3g} do not bracket a root")
    try:
        return optimize.bisect(g, lo, hi, xtol=max(tol.abs, 1e-300),
                               rtol=max(tol.rel, 4 * np.finfo(float).eps),
                               maxiter=tol.max_iter)
    except RuntimeError as exc:
        raise NumericError(str(exc), 0.5 * (lo + hi)) from exc
