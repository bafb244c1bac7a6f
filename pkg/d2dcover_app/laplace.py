from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

_LAPLACE_METHODS = ("closed_form", "quadrature", "empirical")
DEFAULT_RTOL = 1e-8
MIN_TRUNCATION_M = 20_000.0
_FLAGGED_RTOL_LIMIT = 1e-6


class QuadratureError(RuntimeError):
    def __init__(self, message: str, achieved_tolerance: float) -> None:
        super().__init__(f"{message} (achieved relative tolerance {achieved_tolerance:.3g})")
        self.achieved_tolerance = achieved_tolerance


@dataclass(frozen=True)
class LaplaceEvaluation:
    value: float
    method: str
    abs_error: float | None = None
    ci_halfwidth: float | None = None
    detail: str = ""

    def __post_init__(self) -> None:
        if self.method not in _LAPLACE_METHODS:
            raise ValueError(f"unknown Laplace method {self.method!r}")

    def relative_deviation(self, other: "LaplaceEvaluation") -> float:
        return abs(self.value - other.value) / max(abs(other.value), 1e-300)


def truncation_radius(beta: float) -> float:
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if beta == 0:
        return MIN_TRUNCATION_M
    return max(40.0 / beta, MIN_TRUNCATION_M)


def _breakpoints(r_min: float, r_max: float, scale: float, alpha: float, beta: float) -> list[float]:
    points = {r_min, r_max}
    r_c = scale ** (1.0 / alpha)
    for k in range(-3, 7):
        points.add(r_c * 10.0**k)
    if beta > 0:
        for mult in (1.0, 5.0, 10.0, 20.0):
            points.add(mult / beta)
    return sorted(p for p in points if r_min <= p <= r_max)


def pgfl_exponent(
    scale: float,
    alpha: float,
    density: float,
    *,
    beta: float = 0.0,
    r_min: float = 0.0,
    r_max: float | None = None,
    rtol: float = DEFAULT_RTOL,
) -> tuple[float, float]:
    """Log of a PPP Laplace functional with Rayleigh fading.

    Returns the integral of ((1 + scale r^-alpha)^-1 - 1) 2 pi r density exp(-beta r)
    over [r_min, r_max] together with its absolute error estimate. The integrand is
    written as -scale / (r^alpha + scale) so r -> 0 needs no special casing.
    """
    if scale < 0 or density < 0:
        raise ValueError("transform scale and density must be >= 0")
    if scale == 0 or density == 0:
        return 0.0, 0.0
    upper = truncation_radius(beta) if r_max is None else r_max
    if upper <= r_min:
        return 0.0, 0.0

    def integrand(r: float) -> float:
        return -scale / (r**alpha + scale) * 2.0 * math.pi * r * density * math.exp(-beta * r)

    total = 0.0
    total_err = 0.0
    flagged: list[str] = []
    edges = _breakpoints(r_min, upper, scale, alpha, beta)
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        result = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=rtol, limit=200, full_output=1)
        value, err = float(result[0]), float(result[1])
        total += value
        total_err += err
        if len(result) > 3:
            flagged.append(str(result[3]).splitlines()[0])

    achieved = total_err / max(abs(total), 1e-300)
    if not math.isfinite(total):
        raise QuadratureError("PGFL integral is not finite", float("inf"))
    if flagged and achieved > _FLAGGED_RTOL_LIMIT:
        raise QuadratureError(f"PGFL quadrature did not converge: {flagged[0]}", achieved)
    return total, total_err


def laplace_from_exponent(exponent: float, exponent_err: float, detail: str = "") -> LaplaceEvaluation:
    value = math.exp(exponent)
    return LaplaceEvaluation(value=value, method="quadrature", abs_error=value * exponent_err, detail=detail)


def empirical_laplace_value(samples: np.ndarray, s: float) -> np.ndarray:
    return np.exp(-s * np.asarray(samples, dtype=float))
