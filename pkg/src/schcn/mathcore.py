"""Scalar numerical primitives: Q-function, incomplete-gamma sums, quadrature, root finding.

Integration and root finding are thin contracts over ``scipy.integrate.quad``
and ``scipy.optimize.brentq``; the wrappers own cutoff selection, tolerance
checks and the package's error types.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special

from .errors import NoBracket, NonConvergent

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-10
    abs_tol: float = 0.0
    max_subdivisions: int = 200

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if not self.abs_tol >= 0:
            raise ValueError("abs_tol must be nonnegative")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be at least 1")


DEFAULT_QUADRATURE = QuadratureSpec()


def q_function(x):
    """Gaussian tail probability Q(x) = 0.5 * erfc(x / sqrt(2)).

    ``erfc`` (Cephes) keeps full relative precision in the upper tail, so
    Q(x) stays accurate down to the smallest subnormal instead of
    cancelling as ``1 - Phi(x)`` would.
    """
    if np.ndim(x) == 0:
        return 0.5 * float(special.erfc(float(x) / _SQRT2))
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / _SQRT2)


def erlang_cdf(k: int, y):
    """Regularized lower incomplete gamma P(k, y) for integer k >= 1.

    Evaluates ``1 - exp(-y) * sum_{m<k} y**m / m!``. Where that difference
    would cancel (y <= k) the complementary series ``exp(-y) * sum_{m>=k}``
    is summed instead; both are the same finite-sum identity.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(y < 0):
        raise ValueError("y must be nonnegative")
    out = np.empty_like(y)

    small = y <= k
    if np.any(small):
        ys = y[small]
        with np.errstate(divide="ignore"):
            logy = np.log(ys)
        total = np.zeros_like(ys)
        m = k
        while True:
            term = np.where(ys > 0, np.exp(m * logy - math.lgamma(m + 1) - ys), 0.0)
            total += term
            if np.all(term <= 1e-17 * total) or m > k + 2000:
                break
            m += 1
        out[small] = total

    big = ~small
    if np.any(big):
        yb = y[big]
        term = np.ones_like(yb)
        partial = np.ones_like(yb)
        for m in range(1, k):
            term = term * yb / m
            partial += term
        out[big] = -np.expm1(-yb) - np.exp(-yb) * (partial - 1.0)

    np.clip(out, 0.0, 1.0, out=out)
    return float(out[0]) if scalar else out


def g_lower(n: int, beta: float, x):
    """Integral of t**n * exp(-beta*t) over [0, x].

    Closed form n!/beta**(n+1) * [1 - exp(-beta x) sum_{m<=n} (beta x)^m/m!].
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not beta > 0:
        raise ValueError("beta must be positive")
    if n > 50:
        return special.gamma(n + 1) / beta ** (n + 1) * special.gammainc(n + 1, beta * np.asarray(x, dtype=float))
    scale = math.exp(math.lgamma(n + 1) - (n + 1) * math.log(beta))
    return scale * erlang_cdf(n + 1, beta * np.asarray(x, dtype=float) if np.ndim(x) else beta * float(x))


def _find_cutoff(f: Callable[[float], float], lower: float, spec: QuadratureSpec) -> float:
    # Integrands here decay at least exponentially; walk outward until two
    # consecutive probes are negligible relative to the peak seen so far.
    x = max(1.0, 2.0 * lower)
    peak = 0.0
    quiet = 0
    for _ in range(80):
        v = abs(f(x))
        peak = max(peak, v)
        floor = max(spec.abs_tol / 10.0, 1e-3 * spec.rel_tol * peak)
        if v <= floor and peak > 0:
            quiet += 1
            if quiet == 2:
                return x
        else:
            quiet = 0
        x *= 2.0
    raise NonConvergent("integrand does not decay; no finite cutoff found")


def _panels(lower: float, cut: float) -> list[float]:
    edges = [lower]
    if lower < 1e-3:
        e = max(lower * 10.0, 1e-300)
        while e < 1e-3:
            if e > edges[-1]:
                edges.append(e)
            e *= 1e3
        if edges[-1] < 1e-3:
            edges.append(1e-3)
    e = max(edges[-1], 1e-3)
    while e < 1.0:
        e = min(e * 10.0, 1.0)
        edges.append(e)
    while edges[-1] < cut:
        edges.append(min(2.0 * edges[-1], cut))
    return edges


def integrate_semi_infinite(
    f: Callable[[float], float],
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    lower: float = 0.0,
) -> float:
    """Integrate a decaying integrand over [lower, inf).

    The range is cut where the integrand falls below the tolerance floor,
    split into geometric panels and integrated adaptively. The remaining
    tail [cut, inf) is integrated too and must be within tolerance of zero.
    """
    cut = _find_cutoff(f, lower, spec)
    edges = _panels(lower, cut)
    total = 0.0
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, e, info = integrate.quad(
                f, a, b, epsabs=spec.abs_tol / len(edges), epsrel=spec.rel_tol,
                limit=spec.max_subdivisions, full_output=1,
            )[:3]
        total += val
        err += e
        if info["last"] >= spec.max_subdivisions and e > max(spec.abs_tol, spec.rel_tol * abs(val)):
            raise NonConvergent(f"subdivision limit reached on panel [{a:g}, {b:g}]")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        tail, tail_err = integrate.quad(f, cut, np.inf, epsabs=0.0, epsrel=1e-6, limit=50)
    if abs(tail) > max(spec.abs_tol, spec.rel_tol * abs(total)) * 10:
        raise NonConvergent("integrand tail beyond cutoff is not negligible")
    total += tail
    if err > max(spec.abs_tol, 10 * spec.rel_tol * abs(total)):
        raise NonConvergent(f"quadrature error {err:.3g} exceeds tolerance")
    return total


def find_root_bracketed(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Root of a continuous function with a sign change on [lo, hi] (Brent's method)."""
    if lo > hi:
        lo, hi = hi, lo
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if not (np.isfinite(flo) and np.isfinite(fhi)) or np.sign(flo) == np.sign(fhi):
        raise NoBracket(f"f({lo:g})={flo:g} and f({hi:g})={fhi:g} do not bracket a root")
    return optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)
