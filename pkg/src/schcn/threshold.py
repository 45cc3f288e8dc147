"""SNR-threshold FER approximation model.

The average FER of a fading link is approximated by the outage probability
``F(gamma_t)`` of its instantaneous SNR. Two thresholds are provided:

* :func:`snr_threshold_proposed` – diversity-aware threshold
  ``gamma_{t,d} = (d * int_0^inf g**(d-1) P_f(g) dg) ** (1/d)``
* :func:`snr_threshold_prior` – the minimum-absolute-error threshold
  ``(int_0^inf (1 - P_f(g)) / g**2 dg) ** -1``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import NonConvergent
from .mathcore import QuadratureSpec, integrate_semi_infinite, q_function
from .units import linear_to_db

MAX_DIVERSITY = 16

_THRESHOLD_QUAD = QuadratureSpec(rel_tol=1e-11, abs_tol=0.0, max_subdivisions=400)


@dataclass(frozen=True)
class ModulationSpec:
    """Uncoded linear modulation over AWGN: ``P_f(g) = 1 - (1 - Q(sqrt(c g)))**L``."""

    c: float = 2.0
    L: int = 100

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("modulation constant c must be positive")
        if int(self.L) != self.L or self.L < 1:
            raise ValueError("frame length L must be a positive integer")


BPSK = ModulationSpec(c=2.0, L=100)


def instantaneous_fer_awgn(gamma, spec: ModulationSpec = BPSK):
    """Frame error probability at instantaneous SNR ``gamma`` (linear)."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("gamma must be nonnegative")
    q = q_function(np.sqrt(spec.c * g))
    # 1 - (1-q)^L without cancellation; exact down to subnormal q.
    out = -np.expm1(spec.L * np.log1p(-q))
    return float(out) if np.ndim(gamma) == 0 else out


def frame_success_awgn(gamma, spec: ModulationSpec = BPSK):
    """``(1 - Q(sqrt(c gamma)))**L``, the probability every symbol is detected."""
    q = q_function(np.sqrt(spec.c * np.asarray(gamma, dtype=float)))
    out = np.exp(spec.L * np.log1p(-q))
    return float(out) if np.ndim(gamma) == 0 else out


@lru_cache(maxsize=256)
def _proposed_cached(d: int, c: float, L: int) -> float:
    spec = ModulationSpec(c, L)
    # gamma**(d-1) evaluated in the log domain so large d cannot overflow.
    def integrand(g: float) -> float:
        p = instantaneous_fer_awgn(g, spec)
        if g == 0.0:
            return p if d == 1 else 0.0
        if p == 0.0:
            return 0.0
        return math.exp((d - 1) * math.log(g) + math.log(p))

    moment = integrate_semi_infinite(integrand, _THRESHOLD_QUAD)
    if not moment > 0:
        raise NonConvergent("threshold integral is not positive")
    return math.exp((math.log(d) + math.log(moment)) / d)


def snr_threshold_proposed(d: int, spec: ModulationSpec = BPSK) -> float:
    """Diversity-aware SNR threshold ``gamma_{t,d}`` (linear)."""
    if int(d) != d or d < 1:
        raise ValueError("diversity order must be a positive integer")
    if d > MAX_DIVERSITY:
        raise ValueError(f"diversity order above {MAX_DIVERSITY} is not supported")
    return _proposed_cached(int(d), float(spec.c), int(spec.L))


# Neglected contribution of the (divergent) region below the cutoff,
# relative to the integral itself.
_PRIOR_HEAD_TOL = 1e-12
_PRIOR_BODY_START = 1e-2


@lru_cache(maxsize=64)
def _prior_cached(c: float, L: int) -> float:
    spec = ModulationSpec(c, L)

    def integrand(g: float) -> float:
        return frame_success_awgn(g, spec) / (g * g)

    body = integrate_semi_infinite(integrand, _THRESHOLD_QUAD, lower=_PRIOR_BODY_START)
    # Near zero the integrand is ~ 2**-L / g**2, so [eps, ...) drops ~2**-L/eps.
    head_level = 0.5**L
    eps = head_level / (_PRIOR_HEAD_TOL * body)
    if eps >= _PRIOR_BODY_START:
        raise NonConvergent(
            f"prior threshold integral diverges at zero for L={L}; "
            "the success probability at zero SNR is not negligible"
        )
    head = _integrate_head(integrand, eps, _PRIOR_BODY_START)
    return 1.0 / (body + head)


def _integrate_head(f: Callable[[float], float], a: float, b: float) -> float:
    # log-spaced panels: the integrand spans many decades on [a, b].
    edges = np.geomspace(a, b, max(2, int(math.log10(b / a)) + 1))
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-11, limit=200)[0]
    return total


def snr_threshold_prior(spec: ModulationSpec = BPSK) -> float:
    """Minimum-absolute-error SNR threshold (linear).

    The defining integral diverges like ``2**-L / gamma`` at the origin; the
    lower limit is moved up to the point where that divergent piece is
    ``1e-12`` of the integral. For frames too short for such a cutoff to
    exist (roughly L < 45 with BPSK) :class:`NonConvergent` is raised.
    """
    return _prior_cached(float(spec.c), int(spec.L))


def average_fer_exact(pdf: Callable[[float], float], spec: ModulationSpec = BPSK,
                      quad: QuadratureSpec | None = None) -> float:
    """Reference average FER ``int P_f(g) pdf(g) dg`` over the fading distribution."""
    quad = quad or QuadratureSpec(rel_tol=1e-10, abs_tol=0.0, max_subdivisions=400)

    def integrand(g: float) -> float:
        return instantaneous_fer_awgn(g, spec) * pdf(g)

    val = integrate_semi_infinite(integrand, quad)
    return min(max(val, 0.0), 1.0)


def average_fer_outage(cdf: Callable[[float], float], gamma_t: float) -> float:
    """Outage-form FER: the SNR CDF evaluated at the threshold."""
    if gamma_t <= 0:
        return 0.0
    return float(cdf(gamma_t))


@dataclass
class ThresholdTable:
    """Rows of (d, L, c, gamma_t, gamma_t_db); ``d`` is ``None`` for the prior threshold."""

    entries: list[tuple] = field(default_factory=list)

    def add(self, d: int | None, spec: ModulationSpec, gamma_t: float) -> None:
        self.entries.append((d, spec.L, spec.c, gamma_t, linear_to_db(gamma_t)))

    @classmethod
    def build(cls, diversities, frame_lengths, c: float = 2.0, prior: bool = False) -> "ThresholdTable":
        table = cls()
        for L in frame_lengths:
            spec = ModulationSpec(c, L)
            for d in diversities:
                table.add(d, spec, snr_threshold_proposed(d, spec))
            if prior:
                table.add(None, spec, snr_threshold_prior(spec))
        return table
