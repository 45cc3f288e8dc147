"""Closed-form CDF and FER of selective combining in hybrid AF/DF relay networks.

Each relay link is modelled by its hybrid AF/DF end-to-end SNR, which is
approximated by an exponential of rate ``lambda_eq``. The combiner output is
``gamma_0 + (sum of the n_c largest of n i.i.d. Exp(lambda_eq))`` whose
Laplace transform is a rational function; partial fractions turn it into a
finite mixture of Erlang CDFs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import mpmath
import numpy as np

from .errors import DegenerateRates
from .mathcore import erlang_cdf
from .threshold import BPSK, ModulationSpec, snr_threshold_proposed

MAX_RELAYS = 10
EQUAL_RATE_TOL = 1e-6
_BASE_DPS = 40


@dataclass(frozen=True)
class RateParams:
    """Exponential rates of the direct, hop-1 and hop-2 SNRs plus the fitted hybrid-link rate.

    ``lambda_sr``/``lambda_rd`` may be ``None`` when ``lambda_eq`` is given directly.
    """

    lambda_0: float
    lambda_eq: float
    lambda_sr: float | None = None
    lambda_rd: float | None = None
    lambda_eq_mode: str = "given"

    def __post_init__(self):
        if not (self.lambda_0 > 0 and self.lambda_eq > 0):
            raise ValueError("rates must be positive")
        for r in (self.lambda_sr, self.lambda_rd):
            if r is not None and r < 0:
                raise ValueError("hop rates must be nonnegative")

    @classmethod
    def from_links(cls, lambda_0: float, lambda_sr: float, lambda_rd: float,
                   mode: str = "upper", d: int | None = None,
                   spec: ModulationSpec = BPSK) -> "RateParams":
        """Rates for a given set of link rates; ``mode`` selects the lambda_eq bound.

        ``"upper"`` uses lambda_sr + lambda_rd; ``"lower"`` uses
        lambda_sr * gamma_{t,1} / gamma_{t,d} + lambda_rd and needs ``d``.
        """
        tmp = cls(lambda_0, max(lambda_sr + lambda_rd, 1e-300), lambda_sr, lambda_rd)
        lower, upper = lambda_eq_bounds(tmp, d or 1, spec)
        if mode == "upper":
            return cls(lambda_0, upper, lambda_sr, lambda_rd, "upper_bound")
        if mode == "lower":
            if d is None:
                raise ValueError("lower-bound mode needs the diversity order d")
            return cls(lambda_0, lower, lambda_sr, lambda_rd, f"lower_bound({d})")
        raise ValueError(f"unknown lambda_eq mode {mode!r}")


def relay_link_cdf(gamma, rates: RateParams, spec: ModulationSpec = BPSK):
    """Piecewise CDF of one hybrid relay link's end-to-end SNR.

    Below gamma_{t,1} the relay runs AF and the link behaves like the minimum
    of both hops; above it the relay has decoded and only the second hop counts.
    """
    lsr, lrd = rates.lambda_sr, rates.lambda_rd
    if lsr is None or lrd is None:
        raise ValueError("relay_link_cdf needs lambda_sr and lambda_rd")
    gt1 = snr_threshold_proposed(1, spec)
    g = np.asarray(gamma, dtype=float)
    out = np.where(
        g < gt1,
        -np.expm1(-(lsr + lrd) * g),
        -np.expm1(-lsr * gt1 - lrd * g),
    )
    return float(out) if np.ndim(gamma) == 0 else out


def lambda_eq_bounds(rates: RateParams, d: int, spec: ModulationSpec = BPSK) -> tuple[float, float]:
    lsr, lrd = rates.lambda_sr, rates.lambda_rd
    if lsr is None or lrd is None:
        raise ValueError("bounds need lambda_sr and lambda_rd")
    ratio = snr_threshold_proposed(1, spec) / snr_threshold_proposed(d, spec)
    return lsr * ratio + lrd, lsr + lrd


def _selection_constant(n: int, n_c: int) -> float:
    """N! / (N_c! N_c^(N-N_c)): normalisation of the top-N_c sum transform."""
    return math.factorial(n) / (math.factorial(n_c) * n_c ** (n - n_c))


@dataclass(frozen=True)
class _Coefficients:
    c: object
    theta_0: object
    theta: tuple
    alpha: tuple
    beta_0: object
    beta: tuple
    # (weight, rate, order): F(g) = sum weight * P(order, rate * g)
    terms: tuple


def _coefficients_distinct(n, n_c, lam0, lameq, ctx) -> _Coefficients:
    K = n - n_c
    c = ctx.mpf(math.factorial(n)) / (math.factorial(n_c) * ctx.mpf(n_c) ** K) * lam0 * lameq**n
    pole = [None] + [(1 + ctx.mpf(j) / n_c) * lameq for j in range(1, K + 1)]

    theta_0 = ctx.mpf(1)
    for j in range(1, K + 1):
        theta_0 /= pole[j] - lam0
    theta = []
    for k in range(1, K + 1):
        denom = lam0 - pole[k]
        for m in range(1, K + 1):
            if m != k:
                denom *= ctx.mpf(m - k) / n_c * lameq
        theta.append(1 / denom)

    alpha = []
    for i in range(1, n_c + 1):
        m = n_c - i
        acc = theta_0 / (lam0 - lameq) ** (m + 1)
        for k in range(1, K + 1):
            acc += theta[k - 1] / (ctx.mpf(k) / n_c * lameq) ** (m + 1)
        alpha.append(c * (-1) ** m * acc)
    beta_0 = c * theta_0 / (lameq - lam0) ** n_c
    beta = [c * theta[j - 1] / (-ctx.mpf(j) / n_c * lameq) ** n_c for j in range(1, K + 1)]

    terms = [(alpha[i - 1] / lameq**i, lameq, i) for i in range(1, n_c + 1)]
    terms.append((beta_0 / lam0, lam0, 1))
    terms += [(beta[j - 1] / pole[j], pole[j], 1) for j in range(1, K + 1)]
    return _Coefficients(c, theta_0, tuple(theta), tuple(alpha), beta_0, tuple(beta), tuple(terms))


def _coefficients_equal(n, n_c, lam, ctx) -> _Coefficients:
    K = n - n_c
    c = ctx.mpf(math.factorial(n)) / (math.factorial(n_c) * ctx.mpf(n_c) ** K) * lam ** (n + 1)
    pole = [None] + [(1 + ctx.mpf(j) / n_c) * lam for j in range(1, K + 1)]
    theta = []
    for k in range(1, K + 1):
        denom = ctx.mpf(1)
        for m in range(1, K + 1):
            if m != k:
                denom *= ctx.mpf(m - k) / n_c * lam
        theta.append(1 / denom)

    alpha = []
    for i in range(1, n_c + 2):
        m = n_c + 1 - i
        if K == 0:
            alpha.append(c if m == 0 else ctx.mpf(0))
            continue
        acc = ctx.mpf(0)
        for k in range(1, K + 1):
            acc += theta[k - 1] / (ctx.mpf(k) / n_c * lam) ** (m + 1)
        alpha.append(c * (-1) ** m * acc)
    beta = [c * theta[j - 1] / (-ctx.mpf(j) / n_c * lam) ** (n_c + 1) for j in range(1, K + 1)]

    terms = [(alpha[i - 1] / lam**i, lam, i) for i in range(1, n_c + 2)]
    terms += [(beta[j - 1] / pole[j], pole[j], 1) for j in range(1, K + 1)]
    return _Coefficients(c, ctx.mpf(1), tuple(theta), tuple(alpha), ctx.mpf(0), tuple(beta), tuple(terms))


@dataclass(frozen=True)
class SchcnCdf:
    """CDF of ``gamma_0 + sum of the n_c largest of n i.i.d. Exp(lambda_eq)``.

    Immutable; coefficients are computed once in extended precision and
    cached per working precision.
    """

    n: int
    n_c: int
    rates: RateParams
    case: str
    _mp_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def lambda_0(self) -> float:
        return self.rates.lambda_0

    @property
    def lambda_eq(self) -> float:
        return self.rates.lambda_eq

    def coefficients(self, dps: int = _BASE_DPS) -> _Coefficients:
        if dps not in self._mp_cache:
            ctx = mpmath.mp.clone()
            ctx.dps = dps
            lam0, lameq = ctx.mpf(self.lambda_0), ctx.mpf(self.lambda_eq)
            if self.case == "equal":
                coeffs = _coefficients_equal(self.n, self.n_c, lameq, ctx)
            else:
                coeffs = _coefficients_distinct(self.n, self.n_c, lam0, lameq, ctx)
            self._mp_cache[dps] = coeffs
        return self._mp_cache[dps]

    @cached_property
    def _float_terms(self):
        terms = self.coefficients().terms
        w = np.array([float(t[0]) for t in terms])
        r = np.array([float(t[1]) for t in terms])
        k = np.array([t[2] for t in terms], dtype=int)
        return w, r, k

    @cached_property
    def separation(self) -> float:
        """Smallest relative gap between lambda_0 and the lambda_eq pole family."""
        if self.case == "equal":
            return 1.0
        poles = [(1 + j / self.n_c) * self.lambda_eq for j in range(0, self.n - self.n_c + 1)]
        return min(abs(self.lambda_0 - p) / max(self.lambda_0, p) for p in poles)

    @property
    def weights(self) -> np.ndarray:
        return self._float_terms[0]

    @property
    def rates_vector(self) -> np.ndarray:
        return self._float_terms[1]

    @property
    def orders(self) -> np.ndarray:
        return self._float_terms[2]

    def laplace_product(self, s):
        """Transform of the PDF in product form (the definition)."""
        n, n_c, l0, le = self.n, self.n_c, self.lambda_0, self.lambda_eq
        val = _selection_constant(n, n_c) * l0 * le**n / ((s + le) ** n_c * (s + l0))
        for j in range(1, n - n_c + 1):
            val = val / (s + (1 + j / n_c) * le)
        return val

    def laplace_partial_fractions(self, s, dps: int = _BASE_DPS):
        """Transform reassembled from the partial-fraction coefficients."""
        co = self.coefficients(dps)
        ctx = mpmath.mp.clone()
        ctx.dps = dps
        s = ctx.mpf(s)
        K = self.n - self.n_c
        if self.case == "equal":
            lam = ctx.mpf(self.lambda_eq)
            total = sum(a / (s + lam) ** i for i, a in enumerate(co.alpha, start=1))
        else:
            lam, lam0 = ctx.mpf(self.lambda_eq), ctx.mpf(self.lambda_0)
            total = sum(a / (s + lam) ** i for i, a in enumerate(co.alpha, start=1))
            total += co.beta_0 / (s + lam0)
        for j in range(1, K + 1):
            total += co.beta[j - 1] / (s + (1 + ctx.mpf(j) / self.n_c) * lam)
        return total

    def pdf(self, gamma):
        g = np.asarray(gamma, dtype=float)
        w, r, k = self._float_terms
        out = np.zeros_like(g)
        for wi, ri, ki in zip(w, r, k):
            # d/dg P(k, r g) = r (r g)^(k-1) e^(-r g) / (k-1)!
            out = out + wi * ri * np.exp((ki - 1) * np.log(np.maximum(ri * g, 1e-300)) - ri * g - math.lgamma(ki))
        return float(out) if np.ndim(gamma) == 0 else out

    def __call__(self, gamma):
        return schcn_cdf_eval(self, gamma)


def build_schcn_cdf(n: int, n_c: int, rates: RateParams) -> SchcnCdf:
    if not 1 <= n_c <= n:
        raise ValueError(f"need 1 <= n_c <= n, got n={n}, n_c={n_c}")
    if n > MAX_RELAYS:
        raise DegenerateRates(f"closed form supports at most {MAX_RELAYS} relays")
    l0, le = rates.lambda_0, rates.lambda_eq
    if abs(l0 - le) <= EQUAL_RATE_TOL * le:
        return SchcnCdf(n, n_c, rates, "equal")
    for j in range(1, n - n_c + 1):
        p = (1 + j / n_c) * le
        if abs(l0 - p) <= EQUAL_RATE_TOL * p:
            raise DegenerateRates(
                f"lambda_0={l0:g} coincides with the order-statistic pole {p:g} (j={j})"
            )
    return SchcnCdf(n, n_c, rates, "distinct")


def _eval_mp(cdf: SchcnCdf, g: float) -> float:
    """CDF at one point in extended precision, raising precision until stable."""
    w, r, _ = cdf._float_terms
    scale = float(np.sum(np.abs(w)))
    small = max(1.0, 1.0 / max(float(np.max(r)) * g, 1e-300))
    dps = _BASE_DPS + int(math.log10(max(scale, 1.0))) + (cdf.n + 1) * int(math.ceil(math.log10(small)))
    prev = None
    for _ in range(6):
        co = cdf.coefficients(dps)
        ctx = mpmath.mp.clone()
        ctx.dps = dps
        x = ctx.mpf(g)
        total = ctx.mpf(0)
        for weight, rate, order in co.terms:
            total += weight * ctx.gammainc(order, 0, rate * x, regularized=True)
        val = float(total)
        if prev is not None and abs(val - prev) <= 1e-14 * abs(val):
            return val
        prev = val
        dps += 20
    return val


def schcn_cdf_eval(cdf: SchcnCdf, gamma, rtol: float = 1e-12):
    """Evaluate the closed-form CDF at ``gamma`` (scalar or array).

    Terms are summed in float64; any point whose Erlang mixture cancels
    badly enough that rounding could exceed ``rtol`` relative error (very
    small ``gamma``, or poles nearly coincident) is recomputed in extended
    precision.
    """
    scalar = np.ndim(gamma) == 0
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    if np.any(g < 0):
        raise ValueError("gamma must be nonnegative")
    w, r, k = cdf._float_terms
    total = np.zeros_like(g)
    magnitude = np.zeros_like(g)
    for wi, ri, ki in zip(w, r, k):
        t = wi * erlang_cdf(int(ki), ri * g)
        total += t
        magnitude += np.abs(t)
    # each term carries ~2 ulp from the weight and the Erlang factor
    bad = (g > 0) & ((4.5e-16 * magnitude > rtol * np.abs(total)) | (total <= 0))
    for idx in np.flatnonzero(bad):
        total[idx] = _eval_mp(cdf, float(g[idx]))
    out = np.clip(total, 0.0, 1.0)
    out[g == 0] = 0.0
    return float(out[0]) if scalar else out


def schcn_cdf_asymptotic(n: int, n_c: int, rates: RateParams, gamma):
    """Small-SNR (high mean SNR) monomial ``lambda_0 lambda_eq^N g^(N+1) / ((N+1) N_c! N_c^(N-N_c))``."""
    den = (n + 1) * math.factorial(n_c) * n_c ** (n - n_c)
    g = np.asarray(gamma, dtype=float)
    out = rates.lambda_0 * rates.lambda_eq**n * g ** (n + 1) / den
    return float(out) if np.ndim(gamma) == 0 else out


def _direct_only(rates: RateParams, spec: ModulationSpec) -> float:
    return -math.expm1(-rates.lambda_0 * snr_threshold_proposed(1, spec))


def fer_closed_form(n: int, n_c: int, rates: RateParams, spec: ModulationSpec = BPSK) -> float:
    """Approximate average FER: closed-form CDF at gamma_{t,N+1}.

    With no relays (or none selected) the link is a single Rayleigh branch
    evaluated at gamma_{t,1}.
    """
    if n == 0 or n_c == 0:
        return _direct_only(rates, spec)
    cdf = build_schcn_cdf(n, n_c, rates)
    return schcn_cdf_eval(cdf, snr_threshold_proposed(n + 1, spec))


def fer_asymptotic(n: int, n_c: int, rates: RateParams, spec: ModulationSpec = BPSK) -> float:
    if n == 0 or n_c == 0:
        return rates.lambda_0 * snr_threshold_proposed(1, spec)
    return schcn_cdf_asymptotic(n, n_c, rates, snr_threshold_proposed(n + 1, spec))
