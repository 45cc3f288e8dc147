"""STBC/MRC MIMO example: Erlang SNR law, outage-form FER and the numerically optimal threshold."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig, NoBracket
from .mathcore import erlang_cdf, find_root_bracketed
from .simulator import SimEstimate, Z95, block_rng
from .threshold import BPSK, ModulationSpec, average_fer_exact, instantaneous_fer_awgn, snr_threshold_proposed


@dataclass(frozen=True)
class MimoConfig:
    """``n_t`` x ``n_r`` link with average SNR ``mean_snr`` (linear) per receive antenna."""

    n_t: int = 1
    n_r: int = 1
    mean_snr: float = 1.0

    def __post_init__(self):
        if self.n_t < 1 or self.n_r < 1:
            raise InvalidConfig("antenna counts must be at least 1")
        if not self.mean_snr > 0:
            raise InvalidConfig("mean_snr must be positive")

    @property
    def n_paths(self) -> int:
        return self.n_t * self.n_r

    @property
    def rate(self) -> float:
        """Rate N_T / mean_snr of each of the N exponential path SNRs."""
        return self.n_t / self.mean_snr


def mimo_snr_cdf(gamma, cfg: MimoConfig):
    return erlang_cdf(cfg.n_paths, cfg.rate * np.asarray(gamma, dtype=float) if np.ndim(gamma) else cfg.rate * float(gamma))


def mimo_snr_pdf(gamma, cfg: MimoConfig):
    n, lam = cfg.n_paths, cfg.rate
    g = np.asarray(gamma, dtype=float)
    with np.errstate(divide="ignore"):
        logp = n * math.log(lam) + (n - 1) * np.log(g) - lam * g - math.lgamma(n)
    out = np.where(g > 0, np.exp(logp), lam if n == 1 else 0.0)
    return float(out) if np.ndim(gamma) == 0 else out


def mimo_fer_approx(cfg: MimoConfig, spec: ModulationSpec = BPSK) -> float:
    return mimo_snr_cdf(snr_threshold_proposed(cfg.n_paths, spec), cfg)


def mimo_fer_exact(cfg: MimoConfig, spec: ModulationSpec = BPSK) -> float:
    return average_fer_exact(lambda g: mimo_snr_pdf(g, cfg), spec)


def mimo_optimal_threshold(cfg: MimoConfig, spec: ModulationSpec = BPSK) -> float:
    """Threshold at which the outage probability equals the exact average FER.

    Solved on log F to keep full resolution when the FER is many decades down.
    """
    target = mimo_fer_exact(cfg, spec)
    if not 0 < target < 1:
        raise NoBracket(f"exact FER {target:g} is outside (0, 1)")
    log_target = math.log(target)

    def f(g: float) -> float:
        p = mimo_snr_cdf(g, cfg)
        return (math.log(p) if p > 0 else -1e300) - log_target

    lo, hi = 1e-9 * cfg.mean_snr, 1e3 * cfg.mean_snr
    for _ in range(20):
        if f(lo) < 0 < f(hi):
            break
        if f(lo) >= 0:
            lo /= 1e3
        if f(hi) <= 0:
            hi *= 1e3
    return find_root_bracketed(f, lo, hi, tol=1e-14 * cfg.mean_snr)


def simulate_mimo_fer(cfg: MimoConfig, spec: ModulationSpec, trials: int, seed: int,
                      mode: str = "semi_analytic") -> SimEstimate:
    """Monte Carlo FER of the MRC combiner.

    ``bit_level`` sends L BPSK symbols over N_R receive branches (single
    transmit antenna only); ``semi_analytic`` averages P_f over Erlang draws.
    """
    if mode == "bit_level" and cfg.n_t != 1:
        raise InvalidConfig("bit-level MIMO simulation supports n_t = 1 only")
    if trials < 1:
        raise InvalidConfig("trials must be at least 1")
    block = 1 << 15 if mode == "semi_analytic" else 1 << 11
    s1 = []
    s2 = []
    for b, start in enumerate(range(0, trials, block)):
        size = min(block, trials - start)
        rng = block_rng(seed, b)
        if mode == "semi_analytic":
            g = rng.exponential(1.0 / cfg.rate, (size, cfg.n_paths)).sum(axis=1)
            v = instantaneous_fer_awgn(g, spec)
        else:
            amp = math.sqrt(spec.c / 2.0)
            s = amp * (1.0 - 2.0 * rng.integers(0, 2, size=(size, spec.L)))
            h = (rng.standard_normal((size, cfg.n_r)) + 1j * rng.standard_normal((size, cfg.n_r))) / math.sqrt(2.0)
            noise = (rng.standard_normal((size, cfg.n_r, spec.L))
                     + 1j * rng.standard_normal((size, cfg.n_r, spec.L))) / math.sqrt(2.0)
            y = math.sqrt(cfg.mean_snr) * h[..., None] * s[:, None, :] + noise
            z = np.real(np.sum(np.conj(h)[..., None] * y, axis=1))
            v = np.any((z > 0) != (s > 0), axis=-1).astype(float)
        s1.append(float(np.sum(v)))
        s2.append(float(np.sum(v * v)))
    fer = math.fsum(s1) / trials
    var = max(math.fsum(s2) / trials - fer * fer, 0.0)
    errors = int(round(math.fsum(s1))) if mode == "bit_level" else None
    return SimEstimate(fer, trials, errors, Z95 * math.sqrt(var / trials), int(seed), mode)
