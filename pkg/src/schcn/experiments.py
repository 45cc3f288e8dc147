"""Sweep orchestration, FER curve CSV I/O and curve comparison reports."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .analytic import RateParams, fer_asymptotic, fer_closed_form
from .errors import GridMismatch, InvalidConfig
from .mimo import MimoConfig, mimo_fer_approx, simulate_mimo_fer
from .scenario import Scenario, named_scenario
from .simulator import simulate_fer
from .threshold import BPSK, ModulationSpec, snr_threshold_proposed
from .units import db_to_linear

OUTPUTS = ("closed_form", "asymptotic", "sim_semi", "sim_bit")
CASE0_PATHS = (1, 2, 4)


@dataclass
class FerCurve:
    label: str
    points: list[tuple[float, float, float]] = field(default_factory=list)

    @property
    def snr_db(self) -> list[float]:
        return [p[0] for p in self.points]

    @property
    def fer(self) -> list[float]:
        return [p[1] for p in self.points]


@dataclass
class SweepConfig:
    scenario: Scenario | str
    snr_grid: Sequence[float]
    outputs: Sequence[str] = ("closed_form",)
    trials: int = 100_000
    seed: int = 0
    out_path: str | Path | None = None
    nc_values: Sequence[int] | None = None
    workers: int = 1
    importance: bool = False
    lambda_eq_mode: str = "upper"

    def validate(self) -> None:
        grid = list(self.snr_grid)
        if not grid:
            raise InvalidConfig("SNR grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidConfig("SNR grid must be strictly increasing")
        if not self.outputs:
            raise InvalidConfig("no outputs requested")
        bad = set(self.outputs) - set(OUTPUTS)
        if bad:
            raise InvalidConfig(f"unknown outputs {sorted(bad)}; expected a subset of {OUTPUTS}")
        if any(o.startswith("sim") for o in self.outputs) and self.trials < 1:
            raise InvalidConfig("trials must be positive when simulating")


def parse_range(text: str) -> list[float]:
    """``start:stop:step`` (stop inclusive) or a comma list of values."""
    if ":" not in text:
        try:
            return [float(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise InvalidConfig(f"bad value list {text!r}") from None
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise InvalidConfig(f"bad range {text!r}; expected start:stop:step") from None
    if step <= 0 or stop < start:
        raise InvalidConfig(f"bad range {text!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def scenario_rates(scenario: Scenario, snr_db: float, mode: str = "upper") -> RateParams:
    m0, m1, m2 = scenario.link_means(snr_db)
    d = scenario.n + 1 if mode == "lower" else None
    return RateParams.from_links(1.0 / m0, 1.0 / m1, 1.0 / m2, mode=mode, d=d, spec=scenario.spec)


def _analytic_point(scenario: Scenario, snr_db: float, output: str, lambda_eq_mode: str) -> float:
    rates = scenario_rates(scenario, snr_db, lambda_eq_mode)
    fn = fer_closed_form if output == "closed_form" else fer_asymptotic
    return fn(scenario.n, scenario.n_c, rates, scenario.spec)


def _mimo_point(cfg: MimoConfig, spec: ModulationSpec, output: str, trials: int, seed: int):
    if output == "closed_form":
        return mimo_fer_approx(cfg, spec), 0.0
    if output == "asymptotic":
        x = snr_threshold_proposed(cfg.n_paths, spec) * cfg.rate
        return x**cfg.n_paths / math.factorial(cfg.n_paths), 0.0
    mode = "semi_analytic" if output == "sim_semi" else "bit_level"
    est = simulate_mimo_fer(cfg, spec, trials, seed, mode)
    return est.fer, est.ci95


def run_sweep(cfg: SweepConfig) -> list[FerCurve]:
    """Evaluate every requested output over the SNR grid; one curve per (output, variant)."""
    cfg.validate()
    grid = [float(x) for x in cfg.snr_grid]
    curves: list[FerCurve] = []

    if isinstance(cfg.scenario, str) and cfg.scenario == "case0":
        paths = tuple(cfg.nc_values) if cfg.nc_values else CASE0_PATHS
        for output in cfg.outputs:
            for n_r in paths:
                curve = FerCurve(f"{output}_n{n_r}")
                for snr in grid:
                    mc = MimoConfig(1, n_r, db_to_linear(snr))
                    fer, ci = _mimo_point(mc, BPSK, output, cfg.trials, cfg.seed)
                    curve.points.append((snr, fer, ci))
                curves.append(curve)
        _maybe_write(cfg, curves)
        return curves

    base = named_scenario(cfg.scenario) if isinstance(cfg.scenario, str) else cfg.scenario
    variants = list(cfg.nc_values) if cfg.nc_values else [base.n_c]
    for output in cfg.outputs:
        for n_c in variants:
            sc = base.with_(n_c=n_c)
            label = f"{output}_nc{n_c}" if len(variants) > 1 or cfg.nc_values else output
            curve = FerCurve(label)
            for snr in grid:
                if output in ("closed_form", "asymptotic"):
                    curve.points.append((snr, _analytic_point(sc, snr, output, cfg.lambda_eq_mode), 0.0))
                else:
                    mode = "semi_analytic" if output == "sim_semi" else "bit_level"
                    est = simulate_fer(sc, snr, cfg.trials, cfg.seed, mode, workers=cfg.workers,
                                       importance=cfg.importance and mode == "semi_analytic")
                    curve.points.append((snr, est.fer, est.ci95))
            curves.append(curve)
    _maybe_write(cfg, curves)
    return curves


def run_frame_length_sweep(cfg: SweepConfig, frame_lengths: Sequence[int] = (100, 200, 400)) -> list[FerCurve]:
    """Same sweep repeated per frame length; labels gain an ``_L<len>`` suffix."""
    base = named_scenario(cfg.scenario) if isinstance(cfg.scenario, str) else cfg.scenario
    curves = []
    for L in frame_lengths:
        sub = SweepConfig(**{**cfg.__dict__, "scenario": base.with_(spec=ModulationSpec(base.spec.c, L)),
                             "out_path": None})
        for c in run_sweep(sub):
            c.label = f"{c.label}_L{L}"
            curves.append(c)
    _maybe_write(cfg, curves)
    return curves


def _maybe_write(cfg: SweepConfig, curves: list[FerCurve]) -> None:
    if cfg.out_path is not None:
        write_curves(curves, cfg.out_path)


def _fmt(x: float) -> str:
    return "%.17g" % x


def emit_curves(curves: Sequence[FerCurve]) -> str:
    """Wide CSV: ``snr_db,<label>,<label>_ci95,...`` with 17 significant digits."""
    if not curves:
        return "snr_db\n"
    grid = curves[0].snr_db
    for c in curves[1:]:
        if c.snr_db != grid:
            raise GridMismatch(f"curve {c.label!r} is on a different grid")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["snr_db"]
    for c in curves:
        header += [c.label, f"{c.label}_ci95"]
    w.writerow(header)
    for i, snr in enumerate(grid):
        row = [_fmt(snr)]
        for c in curves:
            row += [_fmt(c.points[i][1]), _fmt(c.points[i][2])]
        w.writerow(row)
    return buf.getvalue()


def parse_curves(text: str) -> list[FerCurve]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][0] != "snr_db":
        raise InvalidConfig("curve CSV must start with an snr_db column")
    header = rows[0]
    if (len(header) - 1) % 2:
        raise InvalidConfig("curve CSV must hold (label, label_ci95) column pairs")
    curves = [FerCurve(header[j]) for j in range(1, len(header), 2)]
    for row in rows[1:]:
        if not row:
            continue
        snr = float(row[0])
        for k, c in enumerate(curves):
            c.points.append((snr, float(row[1 + 2 * k]), float(row[2 + 2 * k])))
    return curves


def write_curves(curves: Sequence[FerCurve], path: str | Path) -> None:
    Path(path).write_text(emit_curves(curves))


# --- comparison --------------------------------------------------------------

@dataclass
class GapRow:
    label: str
    reference: str
    snr_db: float
    log10_gap: float
    checked: bool
    passed: bool


@dataclass
class SlopeRow:
    label: str
    slope: float
    reference_slope: float

    @property
    def gap(self) -> float:
        return self.slope - self.reference_slope


@dataclass
class Report:
    gaps: list[GapRow]
    slopes: list[SlopeRow]
    gap_tol: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.gaps)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "label", "reference", "snr_db", "value", "status"])
        for r in self.gaps:
            status = ("pass" if r.passed else "fail") if r.checked else "skip"
            w.writerow(["log10_gap", r.label, r.reference, _fmt(r.snr_db), _fmt(r.log10_gap), status])
        for s in self.slopes:
            w.writerow(["slope", s.label, "", "", _fmt(s.slope), ""])
            w.writerow(["slope_gap", s.label, "", "", _fmt(s.gap), ""])
        w.writerow(["overall", "", "", "", "", "pass" if self.passed else "fail"])
        return buf.getvalue()


def fit_slope(snr_db: Sequence[float], fer: Sequence[float]) -> float:
    """Least-squares slope of log10 FER against log10 SNR (decades per decade)."""
    x = np.asarray(snr_db, dtype=float) / 10.0
    with np.errstate(divide="ignore"):
        y = np.log10(np.asarray(fer, dtype=float))
    ok = np.isfinite(y)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(x[ok], y[ok], 1)[0])


def compare_report(curves: Sequence[FerCurve], reference: str | None = None,
                   gap_tol: float = 0.2, window: tuple[float, float] = (1e-4, 1e-1),
                   slope_points: int = 3) -> Report:
    """Per-point log10 gaps and high-SNR slopes of every curve against a reference.

    Gaps are checked against ``gap_tol`` only where the reference FER lies in
    ``window``. Slopes are fitted over the last ``slope_points`` grid points.
    """
    if not curves:
        raise InvalidConfig("nothing to compare")
    ref = curves[0] if reference is None else next((c for c in curves if c.label == reference), None)
    if ref is None:
        raise InvalidConfig(f"reference curve {reference!r} not found")
    for c in curves:
        if c.snr_db != ref.snr_db:
            raise GridMismatch(f"curve {c.label!r} is not on the grid of {ref.label!r}")
    gaps, slopes = [], []
    tail = slice(-slope_points, None)
    ref_slope = fit_slope(ref.snr_db[tail], ref.fer[tail])
    for c in curves:
        if c is ref and len(curves) > 1:
            continue
        for (snr, f, _), (_, fr, _) in zip(c.points, ref.points):
            gap = math.log10(f) - math.log10(fr) if f > 0 and fr > 0 else float("nan")
            checked = window[0] <= fr <= window[1]
            gaps.append(GapRow(c.label, ref.label, snr, gap, checked,
                               (not checked) or (math.isfinite(gap) and abs(gap) <= gap_tol)))
        slopes.append(SlopeRow(c.label, fit_slope(c.snr_db[tail], c.fer[tail]), ref_slope))
    return Report(gaps, slopes, gap_tol)
