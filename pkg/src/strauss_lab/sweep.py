"""Parallel lifespan sweeps, scaling-law fits and deterministic CSV/SVG output.

A sweep runs estimate_lifespan over a geometric eps grid.  Every run is a pure
function of (config, eps), so the table is identical no matter how many worker
processes computed it; the writer collects results in input order.

fit_powerlaw regresses log T on log(1/eps) and compares the slope with the
exponent of the proved polynomial bound.  Critical and supercritical cases
refuse the fit (verdict "not_applicable"): exponential lifespans are not
measurable at desk scale, so a straight-line fit would only manufacture a
meaningless number.

CSV rules used everywhere: header row mandatory, floats at full round-trip
precision (%.17g), NaN spelled literally, booleans as true/false, LF endings.
SVG plots are assembled from strings only, so identical input gives identical
bytes.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .exponents import TheoryBound, theory_lifespan
from .model import RunConfig
from .solver import LifespanResult, estimate_lifespan

FIT_MIN_POINTS = 4
SWEEP_HEADER = ("eps", "T", "uncertainty", "censored", "unreliable")


# --- formatting ---------------------------------------------------------------

def format_value(v) -> str:
    """One CSV cell: round-trip floats, literal NaN, true/false booleans."""
    if isinstance(v, bool) or isinstance(v, np.bool_):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return "NaN"
        return "%.17g" % v
    return str(v)


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row width {len(row)} != header width {len(header)}")
        lines.append(",".join(format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(csv_text(header, rows))


# --- sweep --------------------------------------------------------------------

def default_jobs() -> int:
    """Worker count from STRAUSS_LAB_JOBS, else 1."""
    raw = os.environ.get("STRAUSS_LAB_JOBS", "")
    if not raw:
        return 1
    try:
        jobs = int(raw)
    except ValueError as exc:
        raise ValueError(f"STRAUSS_LAB_JOBS must be an integer, got {raw!r}") from exc
    if jobs < 1:
        raise ValueError(f"STRAUSS_LAB_JOBS must be >= 1, got {jobs}")
    return jobs


@dataclass(frozen=True)
class SweepSpec:
    """A lifespan sweep: base run configuration plus a geometric eps grid."""

    config: RunConfig
    eps_min: float = 0.2
    eps_max: float = 1.0
    eps_count: int = 6
    jobs: int = 1

    def __post_init__(self):
        if not (0.0 < self.eps_min < self.eps_max):
            raise ValueError("need 0 < eps_min < eps_max")
        if self.eps_count < FIT_MIN_POINTS:
            raise ValueError(f"need at least {FIT_MIN_POINTS} eps points for a fit")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    @property
    def eps_grid(self) -> np.ndarray:
        return np.geomspace(self.eps_min, self.eps_max, self.eps_count)


def _lifespan_task(args) -> LifespanResult:
    config, eps = args
    params = replace(config, eps=eps).model_params()
    return estimate_lifespan(params, t_max=config.t_max, dr=config.dr,
                             levels=config.refine_levels, cfl=config.cfl,
                             threshold=config.u_threshold)


def run_sweep(spec: SweepSpec) -> list[LifespanResult]:
    """One LifespanResult per eps, in grid order, worker-count independent."""
    tasks = [(spec.config, float(eps)) for eps in spec.eps_grid]
    if spec.jobs == 1:
        return [_lifespan_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
        return list(pool.map(_lifespan_task, tasks))


def sweep_rows(results: list[LifespanResult]) -> list[tuple]:
    rows = []
    for res in results:
        T = math.nan if res.censored else res.T_extrapolated
        rows.append((res.eps, T, res.uncertainty, res.censored, res.unreliable))
    return rows


# --- power-law fit --------------------------------------------------------------

VERDICTS = ("consistent", "inconsistent", "not_applicable")


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares line through (log(1/eps), log T) vs the proved exponent."""

    points: tuple          # ((log(1/eps), log T), ...)
    slope: float
    intercept: float
    r_squared: float
    theory_exponent: float
    verdict: str

    def predict_T(self, eps) -> np.ndarray:
        """Fitted curve T(eps) (natural scale)."""
        x = np.log(1.0 / np.asarray(eps, dtype=float))
        return np.exp(self.intercept + self.slope * x)


def fit_powerlaw(points, theory_exponent: float,
                 tolerance: float = 0.3) -> ScalingFit:
    """Fit T = C eps^-slope from (eps, T) pairs and judge against theory.

    points: (eps, T) pairs, eps > 0, T > 0 and finite.  Fewer than
    FIT_MIN_POINTS usable pairs is an error; censored rows must be dropped by
    the caller (run_sweep marks them).
    """
    clean = [(float(e), float(T)) for e, T in points
             if e > 0.0 and T > 0.0 and math.isfinite(T)]
    if len(clean) < FIT_MIN_POINTS:
        raise ValueError(
            f"power-law fit needs >= {FIT_MIN_POINTS} uncensored points, "
            f"got {len(clean)}")
    x = np.log(1.0 / np.array([e for e, _ in clean]))
    y = np.log(np.array([T for _, T in clean]))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (intercept + slope * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    ok = abs(slope - theory_exponent) <= tolerance and r2 >= 0.95
    return ScalingFit(points=tuple(zip(x.tolist(), y.tolist())),
                      slope=float(slope), intercept=float(intercept),
                      r_squared=r2, theory_exponent=float(theory_exponent),
                      verdict="consistent" if ok else "inconsistent")


def fit_sweep(spec: SweepSpec, results: list[LifespanResult],
              tolerance: float = 0.3) -> tuple[ScalingFit, TheoryBound]:
    """Fit a finished sweep against the proved bound for its (n, p, mode).

    Non-polynomial bounds (critical/supercritical) and sweeps with fewer than
    FIT_MIN_POINTS clean rows produce verdict "not_applicable" with NaN slope
    rather than a fabricated line.
    """
    cfg = spec.config
    bound = theory_lifespan(cfg.n, cfg.p, cfg.nonlinearity)
    usable = [(r.eps, r.T_extrapolated) for r in results
              if not (r.censored or r.unreliable)]
    if bound.kind != "polynomial" or len(usable) < FIT_MIN_POINTS:
        fit = ScalingFit(points=(), slope=math.nan, intercept=math.nan,
                         r_squared=math.nan, theory_exponent=bound.exponent,
                         verdict="not_applicable")
        return fit, bound
    return fit_powerlaw(usable, bound.exponent, tolerance), bound


# --- SVG plots ------------------------------------------------------------------

_SVG_W, _SVG_H = 640, 480
_ML, _MR, _MT, _MB = 72, 24, 40, 56  # margins


def _ticks(lo: float, hi: float, count: int = 6) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    raw = np.linspace(lo, hi, count)
    return raw


def _fmt(x: float) -> str:
    return "%.6g" % x


class _Canvas:
    """Minimal deterministic SVG builder: fixed size, text assembled in order."""

    def __init__(self, title: str):
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" '
            f'height="{_SVG_H}" viewBox="0 0 {_SVG_W} {_SVG_H}">\n',
            f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>\n',
            f'<text x="{_SVG_W // 2}" y="24" text-anchor="middle" '
            f'font-family="monospace" font-size="14">{title}</text>\n',
        ]
        self.x0, self.x1 = _ML, _SVG_W - _MR
        self.y0, self.y1 = _SVG_H - _MB, _MT  # y grows upward in data space

    def set_limits(self, xlo, xhi, ylo, yhi):
        if xhi <= xlo:
            xhi = xlo + 1.0
        if yhi <= ylo:
            yhi = ylo + 1.0
        pad_x, pad_y = 0.06 * (xhi - xlo), 0.06 * (yhi - ylo)
        self.xlo, self.xhi = xlo - pad_x, xhi + pad_x
        self.ylo, self.yhi = ylo - pad_y, yhi + pad_y

    def px(self, x):
        return self.x0 + (x - self.xlo) / (self.xhi - self.xlo) * (self.x1 - self.x0)

    def py(self, y):
        return self.y0 + (y - self.ylo) / (self.yhi - self.ylo) * (self.y1 - self.y0)

    def axes(self, xlabel: str, ylabel: str):
        self.parts.append(
            f'<rect x="{_ML}" y="{_MT}" width="{self.x1 - self.x0}" '
            f'height="{self.y0 - self.y1}" fill="none" stroke="black"/>\n')
        for xv in _ticks(self.xlo, self.xhi):
            px = self.px(xv)
            self.parts.append(
                f'<line x1="{px:.2f}" y1="{self.y0}" x2="{px:.2f}" '
                f'y2="{self.y0 + 5}" stroke="black"/>\n'
                f'<text x="{px:.2f}" y="{self.y0 + 20}" text-anchor="middle" '
                f'font-family="monospace" font-size="11">{_fmt(xv)}</text>\n')
        for yv in _ticks(self.ylo, self.yhi):
            py = self.py(yv)
            self.parts.append(
                f'<line x1="{self.x0 - 5}" y1="{py:.2f}" x2="{self.x0}" '
                f'y2="{py:.2f}" stroke="black"/>\n'
                f'<text x="{self.x0 - 8}" y="{py + 4:.2f}" text-anchor="end" '
                f'font-family="monospace" font-size="11">{_fmt(yv)}</text>\n')
        self.parts.append(
            f'<text x="{(self.x0 + self.x1) // 2}" y="{_SVG_H - 12}" '
            f'text-anchor="middle" font-family="monospace" font-size="12">'
            f'{xlabel}</text>\n'
            f'<text x="16" y="{(self.y0 + self.y1) // 2}" text-anchor="middle" '
            f'font-family="monospace" font-size="12" '
            f'transform="rotate(-90 16 {(self.y0 + self.y1) // 2})">{ylabel}'
            f'</text>\n')

    def markers(self, xs, ys, color="black"):
        for x, y in zip(xs, ys):
            self.parts.append(
                f'<circle cx="{self.px(x):.2f}" cy="{self.py(y):.2f}" r="3.5" '
                f'fill="{color}"/>\n')

    def line(self, xs, ys, color="black", dashed=False):
        pts = " ".join(f"{self.px(x):.2f},{self.py(y):.2f}"
                       for x, y in zip(xs, ys))
        dash = ' stroke-dasharray="6 4"' if dashed else ""
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"{dash}/>\n')

    def note(self, text: str, slot: int):
        self.parts.append(
            f'<text x="{self.x1 - 6}" y="{_MT + 18 + 16 * slot}" '
            f'text-anchor="end" font-family="monospace" font-size="12">'
            f'{text}</text>\n')

    def finish(self) -> str:
        return "".join(self.parts) + "</svg>\n"


def _fit_svg(fit: ScalingFit, title: str) -> str:
    if not fit.points:
        raise ValueError("cannot plot an empty fit")
    xs = [p[0] for p in fit.points]
    ys = [p[1] for p in fit.points]
    cv = _Canvas(title)
    cv.set_limits(min(xs), max(xs), min(ys), max(ys))
    cv.axes("log(1/eps)", "log T")
    grid = np.linspace(min(xs), max(xs), 2)
    cv.line(grid, fit.intercept + fit.slope * grid, color="#1f6fb2")
    anchor = ys[0] - fit.theory_exponent * xs[0]
    cv.line(grid, anchor + fit.theory_exponent * grid, color="#b23a1f",
            dashed=True)
    cv.markers(xs, ys)
    cv.note(f"fit slope {_fmt(fit.slope)} (r2 {_fmt(fit.r_squared)})", 0)
    cv.note(f"theory slope {_fmt(fit.theory_exponent)} [{fit.verdict}]", 1)
    return cv.finish()


def _series_svg(grid, values, title: str, ylabel: str) -> str:
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.size == 0:
        raise ValueError("cannot plot an empty series")
    finite = values[np.isfinite(values)]
    log_y = (finite.size > 0 and np.all(finite > 0.0)
             and float(finite.max() / finite.min()) > 100.0)
    ys = np.log10(values) if log_y else values
    label = f"log10({ylabel})" if log_y else ylabel
    cv = _Canvas(title)
    fy = ys[np.isfinite(ys)]
    cv.set_limits(grid.min(), grid.max(), fy.min(), fy.max())
    cv.axes("grid point", label)
    cv.line(grid, ys, color="#1f6fb2")
    cv.markers(grid, ys)
    return cv.finish()


def emit_plot(obj, path: str, title: str | None = None) -> None:
    """Write a deterministic SVG for a ScalingFit or a (grid, values) series."""
    if isinstance(obj, ScalingFit):
        text = _fit_svg(obj, title or "lifespan scaling")
    else:
        grid, values = obj
        text = _series_svg(grid, values, title or "ratio series", "ratio")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
