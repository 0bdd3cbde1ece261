"""Integral-transform test functions b_q and their verification.

b_q(t, r) = int_0^1 e^{-eta t} psi_hat_eta(r) eta^{q-1} d eta, built from the
far-field-normalized damped eigenfunctions.  The family solves the adjoint
linear equation d_tt b - Lap b - V d_t b = 0 (damping reversed, as befits a
test function integrated against the forward equation), decays like
prescribed powers of (t + R +- r), and is the backbone of the blow-up
functionals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

from .eigen import psi_hat_batch
from .model import ModelParams, potential

DEFAULT_NODES = 64


def eta_rule(q: float, m: int):
    """Gauss-Jacobi rule absorbing the eta^{q-1} endpoint weight.

    Returns (eta, w) with int_0^1 f(eta) eta^{q-1} d eta ~= sum w_k f(eta_k),
    exact for polynomial f up to degree 2m-1.  Building the weight into the
    rule keeps node-doubling stable for every q > 0, including q > 1 where
    the endpoint factor is merely continuous, not smooth.
    """
    if q <= 0.0:
        raise ValueError("q must be positive")
    x, w = roots_jacobi(m, 0.0, q - 1.0)
    return 0.5 * (x + 1.0), w * 0.5**q


@dataclass(frozen=True)
class BqTable:
    """b_q sampled on a (t, r) rectangle, with its quadrature ingredients."""

    q: float
    R: float
    n: int
    mu: float
    beta: float
    eta_nodes: np.ndarray
    eta_weights: np.ndarray
    psi_cache: np.ndarray  # (n_nodes, nr) normalized psi_hat rows
    t_grid: np.ndarray
    r_grid: np.ndarray
    values: np.ndarray  # (nt, nr)

    def validate(self) -> None:
        if not np.all(self.values > 0.0):
            raise ArithmeticError("b_q lost positivity")
        if not np.all(np.diff(self.values, axis=0) < 0.0):
            raise ArithmeticError("b_q not strictly decreasing in t")

    def same_grid(self, other: "BqTable") -> bool:
        return (np.array_equal(self.t_grid, other.t_grid)
                and np.array_equal(self.r_grid, other.r_grid)
                and (self.n, self.mu, self.beta, self.R)
                == (other.n, other.mu, other.beta, other.R))


@dataclass(frozen=True)
class IdentityReport:
    """Max relative residuals of the four b_q identities on the cone r <= t."""

    q: float
    dt: float
    dr: float
    res_dt: float  # d_t b_q = -b_{q+1}
    res_dtt: float  # d_tt b_q = b_{q+2}
    res_lap: float  # Lap b_q = V b_{q+1} + b_{q+2}
    res_wave: float  # d_tt b_q - Lap b_q - V d_t b_q = 0

    @property
    def worst(self) -> float:
        return max(self.res_dt, self.res_dtt, self.res_lap, self.res_wave)


@dataclass(frozen=True)
class AsymptoticReport:
    """Bracket of the compensated b_q over a light-cone sample."""

    q: float
    regime: str  # "q_below" | "q_above" relative to (n-1)/2
    ratio_min: float
    ratio_max: float

    @property
    def spread(self) -> float:
        return self.ratio_max / self.ratio_min


def build_bq(q: float, params: ModelParams, t_grid, r_grid, R: float = 2.0,
             nodes: int = DEFAULT_NODES, dr_ode: float = 1e-3,
             psi_cache: np.ndarray | None = None) -> BqTable:
    """Assemble a BqTable by eta-quadrature over normalized eigenfunctions.

    r_grid must be uniform starting at 0 (it doubles as the ODE output grid).
    psi_cache short-circuits the eigenfunction solve when a table for the
    same q and r_grid is being rebuilt (e.g. on a refined t_grid).
    """
    if q <= 0.0:
        raise ValueError("q must be positive")
    if R <= 1.0:
        raise ValueError("shift constant R must exceed 1")
    t_grid = np.asarray(t_grid, dtype=float)
    r_grid = np.asarray(r_grid, dtype=float)
    if r_grid[0] != 0.0 or not np.allclose(np.diff(r_grid), r_grid[1], rtol=1e-12):
        raise ValueError("r_grid must be uniform and start at 0")
    eta, w = eta_rule(q, nodes)
    if psi_cache is None:
        psi_cache, _, _ = psi_hat_batch(eta, params.mu, params.beta, params.n,
                                        r_grid, dr=dr_ode)
    elif psi_cache.shape != (nodes, r_grid.size):
        raise ValueError("psi_cache shape does not match nodes x r_grid")
    # b(t_i, r_j) = sum_k w_k e^{-eta_k t_i} psi_hat_k(r_j): one GEMM
    E = w * np.exp(-np.multiply.outer(t_grid, eta))
    values = E @ psi_cache
    table = BqTable(q=q, R=R, n=params.n, mu=params.mu, beta=params.beta,
                    eta_nodes=eta, eta_weights=w, psi_cache=psi_cache,
                    t_grid=t_grid, r_grid=r_grid, values=values)
    table.validate()
    return table


def verify_bq_identities(tq: BqTable, tq1: BqTable, tq2: BqTable,
                         block: int = 512) -> IdentityReport:
    """Centered-difference residuals of the b_q identities.

    The three tables must share one grid and satisfy q1 = q+1, q2 = q+2.
    Residuals are relative to the positive local scale V b_{q+1} + b_{q+2}
    (resp. b_{q+1}, b_{q+2} for the single-term identities), maximized over
    the interior cone r <= t with r >= dr.  Evaluation is blocked over t-rows
    to bound memory.

    The radial first derivative feeding the (n-1)/r term uses five-point
    (fourth-order) differences: V'(0) != 0 puts a genuine r^3 component into
    b_q, so a second-order derivative error -- constant in r -- would be
    amplified to O(dr^2 / r) by the axis factor and spoil the pointwise
    order near r = 0.
    """
    if not (tq.same_grid(tq1) and tq.same_grid(tq2)):
        raise ValueError("tables must share one (t, r) grid and parameters")
    if not (math.isclose(tq1.q, tq.q + 1.0) and math.isclose(tq2.q, tq.q + 2.0)):
        raise ValueError("need tables for q, q+1, q+2")
    t, r = tq.t_grid, tq.r_grid
    dt = float(t[1] - t[0])
    dr = float(r[1] - r[0])
    V = potential(r, tq.mu, tq.beta)
    nt, nr = tq.values.shape
    res = np.zeros(4)
    for lo in range(1, nt - 1, block):
        hi = min(lo + block, nt - 1)
        sl = slice(lo, hi)
        b = tq.values[sl]
        b_up = tq.values[lo + 1:hi + 1]
        b_dn = tq.values[lo - 1:hi - 1]
        b1 = tq1.values[sl]
        b2 = tq2.values[sl]
        bt = (b_up - b_dn) / (2.0 * dt)
        btt = (b_up - 2.0 * b + b_dn) / (dt * dt)
        br = np.empty_like(b)
        br[:, 2:-2] = (b[:, :-4] - 8.0 * b[:, 1:-3]
                       + 8.0 * b[:, 3:-1] - b[:, 4:]) / (12.0 * dr)
        br[:, 1] = (-3.0 * b[:, 0] - 10.0 * b[:, 1] + 18.0 * b[:, 2]
                    - 6.0 * b[:, 3] + b[:, 4]) / (12.0 * dr)
        br[:, -2] = (b[:, -1] - b[:, -3]) / (2.0 * dr)
        lap = np.empty_like(b)
        lap[:, 1:-1] = ((b[:, 2:] - 2.0 * b[:, 1:-1] + b[:, :-2]) / (dr * dr)
                        + (tq.n - 1) / r[1:-1] * br[:, 1:-1])
        lap[:, 0] = lap[:, -1] = np.nan
        scale1 = b1
        scale2 = b2
        scale_w = V * b1 + b2
        cone = r[None, 1:-1] <= t[sl, None]
        inner = slice(1, -1)

        def cone_max(err):
            return float(np.max(np.where(cone, err[:, inner], 0.0)))

        res[0] = max(res[0], cone_max(np.abs(bt + b1) / scale1))
        res[1] = max(res[1], cone_max(np.abs(btt - b2) / scale2))
        res[2] = max(res[2], cone_max(np.abs(lap - V * b1 - b2) / scale_w))
        res[3] = max(res[3], cone_max(np.abs(btt - lap - V * bt) / scale_w))
    return IdentityReport(q=tq.q, dt=dt, dr=dr, res_dt=res[0],
                          res_dtt=res[1], res_lap=res[2], res_wave=res[3])


def verify_bq_asymptotics(table: BqTable, t_min: float = 1.0) -> AsymptoticReport:
    """Bracket the compensated b_q over the light cone r <= t + 1.

    q < (n-1)/2: ratio = b_q (t+R+r)^q;
    q > (n-1)/2: ratio = b_q (t+R+r)^{(n-1)/2} (t+R-r)^{q-(n-1)/2}.
    Bounded ratio both ways is the check; the caller judges the spread.
    """
    q, n, R = table.q, table.n, table.R
    half = (n - 1) / 2.0
    if q == half:
        raise ValueError("boundary case q = (n-1)/2 is excluded")
    t = table.t_grid[:, None]
    r = table.r_grid[None, :]
    cone = (r <= t + 1.0) & (t >= t_min)
    if not np.any(cone):
        raise ValueError("no samples in the cone r <= t + 1, t >= t_min")
    if q < half:
        regime = "q_below"
        ratio = table.values * (t + R + r) ** q
    else:
        regime = "q_above"
        near = np.where(cone, t + R - r, 1.0)  # positive on the cone (R > 1)
        ratio = (table.values * (t + R + r) ** half * near ** (q - half))
    vals = ratio[cone]
    return AsymptoticReport(q=q, regime=regime,
                            ratio_min=float(vals.min()),
                            ratio_max=float(vals.max()))


def _hyper2f1_series(a: float, b: float, c: float, z: float,
                     rtol: float = 1e-15, max_terms: int = 6000) -> float:
    term, total = 1.0, 1.0
    for k in range(max_terms):
        term *= (a + k) * (b + k) / ((c + k) * (1.0 + k)) * z
        total += term
        if abs(term) <= rtol * abs(total):
            return total
    raise ArithmeticError("hypergeometric series did not converge")


def _euler_node_count(z: float) -> int:
    """Gauss node count from the Bernstein-ellipse distance of the pole 1/z.

    Kept as small as accuracy allows: roots_jacobi weight noise grows with m,
    so oversizing the rule actively hurts near-singular exponents.
    """
    if z <= 0.5:
        return 40
    xi = 2.0 / z - 1.0  # pole position after mapping [0,1] -> [-1,1]
    rho = xi + math.sqrt(xi * xi - 1.0)
    return min(600, max(40, int(8.0 / math.log10(rho)) + 10))


def _hyper2f1_euler(a: float, b: float, c: float, z: float) -> float:
    # Gamma(c)/(Gamma(b)Gamma(c-b)) int_0^1 x^{b-1}(1-x)^{c-b-1}(1-zx)^{-a} dx
    # with the beta weight absorbed into a Gauss-Jacobi rule
    m = _euler_node_count(z)
    x, w = roots_jacobi(m, c - b - 1.0, b - 1.0)
    xs = 0.5 * (x + 1.0)
    integral = float(w @ (1.0 - z * xs) ** (-a)) * 0.5 ** (c - 1.0)
    return math.gamma(c) / (math.gamma(b) * math.gamma(c - b)) * integral


def hyper2f1(a: float, b: float, c: float, z: float,
             agree_tol: float = 1e-10) -> float:
    """Gauss hypergeometric 2F1 by two independent routes.

    Evaluates both the power series and the Euler integral representation
    (valid for c > b > 0, |z| < 1) and demands they agree to agree_tol
    relative; returns the series value.
    """
    if not c > b > 0.0:
        raise ValueError("integral representation needs c > b > 0")
    if abs(z) >= 1.0:
        raise ValueError("|z| must be below 1")
    s = _hyper2f1_series(a, b, c, z)
    e = _hyper2f1_euler(a, b, c, z)
    if abs(s - e) > agree_tol * max(abs(s), abs(e), 1.0):
        raise ArithmeticError(
            f"2F1 routes disagree: series={s!r} euler={e!r}")
    return s


def hyper2f1_compensation(table: BqTable, t_min: float = 1.0):
    """Ratio b_q (t+R+r)^q / 2F1(q, (n-1)/2, n-1; 2r/(t+R+r)) over the cone.

    The hypergeometric profile captures the full r-dependence of the
    far-field b_q, so this ratio should bracket tighter than the plain
    power compensation.  Returns (ratio_min, ratio_max).
    """
    q, n, R = table.q, table.n, table.R
    lo, hi = math.inf, -math.inf
    for i, t in enumerate(table.t_grid):
        if t < t_min:
            continue
        for j, r in enumerate(table.r_grid):
            if r > t + 1.0:
                break
            z = 2.0 * r / (t + R + r)
            f = hyper2f1(q, (n - 1) / 2.0, n - 1.0, z)
            ratio = table.values[i, j] * (t + R + r) ** q / f
            lo, hi = min(lo, ratio), max(hi, ratio)
    if not math.isfinite(lo):
        raise ValueError("no samples in the cone")
    return lo, hi
