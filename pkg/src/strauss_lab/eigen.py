"""Radial eigenfunctions of Lap(psi) - eta*V*psi = eta^2*psi and their
far-field matching against the undamped profile.

psi_eta is the regular solution with psi(0) = 1, psi'(0) = 0.  It grows like
e^(eta*r), so the shooting integration works in the rescaled variable
s(r) = e^(-eta*r) * psi(r), which satisfies

    s'' + (2*eta + (n-1)/r) s' + ((n-1)*eta/r - eta*V) s = 0

and stays bounded.  The undamped comparison profile is the plane-wave average

    varphi_eta(x) = int_{S^{n-1}} e^(eta x.omega) d(omega)
                  = |S^{n-2}| int_{-1}^{1} (1-th^2)^((n-3)/2) e^(th*eta*r) dth,

and the matching constant lambda(eta) = psi_eta(r_ref)/varphi_eta(r_ref) at a
radius where the ratio has plateaued.  For mu = 0 the ratio is constant:
psi = varphi/|S^{n-1}| exactly (n = 3: psi = sinh(eta r)/(eta r)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import quad
from scipy.special import roots_jacobi

from .model import sphere_area

PLATEAU_SLOPE = 1e-4   # |d log(psi/varphi) / dr| below this counts as flat
DEFAULT_DR_ODE = 1e-3


@dataclass(frozen=True)
class EigenSolution:
    """Shooting solution on a uniform radial grid.

    w = (1+r)^((n-1)/2) e^(-eta r) psi is the rescaled profile whose
    boundedness expresses the sub-exponential growth bound.  lam is None
    until normalize() fixes the far-field matching constant.
    """

    eta: float
    mu: float
    beta: float
    n: int
    r: np.ndarray
    psi: np.ndarray
    psi_prime: np.ndarray
    w: np.ndarray
    lam: float | None = None
    r_ref: float | None = None

    @property
    def psi_hat(self) -> np.ndarray:
        """Far-field normalized profile psi/lam (requires normalize())."""
        if self.lam is None:
            raise ValueError("solution not normalized; call normalize() first")
        return self.psi / self.lam


def varphi(eta: float, r, n: int, scaled: bool = False):
    """Plane-wave average; `scaled` returns e^(-eta r) * varphi (never
    overflows since every quadrature exponent becomes <= 0).

    Evaluated with Gauss-Jacobi quadrature matched to the (1-th^2)^((n-3)/2)
    endpoint weight; the node count grows with max(eta*r) so the rule stays
    spectrally accurate.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if eta < 0:
        raise ValueError("eta must be >= 0")
    r = np.asarray(r, dtype=float)
    arg_max = float(eta * np.max(r, initial=0.0))
    m = int(0.6 * arg_max) + 40
    a = (n - 3) / 2.0
    nodes, weights = roots_jacobi(m, a, a)
    expo = np.multiply.outer(eta * r, nodes)       # (..., m)
    if scaled:
        expo = expo - (eta * r)[..., None]
    vals = np.exp(expo) @ weights
    return sphere_area(n - 1) * vals


def _rk4_scalar(eta, mu, beta, n, h, n_steps, out_steps):
    """Single-eta integration with plain floats (fast path)."""
    bnr = n - 1.0
    two_eta = 2.0 * eta
    eta_bnr = eta * bnr

    def rhs(r, s, sp):
        V = mu * (1.0 + r) ** (-beta)
        return sp, -(two_eta + bnr / r) * sp - (eta_bnr / r - eta * V) * s

    n_out = len(out_steps)
    psi = np.empty(n_out)
    psip = np.empty(n_out)
    j = 0
    if j < n_out and out_steps[j] == 0:
        psi[j], psip[j] = 1.0, 0.0
        j += 1
    # series start to r = h:  psi ~ 1 + c r^2/(2n), c = eta V(0) + eta^2
    c = eta * mu + eta * eta
    p1 = 1.0 + c * h * h / (2.0 * n)
    pp1 = c * h / n
    e = math.exp(-eta * h)
    s, sp = e * p1, e * (pp1 - eta * p1)
    if j < n_out and out_steps[j] == 1:
        psi[j], psip[j] = p1, pp1
        j += 1
    h2, h6 = 0.5 * h, h / 6.0
    for i in range(1, n_steps):
        r0 = i * h
        k1s, k1p = rhs(r0, s, sp)
        k2s, k2p = rhs(r0 + h2, s + h2 * k1s, sp + h2 * k1p)
        k3s, k3p = rhs(r0 + h2, s + h2 * k2s, sp + h2 * k2p)
        k4s, k4p = rhs(r0 + h, s + h * k3s, sp + h * k3p)
        s = s + h6 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
        sp = sp + h6 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        if j < n_out and out_steps[j] == i + 1:
            r1 = (i + 1) * h
            grow = math.exp(eta * r1)
            psi[j] = grow * s
            psip[j] = grow * (sp + eta * s)
            j += 1
    if j != n_out:
        raise AssertionError("output indices beyond integration range")
    return psi, psip


def _rk4_batch(etas, mu, beta, n, h, n_steps, out_steps, r0=0.0, state=None):
    """Vectorized integration for a whole family of eta values at once.

    Starts from r0 with the given (s, s') state, or from the r = 0 series
    start when state is None.  out_steps are node indices relative to r0.
    Returns (psi rows, psi' rows, final state) so segments with different
    step sizes can be chained.
    """
    etas = np.asarray(etas, dtype=float)
    m = etas.size
    bnr = n - 1.0
    two_eta = 2.0 * etas
    eta_bnr = etas * bnr

    def rhs(r, s, sp):
        V = mu * (1.0 + r) ** (-beta)
        dsp = -(two_eta + bnr / r) * sp - (eta_bnr / r - etas * V) * s
        return sp, dsp

    n_out = len(out_steps)
    psi = np.empty((n_out, m))
    psip = np.empty((n_out, m))
    j = 0

    def record(i, s, sp):
        nonlocal j
        if j < n_out and out_steps[j] == i:
            grow = np.exp(etas * (r0 + i * h))
            psi[j] = grow * s
            psip[j] = grow * (sp + etas * s)
            j += 1

    if state is None:
        if r0 != 0.0:
            raise ValueError("series start requires r0 = 0")
        if j < n_out and out_steps[j] == 0:
            psi[j], psip[j] = 1.0, 0.0
            j += 1
        c = etas * mu + etas * etas
        p1 = 1.0 + c * h * h / (2.0 * n)
        pp1 = c * h / n
        e = np.exp(-etas * h)
        s, sp = e * p1, e * (pp1 - etas * p1)
        record(1, s, sp)
        start = 1
    else:
        s, sp = state
        record(0, s, sp)
        start = 0

    h2, h6 = 0.5 * h, h / 6.0
    for i in range(start, n_steps):
        r = r0 + i * h
        k1s, k1p = rhs(r, s, sp)
        k2s, k2p = rhs(r + h2, s + h2 * k1s, sp + h2 * k1p)
        k3s, k3p = rhs(r + h2, s + h2 * k2s, sp + h2 * k2p)
        k4s, k4p = rhs(r + h, s + h * k3s, sp + h * k3p)
        s = s + h6 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
        sp = sp + h6 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        record(i + 1, s, sp)
    if j != n_out:
        raise AssertionError("output indices beyond integration range")
    return psi, psip, (s, sp)


def _aligned_steps(r_out: np.ndarray, dr_target: float):
    """ODE step h dividing the (uniform) output spacing, plus output indices."""
    r_out = np.asarray(r_out, dtype=float)
    if r_out.ndim != 1 or r_out.size < 2:
        raise ValueError("r_out must be a 1-d grid with at least two nodes")
    spac = np.diff(r_out)
    if not np.allclose(spac, spac[0], rtol=1e-9, atol=0.0):
        raise ValueError("r_out must be uniformly spaced")
    if abs(r_out[0]) > 1e-12:
        raise ValueError("r_out must start at 0")
    spacing = float(spac[0])
    k = max(1, int(math.ceil(spacing / dr_target - 1e-12)))
    h = spacing / k
    out_steps = [i * k for i in range(r_out.size)]
    return h, out_steps


def solve_psi(eta: float, mu: float, beta: float, n: int, r_max: float,
              dr: float = DEFAULT_DR_ODE, r_out: np.ndarray | None = None) -> EigenSolution:
    """Shooting solve of the rescaled equation up to r_max.

    Output is sampled on r_out (uniform, starting at 0; default spacing
    ~max(dr, 0.01)).  The integrator takes fixed classical 4th-order steps of
    size <= dr aligned with the output grid; the first node comes from the
    series psi ~ 1 + (eta V(0) + eta^2) r^2 / (2n).
    """
    if eta < 0:
        raise ValueError("eta must be >= 0")
    if n < 2 or mu < 0 or beta <= 0:
        raise ValueError("need n >= 2, mu >= 0, beta > 0")
    if eta * r_max > 700.0:
        raise ValueError(
            "eta*r_max > 700: psi ~ e^(eta r) overflows; use psi_hat_batch, "
            "which stores only the requested radii")
    if r_out is None:
        spacing = max(dr, 0.01)
        r_out = np.arange(int(round(r_max / spacing)) + 1) * spacing
    r_out = np.asarray(r_out, dtype=float)
    if eta == 0.0:
        ones = np.ones_like(r_out)
        return EigenSolution(eta=0.0, mu=mu, beta=beta, n=n, r=r_out,
                             psi=ones, psi_prime=np.zeros_like(r_out),
                             w=(1.0 + r_out) ** ((n - 1) / 2.0))
    h, out_steps = _aligned_steps(r_out, dr)
    psi, psip = _rk4_scalar(eta, mu, beta, n, h, out_steps[-1], out_steps)
    if np.any(psi <= 0.0):
        raise ArithmeticError("integration fault: psi lost positivity")
    w = (1.0 + r_out) ** ((n - 1) / 2.0) * np.exp(-eta * r_out) * psi
    return EigenSolution(eta=eta, mu=mu, beta=beta, n=n, r=r_out,
                         psi=psi, psi_prime=psip, w=w)


def _plateau_index(r, ratio, r_cap):
    """First index from which |d log ratio / dr| stays below PLATEAU_SLOPE."""
    logr = np.log(ratio)
    slopes = np.abs(np.diff(logr) / np.diff(r))
    ok = slopes < PLATEAU_SLOPE
    # sustained: flat from here to the end of the grid
    sustained = np.flip(np.logical_and.accumulate(np.flip(ok)))
    idx = np.flatnonzero(sustained)
    if idx.size == 0 or r[idx[0]] > r_cap:
        return None
    return int(idx[0])


def normalize(sol: EigenSolution, r_ref: float | None = None) -> EigenSolution:
    """Fix lambda(eta) = psi(r_ref)/varphi_eta(r_ref).

    Default r_ref: first radius where the psi/varphi ratio has plateaued
    (sustained relative slope < 1e-4 per unit r), capped at 0.8*r_max; the
    grid must reach r_max >= 30/max(eta, 0.1) so a genuine far field exists.
    """
    if sol.eta == 0.0:
        lam = 1.0 / sphere_area(sol.n)
        return replace(sol, lam=lam, r_ref=0.0)
    r_need = 30.0 / max(sol.eta, 0.1)
    if sol.r[-1] < r_need - 1e-9:
        raise ValueError(
            f"grid too small to normalize: r_max={sol.r[-1]:.3g} < {r_need:.3g}")
    # scaled ratio avoids e^(eta r) overflow at large radii
    s_vals = np.exp(-sol.eta * sol.r) * sol.psi
    phi_scaled = varphi(sol.eta, sol.r, sol.n, scaled=True)
    ratio = s_vals / phi_scaled
    if r_ref is None:
        idx = _plateau_index(sol.r, ratio, 0.8 * sol.r[-1])
        if idx is None:
            raise ValueError("no plateau found: extend r_max")
        r_ref = float(sol.r[idx])
    else:
        idx = int(np.argmin(np.abs(sol.r - r_ref)))
        r_ref = float(sol.r[idx])
    return replace(sol, lam=float(ratio[idx]), r_ref=r_ref)


def psi_hat_batch(etas, mu: float, beta: float, n: int, r_out,
                  dr: float = DEFAULT_DR_ODE,
                  r_norm_max: float | None = None,
                  r_ref: float | None = None):
    """Normalized profiles psi_hat = psi/lambda for a family of eta > 0.

    Returns (psi_hat, psi_hat_prime, lam) with rows indexed like etas.  All
    eta share one integration (vectorized) and one matching radius r_ref
    (default 0.8*r_norm_max) so that lambda is a smooth function of eta —
    required when the family feeds a quadrature rule.
    """
    etas = np.asarray(etas, dtype=float)
    if np.any(etas <= 0.0):
        raise ValueError("batch normalization needs eta > 0")
    r_out = np.asarray(r_out, dtype=float)
    if r_norm_max is None:
        r_norm_max = 30.0 / max(float(etas.min()), 0.1)
    r_norm_max = max(r_norm_max, 1.05 * float(r_out[-1]))
    if r_ref is None:
        r_ref = 0.8 * r_norm_max
    h, out_steps = _aligned_steps(r_out, dr)
    psi, psip, state = _rk4_batch(etas, mu, beta, n, h, out_steps[-1], out_steps)
    if np.any(psi <= 0.0):
        raise ArithmeticError("integration fault: psi lost positivity")
    if r_ref <= r_out[-1] + 1e-12:
        i_ref = int(np.argmin(np.abs(r_out - r_ref)))
        r_ref = float(r_out[i_ref])
        s_ref = np.exp(-etas * r_ref) * psi[i_ref]
    else:
        # the tail only feeds the matching constant, so a coarser RK4 step
        # (error ~ h^4) is plenty there
        h_far = max(dr, 4e-3)
        n_far = int(math.ceil((r_ref - r_out[-1]) / h_far))
        h_far = (r_ref - r_out[-1]) / n_far
        _, _, (s, _) = _rk4_batch(etas, mu, beta, n, h_far, n_far, [],
                                  r0=float(r_out[-1]), state=state)
        s_ref = s
    phi_ref = varphi_family(etas, r_ref, n, scaled=True)
    lam = s_ref / phi_ref
    return (psi.T / lam[:, None],
            psip.T / lam[:, None],
            lam)


def varphi_family(etas, r: float, n: int, scaled: bool = False):
    """varphi at one radius for many eta (same rule for the whole family)."""
    etas = np.asarray(etas, dtype=float)
    arg_max = float(np.max(etas) * r)
    m = int(0.6 * arg_max) + 40
    a = (n - 3) / 2.0
    nodes, weights = roots_jacobi(m, a, a)
    expo = np.multiply.outer(etas * r, nodes)
    if scaled:
        expo = expo - (etas * r)[:, None]
    return sphere_area(n - 1) * (np.exp(expo) @ weights)


def lemma31_ratio(alpha: float, decay: float, t: float, R: float = 2.0) -> float:
    """int_0^(t+R) (1+r)^alpha e^(-decay*(t-r)) dr / (t+R)^alpha.

    The exponential weight concentrates the integral near r = t+R; bounded in
    t for every fixed alpha, decay > 0.  Substituting x = t+R-r makes the
    integrand decay from x = 0, which adaptive quadrature handles uniformly
    in t.
    """
    if decay <= 0:
        raise ValueError("decay must be > 0")
    if t < 0 or t + R <= 0:
        raise ValueError("need t >= 0 and t + R > 0")

    def integrand(x):
        return (1.0 + t + R - x) ** alpha * math.exp(decay * (R - x))

    val, _ = quad(integrand, 0.0, t + R, limit=200)
    return val / (t + R) ** alpha
