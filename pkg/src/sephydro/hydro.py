"""Macroscopic reference objects on the exterior of the unit ball.

phi(chi, tau) = alpha * P(tau_{|chi|,1} <= tau) is radial and solves
    phi_tau = 1/2 phi_rr + (d-1)/(2r) phi_r,   phi|_{r=1} = alpha, phi(.,0) = 0,
and the height-function limit
    N(r, tau) = C_d * alpha * int_r^inf w^{d-1} P(tau_{w,1} <= tau) dw,
C_d = d pi^{d/2} / Gamma(d/2 + 1) (d > 1; the one-sided convention C_1 = 1
matches the d = 1 Neumann constant -alpha), solves
    N_tau = 1/2 N_rr - (d-1)/(2r) N_r,  N_r|_{r=1} = -C_d alpha,  N(.,0) = 0.

Both PDEs get a Crank-Nicolson solver (tridiagonal, Rannacher-started to damp
the corner incompatibility at (r, tau) = (1, 0)), and phi additionally gets a
finite-difference residual check evaluated straight through the hitting-time
CDF, which is the numerical counterpart of the transform-side proof that the
residual vanishes.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import hitting
from .specfun import gamma

__all__ = [
    "RadialField", "neumann_constant", "phi", "phi_profile",
    "solve_radial_heat", "solve_height_pde", "pde_residual",
    "pde_residual_grid", "big_n",
]


def neumann_constant(d):
    """Surface factor C_d in the height-function flux at r = 1."""
    if d == 1:
        return 1.0
    return d * math.pi ** (d / 2.0) / gamma(d / 2.0 + 1.0)


@dataclass(frozen=True)
class RadialField:
    """One radial profile at time label tau (grid starts at r = 1)."""

    r_grid: np.ndarray
    values: np.ndarray
    tau: float
    d: int
    alpha: float
    meta: dict = field(default_factory=dict)
    snapshots: tuple = ()  # optional (tau, values) pairs along the way

    def __post_init__(self):
        if self.r_grid[0] != 1.0:
            raise ValueError("radial grid must start at r = 1")
        if not np.all(np.diff(self.r_grid) > 0):
            raise ValueError("radial grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")


def phi(chi_norm, tau, alpha, d):
    """Density limit alpha * P(tau_{chi,1} <= tau); equals alpha at the ball."""
    if chi_norm < 1.0:
        raise ValueError(f"|chi| must be >= 1, got {chi_norm}")
    if tau == 0.0 and chi_norm > 1.0:
        return 0.0
    if chi_norm == 1.0:
        return alpha
    return alpha * hitting.hitting_cdf(hitting.HittingSpec(d, chi_norm, tau))


def phi_profile(chi_norms, tau, alpha, d):
    return alpha * hitting.hitting_cdf_profile(d, chi_norms, tau)


def _cn_solve(d, alpha, r_max, dr, dtau, tau_end, equation, snapshot_taus=()):
    """Crank-Nicolson core shared by both radial PDEs.

    equation "density": 1/2 u_rr + (d-1)/(2r) u_r, Dirichlet alpha at r=1.
    equation "height":  1/2 u_rr - (d-1)/(2r) u_r, Neumann -C_d alpha at r=1
    (ghost point).  Far field is homogeneous Dirichlet at r_max.
    """
    if dr <= 0 or dtau <= 0:
        raise ValueError("dr and dtau must be positive")
    n = int(round((r_max - 1.0) / dr)) + 1
    r = 1.0 + dr * np.arange(n)
    warn = None
    if dtau > 10.0 * dr:
        warn = f"dtau={dtau} is large relative to dr={dr}; accuracy may suffer"

    sign = 1.0 if equation == "density" else -1.0
    a = 0.5 / dr ** 2                      # coefficient of u_rr term
    b = sign * (d - 1.0) / (2.0 * r) / (2.0 * dr)  # of u_r term
    lower = np.full(n, a) - b
    main = np.full(n, -2.0 * a)
    upper = np.full(n, a) + b
    const = np.zeros(n)

    if equation == "density":
        # row 0 pinned to the Dirichlet value
        lower[0] = upper[0] = main[0] = 0.0
    else:
        g = -neumann_constant(d) * alpha
        # ghost point u_{-1} = u_1 - 2 dr g folded into row 0 (r = 1);
        # the first-order term uses the exact flux g there
        lower[0] = 0.0
        main[0] = -1.0 / dr ** 2
        upper[0] = 1.0 / dr ** 2
        const[0] = -g / dr - (d - 1.0) / 2.0 * g
    # far-field row pinned to zero
    lower[-1] = upper[-1] = main[-1] = 0.0

    def tridiag(scale):
        return sp.diags(
            [scale * lower[1:], scale * main, scale * upper[:-1]],
            offsets=[-1, 0, 1], format="csc")

    eye = sp.identity(n, format="csc")
    u = np.zeros(n)

    def dirichlet_fix(vec):
        if equation == "density":
            vec[0] = alpha
        vec[-1] = 0.0

    n_steps = int(round(tau_end / dtau))
    if abs(n_steps * dtau - tau_end) > 1e-9 * max(1.0, tau_end):
        raise ValueError("tau_end must be an integer number of dtau steps")
    cn_a = spla.splu(eye - tridiag(0.5 * dtau))  # also the BE half-step matrix
    cn_b = eye + tridiag(0.5 * dtau)

    snaps = []
    want = sorted(set(snapshot_taus))
    tau = 0.0

    def take_snapshots():
        while want and tau >= want[0] - 1e-12:
            snaps.append((want.pop(0), u.copy()))

    for k in range(n_steps):
        if k == 0:
            # Rannacher start: two backward-Euler half steps damp the
            # incompatible corner at (r, tau) = (1, 0)
            for _ in range(2):
                rhs = u + 0.5 * dtau * const
                dirichlet_fix(rhs)
                u = cn_a.solve(rhs)
        else:
            rhs = cn_b @ u + dtau * const
            dirichlet_fix(rhs)
            u = cn_a.solve(rhs)
        tau = (k + 1) * dtau
        take_snapshots()

    meta = {"scheme": "crank-nicolson+rannacher", "dr": dr, "dtau": dtau,
            "r_max": r_max, "steps": n_steps, "equation": equation,
            # diagnostics: truncation adequacy and positivity
            "far_field_value": float(u[-2]) if n > 1 else 0.0,
            "min_value": float(np.min(u))}
    if warn:
        meta["warning"] = warn
    return RadialField(r_grid=r, values=u, tau=tau_end, d=d, alpha=alpha,
                       meta=meta, snapshots=tuple(snaps))


def solve_radial_heat(d, alpha, r_max=None, dr=0.01, dtau=0.001, tau_end=1.0,
                      snapshot_taus=()):
    """Dirichlet problem for the density limit; second order in dr."""
    if r_max is None:
        r_max = 1.0 + 12.0 * math.sqrt(tau_end)
    return _cn_solve(d, alpha, r_max, dr, dtau, tau_end, "density",
                     snapshot_taus)


def solve_height_pde(d, alpha, r_max=None, dr=0.01, dtau=0.001, tau_end=1.0,
                     snapshot_taus=()):
    """Neumann problem for the height-function limit."""
    if r_max is None:
        r_max = 1.0 + 12.0 * math.sqrt(tau_end)
    return _cn_solve(d, alpha, r_max, dr, dtau, tau_end, "height",
                     snapshot_taus)


def pde_residual_grid(d, alpha, r_grid, tau_grid, h=1e-3, big_m=32):
    """|phi_tau - 1/2 phi_rr - (d-1)/(2r) phi_r| on a grid, via central
    differences of phi evaluated through the hitting-time CDF.

    One fixed-node inversion per tau level keeps the inversion error smooth
    across the stencil, so differencing cancels it instead of amplifying it.
    """
    r_grid = np.asarray(r_grid, dtype=np.float64)
    tau_grid = np.asarray(tau_grid, dtype=np.float64)
    if np.any(r_grid - h < 1.0) or np.any(tau_grid - h <= 0.0):
        raise ValueError("stencil must stay inside (1, inf) x (0, inf)")
    rs = np.concatenate([r_grid - h, r_grid, r_grid + h])
    out = np.empty((tau_grid.size, r_grid.size))
    n = r_grid.size
    for i, tau in enumerate(tau_grid):
        pm = [alpha * hitting._cdf_batch_fixed(d, rs, tau + s * h, big_m)
              for s in (-1, 0, 1)]
        lo, mid, hi = pm[1][:n], pm[1][n:2 * n], pm[1][2 * n:]
        dtau_c = (pm[2][n:2 * n] - pm[0][n:2 * n]) / (2.0 * h)
        drr = (hi - 2.0 * mid + lo) / h ** 2
        dr_c = (hi - lo) / (2.0 * h)
        out[i] = np.abs(dtau_c - 0.5 * drr - (d - 1.0) / (2.0 * r_grid) * dr_c)
    return out


def pde_residual(d, alpha, r_grid, tau_grid, h=1e-3, big_m=32):
    """Max PDE residual of phi over the grid (see pde_residual_grid)."""
    return float(np.max(pde_residual_grid(d, alpha, r_grid, tau_grid, h,
                                          big_m)))


def _cdf_for_quadrature(d, ws, tau):
    return hitting.hitting_cdf_profile(d, ws, tau)


def big_n(r, tau, d, alpha, abs_tol=1e-6):
    """Height-function limit N(r, tau) by adaptive panel quadrature.

    The outer cutoff W grows until the integrand w^{d-1} P(tau_{w,1}<=tau)
    drops below 1e-12 (the tail is Gaussian in w); panels are then halved
    until two refinement levels agree within abs_tol.
    """
    if r < 1.0:
        raise ValueError(f"need r >= 1, got {r}")
    if tau < 0.0:
        raise ValueError(f"need tau >= 0, got {tau}")
    if tau == 0.0 or alpha == 0.0:
        return 0.0
    pref = neumann_constant(d) * alpha
    power = d - 1.0

    # outer cutoff: beyond the diffusive reach the integrand is negligible
    w_cut = r + 2.0 * math.sqrt(tau)
    step = math.sqrt(tau)
    while True:
        val = w_cut ** power * _cdf_for_quadrature(d, [w_cut], tau)[0]
        if val < 1e-12 or w_cut > r + 60.0 * math.sqrt(tau):
            break
        w_cut += step

    gl_x, gl_w = np.polynomial.legendre.leggauss(16)
    prev = None
    n_panels = 8
    for _ in range(6):
        edges = np.linspace(r, w_cut, n_panels + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes = (mid[:, None] + half[:, None] * gl_x[None, :]).ravel()
        cdf = _cdf_for_quadrature(d, nodes, tau)
        vals = nodes ** power * cdf
        total = float(np.sum(vals.reshape(n_panels, -1) @ gl_w * half))
        if prev is not None and abs(total - prev) < abs_tol / max(pref, 1.0):
            return pref * total
        prev = total
        n_panels *= 2
    return pref * prev
