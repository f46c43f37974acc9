"""Exact and limit reference solutions, error norms and convergence studies."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

from . import spatial, tableaux
from .spatial import BoundaryCondition


# ---------------------------------------------------------------------------
# Closed-form solutions
# ---------------------------------------------------------------------------

def exact_erf_riemann(x, t, rho_L: float = 4.0, rho_R: float = 2.0, x0: float = 2.0):
    """Solution of ``u_t + u_x = u_xx`` from a jump at ``x0`` (left ``rho_L``, right ``rho_R``)."""
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    return 0.5 * (rho_L + rho_R) + 0.5 * (rho_L - rho_R) * erf((t - x + x0) / (2.0 * math.sqrt(t)))


def barenblatt_radius(t: float) -> float:
    return (12.0 * (t + 1.0)) ** (1.0 / 3.0)


def barenblatt(x, t: float):
    """Barenblatt profile ``(1/r) (1 - (x/r)^2)_+`` with ``r = (12 (t + 1))^(1/3)``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    x = np.asarray(x, dtype=float)
    r = barenblatt_radius(t)
    return np.maximum(1.0 - (x / r) ** 2, 0.0) / r


def support_edges(x, u, rel_tol: float = 1e-3) -> tuple[float, float]:
    """Outermost cell centres where ``u`` exceeds ``rel_tol * max(u)``.

    A compactly supported numerical profile never vanishes exactly (the
    dissipation smears the front over a few cells), so the edge is taken at
    a small fraction of the peak value.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    inside = np.nonzero(u > rel_tol * np.max(u))[0]
    if inside.size == 0:
        raise ValueError("profile has no positive part")
    return float(x[inside[0]]), float(x[inside[-1]])


# ---------------------------------------------------------------------------
# Norms and restriction
# ---------------------------------------------------------------------------

def l1_error(a, b, dx: float) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"grid mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(np.abs(a - b)) * dx)


def restrict(fine, factor: int) -> np.ndarray:
    """Average groups of ``factor`` nested cells (``factor = 1`` is the identity)."""
    fine = np.asarray(fine, dtype=float)
    if factor < 1 or fine.shape[-1] % factor:
        raise ValueError(f"cannot restrict {fine.shape[-1]} cells by {factor}")
    if factor == 1:
        return fine.copy()
    return fine.reshape(*fine.shape[:-1], -1, factor).mean(axis=-1)


def rates(errors: Sequence[float]) -> list[float]:
    """``log2(E_{k-1} / E_k)`` for consecutive errors; NaN where undefined."""
    out = [float("nan")]
    for prev, cur in zip(errors[:-1], errors[1:]):
        if prev > 0 and cur > 0:
            out.append(math.log2(prev / cur))
        else:
            out.append(float("nan"))
    return out


# ---------------------------------------------------------------------------
# Convergence studies
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    """Errors ``E(N) = |R(sol_2N) - sol_N|_1`` and rates between consecutive ``N``."""

    scheme: str
    formulation: str
    epsilon: float
    alpha: float
    n: list = field(default_factory=list)
    err_u: list = field(default_factory=list)
    err_v: list = field(default_factory=list)

    @property
    def rate_u(self) -> list:
        return rates(self.err_u)

    @property
    def rate_v(self) -> list:
        return rates(self.err_v)

    def rate_at(self, n: int, var: str = "u") -> float:
        return (self.rate_u if var == "u" else self.rate_v)[self.n.index(n)]

    def rows(self):
        for row in zip(self.n, self.err_u, self.rate_u, self.err_v, self.rate_v):
            yield (self.scheme, self.formulation, self.epsilon, self.alpha) + row

    def to_csv(self, path_or_file, header: bool = True) -> None:
        own = isinstance(path_or_file, str)
        fh = open(path_or_file, "w") if own else path_or_file
        try:
            if header:
                fh.write("scheme,formulation,epsilon,alpha,N,err_u,rate_u,err_v,rate_v\n")
            for r in self.rows():
                fh.write("%s,%s,%.17g,%.17g,%d,%.17g,%.17g,%.17g,%.17g\n" % r)
        finally:
            if own:
                fh.close()


def _solve_level(args):
    solve, nx = args
    return solve(nx)


def convergence_study(solve: Callable[[int], tuple], base_n: int, n_levels: int, *,
                      scheme: str = "", formulation: str = "", epsilon: float = float("nan"),
                      alpha: float = float("nan"), dx_of: Callable[[int], float] | None = None,
                      workers: int = 1) -> ConvergenceReport:
    """Self-convergence study on grids ``base_n * 2**k``, ``k = 0 .. n_levels - 1``.

    Parameters
    ----------
    solve : callable
        ``solve(nx) -> (u, v)`` at the final time on an ``nx``-cell grid.
        Must be picklable when ``workers > 1``.
    dx_of : callable, optional
        Cell size for ``nx`` cells (unit domain by default).
    workers : int
        Levels are independent and may run in separate processes.

    Returns
    -------
    ConvergenceReport
        One row per grid except the finest (``n_levels - 1`` rows).
    """
    if n_levels < 3:
        raise ValueError("a convergence study needs at least 3 levels")
    ns = [base_n * 2**k for k in range(n_levels)]
    dx_of = dx_of or (lambda nx: 1.0 / nx)
    jobs = [(solve, nx) for nx in ns]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            sols = list(pool.map(_solve_level, jobs))
    else:
        sols = [_solve_level(j) for j in jobs]
    rep = ConvergenceReport(scheme, formulation, epsilon, alpha)
    for k in range(n_levels - 1):
        (uc, vc), (uf, vf) = sols[k], sols[k + 1]
        dx = dx_of(ns[k])
        rep.n.append(ns[k])
        rep.err_u.append(l1_error(restrict(uf, 2), uc, dx))
        rep.err_v.append(l1_error(restrict(vf, 2), vc, dx))
    return rep


# ---------------------------------------------------------------------------
# Limit schemes (independent oracle for the asymptotic-preserving property)
# ---------------------------------------------------------------------------

LIMITS = ("convection", "convection_diffusion_explicit", "convection_diffusion_imex")


def _upwind_divergence(u, gamma: float, bc, dx: float, weno_eps: float) -> np.ndarray:
    um, up = spatial.weno5_reconstruct(spatial.fill_ghosts(u, bc), weno_eps)
    flux = 0.5 * gamma * (um + up) - 0.5 * abs(gamma) * (up - um)
    return spatial.div_faces(flux, dx)


def _explicit_laplacian(u, bc, dx: float, stencil: str, weno_eps: float) -> np.ndarray:
    ext = spatial.fill_ghosts(u, bc)
    if stencil == "fd6":
        return spatial.laplacian_p_6th(ext, dx)
    if stencil == "double_rusanov":
        return spatial.div_faces(spatial.weno_face_gradient(ext, dx, bc, weno_eps), dx)
    raise ValueError(f"unknown diffusion stencil {stencil!r}")


def fd6_symbol(nx: int, dx: float) -> np.ndarray:
    """Eigenvalues of the periodic seven-point ``d2/dx2`` stencil, in FFT order."""
    th = 2.0 * np.pi * np.fft.fftfreq(nx)
    return (spatial.FD6_D + 2.0 * (spatial.FD6_C * np.cos(th) + spatial.FD6_B * np.cos(2 * th)
                                   + spatial.FD6_A * np.cos(3 * th))) / dx**2


def limit_scheme_oracle(tableau: tableaux.ImexLmTableau, limit: str, u_history, grid: spatial.Grid1D,
                        dt: float, n_steps: int, gamma: float = 1.0, bc=BoundaryCondition.PERIODIC,
                        stencil: str = "double_rusanov", weno_eps: float = spatial.WENO_EPS) -> list:
    """Integrate a limiting equation of the prototype model with a plain multistep scheme.

    The multistep coefficients are applied directly to the limit equation,
    with no relaxation variable:

    ``convection``
        ``u_t + gamma u_x = 0``, fully explicit.
    ``convection_diffusion_explicit``
        ``u_t + gamma u_x = u_xx``, explicit in both terms (``stencil``
        selects the discrete Laplacian).
    ``convection_diffusion_imex``
        Same equation with the diffusion on the new level implicit (and the
        implicit history weights ``c`` on old levels); the sixth-order
        stencil is used and the linear system is solved by FFT, so the grid
        must be periodic.

    Parameters
    ----------
    u_history : sequence of arrays
        ``s`` levels, newest first.

    Returns
    -------
    list of arrays
        The ``n_steps`` new levels in order.
    """
    if limit not in LIMITS:
        raise ValueError(f"unknown limit {limit!r}; expected one of {', '.join(LIMITS)}")
    bc = BoundaryCondition.parse(bc)
    s = tableau.s
    hist = [np.asarray(u, dtype=float) for u in u_history]
    if len(hist) != s:
        raise ValueError(f"{tableau.name} needs {s} history levels, got {len(hist)}")
    a, b, c, g = tableau.a_arr, tableau.b_arr, tableau.c_arr, tableau.c_minus1
    dx = grid.dx
    if limit == "convection_diffusion_imex":
        if bc is not BoundaryCondition.PERIODIC:
            raise ValueError("the implicit limit oracle needs a periodic grid")
        denom = 1.0 - dt * g * fd6_symbol(grid.nx, dx)
    out = []
    for _ in range(n_steps):
        rhs = -sum(aj * u for aj, u in zip(a, hist))
        rhs = rhs - dt * sum(bj * _upwind_divergence(u, gamma, bc, dx, weno_eps) for bj, u in zip(b, hist))
        if limit == "convection_diffusion_explicit":
            rhs = rhs + dt * sum(bj * _explicit_laplacian(u, bc, dx, stencil, weno_eps) for bj, u in zip(b, hist))
            new = rhs
        elif limit == "convection_diffusion_imex":
            if np.any(c):
                rhs = rhs + dt * sum(cj * _explicit_laplacian(u, bc, dx, "fd6", weno_eps) for cj, u in zip(c, hist))
            new = np.real(np.fft.ifft(np.fft.fft(rhs) / denom))
        else:
            new = rhs
        out.append(new)
        hist = [new] + hist[:-1]
    return out
