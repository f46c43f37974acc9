"""Time stepping for the relaxation systems.

All schemes are written in the reformulated (bounded-speed) form: the
relaxation source is linear in the newest ``v`` so that unknown is
eliminated in closed form, which turns the update for ``u`` into a
convection-diffusion step with the stiff weights

    theta = m eps**e_s / (m eps**e_s + g dt),   w_f = (1 - theta) m,
    kappa = w_f eps**(e_s - e_p)

where ``g`` is the implicit coefficient of the new level and ``m`` the
frozen mobility.  Multistep steps, bootstrap Runge-Kutta stages and the
first-order scheme all go through the same kernel, ``_advance``.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import models, spatial, tableaux
from .spatial import NG, BoundaryCondition


class Formulation(enum.Enum):
    AP_EXPLICIT = "ap-explicit"
    AP_IMPLICIT = "ap-implicit"
    FIRST_ORDER = "first-order"

    @classmethod
    def parse(cls, text) -> "Formulation":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("_", "-")
        for f in cls:
            if f.value == key or f.name.lower() == key.replace("-", "_"):
                return f
        raise ValueError(f"unknown formulation {text!r}")


class CflWarning(RuntimeWarning):
    pass


class CflViolation(RuntimeError):
    pass


class SolverError(RuntimeError):
    """Implicit solve did not converge."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SolverOptions:
    # "auto" uses double_rusanov for the explicit formulations; AP-implicit
    # always uses fd6
    diffusion_stencil: str = "auto"
    weno_eps: float = spatial.WENO_EPS
    strict_cfl: bool = False
    newton_tol: float = 1e-12
    newton_maxit: int = 50
    boot_lambda: float | None = None  # defaults to the run's CFL number

    def __post_init__(self):
        if self.diffusion_stencil not in ("auto", "fd6", "double_rusanov"):
            raise ValueError("diffusion_stencil must be 'auto', 'fd6' or 'double_rusanov'")


@dataclass
class StepReport:
    dt: float
    theta_max: float
    iterations: int
    mass: float
    cfl: float


@dataclass
class SimState:
    """One simulation: grid, history (newest first), time and bookkeeping."""

    grid: spatial.Grid1D
    bc: BoundaryCondition
    model: models.ModelSpec
    scaling: models.ScalingParams
    tableau: tableaux.ImexLmTableau
    formulation: Formulation
    dt: float
    hist_u: list
    hist_v: list
    t: float = 0.0
    n: int = 0
    options: SolverOptions = field(default_factory=SolverOptions)
    lam: float = 0.25
    theta_max: float = 0.0
    cfl_max: float = 0.0
    iterations: int = 0
    report: StepReport | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def u(self) -> np.ndarray:
        return self.hist_u[0]

    @property
    def v(self) -> np.ndarray:
        return self.hist_v[0]

    @property
    def mass(self) -> float:
        return float(np.sum(self.hist_u[0]) * self.grid.dx)

    @property
    def levels(self) -> int:
        return len(self.hist_u)


# ---------------------------------------------------------------------------
# Time-step rules
# ---------------------------------------------------------------------------

def select_dt(formulation, scaling: models.ScalingParams, dx: float, lambda_cfl: float,
              model: models.ModelSpec | None = None, mode: str = "standard") -> float:
    """Time step from the CFL rules.

    ``standard``: AP-explicit and first-order use ``lam dx max(eps, dx)``,
    AP-implicit uses ``lam dx max(eps, 1)``.  ``hyperbolic`` (explicit
    formulations only) replaces the parabolic factor ``dx`` by
    ``min(1, dx / eps**(1 - alpha))``.
    """
    formulation = Formulation.parse(formulation)
    if dx <= 0 or lambda_cfl <= 0:
        raise ValueError("dx and lambda_cfl must be positive")
    eps = scaling.min_eps_alpha_rule()
    if formulation is Formulation.AP_IMPLICIT:
        return lambda_cfl * dx * max(eps, 1.0)
    if mode == "standard":
        return lambda_cfl * dx * max(eps, dx)
    if mode == "hyperbolic":
        visc = np.max(scaling.power(1.0 - np.asarray(scaling.alpha)))
        return lambda_cfl * dx * max(eps, min(1.0, dx / float(visc)))
    raise ValueError(f"unknown dt mode {mode!r}")


def fit_dt(dt: float, t_final: float) -> tuple[float, int]:
    """Largest ``dt' <= dt`` that divides ``t_final`` exactly, and the step count."""
    if t_final <= 0:
        return dt, 0
    n = max(1, math.ceil(t_final / dt - 1e-9))
    return t_final / n, n


# ---------------------------------------------------------------------------
# State construction
# ---------------------------------------------------------------------------

def init_state(model, scaling, grid, bc, u0, v0, tableau, formulation, dt,
               options: SolverOptions | None = None, lam: float = 0.25, t0: float = 0.0) -> SimState:
    formulation = Formulation.parse(formulation)
    if formulation is Formulation.FIRST_ORDER:
        tableau = tableaux.imex_euler()
    if grid.nx < 2 * tableau.s + 7:
        raise ValueError(f"nx must be at least 2s+7 = {2 * tableau.s + 7}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    u0 = np.array(u0, dtype=float)
    v0 = np.array(v0, dtype=float)
    if u0.shape != (grid.nx,) or v0.shape != (grid.nx,):
        raise ValueError("initial fields must have one value per cell")
    model.check_hyperbolic(u0)
    return SimState(
        grid=grid, bc=BoundaryCondition.parse(bc), model=model, scaling=scaling,
        tableau=tableau, formulation=formulation, dt=float(dt),
        hist_u=[u0], hist_v=[v0], t=t0, options=options or SolverOptions(), lam=lam,
    )


# ---------------------------------------------------------------------------
# The shared kernel
# ---------------------------------------------------------------------------

@dataclass
class _StageCoeffs:
    u_base: np.ndarray
    v_lin: np.ndarray  # weights of v_j in the v base (no relaxation)
    v_src: np.ndarray  # implicit relaxation weights of k_j v_j on past levels
    h: np.ndarray      # implicit weights of (v_j)_x in the u equation
    e: np.ndarray      # explicit weights of f_j
    d: np.ndarray      # weights of p_j derivatives
    g: float           # implicit weight of the new level
    d_new: float       # weight of p(u_new) derivatives (AP-implicit)
    m_weights: np.ndarray


def _scale_fields(state: SimState):
    cache = state._cache
    if "scale" not in cache:
        alpha = np.broadcast_to(np.asarray(state.scaling.alpha, dtype=float), (state.grid.nx,))
        e_p, e_s = state.model.exponents(alpha)
        e_p = np.broadcast_to(e_p, alpha.shape)
        e_s = np.broadcast_to(e_s, alpha.shape)
        sc = state.scaling
        cache["scale"] = dict(
            eps_es=sc.power(e_s),
            eps_ratio=sc.power(e_s - e_p),
            eps_wave=sc.power(e_s - 0.5 * e_p),
            eps2a=sc.power(2 * alpha),
        )
        e2l, e2r = _cell_to_faces(cache["scale"]["eps2a"], state.bc)
        cache["scale"]["eps2a_face"] = np.maximum(e2l, e2r)
    return cache["scale"]


def _cell_to_faces(q: np.ndarray, bc: BoundaryCondition):
    ext = spatial.fill_ghosts(q, bc)
    nx = q.shape[-1]
    return ext[..., NG - 1:NG + nx], ext[..., NG:NG + nx + 1]


def _fd6_ops(state: SimState):
    cache = state._cache
    if "fd6" not in cache:
        nx = state.grid.nx
        G, Div = spatial.fd6_matrices(nx, state.grid.dx)
        E = spatial.extension_matrix(nx, state.bc)
        cache["fd6"] = (G, Div, E, sp.csr_matrix(G @ E))
    return cache["fd6"]


def implicit_solve(rhs, mu_face, grid: spatial.Grid1D, bc, p=None, dp=None, p_linear: bool = True,
                   guess=None, tol: float = 1e-12, maxit: int = 50, cache: dict | None = None):
    """Solve ``u - Div(mu G p(u)) = rhs`` for ``u``.

    ``G`` is the sixth-order face gradient and ``Div`` the face-difference
    divergence, so for constant ``mu`` the operator is ``I - mu d2/dx2``
    discretised with the seven-point stencil.

    Parameters
    ----------
    rhs : ndarray
        Known data, one value per cell.
    mu_face : float or ndarray
        Non-negative diffusion weight on each of the ``nx + 1`` faces.
    p, dp : callable, optional
        Pressure function and derivative (identity by default).
    p_linear : bool
        If true one sparse LU solve is done (cached when ``cache`` is given);
        otherwise Newton's method with the analytic Jacobian
        ``I - Div mu G diag(p'(u))``.
    tol : float
        Relative tolerance on the max-norm residual.

    Returns
    -------
    u, iterations, residual
    """
    rhs = np.asarray(rhs, dtype=float)
    nx = rhs.size
    bc = BoundaryCondition.parse(bc)
    mu_face = np.broadcast_to(np.asarray(mu_face, dtype=float), (nx + 1,))
    if np.any(mu_face < 0) or not np.all(np.isfinite(mu_face)):
        raise SolverError("invalid diffusion weight", float("nan"), 0)
    if not np.any(mu_face):
        return rhs.copy(), 0, 0.0
    p = p or (lambda u: u)
    dp = dp or (lambda u: np.ones_like(u))
    cache = {} if cache is None else cache
    if "ops" not in cache:
        G, Div = spatial.fd6_matrices(nx, grid.dx)
        E = spatial.extension_matrix(nx, bc)
        cache["ops"] = (Div, sp.csr_matrix(G @ E))
    Div, GE = cache["ops"]
    L = sp.csr_matrix(Div @ sp.diags(mu_face) @ GE)
    eye = sp.identity(nx, format="csc")
    scale = max(float(np.max(np.abs(rhs))), 1e-300)

    def residual(u):
        return u - L @ p(u) - rhs

    if p_linear:
        key = (mu_face.tobytes(), float(np.asarray(dp(np.ones(1)))[0]))
        if cache.get("lu_key") != key:
            slope = float(np.asarray(dp(np.ones(1)))[0])
            cache["lu"] = spla.splu(sp.csc_matrix(eye - slope * L))
            cache["lu_key"] = key
        # p(u) = slope * u + p(0) for linear p
        shift = L @ p(np.zeros(nx))
        u = cache["lu"].solve(rhs + shift)
        return u, 1, float(np.max(np.abs(residual(u)))) / scale

    u = rhs.copy() if guess is None else np.array(guess, dtype=float)
    res = residual(u)
    rnorm = float(np.max(np.abs(res)))
    it = 0
    while rnorm > tol * scale:
        if it >= maxit:
            raise SolverError("Newton iteration did not converge", rnorm / scale, it)
        J = sp.csc_matrix(eye - L @ sp.diags(dp(u)))
        u = u - spla.spsolve(J, res)
        res = residual(u)
        rnorm = float(np.max(np.abs(res)))
        it += 1
    cache.setdefault("newton_history", []).append(it)
    return u, it, rnorm / scale


# rows of the per-level face and cell blocks
_F_UM, _F_UP, _F_VM, _F_VP, _F_FM, _F_FP, _F_GAM, _F_DP, _F_GH = range(9)
_C_M, _C_KV, _C_F, _C_DPX = range(4)


def _diffusion_stencil(state: SimState, implicit: bool) -> str:
    if implicit:
        return "fd6"
    choice = state.options.diffusion_stencil
    return "double_rusanov" if choice == "auto" else choice


def _level_data(state: SimState, u: np.ndarray, v: np.ndarray, implicit: bool):
    """Face and cell quantities of one time level that do not depend on the step.

    Results are cached by array identity; the cache entry keeps references
    to ``u`` and ``v`` so an identity can not be recycled while it is alive.
    """
    store = state._cache.setdefault("levels", {})
    key = (id(u), id(v), implicit)
    hit = store.get(key)
    if hit is not None and hit[0] is u and hit[1] is v:
        return hit[2], hit[3]
    grid, bc, model, opts = state.grid, state.bc, state.model, state.options
    dx = grid.dx
    sc = _scale_fields(state)
    odd_v = bc is BoundaryCondition.REFLECTING
    P_ext = spatial.fill_ghosts(model.p(u), bc)
    stencil = _diffusion_stencil(state, implicit)
    rows = [spatial.fill_ghosts(u, bc), spatial.fill_ghosts(v, bc, odd=odd_v)]
    if stencil == "double_rusanov":
        rows.append(P_ext)
    wm, wp = spatial.weno5_reconstruct(np.stack(rows), opts.weno_eps)
    um, vm, up, vp = wm[0], wm[1], wp[0], wp[1]
    e2f = sc["eps2a_face"]
    fm = model.f_eq(um, vm, e2f)
    fp = model.f_eq(up, vp, e2f)
    gam = np.maximum(model.df_speed(um, vm, e2f), model.df_speed(up, vp, e2f))
    dpf = np.maximum(model.dp(um), model.dp(up))
    if stencil == "fd6":
        Gh = spatial.fd6_face_gradient(P_ext, dx)
    else:
        # double Rusanov: central WENO faces -> cell gradient -> central WENO faces
        q = spatial.div_faces(0.5 * (wm[2] + wp[2]), dx)
        Gh = spatial.central_face_values(spatial.fill_ghosts(q, bc, odd=odd_v), opts.weno_eps)
    if implicit:
        dpx = spatial.d1_6th(P_ext, dx)
    else:
        dpx = spatial.div_faces(0.5 * (model.p(um) + model.p(up)), dx)
    M = model.mobility(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        kv = np.where(M > 0, v / np.where(M > 0, M, 1.0), 0.0)
    faces = np.stack(np.broadcast_arrays(um, up, vm, vp, fm, fp, gam, dpf, Gh))
    cells = np.stack(np.broadcast_arrays(M, kv, model.f_eq(u, v, sc["eps2a"]), dpx))
    store[key] = (u, v, faces, cells)
    return faces, cells


def _prune_levels(state: SimState):
    store = state._cache.get("levels")
    if not store:
        return
    live = {(id(u), id(v)) for u, v in zip(state.hist_u, state.hist_v)}
    for key in [k for k in store if k[:2] not in live]:
        del store[key]


def _advance(state: SimState, levels_u, levels_v, co: _StageCoeffs, dt: float, implicit: bool):
    """One update of the shared form; returns ``(u_new, v_new, theta_max, iters)``."""
    grid, bc, model, opts = state.grid, state.bc, state.model, state.options
    dx = grid.dx
    sc = _scale_fields(state)
    data = [_level_data(state, u, v, implicit) for u, v in zip(levels_u, levels_v)]
    F = np.stack([d[0] for d in data])
    C = np.stack([d[1] for d in data])
    V = np.stack(levels_v)

    # stiff weights (cellwise)
    M = C[:, _C_M]
    m_star = np.maximum(co.m_weights @ M, 0.0)
    num = m_star * sc["eps_es"]
    denom = num + dt * co.g
    theta = num / denom
    w_f = co.g * dt * m_star / denom            # (1 - theta) m
    kappa = w_f * sc["eps_ratio"]
    wave = m_star * sc["eps_wave"] / denom     # theta sqrt(P)
    dtf = dt * m_star / denom                  # w_f / g
    dtp = dtf * sc["eps_ratio"]                # kappa / g

    # dissipation speed per level and face: the larger of the two cell bounds
    gam, dpf = F[:, _F_GAM], F[:, _F_DP]
    wl, wr = _cell_to_faces(w_f, bc)
    al, ar = _cell_to_faces(wave, bc)
    gl, gr = gam * wl, gam * wr
    Theta = 0.5 * np.maximum(gl + np.sqrt(gl * gl + 4 * al * al * dpf),
                             gr + np.sqrt(gr * gr + 4 * ar * ar * dpf))
    du = F[:, _F_UP] - F[:, _F_UM]
    dv = F[:, _F_VP] - F[:, _F_VM]
    v_hat = 0.5 * (F[:, _F_VP] + F[:, _F_VM] - Theta * du)
    f_hat = 0.5 * (F[:, _F_FP] + F[:, _F_FM] - Theta * du)

    # level weights of the v fluxes in the u equation (cellwise, then faces)
    with np.errstate(divide="ignore", invalid="ignore"):
        k_wf = np.where(M > 0, w_f[None, :] / np.where(M > 0, M, 1.0), 0.0)
    W = co.h[:, None] + co.g * theta[None, :] * co.v_lin[:, None] - co.v_src[:, None] * k_wf
    W_face = spatial.face_average(W, bc)
    wf_face = spatial.face_average(w_f, bc)
    kap_face = spatial.face_average(kappa, bc)

    flux = (W_face * v_hat).sum(axis=0) + wf_face * (co.e @ f_hat)
    if np.any(co.d):
        flux = flux - kap_face * (co.d @ F[:, _F_GH])
    if bc is BoundaryCondition.REFLECTING:
        # the u flux approximates v, which vanishes at a reflecting wall
        flux[0] = flux[-1] = 0.0
        kap_face = kap_face.copy()
        kap_face[0] = kap_face[-1] = 0.0

    rhs_u = co.u_base - dt * spatial.div_faces(flux, dx)
    iters = 0
    if implicit and co.d_new != 0.0:
        mu_face = dt * co.d_new * kap_face
        u_new, iters, _ = implicit_solve(
            rhs_u, mu_face, grid, bc, p=model.p, dp=model.dp, p_linear=model.p_linear,
            guess=levels_u[0], tol=opts.newton_tol, maxit=opts.newton_maxit,
            cache=state._cache.setdefault("implicit", {}),
        )
        dpx_new = spatial.d1_6th(spatial.fill_ghosts(model.p(u_new), bc), dx)
    else:
        u_new = rhs_u
        dpx_new = 0.0

    # v update: theta * (explicit bracket) with the relaxation solved exactly
    # the upwind part of the p flux travels with the explicit p derivatives;
    # AP-implicit takes every p derivative centrally, so v gets none
    if implicit:
        diss = 0.0
    else:
        diss = spatial.div_faces(0.5 * (co.d @ (Theta * dv)), dx)
    v_new = (
        theta * (co.v_lin @ V + dt * diss)
        - dtf * (co.v_src @ C[:, _C_KV])
        + dtf * (co.e @ C[:, _C_F])
        - dtp * (co.d @ C[:, _C_DPX] + co.d_new * dpx_new)
    )
    theta_max = float(np.max(Theta))
    return u_new, v_new, theta_max, iters


def _lm_coeffs(state: SimState) -> _StageCoeffs:
    t = state.tableau
    a, b, c = t.a_arr, t.b_arr, t.c_arr
    U = np.stack(state.hist_u)
    implicit = state.formulation is Formulation.AP_IMPLICIT
    return _StageCoeffs(
        u_base=-(a[:, None] * U).sum(axis=0),
        v_lin=-a, v_src=c, h=c, e=b,
        d=c if implicit else b,
        g=t.c_minus1,
        d_new=t.c_minus1 if implicit else 0.0,
        m_weights=(b - c) / t.c_minus1,
    )


def _check_step(state: SimState, theta_max: float, dt: float):
    cfl = dt * theta_max / state.grid.dx
    state.theta_max = max(state.theta_max, theta_max)
    state.cfl_max = max(state.cfl_max, cfl)
    if cfl > 1.0:
        msg = f"CFL number dt*Theta/dx = {cfl:.3g} exceeds 1 at t = {state.t:.6g}"
        if state.options.strict_cfl:
            raise CflViolation(msg)
        if not state._cache.get("cfl_warned"):
            warnings.warn(msg, CflWarning, stacklevel=3)
            state._cache["cfl_warned"] = True
    return cfl


def _post_checks(state: SimState, u, v):
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise FloatingPointError(f"non-finite solution at step {state.n}")
    state.model.check_hyperbolic(u)
    if not state._cache.get("subchar_warned"):
        if not models.warn_subcharacteristic(state.model, u, v, state.scaling):
            state._cache["subchar_warned"] = True


def _lm_step(state: SimState, implicit: bool) -> SimState:
    s = state.tableau.s
    if state.levels < s:
        raise ValueError(f"history holds {state.levels} levels, {s} required; bootstrap first")
    co = _lm_coeffs(state)
    u, v, theta_max, iters = _advance(state, state.hist_u[:s], state.hist_v[:s], co, state.dt, implicit)
    cfl = _check_step(state, theta_max, state.dt)
    _post_checks(state, u, v)
    state.hist_u = [u] + state.hist_u[: s - 1]
    state.hist_v = [v] + state.hist_v[: s - 1]
    _prune_levels(state)
    state.n += 1
    state.t += state.dt
    state.iterations += iters
    state.report = StepReport(state.dt, theta_max, iters, state.mass, cfl)
    return state


def step_first_order(state: SimState) -> SimState:
    """First-order reformulated IMEX step (forward/backward Euler pair)."""
    if state.tableau.s != 1:
        state = replace(state, tableau=tableaux.imex_euler())
    return _lm_step(state, implicit=False)


def step_ap_explicit(state: SimState) -> SimState:
    """One AP-explicit multistep step (explicit diffusion in the limit)."""
    return _lm_step(state, implicit=False)


def step_ap_implicit(state: SimState) -> SimState:
    """One AP-implicit multistep step (implicit diffusion in the limit)."""
    return _lm_step(state, implicit=True)


def step(state: SimState) -> SimState:
    if state.formulation is Formulation.AP_IMPLICIT:
        return step_ap_implicit(state)
    if state.formulation is Formulation.FIRST_ORDER:
        return step_first_order(state)
    return step_ap_explicit(state)


# ---------------------------------------------------------------------------
# Bootstrap: four-stage, third-order, stiffly accurate IMEX Runge-Kutta
# ---------------------------------------------------------------------------

RK_IMPLICIT = np.array(
    [
        [0, 0, 0, 0, 0],
        [0, 1 / 2, 0, 0, 0],
        [0, 1 / 6, 1 / 2, 0, 0],
        [0, -1 / 2, 1 / 2, 1 / 2, 0],
        [0, 3 / 2, -3 / 2, 1 / 2, 1 / 2],
    ]
)
RK_EXPLICIT = np.array(
    [
        [0, 0, 0, 0, 0],
        [1 / 2, 0, 0, 0, 0],
        [11 / 18, 1 / 18, 0, 0, 0],
        [5 / 6, -5 / 6, 1 / 2, 0, 0],
        [1 / 4, 7 / 4, 3 / 4, -7 / 4, 0],
    ]
)


def _rk_step(state: SimState, u0, v0, dt: float):
    implicit = state.formulation is Formulation.AP_IMPLICIT
    us, vs = [u0], [v0]
    theta_max, iters = 0.0, 0
    for i in range(1, RK_IMPLICIT.shape[0]):
        h = RK_IMPLICIT[i, :i].copy()
        e = RK_EXPLICIT[i, :i].copy()
        v_lin = np.zeros(i)
        v_lin[0] = 1.0
        m_w = np.zeros(i)
        m_w[-1] = 1.0
        co = _StageCoeffs(
            u_base=u0, v_lin=v_lin, v_src=h, h=h, e=e,
            d=h if implicit else e, g=RK_IMPLICIT[i, i],
            d_new=RK_IMPLICIT[i, i] if implicit else 0.0, m_weights=m_w,
        )
        u, v, th, it = _advance(state, us, vs, co, dt, implicit)
        us.append(u)
        vs.append(v)
        theta_max = max(theta_max, th)
        iters += it
    return us[-1], vs[-1], theta_max, iters


def bootstrap_dt(state: SimState) -> tuple[float, int]:
    """Substep size ``min(dt, lam dx**max(1, s/3))`` and substeps per level."""
    lam = state.options.boot_lambda or state.lam
    s = state.tableau.s
    dt_boot = min(state.dt, lam * state.grid.dx ** max(1.0, s / 3.0))
    nsub = max(1, math.ceil(state.dt / dt_boot - 1e-9))
    return state.dt / nsub, nsub


def bootstrap_rk3(state: SimState, n_steps: int | None = None) -> SimState:
    """Fill the history to ``s`` levels with the IMEX Runge-Kutta starter."""
    s = state.tableau.s
    n_steps = s - state.levels if n_steps is None else n_steps
    if n_steps <= 0:
        return state
    h, nsub = bootstrap_dt(state)
    for _ in range(n_steps):
        u, v = state.hist_u[0], state.hist_v[0]
        for _ in range(nsub):
            u, v, th, it = _rk_step(state, u, v, h)
            _check_step(state, th, h)
            _post_checks(state, u, v)
            state.iterations += it
            _prune_levels(state)
        state.hist_u = [u] + state.hist_u
        state.hist_v = [v] + state.hist_v
        state.n += 1
        state.t += state.dt
    return state


def run(state: SimState, n_steps: int, callback=None) -> SimState:
    """Advance to ``n_steps`` total steps (bootstrap included)."""
    s = state.tableau.s
    need = min(s - state.levels, n_steps - state.n)
    if need > 0:
        bootstrap_rk3(state, need)
    while state.n < n_steps:
        step(state)
        if callback is not None:
            callback(state)
    return state
