"""Named run configurations for the benchmark problems and their construction."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import models, spatial, stepper, tableaux


@dataclass
class RunConfig:
    """Fully resolved description of one simulation."""

    model: str = "linear"
    gamma: float = 1.0
    epsilon: float = 1.0
    alpha: float = 1.0
    profile: str | None = None          # alpha(x) profile name, overrides ``alpha``
    scheme: str = "bdf2"                # built-in name or tableau file
    formulation: str = "ap-explicit"
    nx: int = 128
    x_lo: float = 0.0
    x_hi: float = 1.0
    bc: str = "periodic"
    cfl: float = 0.25
    t_final: float = 0.05
    dt_mode: str = "standard"
    initial: str = "sine"
    v0: str = "well-prepared"           # well-prepared | zero | literal
    diffusion_stencil: str = "auto"
    weno_eps: float = spatial.WENO_EPS
    strict_cfl: bool = False

    def validate(self) -> "RunConfig":
        models.model_by_name(self.model, self.gamma)
        tableaux.resolve_tableau(self.scheme)
        stepper.Formulation.parse(self.formulation)
        spatial.BoundaryCondition.parse(self.bc)
        if self.initial not in INITIAL_DATA:
            raise ValueError(f"unknown initial data {self.initial!r}; expected one of {', '.join(INITIAL_DATA)}")
        if self.v0 not in ("well-prepared", "zero", "literal"):
            raise ValueError("v0 must be well-prepared, zero or literal")
        if self.v0 == "literal" and self.initial != "sine":
            raise ValueError("literal v0 data exists only for the sine initial state")
        if self.profile is not None and self.profile not in ALPHA_PROFILES:
            raise ValueError(f"unknown alpha profile {self.profile!r}; expected one of {', '.join(ALPHA_PROFILES)}")
        if self.dt_mode not in ("standard", "hyperbolic"):
            raise ValueError("dt_mode must be standard or hyperbolic")
        if not (self.epsilon > 0 and self.cfl > 0 and self.t_final > 0 and self.weno_eps > 0):
            raise ValueError("epsilon, cfl, t_final and weno_eps must be positive")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if self.nx < 7 or self.x_hi <= self.x_lo:
            raise ValueError("invalid grid")
        stepper.SolverOptions(diffusion_stencil=self.diffusion_stencil)
        return self

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# Initial data and alpha profiles
# ---------------------------------------------------------------------------

def _sine(x):
    return np.sin(2 * np.pi * x)


def _riemann(x):
    return np.where(x <= 2.0, 4.0, 2.0)


def _barenblatt0(x):
    r = (12.0) ** (1.0 / 3.0)
    return np.maximum(1.0 - (x / r) ** 2, 0.0) / r


def _square(x):
    return np.where(np.abs(x) <= 0.125, 1.0, 0.0)


def _square_offset(x):
    return np.where(np.abs(x) <= 0.125, 1.0, 0.5)


INITIAL_DATA = {
    "sine": _sine,
    "riemann": _riemann,
    "barenblatt": _barenblatt0,
    "square-wave": _square,
    "square-wave-offset": _square_offset,
}


def _heaviside_smooth(x, delta=0.01):
    # 1 / (1 + exp(x / delta)) written with tanh to avoid overflow
    return 0.5 * (1.0 - np.tanh(x / (2.0 * delta)))


ALPHA_PROFILES = {
    "single-transition": lambda x: 1.0 - 0.5 * _heaviside_smooth(x),
    "double-transition": lambda x: 0.5 - 0.5 * (_heaviside_smooth(x + 0.075) - _heaviside_smooth(x - 0.075)),
}


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

PRESETS: dict[str, dict] = {
    "test1-convergence": dict(
        model="linear", gamma=1.0, epsilon=1.0, alpha=1.0, x_lo=0.0, x_hi=1.0, bc="periodic",
        initial="sine", v0="well-prepared", cfl=0.25, t_final=0.05, nx=128, scheme="bdf2",
        formulation="ap-explicit",
    ),
    "test2-riemann": dict(
        model="linear", gamma=1.0, epsilon=1e-6, alpha=1.0, x_lo=0.0, x_hi=4.0, bc="zero-flux",
        initial="riemann", v0="zero", cfl=0.4, t_final=0.25, nx=80, scheme="bdf2",
        formulation="ap-explicit",
    ),
    "test3-barenblatt": dict(
        model="porous", epsilon=1e-6, alpha=0.0, x_lo=-10.0, x_hi=10.0, bc="zero-flux",
        initial="barenblatt", v0="zero", cfl=0.4, t_final=3.0, nx=80, scheme="bdf2",
        formulation="ap-explicit",
    ),
    "test4a-riemann": dict(
        model="ruijgrook-wu", epsilon=1e-6, alpha=1.0, x_lo=0.0, x_hi=4.0, bc="zero-flux",
        initial="riemann", v0="well-prepared", cfl=0.4, dt_mode="hyperbolic", t_final=0.25,
        nx=100, scheme="bdf2", formulation="ap-explicit",
    ),
    "test4b-square-wave": dict(
        model="ruijgrook-wu", epsilon=0.7, alpha=1.0, x_lo=-0.5, x_hi=0.5, bc="reflecting",
        initial="square-wave", v0="zero", cfl=0.1, t_final=0.2, nx=100, scheme="bdf4",
        formulation="ap-implicit",
    ),
    "test4c-variable-alpha": dict(
        model="ruijgrook-wu", epsilon=1e-8, profile="single-transition", x_lo=-0.5, x_hi=0.5,
        bc="reflecting", initial="square-wave-offset", v0="zero", cfl=0.1, t_final=0.05, nx=100,
        scheme="bdf3", formulation="ap-implicit",
    ),
}

# final times that go with each alpha profile in the variable-alpha preset
PROFILE_T_FINAL = {"single-transition": 0.05, "double-transition": 0.1}


def preset_config(name: str, **overrides) -> RunConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    values = dict(PRESETS[name])
    if name == "test4c-variable-alpha" and "profile" in overrides and "t_final" not in overrides:
        values["t_final"] = PROFILE_T_FINAL.get(overrides["profile"], values["t_final"])
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values).validate()


# ---------------------------------------------------------------------------
# Construction and execution
# ---------------------------------------------------------------------------

def build(cfg: RunConfig, nx: int | None = None):
    """Create the initial :class:`~imexap.stepper.SimState` and the step count."""
    nx = cfg.nx if nx is None else nx
    grid = spatial.Grid1D(nx, cfg.x_lo, cfg.x_hi)
    bc = spatial.BoundaryCondition.parse(cfg.bc)
    model = models.model_by_name(cfg.model, cfg.gamma)
    alpha = ALPHA_PROFILES[cfg.profile](grid.x) if cfg.profile else cfg.alpha
    scaling = models.ScalingParams(cfg.epsilon, alpha)
    u0 = grid.cell_averages(INITIAL_DATA[cfg.initial])
    if cfg.v0 == "zero":
        v0 = np.zeros_like(u0)
    elif cfg.v0 == "literal":
        v0 = grid.cell_averages(lambda x: np.sin(2 * np.pi * x) - np.cos(2 * np.pi * x))
    else:
        v0 = models.well_prepared_v(model, u0, scaling, grid, bc)
    tab = tableaux.resolve_tableau(cfg.scheme)
    formulation = stepper.Formulation.parse(cfg.formulation)
    dt = stepper.select_dt(formulation, scaling, grid.dx, cfg.cfl, model, cfg.dt_mode)
    dt, n_steps = stepper.fit_dt(dt, cfg.t_final)
    options = stepper.SolverOptions(
        diffusion_stencil=cfg.diffusion_stencil, weno_eps=cfg.weno_eps, strict_cfl=cfg.strict_cfl,
    )
    state = stepper.init_state(model, scaling, grid, bc, u0, v0, tab, formulation, dt,
                               options=options, lam=cfg.cfl)
    return state, n_steps


def simulate(cfg: RunConfig, nx: int | None = None) -> stepper.SimState:
    state, n_steps = build(cfg, nx)
    return stepper.run(state, n_steps)


@dataclass
class LevelSolver:
    """Picklable ``nx -> (u, v)`` callable used by convergence studies."""

    cfg: RunConfig

    def __call__(self, nx: int):
        st = simulate(self.cfg, nx)
        return st.u, st.v

    def dx(self, nx: int) -> float:
        return (self.cfg.x_hi - self.cfg.x_lo) / nx
