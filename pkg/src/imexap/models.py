"""Relaxation models in one common form.

Every model is written as::

    u_t + v_x = 0
    v_t + eps**(-e_p) p(u)_x = -eps**(-e_s) (k(u) v - f(u, v))

with model-dependent exponents ``e_p`` and ``e_s``.  The relaxation rate
``k`` is handled through its reciprocal, the mobility ``m = 1/k``, because
the porous-media variant has ``k = 1/(2u)`` which is unbounded where the
density vanishes.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import spatial


class SubcharacteristicWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class ScalingParams:
    """Relaxation parameter ``epsilon`` and scaling exponent ``alpha``.

    ``alpha`` may be a scalar or an array with one value per cell.
    """

    epsilon: float
    alpha: float | np.ndarray = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        a = np.asarray(self.alpha, dtype=float)
        if np.any(a < 0) or np.any(a > 1) or not np.all(np.isfinite(a)):
            raise ValueError("alpha must lie in [0, 1]")

    @property
    def is_uniform(self) -> bool:
        return np.ndim(self.alpha) == 0

    def power(self, exponent):
        """``epsilon ** exponent`` (exponent may be a per-cell array)."""
        return self.epsilon ** np.asarray(exponent, dtype=float)

    def eps_alpha(self):
        return self.power(self.alpha)

    def min_eps_alpha_rule(self) -> float:
        """Smallest ``epsilon`` entering the CFL rules (constant here)."""
        return float(self.epsilon)


@dataclass(frozen=True)
class ModelSpec:
    """One relaxation system in the common form.

    Parameters
    ----------
    kind : str
        ``"linear"``, ``"heat"``, ``"porous"`` or ``"ruijgrook-wu"``.
    p, dp : callable
        Pressure-like flux ``p(u)`` and its derivative.
    f_eq : callable
        ``f_eq(u, v, eps2a)`` with ``eps2a = eps**(2 alpha)``.
    df_speed : callable
        Bound on ``|df/du|`` used for the dissipation speed, called as
        ``df_speed(u, v, eps2a)``.
    mobility : callable
        ``m(u) = 1/k(u)`` (clipped to be non-negative).
    p_exponent, s_exponent : callable
        ``alpha -> e_p`` and ``alpha -> e_s``.
    """

    kind: str
    p: Callable
    dp: Callable
    f_eq: Callable
    df_speed: Callable
    mobility: Callable
    p_exponent: Callable
    s_exponent: Callable
    p_linear: bool = True
    params: dict = field(default_factory=dict, compare=False)

    def exponents(self, alpha):
        return self.p_exponent(alpha), self.s_exponent(alpha)

    def diffusion_ratio(self, scaling: ScalingParams):
        """``eps**(e_s - e_p)``, the strength of the limiting diffusion."""
        e_p, e_s = self.exponents(scaling.alpha)
        return scaling.power(np.asarray(e_s) - np.asarray(e_p))

    def check_hyperbolic(self, u) -> None:
        if np.any(self.dp(np.asarray(u, dtype=float)) <= 0):
            raise ValueError(f"{self.kind}: p'(u) must be positive on every state")

    def subcharacteristic_ok(self, u, v, scaling: ScalingParams) -> bool:
        """``f'(u)**2 <= p'(u) eps**(-e_p)`` at every state (equality allowed)."""
        e_p, _ = self.exponents(scaling.alpha)
        eps2a = scaling.power(2 * np.asarray(scaling.alpha))
        lhs = self.df_speed(u, v, eps2a) ** 2
        rhs = self.dp(u) * scaling.power(-np.asarray(e_p))
        return bool(np.all(lhs <= rhs * (1 + 1e-12)))


def _const(value):
    return lambda alpha: value * np.ones_like(np.asarray(alpha, dtype=float))


def linear_relaxation(gamma: float = 1.0) -> ModelSpec:
    """Prototype linear model, ``p = u`` and ``f = gamma u``."""
    return ModelSpec(
        kind="linear",
        p=lambda u: np.asarray(u, dtype=float),
        dp=lambda u: np.ones_like(np.asarray(u, dtype=float)),
        f_eq=lambda u, v, eps2a: gamma * np.asarray(u, dtype=float),
        df_speed=lambda u, v, eps2a: abs(gamma) * np.ones_like(np.asarray(u, dtype=float)),
        mobility=lambda u: np.ones_like(np.asarray(u, dtype=float)),
        p_exponent=lambda alpha: 2.0 * np.asarray(alpha, dtype=float),
        s_exponent=lambda alpha: 1.0 + np.asarray(alpha, dtype=float),
        params={"gamma": gamma},
    )


def heat_or_porous(variant: str = "porous") -> ModelSpec:
    """Relaxing heat flow (``k = 1``) or porous-media relaxation (``k = 1/(2u)``).

    The flux gradient is scaled by ``eps**-2`` and the source by
    ``eps**-(2 + alpha)``; there is no equilibrium flux (``f = 0``).
    """
    variant = variant.lower()
    if variant == "heat":
        mob = lambda u: np.ones_like(np.asarray(u, dtype=float))
    elif variant == "porous":
        mob = lambda u: np.maximum(2.0 * np.asarray(u, dtype=float), 0.0)
    else:
        raise ValueError(f"unknown heat/porous variant {variant!r}")
    zero = lambda u, v, eps2a: np.zeros_like(np.asarray(u, dtype=float))
    return ModelSpec(
        kind=variant,
        p=lambda u: np.asarray(u, dtype=float),
        dp=lambda u: np.ones_like(np.asarray(u, dtype=float)),
        f_eq=zero,
        df_speed=zero,
        mobility=mob,
        p_exponent=_const(2.0),
        s_exponent=lambda alpha: 2.0 + np.asarray(alpha, dtype=float),
        params={"variant": variant},
    )


def ruijgrook_wu() -> ModelSpec:
    """Macroscopic Ruijgrook-Wu model with ``a = b = 1/2`` and ``c = M = eps**alpha``.

    ``f(u, v) = (u**2 - eps**(2 alpha) v**2) / 2``; the dissipation speed
    uses ``|u| + eps**(2 alpha) |v|``.
    """
    return ModelSpec(
        kind="ruijgrook-wu",
        p=lambda u: np.asarray(u, dtype=float),
        dp=lambda u: np.ones_like(np.asarray(u, dtype=float)),
        f_eq=lambda u, v, eps2a: 0.5 * (np.asarray(u) ** 2 - eps2a * np.asarray(v) ** 2),
        df_speed=lambda u, v, eps2a: np.abs(u) + eps2a * np.abs(v),
        mobility=lambda u: np.ones_like(np.asarray(u, dtype=float)),
        p_exponent=lambda alpha: 2.0 * np.asarray(alpha, dtype=float),
        s_exponent=lambda alpha: 1.0 + np.asarray(alpha, dtype=float),
    )


def power_pressure(power: float = 2.0, gamma: float = 0.0) -> ModelSpec:
    """Linear relaxation with a nonlinear pressure ``p(u) = u**power``.

    Used to exercise the Newton path of the implicit solver; valid for
    positive states only.
    """
    base = linear_relaxation(gamma)
    return ModelSpec(
        kind="power-pressure",
        p=lambda u: np.asarray(u, dtype=float) ** power,
        dp=lambda u: power * np.asarray(u, dtype=float) ** (power - 1),
        f_eq=base.f_eq,
        df_speed=base.df_speed,
        mobility=base.mobility,
        p_exponent=base.p_exponent,
        s_exponent=base.s_exponent,
        p_linear=False,
        params={"power": power, "gamma": gamma},
    )


MODEL_NAMES = ("linear", "heat", "porous", "ruijgrook-wu")


def model_by_name(name: str, gamma: float = 1.0) -> ModelSpec:
    key = name.strip().lower().replace("_", "-")
    if key in ("linear", "linear-relaxation", "prototype"):
        return linear_relaxation(gamma)
    if key in ("heat", "porous"):
        return heat_or_porous(key)
    if key in ("ruijgrook-wu", "rw"):
        return ruijgrook_wu()
    raise ValueError(f"unknown model {name!r}; expected one of {', '.join(MODEL_NAMES)}")


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def well_prepared_v(model: ModelSpec, u0, scaling: ScalingParams, grid: spatial.Grid1D,
                    bc: spatial.BoundaryCondition) -> np.ndarray:
    """First-order Chapman-Enskog closure for ``v``.

    Solves ``k(u) v = f(u, v) - eps**(e_s - e_p) p(u)_x`` pointwise, with
    ``p_x`` from the sixth-order central stencil.  For the prototype this is
    ``v = gamma u - eps**(1 - alpha) u_x``.
    """
    u0 = np.asarray(u0, dtype=float)
    bc = spatial.BoundaryCondition.parse(bc)
    dpx = spatial.d1_6th(spatial.fill_ghosts(model.p(u0), bc), grid.dx)
    ratio = model.diffusion_ratio(scaling)
    m = model.mobility(u0)
    eps2a = scaling.power(2 * np.asarray(scaling.alpha))
    if model.kind == "ruijgrook-wu":
        # v = (u^2 - eps2a v^2)/2 - D  ->  eps2a v^2 / 2 + v - c = 0
        c = 0.5 * u0**2 - ratio * dpx
        disc = np.sqrt(np.maximum(1.0 + 2.0 * eps2a * c, 0.0))
        return 2.0 * c / (1.0 + disc)
    return m * (model.f_eq(u0, np.zeros_like(u0), eps2a) - ratio * dpx)


@dataclass
class SourceSplit:
    """Relaxation source split into its stiff and explicit parts.

    ``linear_coeff`` multiplies ``v^{n+1}`` (it is ``g dt eps**-e_s k*``),
    ``remainder`` is the weighted sum of equilibrium fluxes over the
    history and ``mobility`` the frozen ``1/k*`` at the new level.
    """

    linear_coeff: np.ndarray
    remainder: np.ndarray
    mobility: np.ndarray


def extrapolated_mobility(model: ModelSpec, levels_u, weights) -> np.ndarray:
    """Mobility at the new level, extrapolated from the history and clipped at 0."""
    m = np.stack([model.mobility(u) for u in levels_u])
    w = np.asarray(weights, dtype=float)[:, None]
    return np.maximum((w * m).sum(axis=0), 0.0)


def source_split(model: ModelSpec, U, V, b, c_minus1: float, c, dt: float,
                 scaling: ScalingParams) -> SourceSplit:
    """Stiff/explicit decomposition of the relaxation source for one multistep step.

    Parameters
    ----------
    U, V : sequence of arrays
        History levels, newest first.
    b, c, c_minus1 :
        Explicit weights, implicit history weights and implicit weight on
        the new level.
    """
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    eps2a = scaling.power(2 * np.asarray(scaling.alpha))
    remainder = sum(bj * model.f_eq(u, v, eps2a) for bj, u, v in zip(b, U, V))
    m_star = extrapolated_mobility(model, U, (b - c) / c_minus1)
    _, e_s = model.exponents(scaling.alpha)
    rate = dt * c_minus1 * scaling.power(-np.asarray(e_s))
    with np.errstate(divide="ignore"):
        coeff = np.where(m_star > 0, rate / np.where(m_star > 0, m_star, 1.0), np.inf)
    return SourceSplit(np.asarray(coeff, dtype=float), np.asarray(remainder, dtype=float), m_star)


def warn_subcharacteristic(model: ModelSpec, u, v, scaling: ScalingParams) -> bool:
    ok = model.subcharacteristic_ok(u, v, scaling)
    if not ok:
        warnings.warn(
            f"{model.kind}: sub-characteristic condition f'(u)^2 <= p'(u)/eps^(2 alpha) violated",
            SubcharacteristicWarning,
            stacklevel=2,
        )
    return ok
