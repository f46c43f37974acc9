"""Space discretisation on a uniform 1-D grid.

Values are cell averages.  Interface states come from fifth-order WENO
(Jiang-Shu weights), fluxes are of Rusanov type with a scale-dependent
dissipation speed, and second derivatives of ``p(u)`` use a seven-point
sixth-order central stencil written in conservative (face-gradient) form.

All field arrays carry the cell index on the last axis so several time
levels can be processed in one call.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

NG = 3  # ghost cells per side
WENO_EPS = 1e-8

# Candidate-stencil coefficients, rows r = -1, 0, 1, 2.  Row r (r >= 0) maps
# cells (i-r, i-r+1, i-r+2) to the value at x_{i+1/2}; row r-1 applied to the
# same cells gives the value at x_{i-1/2}.
WENO_C = np.array(
    [
        [11 / 6, -7 / 6, 1 / 3],
        [1 / 3, 5 / 6, -1 / 6],
        [-1 / 6, 5 / 6, 1 / 3],
        [1 / 3, -7 / 6, 11 / 6],
    ]
)
WENO_D = np.array([3 / 10, 3 / 5, 1 / 10])
WENO_D_TILDE = WENO_D[::-1].copy()

# sixth-order second derivative: (a, b, c, d) for offsets 3, 2, 1, 0
FD6_A, FD6_B, FD6_C, FD6_D = 1 / 90, -3 / 20, 3 / 2, -49 / 18
# sixth-order first derivative weights for offsets 1, 2, 3 (antisymmetric)
D1_6 = np.array([45.0, -9.0, 1.0]) / 60.0


class BoundaryCondition(enum.Enum):
    PERIODIC = "periodic"
    ZERO_FLUX = "zero-flux"
    REFLECTING = "reflecting"

    @classmethod
    def parse(cls, text: "str | BoundaryCondition") -> "BoundaryCondition":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("_", "-")
        aliases = {"zeroflux": "zero-flux", "neumann": "zero-flux", "reflect": "reflecting"}
        key = aliases.get(key, key)
        for bc in cls:
            if bc.value == key:
                return bc
        raise ValueError(f"unknown boundary condition {text!r}")


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell-centred grid on ``[x_lo, x_hi]``."""

    nx: int
    x_lo: float = 0.0
    x_hi: float = 1.0

    def __post_init__(self):
        if self.nx < 2 * NG + 1:
            raise ValueError(f"nx must be at least {2 * NG + 1}, got {self.nx}")
        if not self.x_hi > self.x_lo:
            raise ValueError("x_hi must exceed x_lo")

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.nx

    @property
    def x(self) -> np.ndarray:
        return self.x_lo + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def faces(self) -> np.ndarray:
        return self.x_lo + np.arange(self.nx + 1) * self.dx

    @property
    def length(self) -> float:
        return self.x_hi - self.x_lo

    def cell_averages(self, func, order: int = 8) -> np.ndarray:
        """Gauss-Legendre cell averages of a vectorised ``func(x)``."""
        nodes, weights = np.polynomial.legendre.leggauss(order)
        xc = self.x[:, None] + 0.5 * self.dx * nodes[None, :]
        return 0.5 * (func(xc) * weights[None, :]).sum(axis=1)


def fill_ghosts(w: np.ndarray, bc: BoundaryCondition, odd: bool = False) -> np.ndarray:
    """Return ``w`` extended by ``NG`` ghost cells on each side (last axis).

    Periodic wraps around; zero-flux copies the boundary cell; reflecting
    mirrors the interior (sign flipped when ``odd`` is set, used for ``v``).
    """
    w = np.asarray(w, dtype=float)
    if bc is BoundaryCondition.PERIODIC:
        left, right = w[..., -NG:], w[..., :NG]
    elif bc is BoundaryCondition.ZERO_FLUX:
        left = np.repeat(w[..., :1], NG, axis=-1)
        right = np.repeat(w[..., -1:], NG, axis=-1)
    elif bc is BoundaryCondition.REFLECTING:
        sign = -1.0 if odd else 1.0
        left = sign * w[..., NG - 1::-1]
        right = sign * w[..., :-NG - 1:-1]
    else:  # pragma: no cover - enum is closed
        raise ValueError(bc)
    return np.concatenate([left, w, right], axis=-1)


def extension_matrix(nx: int, bc: BoundaryCondition, odd: bool = False) -> sp.csr_matrix:
    """Sparse ``(nx + 2 NG, nx)`` matrix with ``E @ w == fill_ghosts(w, bc, odd)``."""
    rows, cols, vals = [], [], []
    for k in range(nx + 2 * NG):
        i = k - NG
        sign = 1.0
        if 0 <= i < nx:
            j = i
        elif bc is BoundaryCondition.PERIODIC:
            j = i % nx
        elif bc is BoundaryCondition.ZERO_FLUX:
            j = 0 if i < 0 else nx - 1
        else:
            j = -1 - i if i < 0 else 2 * nx - 1 - i
            sign = -1.0 if odd else 1.0
        rows.append(k)
        cols.append(j)
        vals.append(sign)
    return sp.csr_matrix((vals, (rows, cols)), shape=(nx + 2 * NG, nx))


# ---------------------------------------------------------------------------
# WENO5
# ---------------------------------------------------------------------------

def _smoothness(wm2, wm1, w0, wp1, wp2):
    b0 = 13 / 12 * (w0 - 2 * wp1 + wp2) ** 2 + 0.25 * (3 * w0 - 4 * wp1 + wp2) ** 2
    b1 = 13 / 12 * (wm1 - 2 * w0 + wp1) ** 2 + 0.25 * (wm1 - wp1) ** 2
    b2 = 13 / 12 * (wm2 - 2 * wm1 + w0) ** 2 + 0.25 * (wm2 - 4 * wm1 + 3 * w0) ** 2
    return b0, b1, b2


def weno5_cell_edges(w_ext: np.ndarray, weno_eps: float = WENO_EPS, return_weights: bool = False):
    """Right-edge and left-edge reconstructions of every cell that has a full stencil.

    Returns ``(right, left)`` for the cells with ghost-padded indices
    ``2 .. n-3``; ``right[k]`` approximates ``w(x_{i+1/2})`` and
    ``left[k]`` approximates ``w(x_{i-1/2})``.
    """
    n = w_ext.shape[-1]
    wm2, wm1, w0, wp1, wp2 = (w_ext[..., k:n - 4 + k] for k in range(5))
    b0, b1, b2 = _smoothness(wm2, wm1, w0, wp1, wp2)
    # candidate values; sub-stencil r uses cells (i-r, i-r+1, i-r+2)
    c = WENO_C
    r0 = c[1, 0] * w0 + c[1, 1] * wp1 + c[1, 2] * wp2
    r1 = c[2, 0] * wm1 + c[2, 1] * w0 + c[2, 2] * wp1
    r2 = c[3, 0] * wm2 + c[3, 1] * wm1 + c[3, 2] * w0
    l0 = c[0, 0] * w0 + c[0, 1] * wp1 + c[0, 2] * wp2
    l1 = c[1, 0] * wm1 + c[1, 1] * w0 + c[1, 2] * wp1
    l2 = c[2, 0] * wm2 + c[2, 1] * wm1 + c[2, 2] * w0
    # unnormalised weights share the factors 1 / (eps + beta)^2
    q0 = 1.0 / (weno_eps + b0) ** 2
    q1 = 1.0 / (weno_eps + b1) ** 2
    q2 = 1.0 / (weno_eps + b2) ** 2
    d, dt = WENO_D, WENO_D_TILDE
    a0, a1, a2 = d[0] * q0, d[1] * q1, d[2] * q2
    t0, t1, t2 = dt[0] * q0, dt[1] * q1, dt[2] * q2
    sa = a0 + a1 + a2
    st = t0 + t1 + t2
    right = (a0 * r0 + a1 * r1 + a2 * r2) / sa
    left = (t0 * l0 + t1 * l1 + t2 * l2) / st
    if return_weights:
        return right, left, np.stack([a0, a1, a2]) / sa, np.stack([t0, t1, t2]) / st
    return right, left


def weno5_reconstruct(w_ext: np.ndarray, weno_eps: float = WENO_EPS):
    """Interface states ``(w_minus, w_plus)`` at the ``nx + 1`` faces.

    ``w_ext`` is a ghost-padded field (``nx + 2 NG`` entries on the last
    axis).  Face ``f`` sits between interior cells ``f - 1`` and ``f``;
    ``w_minus`` is reconstructed from the left cell and ``w_plus`` from the
    right cell.
    """
    right, left = weno5_cell_edges(w_ext, weno_eps)
    # edge arrays cover padded cells 2 .. nx+3; face f uses padded cells f+2, f+3
    return right[..., :-1], left[..., 1:]


def central_face_values(w_ext: np.ndarray, weno_eps: float = WENO_EPS) -> np.ndarray:
    wm, wp = weno5_reconstruct(w_ext, weno_eps)
    return 0.5 * (wm + wp)


# ---------------------------------------------------------------------------
# Fluxes and finite differences
# ---------------------------------------------------------------------------

PAIRING = np.array([[0.0, 1.0], [1.0, 0.0]])


def rusanov_flux(F_minus, F_plus, Q_minus, Q_plus, theta_cap, S: np.ndarray | None = None):
    """Rusanov flux ``H = (F+ + F- - Theta S (Q+ - Q-)) / 2``.

    ``F`` and ``Q`` carry the component index on axis 0.  With the default
    pairing ``S = [[0, 1], [1, 0]]`` the first flux is dissipated by the jump
    of the second state component and vice versa.
    """
    F_minus = np.asarray(F_minus, dtype=float)
    F_plus = np.asarray(F_plus, dtype=float)
    jump = np.asarray(Q_plus, dtype=float) - np.asarray(Q_minus, dtype=float)
    if S is None:
        S = PAIRING
    mixed = np.tensordot(S, jump, axes=(1, 0))
    return 0.5 * (F_plus + F_minus - theta_cap * mixed)


def div_faces(H: np.ndarray, dx: float) -> np.ndarray:
    """Conservative divergence ``(H_{i+1/2} - H_{i-1/2}) / dx`` from face values."""
    return (H[..., 1:] - H[..., :-1]) / dx


def fd6_face_gradient(p_ext: np.ndarray, dx: float) -> np.ndarray:
    """Face gradients ``G`` whose divergence is the sixth-order ``d2/dx2`` stencil."""
    n = p_ext.shape[-1]
    s = [p_ext[..., k:n - 5 + k] for k in range(6)]  # offsets -2 .. +3 around face
    a, ab, abc = FD6_A, FD6_A + FD6_B, FD6_A + FD6_B + FD6_C
    return (-a * s[0] - ab * s[1] - abc * s[2] + abc * s[3] + ab * s[4] + a * s[5]) / dx


def laplacian_p_6th(p_ext: np.ndarray, dx: float) -> np.ndarray:
    """Seven-point sixth-order ``d2p/dx2`` on interior cells of a padded field."""
    n = p_ext.shape[-1]
    c = p_ext[..., NG:n - NG]
    out = FD6_D * c
    for k, coef in zip((1, 2, 3), (FD6_C, FD6_B, FD6_A)):
        out = out + coef * (p_ext[..., NG + k:n - NG + k] + p_ext[..., NG - k:n - NG - k])
    return out / dx**2


def d1_6th(p_ext: np.ndarray, dx: float) -> np.ndarray:
    """Seven-point sixth-order central first derivative on interior cells."""
    n = p_ext.shape[-1]
    out = 0.0
    for k, coef in zip((1, 2, 3), D1_6):
        out = out + coef * (p_ext[..., NG + k:n - NG + k] - p_ext[..., NG - k:n - NG - k])
    return out / dx


def weno_face_gradient(p_ext: np.ndarray, dx: float, bc: BoundaryCondition, weno_eps: float = WENO_EPS):
    """Face gradient from two central (zero-dissipation) WENO passes.

    The first pass differences central face values of ``p`` into cell
    gradients; the second reconstructs those gradients back to the faces.
    """
    q = div_faces(central_face_values(p_ext, weno_eps), dx)
    return central_face_values(fill_ghosts(q, bc, odd=bc is BoundaryCondition.REFLECTING), weno_eps)


def fd6_matrices(nx: int, dx: float):
    """Sparse face-gradient ``G`` (faces x padded cells) and divergence ``Div``."""
    n_ext = nx + 2 * NG
    a, ab, abc = FD6_A, FD6_A + FD6_B, FD6_A + FD6_B + FD6_C
    coeffs = np.array([-a, -ab, -abc, abc, ab, a]) / dx
    rows = np.repeat(np.arange(nx + 1), 6)
    cols = (np.arange(nx + 1)[:, None] + np.arange(6)[None, :]).ravel()
    G = sp.csr_matrix((np.tile(coeffs, nx + 1), (rows, cols)), shape=(nx + 1, n_ext))
    Div = sp.diags([-np.ones(nx), np.ones(nx)], [0, 1], shape=(nx, nx + 1)) / dx
    return G, sp.csr_matrix(Div)


def face_average(cell: np.ndarray, bc: BoundaryCondition) -> np.ndarray:
    """Arithmetic mean of the two cells adjacent to every face (``nx + 1`` values)."""
    ext = fill_ghosts(cell, bc)
    return 0.5 * (ext[..., NG - 1:-NG] + ext[..., NG:ext.shape[-1] - NG + 1])


def face_max(cell: np.ndarray, bc: BoundaryCondition) -> np.ndarray:
    ext = fill_ghosts(cell, bc)
    return np.maximum(ext[..., NG - 1:-NG], ext[..., NG:ext.shape[-1] - NG + 1])


# ---------------------------------------------------------------------------
# Modified characteristic speeds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigBound:
    theta_alpha: float
    lambda_plus: float
    lambda_minus: float
    theta_cap: float


def modified_speeds(gamma, conv_weight, wave_speed):
    """Eigenvalues of the bounded-speed modified system.

    ``conv_weight`` multiplies the convective speed ``gamma`` (it equals
    ``1 - theta`` for the prototype) and ``wave_speed`` is the remaining
    acoustic part (``theta / eps**alpha`` for the prototype).
    """
    g = np.asarray(gamma, dtype=float) * conv_weight
    root = np.sqrt(g**2 + 4.0 * np.asarray(wave_speed, dtype=float) ** 2)
    return 0.5 * (g + root), 0.5 * (g - root)


def eigenvalue_bound(gamma: float, epsilon: float, alpha: float, dt: float, c_minus1: float) -> EigBound:
    """Bounded characteristic speeds of the reformulated prototype system.

    Parameters
    ----------
    gamma : float
        Convective speed ``f'(u)``.
    epsilon, alpha : float
        Scaling parameters.
    dt, c_minus1 : float
        Time step and implicit coefficient on the new level.

    Notes
    -----
    Everything is formed from positive powers of ``epsilon`` so extreme
    arguments (``epsilon`` or ``dt`` near the smallest float) stay finite.
    """
    if dt <= 0 or c_minus1 <= 0:
        raise ValueError("dt and c_minus1 must be positive")
    e_s = epsilon ** (1.0 + alpha)
    denom = e_s + dt * c_minus1
    theta = e_s / denom
    wave = epsilon / denom  # theta / eps**alpha
    one_minus = dt * c_minus1 / denom
    lp, lm = modified_speeds(gamma, one_minus, wave)
    return EigBound(float(theta), float(lp), float(lm), float(max(abs(lp), abs(lm))))
