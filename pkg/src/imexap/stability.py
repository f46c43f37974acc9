"""Linear stability of IMEX-BDF schemes on the Fourier-transformed linear model.

With ``y = u_hat`` and ``z = eps**alpha v_hat`` the two-field multistep
recursion collapses (for BDF tableaus) to a single recursion in ``y`` whose
characteristic polynomial is, after multiplying by ``zeta**s``,

    zeta**s rho(zeta) + rho(zeta) A(zeta) / (1 + z_R g) - K zeta**s sigma_2(zeta) [- J zeta**(2s)]

with ``rho(zeta) = zeta**s + sum_j a_j zeta**(s-1-j)``, ``A = rho - zeta**s``,
``sigma_2 = sum_j b_j zeta**(s-1-j)`` and ``g = c_{-1}``.  ``z_I`` is purely
imaginary; the scan axis is its magnitude.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import tableaux
from .stepper import Formulation

MODULUS_TOL = 1e-9     # |zeta| <= 1 + MODULUS_TOL counts as inside
CIRCLE_TOL = 1e-7      # roots this close to the unit circle are checked for multiplicity
CLUSTER_TOL = 1e-5     # two such roots closer than this are treated as one multiple root


@dataclass(frozen=True)
class StabilityQuery:
    tableau: tableaux.ImexLmTableau
    formulation: Formulation
    z_r: float
    z_i: float
    eps_alpha: float

    def __post_init__(self):
        if self.z_r < 0 or self.eps_alpha < 0:
            raise ValueError("z_r and eps_alpha must be non-negative")
        if not self.tableau.is_bdf():
            raise ValueError(f"{self.tableau.name} is not an IMEX-BDF tableau")


def _check(tableau: tableaux.ImexLmTableau, formulation) -> Formulation:
    formulation = Formulation.parse(formulation)
    if formulation is Formulation.FIRST_ORDER:
        raise ValueError("stability analysis covers ap-explicit and ap-implicit only")
    if not tableau.is_bdf():
        raise ValueError(f"{tableau.name} is not an IMEX-BDF tableau")
    return formulation


def _char_coeffs(tableau, formulation, z_r, z_i, eps_alpha):
    """Coefficients (highest degree first, degree ``2s``) for broadcast arrays of parameters."""
    s = tableau.s
    g = tableau.c_minus1
    z_r = np.asarray(z_r, dtype=float)[..., None]
    zi = 1j * np.asarray(z_i, dtype=float)[..., None]
    ea = np.asarray(eps_alpha, dtype=float)[..., None]
    rho = np.concatenate([[1.0], tableau.a_arr])              # degree s
    A = np.concatenate([[0.0], tableau.a_arr])                # rho - zeta**s
    sigma2 = np.concatenate([[0.0], tableau.b_arr])           # degree s-1, padded to s
    shift = np.zeros(s + 1)
    shift[0] = 1.0                                            # zeta**s
    zs_rho = np.concatenate([rho, np.zeros(s)])               # zeta**s rho
    rho_A = np.convolve(rho, A)                               # degree 2s
    zs_sig = np.concatenate([sigma2, np.zeros(s)])            # zeta**s sigma_2
    denom = 1.0 + z_r * g
    if formulation is Formulation.AP_EXPLICIT:
        K = zi * (zi - z_r * ea) * g / denom
        coeffs = zs_rho + rho_A / denom - K * zs_sig
    else:
        K = -zi * z_r * ea * g / denom
        J = zi**2 * g**2 / denom
        top = np.zeros(2 * s + 1)
        top[0] = 1.0                                          # zeta**(2s)
        coeffs = zs_rho + rho_A / denom - K * zs_sig - J * top
    return np.asarray(coeffs, dtype=complex)


def char_poly(query: StabilityQuery) -> np.ndarray:
    """Monic characteristic polynomial (highest degree first) for one parameter point."""
    formulation = _check(query.tableau, query.formulation)
    c = _char_coeffs(query.tableau, formulation, query.z_r, query.z_i, query.eps_alpha)
    if c[0] == 0:
        raise ValueError("degenerate characteristic polynomial")
    return c / c[0]


def _roots_batch(coeffs: np.ndarray) -> np.ndarray:
    """Roots of many polynomials of equal degree via companion-matrix eigenvalues."""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    lead = coeffs[:, :1]
    if np.any(lead == 0):
        raise ValueError("leading coefficient must be non-zero")
    mon = coeffs / lead
    d = mon.shape[1] - 1
    if d == 0:
        return np.zeros((mon.shape[0], 0), dtype=complex)
    comp = np.zeros((mon.shape[0], d, d), dtype=complex)
    comp[:, 0, :] = -mon[:, 1:]
    comp[:, np.arange(1, d), np.arange(d - 1)] = 1.0
    return np.linalg.eigvals(comp)


def _max_modulus_and_flag(roots: np.ndarray):
    mod = np.abs(roots)
    mx = mod.max(axis=1) if mod.shape[1] else np.zeros(mod.shape[0])
    near = np.abs(mod - 1.0) < CIRCLE_TOL
    dist = np.abs(roots[:, :, None] - roots[:, None, :])
    d = roots.shape[1]
    pair = (dist < CLUSTER_TOL) & near[:, :, None] & near[:, None, :] & ~np.eye(d, dtype=bool)
    multiple = pair.any(axis=(1, 2))
    stable = (mx <= 1.0 + MODULUS_TOL) & ~multiple
    return mx, stable


def max_root_modulus(coeffs) -> float:
    """Largest root modulus of a polynomial given highest degree first."""
    coeffs = np.trim_zeros(np.asarray(coeffs, dtype=complex), "f")
    if coeffs.size == 0:
        raise ValueError("degenerate polynomial")
    mx, _ = _max_modulus_and_flag(_roots_batch(coeffs[None, :]))
    return float(mx[0])


def is_stable(coeffs) -> bool:
    """Root condition: all ``|zeta| <= 1`` and no multiple root on the unit circle."""
    coeffs = np.trim_zeros(np.asarray(coeffs, dtype=complex), "f")
    if coeffs.size == 0:
        raise ValueError("degenerate polynomial")
    _, ok = _max_modulus_and_flag(_roots_batch(coeffs[None, :]))
    return bool(ok[0])


@dataclass
class StabilityScan:
    """Max root moduli on a ``(eps_alpha, z_r, z_i)`` grid."""

    scheme: str
    formulation: str
    z_r: np.ndarray
    z_i: np.ndarray
    eps_alpha: list
    modulus: np.ndarray = field(repr=False)   # shape (n_eps, n_zr, n_zi)
    stable: np.ndarray = field(repr=False)

    def stable_area(self, k: int | None = None):
        """Number of stable grid points, per ``eps_alpha`` value or for index ``k``."""
        counts = self.stable.sum(axis=(1, 2))
        return int(counts[k]) if k is not None else [int(c) for c in counts]

    def rows(self):
        for k, ea in enumerate(self.eps_alpha):
            for i, zr in enumerate(self.z_r):
                for j, zi in enumerate(self.z_i):
                    yield self.scheme, self.formulation, ea, zr, zi, self.modulus[k, i, j]

    def to_csv(self, path_or_file) -> None:
        own = isinstance(path_or_file, str)
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["scheme", "formulation", "eps_alpha", "z_r", "z_i", "max_modulus"])
            for sch, form, ea, zr, zi, m in self.rows():
                w.writerow([sch, form] + ["%.17g" % x for x in (ea, zr, zi, m)])
        finally:
            if own:
                fh.close()


def scan_region(tableau, formulation, z_r_range=(1e-2, 1e3), z_i_range=(0.0, 3.0),
                eps_alpha=(0.1, 0.25, 0.5), resolution=(40, 40)) -> StabilityScan:
    """Evaluate the root condition on a log ``z_r`` x linear ``z_i`` grid.

    Parameters
    ----------
    tableau : ImexLmTableau or str
        A BDF tableau (or its name).
    z_r_range : (float, float)
        Positive bounds of the log-spaced ``z_r`` axis.
    z_i_range : (float, float)
        Bounds of the linear axis for the magnitude of ``z_I``.
    resolution : (int, int)
        Number of points along ``z_r`` and ``z_i``.
    """
    if isinstance(tableau, str):
        tableau = tableaux.builtin_tableau(tableau)
    formulation = _check(tableau, formulation)
    eps_alpha = [float(e) for e in np.atleast_1d(eps_alpha)]
    if not eps_alpha:
        raise ValueError("eps_alpha list is empty")
    if any(e < 0 for e in eps_alpha):
        raise ValueError("eps_alpha must be non-negative")
    lo, hi = z_r_range
    if not (0 < lo <= hi):
        raise ValueError("z_r range must be positive and ordered")
    nr, ni = resolution
    if nr < 1 or ni < 1 or z_i_range[1] < z_i_range[0]:
        raise ValueError("empty scan range")
    z_r = np.logspace(np.log10(lo), np.log10(hi), nr)
    z_i = np.linspace(z_i_range[0], z_i_range[1], ni)
    EA, ZR, ZI = np.meshgrid(eps_alpha, z_r, z_i, indexing="ij")
    coeffs = _char_coeffs(tableau, formulation, ZR.ravel(), ZI.ravel(), EA.ravel())
    mx, ok = _max_modulus_and_flag(_roots_batch(coeffs))
    shape = EA.shape
    return StabilityScan(tableau.name, formulation.value, z_r, z_i, eps_alpha,
                         mx.reshape(shape), ok.reshape(shape))
