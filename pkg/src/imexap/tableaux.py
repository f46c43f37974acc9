"""IMEX linear multistep coefficient sets and their order conditions.

A scheme with ``s`` steps advances ``y' = F(y) + G(y)`` (``F`` explicit,
``G`` implicit) as::

    y^{n+1} + sum_j a_j y^{n-j} = dt * sum_j b_j F^{n-j}
                                  + dt * (c_{-1} G^{n+1} + sum_j c_j G^{n-j})

with ``j = 0..s-1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

ORDER_TOL = 1e-12


class UnknownTableauError(KeyError):
    pass


@dataclass(frozen=True)
class ImexLmTableau:
    name: str
    s: int
    p: int
    a: tuple[float, ...]
    b: tuple[float, ...]
    c_minus1: float
    c: tuple[float, ...]
    exact: tuple[tuple[Fraction, ...], ...] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for key in ("a", "b", "c"):
            if len(getattr(self, key)) != self.s:
                raise ValueError(f"{self.name}: '{key}' must have {self.s} entries")
        if self.c_minus1 == 0:
            raise ValueError(f"{self.name}: c_minus1 must be nonzero")

    def is_bdf(self) -> bool:
        return all(cj == 0 for cj in self.c)

    @property
    def a_arr(self) -> np.ndarray:
        return np.asarray(self.a, dtype=float)

    @property
    def b_arr(self) -> np.ndarray:
        return np.asarray(self.b, dtype=float)

    @property
    def c_arr(self) -> np.ndarray:
        return np.asarray(self.c, dtype=float)


def _F(text: str) -> Fraction:
    return Fraction(text)


# (s, p, a, b, c_minus1, c); trailing zeros of the printed 5-vectors dropped.
# TVB44 c_1 is +697/24576: the minus sign found in some printings breaks the
# first-order condition by 2*697/24576.
_TABLE = {
    "SG32": (3, 2, ["-3/4", "0", "-1/4"], ["3/2", "0", "0"], "1", ["0", "0", "1/2"]),
    "BDF2": (2, 2, ["-4/3", "1/3"], ["4/3", "-2/3"], "2/3", ["0", "0"]),
    "TVB33": (
        3, 3,
        ["-3909/2048", "1367/1024", "-873/2048"],
        ["18463/12288", "-1271/768", "8233/12288"],
        "1089/2048",
        ["-1139/12288", "-367/6144", "1699/12288"],
    ),
    "BDF3": (3, 3, ["-18/11", "9/11", "-2/11"], ["18/11", "-18/11", "6/11"], "6/11", ["0"] * 3),
    "TVB44": (
        4, 4,
        ["-21531/8192", "22753/8192", "-12245/8192", "2831/8192"],
        ["13261/8192", "-75029/24576", "54799/24576", "-15245/24576"],
        "4207/8192",
        ["-3567/8192", "697/24576", "4315/24576", "-41/384"],
    ),
    "BDF4": (
        4, 4,
        ["-48/25", "36/25", "-16/25", "3/25"],
        ["48/25", "-72/25", "48/25", "-12/25"],
        "12/25",
        ["0"] * 4,
    ),
    "TVB55": (
        5, 5,
        ["-13553/4096", "38121/8192", "-7315/2048", "6161/4096", "-2269/8192"],
        ["10306951/5898240", "-13656497/2949120", "1249949/245760", "-7937687/2949120", "3387361/5898240"],
        "4007/8192",
        ["-4118249/5898240", "768703/2949120", "47849/245760", "-725087/2949120", "502321/5898240"],
    ),
    "BDF5": (
        5, 5,
        ["-300/137", "300/137", "-200/137", "75/137", "-12/137"],
        ["300/137", "-600/137", "600/137", "-300/137", "60/137"],
        "60/137",
        ["0"] * 5,
    ),
}

BUILTIN_NAMES = tuple(_TABLE)

_ALIASES = {
    "SG(3,2)": "SG32",
    "TVB(3,3)": "TVB33",
    "TVB(4,4)": "TVB44",
    "TVB(5,5)": "TVB55",
}


def _from_fractions(name, s, p, a, b, cm1, c) -> ImexLmTableau:
    return ImexLmTableau(
        name=name, s=s, p=p,
        a=tuple(float(x) for x in a),
        b=tuple(float(x) for x in b),
        c_minus1=float(cm1),
        c=tuple(float(x) for x in c),
        exact=(tuple(a), tuple(b), (cm1,), tuple(c)),
    )


def canonical_name(name: str) -> str:
    key = name.strip().upper().replace("IMEX-", "")
    key = _ALIASES.get(key, key)
    return key


def builtin_tableau(name: str) -> ImexLmTableau:
    """Return one of the eight built-in schemes by (case-insensitive) name."""
    key = canonical_name(name)
    if key not in _TABLE:
        raise UnknownTableauError(
            f"unknown tableau {name!r}; expected one of {', '.join(BUILTIN_NAMES)}"
        )
    s, p, a, b, cm1, c = _TABLE[key]
    return _from_fractions(
        key, s, p, [_F(x) for x in a], [_F(x) for x in b], _F(cm1), [_F(x) for x in c]
    )


def builtin_tableaus() -> list[ImexLmTableau]:
    return [builtin_tableau(n) for n in BUILTIN_NAMES]


def imex_euler() -> ImexLmTableau:
    """One-step forward/backward Euler pair used by the first-order scheme."""
    one = Fraction(1)
    return _from_fractions("EULER", 1, 1, [-one], [one], one, [Fraction(0)])


def verify_order_conditions(t: ImexLmTableau, order: int) -> np.ndarray:
    """Residuals of the IMEX-LM order conditions up to ``order``.

    Entry 0 is the consistency residual ``1 + sum(a)``.  For every
    ``q = 1..order`` two residuals follow::

        A_q - B_q,  A_q - C_q

    with ``A_q = (1 + sum_j (-j)^q a_j) / q!``,
    ``B_q = sum_j (-j)^(q-1) b_j / (q-1)!`` and
    ``C_q = (c_{-1} + sum_j (-j)^(q-1) c_j) / (q-1)!``.

    When the tableau carries exact fractions the sums are formed in rational
    arithmetic and converted at the end, so residuals of a correct scheme are
    exactly zero.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if t.exact is not None:
        a, b, (cm1,), c = t.exact
        one, fact = Fraction(1), math.factorial
    else:
        a, b, cm1, c = t.a, t.b, t.c_minus1, t.c
        one, fact = 1.0, lambda k: float(math.factorial(k))
    js = range(t.s)
    res = [one + sum(a)]
    for q in range(1, order + 1):
        A = (one + sum((-j) ** q * a[j] for j in js)) / fact(q)
        B = sum((-j) ** (q - 1) * b[j] for j in js) / fact(q - 1)
        C = (cm1 + sum((-j) ** (q - 1) * c[j] for j in js)) / fact(q - 1)
        res.extend([A - B, A - C])
    return np.array([float(r) for r in res])


def has_order(t: ImexLmTableau, order: int, tol: float = ORDER_TOL) -> bool:
    return bool(np.all(np.abs(verify_order_conditions(t, order)) <= tol))


def zero_stability_roots(t: ImexLmTableau) -> np.ndarray:
    """Roots of rho(z) = z^s + sum_j a_j z^(s-1-j) (companion eigenvalues)."""
    coeffs = np.concatenate(([1.0], t.a_arr))
    return np.roots(coeffs)


def _parse_vector(text: str) -> list[Fraction]:
    return [Fraction(x.strip()) for x in text.split(",") if x.strip()]


def load_tableau_file(path: str | Path) -> ImexLmTableau:
    """Read a custom scheme from ``key = value`` lines.

    Required keys: ``name, s, p, a, b, c, c_minus1``.  Vectors are
    comma-separated; entries may be decimals or fractions like ``-4/3``.
    ``#`` starts a comment.
    """
    fields = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}: malformed line {raw!r}")
        key, value = line.split("=", 1)
        fields[key.strip().lower()] = value.strip()
    missing = {"name", "s", "p", "a", "b", "c", "c_minus1"} - fields.keys()
    if missing:
        raise ValueError(f"{path}: missing keys {sorted(missing)}")
    s, p = int(fields["s"]), int(fields["p"])
    a, b, c = (_parse_vector(fields[k]) for k in ("a", "b", "c"))
    cm1 = Fraction(fields["c_minus1"])
    return _from_fractions(fields["name"], s, p, a, b, cm1, c)


def resolve_tableau(name_or_path: str) -> ImexLmTableau:
    """Built-in name, or a path to a custom tableau file."""
    if Path(name_or_path).is_file():
        return load_tableau_file(name_or_path)
    return builtin_tableau(name_or_path)
