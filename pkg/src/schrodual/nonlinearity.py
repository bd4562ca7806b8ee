"""The dual nonlinearity g, its primitive, derivative and regime structure.

For exponent q > 0 the semilinear side of the duality reads
-Lap v = lambda g(v) with

    g(s) = f'(s) |f(s)|^(q-1) f(s),      G(s) = |f(s)|^(q+1) / (q+1),

where f is the dual transform.  g is odd and its slope structure drives
everything downstream:

    s -> 0:    g(s)/s -> inf (q < 1), 1/theta(0) (q = 1), 0 (q > 1);
    |s| -> inf: g(s)/s -> 0 (q < 3), 4/alpha^2 (q = 3), inf (q > 3);
    g(s)/s decreasing in |s| for q <= 1, increasing for q >= 3.

The scalar nonexistence test for supercritical q evaluates

    z(s) = (N-2)/2 g(s) s - N G(s)

and the ratio g/(g' s), whose bound 2/(q-1) <= (N-2)/(N+2) forces z >= 0
and hence nonexistence on starshaped domains.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .dual_transform import DualTransform
from .errors import RefusalError

__all__ = [
    "Regime",
    "Nonlinearity",
    "critical_exponent",
    "classify_regime",
    "classify_slopes",
    "SlopeReport",
    "pohozaev_scan",
    "PohozaevReport",
    "sign_guard",
]


class Regime(str, enum.Enum):
    SUBLINEAR = "sublinear"  # q in (0,1)
    LINEAR_AT_ZERO = "linear-at-0"  # q = 1
    BETWEEN = "between"  # q in (1,3)
    CRITICAL_SLOPE = "critical-slope"  # q = 3
    SUPERLINEAR = "superlinear"  # q in (3, 2*2s-1)
    SUPERCRITICAL = "supercritical"  # q >= 2*2s-1 for the given N


def critical_exponent(N: int) -> float:
    """2*(2N/(N-2)) - 1, the boundary where the scalar nonexistence test bites."""
    if N < 3:
        raise ValueError("dimension must be at least 3")
    return 2.0 * (2.0 * N / (N - 2.0)) - 1.0


def classify_regime(q: float, N: int | None = None) -> Regime:
    if q <= 0:
        raise ValueError("exponent q must be positive")
    if q < 1:
        return Regime.SUBLINEAR
    if q == 1:
        return Regime.LINEAR_AT_ZERO
    if q < 3:
        return Regime.BETWEEN
    if q == 3:
        return Regime.CRITICAL_SLOPE
    if N is not None and q >= critical_exponent(N):
        return Regime.SUPERCRITICAL
    return Regime.SUPERLINEAR


def sign_guard(lam: float) -> None:
    """Refuse nonpositive lambda: testing the equation against the solution
    forces ||v||^2 <= 0, so only the trivial solution exists."""
    if not lam > 0.0:
        raise RefusalError(
            f"lambda={lam:g} admits no nontrivial solution (nonpositive "
            "multiplier forces v = 0); refusing to solve"
        )


@dataclass(frozen=True)
class Nonlinearity:
    """The pair (g, G) for a given exponent and transform."""

    q: float
    transform: DualTransform
    N: int | None = None
    regime: Regime = field(init=False)

    def __post_init__(self):
        if self.q <= 0:
            raise ValueError("exponent q must be positive")
        object.__setattr__(self, "regime", classify_regime(self.q, self.N))

    def g(self, s):
        fs = np.asarray(self.transform.f(s))
        fp = 1.0 / np.sqrt(self.transform.theta.value(fs))
        out = fp * np.sign(fs) * np.abs(fs) ** self.q
        return float(out) if np.ndim(s) == 0 else out

    def G(self, s):
        fs = np.asarray(self.transform.f(s))
        out = np.abs(fs) ** (self.q + 1.0) / (self.q + 1.0)
        return float(out) if np.ndim(s) == 0 else out

    def g_prime(self, s):
        """Even analytic derivative |f|^(q-1) (2q theta(f) - theta'(f) f) / (2 theta(f)^2).

        Singular at 0 for q < 1; matches central differences of g to O(h^2)."""
        fs = np.asarray(self.transform.f(s))
        a = np.abs(fs)
        if self.q < 1.0 and np.any(a == 0.0):
            raise ZeroDivisionError("g' blows up at 0 for q < 1; use the monotone path")
        th = self.transform.theta.value(a)
        dth_f = self.transform.theta.deriv(a) * a  # theta'(f) * f, even
        with np.errstate(divide="ignore", invalid="ignore"):
            out = a ** (self.q - 1.0) * (2.0 * self.q * th - dth_f) / (2.0 * th * th)
        if self.q > 1.0:
            out = np.where(a == 0.0, 0.0, out)
        elif self.q == 1.0:
            out = np.where(a == 0.0, 1.0 / self.transform.theta.value(np.zeros(())), out)
        return float(out) if np.ndim(s) == 0 else out


@dataclass(frozen=True)
class ItemCheck:
    measured: float
    ok: bool
    note: str = ""


@dataclass(frozen=True)
class SlopeReport:
    q: float
    regime: Regime
    q_critical: float
    items: dict[str, ItemCheck]

    @property
    def all_ok(self) -> bool:
        return all(c.ok for c in self.items.values())


def classify_slopes(n: Nonlinearity, N: int, samples: int = 400) -> SlopeReport:
    """Numerically verify the slope limits of g(s)/s at 0 and infinity and
    the claimed monotonicity, on log-spaced samples inside the table."""
    if n.q >= 3.0 and n.transform.alpha is None:
        raise ValueError("tail checks for q >= 3 need a transform with alpha")
    s_lo = 1e-7
    s_hi = min(1e6, n.transform.table_s_max)
    s = np.geomspace(s_lo, s_hi, samples)
    ratio = n.g(s) / s

    items: dict[str, ItemCheck] = {}
    r0 = float(ratio[0])
    if n.q < 1.0:
        items["slope_at_zero"] = ItemCheck(r0, r0 >= 1e3, "diverges")
    elif n.q == 1.0:
        target = 1.0 / n.transform.theta(0.0)
        items["slope_at_zero"] = ItemCheck(r0, abs(r0 - target) <= 1e-3 * target, f"-> {target:g}")
    else:
        items["slope_at_zero"] = ItemCheck(r0, r0 <= 1e-3, "-> 0")

    r_inf = float(ratio[-1])
    if n.q < 3.0:
        items["slope_at_infinity"] = ItemCheck(r_inf, r_inf <= 1e-2, "-> 0")
    elif n.q == 3.0:
        target = 4.0 / n.transform.alpha**2
        items["slope_at_infinity"] = ItemCheck(
            r_inf, abs(r_inf - target) <= 1e-2 * target, f"-> {target:g}"
        )
    else:
        items["slope_at_infinity"] = ItemCheck(r_inf, r_inf >= 1e2, "diverges")

    # relative slack absorbs interpolation noise in strict comparisons
    slack = 1e-10
    if n.q <= 1.0:
        dec = bool(np.all(np.diff(ratio) < slack * ratio[:-1]))
        items["ratio_decreasing"] = ItemCheck(float(np.max(np.diff(ratio) / ratio[:-1])), dec)
    if n.q >= 3.0:
        inc = bool(np.all(np.diff(ratio) > -slack * ratio[:-1]))
        items["ratio_increasing"] = ItemCheck(float(np.min(np.diff(ratio) / ratio[:-1])), inc)

    return SlopeReport(
        q=n.q,
        regime=classify_regime(n.q, N),
        q_critical=critical_exponent(N),
        items=items,
    )


@dataclass(frozen=True)
class PohozaevReport:
    q: float
    N: int
    s: np.ndarray
    z: np.ndarray
    ratio: np.ndarray
    min_z: float
    max_ratio: float
    dimension_bound: float  # (N-2)/(N+2)
    exponent_bound: float  # 2/(q-1)
    q_critical: float

    @property
    def nonexistence_certified(self) -> bool:
        """z > 0 throughout and the ratio stays under the dimensional bound."""
        return self.min_z > 0.0 and self.max_ratio < self.dimension_bound


def pohozaev_scan(n: Nonlinearity, N: int, s_hi: float, samples: int = 1000) -> PohozaevReport:
    """Evaluate z(s) and g/(g' s) on a log grid of (0, s_hi].

    A purely scalar test: the mesh never enters.  Supercritical exponents
    are the expected use but any q is accepted for exploration."""
    if N < 3:
        raise ValueError("dimension must be at least 3")
    s = np.geomspace(1e-6, s_hi, samples)
    g = n.g(s)
    G = n.G(s)
    gp = n.g_prime(s)
    z = 0.5 * (N - 2.0) * g * s - N * G
    ratio = g / (gp * s)
    return PohozaevReport(
        q=n.q,
        N=N,
        s=s,
        z=z,
        ratio=ratio,
        min_z=float(np.min(z)),
        max_ratio=float(np.max(ratio)),
        dimension_bound=(N - 2.0) / (N + 2.0),
        exponent_bound=2.0 / (n.q - 1.0) if n.q > 1.0 else np.inf,
        q_critical=critical_exponent(N),
    )
