"""Coefficient functions of the quasilinear operator and their hypothesis checks.

A coefficient is an even C^1 function theta: R -> [1, inf).  Downstream
machinery relies on three structural hypotheses:

  (H1) theta is decreasing on (-inf, 0) and increasing on (0, inf);
  (H2) theta(s)/s^2 is nonincreasing on (0, inf) (even reflection left);
  (H3) theta(s)/s^2 -> alpha^2/2 for some alpha > 0.

The built-in catalog carries closed-form derivatives and, where (H3)
holds, the exact asymptotic constant alpha = sqrt(2).  Hypotheses are
checked by sampling, not symbolically, because coefficients are
user-extensible black boxes.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ThetaSpec",
    "HypothesisReport",
    "theta1",
    "theta2",
    "theta3",
    "theta4",
    "theta5",
    "unit",
    "catalog",
    "get_spec",
    "validate_hypotheses",
]


@dataclass(frozen=True)
class ThetaSpec:
    """A coefficient function with its derivative and asymptotic constant.

    ``value`` and ``deriv`` must accept numpy arrays of any shape.
    ``alpha`` is the constant of (H3); ``None`` when the quadratic
    growth limit does not exist (the degenerate constant coefficient).
    """

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    alpha: float | None = None

    def __call__(self, s):
        out = self.value(np.asarray(s, dtype=float))
        return float(out) if np.ndim(s) == 0 else out

    def d(self, s):
        out = self.deriv(np.asarray(s, dtype=float))
        return float(out) if np.ndim(s) == 0 else out


def _softplus_sq(s):
    # log(1 + exp(s^2)) without overflow
    return np.logaddexp(0.0, s * s)


def _dsoftplus_sq(s):
    # d/ds log(1 + exp(s^2)) = 2 s / (1 + exp(-s^2))
    return 2.0 * s / (1.0 + np.exp(-s * s))


def theta1() -> ThetaSpec:
    return ThetaSpec(
        name="theta1",
        value=lambda s: 1.0 + s * s,
        deriv=lambda s: 2.0 * s,
        alpha=np.sqrt(2.0),
    )


def theta2(p: float = 2.0) -> ThetaSpec:
    """(1+|s|^p)^(1/p) + s^2.  Requires p in (1, 2]; p = 1 would give a
    derivative jump at the origin, breaking the C^1 requirement."""
    if not 1.0 < p <= 2.0:
        raise ValueError(f"theta2 exponent must lie in (1, 2], got {p}")

    def value(s):
        a = np.abs(s)
        return (1.0 + a**p) ** (1.0 / p) + s * s

    def deriv(s):
        a = np.abs(s)
        return (1.0 + a**p) ** ((1.0 - p) / p) * a ** (p - 1.0) * np.sign(s) + 2.0 * s

    return ThetaSpec(name=f"theta2[p={p:g}]", value=value, deriv=deriv, alpha=np.sqrt(2.0))


def theta3() -> ThetaSpec:
    return ThetaSpec(
        name="theta3",
        value=lambda s: 1.0 + _softplus_sq(s),
        deriv=_dsoftplus_sq,
        alpha=np.sqrt(2.0),
    )


def theta4() -> ThetaSpec:
    # 1 + log(exp(s*atan s) + exp(s^2 + s*atan s)) = 1 + s*atan(s) + log(1+exp(s^2))
    def value(s):
        return 1.0 + s * np.arctan(s) + _softplus_sq(s)

    def deriv(s):
        return np.arctan(s) + s / (1.0 + s * s) + _dsoftplus_sq(s)

    return ThetaSpec(name="theta4", value=value, deriv=deriv, alpha=np.sqrt(2.0))


def theta5() -> ThetaSpec:
    # 1 + log((1+|s|)^{|s|} (1+exp(s^2))) = 1 + |s| log(1+|s|) + log(1+exp(s^2))
    def value(s):
        a = np.abs(s)
        return 1.0 + a * np.log1p(a) + _softplus_sq(s)

    def deriv(s):
        a = np.abs(s)
        return np.sign(s) * (np.log1p(a) + a / (1.0 + a)) + _dsoftplus_sq(s)

    return ThetaSpec(name="theta5", value=value, deriv=deriv, alpha=np.sqrt(2.0))


def unit() -> ThetaSpec:
    """Constant coefficient 1: the transform degenerates to the identity.

    Fails (H3) because theta(s)/s^2 -> 0; used as an oracle since every
    derived quantity has a closed form."""
    return ThetaSpec(
        name="unit",
        value=lambda s: np.ones_like(s),
        deriv=lambda s: np.zeros_like(s),
        alpha=None,
    )


def catalog(p: float = 2.0) -> list[ThetaSpec]:
    """The built-in coefficients, with the degenerate ``unit`` last."""
    return [theta1(), theta2(p), theta3(), theta4(), theta5(), unit()]


def get_spec(name: str) -> ThetaSpec:
    """Resolve a CLI catalog key: theta1, theta2[:p=<val>], theta3..5, unit."""
    key = name.strip()
    if key.startswith("theta2"):
        if ":" in key:
            _, _, tail = key.partition(":")
            k, _, v = tail.partition("=")
            if k.strip() != "p":
                raise ValueError(f"unknown theta2 option {tail!r}")
            return theta2(float(v))
        return theta2()
    table = {"theta1": theta1, "theta3": theta3, "theta4": theta4, "theta5": theta5, "unit": unit}
    if key not in table:
        raise ValueError(f"unknown coefficient {name!r}")
    return table[key]()


@dataclass(frozen=True)
class HypothesisReport:
    """Outcome of sampling-based hypothesis checks for a coefficient."""

    name: str
    checked_range: tuple[float, float]
    base_ok: bool  # theta >= 1 and evenness
    h1_ok: bool
    h2_ok: bool
    h3_ok: bool
    worst_violation: tuple[float, float]  # (s, normalized magnitude)
    alpha_estimate: float

    @property
    def passed(self) -> bool:
        return self.base_ok and self.h1_ok and self.h2_ok and self.h3_ok


def validate_hypotheses(
    spec: ThetaSpec,
    s_max: float,
    samples: int = 256,
    tol: float = 1e-8,
) -> HypothesisReport:
    """Sample theta and theta' on a log grid of [-s_max, s_max] and check
    (H1)-(H3) plus the base requirements theta >= 1 and evenness.

    Monotonicity comparisons use relative slack ``tol``.  (H3) passes when
    2 theta(s)/s^2 agrees within 1% across the last sampled decade (and
    with the declared alpha, if any).  Failures are flagged, not raised;
    only non-finite evaluations raise.
    """
    if s_max <= 0:
        raise ValueError("s_max must be positive")
    if samples < 16:
        raise ValueError("need at least 16 samples")

    s = np.geomspace(s_max * 1e-12, s_max, samples)
    th = spec.value(s)
    th_neg = spec.value(-s)
    dth = spec.deriv(s)
    for arr, label in ((th, "theta"), (th_neg, "theta(-s)"), (dth, "theta'")):
        if not np.all(np.isfinite(arr)):
            bad = s[~np.isfinite(arr)][0]
            raise ValueError(f"{label} is not finite at s={bad!r} for {spec.name}")

    worst = (0.0, 0.0)

    def track(ss, mag):
        nonlocal worst
        i = int(np.argmax(mag))
        if mag[i] > worst[1]:
            worst = (float(ss[i]), float(mag[i]))

    # base: lower bound and evenness
    low = np.maximum(0.0, 1.0 - th)
    even = np.abs(th - th_neg) / (1.0 + np.abs(th))
    base_ok = bool(np.max(low) <= 1e-12 and np.max(even) <= 1e-12)
    track(s, low)
    track(s, even)

    # (H1): sign(theta') = sign(s), nonstrict
    v1 = np.maximum(0.0, -dth) / (1.0 + np.abs(dth))
    h1_ok = bool(np.max(v1) <= tol)
    track(s, v1)

    # (H2): theta(s)/s^2 nonincreasing on the positive grid
    ratio = th / (s * s)
    v2 = np.maximum(0.0, np.diff(ratio) / ratio[:-1])
    h2_ok = bool(v2.size == 0 or np.max(v2) <= tol)
    track(s[1:], v2)

    # (H3): 2 theta(s)/s^2 settles in the last decade
    a2 = 2.0 * ratio
    tail = s >= s_max / 10.0
    a2_tail = a2[tail]
    spread = float((a2_tail.max() - a2_tail.min()) / a2_tail.max())
    alpha_estimate = float(np.sqrt(a2[-1]))
    h3_ok = spread <= 0.01
    if spec.alpha is not None:
        h3_ok = h3_ok and abs(alpha_estimate - spec.alpha) <= 0.01 * spec.alpha
    if not h3_ok:
        track(s[tail][-1:], np.array([spread]))

    return HypothesisReport(
        name=spec.name,
        checked_range=(-float(s_max), float(s_max)),
        base_ok=base_ok,
        h1_ok=h1_ok,
        h2_ok=h2_ok,
        h3_ok=h3_ok,
        worst_violation=worst,
        alpha_estimate=alpha_estimate,
    )
