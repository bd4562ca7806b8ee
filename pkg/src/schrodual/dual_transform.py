"""The change of variable linking the quasilinear and semilinear problems.

The map f is the odd solution of

    f'(s) = theta(f(s))^(-1/2),   f(0) = 0,

equivalently the inverse of Upsilon(t) = integral_0^t sqrt(theta).  It is
an increasing C^2 diffeomorphism with

    f''(s) = -theta'(f(s)) / (2 theta(f(s))^2),
    0 < f'(s) <= 1,   |f(s)| <= |s|,
    |f(s)|/2 <= f'(s) |s| <= |f(s)|,

and, when theta(s)/s^2 -> alpha^2/2,

    f(s)/sqrt(s) -> (8/alpha^2)^(1/4),   f(s)/s -> 0,   f'(s) f(s) -> sqrt(2)/alpha.

Construction tabulates Upsilon on a log-spaced grid in t by Gauss-Legendre
panels and interprets the pairs (Upsilon(t_j), t_j) as a table of f with
exact node slopes theta(t_j)^(-1/2).  A cubic Hermite interpolant through
that data is verified to satisfy the defining equation on a grid four
times finer than the table; the verification uses the interpolant's own
derivative, since the analytic slope formula satisfies the equation
identically.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline

from .errors import NumericalError, TransformRangeError
from .theta import ThetaSpec

__all__ = ["DualTransform", "upsilon", "build_transform"]

logger = logging.getLogger(__name__)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def upsilon(theta: ThetaSpec, t: float) -> float:
    """Antiderivative of sqrt(theta) from 0 to t by adaptive quadrature.

    Odd in t; relative tolerance 1e-10."""
    t = float(t)
    if not np.isfinite(t):
        raise ValueError(f"upsilon requires finite t, got {t!r}")
    if t == 0.0:
        return 0.0

    def integrand(r):
        val = np.sqrt(theta.value(np.asarray(r, dtype=float)))
        if not np.all(np.isfinite(val)):
            raise ValueError(f"integrand sqrt(theta) is not finite at r={r!r}")
        return val

    val, _ = integrate.quad(integrand, 0.0, abs(t), epsabs=0.0, epsrel=1e-11, limit=400)
    return float(np.sign(t) * val)


def _panel_integrals(theta: ThetaSpec, breaks: np.ndarray) -> np.ndarray:
    """Gauss-Legendre 16 integral of sqrt(theta) on each [breaks_j, breaks_{j+1}]."""
    lo, hi = breaks[:-1], breaks[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[None, :] + half[None, :] * _GL_NODES[:, None]
    vals = np.sqrt(theta.value(pts))
    if not np.all(np.isfinite(vals)):
        bad = float(pts[~np.isfinite(vals)][0])
        raise ValueError(f"integrand sqrt(theta) is not finite at r={bad!r}")
    return half * (_GL_WEIGHTS @ vals)


class DualTransform:
    """Tabulated increasing map f with analytic first and second derivatives.

    Immutable after construction; safe for concurrent reads.  Beyond the
    table, evaluation raises by default; ``extrapolate='asymptotic'``
    switches to the square-root tail (8/alpha^2)^(1/4) sqrt(s) with a
    logged warning, available only when alpha is known.
    """

    def __init__(self, theta, s_nodes, f_nodes, slopes, tol, residual, extrapolate="error"):
        self.theta = theta
        self.alpha = theta.alpha
        self.s_nodes = s_nodes
        self.f_nodes = f_nodes
        self.tol = tol
        self.achieved_residual = residual
        self.extrapolate = extrapolate
        self.table_s_max = float(s_nodes[-1])
        self.table_f_max = float(f_nodes[-1])
        self._fwd = CubicHermiteSpline(s_nodes, f_nodes, slopes)
        self._fwd_d = self._fwd.derivative()
        self._inv = CubicHermiteSpline(f_nodes, s_nodes, 1.0 / slopes)
        self._warned_tail = False

    # -- evaluation ------------------------------------------------------

    def _tail_warn(self):
        if not self._warned_tail:
            logger.warning(
                "%s: evaluating beyond the table (s > %.3g) with the asymptotic tail",
                self.theta.name,
                self.table_s_max,
            )
            self._warned_tail = True

    def f(self, s):
        """f(s), odd, by monotone cubic interpolation of the table."""
        s_arr = np.asarray(s, dtype=float)
        a = np.abs(s_arr)
        inside = a <= self.table_s_max
        out = np.empty_like(a)
        out[inside] = self._fwd(a[inside])
        if not np.all(inside):
            if self.extrapolate == "asymptotic" and self.alpha is not None:
                self._tail_warn()
                out[~inside] = (8.0 / self.alpha**2) ** 0.25 * np.sqrt(a[~inside])
            else:
                raise TransformRangeError(
                    f"|s| up to {float(a.max()):.6g} exceeds the table extent "
                    f"{self.table_s_max:.6g} of {self.theta.name}"
                )
        out = out * np.sign(s_arr)
        return float(out) if np.ndim(s) == 0 else out

    def f_prime(self, s):
        """f'(s) = theta(f(s))^(-1/2), analytic in the tabulated f."""
        fs = np.asarray(self.f(s))
        out = 1.0 / np.sqrt(self.theta.value(fs))
        return float(out) if np.ndim(s) == 0 else out

    def f_second(self, s):
        """f''(s) = -theta'(f(s)) / (2 theta(f(s))^2), never by differencing."""
        fs = np.asarray(self.f(s))
        out = -self.theta.deriv(fs) / (2.0 * self.theta.value(fs) ** 2)
        return float(out) if np.ndim(s) == 0 else out

    def f_inverse(self, u):
        """The inverse map, i.e. Upsilon(u), by the mirrored table."""
        u_arr = np.asarray(u, dtype=float)
        a = np.abs(u_arr)
        inside = a <= self.table_f_max
        out = np.empty_like(a)
        out[inside] = self._inv(a[inside])
        if not np.all(inside):
            if self.extrapolate == "asymptotic" and self.alpha is not None:
                self._tail_warn()
                out[~inside] = a[~inside] ** 2 * np.sqrt(self.alpha**2 / 8.0)
            else:
                raise TransformRangeError(
                    f"|u| up to {float(a.max()):.6g} exceeds the inverse range "
                    f"{self.table_f_max:.6g} of {self.theta.name}"
                )
        out = out * np.sign(u_arr)
        return float(out) if np.ndim(u) == 0 else out

    def ode_residual(self, s):
        """|p'(s) sqrt(theta(p(s))) - 1| for the interpolant p (even in s)."""
        a = np.abs(np.asarray(s, dtype=float))
        if np.any(a > self.table_s_max):
            raise TransformRangeError("residual grid exceeds the table extent")
        res = np.abs(self._fwd_d(a) * np.sqrt(self.theta.value(self._fwd(a))) - 1.0)
        return float(res) if np.ndim(s) == 0 else res


def _build_table(theta: ThetaSpec, s_max: float, per_efold: float):
    """Tabulate (Upsilon(t_j), t_j) out to Upsilon >= s_max."""
    t_lo = 1e-8
    if theta.alpha is not None:
        # (H2) gives theta(s) >= (alpha^2/2) s^2, so this extent is enough.
        t_hi = max(10.0 * t_lo, np.sqrt(2.0 * np.sqrt(2.0) * s_max / theta.alpha))
    else:
        # theta >= 1 gives Upsilon(t) >= t.
        t_hi = float(s_max)
    for _ in range(64):
        count = int(np.log(t_hi / t_lo) * per_efold) + 2
        t = np.concatenate(([0.0], np.geomspace(t_lo, t_hi, count)))
        s = np.concatenate(([0.0], np.cumsum(_panel_integrals(theta, t))))
        if s[-1] >= s_max:
            break
        t_hi *= 1.4
    else:
        raise NumericalError(f"could not reach extent {s_max} for {theta.name}")
    if not np.all(np.diff(s) > 0.0):
        raise NumericalError(f"tabulated map for {theta.name} is not strictly increasing")
    slopes = 1.0 / np.sqrt(theta.value(t))
    return s, t, slopes


def build_transform(
    theta: ThetaSpec,
    s_max: float,
    tol: float = 1e-8,
    extrapolate: str = "error",
    max_refine: int = 3,
) -> DualTransform:
    """Build the transform table on [0, s_max] and verify it.

    The returned interpolant satisfies
    |p'(s) sqrt(theta(p(s))) - 1| <= tol on a verification grid with three
    extra points per table interval; the node density is doubled until the
    bound holds, and a NumericalError reports the achieved residual if the
    refinement limit is hit.
    """
    if s_max <= 0:
        raise ValueError("s_max must be positive")
    if not 0.0 < tol <= 1e-4:
        raise ValueError("tol must lie in (0, 1e-4]")
    if extrapolate not in ("error", "asymptotic"):
        raise ValueError(f"unknown extrapolation mode {extrapolate!r}")

    # Hermite slope error scales like (node spacing)^3, so the log density
    # needed for a target residual scales like tol^(1/3).
    spacing = 0.3 * (72.0 * tol) ** (1.0 / 3.0)
    residual = np.inf
    for _ in range(max_refine + 1):
        s, t, slopes = _build_table(theta, s_max, 1.0 / spacing)
        fwd = CubicHermiteSpline(s, t, slopes)
        fwd_d = fwd.derivative()
        sv = (s[:-1, None] + np.outer(np.diff(s), [0.25, 0.5, 0.75])).ravel()
        residual = float(
            np.max(np.abs(fwd_d(sv) * np.sqrt(theta.value(fwd(sv))) - 1.0))
        )
        if residual <= tol:
            return DualTransform(theta, s, t, slopes, tol, residual, extrapolate)
        spacing *= 0.5
    raise NumericalError(
        f"transform for {theta.name} missed tol={tol:g} after refinement; "
        f"achieved residual {residual:.3e}"
    )
