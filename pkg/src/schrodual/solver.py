"""Sub/super-solution certificates, monotone iteration, Newton, recovery.

The dual problem -Lap v = lambda g(v) is attacked two ways:

* monotone iteration (-Lap + K) v_{n+1} = lambda g(v_n) + K v_n from a
  verified sub- or super-solution, with K chosen so that
  s -> lambda g(s) + K s is nondecreasing on the working range.  The
  iterate sequence is provably monotone node-wise and every step is
  asserted;

* damped Newton on F(v) = -Lap v - lambda g(v), needed for the second
  (non-minimal) solution above a fold and for branch continuation.

Certificates are always re-verified discretely; a failed certificate is a
refusal, never silent.  Solutions are pulled back to the quasilinear
problem by u = f(v).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .dual_transform import DualTransform
from .errors import (
    CertificateError,
    MonotonicityError,
    NumericalError,
    TransformRangeError,
)
from .mesh import DomainMesh, EigenPair, Field, TorsionResult, principal_eigenpair, torsion_function
from .nonlinearity import Nonlinearity, sign_guard

__all__ = [
    "SolveConfig",
    "SolveReport",
    "BoundReport",
    "make_subsolution",
    "make_supersolution",
    "monotone_iterate",
    "newton_solve",
    "apriori_bound_check",
    "solve_auxiliary_psi",
    "energy",
    "energy_gradient",
    "recover_u",
    "recover_v",
    "solve_minimal",
]

_EPS_FLOOR = 2.0**-60
_K_MAX_EXP = 80


@dataclass
class SolveConfig:
    """Parameters of one dual-problem solve."""

    lam: float
    q: float
    mesh: DomainMesh
    K: float | None = None  # monotone shift; auto when unset
    tol: float = 1e-9
    max_iter: int = 10_000
    start: str = "from_sub"  # from_sub | from_super | custom
    start_field: Field | None = None
    sub_exponent: float = 2.0  # r in the phi_1^r certificate for q in (1,3)


@dataclass
class SolveReport:
    """Outcome of one solve on the dual side plus the recovered solution."""

    v: Field
    u: Field | None
    lam: float
    q: float
    residual_sup: float
    iterations: int
    sup_v: float
    sup_u: float
    energy: float
    converged: bool
    monotone_direction: str = "n/a"  # increasing | decreasing | n/a
    fold_signal: bool = False
    tol: float = 1e-9  # the stop tolerance this solve ran at


# ---------------------------------------------------------------------------
# energy and recovery


def energy(n: Nonlinearity, lam: float, v: Field) -> float:
    """I(v) = 1/2 (discrete Dirichlet form) - lambda * quadrature of G(v)."""
    w = v.mesh.weight
    a = v.mesh.neg_laplacian @ v.values
    return float(0.5 * w * (v.values @ a) - lam * w * np.sum(n.G(v.values)))


def energy_gradient(n: Nonlinearity, lam: float, v: Field) -> Field:
    """Gradient field h^dim (-Lap v - lambda g(v)), so that
    (I(v+tw) - I(v))/t -> <gradient, w> in the plain dot product."""
    w = v.mesh.weight
    return Field(v.mesh, w * (v.mesh.neg_laplacian @ v.values - lam * n.g(v.values)))


def recover_u(t: DualTransform, v: Field) -> Field:
    """Pull the dual solution back: u = f(v) node-wise."""
    return Field(v.mesh, np.asarray(t.f(v.values)))


def recover_v(t: DualTransform, u: Field) -> Field:
    """The inverse direction v = f^{-1}(u)."""
    return Field(u.mesh, np.asarray(t.f_inverse(u.values)))


def _residual_sup(mesh: DomainMesh, n: Nonlinearity, lam: float, v: np.ndarray) -> float:
    return float(np.max(np.abs(mesh.neg_laplacian @ v - lam * n.g(v))))


def _make_report(
    n: Nonlinearity,
    lam: float,
    mesh: DomainMesh,
    v: np.ndarray,
    iterations: int,
    converged: bool,
    direction: str = "n/a",
    fold_signal: bool = False,
    tol: float = 1e-9,
) -> SolveReport:
    vf = Field(mesh, v)
    try:
        uf = recover_u(n.transform, vf)
        sup_u = uf.sup
    except TransformRangeError:
        uf, sup_u = None, float("nan")
    return SolveReport(
        v=vf,
        u=uf,
        lam=lam,
        q=n.q,
        residual_sup=_residual_sup(mesh, n, lam, v),
        iterations=iterations,
        sup_v=vf.sup,
        sup_u=sup_u,
        energy=energy(n, lam, vf),
        converged=converged,
        monotone_direction=direction,
        fold_signal=fold_signal,
        tol=tol,
    )


# ---------------------------------------------------------------------------
# certificates


def _sub_scaled(cfg: SolveConfig, n: Nonlinearity, eig: EigenPair, eps_max: float = 1.0) -> Field:
    """Largest dyadic eps <= eps_max with lam1 eps phi1 <= lam g(eps phi1)."""
    phi = eig.phi.values
    eps = eps_max
    while eps >= _EPS_FLOOR:
        lhs = eig.value * eps * phi
        rhs = cfg.lam * n.g(eps * phi)
        if np.all(lhs <= rhs + 1e-12 * (np.abs(lhs) + np.abs(rhs))):
            return Field(cfg.mesh, eps * phi)
        eps *= 0.5
    raise CertificateError(
        f"no sub-solution certificate at lambda={cfg.lam:g}, q={cfg.q:g}: "
        "no scaling of the principal eigenfunction satisfies the node-wise "
        "inequality (for q=1 this means lambda <= theta(0)*lambda_1)"
    )


def make_subsolution(cfg: SolveConfig, n: Nonlinearity, eig: EigenPair) -> Field:
    """Regime-appropriate verified sub-solution.

    q <= 1: eps phi_1 by dyadic scan; q in (1,3): phi_1^r with the
    node-wise inequality -Lap(phi_1^r) <= lam g(phi_1^r) checked directly.
    """
    sign_guard(cfg.lam)
    if cfg.q <= 1.0:
        return _sub_scaled(cfg, n, eig)
    if cfg.q < 3.0:
        cand = eig.phi.values ** cfg.sub_exponent
        lhs = cfg.mesh.neg_laplacian @ cand
        rhs = cfg.lam * n.g(cand)
        if np.all(lhs <= rhs + 1e-12 * (1.0 + np.abs(rhs))):
            return Field(cfg.mesh, cand)
        raise CertificateError(
            f"no sub-solution certificate at lambda={cfg.lam:g}, q={cfg.q:g}: "
            f"phi_1^{cfg.sub_exponent:g} fails the node-wise inequality "
            "(lambda is below the certificate threshold)"
        )
    raise ValueError("sub-solution certificates exist only for q < 3")


def _super_from(
    cfg: SolveConfig, n: Nonlinearity, torsion: TorsionResult, k_min: float = 2.0**-40
) -> Field:
    """Smallest dyadic K >= k_min with K e a verified super-solution."""
    e = torsion.e_omega.values
    e_l, e_m = torsion.e_L, torsion.e_M
    K = k_min
    for _ in range(2 * _K_MAX_EXP):
        if K * e_m > n.transform.table_s_max:
            raise CertificateError(
                f"no super-solution certificate at lambda={cfg.lam:g}, q={cfg.q:g} "
                f"within the transform extent {n.transform.table_s_max:.3g}; "
                "expected for q >= 3 where g(s)/s grows"
            )
        scalar_ok = e_m * n.g(K * e_l) / (K * e_l) <= 1.0 / cfg.lam
        if scalar_ok:
            rhs = cfg.lam * n.g(K * e)
            if np.all(rhs <= K * (1.0 + 1e-12)):
                return Field(cfg.mesh, K * e)
        K *= 2.0
    raise CertificateError(
        f"no super-solution certificate at lambda={cfg.lam:g}, q={cfg.q:g} "
        f"up to K=2^{_K_MAX_EXP}; expected for q >= 3 at large lambda"
    )


def make_supersolution(cfg: SolveConfig, n: Nonlinearity, torsion: TorsionResult) -> Field:
    """K e with the smallest dyadic K making -Lap(K e) = K >= lam g(K e)
    node-wise on Omega (the torsion function makes the constant exact)."""
    sign_guard(cfg.lam)
    return _super_from(cfg, n, torsion)


# ---------------------------------------------------------------------------
# monotone iteration


def _auto_shift(n: Nonlinearity, lam: float, bound: float) -> float:
    """K = 1.1 lam max(0, -min g') sampled on (0, bound]; makes
    gamma(s) = lam g(s) + K s nondecreasing there."""
    M = max(bound, 1e-12)
    s = np.linspace(M * 1e-6, M, 1000)
    gp = n.g_prime(s)
    return 1.1 * lam * max(0.0, -float(np.min(gp)))


def _monotone_core(
    mesh: DomainMesh,
    gfun,
    lam: float,
    K: float,
    v0: np.ndarray,
    tol: float,
    max_iter: int,
    direction: str | None = None,
    stop_below: float | None = None,
):
    """Shared monotone driver over a raw scalar map gfun.

    Returns (values, iterations, direction, converged).  ``stop_below``
    aborts early once the sup-norm falls under it (a decreasing sequence
    heading to zero cannot recover)."""
    A = mesh.neg_laplacian
    op = (A + K * sparse.identity(mesh.size, format="csr")).tocsc()
    lu = splu(op)
    v = np.asarray(v0, dtype=float).copy()

    if direction is None:
        defect = A @ v - lam * gfun(v)
        slack = 1e-9 * (1.0 + float(np.max(np.abs(defect))))
        is_sub = bool(np.all(defect <= slack))
        is_super = bool(np.all(defect >= -slack))
        if is_sub and is_super:
            direction = "n/a"
        elif is_sub:
            direction = "increasing"
        elif is_super:
            direction = "decreasing"
        else:
            raise MonotonicityError(
                "starting field is neither a sub- nor a super-solution; "
                "check the shift K or the certificate"
            )

    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        v_new = lu.solve(lam * gfun(v) + K * v)
        step = v_new - v
        mslack = 1e-9 * (1.0 + float(np.max(np.abs(v))))
        if direction == "increasing" and float(np.min(step)) < -mslack:
            raise MonotonicityError(
                f"increasing iteration lost monotonicity at step {it} "
                f"(worst {float(np.min(step)):.3e}); K={K:g} is too small or v0 is invalid"
            )
        if direction == "decreasing" and float(np.max(step)) > mslack:
            raise MonotonicityError(
                f"decreasing iteration lost monotonicity at step {it} "
                f"(worst {float(np.max(step)):.3e}); K={K:g} is too small or v0 is invalid"
            )
        v = v_new
        step_sup = float(np.max(np.abs(step)))
        if stop_below is not None and float(np.max(np.abs(v))) < stop_below:
            break
        if step_sup <= tol:
            resid = float(np.max(np.abs(A @ v - lam * gfun(v))))
            if resid <= tol * (1.0 + lam):
                converged = True
                break
    return v, it, direction, converged


def monotone_iterate(
    cfg: SolveConfig,
    n: Nonlinearity,
    v0: Field,
    sup_bound: float | None = None,
) -> SolveReport:
    """Monotone iteration from a verified sub- or super-solution.

    The direction is inferred from the sign of the starting defect; the
    node-wise monotonicity of the sequence is asserted at every step.
    Convergence means both a sup-norm step below tol and a PDE residual
    below tol*(1+lambda)."""
    sign_guard(cfg.lam)
    bound = max(v0.sup, sup_bound or 0.0) * 1.05
    K = cfg.K if cfg.K is not None else _auto_shift(n, cfg.lam, bound)
    v, it, direction, ok = _monotone_core(
        cfg.mesh, n.g, cfg.lam, K, v0.values, cfg.tol, cfg.max_iter
    )
    if not ok and it >= cfg.max_iter:
        raise NumericalError(
            f"monotone iteration hit the cap {cfg.max_iter} "
            f"(step tol {cfg.tol:g}, lambda={cfg.lam:g})"
        )
    return _make_report(n, cfg.lam, cfg.mesh, v, it, ok, direction, tol=cfg.tol)


# ---------------------------------------------------------------------------
# Newton


def newton_solve(cfg: SolveConfig, n: Nonlinearity, v0: Field, max_newton: int = 100) -> SolveReport:
    """Damped Newton on F(v) = -Lap v - lambda g(v).

    Jacobian -Lap - lambda diag(g'(v)); the step is halved until ||F||
    decreases.  A near-singular Jacobian is reported as a fold signal,
    not an exception.  Forbidden for q < 1 (g' blows up at 0)."""
    sign_guard(cfg.lam)
    if n.q < 1.0:
        raise ValueError("Newton needs q >= 1; use the monotone path for q < 1")
    A = cfg.mesh.neg_laplacian
    v = v0.values.copy()
    F = A @ v - cfg.lam * n.g(v)
    fnorm = float(np.max(np.abs(F)))
    for it in range(max_newton):
        if fnorm <= cfg.tol * (1.0 + cfg.lam):
            return _make_report(n, cfg.lam, cfg.mesh, v, it, True, tol=cfg.tol)
        J = (A - cfg.lam * sparse.diags(n.g_prime(v))).tocsc()
        try:
            delta = splu(J).solve(-F)
        except RuntimeError:
            return _make_report(n, cfg.lam, cfg.mesh, v, it, False, fold_signal=True, tol=cfg.tol)
        if not np.all(np.isfinite(delta)) or float(np.max(np.abs(delta))) > 1e8 * (1.0 + float(np.max(np.abs(v)))):
            return _make_report(n, cfg.lam, cfg.mesh, v, it, False, fold_signal=True, tol=cfg.tol)
        alpha = 1.0
        while alpha > 1e-12:
            trial = v + alpha * delta
            try:
                Ft = A @ trial - cfg.lam * n.g(trial)
            except TransformRangeError:
                # trial left the tabulated range; treat like a rejected step
                alpha *= 0.5
                continue
            ft = float(np.max(np.abs(Ft)))
            if ft < fnorm:
                v, F, fnorm = trial, Ft, ft
                break
            alpha *= 0.5
        else:
            return _make_report(n, cfg.lam, cfg.mesh, v, it, False, tol=cfg.tol)
    return _make_report(n, cfg.lam, cfg.mesh, v, max_newton, False, tol=cfg.tol)


# ---------------------------------------------------------------------------
# a-priori bound


@dataclass
class BoundReport:
    """Node-wise comparison of a solution against the bound C psi."""

    C: float
    psi_sup: float
    psi_residual: float
    margin: float  # min(C psi - v)
    slack: float  # allowed discretization slack
    ok: bool
    psi: Field | None = field(repr=False, default=None)


def solve_auxiliary_psi(mesh: DomainMesh, q: float, torsion: TorsionResult | None = None, tol: float = 1e-10) -> Field:
    """Unique positive solution of -Lap w = w^((q-1)/2) (sublinear for
    q in (1,3)), by a decreasing monotone iteration from a dyadic K e."""
    if not 1.0 < q < 3.0:
        raise ValueError("the auxiliary problem needs q in (1,3)")
    p = 0.5 * (q - 1.0)

    def gfun(s):
        return np.sign(s) * np.abs(s) ** p

    torsion = torsion or torsion_function(mesh)
    e = torsion.e_omega.values
    K = 1.0
    for _ in range(_K_MAX_EXP):
        if np.all(gfun(K * e) <= K * (1.0 + 1e-12)):
            break
        K *= 2.0
    else:
        raise NumericalError("no super-solution for the auxiliary problem")
    v, _, _, ok = _monotone_core(mesh, gfun, 1.0, 0.0, K * e, tol, 50_000, direction="decreasing")
    if not ok:
        raise NumericalError("auxiliary problem iteration did not converge")
    return Field(mesh, v)


def apriori_bound_check(
    report: SolveReport,
    n: Nonlinearity,
    alpha: float | None = None,
    psi: Field | None = None,
) -> BoundReport:
    """Check v <= C psi with C = lam^(2/(3-q)) (8/alpha^2)^((q+1)/(2(3-q))).

    Only meaningful for q in (1,3) (the exponent is singular at q = 3);
    the slack 10 h^2 ||v||_inf absorbs discretization error.  A violation
    beyond the slack flags a solver or transform bug."""
    q = n.q
    if not 1.0 < q < 3.0:
        raise ValueError("the a-priori bound applies only for q in (1,3)")
    if not report.converged:
        raise ValueError("need a converged solve report")
    alpha = alpha if alpha is not None else n.transform.alpha
    if alpha is None:
        raise ValueError("the bound constant needs the asymptotic alpha")
    mesh = report.v.mesh
    psi = psi if psi is not None else solve_auxiliary_psi(mesh, q)
    p = 0.5 * (q - 1.0)
    psi_res = float(
        np.max(np.abs(mesh.neg_laplacian @ psi.values - np.abs(psi.values) ** p))
    )
    C = report.lam ** (2.0 / (3.0 - q)) * (8.0 / alpha**2) ** ((q + 1.0) / (2.0 * (3.0 - q)))
    gap = C * psi.values - report.v.values
    slack = 10.0 * max(mesh.h) ** 2 * report.sup_v
    margin = float(np.min(gap))
    return BoundReport(
        C=C,
        psi_sup=psi.sup,
        psi_residual=psi_res,
        margin=margin,
        slack=slack,
        ok=margin >= -slack,
        psi=psi,
    )


# ---------------------------------------------------------------------------
# driver


def solve_minimal(
    cfg: SolveConfig,
    n: Nonlinearity,
    eig: EigenPair | None = None,
    torsion: TorsionResult | None = None,
) -> SolveReport:
    """Certificate-based monotone solve: build an ordered sub/super pair,
    then iterate from the side selected by cfg.start."""
    sign_guard(cfg.lam)
    eig = eig or principal_eigenpair(cfg.mesh)
    torsion = torsion or torsion_function(cfg.mesh)
    sub = make_subsolution(cfg, n, eig)
    sup = make_supersolution(cfg, n, torsion)
    for _ in range(200):
        if np.all(sub.values <= sup.values * (1.0 + 1e-12) + 1e-300):
            break
        if cfg.q <= 1.0:
            sub = _sub_scaled(cfg, n, eig, eps_max=0.5 * float(np.max(sub.values)))
        else:
            k_now = float(np.max(sup.values)) / torsion.e_M
            sup = _super_from(cfg, n, torsion, k_min=2.0 * k_now)
    else:
        raise CertificateError("could not order the sub- and super-solutions")

    if cfg.start == "custom":
        if cfg.start_field is None:
            raise ValueError("start='custom' needs start_field")
        v0 = cfg.start_field
    elif cfg.start == "from_super":
        v0 = sup
    else:
        v0 = sub
    report = monotone_iterate(cfg, n, v0, sup_bound=float(np.max(sup.values)))
    # sandwich check: the limit stays between the certificates
    s_ok = np.all(report.v.values >= sub.values - 1e-8 * (1.0 + sub.sup))
    s_ok = s_ok and np.all(report.v.values <= sup.values + 1e-8 * (1.0 + sup.sup))
    if report.converged and not s_ok:
        raise NumericalError("converged iterate escaped the certificate sandwich")
    return report
