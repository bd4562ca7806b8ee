"""Parameter sweeps, bifurcation diagrams and threshold bisection.

The solution structure over lambda depends on the exponent regime:

  q in (0,1]   unique positive solution (for q=1 only above theta(0) lam_1),
               found by monotone iteration from certificates;
  q in (1,3)   no solution below a fold value lambda_*, two ordered
               solutions above it; lambda_* is located by bisection on a
               deterministic solvability probe;
  q = 3        a branch bifurcating from infinity at (alpha^2/4) lam_1,
               located by extrapolating 1/sup(v) to zero;
  q in (3, .)  a positive solution for every lambda > 0 whose sup-norm
               blows up as lambda -> 0, traced by warm-started Newton.

Fold handling is bisection on solvability rather than pseudo-arclength:
the minimal-plus-maximal structure makes solvability a clean predicate.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .dual_transform import DualTransform, build_transform
from .errors import CertificateError, NumericalError, RefusalError
from .mesh import (
    DomainMesh,
    EigenPair,
    Field,
    TorsionResult,
    principal_eigenpair,
    smallest_eigenvalue,
    torsion_function,
)
from .nonlinearity import Nonlinearity, sign_guard
from .solver import (
    SolveConfig,
    SolveReport,
    _auto_shift,
    _monotone_core,
    _super_from,
    make_subsolution,
    make_supersolution,
    monotone_iterate,
    newton_solve,
    solve_auxiliary_psi,
    solve_minimal,
)
from .theta import ThetaSpec

__all__ = [
    "BranchPoint",
    "SweepContext",
    "sweep",
    "stability_index",
    "find_lambda_star",
    "find_threshold_q1",
    "two_positive_roots",
    "bifurcation_from_infinity",
    "small_lambda_blowup",
    "continue_branch",
    "ThresholdReport",
    "TrendReport",
]

BLOWUP_FLOOR = 1e3  # sup_v beyond this counts as numerical blow-up
NONTRIVIAL_FLOOR = 1e-6  # sup_v below this counts as the trivial solution


def _residual_floor(mesh: DomainMesh, sup: float) -> float:
    """Rounding floor of the discrete PDE residual at a given amplitude.

    ||A v||_inf carries entries of size sup * 4/h^2, so float64 cannot
    certify residuals below eps times that; the margin covers amplitude
    growth along a continued branch."""
    a_norm = 4.0 * sum(1.0 / h**2 for h in mesh.h)
    return 64.0 * np.finfo(float).eps * a_norm * max(1.0, sup)


@dataclass(frozen=True)
class BranchPoint:
    """One point of a lambda sweep."""

    lam: float
    sup_v: float
    sup_u: float
    energy: float
    stability: int | None  # sign of the smallest linearization eigenvalue
    converged: bool
    branch_id: str


@dataclass
class ThresholdReport:
    empirical: float
    predicted: float
    rel_error: float
    lams: list[float]
    sups: list[float]
    monotone_ok: bool
    reports: list[SolveReport] | None = None


@dataclass
class TrendReport:
    lams: list[float]
    sup_v: list[float]
    sup_u: list[float]
    monotone_ok: bool  # sup_u strictly increasing as lambda decreases
    growth_exponent: float  # d log sup_v / d log lambda (reported, not asserted)
    truncated: bool  # branch hit the blow-up floor or was lost
    reports: list[SolveReport] | None = None


@dataclass
class SweepContext:
    """Shared immutable pieces of a sweep: transform, mesh spectra, torsion."""

    theta: ThetaSpec
    mesh: DomainMesh
    q: float
    transform: DualTransform | None = None
    nonlin: Nonlinearity | None = None
    eig: EigenPair | None = None
    torsion: TorsionResult | None = None
    psi: Field | None = None
    tol: float = 1e-9
    blowup: float = BLOWUP_FLOOR

    def __post_init__(self):
        if self.transform is None:
            s_max = max(10.0 * self.blowup, 1e4)
            self.transform = build_transform(self.theta, s_max=s_max)
        if self.nonlin is None:
            self.nonlin = Nonlinearity(q=self.q, transform=self.transform)
        if self.eig is None:
            self.eig = principal_eigenpair(self.mesh)
        if self.torsion is None:
            self.torsion = torsion_function(self.mesh)

    def config(self, lam: float, **kw) -> SolveConfig:
        return SolveConfig(lam=lam, q=self.q, mesh=self.mesh, tol=self.tol, **kw)

    def config_scaled(self, lam: float, sup_guess: float, **kw) -> SolveConfig:
        """Config whose tolerance respects the float64 residual floor at
        the expected solution amplitude."""
        tol = max(self.tol, _residual_floor(self.mesh, sup_guess) / (1.0 + lam))
        return SolveConfig(lam=lam, q=self.q, mesh=self.mesh, tol=tol, **kw)


def stability_index(n: Nonlinearity, lam: float, v: Field) -> int:
    """Sign of the smallest eigenvalue of -Lap - lam diag(g'(v))."""
    J = v.mesh.neg_laplacian - lam * sparse.diags(n.g_prime(v.values))
    mu = smallest_eigenvalue(J.tocsr(), tridiagonal=(v.mesh.dim == 1))
    return int(np.sign(mu))


def _point(ctx: SweepContext, lam: float, report: SolveReport | None, branch: str) -> BranchPoint:
    if report is None or not report.converged:
        return BranchPoint(lam, float("nan"), float("nan"), float("nan"), None, False, branch)
    # re-check the solver residual invariant on ingestion
    resid = float(
        np.max(np.abs(ctx.mesh.neg_laplacian @ report.v.values - lam * ctx.nonlin.g(report.v.values)))
    )
    if resid > report.tol * (1.0 + lam):
        raise NumericalError(
            f"branch point at lambda={lam:g} violates the residual invariant "
            f"({resid:.3e} > {report.tol * (1.0 + lam):.3e})"
        )
    return BranchPoint(
        lam=lam,
        sup_v=report.sup_v,
        sup_u=report.sup_u,
        energy=report.energy,
        stability=stability_index(ctx.nonlin, lam, report.v),
        converged=True,
        branch_id=branch,
    )


# ---------------------------------------------------------------------------
# single-lambda strategies


def _amplitude_guess(ctx: SweepContext, lam: float) -> float:
    """Scale s where lam g(s)/s crosses the principal eigenvalue (the
    natural amplitude of a one-bump solution)."""
    s = np.geomspace(1e-6, 0.99 * ctx.transform.table_s_max, 400)
    ratio = ctx.nonlin.g(s) / s
    target = ctx.eig.value / lam
    idx = int(np.argmin(np.abs(ratio - target)))
    return float(s[idx])


def _newton_cold(ctx: SweepContext, lam: float) -> SolveReport | None:
    """Deterministic cold-start Newton scan over scaled eigenfunctions."""
    guess = _amplitude_guess(ctx, lam)
    for c in (1.0, 0.5, 2.0, 0.25, 4.0):
        v0 = Field(ctx.mesh, c * guess * ctx.eig.phi.values)
        rep = newton_solve(ctx.config_scaled(lam, 4.0 * c * guess), ctx.nonlin, v0)
        if rep.converged and NONTRIVIAL_FLOOR < rep.sup_v and np.min(rep.v.values) > -1e-8 * rep.sup_v:
            return rep
    return None


def _solve_q_le_1(ctx: SweepContext, lam: float) -> SolveReport:
    return solve_minimal(ctx.config(lam), ctx.nonlin, ctx.eig, ctx.torsion)


def _solve_minimal_branch(ctx: SweepContext, lam: float, warm: Field | None) -> SolveReport | None:
    """Minimal branch for q in (1,3): monotone from the power certificate
    when it holds, Newton from a small scaled start otherwise."""
    try:
        return solve_minimal(ctx.config(lam), ctx.nonlin, ctx.eig, ctx.torsion)
    except CertificateError:
        pass
    v0 = warm if warm is not None else Field(
        ctx.mesh, _amplitude_guess(ctx, lam) * ctx.eig.phi.values
    )
    rep = newton_solve(ctx.config_scaled(lam, 4.0 * v0.sup), ctx.nonlin, v0)
    if rep.converged and rep.sup_v > NONTRIVIAL_FLOOR:
        return rep
    return None


# ---------------------------------------------------------------------------
# sweep


def sweep(
    q: float,
    lambdas,
    theta: ThetaSpec,
    mesh: DomainMesh,
    ctx: SweepContext | None = None,
    parallel: bool = False,
    jump_slope: float = 16.0,
) -> list[BranchPoint]:
    """Solve along sorted positive lambda values; per-point failures are
    recorded as non-converged points, never raised.

    Warm-started Newton continuation carries the branch for q >= 3; the
    parallel cold-start mode is available for q <= 1 only (the solution
    is unique there, so no warm start is needed).  Consecutive converged
    points whose log-log slope exceeds ``jump_slope`` are split into a
    new branch label."""
    lams = [float(x) for x in lambdas]
    for lam in lams:
        sign_guard(lam)
    if sorted(lams) != lams:
        raise ValueError("lambda values must be sorted ascending")
    ctx = ctx or SweepContext(theta=theta, mesh=mesh, q=q)

    points: list[BranchPoint] = []
    if q <= 1.0:
        def one(lam):
            try:
                return _point(ctx, lam, _solve_q_le_1(ctx, lam), "minimal")
            except (CertificateError, NumericalError):
                return _point(ctx, lam, None, "minimal")

        if parallel:
            with ThreadPoolExecutor() as pool:
                points = list(pool.map(one, lams))
        else:
            points = [one(lam) for lam in lams]
        return _relabel_jumps(points, jump_slope)

    if parallel:
        raise ValueError("parallel sweeps are supported only for q <= 1")

    if q < 3.0:
        warm = None
        for lam in lams:
            rep = _solve_minimal_branch(ctx, lam, warm)
            if rep is not None:
                warm = rep.v
            points.append(_point(ctx, lam, rep, "minimal"))
        return _relabel_jumps(points, jump_slope)

    warm = None
    for lam in lams:
        if warm is None:
            rep = _newton_cold(ctx, lam)
        else:
            rep = newton_solve(ctx.config_scaled(lam, 4.0 * warm.sup), ctx.nonlin, warm)
            if not (rep.converged and rep.sup_v > NONTRIVIAL_FLOOR):
                rep = _newton_cold(ctx, lam)
        ok = rep is not None and rep.converged and rep.sup_v > NONTRIVIAL_FLOOR
        if ok and rep.sup_v > ctx.blowup:
            points.append(BranchPoint(lam, rep.sup_v, rep.sup_u, rep.energy, None, False, "blowup"))
            warm = None
            continue
        warm = rep.v if ok else None
        points.append(_point(ctx, lam, rep if ok else None, "newton"))
    return _relabel_jumps(points, jump_slope)


def _relabel_jumps(points: list[BranchPoint], jump_slope: float) -> list[BranchPoint]:
    """Split the branch label where sup_u jumps discontinuously.

    The detector compares |d log sup_u / d log lambda| between consecutive
    converged points against ``jump_slope``: steep power-law branches
    sampled coarsely stay intact, a genuine branch switch (large sup jump
    over a small lambda step) is split."""
    out: list[BranchPoint] = []
    suffix = 0
    prev = None
    for p in points:
        if p.converged and prev is not None and prev.converged and prev.sup_u > 0 and p.sup_u > 0:
            dlog_sup = abs(np.log(p.sup_u / prev.sup_u))
            dlog_lam = max(abs(np.log(p.lam / prev.lam)), 0.02)
            if dlog_sup / dlog_lam > jump_slope:
                suffix += 1
        if suffix and p.converged:
            p = BranchPoint(
                p.lam, p.sup_v, p.sup_u, p.energy, p.stability, p.converged,
                f"{p.branch_id}-{suffix + 1}",
            )
        out.append(p)
        prev = p
    return out


# ---------------------------------------------------------------------------
# q = 1 threshold (certificate bisection)


def find_threshold_q1(
    theta: ThetaSpec,
    mesh: DomainMesh,
    bracket: tuple[float, float] = (0.1, 100.0),
    rel_width: float = 1e-4,
    ctx: SweepContext | None = None,
) -> float:
    """Bisect on solvability for q = 1.

    The probe is the certified sandwich: a scaled-eigenfunction
    sub-solution plus a torsion super-solution, which exists exactly for
    lambda above theta(0) lam_1 (up to the dyadic scan floor)."""
    ctx = ctx or SweepContext(theta=theta, mesh=mesh, q=1.0)

    def probe(lam: float) -> bool:
        cfg = ctx.config(lam)
        try:
            make_subsolution(cfg, ctx.nonlin, ctx.eig)
            make_supersolution(cfg, ctx.nonlin, ctx.torsion)
            return True
        except CertificateError:
            return False

    lo, hi = map(float, bracket)
    if probe(lo):
        raise ValueError(f"bracket invalid: solvable already at lambda={lo:g}")
    if not probe(hi):
        raise ValueError(f"bracket invalid: not solvable at lambda={hi:g}")
    while hi - lo > rel_width * 0.5 * (hi + lo):
        mid = 0.5 * (lo + hi)
        if probe(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# q in (1,3): fold location and the two ordered solutions


def _maximal_solve(ctx: SweepContext, lam: float, budget: int = 20_000) -> SolveReport | None:
    """Monotone iteration downward from a super-solution dominating the
    a-priori bound C psi; converges to the maximal solution when one
    exists and decays to zero otherwise (returned as None)."""
    if ctx.psi is None:
        ctx.psi = solve_auxiliary_psi(ctx.mesh, ctx.q, ctx.torsion)
    alpha = ctx.transform.alpha
    if alpha is None:
        return None
    C = lam ** (2.0 / (3.0 - ctx.q)) * (8.0 / alpha**2) ** (
        (ctx.q + 1.0) / (2.0 * (3.0 - ctx.q))
    )
    cap = C * ctx.psi.values
    e = ctx.torsion.e_omega.values
    cfg = ctx.config(lam)
    try:
        sup_f = make_supersolution(cfg, ctx.nonlin, ctx.torsion)
        K = float(np.max(sup_f.values)) / ctx.torsion.e_M
        while np.any(K * e < cap):
            sup_f = _super_from(cfg, ctx.nonlin, ctx.torsion, k_min=2.0 * K)
            K = float(np.max(sup_f.values)) / ctx.torsion.e_M
    except CertificateError:
        return None
    bound = float(np.max(sup_f.values)) * 1.05
    K_shift = _auto_shift(ctx.nonlin, lam, bound)
    floor = NONTRIVIAL_FLOOR
    tol_desc = max(ctx.tol, _residual_floor(ctx.mesh, bound) / (1.0 + lam))
    v, it, _, ok = _monotone_core(
        ctx.mesh,
        ctx.nonlin.g,
        lam,
        K_shift,
        sup_f.values,
        tol_desc,
        budget,
        direction="decreasing",
        stop_below=floor,
    )
    if float(np.max(np.abs(v))) < floor:
        return None
    cfg = ctx.config_scaled(lam, float(np.max(np.abs(v))))
    try:
        rep = monotone_iterate(cfg, ctx.nonlin, Field(ctx.mesh, v), sup_bound=bound)
    except NumericalError:
        return None
    return rep if rep.converged and rep.sup_v > floor else None


def _probe_solvable(ctx: SweepContext, lam: float) -> SolveReport | None:
    """Deterministic solvability probe: Newton from two fixed scaled
    eigenfunction starts, then the monotone fallback from the dominating
    super-solution (the decisive route when alpha is known)."""
    small = Field(ctx.mesh, (ctx.eig.value / lam) * ctx.eig.phi.values)
    large = Field(ctx.mesh, 0.75 * ctx.blowup * ctx.eig.phi.values)
    for v0 in (small, large):
        rep = newton_solve(ctx.config_scaled(lam, 2.0 * v0.sup), ctx.nonlin, v0)
        if (
            rep.converged
            and NONTRIVIAL_FLOOR < rep.sup_v <= ctx.blowup
            and np.min(rep.v.values) > -1e-8 * rep.sup_v
        ):
            return rep
    if ctx.transform.alpha is not None and ctx.q < 3.0:
        rep = _maximal_solve(ctx, lam)
        if rep is not None and rep.sup_v <= ctx.blowup:
            return rep
    return None


def find_lambda_star(
    q: float,
    theta: ThetaSpec,
    mesh: DomainMesh,
    bracket: tuple[float, float],
    rel_width: float = 1e-3,
    ctx: SweepContext | None = None,
) -> float:
    """Bisection on solvability for q in (1,3): the fold value below which
    no positive solution exists.

    The bracket must fail at its lower end and succeed at its upper end,
    with the probe of ``_probe_solvable`` (Newton from fixed warm starts
    plus the monotone fallback, all within the blow-up floor)."""
    if not 1.0 < q < 3.0:
        raise ValueError("the fold search applies to q in (1,3)")
    ctx = ctx or SweepContext(theta=theta, mesh=mesh, q=q)
    lo, hi = map(float, bracket)
    if _probe_solvable(ctx, lo) is not None:
        raise ValueError(f"bracket invalid: solvable already at lambda={lo:g}")
    if _probe_solvable(ctx, hi) is None:
        raise ValueError(f"bracket invalid: not solvable at lambda={hi:g}")
    while hi - lo > rel_width * 0.5 * (hi + lo):
        mid = 0.5 * (lo + hi)
        if _probe_solvable(ctx, mid) is not None:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def two_positive_roots(
    q: float,
    lam: float,
    theta: ThetaSpec,
    mesh: DomainMesh,
    ctx: SweepContext | None = None,
) -> tuple[SolveReport, SolveReport]:
    """The two ordered positive solutions above the fold: the maximal one
    by the dominated monotone iteration, the minimal one by Newton from
    small scaled starts, polished and distinct."""
    ctx = ctx or SweepContext(theta=theta, mesh=mesh, q=q)
    big = _maximal_solve(ctx, lam)
    if big is None:
        raise NumericalError(f"no maximal solution found at lambda={lam:g}")
    cfg = ctx.config(lam)
    base = ctx.eig.value / lam
    for c in (1.0, 0.5, 2.0, 0.25, 4.0):
        v0 = Field(ctx.mesh, c * base * ctx.eig.phi.values)
        rep = newton_solve(cfg, ctx.nonlin, v0)
        if (
            rep.converged
            and NONTRIVIAL_FLOOR < rep.sup_v <= 0.9 * big.sup_v
            and np.min(rep.v.values) > -1e-8 * rep.sup_v
        ):
            return rep, big
    raise NumericalError(f"could not isolate the minimal solution at lambda={lam:g}")


# ---------------------------------------------------------------------------
# q = 3: bifurcation from infinity


def bifurcation_from_infinity(
    theta: ThetaSpec,
    mesh: DomainMesh,
    q: float = 3.0,
    ctx: SweepContext | None = None,
    offsets: tuple[float, ...] = (0.5, 0.32, 0.2, 0.13, 0.08, 0.05, 0.032, 0.02, 0.013, 0.008, 0.005),
    keep_reports: bool = False,
) -> ThresholdReport:
    """Descend lambda toward the predicted threshold (alpha^2/4) lam_1,
    recording 1/sup(v); linear extrapolation of 1/sup(v) against lambda
    to zero gives the empirical threshold."""
    if q != 3.0:
        raise ValueError("bifurcation from infinity applies to q = 3")
    if theta.alpha is None:
        raise RefusalError(
            f"{theta.name} has no quadratic-growth constant alpha; "
            "the q = 3 threshold is undefined"
        )
    ctx = ctx or SweepContext(theta=theta, mesh=mesh, q=3.0)
    predicted = 0.25 * theta.alpha**2 * ctx.eig.value

    lams, sups = [], []
    kept: list[SolveReport] = []
    warm = None
    for d in offsets:
        lam = predicted * (1.0 + d)
        if warm is None:
            rep = _newton_cold(ctx, lam)
        else:
            rep = newton_solve(ctx.config_scaled(lam, 4.0 * warm.sup), ctx.nonlin, warm)
        ok = rep is not None and rep.converged and rep.sup_v > NONTRIVIAL_FLOOR
        if not ok:
            break
        lams.append(lam)
        sups.append(rep.sup_v)
        if keep_reports:
            kept.append(rep)
        warm = rep.v
        if rep.sup_v > ctx.blowup:
            break
    if len(lams) < 4:
        raise NumericalError("branch lost before enough descent points were collected")
    monotone_ok = bool(np.all(np.diff(sups) > 0.0))
    # fit lambda = a + b / sup on the last points; a is the threshold
    k = min(5, len(lams))
    x = 1.0 / np.asarray(sups[-k:])
    y = np.asarray(lams[-k:])
    b, a = np.polyfit(x, y, 1)
    empirical = float(a)
    return ThresholdReport(
        empirical=empirical,
        predicted=float(predicted),
        rel_error=abs(empirical - predicted) / predicted,
        lams=lams,
        sups=sups,
        monotone_ok=monotone_ok,
        reports=kept if keep_reports else None,
    )


# ---------------------------------------------------------------------------
# q > 3: small-lambda blow-up


def continue_branch(
    ctx: SweepContext,
    lam_values,
    v_start: Field | None = None,
) -> list[SolveReport | None]:
    """Warm-started Newton walk along lam_values (any order)."""
    out: list[SolveReport | None] = []
    warm = v_start
    for lam in lam_values:
        if warm is None:
            rep = _newton_cold(ctx, lam)
        else:
            rep = newton_solve(ctx.config_scaled(lam, 4.0 * warm.sup), ctx.nonlin, warm)
        ok = rep is not None and rep.converged and rep.sup_v > NONTRIVIAL_FLOOR
        out.append(rep if ok else None)
        warm = rep.v if ok else warm
    return out


def small_lambda_blowup(
    theta: ThetaSpec,
    mesh: DomainMesh,
    q: float,
    lam_start: float = 1.0,
    lam_end: float = 0.1,
    n_points: int = 9,
    ctx: SweepContext | None = None,
    keep_reports: bool = False,
) -> TrendReport:
    """Continue the positive branch as lambda decreases through a decade;
    sup(u) must grow along the descent and the measured growth exponent
    d log sup_v / d log lambda is reported."""
    if q <= 3.0:
        raise ValueError("the small-lambda blow-up trend applies to q > 3")
    ctx = ctx or SweepContext(theta=theta, mesh=mesh, q=q)
    lams = list(np.geomspace(lam_start, lam_end, n_points))
    reports = continue_branch(ctx, lams)
    got = [(lam, r) for lam, r in zip(lams, reports) if r is not None]
    truncated = len(got) < len(lams) or any(r.sup_v > ctx.blowup for _, r in got)
    if len(got) < 3:
        raise NumericalError("branch lost too early to measure the trend")
    lam_ok = [lam for lam, _ in got]
    sup_v = [r.sup_v for _, r in got]
    sup_u = [r.sup_u for _, r in got]
    kept = [r for _, r in got]
    descending = lam_start > lam_end
    seq = sup_u if descending else sup_u[::-1]
    monotone_ok = bool(np.all(np.diff(seq) > 0.0))
    slope = float(np.polyfit(np.log(lam_ok), np.log(sup_v), 1)[0])
    return TrendReport(
        lams=lam_ok,
        sup_v=sup_v,
        sup_u=sup_u,
        monotone_ok=monotone_ok,
        growth_exponent=slope,
        truncated=truncated,
        reports=kept if keep_reports else None,
    )
