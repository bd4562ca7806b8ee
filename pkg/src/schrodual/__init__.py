"""Dual-transform machinery for generalized Schrodinger boundary value problems.

The quasilinear problem

    -div(theta(u) grad u) + (1/2) theta'(u) |grad u|^2 = lambda |u|^(q-1) u

on a bounded domain with zero boundary values is mapped, through the
change of variable u = f(v) with f'(s) = theta(f(s))^(-1/2), onto the
semilinear dual problem -Lap v = lambda g(v).  This package builds the
transform, solves the dual problem by sub/super-solution monotone
iteration and damped Newton, recovers u, and maps the solution structure
(existence thresholds, folds, blow-up, nonexistence) across exponent
regimes.
"""

from .continuation import (
    BranchPoint,
    SweepContext,
    bifurcation_from_infinity,
    continue_branch,
    find_lambda_star,
    find_threshold_q1,
    small_lambda_blowup,
    stability_index,
    sweep,
    two_positive_roots,
)
from .dual_transform import DualTransform, build_transform, upsilon
from .errors import (
    CertificateError,
    MonotonicityError,
    NumericalError,
    RefusalError,
    TransformRangeError,
)
from .mesh import (
    DomainMesh,
    EigenPair,
    Field,
    laplacian_apply,
    principal_eigenpair,
    solve_shifted_poisson,
    torsion_function,
)
from .nonlinearity import (
    Nonlinearity,
    Regime,
    classify_regime,
    classify_slopes,
    critical_exponent,
    pohozaev_scan,
    sign_guard,
)
from .solver import (
    SolveConfig,
    SolveReport,
    apriori_bound_check,
    energy,
    energy_gradient,
    make_subsolution,
    make_supersolution,
    monotone_iterate,
    newton_solve,
    recover_u,
    recover_v,
    solve_auxiliary_psi,
    solve_minimal,
)
from .theta import HypothesisReport, ThetaSpec, catalog, get_spec, validate_hypotheses

__version__ = "0.1.0"
