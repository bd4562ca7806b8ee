"""Command-line surface: regime dispatch, CSV/report emission, config.

Subcommands: validate-theta, transform, solve, sweep, threshold,
pohozaev-check, regimes.  Exit codes: 0 success, 1 refusal (the requested
parameters provably admit no solution), 2 numerical failure.

Configuration is a flat key=value file overridden by flags; every file
output is deterministic for a fixed config (numbers carry 17 significant
digits, no timestamps) and is listed in a manifest with checksums.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import continuation, solver
from .continuation import SweepContext
from .dual_transform import build_transform
from .errors import NumericalError, RefusalError, TransformRangeError
from .mesh import DomainMesh
from .nonlinearity import (
    Nonlinearity,
    classify_regime,
    critical_exponent,
    pohozaev_scan,
    sign_guard,
)
from .theta import get_spec, validate_hypotheses

__all__ = ["RunConfig", "run", "main", "regimes_text"]

logger = logging.getLogger(__name__)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunConfig:
    """Merged flat configuration of one CLI invocation."""

    command: str
    keys: dict

    def canonical(self) -> str:
        parts = [f"command={self.command}"]
        for k in sorted(self.keys):
            v = self.keys[k]
            if v is None:
                continue
            parts.append(f"{k}={_fmt(v)}")
        return "\n".join(parts) + "\n"

    @classmethod
    def parse_canonical(cls, text: str) -> "RunConfig":
        command, keys = "", {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            if k == "command":
                command = v
            else:
                keys[k] = v
        return cls(command=command, keys=keys)


def _load_config_file(path: str) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line {line!r}")
        k, _, v = line.partition("=")
        out[k.strip().replace("-", "_")] = v.strip()
    return out


_FLOAT_KEYS = {"q", "lam", "pad", "tol", "s_max", "s_hi", "p", "lam_lo", "lam_hi",
               "lam_start", "lam_end", "transform_tol"}
_INT_KEYS = {"n", "dim", "N", "samples", "count", "points"}
_BOOL_KEYS = {"parallel", "write_fields"}


def _coerce(key: str, val):
    if val is None or not isinstance(val, str):
        return val
    if key in _FLOAT_KEYS:
        return float(val)
    if key in _INT_KEYS:
        return int(val)
    if key in _BOOL_KEYS:
        return val.lower() in ("1", "true", "yes")
    return val


def _merge(args: argparse.Namespace, defaults: dict) -> RunConfig:
    """Defaults < config file < explicit flags."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        for k, v in _load_config_file(args.config).items():
            merged[k] = _coerce(k, v)
    for k in defaults:
        v = getattr(args, k, None)
        if v is not None:
            merged[k] = v
    missing = [k for k, v in merged.items() if v is REQUIRED]
    if missing:
        raise ValueError(f"missing required option(s): {', '.join(missing)}")
    return RunConfig(command=args.command, keys=merged)


REQUIRED = object()


def _mesh_from(cfg: RunConfig) -> DomainMesh:
    k = cfg.keys
    bounds = tuple(float(x) for x in str(k.get("bounds", "0,1")).split(","))
    if k.get("dim", 1) == 1:
        return DomainMesh.interval(bounds[0], bounds[1], k.get("n", 400), pad=k.get("pad", 0.1))
    if len(bounds) == 2:
        bounds = bounds * 2
    return DomainMesh.rectangle(bounds[:2], bounds[2:], k.get("n", 40), pad=k.get("pad", 0.1))


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.keys.get("output_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(cfg: RunConfig, outdir: Path, files: list[Path]) -> None:
    data = {
        "config_sha256": hashlib.sha256(cfg.canonical().encode()).hexdigest(),
        "config": cfg.canonical(),
        "files": {p.name: _sha256(p) for p in sorted(files)},
    }
    (outdir / "manifest.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def regimes_text(q: float, N: int, theta_name: str = "theta1", mesh: DomainMesh | None = None) -> str:
    """Human-readable regime classification for this exponent."""
    theta = get_spec(theta_name)
    regime = classify_regime(q, N)
    qc = critical_exponent(N)
    lines = [f"q = {q:g}   regime: {regime.value}   (dimension N = {N}, critical q = {qc:g})"]
    lam1 = None
    if mesh is not None:
        from .mesh import principal_eigenpair

        lam1 = principal_eigenpair(mesh).value
    a = theta.alpha

    def num(x):
        return f" = {x:.6g}" if x is not None else ""

    if q < 1:
        lines += [
            "unique positive solution for every lambda > 0; |u|_inf -> 0 as lambda -> 0",
            "and |u|_inf -> inf as lambda -> inf",
            "subcommands: solve, sweep",
        ]
    elif q == 1:
        thr = theta(0.0) * lam1 if lam1 is not None else None
        lines += [
            f"positive solution iff lambda > theta(0)*lambda_1{num(thr)}",
            "subcommands: solve, sweep, threshold",
        ]
    elif q < 3:
        lines += [
            "fold structure: no positive solution below lambda_*, at least two",
            "ordered positive solutions above it",
            "subcommands: solve, sweep, threshold",
        ]
    elif q == 3:
        thr = 0.25 * a * a * lam1 if (a is not None and lam1 is not None) else None
        lines += [
            f"positive solution iff lambda > (alpha^2/4)*lambda_1{num(thr)};",
            "|u|_inf -> inf as lambda descends to the threshold",
            "subcommands: solve, sweep, threshold",
        ]
    elif q < qc:
        lines += [
            "positive solution for every lambda > 0; |u|_inf -> inf as lambda -> 0",
            "subcommands: solve, sweep",
        ]
    else:
        lines += [
            "no positive solution (starshaped domain): the scalar nonexistence",
            "test applies",
            "subcommands: pohozaev-check",
        ]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# subcommand implementations


def _cmd_validate_theta(cfg: RunConfig) -> int:
    k = cfg.keys
    spec = get_spec(k["theta"])
    rep = validate_hypotheses(spec, s_max=k.get("s_max", 1e4), samples=k.get("samples", 256))
    print(f"coefficient {rep.name} on [{rep.checked_range[0]:g}, {rep.checked_range[1]:g}]")
    print(f"base (>=1, even): {'ok' if rep.base_ok else 'FAIL'}")
    print(f"(H1) monotone:    {'ok' if rep.h1_ok else 'FAIL'}")
    print(f"(H2) ratio mono:  {'ok' if rep.h2_ok else 'FAIL'}")
    print(f"(H3) limit:       {'ok' if rep.h3_ok else 'FAIL'}  alpha ~ {rep.alpha_estimate:.6g}")
    s, m = rep.worst_violation
    print(f"worst violation {m:.3e} at s = {s:.6g}")
    return 0


def _cmd_transform(cfg: RunConfig) -> int:
    k = cfg.keys
    theta = get_spec(k["theta"])
    t = build_transform(theta, s_max=k.get("s_max", 50.0), tol=k.get("transform_tol", 1e-8))
    count = k.get("count", 512)
    s = np.concatenate([[0.0], np.geomspace(t.table_s_max * 1e-8, k.get("s_max", 50.0), count - 1)])
    outdir = _outdir(cfg)
    path = outdir / "transform.csv"
    write_csv(
        path,
        ["s", "f", "f_prime", "f_second"],
        zip(s, t.f(s), t.f_prime(s), t.f_second(s)),
    )
    _manifest(cfg, outdir, [path])
    print(f"table extent {t.table_s_max:.6g}, defining-equation residual {t.achieved_residual:.3e}")
    print(f"wrote {path}")
    return 0


def _field_rows(field):
    coords = field.mesh.coords
    for i in range(field.mesh.size):
        yield (*coords[i], field.values[i])


def _cmd_solve(cfg: RunConfig) -> int:
    k = cfg.keys
    lam, q = k["lam"], k["q"]
    sign_guard(lam)
    theta = get_spec(k["theta"])
    mesh = _mesh_from(cfg)
    ctx = SweepContext(theta=theta, mesh=mesh, q=q, tol=k.get("tol", 1e-9))
    if q <= 1.0:
        rep = solver.solve_minimal(ctx.config(lam), ctx.nonlin, ctx.eig, ctx.torsion)
    elif q < 3.0:
        rep = continuation._solve_minimal_branch(ctx, lam, None)
        if rep is None:
            raise RefusalError(
                f"no positive solution found at lambda={lam:g} for q={q:g}: "
                "below the fold no positive solution exists"
            )
    else:
        rep = continuation._newton_cold(ctx, lam)
        if rep is None:
            raise NumericalError(f"Newton continuation failed at lambda={lam:g}")
    outdir = _outdir(cfg)
    files = []
    report_path = outdir / "report.txt"
    report_path.write_text(
        "\n".join(
            [
                f"lambda = {_fmt(rep.lam)}",
                f"q = {_fmt(rep.q)}",
                f"sup_v = {_fmt(rep.sup_v)}",
                f"sup_u = {_fmt(rep.sup_u)}",
                f"energy = {_fmt(rep.energy)}",
                f"residual_sup = {_fmt(rep.residual_sup)}",
                f"iterations = {rep.iterations}",
                f"converged = {_fmt(rep.converged)}",
                f"monotone_direction = {rep.monotone_direction}",
            ]
        )
        + "\n"
    )
    files.append(report_path)
    if k.get("write_fields", True):
        head = ["x", "value"] if mesh.dim == 1 else ["x", "y", "value"]
        pv = outdir / "v.csv"
        write_csv(pv, head, _field_rows(rep.v))
        files.append(pv)
        if rep.u is not None:
            pu = outdir / "u.csv"
            write_csv(pu, head, _field_rows(rep.u))
            files.append(pu)
    _manifest(cfg, outdir, files)
    print(report_path.read_text().rstrip())
    print(f"wrote {', '.join(str(f) for f in files)}")
    return 0


def _cmd_sweep(cfg: RunConfig) -> int:
    k = cfg.keys
    theta = get_spec(k["theta"])
    mesh = _mesh_from(cfg)
    lams = np.geomspace(k["lam_lo"], k["lam_hi"], k.get("points", 9))
    points = continuation.sweep(
        k["q"], lams, theta, mesh, parallel=k.get("parallel", False)
    )
    outdir = _outdir(cfg)
    path = outdir / "branch.csv"
    write_csv(
        path,
        ["lambda", "sup_v", "sup_u", "energy", "stability", "converged", "branch_id"],
        (
            (p.lam, p.sup_v, p.sup_u, p.energy, p.stability if p.stability is not None else 0,
             p.converged, p.branch_id)
            for p in points
        ),
    )
    _manifest(cfg, outdir, [path])
    n_ok = sum(p.converged for p in points)
    print(f"{n_ok}/{len(points)} points converged; wrote {path}")
    return 0


def _cmd_threshold(cfg: RunConfig) -> int:
    k = cfg.keys
    q = k["q"]
    theta = get_spec(k["theta"])
    mesh = _mesh_from(cfg)
    if q == 1.0:
        ctx = SweepContext(theta=theta, mesh=mesh, q=1.0)
        est = continuation.find_threshold_q1(theta, mesh, ctx=ctx)
        pred = theta(0.0) * ctx.eig.value
        print("estimate,predicted,relative_error")
        print(f"{_fmt(est)},{_fmt(pred)},{_fmt(abs(est - pred) / pred)}")
    elif 1.0 < q < 3.0:
        lo = k.get("lam_lo")
        hi = k.get("lam_hi")
        if lo is None or hi is None:
            raise ValueError("threshold for q in (1,3) needs lam-lo and lam-hi bracket")
        est = continuation.find_lambda_star(q, theta, mesh, (lo, hi))
        print("lambda_star")
        print(_fmt(est))
    elif q == 3.0:
        rep = continuation.bifurcation_from_infinity(theta, mesh)
        print("estimate,predicted,relative_error")
        print(f"{_fmt(rep.empirical)},{_fmt(rep.predicted)},{_fmt(rep.rel_error)}")
    else:
        raise ValueError("thresholds are defined for q = 1, q in (1,3), or q = 3")
    return 0


def _cmd_pohozaev(cfg: RunConfig) -> int:
    k = cfg.keys
    theta = get_spec(k["theta"])
    q, N = k["q"], k["N"]
    s_hi = k.get("s_hi", 1e4)
    t = build_transform(theta, s_max=max(10.0 * s_hi, 1e4))
    rep = pohozaev_scan(Nonlinearity(q=q, transform=t), N=N, s_hi=s_hi)
    outdir = _outdir(cfg)
    path = outdir / "pohozaev.csv"
    write_csv(path, ["s", "z", "ratio"], zip(rep.s, rep.z, rep.ratio))
    _manifest(cfg, outdir, [path])
    print(
        f"q = {q:g}, N = {N}, critical q = {rep.q_critical:g}; "
        f"min z = {rep.min_z:.6g}, max ratio = {rep.max_ratio:.6g} "
        f"(bounds: dimension {rep.dimension_bound:.6g}, exponent {rep.exponent_bound:.6g})"
    )
    verdict = "satisfied" if rep.nonexistence_certified else "not satisfied"
    print(f"nonexistence condition {verdict}")
    print(f"wrote {path}")
    return 0


def _cmd_regimes(cfg: RunConfig) -> int:
    k = cfg.keys
    print(regimes_text(k["q"], k.get("N", 3), k.get("theta", "theta1"), _mesh_from(cfg)))
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser, mesh: bool = True):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--output-dir", dest="output_dir", help="directory for emitted files")
    p.add_argument("--theta", help="coefficient name (theta1..theta5, theta2:p=<v>, unit)")
    if mesh:
        p.add_argument("--dim", type=int, choices=(1, 2))
        p.add_argument("--n", type=int, help="interior points per axis")
        p.add_argument("--bounds", help="a,b (1D) or ax,bx,ay,by (2D)")
        p.add_argument("--pad", type=float, help="padding fraction of the enclosing domain")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="schrodual",
        description="dual-transform solver for generalized Schrodinger boundary value problems",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-theta", help="check the structural hypotheses of a coefficient")
    _add_common(p, mesh=False)
    p.add_argument("--s-max", dest="s_max", type=float)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("transform", help="build and export the change of variable")
    _add_common(p, mesh=False)
    p.add_argument("--s-max", dest="s_max", type=float)
    p.add_argument("--transform-tol", dest="transform_tol", type=float)
    p.add_argument("--count", type=int)

    p = sub.add_parser("solve", help="solve at one lambda with the regime-appropriate method")
    _add_common(p)
    p.add_argument("--q", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("sweep", help="bifurcation-diagram sweep over lambda")
    _add_common(p)
    p.add_argument("--q", type=float)
    p.add_argument("--lambda-lo", dest="lam_lo", type=float)
    p.add_argument("--lambda-hi", dest="lam_hi", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--parallel", action="store_const", const=True)

    p = sub.add_parser("threshold", help="bisect/extrapolate the existence threshold")
    _add_common(p)
    p.add_argument("--q", type=float)
    p.add_argument("--lambda-lo", dest="lam_lo", type=float)
    p.add_argument("--lambda-hi", dest="lam_hi", type=float)

    p = sub.add_parser("pohozaev-check", help="scalar nonexistence scan for supercritical q")
    _add_common(p, mesh=False)
    p.add_argument("--q", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--s-hi", dest="s_hi", type=float)

    p = sub.add_parser("regimes", help="print the solution structure for an exponent")
    _add_common(p)
    p.add_argument("--q", type=float)
    p.add_argument("--N", type=int)
    return ap


_DEFAULTS: dict[str, dict] = {
    "validate-theta": {"theta": REQUIRED, "s_max": 1e4, "samples": 256, "output_dir": "out"},
    "transform": {"theta": REQUIRED, "s_max": 50.0, "transform_tol": 1e-8, "count": 512,
                  "output_dir": "out"},
    "solve": {"theta": REQUIRED, "q": REQUIRED, "lam": REQUIRED, "dim": 1, "n": 400,
              "bounds": "0,1", "pad": 0.1, "tol": 1e-9, "output_dir": "out"},
    "sweep": {"theta": REQUIRED, "q": REQUIRED, "lam_lo": REQUIRED, "lam_hi": REQUIRED,
              "points": 9, "dim": 1, "n": 400, "bounds": "0,1", "pad": 0.1,
              "parallel": False, "output_dir": "out"},
    "threshold": {"theta": REQUIRED, "q": REQUIRED, "lam_lo": None, "lam_hi": None,
                  "dim": 1, "n": 400, "bounds": "0,1", "pad": 0.1, "output_dir": "out"},
    "pohozaev-check": {"theta": REQUIRED, "q": REQUIRED, "N": 3, "s_hi": 1e4,
                       "output_dir": "out"},
    "regimes": {"theta": "theta1", "q": REQUIRED, "N": 3, "dim": 1, "n": 100,
                "bounds": "0,1", "pad": 0.1, "output_dir": "out"},
}

_HANDLERS = {
    "validate-theta": _cmd_validate_theta,
    "transform": _cmd_transform,
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "threshold": _cmd_threshold,
    "pohozaev-check": _cmd_pohozaev,
    "regimes": _cmd_regimes,
}


def run(argv: list[str]) -> int:
    """Parse and dispatch; 0 success, 1 refusal, 2 numerical failure."""
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = _merge(args, _DEFAULTS[args.command])
        return _HANDLERS[args.command](cfg)
    except RefusalError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, TransformRangeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run(sys.argv[1:]))
