"""Finite-difference Dirichlet discretization on intervals and rectangles.

Second-order stencils realize -Lap with implicit zero boundary values.
The padded domain D strictly containing the closure of Omega hosts the
torsion function e (solution of -Lap e = 1 on D, e = 0 on its boundary),
whose extremes e_L, e_M over the closure of Omega feed super-solutions.
Padding is rounded up to whole cells so the two grids share nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.linalg import eigvalsh_tridiagonal
from scipy.sparse.linalg import cg, splu

from .errors import NumericalError

__all__ = [
    "DomainMesh",
    "Field",
    "EigenPair",
    "TorsionResult",
    "laplacian_apply",
    "solve_shifted_poisson",
    "principal_eigenpair",
    "torsion_function",
]


class DomainMesh:
    """Interior-node grid of an interval (dim 1) or rectangle (dim 2).

    ``n`` interior points per axis, spacing h = side/(n+1).  ``pad`` is the
    fraction of each side by which the enclosing domain D extends past
    Omega (at least one whole cell)."""

    def __init__(self, bounds, n: int, pad: float = 0.1):
        bounds = tuple(tuple(map(float, b)) for b in bounds)
        if len(bounds) not in (1, 2):
            raise ValueError("only intervals and rectangles are supported")
        for a, b in bounds:
            if not b > a:
                raise ValueError(f"degenerate extent ({a}, {b})")
        if n < 3:
            raise ValueError("need at least 3 interior points per axis")
        if pad < 0:
            raise ValueError("pad must be nonnegative")
        self.bounds = bounds
        self.dim = len(bounds)
        self.n = int(n)
        self.pad = float(pad)
        self.h = tuple((b - a) / (n + 1) for a, b in bounds)

    @classmethod
    def interval(cls, a: float, b: float, n: int, pad: float = 0.1) -> "DomainMesh":
        return cls(((a, b),), n, pad)

    @classmethod
    def rectangle(cls, bounds_x, bounds_y, n: int, pad: float = 0.1) -> "DomainMesh":
        return cls((tuple(bounds_x), tuple(bounds_y)), n, pad)

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def weight(self) -> float:
        """Quadrature weight of one interior node, h^dim."""
        return float(np.prod(self.h))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(
            a + h * np.arange(1, self.n + 1) for (a, _), h in zip(self.bounds, self.h)
        )

    @cached_property
    def coords(self) -> np.ndarray:
        """Interior node coordinates, shape (size, dim); x varies fastest."""
        if self.dim == 1:
            return self.axes[0][:, None]
        X, Y = np.meshgrid(self.axes[0], self.axes[1], indexing="xy")
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def neg_laplacian(self) -> sparse.csr_matrix:
        """-Lap as a positive definite sparse operator (Dirichlet zero)."""

        def second_diff(n, h):
            return (
                sparse.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n)) / h**2
            )

        if self.dim == 1:
            return second_diff(self.n, self.h[0]).tocsr()
        Tx = second_diff(self.n, self.h[0])
        Ty = second_diff(self.n, self.h[1])
        eye = sparse.identity(self.n)
        return (sparse.kron(eye, Tx) + sparse.kron(Ty, eye)).tocsr()

    def padded(self) -> tuple["DomainMesh", tuple[int, ...]]:
        """The enclosing mesh for D and the cell offsets of Omega within it."""
        if self.pad <= 0:
            raise ValueError("pad must be positive to build the enclosing domain")
        cells, new_bounds = [], []
        for (a, b), h in zip(self.bounds, self.h):
            m = max(1, int(np.ceil(self.pad * (b - a) / h - 1e-12)))
            cells.append(m)
            new_bounds.append((a - m * h, b + m * h))
        d_mesh = DomainMesh(tuple(new_bounds), self.n + 2 * cells[0], pad=0.0)
        if self.dim == 2 and cells[0] != cells[1]:
            # unequal sides can round to different cell counts; keep the
            # larger so both axes stay aligned with the inner grid
            m = max(cells)
            cells = [m, m]
            new_bounds = [(a - m * h, b + m * h) for (a, b), h in zip(self.bounds, self.h)]
            d_mesh = DomainMesh(tuple(new_bounds), self.n + 2 * m, pad=0.0)
        return d_mesh, tuple(cells)

    def __repr__(self):
        return f"DomainMesh(dim={self.dim}, n={self.n}, bounds={self.bounds}, pad={self.pad})"


@dataclass(frozen=True)
class Field:
    """Values at the interior nodes of a mesh; the boundary is implicitly 0."""

    mesh: DomainMesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.mesh.size,):
            raise ValueError(f"expected {self.mesh.size} values, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, mesh: DomainMesh) -> "Field":
        return cls(mesh, np.zeros(mesh.size))

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def grid(self) -> np.ndarray:
        """Values reshaped to (n,) in 1D or (ny, nx) in 2D."""
        if self.mesh.dim == 1:
            return self.values
        return self.values.reshape(self.mesh.n, self.mesh.n)


@dataclass(frozen=True)
class EigenPair:
    """Dirichlet eigenpair, eigenfunction normalized to sup-norm 1."""

    index: int
    value: float
    phi: Field


@dataclass(frozen=True)
class TorsionResult:
    e_d: Field  # on the enclosing mesh
    d_mesh: DomainMesh
    e_omega: Field  # restricted to the interior nodes of Omega
    e_L: float  # min over the closure of Omega
    e_M: float  # max over the closure of Omega
    pad_cells: tuple[int, ...]


def _check_same_mesh(mesh: DomainMesh, v: Field):
    if v.mesh is not mesh and (
        v.mesh.dim != mesh.dim or v.mesh.n != mesh.n or v.mesh.bounds != mesh.bounds
    ):
        raise ValueError("field lives on a different mesh")


def laplacian_apply(mesh: DomainMesh, v: Field) -> Field:
    """-Lap_h v (positive sign convention)."""
    _check_same_mesh(mesh, v)
    return Field(mesh, mesh.neg_laplacian @ v.values)


def solve_shifted_poisson(
    mesh: DomainMesh,
    rhs: Field,
    K: float = 0.0,
    x0: np.ndarray | None = None,
    maxiter: int | None = None,
) -> Field:
    """Solve (-Lap_h + K) w = rhs by conjugate gradients.

    The operator is symmetric positive definite for K >= 0.  Terminates
    with ||residual||_2 <= 1e-10 ||rhs||_2 (solved tighter internally);
    by the discrete maximum principle nonnegative rhs gives nonnegative w."""
    _check_same_mesh(mesh, rhs)
    if K < 0:
        raise ValueError("shift K must be nonnegative")
    b = rhs.values
    if not np.any(b):
        return Field(mesh, np.zeros_like(b))
    A = mesh.neg_laplacian + K * sparse.identity(mesh.size, format="csr")
    maxiter = maxiter or 40 * mesh.size
    x, info = cg(A, b, x0=x0, rtol=1e-13, atol=0.0, maxiter=maxiter)
    res = float(np.linalg.norm(A @ x - b))
    if res > 1e-10 * np.linalg.norm(b):
        raise NumericalError(
            f"conjugate gradients stalled (info={info}); residual {res:.3e}"
        )
    return Field(mesh, x)


def principal_eigenpair(mesh: DomainMesh, k: int = 1, tol: float = 1e-10) -> EigenPair:
    """k-th Dirichlet eigenpair by inverse power iteration with deflation.

    Eigenvalue converged to relative tolerance ``tol``; the first
    eigenfunction is sign-fixed positive.  Only small k is supported."""
    if not 1 <= k <= 10:
        raise ValueError("only k in 1..10 is supported")
    A = mesh.neg_laplacian.tocsc()
    lu = splu(A)
    found: list[np.ndarray] = []
    pair = None
    for j in range(1, k + 1):
        # deterministic seed with a bias toward the j-th mode
        if mesh.dim == 1:
            xh = (mesh.axes[0] - mesh.bounds[0][0]) / (mesh.bounds[0][1] - mesh.bounds[0][0])
            v = np.sin(j * np.pi * xh)
        else:
            c = mesh.coords
            xh = (c[:, 0] - mesh.bounds[0][0]) / (mesh.bounds[0][1] - mesh.bounds[0][0])
            yh = (c[:, 1] - mesh.bounds[1][0]) / (mesh.bounds[1][1] - mesh.bounds[1][0])
            v = np.sin(j * np.pi * xh) * np.sin(np.pi * yh) + 0.1 * np.sin(np.pi * xh) * np.sin(
                j * np.pi * yh
            )
        for u in found:
            v -= (u @ v) * u
        v /= np.linalg.norm(v)
        lam_old = np.inf
        for _ in range(5000):
            w = lu.solve(v)
            for u in found:
                w -= (u @ w) * u
            lam = float((w @ v) / (w @ w))
            v = w / np.linalg.norm(w)
            if abs(lam - lam_old) <= tol * abs(lam):
                break
            lam_old = lam
        else:
            raise NumericalError(f"inverse iteration for eigenpair {j} did not converge")
        found.append(v.copy())
        phi = v / np.max(np.abs(v))
        if phi[np.argmax(np.abs(phi))] < 0:
            phi = -phi
        pair = EigenPair(index=j, value=lam, phi=Field(mesh, phi))
    if pair.index == 1 and not np.all(pair.phi.values > 0):
        raise NumericalError("principal eigenfunction is not positive")
    return pair


def smallest_eigenvalue(matrix: sparse.spmatrix, tridiagonal: bool = False) -> float:
    """Smallest eigenvalue of a symmetric sparse matrix (used for stability
    indices of linearizations)."""
    if tridiagonal:
        d = matrix.diagonal()
        e = matrix.diagonal(-1)
        return float(eigvalsh_tridiagonal(d, e, select="i", select_range=(0, 0))[0])
    n = matrix.shape[0]
    if n <= 3600:
        return float(np.linalg.eigvalsh(matrix.toarray())[0])
    from scipy.sparse.linalg import eigsh

    val = eigsh(matrix.tocsc(), k=1, which="SA", return_eigenvectors=False, maxiter=20000)
    return float(val[0])


def torsion_function(mesh: DomainMesh) -> TorsionResult:
    """Solve -Lap e = 1 on the padded domain D and restrict to Omega.

    e_L > 0 because the closure of Omega is interior to D."""
    d_mesh, cells = mesh.padded()
    ones = Field(d_mesh, np.ones(d_mesh.size))
    e_d = solve_shifted_poisson(d_mesh, ones, K=0.0)
    if mesh.dim == 1:
        m = cells[0]
        full = e_d.values
        closure = full[m - 1 : m + mesh.n + 1]
        inner = full[m : m + mesh.n]
    else:
        m = cells[0]
        full = e_d.grid()
        closure = full[m - 1 : m + mesh.n + 1, m - 1 : m + mesh.n + 1].ravel()
        inner = full[m : m + mesh.n, m : m + mesh.n].ravel()
    return TorsionResult(
        e_d=e_d,
        d_mesh=d_mesh,
        e_omega=Field(mesh, inner.copy()),
        e_L=float(np.min(closure)),
        e_M=float(np.max(closure)),
        pad_cells=cells,
    )
