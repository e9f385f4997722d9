"""Dense discretizations of -d2/dx2 + q(x) d/dx + V(x) and their eigenproblems.

Boundary conditions are eliminated into the matrix so that it acts on full
grid sample vectors:

* Robin ``f' + w f = 0``: the ghost value f(-h) is solved from the centered
  first-derivative form of the condition and substituted into the boundary
  row (second-order accurate).
* Dirichlet: the boundary row and column are zeroed and the constrained
  index recorded; eigenproblems are solved on the active submatrix and the
  eigenvectors re-embedded with exact zeros.

Eigenproblems go through one code path: a general dense (QR-algorithm
class) eigensolver, even when the matrix happens to be Hermitian.  Reality
of the spectrum is then a measurable property of the discretization, not an
input assumption.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import SolverFailure
from .grid import Grid, GridFunction, grid_function, inner_product, norm

__all__ = [
    "BoundaryCondition",
    "DiscreteOperator",
    "Spectrum",
    "assemble",
    "eigensolve",
    "adjoint",
    "apply",
    "residual",
    "operator_from_matrix",
    "write_spectrum_csv",
]


@dataclass(frozen=True)
class BoundaryCondition:
    """Dirichlet (f = 0) or Robin (f' + w f = 0) condition at one endpoint."""

    kind: str  # "dirichlet" | "robin"
    weight: complex | None = None

    def __post_init__(self):
        if self.kind not in ("dirichlet", "robin"):
            raise ValueError(f"unknown boundary condition kind {self.kind!r}")
        if self.kind == "dirichlet" and self.weight is not None:
            raise ValueError("dirichlet condition carries no weight")
        if self.kind == "robin":
            if self.weight is None or not np.isfinite(complex(self.weight)):
                raise ValueError("robin condition needs a finite complex weight")

    @staticmethod
    def dirichlet() -> "BoundaryCondition":
        return BoundaryCondition("dirichlet")

    @staticmethod
    def robin(weight: complex) -> "BoundaryCondition":
        return BoundaryCondition("robin", complex(weight))

    @property
    def is_dirichlet(self) -> bool:
        return self.kind == "dirichlet"


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Dense matrix realization of a second-order expression plus BCs.

    `first_order_coeff` and `potential` are None for operators assembled
    directly from a matrix (spectral reconstructions); such operators do not
    support `adjoint`.
    """

    grid: Grid
    matrix: np.ndarray = field(repr=False)
    bc_left: BoundaryCondition | None
    bc_right: BoundaryCondition | None
    first_order_coeff: GridFunction | None
    potential: GridFunction | None

    @property
    def constrained(self) -> tuple[int, ...]:
        """Indices removed by Dirichlet elimination (empty for Robin/Robin)."""
        out = []
        if self.bc_left is not None and self.bc_left.is_dirichlet:
            out.append(0)
        if self.bc_right is not None and self.bc_right.is_dirichlet:
            out.append(self.grid.n_points - 1)
        return tuple(out)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenpairs ordered by ascending real part (imaginary part breaks ties).

    Eigenfunctions are unit-normalized in the quadrature inner product and
    phase-fixed: the sample of largest magnitude is positive real.
    """

    grid: Grid
    eigenvalues: np.ndarray = field(repr=False)
    eigenfunctions: tuple[GridFunction, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.eigenvalues)

    @property
    def pairs(self):
        return list(zip(self.eigenvalues, self.eigenfunctions))


def assemble(
    grid: Grid,
    first_order_coeff: GridFunction,
    potential: GridFunction,
    bc_left: BoundaryCondition,
    bc_right: BoundaryCondition,
) -> DiscreteOperator:
    """Discretize -f'' + q f' + V f with the given endpoint conditions."""
    for f in (first_order_coeff, potential):
        if f.grid != grid:
            raise ValueError("coefficient functions must live on the assembly grid")
    q = first_order_coeff.values
    V = potential.values
    n = grid.n_points
    h = grid.spacing
    M = np.zeros((n, n), dtype=complex)
    idx = np.arange(1, n - 1)
    M[idx, idx - 1] = -1.0 / h**2 - q[idx] / (2.0 * h)
    M[idx, idx] = 2.0 / h**2 + V[idx]
    M[idx, idx + 1] = -1.0 / h**2 + q[idx] / (2.0 * h)
    if bc_left.is_dirichlet:
        M[0, :] = 0.0
        M[:, 0] = 0.0
    else:
        w = bc_left.weight
        # ghost elimination: f(-h) = f(h) + 2 h w f(0)
        M[0, 0] = 2.0 / h**2 - 2.0 * w / h - q[0] * w + V[0]
        M[0, 1] = -2.0 / h**2
    if bc_right.is_dirichlet:
        M[-1, :] = 0.0
        M[:, -1] = 0.0
    else:
        w = bc_right.weight
        # ghost elimination: f(d+h) = f(d-h) - 2 h w f(d)
        M[-1, -1] = 2.0 / h**2 + 2.0 * w / h - q[-1] * w + V[-1]
        M[-1, -2] = -2.0 / h**2
    M.setflags(write=False)
    return DiscreteOperator(
        grid=grid,
        matrix=M,
        bc_left=bc_left,
        bc_right=bc_right,
        first_order_coeff=first_order_coeff,
        potential=potential,
    )


def operator_from_matrix(grid: Grid, matrix: np.ndarray) -> DiscreteOperator:
    """Wrap a dense matrix (e.g. a spectral reconstruction) as an operator."""
    M = np.asarray(matrix, dtype=complex)
    if M.shape != (grid.n_points, grid.n_points):
        raise ValueError("matrix shape does not match the grid")
    M = M.copy()
    M.setflags(write=False)
    return DiscreteOperator(
        grid=grid,
        matrix=M,
        bc_left=None,
        bc_right=None,
        first_order_coeff=None,
        potential=None,
    )


def eigensolve(op: DiscreteOperator, n_max: int) -> Spectrum:
    """Lowest n_max eigenpairs (by real part) of the dense discretization.

    n_max is capped at n_points/4: higher-index finite-difference eigenpairs
    are discretization garbage and are refused rather than returned.
    """
    n = op.grid.n_points
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if n_max > n // 4:
        raise ValueError(
            f"n_max={n_max} exceeds the discretization trust region n_points/4={n // 4}"
        )
    constrained = op.constrained
    active = np.setdiff1d(np.arange(n), np.array(constrained, dtype=int))
    M = op.matrix[np.ix_(active, active)]
    try:
        if np.all(M.imag == 0.0):
            ev, vecs = scipy.linalg.eig(M.real)
        else:
            ev, vecs = scipy.linalg.eig(M)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise SolverFailure(f"dense eigensolver failed: {exc}") from exc
    if len(ev) < n_max:
        raise SolverFailure(f"only {len(ev)} eigenpairs available, {n_max} requested")
    order = np.lexsort((ev.imag, ev.real))[:n_max]
    ev = np.asarray(ev, dtype=complex)[order]
    vecs = vecs[:, order]
    funcs = []
    for j in range(n_max):
        full = np.zeros(n, dtype=complex)
        full[active] = vecs[:, j]
        f = grid_function(op.grid, full)
        nrm = norm(f)
        if nrm == 0.0:
            raise SolverFailure("eigensolver returned a zero vector")
        v = f.values / nrm
        k = int(np.argmax(np.abs(v)))
        v = v * (np.conj(v[k]) / np.abs(v[k]))
        funcs.append(grid_function(op.grid, v))
    ev.setflags(write=False)
    return Spectrum(grid=op.grid, eigenvalues=ev, eigenfunctions=tuple(funcs))


def adjoint(op: DiscreteOperator) -> DiscreteOperator:
    """Formal adjoint for Schroedinger-form operators (zero first-order term).

    Conjugates the potential and all Robin weights; Dirichlet stays
    Dirichlet.  Operators with a first-order term are outside this contract.
    """
    if op.first_order_coeff is None or op.potential is None:
        raise ValueError("adjoint is only defined for assembled differential operators")
    if np.any(op.first_order_coeff.values != 0.0):
        raise ValueError("adjoint requires a vanishing first-order coefficient")

    def conj_bc(bc: BoundaryCondition) -> BoundaryCondition:
        if bc.is_dirichlet:
            return BoundaryCondition.dirichlet()
        return BoundaryCondition.robin(np.conj(bc.weight))

    return assemble(
        op.grid,
        op.first_order_coeff,
        grid_function(op.grid, np.conj(op.potential.values)),
        conj_bc(op.bc_left),
        conj_bc(op.bc_right),
    )


def apply(op: DiscreteOperator, f: GridFunction) -> GridFunction:
    """Matrix-vector action of the operator on full-grid samples."""
    if f.grid != op.grid:
        raise ValueError("grid mismatch between operator and function")
    return grid_function(op.grid, op.matrix @ f.values)


def residual(
    op: DiscreteOperator,
    f: GridFunction,
    eigenvalue: complex,
    boundary_exclude: int = 0,
) -> float:
    """Quadrature-norm eigen-residual ||op f - E f|| / ||f||.

    Boundary rows are included by default.  `boundary_exclude` drops that
    many samples at each end before taking the norm; operator-identity
    checks use 3 to remove one-sided-stencil contamination.
    """
    nf = norm(f)
    if nf == 0.0:
        raise ValueError("residual of the zero function is undefined")
    r = op.matrix @ f.values - complex(eigenvalue) * f.values
    w = op.grid.weights
    if boundary_exclude > 0:
        sl = slice(boundary_exclude, -boundary_exclude)
        r = r[sl]
        w = w[sl]
    return float(np.sqrt(np.sum(w * np.abs(r) ** 2)) / nf)


def write_spectrum_csv(spectrum: Spectrum, directory, prefix: str = "") -> list[str]:
    """Write `index,re_E,im_E` plus one eig_<index>.csv per eigenfunction.

    Returns the list of file names written (relative to `directory`).
    """
    import os

    from .grid import write_gridfunction_csv

    names = []
    table = f"{prefix}eigenvalues.csv"
    with open(os.path.join(directory, table), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,re_E,im_E\n")
        for k, E in enumerate(spectrum.eigenvalues):
            fh.write(f"{k},{E.real:.17g},{E.imag:.17g}\n")
    names.append(table)
    for k, f in enumerate(spectrum.eigenfunctions):
        name = f"{prefix}eig_{k}.csv"
        write_gridfunction_csv(f, os.path.join(directory, name))
        names.append(name)
    return names
