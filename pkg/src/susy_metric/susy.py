"""First-order intertwining transformations built from a factorization function.

Given a nodeless, essentially complex solution u of ``h u = alpha u`` (h the
Dirichlet operator -d2/dx2 + V0 with real V0, alpha real), the superpotential
is W = u'/u and the intertwiner is L = -d/dx + W with formal adjoint
L+ = d/dx + conj(W).  L maps Dirichlet eigenfunctions of h to eigenfunctions
of the partner H = -d2/dx2 + V, V = V0 - 2 W', subject to Robin conditions
with weights W(0), W(d); u itself spans the kernel of L.

`build_susy` validates admissibility (nodelessness, alpha real and away from
the spectrum of h, u actually solving the equation, W genuinely complex) and
rejects inadmissible candidates with typed errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlphaCollision, NodeDetected, NotASolution, RealSuperpotential
from .grid import Grid, GridFunction, differentiate, grid_function, norm
from .operators import (
    BoundaryCondition,
    DiscreteOperator,
    Spectrum,
    assemble,
)

__all__ = [
    "SusyData",
    "build_susy",
    "apply_L",
    "apply_Ldag",
    "partner_operator",
    "base_operator",
    "verify_intertwining",
    "make_exp_u",
    "make_wave_mix_u",
]


@dataclass(frozen=True, eq=False)
class SusyData:
    """Validated transformation data: u, W = u'/u, partner potential, weights.

    `im_w_ratio` records ||Im W|| / ||W|| so callers can judge how strongly
    complex the superpotential is (the admissibility check only requires it
    to be nonzero).
    """

    grid: Grid
    u: GridFunction
    alpha: float
    W: GridFunction
    V0: GridFunction
    V: GridFunction
    w_left: complex
    w_right: complex
    im_w_ratio: float


def base_operator(grid: Grid, V0: GridFunction) -> DiscreteOperator:
    """The Hermitian starting operator: -d2/dx2 + V0 with Dirichlet ends."""
    zero = grid_function(grid, np.zeros(grid.n_points))
    return assemble(grid, zero, V0, BoundaryCondition.dirichlet(), BoundaryCondition.dirichlet())


def build_susy(
    grid: Grid,
    V0: GridFunction,
    u: GridFunction,
    alpha: float,
    h_spectrum: Spectrum,
    nodeless_tol: float = 1e-8,
    collision_tol: float = 1e-3,
    residual_tol: float = 1e-3,
    check_collision: bool = True,
) -> SusyData:
    """Validate a candidate transformation function and derive W, V, weights.

    Raises
    ------
    NodeDetected
        min |u| < nodeless_tol * max |u| somewhere on the grid.
    AlphaCollision
        alpha within collision_tol * (1 + |alpha|) of an eigenvalue of h;
        the partner would be non-diagonalizable.  `check_collision=False`
        skips this guard (testing hook only).
    NotASolution
        relative residual of -u'' + V0 u - alpha u exceeds residual_tol.
    RealSuperpotential
        Im W vanishes identically; the partner would be Hermitian.
    """
    for f in (V0, u):
        if f.grid != grid:
            raise ValueError("V0 and u must live on the pipeline grid")
    alpha = float(alpha)

    absu = np.abs(u.values)
    if absu.min() < nodeless_tol * absu.max():
        raise NodeDetected(
            f"|u| dips to {absu.min():.3e} (max {absu.max():.3e}); "
            "transformation function must be nodeless"
        )

    if check_collision:
        gaps = np.abs(h_spectrum.eigenvalues.real - alpha)
        if gaps.size and gaps.min() < collision_tol * (1.0 + abs(alpha)):
            n0 = int(np.argmin(gaps))
            raise AlphaCollision(
                f"alpha={alpha:.6g} collides with E_{n0 + 1}="
                f"{h_spectrum.eigenvalues[n0].real:.6g} of the base operator "
                "(non-diagonalizable regime)"
            )

    # boundary rows of the Dirichlet matrix do not see u, so test the
    # differential expression directly with the endpoint-safe stencils
    hu = -differentiate(u, 2).values + V0.values * u.values
    res = np.sqrt(np.sum(grid.weights * np.abs(hu - alpha * u.values) ** 2)) / norm(u)
    if res > residual_tol * (1.0 + abs(alpha)):
        raise NotASolution(
            f"u fails h u = alpha u: relative residual {res:.3e} "
            f"exceeds {residual_tol:.1e} * (1 + |alpha|)"
        )

    W_vals = differentiate(u, 1).values / u.values
    W = grid_function(grid, W_vals)
    im_norm = np.sqrt(np.sum(grid.weights * W_vals.imag**2))
    w_norm = norm(W)
    if w_norm == 0.0 or im_norm < 1e-10 * w_norm:
        raise RealSuperpotential(
            "superpotential W = u'/u has no imaginary part; "
            "the partner operator would be Hermitian"
        )

    V = grid_function(grid, V0.values - 2.0 * differentiate(W, 1).values)
    return SusyData(
        grid=grid,
        u=u,
        alpha=alpha,
        W=W,
        V0=V0,
        V=V,
        w_left=complex(W_vals[0]),
        w_right=complex(W_vals[-1]),
        im_w_ratio=float(im_norm / w_norm),
    )


def apply_L(s: SusyData, psi: GridFunction) -> GridFunction:
    """L psi = -psi' + W psi (maps h-eigenfunctions to partner eigenfunctions)."""
    if psi.grid != s.grid:
        raise ValueError("grid mismatch")
    return grid_function(s.grid, -differentiate(psi, 1).values + s.W.values * psi.values)


def apply_Ldag(s: SusyData, xi: GridFunction) -> GridFunction:
    """L+ xi = xi' + conj(W) xi (maps adjoint-partner eigenfunctions back)."""
    if xi.grid != s.grid:
        raise ValueError("grid mismatch")
    return grid_function(
        s.grid, differentiate(xi, 1).values + np.conj(s.W.values) * xi.values
    )


def partner_operator(s: SusyData) -> DiscreteOperator:
    """H = -d2/dx2 + V with Robin weights W(0), W(d) at the endpoints."""
    zero = grid_function(s.grid, np.zeros(s.grid.n_points))
    return assemble(
        s.grid,
        zero,
        s.V,
        BoundaryCondition.robin(s.w_left),
        BoundaryCondition.robin(s.w_right),
    )


def verify_intertwining(
    s: SusyData,
    h_op: DiscreteOperator,
    H_op: DiscreteOperator,
    test_set: list[GridFunction],
    hdag_op: DiscreteOperator | None = None,
    adjoint_test_set: list[GridFunction] | None = None,
    boundary_exclude: int = 3,
) -> float:
    """Residual of L h = H L over a test set (and optionally h L+ = L+ H+).

    Returns the max over the test functions of ||L(h f) - H(L f)|| / ||f||,
    measured in the quadrature norm with `boundary_exclude` samples dropped
    at each end (one-sided stencils pollute pointwise residuals there at
    O(h), which would mask the interior O(h^2) convergence).
    """
    if not test_set:
        raise ValueError("empty test set")

    w = s.grid.weights
    sl = slice(boundary_exclude, -boundary_exclude) if boundary_exclude > 0 else slice(None)

    def masked_norm(values: np.ndarray) -> float:
        return float(np.sqrt(np.sum(w[sl] * np.abs(values[sl]) ** 2)))

    worst = 0.0
    for f in test_set:
        nf = norm(f)
        if nf == 0.0:
            continue
        lhs = apply_L(s, grid_function(s.grid, h_op.matrix @ f.values)).values
        rhs = H_op.matrix @ apply_L(s, f).values
        worst = max(worst, masked_norm(lhs - rhs) / nf)
    if hdag_op is not None and adjoint_test_set:
        for xi in adjoint_test_set:
            nxi = norm(xi)
            if nxi == 0.0:
                continue
            lhs = h_op.matrix @ apply_Ldag(s, xi).values
            rhs = apply_Ldag(s, grid_function(s.grid, hdag_op.matrix @ xi.values)).values
            worst = max(worst, masked_norm(lhs - rhs) / nxi)
    return worst


def make_exp_u(grid: Grid, a: float) -> GridFunction:
    """Plane-wave factorization function exp(i a x); alpha = a^2 for V0 = 0."""
    if a == 0.0:
        raise ValueError("a must be nonzero (W would be real)")
    return grid_function(grid, np.exp(1j * float(a) * grid.x))


def make_wave_mix_u(grid: Grid, alpha: float, A: complex, B: complex) -> GridFunction:
    """General zero-potential candidate A exp(ikx) + B exp(-ikx), k = sqrt(alpha).

    Nodelessness and complexity are not guaranteed for every (A, B);
    `build_susy` validates the result.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive for an oscillatory candidate")
    k = np.sqrt(float(alpha))
    vals = complex(A) * np.exp(1j * k * grid.x) + complex(B) * np.exp(-1j * k * grid.x)
    return grid_function(grid, vals)
