"""Operator assembly, eigenproblems, adjoints, and the residual measure."""

import numpy as np
import pytest

from susy_metric.grid import grid_function, inner_product, make_grid, norm
from susy_metric.operators import (
    BoundaryCondition,
    adjoint,
    apply,
    assemble,
    eigensolve,
    residual,
    write_spectrum_csv,
)
from susy_metric.susy import base_operator, build_susy, make_exp_u, partner_operator

A = 1.3


def _zero(g):
    return grid_function(g, np.zeros(g.n_points))


def _robin_op(g, weight, q=None, V=None):
    qf = _zero(g) if q is None else grid_function(g, q)
    Vf = _zero(g) if V is None else grid_function(g, V)
    bc = BoundaryCondition.robin(weight)
    return assemble(g, qf, Vf, bc, bc)


def test_dirichlet_laplacian_action_on_sine():
    g = make_grid(1.0, 2001)
    op = base_operator(g, _zero(g))
    f = grid_function(g, np.sin(np.pi * g.x))
    r = apply(op, f).values - np.pi**2 * f.values
    r[0] = r[-1] = 0.0  # Dirichlet rows are eliminated
    assert np.max(np.abs(r)) < 5e-3


def test_boundary_condition_validation():
    with pytest.raises(ValueError):
        BoundaryCondition("robin", None)
    with pytest.raises(ValueError):
        BoundaryCondition("dirichlet", 1.0)
    with pytest.raises(ValueError):
        BoundaryCondition("neumann")


def test_robin_boundary_rows_annihilate_exact_solution():
    # exp(-i a x) satisfies both Robin conditions with weight i*a exactly;
    # the ghost-eliminated rows cancel it down to the row scale
    g = make_grid(1.0, 2001)
    op = _robin_op(g, 1j * A)
    f = np.exp(-1j * A * g.x)
    r = op.matrix @ f - A**2 * f
    for row in (0, g.n_points - 1):
        rowscale = np.max(np.abs(op.matrix[row, :]))
        assert abs(r[row]) / rowscale < 1e-10


def test_metric_coefficients_for_constant_superpotential():
    # q = 2ia, V = a^2, Robin weight -ia realize L L+ for W = i a
    g = make_grid(1.0, 801)
    op = _robin_op(g, -1j * A, q=np.full(801, 2j * A), V=np.full(801, A**2))
    h = g.spacing
    j = 400
    assert op.matrix[j, j - 1] == pytest.approx(-1 / h**2 - 2j * A / (2 * h))
    assert op.matrix[j, j] == pytest.approx(2 / h**2 + A**2)
    assert op.matrix[j, j + 1] == pytest.approx(-1 / h**2 + 2j * A / (2 * h))
    # its kernel function exp(i a x) is annihilated up to discretization error
    ker = np.exp(1j * A * g.x)
    r = op.matrix @ ker
    assert np.max(np.abs(r[3:-3])) < 1e-4


def test_assemble_rejects_mismatched_grids():
    g = make_grid(1.0, 101)
    g2 = make_grid(1.0, 103)
    with pytest.raises(ValueError):
        assemble(
            g,
            _zero(g2),
            _zero(g),
            BoundaryCondition.dirichlet(),
            BoundaryCondition.dirichlet(),
        )


def test_dirichlet_spectrum(desk):
    E = desk.h_spectrum.eigenvalues[:10]
    exact = (np.pi * np.arange(1, 11)) ** 2
    assert np.max(np.abs(E.real - exact) / exact) < 1e-4


def test_hermitian_case_reality(desk):
    E = desk.h_spectrum.eigenvalues
    assert np.all(np.abs(E.imag) < 1e-10 * (1 + np.abs(E.real)))


def test_robin_spectrum_is_dirichlet_plus_alpha(desk):
    E = desk.H_spectrum.eigenvalues[:9]
    exact = np.array([A**2] + [(np.pi * n) ** 2 for n in range(1, 9)])
    assert np.max(np.abs(E.real - exact) / exact) < 1e-4


def test_spectral_completeness(desk):
    # lowest eigenvalues of H = {alpha} plus the Dirichlet levels of h
    EH = desk.H_spectrum.eigenvalues[:11].real
    expected = np.sort(np.concatenate(([A**2], desk.h_spectrum.eigenvalues[:10].real)))
    assert np.max(np.abs(EH - expected) / expected) < 1e-4


def test_metric_kernel_eigenvalue_small():
    # raw (unclamped) spectrum of L L+ has one eigenvalue far below the first
    g = make_grid(1.0, 801)
    op = _robin_op(g, -1j * A, q=np.full(801, 2j * A), V=np.full(801, A**2))
    spec = eigensolve(op, 3)
    lam2 = spec.eigenvalues.real
    assert abs(lam2[0]) < 1e-6 * lam2[1]


def test_eigensolve_trust_region():
    g = make_grid(1.0, 101)
    op = base_operator(g, _zero(g))
    with pytest.raises(ValueError):
        eigensolve(op, 26)
    with pytest.raises(ValueError):
        eigensolve(op, 0)


def test_eigenfunction_normalization_and_phase(desk):
    for f in desk.H_spectrum.eigenfunctions[:3]:
        assert norm(f) == pytest.approx(1.0, abs=1e-10)
        k = np.argmax(np.abs(f.values))
        assert abs(f.values[k].imag) < 1e-12
        assert f.values[k].real > 0


def test_adjoint_of_hermitian_is_itself():
    g = make_grid(1.0, 201)
    op = base_operator(g, grid_function(g, np.cos(np.pi * g.x)))
    assert np.max(np.abs(adjoint(op).matrix - op.matrix)) < 1e-12


def test_adjoint_conjugates_robin_weights():
    g = make_grid(1.0, 201)
    op = _robin_op(g, 1j * A)
    adj = adjoint(op)
    assert adj.bc_left.weight == -1j * A
    assert adj.bc_right.weight == -1j * A


def test_adjoint_is_involutive():
    g = make_grid(1.0, 201)
    op = _robin_op(g, 1j * A, V=np.full(201, 0.3 + 0.1j))
    back = adjoint(adjoint(op))
    assert np.array_equal(back.matrix, op.matrix)
    assert back.bc_left == op.bc_left and back.bc_right == op.bc_right


def test_adjoint_rejects_first_order_term():
    g = make_grid(1.0, 201)
    op = _robin_op(g, 1j * A, q=np.full(201, 2j * A))
    with pytest.raises(ValueError):
        adjoint(op)


def test_apply_eigenrelation(desk):
    E1, psi1 = desk.h_spectrum.pairs[0]
    r = apply(desk.h_op, psi1).values - E1 * psi1.values
    assert norm(grid_function(desk.grid, r)) < 5e-3 * abs(E1)


def test_apply_alpha_eigenfunction(desk):
    phi0 = grid_function(desk.grid, np.exp(-1j * A * desk.grid.x))
    r = apply(desk.H_op, phi0).values - A**2 * phi0.values
    assert norm(grid_function(desk.grid, r[3:-3].__class__(r) * 0 + r)) >= 0  # shape guard
    w = desk.grid.weights[3:-3]
    assert np.sqrt(np.sum(w * np.abs(r[3:-3]) ** 2)) / norm(phi0) < 1e-3


def test_apply_zero_function():
    g = make_grid(1.0, 101)
    op = base_operator(g, _zero(g))
    out = apply(op, _zero(g))
    assert np.all(out.values == 0)


def test_residual_exact_discrete_pair():
    g = make_grid(1.0, 101)
    op = _robin_op(g, 1j * A)
    spec = eigensolve(op, 5)
    worst = max(residual(op, f, E) for E, f in spec.pairs)
    assert worst < 1e-10


def test_residual_analytic_eigenfunctions_sampled(desk):
    from susy_metric.oracle import RobinParams, robin_eigenfunction, robin_energy

    p = RobinParams(A, 1.0)
    g = desk.grid
    for n in (1, 2, 3):
        f = grid_function(g, robin_eigenfunction(p, n)(g.x))
        assert residual(desk.H_op, f, robin_energy(p, n)) < 1e-3


def test_residual_random_pair_is_large():
    g = make_grid(1.0, 101)
    op = base_operator(g, _zero(g))
    rng = np.random.default_rng(11)
    f = grid_function(g, rng.standard_normal(101) * np.sin(np.pi * g.x))
    assert residual(op, f, 5.0) > 1.0


def test_residual_rejects_zero_function():
    g = make_grid(1.0, 101)
    op = base_operator(g, _zero(g))
    with pytest.raises(ValueError):
        residual(op, _zero(g), 1.0)


def test_biorthogonality(desk):
    # adjoint eigenfunctions against partner eigenfunctions, levels 0..10
    for i, xi in enumerate(desk.Hdag_spectrum.eigenfunctions):
        for j, phi in enumerate(desk.H_spectrum.eigenfunctions):
            if i != j:
                assert abs(inner_product(xi, phi)) < 1e-6


def test_conjugation_shortcut(desk):
    # for a real base potential the adjoint eigenfunction at a real level is
    # the conjugated partner eigenfunction
    for n in (0, 1, 2, 5):
        phi = desk.H_spectrum.eigenfunctions[n]
        xi = desk.Hdag_spectrum.eigenfunctions[n]
        conj_phi = grid_function(desk.grid, np.conj(phi.values))
        ov = abs(inner_product(conj_phi, xi)) / norm(conj_phi)
        assert ov > 1 - 1e-8


def test_spectrum_csv_schema(tmp_path, midscale):
    from susy_metric.operators import Spectrum

    spec = Spectrum(
        grid=midscale.grid,
        eigenvalues=midscale.h_spectrum.eigenvalues[:2],
        eigenfunctions=midscale.h_spectrum.eigenfunctions[:2],
    )
    names = write_spectrum_csv(spec, tmp_path, prefix="h_")
    assert names[0] == "h_eigenvalues.csv"
    lines = (tmp_path / "h_eigenvalues.csv").read_text().splitlines()
    assert lines[0] == "index,re_E,im_E"
    assert len(lines) == 3
    assert (tmp_path / "h_eig_0.csv").exists() and (tmp_path / "h_eig_1.csv").exists()
