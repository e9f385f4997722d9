"""Shared fixtures.

The desk-scale pipeline (d=1, a=1.3, n_points=2001, K=200) is expensive --
four dense eigensolves around 20 s each -- so it is computed once per
session and shared by every module that needs production-scale numbers.
A refined pipeline at n_points=4001 backs the convergence criterion only.
"""

import numpy as np
import pytest

from susy_metric.grid import grid_function, make_grid
from susy_metric.metric import (
    assemble_metric,
    build_equivalent_basis,
    decompose_metric,
    split_alpha_channel,
    verify_equivalence,
)
from susy_metric.operators import Spectrum, adjoint, eigensolve
from susy_metric.susy import base_operator, build_susy, make_exp_u, partner_operator

D = 1.0
A = 1.3
ALPHA = A * A
N_MAX = 8


def truncate_spectrum(spec: Spectrum, n: int) -> Spectrum:
    ev = spec.eigenvalues[:n].copy()
    ev.setflags(write=False)
    return Spectrum(grid=spec.grid, eigenvalues=ev, eigenfunctions=spec.eigenfunctions[:n])


class PipelineBundle:
    """Everything the tests need from one resolved pipeline."""

    def __init__(self, n_points: int, K: int, n_solve: int = N_MAX + 3):
        self.n_points = n_points
        self.K = K
        self.grid = make_grid(D, n_points)
        self.V0 = grid_function(self.grid, np.zeros(n_points))
        self.h_op = base_operator(self.grid, self.V0)
        self.h_spectrum = eigensolve(self.h_op, n_solve)
        self.u = make_exp_u(self.grid, A)
        self.susy = build_susy(self.grid, self.V0, self.u, ALPHA, self.h_spectrum)
        self.H_op = partner_operator(self.susy)
        self.Hdag_op = adjoint(self.H_op)
        self.H_spectrum = eigensolve(self.H_op, n_solve)
        self.Hdag_spectrum = eigensolve(self.Hdag_op, n_solve)
        self.metric_op = assemble_metric(self.susy)
        self.decomposition = decompose_metric(self.metric_op, K)
        _, xi_rest_full = split_alpha_channel(self.Hdag_spectrum, ALPHA)
        self.xi_rest_full = xi_rest_full
        self.xi_rest = truncate_spectrum(xi_rest_full, N_MAX)
        self.basis = build_equivalent_basis(self.decomposition, self.xi_rest, ALPHA)
        self.report = verify_equivalence(
            self.susy,
            self.H_op,
            self.Hdag_op,
            self.decomposition,
            self.basis,
            self.xi_rest,
            truncate_spectrum(self.H_spectrum, N_MAX + 1),
            metric_op=self.metric_op,
        )


@pytest.fixture(scope="session")
def desk():
    """Production-scale pipeline: n_points=2001, K=200, 11 solved pairs."""
    return PipelineBundle(2001, 200, n_solve=11)


@pytest.fixture(scope="session")
def midscale():
    """Cheap pipeline for structural tests: n_points=801, K=80."""
    return PipelineBundle(801, 80, n_solve=11)


@pytest.fixture(scope="session")
def fine():
    """Refined pipeline for the convergence criterion: n_points=4001."""
    return PipelineBundle(4001, 200, n_solve=N_MAX + 1)
