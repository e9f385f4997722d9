"""SUSY partner operators on an interval: non-Hermitian partners of a
Hermitian Sturm-Liouville operator, the positive-semidefinite composition
of the intertwiner with its adjoint, its spectral square root, and the
reconstruction of the equivalent Hermitian operator -- cross-validated
against the exactly solvable constant-superpotential (Robin) case."""

from .errors import (
    AlphaCollision,
    BasisNotOrthogonal,
    ConfigError,
    DenominatorCollision,
    DiagMarginViolation,
    InputError,
    KernelComponent,
    KernelMissing,
    NegativeEigenvalue,
    NodeDetected,
    NotASolution,
    NumericsError,
    PoleProximity,
    QuadratureFailure,
    RealSuperpotential,
    SolverFailure,
    SusyMetricError,
)
from .grid import (
    Grid,
    GridFunction,
    differentiate,
    grid_function,
    inner_product,
    make_grid,
    norm,
    read_gridfunction_csv,
    write_gridfunction_csv,
)
from .metric import (
    EquivalenceReport,
    EquivalentBasis,
    MetricDecomposition,
    assemble_metric,
    build_equivalent_basis,
    decompose_metric,
    hermiticity_residual,
    metric_apply,
    pseudo_inv_sqrt_apply,
    reconstruct_h0,
    restricted_eigenvalues,
    split_alpha_channel,
    sqrt_apply,
    verify_equivalence,
)
from .operators import (
    BoundaryCondition,
    DiscreteOperator,
    Spectrum,
    adjoint,
    apply,
    assemble,
    eigensolve,
    operator_from_matrix,
    residual,
    write_spectrum_csv,
)
from .oracle import (
    RobinParams,
    SeriesIdentityResult,
    adjoint_eigenfunction,
    beta_fn,
    gamma_fn,
    metric_eigendata,
    overlap_s,
    phi_closed_form,
    phi_series,
    robin_eigenfunction,
    robin_energy,
    series_identity_check,
)
from .susy import (
    SusyData,
    apply_L,
    apply_Ldag,
    base_operator,
    build_susy,
    make_exp_u,
    make_wave_mix_u,
    partner_operator,
    verify_intertwining,
)

__version__ = "0.1.0"
