"""Exception hierarchy.

Two families, mirroring the CLI exit-code contract:

* ``InputError`` — the request itself is rejected (bad configuration,
  inadmissible transformation function, parameter collisions).  CLI exit 2.
* ``NumericsError`` — the computation ran but produced something that fails
  its own validity checks (solver breakdown, missing kernel, residuals over
  tolerance).  CLI exit 3.
"""


class SusyMetricError(Exception):
    """Base class for all library errors."""


class InputError(SusyMetricError):
    """Invalid input or inadmissible parameters (CLI exit 2)."""


class NumericsError(SusyMetricError):
    """Numerical failure detected during computation (CLI exit 3)."""


class ConfigError(InputError):
    """Malformed or inconsistent run configuration."""


class NodeDetected(InputError):
    """Transformation function has a node (|u| dips below tolerance)."""


class AlphaCollision(InputError):
    """Factorization energy collides with an eigenvalue of the base operator."""


class NotASolution(InputError):
    """Candidate u does not solve the base eigenvalue equation at alpha."""


class RealSuperpotential(InputError):
    """Superpotential has no imaginary part; the partner would be Hermitian."""


class DiagMarginViolation(InputError):
    """Robin parameters sit too close to the non-diagonalizable regime."""


class DenominatorCollision(InputError):
    """Closed-form overlap denominator vanishes (parameter collision)."""


class PoleProximity(InputError):
    """Digamma argument too close to a pole."""


class SolverFailure(NumericsError):
    """Dense eigensolver failed or returned fewer pairs than requested."""


class NegativeEigenvalue(NumericsError):
    """Metric eigenvalue is negative beyond the clamping threshold."""


class KernelMissing(NumericsError):
    """Metric spectrum lacks a cleanly separated one-dimensional kernel."""


class KernelComponent(NumericsError):
    """Pseudo-inverse requested for a vector with a significant kernel part."""


class BasisNotOrthogonal(NumericsError):
    """Constructed basis fails its orthogonality validation."""


class QuadratureFailure(NumericsError):
    """Adaptive quadrature did not converge to the requested accuracy."""
