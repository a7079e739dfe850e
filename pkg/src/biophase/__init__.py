"""Complex geometric phases of finite-dimensional non-Hermitian quantum systems.

States are carried as :class:`StatePair` objects (a state and its explicit
dual); every phase is built from mixed products ``<psi~|phi>``.
"""

from .biorthogonal import (BiorthonormalFrame, GaugeTransform, StatePair, apply_gauge,
                           binorm_defect, biorthogonal_complement, build_frame, dual_partner,
                           match_frames)
from .dynamics import (HamiltonianPath, TimeGrid, TimeProfile, Trajectory, drift_report,
                       dynamical_phase, evolve_pair)
from .errors import (AnchorError, AnchorSearchError, BiophaseError, BiorthogonalError,
                     DegeneratePathError, DegenerateSpectrumError, DimensionError, DriftError,
                     GridError, IoError, NumericalError, ParseError, SingularMatrixError,
                     ValidationError)
from .geometry import (GeodesicPath, PhaseValue, SampledCurve, connection_line_integral,
                       connection_sample, covariant_derivative, geodesic_between,
                       geodesic_residual, in_phase_residual, interference_intensity,
                       metric_element, pancharatnam_phase, path_length, polygon_limit_phase,
                       polygon_phase)
from .linalg import SpectralDecomposition, eigendecompose, inner, solve
from .phases import (AnchorState, OffDiagonalPhase, PhaseResult, auto_anchor, bracket_phase,
                     geometric_phase, geometric_phase_anchored, offdiagonal_phase)
from .runner import ResultBundle, export, run
from .scenario import Scenario, parse_scenario, serialize_scenario

__version__ = "0.1.0"
