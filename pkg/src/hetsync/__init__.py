"""Synchronization stability of oscillator networks with parameter heterogeneity.

The package splits the analysis of how per-node parameter or frequency
mismatches reshape the stable coupling range of a synchronized network into
composable layers: spectral network data (`network`), dynamical models
(`models`), the second-order eigenvalue expansion and curvature contribution
function (`perturb`), direct-versus-approximate stability contours and the
opto-electronic pipeline (`stability`), nonlinear simulation (`sim`), and a
JSON-config CLI (`cli`).
"""

from .models import (
    ModelSpec,
    OptoModel,
    bernoulli,
    chua_frequency,
    chua_local,
    get_model,
    msf_boundary,
    optoelectronic,
)
from .network import (
    MismatchVector,
    Network,
    NetworkError,
    build_network,
    network_from_json,
    project_mismatch,
    random_mismatch,
    verify_annihilation,
)
from .perturb import (
    CurvatureProfile,
    DegenerateGapError,
    SpectralExpansion,
    StabilityMatrices,
    assemble,
    curvature_contribution,
    curvature_from_network,
    expand_eigenvalues,
)
from .sim import ErrorMap, SimConfig, error_map, simulate, simulate_detailed
from .stability import (
    MleCurve,
    StabilityContour,
    contour_table,
    direct_contour,
    mle_curve,
    opto_assemble,
    opto_lambda2,
    perturbation_contour,
)

__version__ = "0.1.0"

__all__ = [
    "ModelSpec",
    "OptoModel",
    "bernoulli",
    "chua_frequency",
    "chua_local",
    "get_model",
    "msf_boundary",
    "optoelectronic",
    "MismatchVector",
    "Network",
    "NetworkError",
    "build_network",
    "network_from_json",
    "project_mismatch",
    "random_mismatch",
    "verify_annihilation",
    "CurvatureProfile",
    "DegenerateGapError",
    "SpectralExpansion",
    "StabilityMatrices",
    "assemble",
    "curvature_contribution",
    "curvature_from_network",
    "expand_eigenvalues",
    "ErrorMap",
    "SimConfig",
    "error_map",
    "simulate",
    "simulate_detailed",
    "MleCurve",
    "StabilityContour",
    "contour_table",
    "direct_contour",
    "mle_curve",
    "opto_assemble",
    "opto_lambda2",
    "perturbation_contour",
    "__version__",
]
