"""Maximum privacy of Gaussian data under linear-function recoverability."""

from .alloc import AttenuationPair, NoiseAllocation, allocate, attenuation_pair
from .curve import (
    PrivacyCurve,
    build_curve,
    curve_from_singular_values,
    inverse_privacy,
    min_envelope_terms,
    privacy,
    tabulate,
)
from .estimator import (
    LinearEstimator,
    closed_form_privacy,
    converse_certificate,
    estimate,
    mmse_estimator_for_mechanism,
)
from .linmap import (
    LinearMap,
    MatrixFormatError,
    SvdFactorization,
    load_linear_map,
    mmse_x_given_ax,
    parse_linear_map,
    svd_ascending,
    var_ax,
)
from .mechanism import (
    CoordinateMode,
    LinearGaussianMechanism,
    Mechanism,
    SampleBatch,
    build_mechanism,
    component_distortions_closed_form,
    respond,
    sample_joint,
)
from .montecarlo import (
    SimulationReport,
    baseline_mechanisms,
    compare_mechanisms,
    refit_estimator,
    simulate,
)

__version__ = "0.1.0"
