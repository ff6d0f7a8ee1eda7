"""Active-array scattering simulation and MUSIC support recovery.

The package simulates Born-model array echoes, assembles the
multiple-measurement-vector data structures (including phaseless
interferometric ones recovered through the polarization identity), images
scatterer supports with the MUSIC subspace algorithm, and checks the
noise-robustness bound numerically.
"""

__version__ = "0.1.0"

from .errors import ArrayMusicError
from .forward import (
    Illumination,
    ResponseTensor,
    add_noise,
    apply_illumination,
    green_scalar,
    green_vector,
    point_illumination,
    point_illuminations,
    response_matrix,
    response_tensor,
)
from .music import (
    Gap,
    Known,
    Pseudospectrum,
    SubspaceDecomposition,
    SupportEstimate,
    Threshold,
    decompose,
    extract_support,
    pseudospectrum,
    recover_amplitudes,
)
from .phaseless import (
    IntensityRecord,
    IntensitySet,
    assemble_mc_from_intensities,
    measure_cross_links,
    measure_intensities,
    polarization_inner,
    recover_cross_correlations,
    recover_interferometric,
)
from .robustness import (
    BoundReport,
    check_theorem_bound,
    check_theorem_bound_family,
    compute_gamma,
    optimal_illuminations,
    random_illuminations,
    subspace_distance,
    support_coherence,
)
from .scene import (
    ArrayGeometry,
    DelayScene,
    FrequencySet,
    ImagingGrid,
    ReflectivityVector,
    Scatterer,
    Scene,
    discretize_delays,
    discretize_reflectivity,
    grid_points,
    linear_array,
    random_delay_scene,
    random_scene,
)
from .structures import (
    DataMatrix,
    DataMatrixKind,
    Exactness,
    ModelMatrixFamily,
    Provenance,
    build_m_single,
    build_mc,
    build_pc,
    build_pd,
    build_prony,
    build_single_freq,
    default_conjugation,
    factorization_residuals,
)
