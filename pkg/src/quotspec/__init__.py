"""Isospectral circle quotients of deformed spheres and Stiefel manifolds.

The package builds one-parameter families of linear maps R^2 -> su(m) whose
matrix pencils share spectra without being conjugate (jmaps), turns each map
into a torus-valued 1-form and a volume-preserving deformed metric on the
sphere S^{2m+3} or the complex Stiefel manifold V_r(C^{m+2}) (geometry),
measures circle-quotient distances and stratification (quotient), estimates
quotient Laplace spectra with epsilon-graph Laplacians (spectral), and
certifies non-isometry of the quotient pairs through connection-form
invariants (nonisometry).  The cli module exposes the whole pipeline as the
`quotspec` command.
"""

from .geometry import (
    FormSpec,
    RoundSphere,
    Sphere,
    Stiefel,
    check_admissible,
    fundamental_field,
    horizontalize,
    kappa_sphere,
    kappa_stiefel,
    metric_g_kappa,
    sphere_form,
    stiefel_form,
    verify_intertwining,
)
from .jmaps import (
    JMap,
    EquivalenceSymmetry,
    EquivalenceWitness,
    FamilyGenerationError,
    FamilyResult,
    all_symmetries,
    align_conjugator,
    commutant_dimension,
    equivalence_invariants,
    eval_jmap,
    find_equivalence,
    generate_family,
    invariant_separation,
    is_generic,
    is_isospectral,
    spectrum_directions,
)
from .nonisometry import (
    LevelSet,
    NonisometryReport,
    finite_diff_d,
    nonisometry_report,
    omega0,
    omega_lambda,
    orbit_gram,
)
from .quotient import (
    QuotientPoint,
    in_m_hat,
    local_distance,
    orbifold_report,
    orbit_chord,
    pairwise_quotient_distances,
    quotient_distance,
    same_orbit,
    stabilizer_dim,
)
from .spectral import (
    PointCloud,
    QuotientGraph,
    SpectrumEstimate,
    build_graph,
    calibrate_round,
    compare_spectra,
    default_epsilon,
    estimate_quotient_spectrum,
    load_cloud,
    round_sphere_spectrum,
    sample_uniform,
    save_cloud,
    smallest_eigenvalues,
)

__version__ = "0.1.0"

__all__ = [
    "FormSpec",
    "RoundSphere",
    "Sphere",
    "Stiefel",
    "check_admissible",
    "fundamental_field",
    "horizontalize",
    "kappa_sphere",
    "kappa_stiefel",
    "metric_g_kappa",
    "sphere_form",
    "stiefel_form",
    "verify_intertwining",
    "JMap",
    "EquivalenceSymmetry",
    "EquivalenceWitness",
    "FamilyGenerationError",
    "FamilyResult",
    "all_symmetries",
    "align_conjugator",
    "commutant_dimension",
    "equivalence_invariants",
    "eval_jmap",
    "find_equivalence",
    "generate_family",
    "invariant_separation",
    "is_generic",
    "is_isospectral",
    "spectrum_directions",
    "LevelSet",
    "NonisometryReport",
    "finite_diff_d",
    "nonisometry_report",
    "omega0",
    "omega_lambda",
    "orbit_gram",
    "QuotientPoint",
    "in_m_hat",
    "local_distance",
    "orbifold_report",
    "orbit_chord",
    "pairwise_quotient_distances",
    "quotient_distance",
    "same_orbit",
    "stabilizer_dim",
    "PointCloud",
    "QuotientGraph",
    "SpectrumEstimate",
    "build_graph",
    "calibrate_round",
    "compare_spectra",
    "default_epsilon",
    "estimate_quotient_spectrum",
    "load_cloud",
    "round_sphere_spectrum",
    "sample_uniform",
    "save_cloud",
    "smallest_eigenvalues",
    "__version__",
]
