"""Heat-semigroup smoothing laboratory on finite weighted graphs.

A finite metric-measure space together with a graph Dirichlet form gives a
heat semigroup whose smoothing behaviour is *exactly* computable: the optimal
L-infinity-to-Lipschitz constant, the heat-kernel densities, Wasserstein-1
distances, and Cheeger constants all reduce to dense linear algebra, linear
programs and subset enumeration.  On top of these exact quantities the
package machine-checks a family of functional and geometric inequalities
(smoothing, caloric Poincare, indeterminacy, nodal-set, Buser and
transport-Sobolev bounds) in both their time-implicit and explicit forms.
"""

from .spaces import (
    MetricMeasureSpace,
    SubsetIndicator,
    AtomicMeasure,
    Violation,
    validate_space,
    generate_space,
    calibrate_metric,
    space_to_dict,
    space_from_dict,
    load_space,
    save_space,
    split_signs,
)
from .dirichlet import (
    DirichletStructure,
    carre_du_champ,
    laplacian_apply,
    cheeger_energy,
    total_variation,
    perimeter,
    metric_slope,
    lipschitz_constant,
    rayleigh_quotient,
    dirichlet_bilinear,
)
from .heat import (
    HeatOperator,
    build_heat_operator,
    heat_apply,
    heat_kernel_density,
    dual_heat_measure,
    c_star,
    c_star_primitive,
    theta_ultracontractivity,
    c_star_brute_force,
    check_heat_ibp,
)
from .transport import (
    TransportCertificate,
    UnequalMassError,
    w1,
    bl_star,
)
from .cheeger import (
    SpectralSummary,
    CheegerResult,
    EnumerationLimitError,
    spectrum,
    h1_exact,
    h1_sweep,
    h0_value,
    h0_proper_diagnostic,
    norm_cheeg_upper,
)
from .controls import (
    PowerControl,
    PowerLogControl,
    TabulatedControl,
    ReferenceRCDControl,
    control_eval,
    control_primitive,
    fit_power_control,
    log_threshold_T,
    control_to_dict,
    control_from_dict,
)
from .inequalities import (
    InequalityReport,
    SuiteOptions,
    SuiteResult,
    check_w1_smoothing,
    check_bl_smoothing,
    check_quant_contraction,
    check_interpolation,
    check_caloric_poincare,
    check_perimeter_lemmas,
    check_indeterminacy,
    check_eigen_bounds,
    check_buser,
    check_buser_h0,
    check_transport_sobolev,
    run_suite,
    default_t_grid,
    reports_to_json,
    reports_to_csv,
)

__version__ = "0.1.0"
