"""Drift-diffusion on SU(2) and the circle: spectral transforms, symbol
calculus, well-posedness checks, energy verification, and order reduction."""

from .harmonic import (
    SU2,
    TORUS1,
    RepIndex,
    GridSpec,
    GridField,
    SpectralField,
    dual_enumerate,
    quadrature_grid,
    wigner_matrix,
    fourier_forward,
    fourier_inverse,
    l2_inner,
    plancherel_norm,
    random_field,
)
from .symbol import (
    OperatorSpec,
    OperatorTerm,
    Symbol,
    bessel_weight,
    build_operator_symbol,
    laplace_symbol,
    sublaplace_symbol,
    vector_field_symbol,
    invariant_apply,
    apply_spectral,
    quantize_apply,
)
from .wellposed import (
    Classification,
    EllipticityReport,
    Witness,
    classify_problem,
    garding_order_bound,
    positivity_check,
    strong_ellipticity_constant,
    su2_drift_criterion,
)
from .evolve import (
    EnergyReport,
    EvolutionProblem,
    SolverError,
    energy_estimate_check,
    energy_identity_residual,
    evolve,
    sobolev_norm,
    step_crank_nicolson,
    step_exact_invariant,
    step_rk4,
    weighted_field,
)
from .reduce import (
    FirstOrderSystem,
    HigherOrderProblem,
    extract_u,
    reduce_to_first_order,
    solve_reduced,
)

__all__ = [
    "SU2",
    "TORUS1",
    "RepIndex",
    "GridSpec",
    "GridField",
    "SpectralField",
    "dual_enumerate",
    "quadrature_grid",
    "wigner_matrix",
    "fourier_forward",
    "fourier_inverse",
    "l2_inner",
    "plancherel_norm",
    "random_field",
    "OperatorSpec",
    "OperatorTerm",
    "Symbol",
    "bessel_weight",
    "build_operator_symbol",
    "laplace_symbol",
    "sublaplace_symbol",
    "vector_field_symbol",
    "invariant_apply",
    "apply_spectral",
    "quantize_apply",
    "Classification",
    "EllipticityReport",
    "Witness",
    "classify_problem",
    "garding_order_bound",
    "positivity_check",
    "strong_ellipticity_constant",
    "su2_drift_criterion",
    "EnergyReport",
    "EvolutionProblem",
    "SolverError",
    "energy_estimate_check",
    "energy_identity_residual",
    "evolve",
    "sobolev_norm",
    "step_crank_nicolson",
    "step_exact_invariant",
    "step_rk4",
    "weighted_field",
    "FirstOrderSystem",
    "HigherOrderProblem",
    "extract_u",
    "reduce_to_first_order",
    "solve_reduced",
]
