from .assembly import (
    WeightedComplex,
    build_complex,
    codifferential,
    drift_apply,
    export_matrix_market,
    hodge_laplacian,
)
from .exterior import (
    antisymmetrize,
    contraction_bound_check,
    contraction_quadratic,
    form_from_components,
    form_inner,
    form_norm_sq,
    is_antisymmetric,
    random_form,
    wedge_contract,
)

__all__ = [
    "WeightedComplex", "antisymmetrize", "build_complex", "codifferential",
    "contraction_bound_check", "contraction_quadratic", "drift_apply",
    "export_matrix_market", "form_from_components", "form_inner", "form_norm_sq",
    "hodge_laplacian", "is_antisymmetric", "random_form", "wedge_contract",
]
