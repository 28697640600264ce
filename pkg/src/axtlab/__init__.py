"""Numerical laboratory for the attenuated X-ray transform identification problem.

Forward and adjoint transforms on directed lines, the linearized map around a
background pair, microlocal diagnostics (weight determinants, Hamiltonian
rays, trapping tests), explicit radial null-space and equivalent-source
constructions, and iterative reconstruction with stability probes.
"""

from .grid import (
    Domain,
    RadialFunction,
    RegionMask,
    ScalarField2D,
    SinoGeometry,
    Sinogram,
    line_integral,
    sobolev_norm_field,
    sobolev_norm_sinogram,
)
from .phantoms import (
    AnnulusField,
    DiskField,
    GaussianField,
    PolyBumpField,
    ScaledField,
    SumField,
    ZeroField,
)
from .xray import (
    ClosedFormWeight,
    LinearizedOperator,
    ReversedWeight,
    TabulatedWeight,
    UnitWeight,
    WeightField,
    attenuated_xray,
    backprojection,
    beam_transform,
    combined_forward,
    fourier_slice,
    nonlinear_difference,
    transport_solution,
    weighted_xray,
)
from .microlocal import (
    Bicharacteristic,
    CharacteristicPoint,
    SymbolField,
    characteristic_directions,
    classify_trapping,
    coherent_symbol_probe,
    identification_weights,
    normal_operator_symbol,
    radial_example_symbol,
    real_principal_type_check,
    trace_bicharacteristic,
    transport_asymmetry,
    verify_psdo_kernel,
    weight_determinant,
)
from .radial import (
    AbelProfile,
    abel_forward,
    abel_inverse,
    equivalent_source,
    radial_null_pair,
)
from .recon import (
    FieldPair,
    PairOperator,
    cgls_solve,
    holder_probe,
    kernel_probe,
    psdo_reduction,
    stability_ratio,
)
from .scenario import ScenarioError, ScenarioSpec, load_scenario, parse_scenario

__version__ = "0.1.0"
