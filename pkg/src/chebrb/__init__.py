"""Chebyshev tensor interpolation of option pricers with hierarchical
reduced-basis compression and polynomial-backed calibration."""

from .chebyshev import (ChebSeries1D, NodeGrid1D, chebyshev_weights, coeffs_1d, coeffs_nd,
                        derivative_coeffs, glc_quadrature, nodes, weighted_dot)
from .errors import DimensionError, DomainError, OracleError, SimulationError, ToleranceError
from .interpolant import (Domain, Interpolant, ProductGrid, build, control_grid, eval_grid,
                          eval_point, node_grid, split)
from .reduced_basis import ReducedPolynomial, TruncationSpec, compress, storage_report
from .tensor import permute_cycle, tensor_contract, tensor_contract_batched

__version__ = "0.1.0"

__all__ = [
    "ChebSeries1D", "NodeGrid1D", "chebyshev_weights", "coeffs_1d", "coeffs_nd",
    "derivative_coeffs", "glc_quadrature", "nodes", "weighted_dot",
    "DimensionError", "DomainError", "OracleError", "SimulationError", "ToleranceError",
    "Domain", "Interpolant", "ProductGrid", "build", "control_grid", "eval_grid",
    "eval_point", "node_grid", "split",
    "ReducedPolynomial", "TruncationSpec", "compress", "storage_report",
    "permute_cycle", "tensor_contract", "tensor_contract_batched",
]
