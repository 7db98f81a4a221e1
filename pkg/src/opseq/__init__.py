"""Finite-section experiments on operator sequences A^n T B^n, their Cesaro means,
Hankel-norm distances and atomic spectral measures."""
from .symbols import (
    BlaschkeSpec,
    TrigSymbol,
    blaschke_symbol,
    constant,
    monomial,
    sup_norm_grid,
    symbol_conj_reflect,
    symbol_mul,
    symbol_rotate,
    trig_from_coeffs,
)
from .operators import (
    OperatorMatrix,
    composition_matrix,
    hankel_matrix,
    model_compression,
    operator_norm,
    rank_one_matrix,
    tm_basis,
    toeplitz_matrix,
)
from .asymptotics import (
    asymptotic_decomposition,
    cesaro_trace,
    conjugation_sequence,
    detect_convergence,
    ess_norm_estimate,
    perturbation_gap_check,
    window_sequence,
)
from .distances import dist_hinf, dist_hinf_plus_c, hartman_sarason_report, sigma_u_estimate
from .spectral import MeasureAtoms, cesaro_limit_atoms, mu_from_atoms, power_convergence_verdict

__version__ = "0.1.0"
