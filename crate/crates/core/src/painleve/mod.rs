//! Fuchsian exponents, dominant balances, resonances and Laurent balances.

pub mod balance;
pub mod dominant;
pub mod pipeline;
pub mod resonance;

pub use balance::{
    check_principal, expand_balance, residual_check, Balance, ExpansionFailure, Parameter,
    PrincipalVerdict, ResidualWitness, series_var, SERIES_VAR,
};
pub use pipeline::{analyse_candidate, run_test, Candidate, TestOptions, TestReport, DEFAULT_MARGIN};
pub use dominant::{
    dominant_part, enumerate_fuchsian_exponents, natural_dominant_part, solve_dominant,
    solve_natural_dominant, verify_dominant_balance, weighted_degree, DominantData,
    DominantSolutions, ExponentCandidate, Rejected,
};
pub use resonance::{
    basic_resonance_check, basic_resonance_vector, kowalevskian, resonance_structure, BasisError,
    NonConstantKowalevskian, ResonanceBlock, ResonanceFailure, ResonanceStructure,
};
