//! Spectral simulator and verification toolkit for the shear-flow echo-chain
//! model: high-accuracy integration of the nearest-neighbour Fourier mode
//! system, per-resonance scattering operators in closed and hypergeometric
//! form, an independent Duhamel path-sum oracle, and the experiment drivers
//! that measure growth exponents, norm inflation, and velocity damping.

pub mod duhamel;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod model;
mod quad;
pub mod scattering;
pub mod special;

pub use error::{Error, Result};
pub use experiments::{
    damping_check, fit_exponent, modified_scattering_demo, norm_inflation_scan, run_echo_chain,
    ChainRunResult, DampingReport, ExponentFit, PsiProfile, ResonanceTrace, ScanRow,
    ScatteringDemoResult,
};
pub use integrator::{
    evolve, evolve_large_time, interval_operator, EvolveReport, IntegratorConfig, LargeTimeReport,
};
pub use model::{
    coefficient_a_t, coefficient_a_tau, coefficient_a_tau_mass, norm, norm_single, resonant_time,
    rhs_tau, velocity_norm, velocity_seminorm_factor, EtaEnsemble, EtaEntry, ModeVector,
    ModelParams, NormWeight, TimeVar,
};
pub use scattering::{
    chain_growth_prediction, composed_scattering, exponents, hypergeom_scattering, inner_matrix,
    optimal_k, outer_matrix, predicted_gain, resonance_block, rotation_solution,
    schroedinger_operator, three_mode_operator, ChainLaw, ExponentVariant, Exponents,
    GainPrediction, OuterSide, TransferMatrix,
};
pub use special::{
    gamma_fn, gauss_2f1, gauss_2f1_routed, hypergeom_u_solution, ln_gamma, FundamentalPair,
    Hyp2F1Params, Hyp2F1Route,
};
pub use duhamel::{
    duhamel_solve, enumerate_paths, path_count, path_integral, DuhamelSolution, InteractionPath,
    PathIntegralResult, DEFAULT_PATH_CAP,
};
