//! Port-mode analysis toolkit for lossy multi-port antennas.
//!
//! The crate reduces full-wave operator data (radiation, loss and reactance
//! matrices of a method-of-moments model) to small port-level matrices and
//! evaluates or optimizes the total active reflection coefficient (TARC),
//! efficiencies, directivity and realized gain. It ships a desk-scale
//! thin-wire dipole-array generator so the whole pipeline can be exercised
//! without an external electromagnetic solver, a combinatorial feeding
//! synthesis driver, and a binary bundle format for ingesting operator data
//! exported from other solvers.

pub mod bundle;
pub mod linalg;
pub mod metrics;
pub mod mom;
pub mod optim;
pub mod ports;
pub mod synthesis;
pub mod synthetic;

pub use bundle::{read_bundle, read_bundle_with, write_bundle, BundleError, Strictness};
pub use linalg::{eig_general, eig_hpd_pencil, solve_linear, EigenPair, LinalgError};
pub use metrics::{
    directivity, evaluate, realized_gain, scan_single_port, ExcitationSolution, MetricsError,
};
pub use mom::{
    build_dipole_array, surface_resistance, DipoleArraySpec, DipoleElement, FullWaveSystem,
    MomError,
};
pub use optim::{
    efficiency_bound, max_realized_gain, optimal_excitation, perfect_match,
    rank_match_solutions, refine_circuit, BoundResult, ExcitationOptimum, MatchSolution,
    OptimError, RefineResult,
};
pub use ports::{
    build_wave_matrices, expand_currents, port_currents, precompute_big, reduce_admittance,
    reduce_farfield, reduce_quadratic, BigOperators, Direction, PortConfig, PortError,
    PortOperators,
};
pub use synthesis::{
    count_combinations, count_region_configs, dedup_symmetry, enumerate_configs, synthesize,
    CircuitPolicy, ConfigScore, RegionSpec, ScoringPath, Strategy, SymmetryGroup,
    SynthesisError, SynthesisReport,
};

/// Complex double-precision scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix in row-major (C) order.
pub type CMatrix = ndarray::Array2<C64>;
/// Dense complex vector.
pub type CVector = ndarray::Array1<C64>;
/// Dense real matrix.
pub type RMatrix = ndarray::Array2<f64>;

/// Free-space constants (SI units).
pub mod consts {
    /// Speed of light in vacuum (m/s).
    pub const C0: f64 = 299_792_458.0;
    /// Permeability of vacuum (H/m).
    pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;
    /// Permittivity of vacuum (F/m).
    pub const EPS0: f64 = 1.0 / (MU0 * C0 * C0);
    /// Impedance of free space (Ohm).
    pub const Z0: f64 = MU0 * C0;
}
