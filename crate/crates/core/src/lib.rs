//! Minimal-dissipation effective Hamiltonians for open quantum systems.
//!
//! Given a time-local generator `L` (Hermiticity preserving, trace
//! annihilating), the effective Hamiltonian `K` is the orthogonal projection
//! of `L` onto commutator superoperators `-i[H, .]` under the Haar-averaged
//! scalar product on generators. The crate provides
//!
//! * [`superop`]: operator and superoperator algebra on small Hilbert spaces,
//! * [`splitting`]: extraction of `K` and the canonical generator split,
//! * [`bath`]: Gaussian bath correlation functions, Wick moments and ordered
//!   cumulants,
//! * [`perturbation`]: the perturbative series `K(t) = sum_n lambda^n K_n(t)`
//!   for a qubit coupled linearly to a bath,
//! * [`oracle`]: brute-force reduced dynamics of a qubit coupled to a few
//!   truncated bosonic modes.

pub mod bath;
pub mod error;
pub mod oracle;
pub mod perturbation;
pub mod splitting;
pub mod superop;

pub use error::{Error, Result};

pub use bath::{
    build_correlation_table, integrated_noise, noise_and_response, ordered_cumulant, thermal_correlation,
    wick_moment, BathSpec, CorrelationTable, InverseTemperature, MeanField, Mode, Pin,
    SpectralDensity, MAX_MOMENT_ORDER,
};
pub use oracle::{
    dephasing_rate, exact_dephasing_generator, generator_from_map, oracle_compare,
    scaling_exponents, simulate_map, DiscreteBathSim, DynamicalMapSeries, OracleReport,
    ScalingPoint,
};
pub use perturbation::{
    a_product, interaction_picture_a, k2_closed_form, k_order, k_series, report_observables,
    write_observables_csv, x_operator, Coupling, Expansion, KSeries, ObservableRow,
    QuadratureScheme, SpinModel, MAX_SERIES_ORDER,
};
pub use splitting::{
    effective_hamiltonian, effective_hamiltonian_from_fidelities,
    effective_hamiltonian_pseudokraus, effective_hamiltonian_su, fidelity_weights, haar_mc_effective_hamiltonian, split, GeneratorSplit, HaarEstimate, Jump,
};
pub use superop::{
    check_htp, check_htp_with_tolerance, hs_inner, lindblad_generator, lindblad_terms,
    make_basis, random_htp_terms, BasisKind, HtpReport, MatrixJson, Operator, OperatorBasis,
    SandwichTerm, SuperOperator,
};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
