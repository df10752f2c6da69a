//! Max-min SQINR beamforming and power allocation for multi-user MIMO-OFDM
//! downlinks with constant-envelope quantized (CEQ) DACs.
//!
//! A base station with `N_BS` antennas, each driven by a `b`-bit
//! constant-envelope DAC, serves `K` single-antenna users over `N_SC` OFDM
//! subcarriers of a frequency-selective channel. Phase-only quantization
//! destroys the subcarrier orthogonality of OFDM and injects quantization
//! noise that couples every user and subcarrier. This crate linearizes the
//! quantizer with the Bussgang decomposition, builds the resulting
//! signal-to-quantization-plus-interference-plus-noise-ratio (SQINR) model,
//! and solves the max-min SQINR beamforming and power allocation problem
//! through its uplink-downlink dual: a sequence of generalized-eigenvector
//! beamformer updates and Perron eigenpair power solves on nonnegative
//! coupling matrices.
//!
//! The main entry points are:
//!
//! * [`ceq`] — constant-envelope quantizer kernels and their second-order
//!   statistics (Bussgang gains, arcsine-law correlation, quantization-noise
//!   covariance),
//! * [`channel`] — synthetic tapped-delay-line channels and the unitary
//!   OFDM transforms,
//! * [`sqinr`] — downlink/uplink SQINR evaluation and coupling-matrix
//!   construction,
//! * [`power`] — duality-based optimal power allocation via dominant
//!   eigenpairs of extended coupling matrices,
//! * [`solver`] — the alternating max-min solvers (joint and per-subcarrier)
//!   plus dummy-user dithering,
//! * [`baselines`] — quantized and unquantized zero-forcing references,
//! * [`linksim`] — a Monte Carlo OFDM link simulator that cross-checks every
//!   analytical quantity,
//! * [`metrics`] — ergodic sum/min rate computation and result aggregation.
//!
//! # Example
//!
//! ```
//! use ceq_maxmin::ceq::CeqConfig;
//! use ceq_maxmin::channel::{generate, ChannelConfig};
//! use ceq_maxmin::grid::Scenario;
//! use ceq_maxmin::solver::{run, SolverConfig};
//!
//! let channel = generate(&ChannelConfig {
//!     n_bs: 8,
//!     k_users: 2,
//!     n_sc: 4,
//!     l_taps: 2,
//!     pdp_decay: 0.7,
//!     seed: 7,
//!     est_error: 0.0,
//!     user_correlation: 0.0,
//! })
//! .unwrap();
//!
//! let ceq = CeqConfig::bits(3).unwrap();
//! let scenario = Scenario::fully_active(&channel.freq, &ceq, 0.1);
//! // 3 dB SQINR target for every user on every subcarrier, 1 W budget.
//! let targets = vec![2.0; scenario.n_links()];
//! let solution = run(&scenario, &targets, 1.0, &SolverConfig::default()).unwrap();
//! assert!(solution.r_opt > 0.0);
//! ```

pub mod baselines;
pub mod ceq;
pub mod channel;
pub mod error;
pub mod grid;
pub mod linksim;
pub mod metrics;
pub mod power;
pub mod quad;
pub mod selftest;
pub mod solver;
pub mod sqinr;

pub use error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type Cx = num_complex::Complex<f64>;

/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<Cx>;

/// Dense complex column vector.
pub type CVec = nalgebra::DVector<Cx>;

/// Dense real matrix.
pub type RMat = nalgebra::DMatrix<f64>;

/// Dense real column vector.
pub type RVec = nalgebra::DVector<f64>;
