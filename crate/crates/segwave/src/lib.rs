//! Variance-changepoint segmentation of long one-dimensional signals.
//!
//! The core algorithm is a Bayesian binary segmentation: the most likely
//! changepoint of a segment is located by the mode of a marginal posterior
//! over split locations, validated by a full Bayesian significance test of
//! variance equality (the e-value, integrated by adaptive Metropolis), and
//! accepted splits are refined recursively with adaptive grid resolution.
//! PELT and greedy binary segmentation over the same integrated-variance
//! cost serve as exact and classical baselines, with a brute-force optimal
//! partition as the exactness oracle.
//!
//! Module map:
//! - [`energy`]: signals, prefix energies, the marginal changepoint
//!   posterior and its mode search;
//! - [`evalue`] / [`mcmc`]: the equal-variance significance test;
//! - [`segmenter`]: the recursive driver;
//! - [`baselines`]: PELT, binary segmentation, brute-force oracle;
//! - [`simlab`]: synthetic processes, scoring, BIC selection, benchmarks;
//! - [`wav`] / [`preprocess`] / [`spectrogram`] / [`textio`]: ingestion
//!   and export for the command-line tool.

pub mod baselines;
pub mod energy;
pub mod error;
pub mod evalue;
pub mod manifest;
pub mod mcmc;
pub mod preprocess;
pub mod segmenter;
pub mod simlab;
pub mod spectrogram;
pub mod textio;
pub mod wav;

pub use baselines::{binseg, optimal_partition_bruteforce, pelt, segment_cost, Penalty};
pub use energy::{
    argmax_changepoint, build_prefix, log_marginal_posterior, CandidateGrid, EnergyPrefix, Signal,
};
pub use error::{Result, SegError};
pub use evalue::{evalue, h0_max, log_full_posterior, sev, test_changepoint, EvalueReport, Prior, ThetaPoint};
pub use manifest::RunManifest;
pub use mcmc::{adaptive_chain, McmcConfig};
pub use preprocess::{preprocess, zero_mean_signal};
pub use segmenter::{
    calibrate_ev_threshold, estimate_segment_stats, segment, SegConfig, SegmentationResult,
    SegmentStats, Significance,
};
pub use simlab::{
    bic, match_score, run_benchmark, select_beta, simulate, Algorithm, EvalRecord, MatchScore,
    SimSpec,
};
pub use spectrogram::{spectrogram, Spectrogram};
pub use wav::{load_wav, parse_wav, AudioClip, WavError};
