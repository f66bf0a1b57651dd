//! Adaptive random-walk Metropolis sampler over two parameters.
//!
//! The proposal covariance follows Haario-style adaptation: after a warmup
//! of fixed diagonal proposals, it is continually re-estimated from the
//! chain history as `s_d * (Cov(history) + eps * I)` with `s_d = 2.4^2 / d`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SegError};
use crate::evalue::ThetaPoint;

/// Scaling factor `2.4^2 / d` for a two-dimensional target.
pub const PROPOSAL_SCALE_2D: f64 = 2.4 * 2.4 / 2.0;

/// Standard deviation of the fixed diagonal proposal used before
/// adaptation starts.
pub const INITIAL_PROPOSAL_SD: f64 = 0.1;

/// Chain-length and adaptation settings for one e-value computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub chain_length: usize,
    pub burn_in: usize,
    /// Iteration at which covariance adaptation begins.
    pub adapt_start: usize,
    /// Regularizer keeping the proposal covariance positive definite.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            chain_length: 50_000,
            burn_in: 10_000,
            adapt_start: 2_000,
            epsilon: 1e-6,
            seed: 0,
        }
    }
}

impl McmcConfig {
    /// At least 1000 retained samples are required for a stable
    /// surprise-set fraction.
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.chain_length || self.chain_length - self.burn_in < 1000 {
            return Err(SegError::InvalidInput(format!(
                "chain length {} minus burn-in {} must leave at least 1000 samples",
                self.chain_length, self.burn_in
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(SegError::InvalidInput(format!(
                "proposal regularizer must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// One recorded chain state.
#[derive(Debug, Clone, Copy)]
pub struct ChainSample {
    pub theta: ThetaPoint,
    pub log_density: f64,
}

/// A completed chain with its acceptance counter.
#[derive(Debug, Clone)]
pub struct Chain {
    pub samples: Vec<ChainSample>,
    pub accepted: usize,
}

impl Chain {
    pub fn acceptance_rate(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.accepted as f64 / self.samples.len() as f64
        }
    }
}

// Running mean and scatter matrix of the visited states, updated per
// iteration so the empirical covariance is O(1) to maintain.
struct RunningCov {
    count: f64,
    mean: [f64; 2],
    // Upper triangle of the scatter matrix sum (x - mean)(x - mean)^T.
    m11: f64,
    m12: f64,
    m22: f64,
}

impl RunningCov {
    fn new() -> Self {
        Self {
            count: 0.0,
            mean: [0.0; 2],
            m11: 0.0,
            m12: 0.0,
            m22: 0.0,
        }
    }

    fn push(&mut self, x: [f64; 2]) {
        self.count += 1.0;
        let d0 = x[0] - self.mean[0];
        let d1 = x[1] - self.mean[1];
        self.mean[0] += d0 / self.count;
        self.mean[1] += d1 / self.count;
        let e0 = x[0] - self.mean[0];
        let e1 = x[1] - self.mean[1];
        self.m11 += d0 * e0;
        self.m12 += d0 * e1;
        self.m22 += d1 * e1;
    }

    fn covariance(&self) -> Option<[f64; 3]> {
        if self.count < 2.0 {
            return None;
        }
        let denom = self.count - 1.0;
        Some([self.m11 / denom, self.m12 / denom, self.m22 / denom])
    }
}

// Lower Cholesky factor of a symmetric positive-definite 2x2 matrix given
// as [c11, c12, c22].
fn cholesky2(c: [f64; 3]) -> [f64; 3] {
    let l11 = c[0].max(0.0).sqrt();
    let l21 = if l11 > 0.0 { c[1] / l11 } else { 0.0 };
    let l22 = (c[2] - l21 * l21).max(0.0).sqrt();
    [l11, l21, l22]
}

/// Runs a random-walk Metropolis chain of `config.chain_length` states over
/// the given log-density, starting from `init`.
///
/// Fully deterministic for a fixed seed. Returns an error if the target
/// evaluates to NaN at any proposal (or at `init`).
pub fn adaptive_chain<F>(target: F, init: ThetaPoint, config: &McmcConfig) -> Result<Chain>
where
    F: Fn(&ThetaPoint) -> f64,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut current = [init.log_sd0, init.log_sd_ratio];
    let mut current_ld = target(&init);
    if current_ld.is_nan() {
        return Err(SegError::ChainFailure {
            iteration: 0,
            reason: "target is NaN at the initial point".into(),
        });
    }
    if current_ld == f64::NEG_INFINITY {
        return Err(SegError::ChainFailure {
            iteration: 0,
            reason: "target has zero density at the initial point".into(),
        });
    }

    let fixed_chol = [INITIAL_PROPOSAL_SD, 0.0, INITIAL_PROPOSAL_SD];
    let mut history = RunningCov::new();
    history.push(current);

    let mut samples = Vec::with_capacity(config.chain_length);
    let mut accepted = 0usize;

    for iter in 0..config.chain_length {
        let chol = if iter >= config.adapt_start {
            match history.covariance() {
                Some(cov) => cholesky2([
                    PROPOSAL_SCALE_2D * (cov[0] + config.epsilon),
                    PROPOSAL_SCALE_2D * cov[1],
                    PROPOSAL_SCALE_2D * (cov[2] + config.epsilon),
                ]),
                None => fixed_chol,
            }
        } else {
            fixed_chol
        };

        let z0: f64 = StandardNormal.sample(&mut rng);
        let z1: f64 = StandardNormal.sample(&mut rng);
        let proposal = [
            current[0] + chol[0] * z0,
            current[1] + chol[1] * z0 + chol[2] * z1,
        ];
        let proposal_theta = ThetaPoint {
            log_sd0: proposal[0],
            log_sd_ratio: proposal[1],
        };
        let proposal_ld = target(&proposal_theta);
        if proposal_ld.is_nan() {
            return Err(SegError::ChainFailure {
                iteration: iter,
                reason: format!(
                    "target is NaN at ({}, {})",
                    proposal[0], proposal[1]
                ),
            });
        }

        let u: f64 = rng.random();
        if u.ln() < proposal_ld - current_ld {
            current = proposal;
            current_ld = proposal_ld;
            accepted += 1;
        }

        history.push(current);
        samples.push(ChainSample {
            theta: ThetaPoint {
                log_sd0: current[0],
                log_sd_ratio: current[1],
            },
            log_density: current_ld,
        });
    }

    Ok(Chain { samples, accepted })
}

/// Crude effective sample size of a series: `M / (1 + 2 sum rho_k)` with
/// autocorrelations summed until they first drop below zero.
///
/// The series is thinned to a bounded length first; the estimate is meant
/// for diagnostics, not for precise variance accounting.
pub fn effective_sample_size(series: &[f64]) -> f64 {
    let m = series.len();
    if m < 4 {
        return 1.0;
    }
    let stride = m.div_ceil(8192);
    let thinned: Vec<f64> = series.iter().step_by(stride).copied().collect();
    let k = thinned.len();
    let mean = thinned.iter().sum::<f64>() / k as f64;
    let var: f64 = thinned.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / k as f64;
    if var <= 0.0 {
        return 1.0;
    }
    let max_lag = (k - 1).min(256);
    let mut rho_sum = 0.0;
    for lag in 1..=max_lag {
        let mut acc = 0.0;
        for i in 0..k - lag {
            acc += (thinned[i] - mean) * (thinned[i + lag] - mean);
        }
        let rho = acc / (k as f64 * var);
        if rho <= 0.0 {
            break;
        }
        rho_sum += rho;
    }
    // The thinned ESS estimates the full-series ESS directly: thinning by s
    // divides both the sample count and the integrated autocorrelation time.
    let ess_thinned = k as f64 / (1.0 + 2.0 * rho_sum);
    (ess_thinned * stride as f64).min(m as f64).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard_gaussian(theta: &ThetaPoint) -> f64 {
        -0.5 * (theta.log_sd0 * theta.log_sd0 + theta.log_sd_ratio * theta.log_sd_ratio)
    }

    #[test]
    fn proposal_scale_constant() {
        assert_eq!(PROPOSAL_SCALE_2D, 2.88);
    }

    #[test]
    fn gaussian_target_acceptance_in_expected_band() {
        let config = McmcConfig {
            chain_length: 20_000,
            burn_in: 2_000,
            adapt_start: 1_000,
            epsilon: 1e-6,
            seed: 7,
        };
        let chain = adaptive_chain(
            standard_gaussian,
            ThetaPoint {
                log_sd0: 0.0,
                log_sd_ratio: 0.0,
            },
            &config,
        )
        .unwrap();
        let rate = chain.acceptance_rate();
        assert!(
            (0.15..=0.45).contains(&rate),
            "acceptance rate {rate} outside [0.15, 0.45]"
        );
        // Sample moments should roughly match the target.
        let tail = &chain.samples[config.burn_in..];
        let mean0 = tail.iter().map(|s| s.theta.log_sd0).sum::<f64>() / tail.len() as f64;
        let var0 = tail
            .iter()
            .map(|s| (s.theta.log_sd0 - mean0).powi(2))
            .sum::<f64>()
            / tail.len() as f64;
        assert!(mean0.abs() < 0.1, "mean {mean0}");
        assert!((var0 - 1.0).abs() < 0.2, "variance {var0}");
    }

    #[test]
    fn chain_is_deterministic_per_seed() {
        let config = McmcConfig {
            chain_length: 3_000,
            burn_in: 1_000,
            adapt_start: 500,
            epsilon: 1e-6,
            seed: 42,
        };
        let init = ThetaPoint {
            log_sd0: 0.3,
            log_sd_ratio: -0.2,
        };
        let a = adaptive_chain(standard_gaussian, init, &config).unwrap();
        let b = adaptive_chain(standard_gaussian, init, &config).unwrap();
        assert_eq!(a.accepted, b.accepted);
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.log_density, y.log_density);
            assert_eq!(x.theta.log_sd0, y.theta.log_sd0);
        }
        let c = adaptive_chain(standard_gaussian, init, &config.with_seed(43)).unwrap();
        assert!(a
            .samples
            .iter()
            .zip(&c.samples)
            .any(|(x, y)| x.log_density != y.log_density));
    }

    #[test]
    fn nan_target_fails_with_iteration() {
        let config = McmcConfig {
            chain_length: 2_000,
            burn_in: 500,
            adapt_start: 100,
            epsilon: 1e-6,
            seed: 1,
        };
        let target = |theta: &ThetaPoint| {
            if theta.log_sd0 > 0.05 {
                f64::NAN
            } else {
                0.0
            }
        };
        match adaptive_chain(
            target,
            ThetaPoint {
                log_sd0: 0.0,
                log_sd_ratio: 0.0,
            },
            &config,
        ) {
            Err(SegError::ChainFailure { .. }) => {}
            other => panic!("expected chain failure, got {other:?}"),
        }
    }

    #[test]
    fn collinear_history_keeps_positive_proposal() {
        // A target that pins the chain to a line would make the history
        // covariance singular; epsilon keeps the Cholesky factor nonzero.
        let cov = [
            PROPOSAL_SCALE_2D * (0.0 + 1e-6),
            0.0,
            PROPOSAL_SCALE_2D * (0.0 + 1e-6),
        ];
        let l = cholesky2(cov);
        assert!(l[0] > 0.0 && l[2] > 0.0);
    }

    #[test]
    fn config_validation() {
        let mut c = McmcConfig::default();
        c.chain_length = 1500;
        c.burn_in = 1000;
        assert!(c.validate().is_err());
        c.burn_in = 500;
        assert!(c.validate().is_ok());
        c.epsilon = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn ess_detects_iid_vs_constant() {
        let iid: Vec<f64> = (0..4000).map(|i| ((i * 2654435761u64 % 1000) as f64) / 1000.0).collect();
        let ess = effective_sample_size(&iid);
        assert!(ess > 1000.0, "iid-ish series should have large ESS, got {ess}");
        let constant = vec![1.0; 4000];
        assert_eq!(effective_sample_size(&constant), 1.0);
    }
}
