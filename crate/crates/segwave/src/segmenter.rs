//! Binary segmentation driver: locate the posterior-mode changepoint of a
//! segment, gate it with the e-value test, and recurse on accepted splits.
//!
//! Traversal runs on an explicit work queue in waves, never on the call
//! stack. Segments within a wave are independent and may be processed in
//! parallel; every segment derives its chain seed from the run seed and its
//! own bounds, so the output is identical for serial and parallel execution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{argmax_changepoint_in, CandidateGrid, EnergyPrefix, Signal};
use crate::error::{Result, SegError};
use crate::evalue::{evalue_in, EvalueReport, Prior};
use crate::manifest::RunManifest;
use crate::mcmc::McmcConfig;

/// How an e-value is turned into an accept/reject decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Significance {
    /// Transform the e-value with [`crate::evalue::sev`] and reject equal
    /// variances when `sev <= alpha`.
    ChiSquare,
    /// Reject when the raw e-value falls at or below a pre-calibrated
    /// threshold (see [`calibrate_ev_threshold`]).
    EvThreshold { threshold: f64 },
}

/// Configuration of one segmentation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegConfig {
    /// Type-I level of the per-changepoint test.
    pub alpha: f64,
    pub prior: Prior,
    /// Candidate-grid step at the top level; the ratio step/length is held
    /// fixed as segments shrink.
    pub base_resolution: usize,
    pub min_seg_len: usize,
    pub max_changepoints: Option<usize>,
    pub mcmc: McmcConfig,
    pub seed: u64,
    pub significance: Significance,
}

impl Default for SegConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            prior: Prior::Jeffreys,
            base_resolution: 1000,
            min_seg_len: 1000,
            max_changepoints: None,
            mcmc: McmcConfig::default(),
            seed: 0,
            significance: Significance::ChiSquare,
        }
    }
}

impl SegConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SegError::InvalidInput(format!(
                "alpha must lie strictly between 0 and 1, got {}",
                self.alpha
            )));
        }
        if self.min_seg_len < 2 {
            return Err(SegError::InvalidInput(format!(
                "minimum segment length must be at least 2, got {}",
                self.min_seg_len
            )));
        }
        if self.base_resolution == 0 {
            return Err(SegError::InvalidInput(
                "base resolution must be at least 1".into(),
            ));
        }
        if let Significance::EvThreshold { threshold } = self.significance {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(SegError::InvalidInput(format!(
                    "e-value threshold must lie in [0, 1], got {threshold}"
                )));
            }
        }
        self.mcmc.validate()
    }
}

/// Per-segment summary: maximum-likelihood variance and its dB equivalent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub start: usize,
    pub end: usize,
    pub variance: f64,
    /// `10 log10(variance)`; negative infinity (JSON `null`) for
    /// zero-energy segments.
    pub rms_db: f64,
}

/// A branch the traversal had to abandon, with the reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedSegment {
    pub start: usize,
    pub end: usize,
    pub reason: String,
}

/// Output of [`segment`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentationResult {
    /// Accepted changepoints, strictly increasing.
    pub changepoints: Vec<usize>,
    /// One report per accepted changepoint, aligned with `changepoints`.
    pub reports: Vec<EvalueReport>,
    /// Candidates that reached the test and were rejected, for audit.
    pub rejected_candidates: Vec<(usize, EvalueReport)>,
    /// Per-segment statistics tiling `[0, N)`.
    pub segments: Vec<SegmentStats>,
    /// Branches closed by errors or the changepoint cap.
    pub skipped: Vec<SkippedSegment>,
    pub manifest: RunManifest,
}

// SplitMix64; gives every segment an independent, traversal-order-free
// chain seed.
pub(crate) fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base
        .wrapping_add(a.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(b.wrapping_mul(0xd1b54a32d192ed03));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

enum Outcome {
    Split(usize, EvalueReport),
    Reject(usize, EvalueReport),
    Leaf,
    Skip(String),
}

fn process_segment(
    prefix: &EnergyPrefix,
    a: usize,
    b: usize,
    ratio: f64,
    config: &SegConfig,
) -> Outcome {
    let len = b - a;
    if len < 2 * config.min_seg_len {
        return Outcome::Leaf;
    }
    let step = ((len as f64 * ratio).round() as usize).max(1);
    // Candidates sit at multiples of the step from the segment start,
    // clipped to the margins; a step at or beyond the length leaves none.
    let first_multiple = config.min_seg_len.div_ceil(step) * step;
    let lo = a + first_multiple;
    let hi = match b.checked_sub(config.min_seg_len) {
        Some(h) => h,
        None => return Outcome::Leaf,
    };
    if lo > hi {
        return Outcome::Leaf;
    }
    let grid = match CandidateGrid::new(lo, hi, step, config.min_seg_len) {
        Ok(g) => g,
        Err(e) => return Outcome::Skip(e.to_string()),
    };
    let (t_hat, _) = match argmax_changepoint_in(prefix, a, b, &grid) {
        Ok(v) => v,
        Err(SegError::NoCandidate) => {
            return Outcome::Skip("all candidates degenerate".into())
        }
        Err(e) => return Outcome::Skip(e.to_string()),
    };
    let mcmc = config
        .mcmc
        .with_seed(derive_seed(config.seed, a as u64, b as u64));
    let report = match evalue_in(prefix, a, b, t_hat, &config.prior, &mcmc) {
        Ok(r) => r,
        Err(e) => return Outcome::Skip(format!("test at {t_hat} failed: {e}")),
    };
    let accepted = match config.significance {
        Significance::ChiSquare => report.sev <= config.alpha,
        Significance::EvThreshold { threshold } => report.ev <= threshold,
    };
    if accepted {
        Outcome::Split(t_hat, report)
    } else {
        Outcome::Reject(t_hat, report)
    }
}

/// Segments a signal by recursive posterior-mode search gated with the
/// e-value test.
pub fn segment(signal: &Signal, config: &SegConfig) -> Result<SegmentationResult> {
    config.validate()?;
    let n = signal.len();
    if n < 2 * config.min_seg_len {
        return Err(SegError::InvalidInput(format!(
            "{n} samples cannot hold two segments of at least {}",
            config.min_seg_len
        )));
    }
    let prefix = EnergyPrefix::build(signal);
    let ratio = config.base_resolution as f64 / n as f64;

    let mut accepted: Vec<(usize, EvalueReport)> = Vec::new();
    let mut rejected: Vec<(usize, EvalueReport)> = Vec::new();
    let mut skipped: Vec<SkippedSegment> = Vec::new();
    let mut frontier: Vec<(usize, usize)> = vec![(0, n)];

    while !frontier.is_empty() {
        // Wider segments first, then leftmost: fixes the order in which the
        // changepoint cap is consumed.
        frontier.sort_by(|x, y| (y.1 - y.0).cmp(&(x.1 - x.0)).then(x.0.cmp(&y.0)));
        let outcomes: Vec<Outcome> = frontier
            .par_iter()
            .map(|&(a, b)| process_segment(&prefix, a, b, ratio, config))
            .collect();

        let mut next = Vec::new();
        for (&(a, b), outcome) in frontier.iter().zip(outcomes) {
            match outcome {
                Outcome::Split(t, report) => {
                    let cap_reached = config
                        .max_changepoints
                        .is_some_and(|cap| accepted.len() >= cap);
                    if cap_reached {
                        skipped.push(SkippedSegment {
                            start: a,
                            end: b,
                            reason: format!("changepoint cap suppressed split at {t}"),
                        });
                    } else {
                        accepted.push((t, report));
                        next.push((a, t));
                        next.push((t, b));
                    }
                }
                Outcome::Reject(t, report) => rejected.push((t, report)),
                Outcome::Leaf => {}
                Outcome::Skip(reason) => skipped.push(SkippedSegment {
                    start: a,
                    end: b,
                    reason,
                }),
            }
        }
        frontier = next;
    }

    accepted.sort_by_key(|(t, _)| *t);
    rejected.sort_by_key(|(t, _)| *t);
    skipped.sort_by_key(|s| (s.start, s.end));
    let (changepoints, reports): (Vec<usize>, Vec<EvalueReport>) = accepted.into_iter().unzip();
    let segments = estimate_segment_stats(signal, &changepoints)?;

    let manifest = RunManifest::for_config("segment", config.seed, config)?;
    Ok(SegmentationResult {
        changepoints,
        reports,
        rejected_candidates: rejected,
        segments,
        skipped,
        manifest,
    })
}

/// Per-segment variance summaries for a set of sorted changepoints.
pub fn estimate_segment_stats(
    signal: &Signal,
    changepoints: &[usize],
) -> Result<Vec<SegmentStats>> {
    let n = signal.len();
    for pair in changepoints.windows(2) {
        if pair[0] >= pair[1] {
            return Err(SegError::InvalidInput(
                "changepoints must be strictly increasing".into(),
            ));
        }
    }
    if let (Some(&first), Some(&last)) = (changepoints.first(), changepoints.last()) {
        if first == 0 || last >= n {
            return Err(SegError::InvalidInput(format!(
                "changepoints must lie strictly inside (0, {n})"
            )));
        }
    }
    let prefix = EnergyPrefix::build(signal);
    let mut bounds = Vec::with_capacity(changepoints.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(changepoints);
    bounds.push(n);
    Ok(bounds
        .windows(2)
        .map(|pair| {
            let (start, end) = (pair[0], pair[1]);
            let variance = prefix.energy(start, end) / (end - start) as f64;
            let rms_db = if variance > 0.0 {
                10.0 * variance.log10()
            } else {
                f64::NEG_INFINITY
            };
            SegmentStats {
                start,
                end,
                variance,
                rms_db,
            }
        })
        .collect())
}

/// Calibrates a raw e-value rejection threshold empirically: the
/// `alpha`-quantile of the e-value under equal-variance Gaussian signals of
/// length `n`, with the changepoint selected by the same posterior-mode
/// rule the segmenter uses at the top level.
pub fn calibrate_ev_threshold(
    n: usize,
    config: &SegConfig,
    replicates: usize,
) -> Result<f64> {
    use rand::SeedableRng;
    use rand_distr::Distribution;

    config.validate()?;
    if replicates < 20 {
        return Err(SegError::InvalidInput(
            "at least 20 replicates are needed for a quantile".into(),
        ));
    }
    if n < 2 * config.min_seg_len {
        return Err(SegError::InvalidInput(format!(
            "{n} samples cannot hold two segments of at least {}",
            config.min_seg_len
        )));
    }
    let mut evs: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(
                config.seed,
                0xca11b8a7e,
                rep as u64,
            ));
            let normal = rand_distr::StandardNormal;
            let samples: Vec<f64> = (0..n)
                .map(|_| Distribution::<f64>::sample(&normal, &mut rng))
                .collect();
            let signal = Signal::new(samples, None).expect("generated signal is valid");
            let prefix = EnergyPrefix::build(&signal);
            let step = config.base_resolution.max(1);
            let first = config.min_seg_len.div_ceil(step) * step;
            let grid = CandidateGrid::new(
                first,
                n - config.min_seg_len,
                step,
                config.min_seg_len,
            )?;
            let (t_hat, _) = argmax_changepoint_in(&prefix, 0, n, &grid)?;
            let mcmc = config
                .mcmc
                .with_seed(derive_seed(config.seed, rep as u64, 0xeb));
            Ok(evalue_in(&prefix, 0, n, t_hat, &config.prior, &mcmc)?.ev)
        })
        .collect::<Result<Vec<f64>>>()?;
    evs.sort_by(f64::total_cmp);
    let k = ((config.alpha * replicates as f64).ceil() as usize).clamp(1, replicates);
    Ok(evs[k - 1])
}
