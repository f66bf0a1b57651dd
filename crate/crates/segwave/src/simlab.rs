//! Synthetic changepoint processes, detection scoring, BIC model
//! selection and the benchmark runner.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{binseg, pelt, Penalty};
use crate::energy::{EnergyPrefix, Signal};
use crate::error::{Result, SegError};
use crate::evalue::Prior;
use crate::segmenter::{derive_seed, segment, SegConfig};

const LN_2PI: f64 = 1.8378770664093453;

/// Parameters of the simulated changepoint process: geometric gaps between
/// changepoints and alternating segment variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n: usize,
    /// Expected number of changepoints over the whole signal.
    pub expected_k: usize,
    pub var_low: f64,
    pub var_high: f64,
    pub seed: u64,
    pub replicates: usize,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            n: 100_000,
            expected_k: 50,
            var_low: 1.0,
            var_high: 2.0,
            seed: 0,
            replicates: 10,
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 100 {
            return Err(SegError::InvalidInput(format!(
                "simulated signal needs at least 100 samples, got {}",
                self.n
            )));
        }
        if self.expected_k < 1 || self.expected_k >= self.n {
            return Err(SegError::InvalidInput(format!(
                "expected changepoint count {} out of range for n = {}",
                self.expected_k, self.n
            )));
        }
        if !(self.var_low > 0.0 && self.var_high > 0.0) {
            return Err(SegError::InvalidInput(
                "segment variances must be positive".into(),
            ));
        }
        if self.replicates == 0 {
            return Err(SegError::InvalidInput("replicates must be >= 1".into()));
        }
        Ok(())
    }
}

/// Draws one signal from the spec: inter-changepoint gaps are geometric
/// with success probability `expected_k / n` (so the expected segment
/// length scales linearly with `n`), segments alternate `var_low` and
/// `var_high` starting at `var_low`, samples are scaled standard normals.
///
/// Deterministic for a fixed seed. Returns the signal and the true
/// changepoint locations.
pub fn simulate(spec: &SimSpec) -> Result<(Signal, Vec<usize>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = spec.expected_k as f64 / spec.n as f64;
    let gaps = Geometric::new(p)
        .map_err(|e| SegError::InvalidInput(format!("bad gap probability {p}: {e}")))?;

    let mut changepoints = Vec::with_capacity(spec.expected_k * 2);
    let mut position = 0usize;
    loop {
        // Geometric counts failures; shifting by one keeps gaps >= 1 with
        // mean exactly n / expected_k.
        let gap = 1 + gaps.sample(&mut rng) as usize;
        position = position.saturating_add(gap);
        if position >= spec.n {
            break;
        }
        changepoints.push(position);
    }

    let normal = StandardNormal;
    let sd_low = spec.var_low.sqrt();
    let sd_high = spec.var_high.sqrt();
    let mut samples = Vec::with_capacity(spec.n);
    let mut next_cp = 0usize;
    let mut high = false;
    for i in 0..spec.n {
        if next_cp < changepoints.len() && i == changepoints[next_cp] {
            high = !high;
            next_cp += 1;
        }
        let sd = if high { sd_high } else { sd_low };
        samples.push(sd * Distribution::<f64>::sample(&normal, &mut rng));
    }
    Ok((Signal::new(samples, None)?, changepoints))
}

/// Detection scores for an estimated changepoint set against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub precision: f64,
    pub recall: f64,
    /// Conventional `2pr / (p + r)`.
    pub f1_standard: f64,
    /// The `pr / (p + r)` variant (maximum 0.5); reported alongside the
    /// standard form because published tables mix the two.
    pub f1_paper: f64,
    pub true_positives: usize,
}

/// Greedy one-to-one nearest-first matching within `tol` samples.
///
/// Both lists must be sorted ascending. Tie-breaking is symmetric, so
/// swapping the two lists swaps precision and recall exactly.
pub fn match_score(true_cps: &[usize], est_cps: &[usize], tol: usize) -> Result<MatchScore> {
    for list in [true_cps, est_cps] {
        if list.windows(2).any(|w| w[0] > w[1]) {
            return Err(SegError::InvalidInput(
                "changepoint lists must be sorted ascending".into(),
            ));
        }
    }

    // (distance, symmetric tie keys, true index, est index)
    let mut pairs: Vec<(usize, usize, usize, usize, usize)> = Vec::new();
    for (ti, &t) in true_cps.iter().enumerate() {
        for (ei, &e) in est_cps.iter().enumerate() {
            let dist = t.abs_diff(e);
            if dist <= tol {
                pairs.push((dist, t.min(e), t.max(e), ti, ei));
            }
        }
    }
    pairs.sort_unstable();

    let mut true_used = vec![false; true_cps.len()];
    let mut est_used = vec![false; est_cps.len()];
    let mut tp = 0usize;
    for &(_, _, _, ti, ei) in &pairs {
        if !true_used[ti] && !est_used[ei] {
            true_used[ti] = true;
            est_used[ei] = true;
            tp += 1;
        }
    }

    let precision = if est_cps.is_empty() {
        if true_cps.is_empty() {
            1.0
        } else {
            0.0
        }
    } else {
        tp as f64 / est_cps.len() as f64
    };
    let recall = if true_cps.is_empty() {
        if est_cps.is_empty() {
            1.0
        } else {
            0.0
        }
    } else {
        tp as f64 / true_cps.len() as f64
    };
    let denom = precision + recall;
    let (f1_standard, f1_paper) = if denom > 0.0 {
        (
            2.0 * precision * recall / denom,
            precision * recall / denom,
        )
    } else {
        (0.0, 0.0)
    };
    Ok(MatchScore {
        precision,
        recall,
        f1_standard,
        f1_paper,
        true_positives: tp,
    })
}

/// Bayesian Information Criterion of a segmentation: twice the negative
/// maximized Gaussian log-likelihood (per-segment variance at its MLE) plus
/// `(2m + 1) ln N`, counting each changepoint location and each segment
/// variance as a parameter. Lower is better.
pub fn bic(prefix: &EnergyPrefix, changepoints: &[usize]) -> Result<f64> {
    let n = prefix.len();
    let mut bounds = Vec::with_capacity(changepoints.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(changepoints);
    bounds.push(n);
    let mut log_lik = 0.0;
    for pair in bounds.windows(2) {
        if pair[0] >= pair[1] || pair[1] > n {
            return Err(SegError::InvalidInput(format!(
                "invalid changepoints: segment ({}, {}]",
                pair[0], pair[1]
            )));
        }
        let len = (pair[1] - pair[0]) as f64;
        let energy = prefix.energy(pair[0], pair[1]);
        if energy <= 0.0 {
            return Err(SegError::DegenerateSegment(format!(
                "zero energy in segment ({}, {}]",
                pair[0], pair[1]
            )));
        }
        log_lik += -0.5 * len * (LN_2PI + (energy / len).ln() + 1.0);
    }
    let m = changepoints.len() as f64;
    Ok(-2.0 * log_lik + (2.0 * m + 1.0) * (n as f64).ln())
}

/// One point of the BIC-versus-beta curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaBicPoint {
    pub beta: f64,
    pub bic: f64,
    pub changepoints: usize,
}

/// Outcome of [`select_beta`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSelection {
    pub beta_star: f64,
    pub curve: Vec<BetaBicPoint>,
    /// Set when no knee could be identified (flat or too-short curve) and
    /// the smallest beta was returned instead.
    pub fallback: bool,
}

/// Runs the segmenter once per grid value of the Laplace scale and picks
/// the knee of the BIC-versus-log(beta) curve by maximum discrete
/// curvature. The full curve is returned so a human can override the pick.
pub fn select_beta(
    signal: &Signal,
    beta_grid: &[f64],
    config: &SegConfig,
) -> Result<BetaSelection> {
    if beta_grid.len() < 3 {
        return Err(SegError::InvalidInput(
            "beta grid needs at least 3 points".into(),
        ));
    }
    if beta_grid.windows(2).any(|w| w[0] >= w[1]) || beta_grid[0] <= 0.0 {
        return Err(SegError::InvalidInput(
            "beta grid must be positive and strictly ascending".into(),
        ));
    }
    let prefix = EnergyPrefix::build(signal);
    let runs: Vec<(f64, Result<BetaBicPoint>)> = beta_grid
        .par_iter()
        .map(|&beta| {
            let run = || -> Result<BetaBicPoint> {
                let mut cfg = config.clone();
                cfg.prior = Prior::laplace(beta)?;
                let result = segment(signal, &cfg)?;
                Ok(BetaBicPoint {
                    beta,
                    bic: bic(&prefix, &result.changepoints)?,
                    changepoints: result.changepoints.len(),
                })
            };
            (beta, run())
        })
        .collect();

    let mut curve = Vec::with_capacity(beta_grid.len());
    let mut failures = Vec::new();
    for (beta, outcome) in runs {
        match outcome {
            Ok(point) => curve.push(point),
            Err(e) => failures.push(format!("beta {beta}: {e}")),
        }
    }
    if curve.is_empty() {
        return Err(SegError::NoSelection(format!(
            "every beta failed: {}",
            failures.join("; ")
        )));
    }

    let beta_star = knee_by_curvature(&curve);
    Ok(BetaSelection {
        beta_star: beta_star.unwrap_or(curve[0].beta),
        fallback: beta_star.is_none(),
        curve,
    })
}

// Maximum discrete curvature of the (ln beta, BIC) curve after rescaling
// both axes to [0, 1]; None when the curve is flat or too short.
fn knee_by_curvature(curve: &[BetaBicPoint]) -> Option<f64> {
    if curve.len() < 3 {
        return None;
    }
    let xs: Vec<f64> = curve.iter().map(|p| p.beta.ln()).collect();
    let ys: Vec<f64> = curve.iter().map(|p| p.bic).collect();
    let (x_min, x_max) = (xs[0], xs[xs.len() - 1]);
    let y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if y_max - y_min <= 1e-9 * y_max.abs().max(1.0) {
        return None;
    }
    let nx: Vec<f64> = xs.iter().map(|x| (x - x_min) / (x_max - x_min)).collect();
    let ny: Vec<f64> = ys.iter().map(|y| (y - y_min) / (y_max - y_min)).collect();

    let mut best: Option<(f64, f64)> = None;
    for i in 1..curve.len() - 1 {
        let h0 = nx[i] - nx[i - 1];
        let h1 = nx[i + 1] - nx[i];
        if h0 <= 0.0 || h1 <= 0.0 {
            continue;
        }
        let d1 = (ny[i + 1] - ny[i - 1]) / (h0 + h1);
        let d2 = 2.0 * ((ny[i + 1] - ny[i]) / h1 - (ny[i] - ny[i - 1]) / h0) / (h0 + h1);
        let kappa = d2.abs() / (1.0 + d1 * d1).powf(1.5);
        if best.is_none_or(|(k, _)| kappa > k) {
            best = Some((kappa, curve[i].beta));
        }
    }
    best.map(|(_, beta)| beta)
}

/// Algorithms the benchmark runner can exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    BayesJeffreys,
    BayesLaplace,
    Pelt,
    Binseg,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::BayesJeffreys => "bayes-jeffreys",
            Algorithm::BayesLaplace => "bayes-laplace",
            Algorithm::Pelt => "pelt",
            Algorithm::Binseg => "binseg",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = SegError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bayes-jeffreys" | "jeffreys" => Ok(Algorithm::BayesJeffreys),
            "bayes-laplace" | "laplace" => Ok(Algorithm::BayesLaplace),
            "pelt" => Ok(Algorithm::Pelt),
            "binseg" => Ok(Algorithm::Binseg),
            other => Err(SegError::InvalidInput(format!(
                "unknown algorithm '{other}' (expected bayes-jeffreys, bayes-laplace, pelt or binseg)"
            ))),
        }
    }
}

/// Significance levels scanned when BIC-selecting the Jeffreys run.
pub const BENCH_JEFFREYS_ALPHAS: [f64; 4] = [0.01, 0.05, 0.10, 0.20];
/// Laplace scales scanned when BIC-selecting the Laplace run (at fixed
/// alpha 0.05).
pub const BENCH_LAPLACE_BETAS: [f64; 5] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1];
/// Minimum segment length for the PELT and binary-segmentation baselines.
pub const BENCH_BASELINE_MIN_SEG: usize = 2;

/// One row of the benchmark table; every numeric field is an average over
/// the successful replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub n: usize,
    pub algorithm: String,
    pub time_s: f64,
    pub true_k: f64,
    pub est_k: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1_standard: f64,
    pub f1_paper: f64,
    pub failed_replicates: usize,
}

fn bench_segmenter_config(spec: &SimSpec, seed: u64) -> SegConfig {
    SegConfig {
        seed,
        ..SegConfig::default()
    }
    .tap_clamp(spec.n)
}

trait TapClamp {
    fn tap_clamp(self, n: usize) -> Self;
}

impl TapClamp for SegConfig {
    // Small benchmark signals cannot hold the default 1000-sample minimum
    // segment; shrink it proportionally.
    fn tap_clamp(mut self, n: usize) -> Self {
        if n < 2 * self.min_seg_len {
            self.min_seg_len = (n / 10).max(2);
            self.base_resolution = self.min_seg_len.min(self.base_resolution);
        }
        self
    }
}

fn run_algorithm(
    algorithm: Algorithm,
    signal: &Signal,
    prefix: &EnergyPrefix,
    spec: &SimSpec,
    rep: usize,
) -> Result<Vec<usize>> {
    match algorithm {
        Algorithm::Pelt => pelt(prefix, &Penalty::Mbic, BENCH_BASELINE_MIN_SEG),
        Algorithm::Binseg => binseg(prefix, &Penalty::Mbic, BENCH_BASELINE_MIN_SEG),
        Algorithm::BayesJeffreys => {
            let mut best: Option<(f64, Vec<usize>)> = None;
            let mut errors = Vec::new();
            for (i, &alpha) in BENCH_JEFFREYS_ALPHAS.iter().enumerate() {
                let mut cfg =
                    bench_segmenter_config(spec, derive_seed(spec.seed, rep as u64, 100 + i as u64));
                cfg.alpha = alpha;
                cfg.prior = Prior::Jeffreys;
                match segment(signal, &cfg).and_then(|r| {
                    let score = bic(prefix, &r.changepoints)?;
                    Ok((score, r.changepoints))
                }) {
                    Ok((score, cps)) => {
                        if best.as_ref().is_none_or(|(b, _)| score < *b) {
                            best = Some((score, cps));
                        }
                    }
                    Err(e) => errors.push(format!("alpha {alpha}: {e}")),
                }
            }
            best.map(|(_, cps)| cps).ok_or_else(|| {
                SegError::NoSelection(format!("all alphas failed: {}", errors.join("; ")))
            })
        }
        Algorithm::BayesLaplace => {
            let mut best: Option<(f64, Vec<usize>)> = None;
            let mut errors = Vec::new();
            for (i, &beta) in BENCH_LAPLACE_BETAS.iter().enumerate() {
                let mut cfg =
                    bench_segmenter_config(spec, derive_seed(spec.seed, rep as u64, 200 + i as u64));
                cfg.prior = Prior::laplace(beta)?;
                match segment(signal, &cfg).and_then(|r| {
                    let score = bic(prefix, &r.changepoints)?;
                    Ok((score, r.changepoints))
                }) {
                    Ok((score, cps)) => {
                        if best.as_ref().is_none_or(|(b, _)| score < *b) {
                            best = Some((score, cps));
                        }
                    }
                    Err(e) => errors.push(format!("beta {beta}: {e}")),
                }
            }
            best.map(|(_, cps)| cps).ok_or_else(|| {
                SegError::NoSelection(format!("all betas failed: {}", errors.join("; ")))
            })
        }
    }
}

/// Runs every algorithm over every spec, averaging detection scores across
/// replicates. The Bayesian variants select their hyperparameters by
/// minimum BIC per replicate. Individual replicate failures are counted,
/// not fatal.
pub fn run_benchmark(specs: &[SimSpec], algorithms: &[Algorithm]) -> Result<Vec<EvalRecord>> {
    for spec in specs {
        spec.validate()?;
    }
    let mut records = Vec::with_capacity(specs.len() * algorithms.len());
    for spec in specs {
        // Same replicate signals for every algorithm.
        let replicates: Vec<(Signal, Vec<usize>)> = (0..spec.replicates)
            .into_par_iter()
            .map(|rep| {
                let rep_spec = SimSpec {
                    seed: derive_seed(spec.seed, 0x5eed, rep as u64),
                    ..*spec
                };
                simulate(&rep_spec)
            })
            .collect::<Result<_>>()?;
        let prefixes: Vec<EnergyPrefix> = replicates
            .par_iter()
            .map(|(signal, _)| EnergyPrefix::build(signal))
            .collect();

        for &algorithm in algorithms {
            let outcomes: Vec<Result<(f64, MatchScore, usize, usize)>> = replicates
                .par_iter()
                .zip(&prefixes)
                .enumerate()
                .map(|(rep, ((signal, truth), prefix))| {
                    let started = Instant::now();
                    let est = run_algorithm(algorithm, signal, prefix, spec, rep)?;
                    let elapsed = started.elapsed().as_secs_f64();
                    let score = match_score(truth, &est, spec.n / 100)?;
                    Ok((elapsed, score, truth.len(), est.len()))
                })
                .collect();

            let mut ok = 0usize;
            let mut failed = 0usize;
            let mut sums = [0.0f64; 8];
            for outcome in outcomes {
                match outcome {
                    Ok((time, score, true_k, est_k)) => {
                        ok += 1;
                        sums[0] += time;
                        sums[1] += true_k as f64;
                        sums[2] += est_k as f64;
                        sums[3] += score.precision;
                        sums[4] += score.recall;
                        sums[5] += score.f1_standard;
                        sums[6] += score.f1_paper;
                    }
                    Err(_) => failed += 1,
                }
            }
            let denom = ok.max(1) as f64;
            records.push(EvalRecord {
                n: spec.n,
                algorithm: algorithm.name().to_string(),
                time_s: sums[0] / denom,
                true_k: sums[1] / denom,
                est_k: sums[2] / denom,
                precision: sums[3] / denom,
                recall: sums[4] / denom,
                f1_standard: sums[5] / denom,
                f1_paper: sums[6] / denom,
                failed_replicates: failed,
            });
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::McmcConfig;
    use crate::segmenter::Significance;
    use approx::assert_relative_eq;

    #[test]
    fn simulate_is_deterministic_and_seed_sensitive() {
        let spec = SimSpec {
            n: 5_000,
            expected_k: 10,
            seed: 13,
            ..SimSpec::default()
        };
        let (a_sig, a_cps) = simulate(&spec).unwrap();
        let (b_sig, b_cps) = simulate(&spec).unwrap();
        assert_eq!(a_cps, b_cps);
        assert_eq!(a_sig.samples(), b_sig.samples());
        let (_, c_cps) = simulate(&SimSpec { seed: 14, ..spec }).unwrap();
        assert_ne!(a_cps, c_cps);
    }

    #[test]
    fn simulate_mean_count_tracks_expectation() {
        let mut total = 0usize;
        let reps = 400;
        for seed in 0..reps {
            let spec = SimSpec {
                n: 20_000,
                expected_k: 10,
                seed,
                ..SimSpec::default()
            };
            total += simulate(&spec).unwrap().1.len();
        }
        let mean = total as f64 / reps as f64;
        assert!(
            (mean - 10.0).abs() < 1.0,
            "mean changepoint count {mean} far from 10"
        );
    }

    #[test]
    fn simulate_alternates_variances() {
        let spec = SimSpec {
            n: 60_000,
            expected_k: 4,
            var_low: 1.0,
            var_high: 2.0,
            seed: 3,
            ..SimSpec::default()
        };
        let (signal, cps) = simulate(&spec).unwrap();
        let prefix = EnergyPrefix::build(&signal);
        let mut bounds = vec![0];
        bounds.extend(&cps);
        bounds.push(spec.n);
        for (i, pair) in bounds.windows(2).enumerate() {
            let len = pair[1] - pair[0];
            if len < 2_000 {
                continue;
            }
            let var = prefix.energy(pair[0], pair[1]) / len as f64;
            let expected = if i % 2 == 0 { 1.0 } else { 2.0 };
            assert!(
                (var / expected - 1.0).abs() < 0.25,
                "segment {i} variance {var} != {expected}"
            );
        }
    }

    #[test]
    fn match_score_spec_examples() {
        let s = match_score(&[100], &[100], 10).unwrap();
        assert_eq!(s.precision, 1.0);
        assert_eq!(s.recall, 1.0);
        assert_eq!(s.f1_paper, 0.5);
        assert_eq!(s.f1_standard, 1.0);

        let s = match_score(&[100], &[98, 500], 10).unwrap();
        assert_eq!(s.precision, 0.5);
        assert_eq!(s.recall, 1.0);
        assert_relative_eq!(s.f1_paper, 0.3333, epsilon = 1e-4);
        assert_relative_eq!(s.f1_standard, 0.6667, epsilon = 1e-4);

        // Published-table cross-check for the no-factor-2 variant.
        let p: f64 = 0.179;
        let r: f64 = 0.417;
        let f1 = p * r / (p + r);
        assert_relative_eq!(f1, 0.1253, epsilon = 5e-4);
    }

    #[test]
    fn match_score_empty_conventions_and_validation() {
        let s = match_score(&[], &[], 10).unwrap();
        assert_eq!((s.precision, s.recall), (1.0, 1.0));
        assert_eq!(s.f1_standard, 1.0);
        assert_eq!(s.f1_paper, 0.5);

        let s = match_score(&[5], &[], 10).unwrap();
        assert_eq!((s.precision, s.recall), (0.0, 0.0));
        assert_eq!(s.f1_standard, 0.0);

        let s = match_score(&[], &[5], 10).unwrap();
        assert_eq!((s.precision, s.recall), (0.0, 0.0));

        assert!(match_score(&[5, 3], &[1], 10).is_err());
    }

    #[test]
    fn match_score_one_to_one_prevents_double_counting() {
        // Two estimates near one truth: only one may match.
        let s = match_score(&[100], &[95, 105], 10).unwrap();
        assert_eq!(s.true_positives, 1);
        assert_eq!(s.precision, 0.5);
        assert_eq!(s.recall, 1.0);
    }

    #[test]
    fn match_score_swap_symmetry() {
        let a = vec![10, 30, 55, 90, 140];
        let b = vec![12, 29, 70, 141, 160, 200];
        let ab = match_score(&a, &b, 5).unwrap();
        let ba = match_score(&b, &a, 5).unwrap();
        assert_eq!(ab.precision, ba.recall);
        assert_eq!(ab.recall, ba.precision);
        assert_eq!(ab.true_positives, ba.true_positives);
    }

    #[test]
    fn bic_closed_form_and_parameter_penalty() {
        // 100 unit samples: energy 100, variance 1.
        let signal = Signal::new(vec![1.0; 100], None).unwrap();
        let prefix = EnergyPrefix::build(&signal);
        let b0 = bic(&prefix, &[]).unwrap();
        let expected_ll = -50.0 * (LN_2PI + 1.0);
        assert_relative_eq!(expected_ll, -141.8939, epsilon = 1e-4);
        assert_relative_eq!(b0, -2.0 * expected_ll + 100f64.ln(), epsilon = 1e-9);
        assert_relative_eq!(b0, 288.393, epsilon = 1e-3);

        // A split leaving both variances at the pooled value costs exactly
        // two extra parameters.
        let b1 = bic(&prefix, &[50]).unwrap();
        assert_relative_eq!(b1 - b0, 2.0 * 100f64.ln(), epsilon = 1e-9);

        let zero = Signal::new(vec![0.0; 10], None).unwrap();
        assert!(bic(&EnergyPrefix::build(&zero), &[]).is_err());
        assert!(bic(&prefix, &[50, 50]).is_err());
    }

    fn quick_config(seed: u64) -> SegConfig {
        SegConfig {
            alpha: 0.05,
            prior: Prior::Jeffreys,
            base_resolution: 100,
            min_seg_len: 300,
            max_changepoints: None,
            mcmc: McmcConfig {
                chain_length: 5_000,
                burn_in: 2_000,
                adapt_start: 500,
                epsilon: 1e-6,
                seed: 0,
            },
            seed,
            significance: Significance::ChiSquare,
        }
    }

    #[test]
    fn select_beta_finds_detection_knee() {
        // One strong step: tiny betas suppress the detection entirely,
        // large ones keep it; the knee sits at the transition.
        let spec = SimSpec {
            n: 6_000,
            expected_k: 1,
            var_low: 1.0,
            var_high: 4.0,
            seed: 77,
            ..SimSpec::default()
        };
        let mut samples = Vec::new();
        let (first, _) = simulate(&SimSpec { expected_k: 1, n: 3_000, seed: 100, var_high: 1.0, ..spec }).unwrap();
        samples.extend_from_slice(first.samples());
        let (second, _) = simulate(&SimSpec { expected_k: 1, n: 3_000, seed: 101, var_low: 4.0, var_high: 4.0, ..spec }).unwrap();
        samples.extend(second.samples().iter().map(|x| x * 2.0));
        let signal = Signal::new(samples, None).unwrap();

        let grid: Vec<f64> = (0..9).map(|i| 1e-6 * 10f64.powf(i as f64 * 5.0 / 8.0)).collect();
        let selection = select_beta(&signal, &grid, &quick_config(5)).unwrap();
        assert_eq!(selection.curve.len(), 9);
        let at = |beta: f64| {
            selection
                .curve
                .iter()
                .find(|p| (p.beta - beta).abs() < 1e-12)
                .unwrap()
        };
        assert_eq!(at(grid[0]).changepoints, 0, "smallest beta should detect nothing");
        let chosen = selection
            .curve
            .iter()
            .find(|p| (p.beta - selection.beta_star).abs() < 1e-12)
            .unwrap();
        assert_eq!(chosen.changepoints, 1, "knee beta should detect the step");
        assert!(!selection.fallback);
    }

    #[test]
    fn select_beta_flat_curve_falls_back() {
        // White noise: no beta detects anything, the curve is flat.
        let (signal, _) = simulate(&SimSpec {
            n: 2_000,
            expected_k: 1,
            var_low: 1.0,
            var_high: 1.0,
            seed: 8,
            ..SimSpec::default()
        })
        .unwrap();
        let grid = [1e-5, 1e-4, 1e-3, 1e-2];
        let selection = select_beta(&signal, &grid, &quick_config(9)).unwrap();
        assert!(selection.fallback);
        assert_eq!(selection.beta_star, 1e-5);
    }

    #[test]
    fn select_beta_validates_grid() {
        let (signal, _) = simulate(&SimSpec {
            n: 2_000,
            expected_k: 1,
            seed: 1,
            ..SimSpec::default()
        })
        .unwrap();
        let cfg = quick_config(0);
        assert!(select_beta(&signal, &[1e-3, 1e-2], &cfg).is_err());
        assert!(select_beta(&signal, &[1e-2, 1e-3, 1e-4], &cfg).is_err());
        assert!(select_beta(&signal, &[0.0, 1e-3, 1e-2], &cfg).is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for name in ["bayes-jeffreys", "bayes-laplace", "pelt", "binseg"] {
            let parsed: Algorithm = name.parse().unwrap();
            assert_eq!(parsed.name(), name);
        }
        assert!("foo".parse::<Algorithm>().is_err());
    }

    #[test]
    fn benchmark_empty_algorithm_list_gives_empty_table() {
        let specs = [SimSpec {
            n: 1_000,
            expected_k: 2,
            replicates: 1,
            ..SimSpec::default()
        }];
        let records = run_benchmark(&specs, &[]).unwrap();
        assert!(records.is_empty());
    }

    #[test]
    fn benchmark_runs_baselines_on_small_spec() {
        let specs = [SimSpec {
            n: 2_000,
            expected_k: 3,
            replicates: 2,
            seed: 5,
            ..SimSpec::default()
        }];
        let records = run_benchmark(&specs, &[Algorithm::Pelt, Algorithm::Binseg]).unwrap();
        assert_eq!(records.len(), 2);
        for record in &records {
            assert_eq!(record.failed_replicates, 0);
            assert!(record.precision >= 0.0 && record.precision <= 1.0);
            assert!(record.f1_standard >= record.f1_paper);
        }
    }
}
