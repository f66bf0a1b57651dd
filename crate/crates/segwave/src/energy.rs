//! Signal representation, prefix energy statistics and the marginal
//! changepoint posterior with its mode search.
//!
//! The changepoint location is scored by the marginal posterior of a single
//! split, with both segment variances integrated out under scale-invariant
//! priors. Everything here works off cumulative sums of squared amplitudes,
//! so any segment energy is an O(1) lookup.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Result, SegError};

/// Zero-mean amplitude sequence with an optional sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate_hz: Option<f64>,
}

impl Signal {
    /// Validates length >= 2 and that every sample is finite.
    pub fn new(samples: Vec<f64>, sample_rate_hz: Option<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(SegError::InvalidInput(format!(
                "signal must have at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(pos) = samples.iter().position(|x| !x.is_finite()) {
            return Err(SegError::InvalidInput(format!(
                "non-finite sample at index {pos}"
            )));
        }
        if let Some(rate) = sample_rate_hz {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(SegError::InvalidInput(format!(
                    "sample rate must be positive and finite, got {rate}"
                )));
            }
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> Option<f64> {
        self.sample_rate_hz
    }
}

/// Cumulative sums of squared amplitudes; `cum[k] = sum of samples[0..k]^2`.
///
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyPrefix {
    cum: Vec<f64>,
    n: usize,
}

impl EnergyPrefix {
    /// Builds the prefix with compensated (Neumaier) summation, keeping the
    /// relative error against exact arithmetic below 1e-12 even for very
    /// long signals.
    pub fn build(signal: &Signal) -> Self {
        let samples = signal.samples();
        let mut cum = Vec::with_capacity(samples.len() + 1);
        cum.push(0.0);
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for &x in samples {
            let sq = x * x;
            let t = sum + sq;
            if sum.abs() >= sq.abs() {
                comp += (sum - t) + sq;
            } else {
                comp += (sq - t) + sum;
            }
            sum = t;
            cum.push(sum + comp);
        }
        EnergyPrefix {
            n: samples.len(),
            cum,
        }
    }

    /// Number of samples in the underlying signal.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Energy of the half-open segment `(a, b]` in prefix terms, i.e. of
    /// samples `a..b`. Clamped at zero against rounding in the subtraction.
    pub fn energy(&self, a: usize, b: usize) -> f64 {
        debug_assert!(a <= b && b <= self.n);
        (self.cum[b] - self.cum[a]).max(0.0)
    }

    /// Total energy of the signal.
    pub fn total_energy(&self) -> f64 {
        self.cum[self.n]
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }
}

/// Convenience constructor mirroring the operation name used throughout.
pub fn build_prefix(signal: &Signal) -> EnergyPrefix {
    EnergyPrefix::build(signal)
}

/// Arithmetic grid of admissible changepoint candidates.
///
/// Candidates are `lo, lo + step, lo + 2*step, ...` up to `hi` inclusive.
/// `min_margin` is the minimum number of samples required on each side of
/// any candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateGrid {
    pub lo: usize,
    pub hi: usize,
    pub step: usize,
    pub min_margin: usize,
}

impl CandidateGrid {
    pub const DEFAULT_MIN_MARGIN: usize = 2;

    pub fn new(lo: usize, hi: usize, step: usize, min_margin: usize) -> Result<Self> {
        if step == 0 {
            return Err(SegError::InvalidInput("grid step must be >= 1".into()));
        }
        if lo > hi {
            return Err(SegError::InvalidInput(format!(
                "grid lo {lo} exceeds hi {hi}"
            )));
        }
        if lo < min_margin {
            return Err(SegError::InvalidInput(format!(
                "grid lo {lo} below min margin {min_margin}"
            )));
        }
        Ok(Self {
            lo,
            hi,
            step,
            min_margin,
        })
    }

    /// Grid covering every admissible index of an `n`-sample signal at the
    /// given step, with the default margin.
    pub fn spanning(n: usize, step: usize) -> Result<Self> {
        let margin = Self::DEFAULT_MIN_MARGIN;
        if n < 2 * margin {
            return Err(SegError::InvalidInput(format!(
                "signal of {n} samples leaves no admissible candidates"
            )));
        }
        Self::new(margin, n - margin, step, margin)
    }

    fn validate_for(&self, n: usize) -> Result<()> {
        if self.hi + self.min_margin > n {
            return Err(SegError::InvalidInput(format!(
                "grid hi {} leaves fewer than {} samples on the right of an {n}-sample signal",
                self.hi, self.min_margin
            )));
        }
        Ok(())
    }

    /// Iterator over the candidate indices.
    pub fn candidates(&self) -> impl Iterator<Item = usize> + '_ {
        (self.lo..=self.hi).step_by(self.step)
    }
}

/// Log of the unnormalized marginal changepoint posterior at split `t`,
/// restricted to the window `(a, b]` of the prefix.
///
/// With segment energies `s1` over `(a, t]` and `s2` over `(t, b]` and
/// window length `n = b - a`, the value is
///
/// ```text
/// -(t'/2) ln s1 - ((n-t')/2) ln s2 + lnGamma(t'/2) + lnGamma((n-t')/2)
/// ```
///
/// where `t' = t - a`. The candidate prior over locations is uniform, so it
/// contributes only an additive constant and is dropped.
pub fn log_marginal_posterior_in(
    prefix: &EnergyPrefix,
    a: usize,
    b: usize,
    t: usize,
) -> Result<f64> {
    if b > prefix.len() || a >= b {
        return Err(SegError::InvalidInput(format!(
            "window ({a}, {b}] out of range for {}-sample prefix",
            prefix.len()
        )));
    }
    if t <= a || t >= b {
        return Err(SegError::InvalidInput(format!(
            "changepoint {t} outside the open window ({a}, {b})"
        )));
    }
    let s1 = prefix.energy(a, t);
    let s2 = prefix.energy(t, b);
    if s1 <= 0.0 || s2 <= 0.0 {
        return Err(SegError::DegenerateSegment(format!(
            "zero-energy side at split {t} in ({a}, {b}]"
        )));
    }
    let left = (t - a) as f64;
    let right = (b - t) as f64;
    Ok(-0.5 * left * s1.ln() - 0.5 * right * s2.ln() + ln_gamma(0.5 * left)
        + ln_gamma(0.5 * right))
}

/// Whole-signal marginal posterior at split `t` (see
/// [`log_marginal_posterior_in`]).
pub fn log_marginal_posterior(prefix: &EnergyPrefix, t: usize) -> Result<f64> {
    log_marginal_posterior_in(prefix, 0, prefix.len(), t)
}

const PARALLEL_SCAN_THRESHOLD: usize = 8192;

/// Posterior-mode changepoint over a candidate grid.
///
/// Candidates with a zero-energy side are skipped. Ties break toward the
/// smallest index, and the scan is deterministic whether it runs serially
/// or in parallel.
pub fn argmax_changepoint(prefix: &EnergyPrefix, grid: &CandidateGrid) -> Result<(usize, f64)> {
    argmax_changepoint_in(prefix, 0, prefix.len(), grid)
}

/// Window-restricted variant of [`argmax_changepoint`]; candidate indices in
/// the grid are absolute positions in the prefix.
pub fn argmax_changepoint_in(
    prefix: &EnergyPrefix,
    a: usize,
    b: usize,
    grid: &CandidateGrid,
) -> Result<(usize, f64)> {
    if a == 0 && b == prefix.len() {
        grid.validate_for(prefix.len())?;
    }
    let n_candidates = if grid.hi >= grid.lo {
        (grid.hi - grid.lo) / grid.step + 1
    } else {
        0
    };

    let score = |t: usize| -> Option<(usize, f64)> {
        log_marginal_posterior_in(prefix, a, b, t).ok().map(|v| (t, v))
    };
    let pick = |best: Option<(usize, f64)>, cand: Option<(usize, f64)>| match (best, cand) {
        (None, c) => c,
        (b, None) => b,
        (Some((bt, bv)), Some((ct, cv))) => {
            if cv > bv || (cv == bv && ct < bt) {
                Some((ct, cv))
            } else {
                Some((bt, bv))
            }
        }
    };

    let best = if n_candidates >= PARALLEL_SCAN_THRESHOLD {
        grid.candidates()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&t| score(t))
            .reduce(|| None, pick)
    } else {
        grid.candidates().map(score).fold(None, pick)
    };

    best.ok_or(SegError::NoCandidate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sig(samples: &[f64]) -> Signal {
        Signal::new(samples.to_vec(), None).unwrap()
    }

    #[test]
    fn prefix_squares_directly() {
        let p = EnergyPrefix::build(&sig(&[3.0, 4.0]));
        assert_eq!(p.cumulative(), &[0.0, 9.0, 25.0]);
    }

    #[test]
    fn prefix_of_silence_is_zero() {
        let p = EnergyPrefix::build(&sig(&[0.0; 5]));
        assert_eq!(p.cumulative(), &[0.0; 6]);
        assert_eq!(p.energy(1, 4), 0.0);
    }

    #[test]
    fn signal_rejects_short_and_nonfinite() {
        assert!(Signal::new(vec![1.0], None).is_err());
        assert!(Signal::new(vec![1.0, f64::NAN], None).is_err());
        assert!(Signal::new(vec![1.0, f64::INFINITY], None).is_err());
        assert!(Signal::new(vec![1.0, 2.0], Some(0.0)).is_err());
    }

    #[test]
    fn marginal_posterior_matches_hand_values() {
        // S1 = S2 = 2, Gamma(1) = 1 -> -2 ln 2.
        let p = EnergyPrefix::build(&sig(&[1.0, -1.0, 1.0, -1.0]));
        let v = log_marginal_posterior(&p, 2).unwrap();
        assert_relative_eq!(v, -1.386294, epsilon = 1e-6);

        // S1 = 4, S2 = 400, Gamma(2) = 1.
        let p = EnergyPrefix::build(&sig(&[1.0, -1.0, 1.0, -1.0, 10.0, -10.0, 10.0, -10.0]));
        let v = log_marginal_posterior(&p, 4).unwrap();
        assert_relative_eq!(v, -14.7555, epsilon = 1e-4);
    }

    #[test]
    fn marginal_posterior_sign_flip_invariant() {
        let y = [0.3, -1.2, 2.4, 0.7, -0.1, 1.9];
        let flipped: Vec<f64> = y.iter().map(|x| -x).collect();
        let p = EnergyPrefix::build(&sig(&y));
        let q = EnergyPrefix::build(&sig(&flipped));
        for t in 1..y.len() {
            assert_eq!(
                log_marginal_posterior(&p, t).unwrap(),
                log_marginal_posterior(&q, t).unwrap()
            );
        }
    }

    #[test]
    fn marginal_posterior_rejects_degenerate_side() {
        let p = EnergyPrefix::build(&sig(&[0.0, 0.0, 1.0, -1.0]));
        match log_marginal_posterior(&p, 2) {
            Err(SegError::DegenerateSegment(_)) => {}
            other => panic!("expected degenerate-segment error, got {other:?}"),
        }
        assert!(log_marginal_posterior(&p, 0).is_err());
        assert!(log_marginal_posterior(&p, 4).is_err());
    }

    #[test]
    fn argmax_prefers_true_split_on_grid() {
        let p = EnergyPrefix::build(&sig(&[1.0, -1.0, 1.0, -1.0, 10.0, -10.0, 10.0, -10.0]));
        let grid = CandidateGrid::new(2, 6, 2, 2).unwrap();
        let (t, v) = argmax_changepoint(&p, &grid).unwrap();
        assert_eq!(t, 4);
        assert_relative_eq!(v, -14.7555, epsilon = 1e-4);
        // The flanking candidates score strictly worse.
        let v2 = log_marginal_posterior(&p, 2).unwrap();
        let v6 = log_marginal_posterior(&p, 6).unwrap();
        assert_relative_eq!(v2, -17.99, epsilon = 0.01);
        assert_relative_eq!(v6, -20.56, epsilon = 0.01);
        assert!(v > v2 && v > v6);
    }

    #[test]
    fn argmax_tie_breaks_to_smallest_index() {
        // Constant signal: scoring is symmetric under t <-> n - t, so the
        // edge pair ties; the smaller index must win. 0.25 energies are
        // exactly representable, keeping the tie bit-exact.
        let p = EnergyPrefix::build(&sig(&[0.5; 10]));
        let grid = CandidateGrid::new(2, 8, 1, 2).unwrap();
        let (t, _) = argmax_changepoint(&p, &grid).unwrap();
        let v2 = log_marginal_posterior(&p, 2).unwrap();
        let v8 = log_marginal_posterior(&p, 8).unwrap();
        assert_eq!(v2, v8);
        assert_eq!(t, 2);
    }

    #[test]
    fn argmax_errors_when_all_candidates_degenerate() {
        let p = EnergyPrefix::build(&sig(&[0.0, 0.0, 0.0, 0.0, 1.0]));
        let grid = CandidateGrid::new(2, 3, 1, 2).unwrap();
        match argmax_changepoint(&p, &grid) {
            Err(SegError::NoCandidate) => {}
            other => panic!("expected no-candidate error, got {other:?}"),
        }
    }

    #[test]
    fn grid_validation() {
        assert!(CandidateGrid::new(2, 8, 0, 2).is_err());
        assert!(CandidateGrid::new(8, 2, 1, 2).is_err());
        assert!(CandidateGrid::new(1, 8, 1, 2).is_err());
        let g = CandidateGrid::new(2, 11, 4, 2).unwrap();
        assert_eq!(g.candidates().collect::<Vec<_>>(), vec![2, 6, 10]);
    }

    #[test]
    fn scaling_shifts_posterior_by_constant() {
        let y: Vec<f64> = (0..40).map(|i| ((i * 37 % 17) as f64 - 8.0) / 3.0).collect();
        let scaled: Vec<f64> = y.iter().map(|x| 3.0 * x).collect();
        let p = EnergyPrefix::build(&sig(&y));
        let q = EnergyPrefix::build(&sig(&scaled));
        let n = y.len() as f64;
        let expected_shift = -0.5 * n * (9.0f64).ln();
        for t in 1..y.len() {
            let d = log_marginal_posterior(&q, t).unwrap() - log_marginal_posterior(&p, t).unwrap();
            assert_relative_eq!(d, expected_shift, epsilon = 1e-8);
        }
        let grid = CandidateGrid::spanning(y.len(), 1).unwrap();
        assert_eq!(
            argmax_changepoint(&p, &grid).unwrap().0,
            argmax_changepoint(&q, &grid).unwrap().0
        );
    }

    #[test]
    fn windowed_posterior_equals_subsignal_posterior() {
        let y: Vec<f64> = (0..30)
            .map(|i| ((i * 13 % 11) as f64 - 5.0) * 0.7)
            .collect();
        let p = EnergyPrefix::build(&sig(&y));
        let sub = EnergyPrefix::build(&sig(&y[5..25]));
        for t in 6..25usize {
            let a = log_marginal_posterior_in(&p, 5, 25, t).unwrap();
            let b = log_marginal_posterior(&sub, t - 5).unwrap();
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
    }
}
