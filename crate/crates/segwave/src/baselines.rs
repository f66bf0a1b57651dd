//! Comparison algorithms: PELT with the variance-change marginal cost,
//! greedy binary segmentation, and an unpruned O(N^2) optimal-partition
//! oracle used to certify exactness.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::energy::EnergyPrefix;
use crate::error::{Result, SegError};

/// Penalty on the number (and, for MBIC, the layout) of segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Penalty {
    /// Modified BIC: `1.5 ln N` per changepoint plus `0.5 ln(L/N)` per
    /// segment, the latter folded into the segment cost so the dynamic
    /// program stays additive.
    Mbic,
    /// Plain BIC: `ln N` per changepoint (two parameters at half a log
    /// each).
    Bic,
    /// Fixed nonnegative penalty per changepoint.
    Manual { value: f64 },
}

impl Penalty {
    pub fn manual(value: f64) -> Result<Self> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(SegError::InvalidInput(format!(
                "manual penalty must be nonnegative and finite, got {value}"
            )));
        }
        Ok(Penalty::Manual { value })
    }
}

/// Cost of fitting one segment `(a, b]` under the integrated-variance
/// model: `(L/2) ln S - lnGamma(L/2)` with `L` the length and `S` the
/// energy. Lower is better.
pub fn segment_cost(prefix: &EnergyPrefix, a: usize, b: usize) -> Result<f64> {
    if a >= b || b > prefix.len() {
        return Err(SegError::InvalidInput(format!(
            "segment ({a}, {b}] out of range for {}-sample prefix",
            prefix.len()
        )));
    }
    let energy = prefix.energy(a, b);
    if energy <= 0.0 {
        return Err(SegError::DegenerateSegment(format!(
            "zero energy in segment ({a}, {b}]"
        )));
    }
    let len = (b - a) as f64;
    Ok(0.5 * len * energy.ln() - ln_gamma(0.5 * len))
}

// Penalty resolved against a fixed signal length: a per-changepoint charge
// plus an optional per-segment length term folded into the cost.
#[derive(Debug, Clone, Copy)]
struct ResolvedPenalty {
    per_changepoint: f64,
    length_weight: f64,
    n: f64,
}

impl ResolvedPenalty {
    fn resolve(penalty: &Penalty, n: usize) -> Self {
        let n_f = n as f64;
        match penalty {
            Penalty::Mbic => Self {
                per_changepoint: 1.5 * n_f.ln(),
                length_weight: 0.5,
                n: n_f,
            },
            Penalty::Bic => Self {
                per_changepoint: n_f.ln(),
                length_weight: 0.0,
                n: n_f,
            },
            Penalty::Manual { value } => Self {
                per_changepoint: *value,
                length_weight: 0.0,
                n: n_f,
            },
        }
    }

    // Segment cost with the folded length term; None when the segment has
    // zero energy and must be excluded.
    fn cost(&self, prefix: &EnergyPrefix, a: usize, b: usize) -> Option<f64> {
        let energy = prefix.energy(a, b);
        if energy <= 0.0 {
            return None;
        }
        let len = (b - a) as f64;
        let base = 0.5 * len * energy.ln() - ln_gamma(0.5 * len);
        if self.length_weight == 0.0 {
            Some(base)
        } else {
            Some(base + self.length_weight * (len / self.n).ln())
        }
    }
}

fn validate_lengths(n: usize, min_seg_len: usize) -> Result<()> {
    if min_seg_len < 2 {
        return Err(SegError::InvalidInput(format!(
            "minimum segment length must be at least 2, got {min_seg_len}"
        )));
    }
    if n < 2 * min_seg_len {
        return Err(SegError::InvalidInput(format!(
            "{n} samples cannot hold two segments of at least {min_seg_len}"
        )));
    }
    Ok(())
}

/// Exact penalized-cost minimizer via the pruned dynamic program.
///
/// Produces the identical partition to [`optimal_partition_bruteforce`] on
/// every instance. Unlike the quadratic-loss setting, this cost family is
/// superadditive by up to roughly `0.5 ln N` (splitting a homogeneous
/// segment can *raise* the summed cost), so candidates are pruned against
/// the margin `K = -(0.5 ln N + 1)` rather than zero, and a candidate
/// failing the test at `s` is only discarded once the dominating index is
/// itself feasible, i.e. from time `s + min_seg_len` on.
pub fn pelt(prefix: &EnergyPrefix, penalty: &Penalty, min_seg_len: usize) -> Result<Vec<usize>> {
    let n = prefix.len();
    validate_lengths(n, min_seg_len)?;
    let resolved = ResolvedPenalty::resolve(penalty, n);
    let prune_margin = -(0.5 * (n as f64).ln() + 1.0);

    let mut best = vec![f64::INFINITY; n + 1];
    let mut prev = vec![usize::MAX; n + 1];
    best[0] = -resolved.per_changepoint;

    // Active candidate last-changepoints, with the time at which a failed
    // pruning test makes each safe to drop.
    let mut candidates: Vec<(usize, usize)> = Vec::with_capacity(64);

    for s in min_seg_len..=n {
        let entering = s - min_seg_len;
        if best[entering].is_finite() {
            candidates.push((entering, usize::MAX));
        }
        candidates.retain(|&(_, deadline)| deadline > s);

        let mut best_val = f64::INFINITY;
        let mut best_t = usize::MAX;
        for &(t, _) in &candidates {
            if let Some(cost) = resolved.cost(prefix, t, s) {
                let val = best[t] + cost + resolved.per_changepoint;
                if val < best_val || (val == best_val && t < best_t) {
                    best_val = val;
                    best_t = t;
                }
            }
        }
        if best_t == usize::MAX {
            continue;
        }
        best[s] = best_val;
        prev[s] = best_t;

        for entry in candidates.iter_mut() {
            if entry.1 != usize::MAX {
                continue;
            }
            if let Some(cost) = resolved.cost(prefix, entry.0, s) {
                if best[entry.0] + cost + prune_margin > best_val {
                    entry.1 = s + min_seg_len;
                }
            }
        }
    }

    if !best[n].is_finite() {
        return Err(SegError::DegenerateSegment(
            "no admissible partition (every candidate segment has zero energy)".into(),
        ));
    }

    let mut changepoints = Vec::new();
    let mut s = n;
    while prev[s] != 0 && prev[s] != usize::MAX {
        changepoints.push(prev[s]);
        s = prev[s];
    }
    changepoints.reverse();
    Ok(changepoints)
}

/// Greedy binary segmentation under the same penalized objective.
///
/// Repeatedly applies the single split that most decreases the objective
/// until no split improves it. Runs on an explicit worklist, never on the
/// call stack.
pub fn binseg(prefix: &EnergyPrefix, penalty: &Penalty, min_seg_len: usize) -> Result<Vec<usize>> {
    let n = prefix.len();
    validate_lengths(n, min_seg_len)?;
    let resolved = ResolvedPenalty::resolve(penalty, n);

    // (gain, start, split, end); largest gain first, then leftmost.
    let mut queue: Vec<(f64, usize, usize, usize)> = Vec::new();
    let push_best_split = |queue: &mut Vec<(f64, usize, usize, usize)>, a: usize, b: usize| {
        if b - a < 2 * min_seg_len {
            return;
        }
        let whole = match resolved.cost(prefix, a, b) {
            Some(c) => c,
            None => return,
        };
        let mut best: Option<(f64, usize)> = None;
        for t in a + min_seg_len..=b - min_seg_len {
            let (Some(left), Some(right)) =
                (resolved.cost(prefix, a, t), resolved.cost(prefix, t, b))
            else {
                continue;
            };
            let gain = whole - left - right - resolved.per_changepoint;
            match best {
                Some((g, _)) if g >= gain => {}
                _ => best = Some((gain, t)),
            }
        }
        if let Some((gain, t)) = best {
            queue.push((gain, a, t, b));
        }
    };

    push_best_split(&mut queue, 0, n);
    let mut changepoints = Vec::new();
    loop {
        let Some(idx) = queue
            .iter()
            .enumerate()
            .max_by(|(_, x), (_, y)| {
                x.0.total_cmp(&y.0).then(y.1.cmp(&x.1))
            })
            .map(|(i, _)| i)
        else {
            break;
        };
        let (gain, a, t, b) = queue.swap_remove(idx);
        if gain <= 0.0 {
            break;
        }
        changepoints.push(t);
        push_best_split(&mut queue, a, t);
        push_best_split(&mut queue, t, b);
    }
    changepoints.sort_unstable();
    Ok(changepoints)
}

/// Default size guard for the quadratic oracle.
pub const BRUTEFORCE_MAX_N: usize = 5_000;

/// Unpruned O(N^2) dynamic program; the exactness oracle for [`pelt`].
pub fn optimal_partition_bruteforce(
    prefix: &EnergyPrefix,
    penalty: &Penalty,
    min_seg_len: usize,
) -> Result<Vec<usize>> {
    let n = prefix.len();
    if n > BRUTEFORCE_MAX_N {
        return Err(SegError::TooLarge(format!(
            "brute-force partition is quadratic; {n} samples exceed the {BRUTEFORCE_MAX_N} cap, use pelt instead"
        )));
    }
    validate_lengths(n, min_seg_len)?;
    let resolved = ResolvedPenalty::resolve(penalty, n);

    let mut best = vec![f64::INFINITY; n + 1];
    let mut prev = vec![usize::MAX; n + 1];
    best[0] = -resolved.per_changepoint;

    for s in min_seg_len..=n {
        let mut best_val = f64::INFINITY;
        let mut best_t = usize::MAX;
        for t in (0..=s - min_seg_len).filter(|&t| t == 0 || t >= min_seg_len) {
            if !best[t].is_finite() {
                continue;
            }
            if let Some(cost) = resolved.cost(prefix, t, s) {
                let val = best[t] + cost + resolved.per_changepoint;
                if val < best_val || (val == best_val && t < best_t) {
                    best_val = val;
                    best_t = t;
                }
            }
        }
        if best_t != usize::MAX {
            best[s] = best_val;
            prev[s] = best_t;
        }
    }

    if !best[n].is_finite() {
        return Err(SegError::DegenerateSegment(
            "no admissible partition (every candidate segment has zero energy)".into(),
        ));
    }

    let mut changepoints = Vec::new();
    let mut s = n;
    while prev[s] != 0 && prev[s] != usize::MAX {
        changepoints.push(prev[s]);
        s = prev[s];
    }
    changepoints.reverse();
    Ok(changepoints)
}

/// Penalized objective value of a given partition; used by tests and the
/// greedy-versus-exact comparison.
pub fn partition_objective(
    prefix: &EnergyPrefix,
    penalty: &Penalty,
    changepoints: &[usize],
) -> Result<f64> {
    let n = prefix.len();
    let resolved = ResolvedPenalty::resolve(penalty, n);
    let mut boundaries = Vec::with_capacity(changepoints.len() + 2);
    boundaries.push(0);
    boundaries.extend_from_slice(changepoints);
    boundaries.push(n);
    let mut total = resolved.per_changepoint * changepoints.len() as f64;
    for pair in boundaries.windows(2) {
        total += resolved.cost(prefix, pair[0], pair[1]).ok_or_else(|| {
            SegError::DegenerateSegment(format!("zero energy in ({}, {}]", pair[0], pair[1]))
        })?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{log_marginal_posterior, Signal};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn prefix(samples: &[f64]) -> EnergyPrefix {
        EnergyPrefix::build(&Signal::new(samples.to_vec(), None).unwrap())
    }

    fn noise(rng: &mut ChaCha8Rng, n: usize, sd: f64) -> Vec<f64> {
        (0..n)
            .map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
            .collect()
    }

    #[test]
    fn segment_cost_hand_values() {
        let p = prefix(&[1.0, -1.0]);
        assert_relative_eq!(segment_cost(&p, 0, 2).unwrap(), 2.0f64.ln(), epsilon = 1e-12);
        // Length 2, unit energy: 1 * ln 1 - lnGamma(1) = 0.
        let p = prefix(&[(0.5f64).sqrt(), -(0.5f64).sqrt()]);
        assert_relative_eq!(segment_cost(&p, 0, 2).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn segment_cost_rejects_degenerate_and_bad_ranges() {
        let p = prefix(&[0.0, 0.0, 1.0]);
        assert!(matches!(
            segment_cost(&p, 0, 2),
            Err(SegError::DegenerateSegment(_))
        ));
        assert!(segment_cost(&p, 2, 2).is_err());
        assert!(segment_cost(&p, 0, 4).is_err());
    }

    #[test]
    fn two_way_split_cost_is_negated_marginal_posterior() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let y = noise(&mut rng, 64, 1.3);
        let p = prefix(&y);
        for t in 2..62 {
            let total = segment_cost(&p, 0, t).unwrap() + segment_cost(&p, t, 64).unwrap();
            let lmp = log_marginal_posterior(&p, t).unwrap();
            assert_relative_eq!(total, -lmp, epsilon = 1e-9);
        }
    }

    #[test]
    fn bruteforce_picks_obvious_split() {
        let p = prefix(&[1.0, -1.0, 10.0, -10.0]);
        let cps =
            optimal_partition_bruteforce(&p, &Penalty::manual(0.1).unwrap(), 2).unwrap();
        assert_eq!(cps, vec![2]);
    }

    #[test]
    fn huge_manual_penalty_returns_no_changepoints() {
        let p = prefix(&[1.0, -1.0, 10.0, -10.0, 1.0, -1.0]);
        let cps =
            optimal_partition_bruteforce(&p, &Penalty::manual(1e12).unwrap(), 2).unwrap();
        assert!(cps.is_empty());
        let cps = pelt(&p, &Penalty::manual(1e12).unwrap(), 2).unwrap();
        assert!(cps.is_empty());
    }

    #[test]
    fn bruteforce_refuses_large_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = noise(&mut rng, BRUTEFORCE_MAX_N + 1, 1.0);
        let p = prefix(&y);
        assert!(matches!(
            optimal_partition_bruteforce(&p, &Penalty::Mbic, 2),
            Err(SegError::TooLarge(_))
        ));
    }

    #[test]
    fn pelt_matches_bruteforce_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for case in 0..12 {
            let n = 60 + (case * 37) % 240;
            let mut y = Vec::with_capacity(n);
            let mut sd = 1.0;
            while y.len() < n {
                let run = 8 + (rng.random::<u64>() % 40) as usize;
                let take = run.min(n - y.len());
                y.extend(noise(&mut rng, take, sd));
                sd = if sd > 1.5 { 1.0 } else { 2.5 };
            }
            let p = prefix(&y);
            for penalty in [
                Penalty::Mbic,
                Penalty::Bic,
                Penalty::manual(3.0).unwrap(),
                Penalty::manual(12.0).unwrap(),
            ] {
                let exact = optimal_partition_bruteforce(&p, &penalty, 2).unwrap();
                let pruned = pelt(&p, &penalty, 2).unwrap();
                assert_eq!(exact, pruned, "divergence on case {case} with {penalty:?}");
            }
        }
    }

    #[test]
    fn binseg_agrees_with_pelt_on_single_changepoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut y = noise(&mut rng, 150, 1.0);
        y.extend(noise(&mut rng, 150, 4.0));
        let p = prefix(&y);
        let a = pelt(&p, &Penalty::Mbic, 2).unwrap();
        let b = binseg(&p, &Penalty::Mbic, 2).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a, b);
    }

    #[test]
    fn binseg_white_noise_returns_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = noise(&mut rng, 400, 1.0);
        let p = prefix(&y);
        assert!(binseg(&p, &Penalty::Mbic, 2).unwrap().is_empty());
    }

    #[test]
    fn greedy_objective_never_beats_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..6 {
            let mut y = noise(&mut rng, 120, 1.0);
            y.extend(noise(&mut rng, 80, 3.0));
            y.extend(noise(&mut rng, 100, 1.0));
            let p = prefix(&y);
            let exact = pelt(&p, &Penalty::Mbic, 2).unwrap();
            let greedy = binseg(&p, &Penalty::Mbic, 2).unwrap();
            let exact_obj = partition_objective(&p, &Penalty::Mbic, &exact).unwrap();
            let greedy_obj = partition_objective(&p, &Penalty::Mbic, &greedy).unwrap();
            assert!(exact_obj <= greedy_obj + 1e-9);
        }
    }

    #[test]
    fn manual_penalty_is_monotone_in_changepoint_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut y = noise(&mut rng, 100, 1.0);
        y.extend(noise(&mut rng, 100, 2.5));
        y.extend(noise(&mut rng, 100, 0.7));
        let p = prefix(&y);
        let mut last = usize::MAX;
        for value in [0.5, 2.0, 8.0, 32.0, 128.0] {
            let count = pelt(&p, &Penalty::manual(value).unwrap(), 2).unwrap().len();
            assert!(count <= last, "penalty {value} increased count to {count}");
            last = count;
        }
    }

    #[test]
    fn manual_penalty_validation() {
        assert!(Penalty::manual(-1.0).is_err());
        assert!(Penalty::manual(f64::INFINITY).is_err());
        assert!(Penalty::manual(0.0).is_ok());
    }

    #[test]
    fn min_segment_length_is_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut y = noise(&mut rng, 90, 1.0);
        y.extend(noise(&mut rng, 90, 3.0));
        let p = prefix(&y);
        for min_len in [2, 10, 30] {
            let cps = pelt(&p, &Penalty::Mbic, min_len).unwrap();
            let mut bounds = vec![0];
            bounds.extend(&cps);
            bounds.push(180);
            for pair in bounds.windows(2) {
                assert!(pair[1] - pair[0] >= min_len);
            }
        }
        assert!(pelt(&p, &Penalty::Mbic, 100).is_err());
        assert!(pelt(&p, &Penalty::Mbic, 1).is_err());
    }
}
