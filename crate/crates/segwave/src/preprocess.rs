//! Channel selection, mean removal and optional decimation.

use crate::energy::Signal;
use crate::error::{Result, SegError};
use crate::wav::AudioClip;

// Compensated arithmetic mean.
fn mean(samples: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in samples {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    (sum + comp) / samples.len() as f64
}

/// Removes the sample mean and optionally decimates by an integer factor
/// (length-`d` moving average, then keep every `d`-th value), returning a
/// model-ready zero-mean signal.
///
/// The output mean is re-centered after decimation so it stays at zero to
/// within 1e-12 even when a partial trailing block is dropped.
pub fn zero_mean_signal(
    samples: Vec<f64>,
    sample_rate_hz: Option<f64>,
    decimate: Option<usize>,
) -> Result<Signal> {
    if samples.len() < 2 {
        return Err(SegError::InvalidInput(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    if let Some(pos) = samples.iter().position(|x| !x.is_finite()) {
        return Err(SegError::InvalidInput(format!(
            "non-finite sample at index {pos}"
        )));
    }
    let d = decimate.unwrap_or(1);
    if d == 0 {
        return Err(SegError::InvalidInput("decimation factor must be >= 1".into()));
    }
    if d > samples.len() {
        return Err(SegError::InvalidInput(format!(
            "decimation factor {d} exceeds signal length {}",
            samples.len()
        )));
    }

    let m = mean(&samples);
    let mut centered: Vec<f64> = samples.iter().map(|x| x - m).collect();

    if d > 1 {
        let blocks = centered.len() / d;
        let mut decimated = Vec::with_capacity(blocks);
        for blk in 0..blocks {
            let window = &centered[blk * d..(blk + 1) * d];
            decimated.push(window.iter().sum::<f64>() / d as f64);
        }
        if decimated.len() < 2 {
            return Err(SegError::InvalidInput(format!(
                "decimation by {d} leaves fewer than 2 samples"
            )));
        }
        let residual = mean(&decimated);
        for x in decimated.iter_mut() {
            *x -= residual;
        }
        centered = decimated;
    }

    Signal::new(centered, sample_rate_hz.map(|r| r / d as f64))
}

/// Selects one channel of a clip and prepares it for the variance model.
pub fn preprocess(clip: &AudioClip, channel: usize, decimate: Option<usize>) -> Result<Signal> {
    let samples = clip.channels.get(channel).ok_or_else(|| {
        SegError::InvalidInput(format!(
            "channel {channel} out of range ({} channels)",
            clip.channels.len()
        ))
    })?;
    zero_mean_signal(
        samples.clone(),
        Some(clip.sample_rate_hz as f64),
        decimate,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(samples: Vec<f64>, rate: u32) -> AudioClip {
        AudioClip {
            channels: vec![samples],
            sample_rate_hz: rate,
            source_digest: String::new(),
        }
    }

    #[test]
    fn constant_clip_becomes_silence() {
        let signal = preprocess(&clip(vec![0.5; 100], 8000), 0, Some(4)).unwrap();
        assert!(signal.samples().iter().all(|&x| x == 0.0));
        assert_eq!(signal.len(), 25);
        assert_eq!(signal.sample_rate_hz(), Some(2000.0));
    }

    #[test]
    fn no_decimation_is_mean_removal_only() {
        let signal = preprocess(&clip(vec![1.0, 2.0, 3.0, 4.0], 100), 0, None).unwrap();
        assert_eq!(signal.samples(), &[-1.5, -0.5, 0.5, 1.5]);
        assert_eq!(signal.sample_rate_hz(), Some(100.0));
    }

    #[test]
    fn decimation_length_arithmetic() {
        let samples: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let signal = preprocess(&clip(samples, 24000), 0, Some(4)).unwrap();
        assert_eq!(signal.len(), 250);
        assert_eq!(signal.sample_rate_hz(), Some(6000.0));
    }

    #[test]
    fn output_mean_is_zero_even_with_dropped_remainder() {
        // Length not divisible by the factor; the dropped tail would bias
        // the mean without re-centering.
        let samples: Vec<f64> = (0..1001)
            .map(|i| if i == 1000 { 500.0 } else { (i % 7) as f64 })
            .collect();
        let signal = zero_mean_signal(samples, None, Some(4)).unwrap();
        let m: f64 = signal.samples().iter().sum::<f64>() / signal.len() as f64;
        assert!(m.abs() < 1e-12, "residual mean {m}");
    }

    #[test]
    fn validates_channel_and_factor() {
        let c = clip(vec![1.0; 10], 100);
        assert!(preprocess(&c, 1, None).is_err());
        assert!(preprocess(&c, 0, Some(0)).is_err());
        assert!(preprocess(&c, 0, Some(11)).is_err());
    }
}
