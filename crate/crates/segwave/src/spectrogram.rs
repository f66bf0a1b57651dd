//! Short-time Fourier magnitudes in dB, for changepoint overlay figures.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::energy::Signal;
use crate::error::{Result, SegError};

/// Guard added to magnitudes before the log, putting silence at -240 dB.
pub const DB_FLOOR_GUARD: f64 = 1e-12;

/// dB magnitude matrix with its axes. `db[bin][frame]`; bin 0 is DC.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub db: Vec<Vec<f64>>,
    /// Bin centers; Hz when the signal has a sample rate, cycles/sample
    /// otherwise.
    pub freq_axis: Vec<f64>,
    /// Frame centers; seconds when the signal has a sample rate, sample
    /// indices otherwise.
    pub time_axis: Vec<f64>,
    pub window_len: usize,
    pub hop: usize,
}

impl Spectrogram {
    pub fn frames(&self) -> usize {
        self.db.first().map_or(0, Vec::len)
    }

    pub fn bins(&self) -> usize {
        self.db.len()
    }
}

/// Hann-windowed short-time Fourier transform with magnitudes mapped to
/// `20 log10(|X| + 1e-12)`. Frame count is `floor((N - window) / hop) + 1`.
pub fn spectrogram(signal: &Signal, window_len: usize, hop: usize) -> Result<Spectrogram> {
    if window_len < 16 {
        return Err(SegError::InvalidInput(format!(
            "window length must be at least 16, got {window_len}"
        )));
    }
    if hop == 0 {
        return Err(SegError::InvalidInput("hop must be at least 1".into()));
    }
    let n = signal.len();
    if n < window_len {
        return Err(SegError::InvalidInput(format!(
            "signal of {n} samples is shorter than the {window_len}-sample window"
        )));
    }

    let frames = (n - window_len) / hop + 1;
    let bins = window_len / 2 + 1;
    let window: Vec<f64> = (0..window_len)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / window_len as f64).cos()))
        .collect();

    let fft = FftPlanner::new().plan_fft_forward(window_len);
    let samples = signal.samples();
    let mut db = vec![vec![0.0f64; frames]; bins];
    let mut buffer = vec![Complex::new(0.0, 0.0); window_len];
    for frame in 0..frames {
        let start = frame * hop;
        for i in 0..window_len {
            buffer[i] = Complex::new(samples[start + i] * window[i], 0.0);
        }
        fft.process(&mut buffer);
        for (bin, row) in db.iter_mut().enumerate() {
            row[frame] = 20.0 * (buffer[bin].norm() + DB_FLOOR_GUARD).log10();
        }
    }

    let rate = signal.sample_rate_hz();
    let freq_axis = (0..bins)
        .map(|k| match rate {
            Some(r) => k as f64 * r / window_len as f64,
            None => k as f64 / window_len as f64,
        })
        .collect();
    let time_axis = (0..frames)
        .map(|f| {
            let center = (f * hop) as f64 + window_len as f64 / 2.0;
            match rate {
                Some(r) => center / r,
                None => center,
            }
        })
        .collect();

    Ok(Spectrogram {
        db,
        freq_axis,
        time_axis,
        window_len,
        hop,
    })
}
