//! Parsers and writers for the non-WAV input formats: raw little-endian
//! float64, single-column CSV, and the grid specification mini-language.

use crate::error::{Result, SegError};

/// Decodes a raw little-endian float64 stream.
pub fn parse_raw_f64(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(SegError::InvalidInput(format!(
            "raw float64 input length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
        .collect())
}

/// Encodes samples as raw little-endian float64.
pub fn write_raw_f64<W: std::io::Write>(writer: &mut W, samples: &[f64]) -> std::io::Result<()> {
    for x in samples {
        writer.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Parses a single-column CSV of amplitudes. One value per line; a single
/// non-numeric header line is tolerated; blank lines are skipped.
pub fn parse_csv_signal(bytes: &[u8]) -> Result<Vec<f64>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| SegError::InvalidInput(format!("csv input is not UTF-8: {e}")))?;
    let mut samples = Vec::new();
    let mut saw_value = false;
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match trimmed.parse::<f64>() {
            Ok(value) => {
                samples.push(value);
                saw_value = true;
            }
            Err(_) if !saw_value && samples.is_empty() => {
                // Header line.
            }
            Err(e) => {
                return Err(SegError::InvalidInput(format!(
                    "csv line {}: cannot parse '{trimmed}': {e}",
                    line_no + 1
                )));
            }
        }
    }
    Ok(samples)
}

const GRID_MAX_POINTS: usize = 10_000;

/// Parses a grid specification of the form `start:end:logN` or
/// `start:end:linN`, producing `N` inclusive grid points spaced
/// logarithmically or linearly.
pub fn parse_grid_spec(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(SegError::InvalidInput(format!(
            "grid spec '{spec}' must have three colon-separated fields like 1e-6:1e-1:log9"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|e| SegError::InvalidInput(format!("grid start '{}': {e}", parts[0])))?;
    let end: f64 = parts[1]
        .parse()
        .map_err(|e| SegError::InvalidInput(format!("grid end '{}': {e}", parts[1])))?;
    let (log_spaced, count_str) = if let Some(rest) = parts[2].strip_prefix("log") {
        (true, rest)
    } else if let Some(rest) = parts[2].strip_prefix("lin") {
        (false, rest)
    } else {
        return Err(SegError::InvalidInput(format!(
            "grid scale '{}' must start with 'log' or 'lin'",
            parts[2]
        )));
    };
    let count: usize = count_str
        .parse()
        .map_err(|e| SegError::InvalidInput(format!("grid count '{count_str}': {e}")))?;
    if count < 2 || count > GRID_MAX_POINTS {
        return Err(SegError::InvalidInput(format!(
            "grid count {count} outside [2, {GRID_MAX_POINTS}]"
        )));
    }
    if !(start.is_finite() && end.is_finite() && start < end) {
        return Err(SegError::InvalidInput(format!(
            "grid bounds must be finite with start < end, got {start}..{end}"
        )));
    }
    if log_spaced && start <= 0.0 {
        return Err(SegError::InvalidInput(
            "log-spaced grid needs a positive start".into(),
        ));
    }
    let points = if log_spaced {
        let (a, b) = (start.ln(), end.ln());
        (0..count)
            .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
            .collect()
    } else {
        (0..count)
            .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
            .collect()
    };
    Ok(points)
}
