use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricFit {
    pub ratio: f64,
    pub used: usize,
    /// Indices dropped because the value was not positive and finite.
    pub excluded: Vec<usize>,
}

/// Least-squares line through `(x_i, ln y_i)`; returns `(slope, intercept)`.
pub fn log_linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y.is_finite() && y > 0.0)
        .map(|(&x, &y)| (x, y.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::FitTooShort {
            needed: 2,
            got: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::FitTooShort { needed: 2, got: 1 });
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Ratio `r` of the best geometric model `y_i ~ C r^i`.
pub fn fit_geometric(seq: &[f64]) -> Result<GeometricFit> {
    let excluded: Vec<usize> = seq
        .iter()
        .enumerate()
        .filter(|(_, &y)| !(y.is_finite() && y > 0.0))
        .map(|(i, _)| i)
        .collect();
    let used = seq.len() - excluded.len();
    if used < 3 {
        return Err(Error::FitTooShort {
            needed: 3,
            got: used,
        });
    }
    let xs: Vec<f64> = (0..seq.len()).map(|i| i as f64).collect();
    let (slope, _) = log_linear_fit(&xs, seq)?;
    Ok(GeometricFit {
        ratio: slope.exp(),
        used,
        excluded,
    })
}

/// Exponential decay measurement of a positive time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncFit {
    /// Fitted `d ln y / dt` between the end of the transient and the floor.
    pub rate: f64,
    /// First time at which `y <= floor_ratio * y(0)`, if reached.
    pub floor_time: Option<f64>,
    /// Non-increasing between the transient and the floor.
    pub monotone: bool,
    pub fit_start: f64,
    pub fit_end: f64,
}

/// Fits the decay of `ys` on `[transient, floor_time]` (or to the end when the
/// floor is never reached).
pub fn fit_sync_decay(ts: &[f64], ys: &[f64], transient: f64, floor_ratio: f64) -> Result<SyncFit> {
    if ts.len() != ys.len() || ts.is_empty() {
        return Err(Error::FitTooShort {
            needed: 2,
            got: ts.len().min(ys.len()),
        });
    }
    let floor = floor_ratio * ys[0];
    let end = ys.iter().position(|&y| y <= floor);
    let stop = end.unwrap_or(ys.len() - 1);
    let start = ts
        .iter()
        .position(|&t| t >= transient)
        .unwrap_or(0)
        .min(stop);
    let (xs, vs) = (&ts[start..=stop], &ys[start..=stop]);
    let (rate, _) = log_linear_fit(xs, vs)?;
    let monotone = vs.windows(2).all(|w| w[1] <= w[0]);
    Ok(SyncFit {
        rate,
        floor_time: end.map(|i| ts[i]),
        monotone,
        fit_start: ts[start],
        fit_end: ts[stop],
    })
}
