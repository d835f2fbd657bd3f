use serde::{Deserialize, Serialize};

use super::{EvolutionEngine, StateVector};
use crate::error::{Error, Result};

/// Survival probability sampled on a time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl SurvivalCurve {
    /// `t,sp` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,sp\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            out.push_str(&format!("{t},{v}\n"));
        }
        out
    }
}

/// Least-squares fit of `ln(value) = -alpha * n - beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub alpha: f64,
    pub beta: f64,
    /// Sum of squared residuals in log space.
    pub residual: f64,
}

pub fn fit_exponential(ns: &[f64], values: &[f64]) -> Result<ExponentialFit> {
    if ns.len() != values.len() {
        return Err(Error::Parameter(format!(
            "{} sizes but {} values",
            ns.len(),
            values.len()
        )));
    }
    if ns.len() < 2 {
        return Err(Error::Parameter("exponential fit needs at least two points".into()));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Parameter(format!(
            "exponential fit needs positive values, got {v}"
        )));
    }
    let m = ns.len() as f64;
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let xbar = ns.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = ns.iter().map(|x| (x - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter("exponential fit needs distinct sizes".into()));
    }
    let sxy: f64 = ns.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let residual = ns
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(ExponentialFit {
        alpha: -slope,
        beta: -intercept,
        residual,
    })
}

/// Window over which the long-time mean is taken.
pub const LONG_TIME_WINDOW: (f64, f64) = (100.0, 1000.0);

/// Width of the smoothing window and of the settling hold, in `1/Ω`.
pub const SETTLE_WINDOW: f64 = 1.0;

/// Survival curve plus the location of the dip and the end of the ramp.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampDipReport {
    pub curve: SurvivalCurve,
    /// Running mean of the curve over `[t, t + SETTLE_WINDOW)`.
    pub smoothed: Vec<f64>,
    /// Mean survival over grid points inside [`LONG_TIME_WINDOW`].
    pub long_time_mean: Option<f64>,
    /// Time and value of the minimum of the smoothed curve before it settles.
    pub dip: Option<(f64, f64)>,
    /// First time after the dip from which the smoothed curve stays within a
    /// factor of two of the long-time mean for a full window.
    pub settle_time: Option<f64>,
}

/// Samples the survival probability on an ascending grid and locates the
/// ramp-dip structure.
pub fn ramp_dip_scan(engine: &EvolutionEngine, psi0: &StateVector, t_grid: &[f64]) -> Result<RampDipReport> {
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter("time grid must be ascending".into()));
    }
    let values = engine.survival_series(psi0, t_grid)?;
    let curve = SurvivalCurve {
        times: t_grid.to_vec(),
        values,
    };
    Ok(analyze_ramp_dip(curve))
}

pub(crate) fn analyze_ramp_dip(curve: SurvivalCurve) -> RampDipReport {
    let times = &curve.times;
    let values = &curve.values;
    let n = times.len();

    let mut smoothed = Vec::with_capacity(n);
    let mut hi = 0;
    let mut acc = 0.0;
    for lo in 0..n {
        while hi < n && times[hi] < times[lo] + SETTLE_WINDOW {
            acc += values[hi];
            hi += 1;
        }
        smoothed.push(acc / (hi - lo) as f64);
        acc -= values[lo];
    }

    let window: Vec<f64> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= LONG_TIME_WINDOW.0 && **t <= LONG_TIME_WINDOW.1)
        .map(|(_, v)| *v)
        .collect();
    let long_time_mean = (!window.is_empty()).then(|| window.iter().sum::<f64>() / window.len() as f64);

    let constant = values.iter().all(|v| (v - values[0]).abs() < 1e-12);
    let (dip, settle_time) = match long_time_mean {
        Some(mean) if !constant => {
            let inside = |v: f64| v >= mean / 2.0 && v <= 2.0 * mean;
            // settle: first point from which the smoothed curve holds the band
            // for a full window; searched only after the curve has first
            // dropped below the long-time mean
            let first_drop = smoothed.iter().position(|&v| v < mean);
            let mut settle = None;
            if let Some(start) = first_drop {
                let mut i = start;
                'scan: while i < n {
                    if !inside(smoothed[i]) {
                        i += 1;
                        continue;
                    }
                    let mut j = i;
                    while j < n && times[j] < times[i] + SETTLE_WINDOW {
                        if !inside(smoothed[j]) {
                            i = j + 1;
                            continue 'scan;
                        }
                        j += 1;
                    }
                    if j < n || times[n - 1] >= times[i] + SETTLE_WINDOW {
                        settle = Some(i);
                    }
                    break;
                }
            }
            let dip_end = settle.unwrap_or(n);
            let dip = (0..dip_end)
                .min_by(|&a, &b| smoothed[a].partial_cmp(&smoothed[b]).unwrap())
                .filter(|&i| smoothed[i] < mean)
                .map(|i| (times[i], smoothed[i]));
            (dip, settle.map(|i| times[i]))
        }
        _ => (None, None),
    };

    RampDipReport {
        curve,
        smoothed,
        long_time_mean,
        dip,
        settle_time,
    }
}
