//! Autocorrelation estimates, decay-time fits and least-squares helpers.

use alloc::vec::Vec;

use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// Biased autocovariance of `path` (sampled every `dt`) at lags
/// `0, dt, ..., max_lag`, after removing the sample mean.
///
/// Requires at least `100 * max_lag / dt` samples.
pub fn autocorrelation(path: &[f64], dt: f64, max_lag: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            value: dt,
        });
    }
    if !(max_lag >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "max_lag",
            value: max_lag,
        });
    }
    let lags = (max_lag / dt + 1e-9).floor() as usize;
    let needed = (100 * lags).max(2);
    if path.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: path.len(),
        });
    }
    let n = path.len();
    let mean = path.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = path.iter().map(|x| x - mean).collect();
    Ok((0..=lags)
        .map(|k| {
            centered[..n - k]
                .iter()
                .zip(&centered[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidParameter {
            name: "abscissa spread",
            value: sxx,
        });
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| y - (slope * x + intercept))
        .collect();
    Ok(LinearFit {
        slope,
        intercept,
        residuals,
    })
}

/// Exponential decay time of an autocovariance series: `-1/slope` of
/// `ln acf` over the leading lags with `acf > 0.1 acf[0]`.
pub fn fit_decay_time(acf: &[f64], dt: f64) -> Result<f64> {
    let first = acf.first().copied().unwrap_or(0.0);
    if !(first > 0.0) {
        return Err(Error::InvalidParameter {
            name: "acf[0]",
            value: first,
        });
    }
    let usable = acf.iter().take_while(|&&v| v > 0.1 * first).count();
    if usable < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: usable,
        });
    }
    let xs: Vec<f64> = (0..usable).map(|k| k as f64 * dt).collect();
    let ys: Vec<f64> = acf[..usable].iter().map(|v| v.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok(-1.0 / fit.slope)
}

/// Log-log slope of `ys` against `xs` (all positive).
pub fn power_law_order(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if let Some(&bad) = xs.iter().chain(ys).find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "log-log input",
            value: bad,
        });
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly)
}
