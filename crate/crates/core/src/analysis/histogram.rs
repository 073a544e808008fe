//! Histograms of stationary time series and their modes.

use serde::Serialize;

use crate::{Error, Result};

/// Peaks below this fraction of the tallest smoothed bin are ignored.
pub const MIN_PEAK_FRACTION: f64 = 0.05;
/// Two neighbouring peaks are separate modes only if the smoothed histogram
/// dips below this fraction of the smaller peak between them.
pub const VALLEY_FRACTION: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    /// `counts.len() + 1` ascending bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Bins `values` over `range`, or over their own span when `None`. The
    /// last bin is closed; values outside the range are dropped.
    pub fn new(values: &[f64], range: Option<(f64, f64)>, n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::invalid("n_bins", "must be at least 1"));
        }
        if values.is_empty() {
            return Err(Error::invalid("series", "no samples to histogram"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("series", format!("non-finite sample {v}")));
        }
        let (mut lo, mut hi) = match range {
            Some(r) => r,
            None => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))),
        };
        if !(lo <= hi) {
            return Err(Error::invalid("range", format!("[{lo}, {hi}] is empty")));
        }
        if lo == hi {
            lo -= 0.5;
            hi += 0.5;
        }
        let width = (hi - lo) / n_bins as f64;
        let edges: Vec<f64> = (0..=n_bins).map(|k| lo + k as f64 * width).collect();
        let mut counts = vec![0u64; n_bins];
        for &v in values {
            if v < lo || v > hi {
                continue;
            }
            let k = (((v - lo) / width) as usize).min(n_bins - 1);
            counts[k] += 1;
        }
        Ok(Histogram { edges, counts })
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Histogram of the samples taken at or after `t_burn_in`.
pub fn stationary_histogram(
    series: &[f64],
    times: &[f64],
    t_burn_in: f64,
    n_bins: usize,
) -> Result<Histogram> {
    if series.len() != times.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: series.len(),
        });
    }
    let window = stationary_window(series, times, t_burn_in);
    if window.is_empty() {
        return Err(Error::invalid(
            "t_burn_in",
            format!("no samples at or after t = {t_burn_in}"),
        ));
    }
    Histogram::new(window, None, n_bins)
}

/// The tail of `series` sampled at or after `t_burn_in`.
pub fn stationary_window<'a>(series: &'a [f64], times: &[f64], t_burn_in: f64) -> &'a [f64] {
    let start = times.partition_point(|&t| t < t_burn_in).min(series.len());
    &series[start..]
}

/// A peak of a histogram together with its basin of attraction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mode {
    /// Count-weighted mean of the bin centers in the basin.
    pub location: f64,
    /// Center of the tallest smoothed bin.
    pub peak: f64,
    /// Fraction of all samples in the basin.
    pub mass: f64,
}

/// Finds the modes of a histogram after light `[1, 2, 1]` smoothing. Local
/// maxima below [`MIN_PEAK_FRACTION`] of the maximum are ignored, and
/// neighbouring maxima not separated by a valley deeper than
/// [`VALLEY_FRACTION`] of the smaller one are merged.
pub fn find_modes(hist: &Histogram) -> Vec<Mode> {
    let n = hist.n_bins();
    let total = hist.total();
    if total == 0 {
        return Vec::new();
    }
    let c: Vec<f64> = hist.counts.iter().map(|&v| v as f64).collect();
    let at = |k: isize| c[k.clamp(0, n as isize - 1) as usize];
    let s: Vec<f64> = (0..n as isize)
        .map(|k| 0.25 * at(k - 1) + 0.5 * at(k) + 0.25 * at(k + 1))
        .collect();
    let top = s.iter().copied().fold(0.0, f64::max);

    // Local maxima; a plateau is represented by its first bin.
    let mut peaks = Vec::new();
    let mut k = 0;
    while k < n {
        let mut end = k;
        while end + 1 < n && s[end + 1] == s[k] {
            end += 1;
        }
        let left_ok = k == 0 || s[k - 1] < s[k];
        let right_ok = end + 1 == n || s[end + 1] < s[k];
        if left_ok && right_ok && s[k] >= MIN_PEAK_FRACTION * top && s[k] > 0.0 {
            peaks.push(k);
        }
        k = end + 1;
    }

    // Merge shallow separations.
    let valley = |a: usize, b: usize| {
        (a..=b).fold((a, f64::INFINITY), |best, j| if s[j] < best.1 { (j, s[j]) } else { best })
    };
    let mut merged: Vec<usize> = Vec::new();
    for p in peaks {
        if let Some(&q) = merged.last() {
            let (_, depth) = valley(q, p);
            if depth >= VALLEY_FRACTION * s[q].min(s[p]) {
                if s[p] > s[q] {
                    *merged.last_mut().unwrap() = p;
                }
                continue;
            }
        }
        merged.push(p);
    }

    // Basins split at the deepest point between neighbouring peaks.
    let mut bounds = vec![0];
    for w in merged.windows(2) {
        bounds.push(valley(w[0], w[1]).0);
    }
    bounds.push(n);
    let centers = hist.centers();
    merged
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let (lo, hi) = (bounds[i], bounds[i + 1]);
            let mass: f64 = c[lo..hi].iter().sum();
            let moment: f64 = (lo..hi).map(|j| c[j] * centers[j]).sum();
            Mode {
                location: if mass > 0.0 { moment / mass } else { centers[p] },
                peak: centers[p],
                mass: mass / total as f64,
            }
        })
        .collect()
}
