//! Spike-train post-processing: reset sequences, periodicity classification
//! of the adaptation value at spikes, and histograms for bifurcation scans.
//!
//! The adaptation value carried into each reset is the natural discrete
//! observable of these models: a period-1 sequence is tonic spiking, period
//! k >= 2 is a k-burst, anything else within the tolerance is irregular.

use crate::error::{Error, Result};
use crate::integrate::SpikeTrain;

/// Adaptation values at spikes after dropping the transient.
pub fn reset_sequence(train: &SpikeTrain, transient_skip: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = train
        .events
        .iter()
        .skip(transient_skip)
        .map(|e| e.w)
        .collect();
    if values.is_empty() {
        return Err(Error::Measurement(format!(
            "no spikes left after skipping {transient_skip} of {}",
            train.events.len()
        )));
    }
    Ok(values)
}

/// Default transient skip: at least 10 spikes and at least 20% of the train,
/// but never the whole train.
pub fn default_transient_skip(total_spikes: usize) -> usize {
    let wanted = 10.max(total_spikes / 5);
    wanted.min(total_spikes.saturating_sub(2))
}

/// Default classification tolerance: 2% of the observed range.
pub fn default_tolerance(values: &[f64]) -> f64 {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    ((hi - lo) * 0.02).max(1e-9)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternLabel {
    Tonic,
    Burst(u32),
    Irregular,
}

impl PatternLabel {
    pub fn name(&self) -> String {
        match self {
            PatternLabel::Tonic => "tonic".into(),
            PatternLabel::Burst(k) => format!("burst-{k}"),
            PatternLabel::Irregular => "irregular".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternClass {
    pub label: PatternLabel,
    /// Detected period, absent for irregular trains.
    pub period: Option<u32>,
    /// Worst lag-k deviation at the reported period, or the best deviation
    /// found when irregular.
    pub residual: f64,
}

/// Smallest period `k <= max_period` whose lag-k deviation stays within
/// `tol`; period 1 is tonic, higher periods are bursts.
pub fn classify_pattern(values: &[f64], tol: f64, max_period: u32) -> Result<PatternClass> {
    if values.len() < 2 {
        return Err(Error::Measurement(format!(
            "periodicity needs at least 2 reset values, got {}",
            values.len()
        )));
    }
    if !(tol >= 0.0) || max_period == 0 {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("need tol >= 0 and max_period >= 1, got {tol} and {max_period}"),
        });
    }
    let n = values.len();
    let mut best = f64::INFINITY;
    for k in 1..=max_period.min((n - 1) as u32) {
        let lag = k as usize;
        let residual = values
            .iter()
            .zip(values.iter().skip(lag))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0_f64, f64::max);
        if residual <= tol {
            let label = if k == 1 {
                PatternLabel::Tonic
            } else {
                PatternLabel::Burst(k)
            };
            return Ok(PatternClass {
                label,
                period: Some(k),
                residual,
            });
        }
        best = best.min(residual);
    }
    Ok(PatternClass {
        label: PatternLabel::Irregular,
        period: None,
        residual: best,
    })
}

/// Equal-width histogram; the last bin is closed on the right so the maximum
/// lands inside.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Bin centers paired with counts, the emission shape.
    pub fn centered(&self) -> Vec<(f64, usize)> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &count)| (0.5 * (self.edges[i] + self.edges[i + 1]), count))
            .collect()
    }
}

pub fn reset_histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() || bins == 0 {
        return Err(Error::Measurement(format!(
            "histogram needs values and bins, got {} values and {bins} bins",
            values.len()
        )));
    }
    let mut lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for &x in values {
        let idx = (((x - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}
