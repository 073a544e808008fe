//! Switch detection in bistable time series with a two-threshold (Schmitt)
//! trigger.
//!
//! The detector commits to a side once the series reaches an outer
//! threshold `±level`. A switch is registered when it later reaches the
//! opposite outer threshold; its time is the first sample beyond the opposite
//! inner threshold `∓hysteresis_fraction·level` since the series last sat on
//! the committed side.

use serde::Serialize;

use crate::record::JumpEvent;
use crate::{Error, Result};

/// Relative slack on the thresholds, so that values equal to `level` up to
/// rounding (a parity of `0.9999999999999998`) count as reaching it.
const THRESHOLD_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SwitchReport {
    pub switch_times: Vec<f64>,
    /// Gaps between consecutive switches.
    pub dwell_times: Vec<f64>,
    pub n_switches: usize,
    /// `(inner, outer)` thresholds.
    pub thresholds: (f64, f64),
    /// Time at which the detector first committed to a side, if ever.
    pub committed_at: Option<f64>,
    /// Last sample time.
    pub end_time: f64,
}

impl SwitchReport {
    /// Mean of the completed dwell times, `None` with fewer than two
    /// switches.
    pub fn mean_dwell(&self) -> Option<f64> {
        if self.dwell_times.is_empty() {
            None
        } else {
            Some(self.dwell_times.iter().sum::<f64>() / self.dwell_times.len() as f64)
        }
    }

    /// Observed committed time divided by `max(1, n_switches)`: the maximum
    /// likelihood dwell estimate for a telegraph process that also accounts
    /// for the open intervals at both ends. With no switch it is a lower
    /// bound.
    pub fn censored_mean_dwell(&self) -> Option<f64> {
        self.committed_at
            .map(|t0| (self.end_time - t0) / self.n_switches.max(1) as f64)
    }
}

pub fn detect_switches(
    series: &[f64],
    times: &[f64],
    level: f64,
    hysteresis_fraction: f64,
) -> Result<SwitchReport> {
    if series.len() != times.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: series.len(),
        });
    }
    if series.len() < 2 {
        return Err(Error::invalid("series", "needs at least two samples"));
    }
    if !(level > 0.0 && level.is_finite()) {
        return Err(Error::invalid("level", format!("{level} must be positive")));
    }
    if !(hysteresis_fraction > 0.0 && hysteresis_fraction < 1.0) {
        return Err(Error::invalid(
            "hysteresis_fraction",
            format!("{hysteresis_fraction} is not in (0, 1)"),
        ));
    }
    let outer = level * (1.0 - THRESHOLD_SLACK);
    let inner = level * hysteresis_fraction;

    let mut side = 0.0f64;
    let mut committed_at = None;
    let mut crossing: Option<f64> = None;
    let mut switch_times = Vec::new();
    for (&v, &t) in series.iter().zip(times) {
        if side == 0.0 {
            if v.abs() >= outer {
                side = v.signum();
                committed_at = Some(t);
            }
            continue;
        }
        if v * side >= outer {
            crossing = None;
        } else if -v * side >= outer {
            switch_times.push(crossing.unwrap_or(t));
            side = -side;
            crossing = None;
        } else if -v * side > inner && crossing.is_none() {
            crossing = Some(t);
        }
    }
    let dwell_times = switch_times.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(SwitchReport {
        n_switches: switch_times.len(),
        switch_times,
        dwell_times,
        thresholds: (inner, level),
        committed_at,
        end_time: times[times.len() - 1],
    })
}

/// Agreement between sign changes of a parity series and one-photon clicks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParityEventCheck {
    pub intervals: usize,
    pub sign_changes: usize,
    pub events: usize,
    /// Ends of sampling intervals where a sign change occurred with an even
    /// click count, or no sign change with an odd count.
    pub mismatches: Vec<f64>,
}

impl ParityEventCheck {
    pub fn consistent(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// For every sampling interval `(t_{k-1}, t_k]` with `t_{k-1} >= t_from`,
/// checks that the sign of the parity changes exactly when an odd number of
/// one-photon clicks fell inside it. Two clicks within one interval cancel.
pub fn check_parity_events(
    times: &[f64],
    parity: &[f64],
    one_photon_events: &[JumpEvent],
    t_from: f64,
) -> Result<ParityEventCheck> {
    if times.len() != parity.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: parity.len(),
        });
    }
    let mut check = ParityEventCheck {
        intervals: 0,
        sign_changes: 0,
        events: 0,
        mismatches: Vec::new(),
    };
    let mut ev = one_photon_events.iter().map(|e| e.time).peekable();
    for k in 1..times.len() {
        let (t0, t1) = (times[k - 1], times[k]);
        let mut count = 0;
        while let Some(&te) = ev.peek() {
            if te > t1 {
                break;
            }
            if te > t0 {
                count += 1;
            }
            ev.next();
        }
        if t0 < t_from {
            continue;
        }
        check.intervals += 1;
        check.events += count;
        let flipped = parity[k - 1].signum() != parity[k].signum();
        if flipped {
            check.sign_changes += 1;
        }
        if flipped != (count % 2 == 1) {
            check.mismatches.push(t1);
        }
    }
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Channel;
    use proptest::prelude::*;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn constant_series_never_switches() {
        let t = grid(100, 0.1);
        let r = detect_switches(&vec![0.7; 100], &t, 1.0, 0.5).unwrap();
        assert_eq!(r.n_switches, 0);
        assert_eq!(r.committed_at, None);
        let r = detect_switches(&vec![1.0; 100], &t, 1.0, 0.5).unwrap();
        assert_eq!(r.n_switches, 0);
        assert_eq!(r.censored_mean_dwell(), Some(9.9 - 0.0));
    }

    #[test]
    fn square_wave() {
        // period 2.0, sampled every 0.1
        let t = grid(200, 0.1);
        let s: Vec<f64> = (0..200).map(|k| if (k / 10) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = detect_switches(&s, &t, 1.0, 0.5).unwrap();
        assert_eq!(r.n_switches, 19);
        for d in &r.dwell_times {
            assert!((d - 1.0).abs() < 1e-9);
        }
        assert!((r.switch_times[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn switch_time_is_inner_crossing() {
        let t = grid(7, 1.0);
        let s = [1.0, 0.8, -0.6, -0.3, -0.7, -1.0, -1.0];
        let r = detect_switches(&s, &t, 1.0, 0.5).unwrap();
        assert_eq!(r.switch_times, vec![2.0]);
        // excursions that stop short of the far threshold are not switches
        let s = [1.0, -0.9, 1.0, -0.9, 1.0, 0.0, 1.0];
        assert_eq!(detect_switches(&s, &t, 1.0, 0.5).unwrap().n_switches, 0);
    }

    #[test]
    fn rejects_bad_arguments() {
        let t = grid(3, 1.0);
        assert!(detect_switches(&[1.0], &[0.0], 1.0, 0.5).is_err());
        assert!(detect_switches(&[1.0, 1.0, 1.0], &t, 0.0, 0.5).is_err());
        assert!(detect_switches(&[1.0, 1.0, 1.0], &t, 1.0, 1.0).is_err());
        assert!(detect_switches(&[1.0, 1.0], &t, 1.0, 0.5).is_err());
    }

    #[test]
    fn parity_event_matching() {
        let times = grid(6, 1.0);
        let parity = [1.0, 1.0, -1.0, -1.0, -1.0, 1.0];
        let ev = |t| JumpEvent { time: t, channel: Channel::OnePhoton };
        // two clicks in (2, 3] cancel
        let events = [ev(1.5), ev(2.2), ev(2.7), ev(4.9)];
        let c = check_parity_events(&times, &parity, &events, 0.0).unwrap();
        assert!(c.consistent());
        assert_eq!((c.intervals, c.sign_changes, c.events), (5, 2, 4));
        let c = check_parity_events(&times, &parity, &events[..3], 0.0).unwrap();
        assert_eq!(c.mismatches, vec![5.0]);
        let c = check_parity_events(&times, &parity, &events[..3], 4.0).unwrap();
        assert_eq!(c.mismatches, vec![5.0]);
        assert_eq!(c.intervals, 1);
    }

    proptest! {
        #[test]
        fn report_invariants(values in prop::collection::vec(-1.5f64..1.5, 2..300), h in 0.05f64..0.95) {
            let t = grid(values.len(), 0.1);
            let r = detect_switches(&values, &t, 1.0, h).unwrap();
            prop_assert_eq!(r.n_switches, r.switch_times.len());
            prop_assert!(r.dwell_times.iter().all(|&d| d > 0.0));
            prop_assert_eq!(r.dwell_times.len(), r.n_switches.saturating_sub(1));
        }

        #[test]
        fn flipping_the_series_keeps_switch_times(values in prop::collection::vec(-1.5f64..1.5, 2..300)) {
            let t = grid(values.len(), 0.1);
            let neg: Vec<f64> = values.iter().map(|v| -v).collect();
            let a = detect_switches(&values, &t, 1.0, 0.5).unwrap();
            let b = detect_switches(&neg, &t, 1.0, 0.5).unwrap();
            prop_assert_eq!(a.switch_times, b.switch_times);
        }
    }
}
