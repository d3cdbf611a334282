use crate::phy::dbm_to_watts;
use crate::scenario::{JamEntry, JamMode};

/// Time-windowed interference on data and feedback channels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JammingSchedule {
    entries: Vec<JamEntry>,
}

impl JammingSchedule {
    pub fn new(entries: Vec<JamEntry>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[JamEntry] {
        &self.entries
    }

    /// Jammer power (W) hitting a replica on `subchannel` during `[t0, t1)`.
    pub fn data_power_w(&self, subchannel: usize, t0: f64, t1: f64) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.subchannel == subchannel && matches!(e.mode, JamMode::Data | JamMode::Both))
            .filter(|e| e.t_start < t1 && t0 < e.t_end)
            .map(|e| dbm_to_watts(e.severity))
            .sum()
    }

    /// Probability an ACK on `subchannel` at time `t` is lost.
    pub fn feedback_drop_probability(&self, subchannel: usize, t: f64) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.subchannel == subchannel && e.t_start <= t && t < e.t_end)
            .map(|e| match e.mode {
                JamMode::Data => 0.0,
                JamMode::Feedback => e.severity,
                JamMode::Both => 1.0,
            })
            .fold(0.0, f64::max)
    }

    /// A data or combined jam is active on `subchannel` at `t`.
    pub fn is_data_jammed(&self, subchannel: usize, t: f64) -> bool {
        self.entries
            .iter()
            .any(|e| e.subchannel == subchannel && e.mode != JamMode::Feedback && e.t_start <= t && t < e.t_end)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(mode: JamMode, severity: f64) -> JamEntry {
        JamEntry {
            subchannel: 1,
            t_start: 10.0,
            t_end: 20.0,
            mode,
            severity,
        }
    }

    #[test]
    fn data_power_only_inside_window() {
        let s = JammingSchedule::new(vec![entry(JamMode::Data, 0.0)]);
        assert_eq!(s.data_power_w(1, 0.0, 5.0), 0.0);
        assert!((s.data_power_w(1, 9.0, 11.0) - 1e-3).abs() < 1e-15);
        assert_eq!(s.data_power_w(0, 9.0, 11.0), 0.0);
        assert_eq!(s.data_power_w(1, 20.0, 21.0), 0.0);
        assert_eq!(s.feedback_drop_probability(1, 15.0), 0.0);
    }

    #[test]
    fn feedback_modes() {
        let s = JammingSchedule::new(vec![entry(JamMode::Feedback, 0.3)]);
        assert_eq!(s.feedback_drop_probability(1, 15.0), 0.3);
        assert_eq!(s.feedback_drop_probability(1, 25.0), 0.0);
        assert_eq!(s.data_power_w(1, 10.0, 20.0), 0.0);
        let both = JammingSchedule::new(vec![entry(JamMode::Both, -90.0)]);
        assert_eq!(both.feedback_drop_probability(1, 15.0), 1.0);
        assert!(both.data_power_w(1, 12.0, 13.0) > 0.0);
    }
}
