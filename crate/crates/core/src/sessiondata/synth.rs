use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Rng;

use super::{prepare, Event, EventLog, Session, SlicePlan, SlicedData};

/// Parameters of the drifting cluster-mixture session generator.
///
/// Items are split into `clusters` groups with Zipf popularity inside each
/// group. A session picks one cluster and draws its items from it (with a
/// small chance of a uniformly random item). Cluster weights follow
/// `1 + 0.8·cos(2πc/C − drift·π·u)` where `u ∈ [0,1)` is the session's
/// position in time, so `drift = 0` gives a stationary stream and larger
/// values rotate preference further between the first and last slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub vocab_size: usize,
    pub n_sessions: usize,
    pub drift: f64,
    pub clusters: usize,
    pub zipf: f64,
    pub noise: f64,
    pub min_len: usize,
    pub max_len: usize,
}

impl SynthConfig {
    pub fn new(vocab_size: usize, n_sessions: usize, drift: f64) -> Self {
        Self {
            vocab_size,
            n_sessions,
            drift,
            clusters: 10,
            zipf: 1.0,
            noise: 0.1,
            min_len: 2,
            max_len: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 50 {
            return Err(Error::invalid("synthetic vocab_size must be >= 50"));
        }
        if self.n_sessions < 100 {
            return Err(Error::invalid("synthetic n_sessions must be >= 100"));
        }
        if self.clusters == 0 || self.clusters > self.vocab_size {
            return Err(Error::invalid("cluster count must be in [1, vocab_size]"));
        }
        if !(self.drift.is_finite() && self.drift >= 0.0) {
            return Err(Error::invalid("drift must be a non-negative real"));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::invalid("noise must be in [0, 1]"));
        }
        if self.min_len < 2 || self.max_len < self.min_len {
            return Err(Error::invalid("session lengths must satisfy 2 <= min_len <= max_len"));
        }
        Ok(())
    }
}

/// Spacing between synthetic session start times, wider than the default session gap.
const SESSION_SPACING_SECS: u64 = 9 * 3600;

/// Sessions ordered by start time.
pub fn synth_sessions(rng: &mut Rng, cfg: &SynthConfig) -> Result<Vec<Session>> {
    cfg.validate()?;
    let mut items: Vec<usize> = (0..cfg.vocab_size).collect();
    rng.shuffle(&mut items);
    let c = cfg.clusters;
    let members: Vec<&[usize]> = (0..c)
        .map(|j| &items[j * cfg.vocab_size / c..(j + 1) * cfg.vocab_size / c])
        .collect();
    let popularity: Vec<Vec<f64>> = members
        .iter()
        .map(|m| (0..m.len()).map(|r| 1.0 / ((r + 1) as f64).powf(cfg.zipf)).collect())
        .collect();

    let mut out = Vec::with_capacity(cfg.n_sessions);
    for i in 0..cfg.n_sessions {
        let u = i as f64 / cfg.n_sessions as f64;
        let weights: Vec<f64> = (0..c)
            .map(|j| 1.0 + 0.8 * (2.0 * PI * j as f64 / c as f64 - cfg.drift * PI * u).cos())
            .collect();
        let cluster = rng.weighted(&weights);
        let len = cfg.min_len + rng.below(cfg.max_len - cfg.min_len + 1);
        let session_items = (0..len)
            .map(|_| {
                if rng.uniform() < cfg.noise {
                    rng.below(cfg.vocab_size)
                } else {
                    members[cluster][rng.weighted(&popularity[cluster])]
                }
            })
            .collect();
        out.push(Session {
            items: session_items,
            start: i as u64 * SESSION_SPACING_SECS,
        });
    }
    Ok(out)
}

/// Generates sessions and slices them with a temporally last test holdout.
pub fn synth_generate(rng: &mut Rng, cfg: &SynthConfig, plan: &SlicePlan, test_fraction: f64) -> Result<SlicedData> {
    let sessions = synth_sessions(rng, cfg)?;
    prepare(&sessions, cfg.vocab_size, plan, test_fraction)
}

/// Renders sessions as an event log: one user per session, items one minute apart.
pub fn synth_event_log(sessions: &[Session]) -> EventLog {
    let records = sessions
        .iter()
        .enumerate()
        .flat_map(|(s, sess)| {
            sess.items.iter().enumerate().map(move |(j, &item)| Event {
                user: format!("s{s}"),
                item: format!("i{item}"),
                timestamp: sess.start + 60 * j as u64,
            })
        })
        .collect();
    EventLog { records }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let cfg = SynthConfig::new(100, 200, 0.3);
        let a = synth_sessions(&mut Rng::new(5), &cfg).unwrap();
        let b = synth_sessions(&mut Rng::new(5), &cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synth_sessions(&mut Rng::new(6), &cfg).unwrap());
    }

    #[test]
    fn rejects_small_configs() {
        assert!(synth_sessions(&mut Rng::new(1), &SynthConfig::new(49, 200, 0.0)).is_err());
        assert!(synth_sessions(&mut Rng::new(1), &SynthConfig::new(50, 99, 0.0)).is_err());
    }

    #[test]
    fn event_log_roundtrips_through_sessionize() {
        let cfg = SynthConfig::new(60, 120, 0.0);
        let sessions = synth_sessions(&mut Rng::new(2), &cfg).unwrap();
        let log = synth_event_log(&sessions);
        let raw = super::super::sessionize(&log, super::super::DEFAULT_GAP_SECS).unwrap();
        assert_eq!(raw.len(), sessions.len());
        for (r, s) in raw.iter().zip(&sessions) {
            assert_eq!(r.items.len(), s.items.len());
            assert_eq!(r.start, s.start);
        }
    }
}
