use statrs::distribution::{ChiSquared, ContinuousCDF};

use odup_core::numkit::Rng;
use odup_core::sessiondata::{
    filter_and_index, prepare, read_cache, sessionize, synth_event_log, synth_generate, synth_sessions, write_cache,
    EventLog, Session, SlicePlan, SynthConfig, DEFAULT_GAP_SECS,
};

/// Opening-item counts; sessions are independent draws, their items are not.
fn counts(sessions: &[Session], vocab: usize) -> Vec<f64> {
    let mut c = vec![0.0; vocab];
    for s in sessions {
        c[s.items[0]] += 1.0;
    }
    c
}

fn first_last(cfg: &SynthConfig, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let sessions = synth_sessions(&mut Rng::new(seed), cfg).unwrap();
    let fifth = sessions.len() / 5;
    (
        counts(&sessions[..fifth], cfg.vocab_size),
        counts(&sessions[sessions.len() - fifth..], cfg.vocab_size),
    )
}

/// Pearson homogeneity test on a 2×m table, pooling sparse cells.
fn homogeneity_p(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    let total = na + nb;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let col = x + y;
        if col * na.min(nb) / total < 5.0 {
            pooled.0 += x;
            pooled.1 += y;
        } else {
            cells.push((x, y));
        }
    }
    if pooled.0 + pooled.1 > 0.0 {
        cells.push(pooled);
    }
    let stat: f64 = cells
        .iter()
        .map(|&(x, y)| {
            let col = x + y;
            let (ea, eb) = (col * na / total, col * nb / total);
            (x - ea).powi(2) / ea + (y - eb).powi(2) / eb
        })
        .sum();
    let dof = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    0.5 * a.iter().zip(b).map(|(x, y)| (x / na - y / nb).abs()).sum::<f64>()
}

#[test]
fn stationary_stream_keeps_item_frequencies() {
    let cfg = SynthConfig::new(500, 5000, 0.0);
    let (a, b) = first_last(&cfg, 11);
    let p = homogeneity_p(&a, &b);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn drifting_stream_rejects_homogeneity() {
    let cfg = SynthConfig::new(500, 5000, 0.5);
    let (a, b) = first_last(&cfg, 11);
    assert!(homogeneity_p(&a, &b) < 1e-6);
}

#[test]
fn stronger_drift_moves_further() {
    let tv = |drift| {
        let (a, b) = first_last(&SynthConfig::new(500, 5000, drift), 3);
        total_variation(&a, &b)
    };
    let (low, high) = (tv(0.1), tv(0.5));
    assert!(high > low, "{high} <= {low}");
}

#[test]
fn generation_is_seeded() {
    let cfg = SynthConfig::new(200, 400, 0.3);
    let plan = SlicePlan::from_ratios(&[1.0; 4]).unwrap();
    let a = synth_generate(&mut Rng::new(9), &cfg, &plan, 0.1).unwrap();
    let b = synth_generate(&mut Rng::new(9), &cfg, &plan, 0.1).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.slices.len(), 4);
    assert!(!a.test.is_empty());
}

#[test]
fn log_and_cache_paths_agree() {
    let cfg = SynthConfig::new(80, 300, 0.2);
    let sessions = synth_sessions(&mut Rng::new(4), &cfg).unwrap();
    let log = synth_event_log(&sessions);
    let mut text = Vec::new();
    log.write(&mut text, '\t').unwrap();
    let parsed = EventLog::parse(text.as_slice(), '\t').unwrap();
    assert_eq!(parsed, log);

    let raw = sessionize(&parsed, DEFAULT_GAP_SECS).unwrap();
    let (indexed, vocab) = filter_and_index(&raw, 2, 50, None).unwrap();
    let plan = SlicePlan::from_ratios(&[1.0, 1.0, 2.0]).unwrap();
    let data = prepare(&indexed, vocab.len(), &plan, 0.1).unwrap();
    let bytes = write_cache(&vocab, &data).unwrap();
    let (vocab2, data2) = read_cache(&bytes).unwrap();
    assert_eq!(vocab2, vocab);
    assert_eq!(data2, data);
    let last = data.slices.last().unwrap();
    assert!(last.pairs.len() > data.slices[0].pairs.len());
}
