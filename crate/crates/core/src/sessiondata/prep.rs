use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::RawSession;

/// An anonymous session of vocabulary indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub items: Vec<usize>,
    pub start: u64,
}

/// One labeled training example: the items seen so far and the next item.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub prefix: Vec<usize>,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionDataset {
    pub pairs: Vec<Pair>,
    pub vocab_size: usize,
    pub slice_id: u32,
}

impl SessionDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Item-id ↔ dense index mapping. Index 0 is the most frequent item.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_ids(ids: Vec<String>) -> Self {
        let index = ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self { ids, index }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id_of(&self, idx: usize) -> Option<&str> {
        self.ids.get(idx).map(String::as_str)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// Cumulative temporal split proportions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlicePlan {
    fractions: Vec<f64>,
}

impl SlicePlan {
    /// Normalizes positive ratios such as `1:3:6:10:15` into fractions.
    pub fn from_ratios(ratios: &[f64]) -> Result<Self> {
        if ratios.is_empty() || ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::invalid("slice ratios must be non-empty and positive"));
        }
        let total: f64 = ratios.iter().sum();
        Ok(Self {
            fractions: ratios.iter().map(|r| r / total).collect(),
        })
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    pub fn len(&self) -> usize {
        self.fractions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fractions.is_empty()
    }

    /// Running sums of the fractions; the final entry is exactly 1.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out: Vec<f64> = self
            .fractions
            .iter()
            .map(|f| {
                acc += f;
                acc
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    }

    /// Number of sessions in each cumulative slice out of `total`.
    pub fn boundaries(&self, total: usize) -> Result<Vec<usize>> {
        let z = self.len();
        if total < z {
            return Err(Error::EmptyDataset(format!(
                "{total} sessions cannot fill {z} slices"
            )));
        }
        let mut prev = 0;
        let mut out = Vec::with_capacity(z);
        for (t, c) in self.cumulative().into_iter().enumerate() {
            let want = (c * total as f64).round() as usize;
            // every slice adds at least one session and leaves one for each later slice
            let b = want.clamp(prev + 1, total - (z - 1 - t));
            out.push(b);
            prev = b;
        }
        Ok(out)
    }
}

/// Sessions split into nested training slices plus a held-out test set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlicedData {
    pub vocab_size: usize,
    pub slices: Vec<SessionDataset>,
    pub test: SessionDataset,
}

/// Drops sessions outside `[min_len, max_len]`, optionally restricts to the
/// `top_items` most frequent items, and indexes items by frequency rank.
///
/// Frequency ties are broken by first appearance.
pub fn filter_and_index(
    sessions: &[RawSession],
    min_len: usize,
    max_len: usize,
    top_items: Option<usize>,
) -> Result<(Vec<Session>, Vocab)> {
    if min_len < 2 {
        return Err(Error::invalid("min_len must be at least 2"));
    }
    if max_len < min_len {
        return Err(Error::invalid("max_len must be >= min_len"));
    }
    let in_range = |len: usize| (min_len..=max_len).contains(&len);
    let mut kept: Vec<RawSession> = sessions.iter().filter(|s| in_range(s.items.len())).cloned().collect();

    if let Some(top) = top_items {
        let ranked = rank_items(&kept);
        let allowed: std::collections::HashSet<&str> =
            ranked.iter().take(top).map(String::as_str).collect();
        kept = kept
            .into_iter()
            .filter_map(|mut s| {
                s.items.retain(|i| allowed.contains(i.as_str()));
                in_range(s.items.len()).then_some(s)
            })
            .collect();
    }
    if kept.is_empty() {
        return Err(Error::EmptyDataset("every session was filtered out".into()));
    }
    let vocab = Vocab::from_ids(rank_items(&kept));
    let out = kept
        .iter()
        .map(|s| Session {
            items: s.items.iter().map(|i| vocab.index[i]).collect(),
            start: s.start,
        })
        .collect();
    Ok((out, vocab))
}

fn rank_items(sessions: &[RawSession]) -> Vec<String> {
    let mut stats: HashMap<&str, (usize, usize)> = HashMap::new();
    let mut order = 0;
    for s in sessions {
        for item in &s.items {
            let e = stats.entry(item.as_str()).or_insert_with(|| {
                order += 1;
                (0, order)
            });
            e.0 += 1;
        }
    }
    let mut ranked: Vec<(&str, usize, usize)> = stats.into_iter().map(|(k, (c, o))| (k, c, o)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    ranked.into_iter().map(|(k, _, _)| k.to_string()).collect()
}

/// `[v1..vl]` → `([v1],v2), ([v1,v2],v3), …, ([v1..v(l−1)],vl)`.
pub fn augment_split(sessions: &[Session], vocab_size: usize) -> SessionDataset {
    let pairs = sessions
        .iter()
        .flat_map(|s| {
            (1..s.items.len()).map(move |end| Pair {
                prefix: s.items[..end].to_vec(),
                label: s.items[end],
            })
        })
        .collect();
    SessionDataset {
        pairs,
        vocab_size,
        slice_id: 0,
    }
}

fn sorted_by_start(sessions: &[Session]) -> Vec<Session> {
    let mut sorted = sessions.to_vec();
    sorted.sort_by_key(|s| s.start);
    sorted
}

/// Cumulative slices `D_1 ⊂ … ⊂ D_z` by session start time.
pub fn temporal_slices(sessions: &[Session], plan: &SlicePlan, vocab_size: usize) -> Result<Vec<SessionDataset>> {
    let sorted = sorted_by_start(sessions);
    let bounds = plan.boundaries(sorted.len())?;
    Ok(bounds
        .into_iter()
        .enumerate()
        .map(|(t, b)| {
            let mut ds = augment_split(&sorted[..b], vocab_size);
            ds.slice_id = t as u32 + 1;
            ds
        })
        .collect())
}

/// Holds out the temporally last `test_fraction` of sessions.
pub fn split_holdout(sessions: &[Session], test_fraction: f64) -> Result<(Vec<Session>, Vec<Session>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::invalid("test fraction must be in [0, 1)"));
    }
    let mut sorted = sorted_by_start(sessions);
    let n_test = (sorted.len() as f64 * test_fraction).round() as usize;
    let test = sorted.split_off(sorted.len() - n_test);
    Ok((sorted, test))
}

/// Holdout followed by cumulative slicing.
pub fn prepare(sessions: &[Session], vocab_size: usize, plan: &SlicePlan, test_fraction: f64) -> Result<SlicedData> {
    let (train, test) = split_holdout(sessions, test_fraction)?;
    let slices = temporal_slices(&train, plan, vocab_size)?;
    Ok(SlicedData {
        vocab_size,
        slices,
        test: augment_split(&test, vocab_size),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(items: &[&str], start: u64) -> RawSession {
        RawSession {
            user: "u".into(),
            items: items.iter().map(|s| s.to_string()).collect(),
            start,
        }
    }

    fn sess(items: &[usize], start: u64) -> Session {
        Session {
            items: items.to_vec(),
            start,
        }
    }

    #[test]
    fn drops_short_and_long() {
        let long: Vec<String> = (0..51).map(|i| format!("x{i}")).collect();
        let long: Vec<&str> = long.iter().map(String::as_str).collect();
        let input = vec![raw(&["a"], 0), raw(&["a", "b"], 1), raw(&long, 2)];
        let (s, vocab) = filter_and_index(&input, 2, 50, None).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(vocab.len(), 2);
        assert!(filter_and_index(&input, 1, 50, None).is_err());
    }

    #[test]
    fn everything_filtered_is_an_error() {
        let input = vec![raw(&["a"], 0)];
        assert!(matches!(
            filter_and_index(&input, 2, 50, None),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn top_items_and_frequency_rank() {
        let input = vec![
            raw(&["c", "a", "b"], 0),
            raw(&["a", "b", "d"], 1),
            raw(&["a", "e"], 2),
        ];
        let (s, vocab) = filter_and_index(&input, 2, 50, Some(2)).unwrap();
        // a:3, b:2 survive; the last session shrinks to [a] and is dropped
        assert_eq!(vocab.ids(), &["a".to_string(), "b".to_string()]);
        assert_eq!(s, vec![sess(&[0, 1], 0), sess(&[0, 1], 1)]);
    }

    #[test]
    fn frequency_ties_use_first_seen_order() {
        let input = vec![raw(&["z", "y"], 0), raw(&["x", "w"], 1)];
        let (_, vocab) = filter_and_index(&input, 2, 50, None).unwrap();
        assert_eq!(vocab.ids(), &["z", "y", "x", "w"]);
    }

    #[test]
    fn top_items_caps_vocab() {
        let mut rng = crate::numkit::Rng::new(4);
        let input: Vec<RawSession> = (0..3000)
            .map(|i| {
                let items: Vec<String> = (0..5).map(|_| format!("i{}", rng.below(200))).collect();
                RawSession { user: "u".into(), items, start: i }
            })
            .collect();
        let (_, vocab) = filter_and_index(&input, 2, 50, Some(100)).unwrap();
        assert_eq!(vocab.len(), 100);
    }

    #[test]
    fn augmentation() {
        let ds = augment_split(&[sess(&[0, 1, 2], 0), sess(&[3, 4], 1)], 5);
        assert_eq!(
            ds.pairs,
            vec![
                Pair { prefix: vec![0], label: 1 },
                Pair { prefix: vec![0, 1], label: 2 },
                Pair { prefix: vec![3], label: 4 },
            ]
        );
    }

    #[test]
    fn slice_sizes() {
        let sessions: Vec<Session> = (0..100).rev().map(|i| sess(&[0, 1], i)).collect();
        let plan = SlicePlan::from_ratios(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let slices = temporal_slices(&sessions, &plan, 2).unwrap();
        let sizes: Vec<usize> = slices.iter().map(|s| s.len()).collect();
        assert_eq!(sizes, vec![10, 30, 60, 100]);
        assert_eq!(slices[3].slice_id, 4);

        let one = SlicePlan::from_ratios(&[1.0]).unwrap();
        assert_eq!(temporal_slices(&sessions, &one, 2).unwrap()[0].len(), 100);
        assert!(temporal_slices(&sessions[..3], &plan, 2).is_err());
    }

    #[test]
    fn gowalla_cumulative_shares() {
        let plan = SlicePlan::from_ratios(&[1.0, 3.0, 6.0, 10.0, 15.0]).unwrap();
        let want = [1.0 / 35.0, 4.0 / 35.0, 10.0 / 35.0, 20.0 / 35.0, 1.0];
        for (a, b) in plan.cumulative().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn slices_nest() {
        let mut rng = crate::numkit::Rng::new(8);
        let sessions: Vec<Session> = (0..200)
            .map(|i| {
                let len = 2 + rng.below(5);
                sess(&(0..len).map(|_| rng.below(30)).collect::<Vec<_>>(), rng.below(10_000) as u64 + i)
            })
            .collect();
        let plan = SlicePlan::from_ratios(&[1.0, 2.0, 5.0, 10.0, 20.0]).unwrap();
        let slices = temporal_slices(&sessions, &plan, 30).unwrap();
        for w in slices.windows(2) {
            assert_eq!(&w[1].pairs[..w[0].len()], &w[0].pairs[..]);
        }
        let expected: usize = sessions.iter().map(|s| s.items.len() - 1).sum();
        assert_eq!(slices.last().unwrap().len(), expected);
    }

    #[test]
    fn holdout_is_latest() {
        let sessions: Vec<Session> = (0..20).map(|i| sess(&[0, 1], i)).collect();
        let (train, test) = split_holdout(&sessions, 0.1).unwrap();
        assert_eq!(train.len(), 18);
        assert!(test.iter().all(|s| s.start >= 18));
    }
}
