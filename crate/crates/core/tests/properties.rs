mod common;

use proptest::prelude::*;

use odup_core::adaptive::{mmd2, MmdConfig};
use odup_core::codec::{reconstruct_table, CodeMatrix, CodebookStore};
use odup_core::numkit::{softmax, Matrix, Rng};
use odup_core::recommender::{contribution, evaluate, top_k, EncoderKind, RecModel};
use odup_core::sessiondata::{augment_split, sessionize, temporal_slices, Event, EventLog, Pair, Session, SessionDataset, SlicePlan};
use odup_core::updater::{plan_slots, SlotLedger, Strategy};
use odup_core::wire::{decode_delta, delta_bytes, encode_delta};

fn sessions(lens: &[usize], vocab: usize, seed: u64) -> Vec<Session> {
    let mut rng = Rng::new(seed);
    lens.iter()
        .enumerate()
        .map(|(i, &l)| Session {
            items: (0..l).map(|_| rng.below(vocab)).collect(),
            start: (rng.below(1000) * 100 + i) as u64,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_is_ordered_distribution(v in proptest::collection::vec(-50.0f64..50.0, 1..20), tau in 0.01f64..10.0) {
        let p = softmax(&v, tau).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for i in 0..v.len() {
            for j in 0..v.len() {
                if v[i] > v[j] {
                    prop_assert!(p[i] >= p[j]);
                }
            }
        }
    }

    #[test]
    fn slices_nest_and_count_pairs(lens in proptest::collection::vec(2usize..8, 5..60), seed in any::<u64>(), z in 1usize..5) {
        let s = sessions(&lens, 30, seed);
        prop_assume!(s.len() >= z);
        let plan = SlicePlan::from_ratios(&vec![1.0; z]).unwrap();
        let slices = temporal_slices(&s, &plan, 30).unwrap();
        for w in slices.windows(2) {
            prop_assert!(w[0].pairs.len() <= w[1].pairs.len());
            prop_assert_eq!(&w[1].pairs[..w[0].pairs.len()], &w[0].pairs[..]);
        }
        let all = augment_split(&s, 30);
        prop_assert_eq!(all.pairs.len(), lens.iter().map(|l| l - 1).sum::<usize>());
        prop_assert_eq!(slices.last().unwrap().pairs.len(), all.pairs.len());
    }

    #[test]
    fn sessionize_ignores_record_order(seed in any::<u64>(), count in 1usize..80) {
        let mut rng = Rng::new(seed);
        let mut records: Vec<Event> = (0..count)
            .map(|i| Event {
                user: format!("u{}", rng.below(4)),
                item: format!("i{i}"),
                timestamp: rng.below(200_000) as u64,
            })
            .collect();
        let a = sessionize(&EventLog { records: records.clone() }, 8 * 3600).unwrap();
        rng.shuffle(&mut records);
        let b = sessionize(&EventLog { records }, 8 * 3600).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ranking_ignores_score_shift(scores in proptest::collection::vec(-5i32..5, 1..40), shift in -100i32..100, k in 1usize..10) {
        let base: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
        let moved: Vec<f64> = scores.iter().map(|&s| (s + shift) as f64).collect();
        prop_assert_eq!(top_k(&base, k), top_k(&moved, k));
    }

    #[test]
    fn ndcg_bounded_by_prec(seed in any::<u64>(), k in 1usize..20) {
        let mut rng = Rng::new(seed);
        let model = RecModel::new(20, 4, EncoderKind::MeanPool, &mut rng).unwrap();
        let pairs = (0..50)
            .map(|_| Pair { prefix: vec![rng.below(20), rng.below(20)], label: rng.below(20) })
            .collect();
        let data = SessionDataset { pairs, vocab_size: 20, slice_id: 1 };
        let m = evaluate(&model, &data, k).unwrap();
        prop_assert!(m.ndcg <= m.prec && m.prec <= 1.0);
        for rank in 1..30 {
            let (h, g) = contribution(rank, k);
            prop_assert!(g <= h);
        }
    }

    #[test]
    fn reconstruction_is_one_hot_product(seed in any::<u64>(), vocab in 1usize..30, n in 1usize..5, k in 1usize..9, d in 1usize..6) {
        let mut rng = Rng::new(seed);
        let store = CodebookStore::random(n, k, d, &mut rng);
        let codes = CodeMatrix::new(vocab, n, k, (0..vocab * n).map(|_| rng.below(k) as u16).collect()).unwrap();
        let direct = reconstruct_table(&store, &codes).unwrap();
        let product = codes.one_hot().matmul(store.rows()).unwrap();
        prop_assert!(direct.sq_distance(&product).unwrap() <= 1e-20);
    }

    #[test]
    fn plans_pick_distinct_extreme_rows(seed in any::<u64>(), n in 1usize..5, k in 1usize..9, rounds in 0usize..6) {
        let mut rng = Rng::new(seed);
        let nk = n * k;
        let mut ledger = SlotLedger::fresh(nk);
        for e in 0..rounds {
            let strategy = if rng.below(2) == 0 { Strategy::Stack } else { Strategy::Queue };
            let beta = 1 + rng.below(nk);
            let slots = plan_slots(&ledger, strategy, beta).unwrap();
            let mut sorted = slots.clone();
            sorted.sort();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), beta);
            let seqs: Vec<u64> = ledger.records().iter().map(|r| r.seq).collect();
            let chosen_min = slots.iter().map(|&s| seqs[s]).min().unwrap();
            let chosen_max = slots.iter().map(|&s| seqs[s]).max().unwrap();
            for (r, &s) in seqs.iter().enumerate() {
                if !slots.contains(&r) {
                    match strategy {
                        Strategy::Stack => prop_assert!(s < chosen_min),
                        _ => prop_assert!(s > chosen_max),
                    }
                }
            }
            ledger.commit(&slots, e as u32 + 2);
        }
    }

    #[test]
    fn delta_frames_round_trip(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let (vocab, n, k, d, beta, strategy) = common::random_shape(&mut rng);
        let delta = common::random_delta(&mut rng, vocab, n, k, d, beta, strategy);
        let bytes = encode_delta(&delta).unwrap();
        prop_assert_eq!(bytes.len(), delta_bytes(vocab, n, k, d, beta));
        let back = decode_delta(&bytes).unwrap();
        prop_assert_eq!(encode_delta(&back).unwrap(), bytes.clone());
        let bit = rng.below(bytes.len() * 8);
        let mut flipped = bytes;
        flipped[bit / 8] ^= 1 << (bit % 8);
        prop_assert!(decode_delta(&flipped).is_err());
    }

    #[test]
    fn mmd_is_symmetric_and_non_negative(seed in any::<u64>(), a in 2usize..20, b in 2usize..20) {
        let mut rng = Rng::new(seed);
        let x = Matrix::uniform(a, 3, -1.0, 1.0, &mut rng);
        let y = Matrix::uniform(b, 3, -0.5, 2.0, &mut rng);
        let cfg = MmdConfig::default();
        let (xy, yx) = (mmd2(&x, &y, &cfg).unwrap(), mmd2(&y, &x, &cfg).unwrap());
        prop_assert!(xy >= 0.0);
        prop_assert!((xy - yx).abs() <= 1e-12);
    }
}
