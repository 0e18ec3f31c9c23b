use lifenav_core::agent_sim::{serialize_pose, Pose};
use lifenav_core::memory::{context_tokens_for, max_history, FrameRecord, MemoryBank, ObservedObject};
use lifenav_core::metrics::{per_category, spl, success_rate, EpisodeOutcome};
use lifenav_core::rng::Rng;
use proptest::prelude::*;

const CATS: [&str; 4] = ["bed", "sofa", "book", "sink"];

fn record(i: usize, rng: &mut Rng) -> FrameRecord {
    let pose = Pose::new(rng.next_f64() * 8.0, rng.next_f64() * 8.0, 0.0);
    let observed = (0..rng.index(3))
        .map(|_| ObservedObject { category: CATS[rng.index(4)].into(), x: rng.next_f64(), y: rng.next_f64() })
        .collect();
    FrameRecord { frame_index: i, pose, pose_text: serialize_pose(&pose), frame_seed: i as u64, token_count: 30, observed }
}

#[test]
fn recall_agrees_with_retained_frames() {
    let mut rng = Rng::seed_from_u64(8);
    for _ in 0..200 {
        let cap = 1 + rng.index(20);
        let mut bank = MemoryBank::new(cap, 30).unwrap();
        let total = rng.index(60);
        for i in 0..total {
            bank.append_frame(record(i, &mut rng)).unwrap();
        }
        let frames: Vec<&FrameRecord> = bank.frames().collect();
        assert_eq!(frames.len(), total.min(cap));
        assert!(frames.windows(2).all(|p| p[0].frame_index + 1 == p[1].frame_index));
        for cat in CATS {
            // Newest retained frame with the category, last matching object in it.
            let expected = frames.iter().rev().find_map(|f| {
                f.observed.iter().rev().find(|o| o.category == cat).map(|o| (o.x, o.y, f.frame_index))
            });
            let got = bank.recall_target(cat).map(|r| (r.x, r.y, r.frame_index));
            assert_eq!(got.is_some(), expected.is_some(), "{cat}");
            if let (Some(g), Some(e)) = (got, expected) {
                assert_eq!(g.2, e.2);
                let f = frames.iter().find(|f| f.frame_index == g.2).unwrap();
                assert!(f.observed.iter().any(|o| o.category == cat && o.x == g.0 && o.y == g.1));
            }
        }
    }
}

#[test]
fn evicted_category_is_forgotten() {
    let mut rng = Rng::seed_from_u64(1);
    let mut bank = MemoryBank::new(5, 30).unwrap();
    let mut first = record(0, &mut rng);
    first.observed = vec![ObservedObject { category: "piano".into(), x: 1.0, y: 1.0 }];
    bank.append_frame(first).unwrap();
    assert!(bank.recall_target("piano").is_some());
    for i in 1..6 {
        let mut r = record(i, &mut rng);
        r.observed.clear();
        bank.append_frame(r).unwrap();
    }
    assert!(bank.recall_target("piano").is_none());
}

#[test]
fn budget_arithmetic() {
    assert_eq!(max_history(29_900, 598, 0, 0), 50);
    assert_eq!(max_history(9_000, 30, 0, 0), 300);
    let a = context_tokens_for(300, 30, 0, 0) as f64;
    let b = context_tokens_for(50, 598, 0, 0) as f64;
    assert!(((a * a) / (b * b) - (9000.0f64 / 29900.0).powi(2)).abs() < 1e-9);
}

fn random_outcomes(rng: &mut Rng) -> Vec<EpisodeOutcome> {
    (0..1 + rng.index(40))
        .map(|_| {
            let l_star = 0.25 + rng.next_f64() * 20.0;
            EpisodeOutcome {
                success: rng.index(2) == 1,
                path_length: l_star * (0.5 + rng.next_f64() * 3.0),
                shortest_length: l_star,
                category: CATS[rng.index(4)].into(),
                steps: rng.index(500),
                context_tokens_final: 0,
            }
        })
        .collect()
}

#[test]
fn spl_never_exceeds_sr() {
    let mut rng = Rng::seed_from_u64(77);
    for _ in 0..10_000 {
        let outcomes = random_outcomes(&mut rng);
        let (sr, s) = (success_rate(&outcomes).unwrap(), spl(&outcomes).unwrap());
        assert!(0.0 <= s && s <= sr + 1e-12 && sr <= 1.0, "spl {s} sr {sr}");
    }
}

#[test]
fn categories_partition_success_rate() {
    let mut rng = Rng::seed_from_u64(78);
    for _ in 0..1000 {
        let outcomes = random_outcomes(&mut rng);
        let per = per_category(&outcomes);
        let n: usize = per.values().map(|s| s.episodes).sum();
        assert_eq!(n, outcomes.len());
        let weighted: f64 = per.values().map(|s| s.episodes as f64 * s.success_rate).sum::<f64>() / n as f64;
        assert!((weighted - success_rate(&outcomes).unwrap()).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn spl_equals_sr_when_paths_optimal(flags in prop::collection::vec(any::<bool>(), 1..30)) {
        let outcomes: Vec<EpisodeOutcome> = flags
            .iter()
            .map(|&s| EpisodeOutcome { success: s, path_length: 3.0, shortest_length: 3.0, category: "bed".into(), steps: 1, context_tokens_final: 0 })
            .collect();
        prop_assert!((spl(&outcomes).unwrap() - success_rate(&outcomes).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn context_is_linear_and_cost_is_square(cap in 1usize..40, n in 0usize..80, tpf in 1usize..700, pose in 0usize..5, sys in 0usize..50, instr in 0usize..50) {
        let mut rng = Rng::seed_from_u64(n as u64);
        let mut bank = MemoryBank::new(cap, tpf).unwrap().with_overheads(sys, instr, pose);
        for i in 0..n {
            bank.append_frame(record(i, &mut rng)).unwrap();
            prop_assert!(bank.len() <= cap);
        }
        let expected = (sys + instr + bank.len() * (pose + tpf)) as u64;
        prop_assert_eq!(bank.context_tokens(), expected);
        prop_assert_eq!(bank.attention_cost_proxy(), u128::from(expected) * u128::from(expected));
    }

    #[test]
    fn max_history_fits_budget(budget in 0u64..100_000, tpf in 1u64..1000, pose in 0u64..5, overhead in 0u64..2000) {
        let m = max_history(budget, tpf, pose, overhead);
        if m > 0 {
            prop_assert!(context_tokens_for(m, tpf, pose, overhead) <= budget);
        }
        prop_assert!(context_tokens_for(m + 1, tpf, pose, overhead) > budget);
    }
}
