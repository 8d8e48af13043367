use ndarray::Array2;
use proptest::prelude::*;

use f0synth::anonymize::{
    candidate_set, select_pseudo_speaker, shift_scale_f0, trajectory_stats, Distance, F0Domain, F0Stats, GenderMode,
    PoolEntry, SelectionParams, SpeakerPool,
};
use f0synth::featureio::{decode_tensor, encode_tensor, FeatureTensor, Gender, NormStats};
use f0synth::metrics::{accurately_processed, cents_error, fpe, gpe, pitch_counts, vuv_confusion};
use f0synth::model::{forward, init_params, mask_outputs, ModelConfig};
use f0synth::training::{composite_loss, SchedulerAction, SchedulerState};

fn f0_frame() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 3 => 50.0f64..500.0]
}

fn pair(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max).prop_flat_map(|n| {
        (
            prop::collection::vec(f0_frame(), n),
            prop::collection::vec(f0_frame(), n),
        )
    })
}

proptest! {
    #[test]
    fn ratios_in_unit_interval((p, t) in pair(60)) {
        for r in [gpe(&p, &t).unwrap(), fpe(&p, &t).unwrap(), Some(accurately_processed(&p, &t).unwrap())]
            .into_iter()
            .flatten()
        {
            prop_assert!((0.0..=1.0).contains(&r));
        }
        let c = vuv_confusion(&p, &t).unwrap();
        prop_assert_eq!(c.total() as usize, p.len());
        if let Some(a) = c.accuracy() {
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn gpe_invariant_to_common_power_of_two_scale((p, t) in pair(60), k in -4i32..4) {
        // powers of two rescale without rounding, so counts must match exactly
        let s = 2f64.powi(k);
        let ps: Vec<f64> = p.iter().map(|x| x * s).collect();
        let ts: Vec<f64> = t.iter().map(|x| x * s).collect();
        prop_assert_eq!(gpe(&p, &t).unwrap(), gpe(&ps, &ts).unwrap());
    }

    #[test]
    fn metrics_invariant_to_frame_order((p, t) in pair(60), seed in any::<u64>()) {
        let perm = f0synth::rng::seeded_permutation(p.len(), seed);
        let pp: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
        let tp: Vec<f64> = perm.iter().map(|&i| t[i]).collect();
        prop_assert_eq!(pitch_counts(&p, &t).unwrap(), pitch_counts(&pp, &tp).unwrap());
    }

    #[test]
    fn cents_antisymmetric(a in 20.0f64..1000.0, b in 20.0f64..1000.0) {
        let d = cents_error(a, b).unwrap() + cents_error(b, a).unwrap();
        prop_assert!(d.abs() < 1e-9);
    }

    #[test]
    fn loss_sign_and_mask_properties(
        rows in prop::collection::vec((-5.0f64..5.0, -30.0f64..30.0, -3.0f64..3.0, any::<bool>()), 1..20),
        alpha in 0.01f64..50.0,
    ) {
        let f: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let g: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let t: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let v: Vec<bool> = rows.iter().map(|r| r.3).collect();
        let out = composite_loss(&f, &g, &t, &v, alpha).unwrap();
        prop_assert!(out.loss >= 0.0);
        for i in 0..rows.len() {
            if v[i] {
                prop_assert!(out.d_logits[i] < 0.0);
            } else {
                prop_assert!(out.d_logits[i] > 0.0);
                prop_assert_eq!(out.d_f0hat[i], 0.0);
            }
        }
        let doubled = composite_loss(&f, &g, &t, &v, 2.0 * alpha).unwrap();
        for (a, b) in out.d_logits.iter().zip(&doubled.d_logits) {
            prop_assert!((2.0 * a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    #[test]
    fn forward_is_row_equivariant_and_masks_follow_logits(seed in any::<u64>(), rows in 1usize..12) {
        let config = ModelConfig { input_dim: 5, hidden_sizes: vec![8, 6, 5, 4], dropout: 0.0 };
        let p = init_params(&config, seed).unwrap();
        let x = Array2::from_shape_fn((rows, 5), |(r, c)| ((r * 7 + c * 3) as f64 * 0.37 + seed as f64 * 1e-3).sin());
        let perm = f0synth::rng::seeded_permutation(rows, seed);
        let xp = Array2::from_shape_fn((rows, 5), |(r, c)| x[[perm[r], c]]);
        let a = forward(&p, x.view(), false, 0).unwrap();
        let b = forward(&p, xp.view(), false, 0).unwrap();
        let train = forward(&p, x.view(), true, seed).unwrap();
        for r in 0..rows {
            prop_assert_eq!(b.f0hat_norm[r], a.f0hat_norm[perm[r]]);
            prop_assert_eq!(b.logits[r], a.logits[perm[r]]);
            prop_assert_eq!(train.f0hat_norm[r], a.f0hat_norm[r]);
        }
        let norm = NormStats { logf0_mean: 5.0, logf0_std: 0.2, ..NormStats::identity(5) };
        let (f0, pv) = mask_outputs(&norm, a.f0hat_norm.as_slice().unwrap(), a.logits.as_slice().unwrap());
        for r in 0..rows {
            prop_assert_eq!(f0[r] == 0.0, a.logits[r] < 0.0);
            prop_assert!(f0[r] >= 0.0);
            prop_assert!((0.0..=1.0).contains(&pv[r]));
        }
    }

    #[test]
    fn norm_round_trip(x in -1e3f64..1e3, mean in -10.0f64..10.0, std in 1e-3f64..10.0) {
        let n = NormStats { logf0_mean: mean, logf0_std: std, ..NormStats::identity(1) };
        let back = n.denormalize_logf0(n.normalize_logf0(x));
        prop_assert!((back - x).abs() <= 1e-9 * x.abs().max(1.0));
    }

    #[test]
    fn tensor_round_trip(data in prop::collection::vec(-1e6f32..1e6, 1..64), rank2 in any::<bool>()) {
        let t = if rank2 && data.len() % 2 == 0 {
            FeatureTensor::matrix(2, data.len() / 2, data)
        } else {
            FeatureTensor::vector(data)
        };
        let bytes = encode_tensor(&t);
        let back = decode_tensor(&bytes, "mem").unwrap();
        prop_assert_eq!(encode_tensor(&back), bytes);
        prop_assert_eq!(back, t);
    }

    #[test]
    fn shift_scale_preserves_mask_and_hits_target(
        f0 in prop::collection::vec(prop_oneof![1 => Just(0.0), 3 => 150.0f64..250.0], 2..80),
        tgt_mean in 100.0f64..300.0,
        tgt_std in 1.0f64..10.0,
    ) {
        let voiced: Vec<f64> = f0.iter().copied().filter(|&x| x > 0.0).collect();
        prop_assume!(voiced.len() >= 2);
        let src = trajectory_stats(&voiced);
        prop_assume!(src.std > 1e-3);
        let tgt = F0Stats { mean: tgt_mean, std: tgt_std };
        for domain in [F0Domain::Linear, F0Domain::Log] {
            let out = shift_scale_f0(&f0, src, tgt, domain).unwrap();
            for (a, b) in f0.iter().zip(&out) {
                prop_assert_eq!(*a > 0.0, *b > 0.0);
            }
            if domain == F0Domain::Linear {
                let got = trajectory_stats(&out.iter().copied().filter(|&x| x > 0.0).collect::<Vec<_>>());
                prop_assert!((got.mean - tgt.mean).abs() <= 1e-9 * tgt.mean);
                prop_assert!((got.std - tgt.std).abs() <= 1e-9 * tgt.std);
            }
        }
    }

    #[test]
    fn selection_respects_gender_hull_and_scale(
        xs in prop::collection::vec((prop::collection::vec(-1.0f64..1.0, 3), any::<bool>()), 4..30),
        src in prop::collection::vec(-1.0f64..1.0, 3),
        scale in 0.1f64..10.0,
        seed in any::<u64>(),
    ) {
        let entries: Vec<PoolEntry> = xs.iter().enumerate().map(|(i, (x, f))| PoolEntry {
            speaker_id: format!("s{i:03}"),
            gender: if *f { Gender::F } else { Gender::M },
            xvec: x.clone(),
            stats: F0Stats { mean: 100.0 + i as f64, std: 5.0 },
        }).collect();
        let pool = SpeakerPool::new(entries).unwrap();
        let target = Gender::F;
        prop_assume!(pool.count(target) >= 1);
        let n = pool.count(target);
        let params = SelectionParams { gender_mode: GenderMode::Opposite, n, k: n.div_ceil(2), distance: Distance::Cosine };
        let p = select_pseudo_speaker(&pool, &src, Gender::M, &params, seed).unwrap();
        for id in &p.chosen_ids {
            prop_assert_eq!(pool.get(id).unwrap().gender, Gender::F);
        }
        for d in 0..3 {
            let vals: Vec<f64> = p.chosen_ids.iter().map(|id| pool.get(id).unwrap().xvec[d]).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(p.xvec[d] >= lo - 1e-12 && p.xvec[d] <= hi + 1e-12);
        }
        let n_small = n.div_ceil(2);
        let ids = |v: &[f64]| -> Vec<String> {
            candidate_set(&pool, v, target, n_small, Distance::Cosine).unwrap().iter().map(|e| e.speaker_id.clone()).collect()
        };
        let scaled: Vec<f64> = src.iter().map(|x| x * scale).collect();
        let mut a = ids(&src);
        let mut b = ids(&scaled);
        a.sort();
        b.sort();
        // exact ties can reorder under rounding; only compare tie-free rankings
        let dists: Vec<f64> = pool.entries().iter().filter(|e| e.gender == target)
            .map(|e| f0synth::anonymize::cosine_distance(&src, &e.xvec)).collect();
        let tie_free = dists.iter().enumerate().all(|(i, x)| dists.iter().skip(i + 1).all(|y| (x - y).abs() > 1e-9));
        if tie_free {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn scheduler_lr_never_increases_and_stop_absorbs(metrics in prop::collection::vec(0.0f64..1.0, 1..60)) {
        let mut s = SchedulerState::new(0.01, 0.2, 5, 10);
        let mut lr = s.current_lr;
        let mut stopped = false;
        for m in metrics {
            let a = s.update(m);
            prop_assert!(s.current_lr <= lr);
            lr = s.current_lr;
            if stopped {
                prop_assert_eq!(a, SchedulerAction::Stop);
            }
            stopped |= a == SchedulerAction::Stop;
        }
    }
}
