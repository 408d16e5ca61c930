//! Mix-review schedule against exact integer arithmetic.

use csforge::lm::{mix_review_batches, mix_review_fraction, MixReviewSchedule};

/// `ceil(size * 9^n / 10^n)` without floating point.
fn exact_count(n: u32, size: u128) -> u128 {
    let (num, den) = (9u128.pow(n) * size, 10u128.pow(n));
    num.div_ceil(den)
}

#[test]
fn counts_match_integer_ceiling() {
    let s = MixReviewSchedule::new(0.9, 1000, 64).unwrap();
    for n in 0..=20u32 {
        let want = 9f64.powi(n as i32) / 10f64.powi(n as i32);
        let got = mix_review_fraction(&s, n);
        assert!((got - want).abs() <= 4.0 * f64::EPSILON * want, "n={n}: {got} vs {want}");
        assert_eq!(s.pretrain_count(n) as u128, exact_count(n, 1000), "n={n}");
        let b = mix_review_batches(&s, n, 3).unwrap();
        assert_eq!(b.pretrain.len() as u128, exact_count(n, 1000));
        assert_eq!(b.finetune, (0..64).collect::<Vec<_>>());
    }
}

#[test]
fn other_sizes_and_decays() {
    for size in [1u128, 7, 333, 1000, 4096, 100_000] {
        let s = MixReviewSchedule::new(0.9, size as usize, 1).unwrap();
        for n in 0..=30u32 {
            assert_eq!(s.pretrain_count(n) as u128, exact_count(n, size), "size={size} n={n}");
        }
    }
    let flat = MixReviewSchedule::new(1.0, 50, 5).unwrap();
    assert!((0..10).all(|n| flat.pretrain_count(n) == 50));
}
