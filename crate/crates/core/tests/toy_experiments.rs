//! Shape checks on the toy curriculum runs.

use csforge::tcs::curriculum::{is_upward_trend, parallel_data_sweep};
use csforge::tcs::run_curriculum;
use csforge::toy::{toy_from_scratch, toy_model, toy_registry, ToySizes};

#[test]
fn scratch_stage_learns_something() {
    let reg = toy_registry(&ToySizes::default(), 0);
    let r = run_curriculum(&toy_from_scratch(toy_model(), 80), &reg, 0).unwrap();
    let bleu = r.test_bleu.unwrap();
    assert!(bleu > 0.0, "test BLEU {bleu}");
    assert_eq!(r.stages.len(), 1);
}

#[test]
fn parallel_sweep_reports_one_point_per_size() {
    let reg = toy_registry(&ToySizes::default(), 1);
    let counts = [4, 12, 24];
    let points = parallel_data_sweep(&toy_from_scratch(toy_model(), 40), &reg, "real_train", &counts, 1).unwrap();
    assert_eq!(points.iter().map(|p| p.pairs).collect::<Vec<_>>(), counts);
    assert!(points.iter().all(|p| (0.0..=100.0).contains(&p.bleu)));
    println!("sweep: {points:?} upward={}", is_upward_trend(&points));
}
