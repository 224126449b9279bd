use lrpulse::optimizer::{objective, optimize_an, params_from_free, ObjectiveWeights};
use lrpulse::AnsatzParams;

fn zeroed_start() -> AnsatzParams {
    let t1 = AnsatzParams::table1();
    params_from_free(&t1, &[t1.sines[2], 0.0, 0.0, 0.0, 0.0, 0.0])
}

#[test]
fn recovers_good_pulse_from_zeroed_tail() {
    let start = zeroed_start();
    let w = ObjectiveWeights::default();
    let before = objective(&start, &w).unwrap();
    let out = optimize_an(&start, &w, 2000, 11).unwrap();
    println!(
        "start {before:?}\nend   {:?}\nevals {} exhausted {}",
        out.value, out.evaluations, out.budget_exhausted
    );
    println!("sines {:?}", out.params.sines);
    assert!(out.value.band_infid <= 0.01, "{:?}", out.value);
    assert!(out.value.leak <= 0.15, "{:?}", out.value);
    assert!(out.value.scalar <= before.scalar);
}

#[test]
fn table1_sits_within_objective_thresholds() {
    let v = objective(&AnsatzParams::table1(), &ObjectiveWeights::default()).unwrap();
    assert!(
        v.band_infid <= 0.005 && v.leak <= 0.08 && v.qs <= 0.02,
        "{v:?}"
    );
}
