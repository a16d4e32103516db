use stable_sketch::calibration::build_bias_table;
use stable_sketch::simlab::run_timing_benchmark;

fn main() {
    let table = build_bias_table(&[1.5], &[10, 50, 100, 400], 100_000, 5).unwrap();
    for pass in 0..2 {
        let records = run_timing_benchmark(&[1.5], &[10, 50, 100, 400], 300_000, 11 + pass, &table).unwrap();
        for r in records.iter().filter(|r| r.metric == "gm_time_ratio") {
            print!("k={} {}:{:.2}  ", r.k, r.estimator, r.value);
        }
        println!();
    }
}
