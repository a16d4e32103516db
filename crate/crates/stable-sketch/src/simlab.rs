//! Desk-scale reproduction of the estimator simulation studies: MSE grids,
//! right-tail probability curves, and per-estimate timing ratios, emitted as
//! CSV records with a JSON manifest.
//!
//! Every cell simulates S(alpha, 1) samples and estimates d = 1, so the only
//! randomness is the generator itself. Replicate blocks draw from streams
//! keyed by the cell and block index, which makes the records identical for
//! any thread count or scheduling.

use crate::calibration::CalibrationTable;
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, EstimatorSpec};
use crate::rng::RngStream;
use crate::stable::sample_standard_unchecked;
use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

/// Grid specification for one experiment run.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentPlan {
    pub alphas: Vec<f64>,
    pub ks: Vec<u32>,
    /// Relative deviations for tail runs; ignored by the MSE experiment.
    pub epsilons: Vec<f64>,
    pub replicates: u64,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
}

impl ExperimentPlan {
    fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.ks.is_empty() || self.estimators.is_empty() {
            return Err(Error::Domain("plan needs at least one alpha, k, and estimator".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Domain("plan needs replicates >= 1".into()));
        }
        for &a in &self.alphas {
            crate::stable::check_alpha(a)?;
        }
        if self.ks.iter().any(|&k| k == 0) {
            return Err(Error::Domain("k grid entries must be >= 1".into()));
        }
        Ok(())
    }
}

/// One output cell; `stderr` is NaN when a single replicate makes it
/// undefined (the cell is then unreliable but still emitted).
#[derive(Clone, Debug, Serialize)]
pub struct MetricRecord {
    pub alpha: f64,
    pub k: u32,
    pub estimator: EstimatorKind,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
}

/// CSV header shared by all experiment outputs.
pub const RECORD_CSV_HEADER: &str = "alpha,k,estimator,metric,value,stderr";

/// Serializes records with the fixed `alpha,k,estimator,metric,value,stderr`
/// header. Floats use the shortest round-trip representation, so identical
/// plans and seeds produce identical bytes.
pub fn records_to_csv(records: &[MetricRecord]) -> String {
    let mut out = String::from(RECORD_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.alpha, r.k, r.estimator, r.metric, r.value, r.stderr
        ));
    }
    out
}

/// JSON manifest recording the plan, seed, and build info for one run.
pub fn manifest_json(experiment: &str, plan: &ExperimentPlan) -> String {
    #[derive(Serialize)]
    struct Build {
        name: &'static str,
        version: &'static str,
    }
    #[derive(Serialize)]
    struct Manifest<'a> {
        experiment: &'a str,
        plan: &'a ExperimentPlan,
        seed: u64,
        build: Build,
        created_unix: Option<u64>,
    }
    serde_json::to_string_pretty(&Manifest {
        experiment,
        plan,
        seed: plan.seed,
        build: Build { name: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION") },
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs()),
    })
    .expect("manifest serialization cannot fail")
}

const BLOCKS: u64 = 64;

/// Per-replicate accumulation shared by the MSE and tail experiments.
///
/// `accumulate` folds each replicate's estimate into a block-local state;
/// block states are then combined in block order (scheduling-independent).
fn run_cells<S, FInit, FAcc, FMerge, FEmit>(
    plan: &ExperimentPlan,
    table: &CalibrationTable,
    init: FInit,
    accumulate: FAcc,
    merge: FMerge,
    emit: FEmit,
) -> Result<Vec<MetricRecord>>
where
    S: Clone + Send,
    FInit: Fn() -> S + Sync,
    FAcc: Fn(&mut S, f64) + Sync,
    FMerge: Fn(&mut S, &S) + Sync,
    FEmit: Fn(f64, u32, EstimatorKind, S, &mut Vec<MetricRecord>),
{
    plan.validate()?;
    struct Cell {
        alpha: f64,
        k: u32,
        kind: EstimatorKind,
        spec: EstimatorSpec,
        stream_base: u64,
    }
    let mut cells = Vec::new();
    let mut cell_index = 0u64;
    for &alpha in &plan.alphas {
        for &k in &plan.ks {
            for &kind in &plan.estimators {
                let spec = EstimatorSpec::new(kind, alpha, k as usize, Some(table))?;
                cells.push(Cell { alpha, k, kind, spec, stream_base: cell_index * BLOCKS });
                cell_index += 1;
            }
        }
    }

    let states: Vec<S> = cells
        .par_iter()
        .map(|cell| {
            let k = cell.k as usize;
            let block_states: Vec<S> = (0..BLOCKS)
                .into_par_iter()
                .map(|block| {
                    let lo = plan.replicates * block / BLOCKS;
                    let hi = plan.replicates * (block + 1) / BLOCKS;
                    let mut rng = RngStream::new(plan.seed, cell.stream_base + block).rng();
                    let mut buf = vec![0.0f64; k];
                    let mut state = init();
                    for _ in lo..hi {
                        for v in buf.iter_mut() {
                            *v = sample_standard_unchecked(cell.alpha, &mut rng).abs();
                        }
                        let est = cell.spec.estimate_slice(&mut buf);
                        accumulate(&mut state, est.d_hat);
                    }
                    state
                })
                .collect();
            let mut total = init();
            for s in &block_states {
                merge(&mut total, s);
            }
            total
        })
        .collect();

    let mut records = Vec::new();
    for (cell, state) in cells.iter().zip(states) {
        emit(cell.alpha, cell.k, cell.kind, state, &mut records);
    }
    Ok(records)
}

/// Mean square error grid at d = 1. Emits `k_mse` and `k_bias_sq` per cell
/// (both premultiplied by k, as the study plots them).
pub fn run_mse_experiment(
    plan: &ExperimentPlan,
    table: &CalibrationTable,
) -> Result<Vec<MetricRecord>> {
    #[derive(Clone)]
    struct Acc {
        n: u64,
        sum_d: f64,
        sum_e2: f64,
        sum_e4: f64,
    }
    run_cells(
        plan,
        table,
        || Acc { n: 0, sum_d: 0.0, sum_e2: 0.0, sum_e4: 0.0 },
        |s, d| {
            let e2 = (d - 1.0) * (d - 1.0);
            s.n += 1;
            s.sum_d += d;
            s.sum_e2 += e2;
            s.sum_e4 += e2 * e2;
        },
        |a, b| {
            a.n += b.n;
            a.sum_d += b.sum_d;
            a.sum_e2 += b.sum_e2;
            a.sum_e4 += b.sum_e4;
        },
        |alpha, k, kind, s, out| {
            let n = s.n as f64;
            let kf = k as f64;
            let mse = s.sum_e2 / n;
            let mse_se = if s.n > 1 {
                ((s.sum_e4 / n - mse * mse).max(0.0) / n).sqrt()
            } else {
                f64::NAN
            };
            let bias = s.sum_d / n - 1.0;
            let mean_se = if s.n > 1 {
                // Var(d) = E e^2 - bias^2.
                (((s.sum_e2 / n) - bias * bias).max(0.0) / n).sqrt()
            } else {
                f64::NAN
            };
            out.push(MetricRecord {
                alpha,
                k,
                estimator: kind,
                metric: "k_mse".into(),
                value: kf * mse,
                stderr: kf * mse_se,
            });
            out.push(MetricRecord {
                alpha,
                k,
                estimator: kind,
                metric: "k_bias_sq".into(),
                value: kf * bias * bias,
                stderr: kf * 2.0 * bias.abs() * mean_se,
            });
        },
    )
}

/// Right-tail frequencies Pr(d_hat >= (1 + eps) d) per epsilon, with the
/// exponential bound value attached for the oq/median cells.
pub fn run_tail_experiment(
    plan: &ExperimentPlan,
    table: &CalibrationTable,
) -> Result<Vec<MetricRecord>> {
    if plan.epsilons.is_empty() {
        return Err(Error::Domain("tail experiment needs at least one epsilon".into()));
    }
    let epsilons = plan.epsilons.clone();
    let eps_for_acc = epsilons.clone();
    let n_eps = epsilons.len();
    let records = run_cells(
        plan,
        table,
        move || vec![0u64; n_eps + 1],
        move |counts, d| {
            counts[0] += 1;
            for (slot, &eps) in counts[1..].iter_mut().zip(eps_for_acc.iter()) {
                if d >= 1.0 + eps {
                    *slot += 1;
                }
            }
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += *y;
            }
        },
        |alpha, k, kind, counts, out| {
            let n = counts[0] as f64;
            for (&hits, &eps) in counts[1..].iter().zip(epsilons.iter()) {
                let p = hits as f64 / n;
                let se = if counts[0] > 1 { (p * (1.0 - p) / n).sqrt() } else { f64::NAN };
                out.push(MetricRecord {
                    alpha,
                    k,
                    estimator: kind,
                    metric: format!("tail_freq[eps={eps}]"),
                    value: p,
                    stderr: se,
                });
            }
        },
    )?;

    // Attach Lemma-style bound values for the quantile estimators the bound
    // is proven for.
    let mut with_bounds = records;
    for &alpha in &plan.alphas {
        for &k in &plan.ks {
            for &kind in &plan.estimators {
                let q = match kind {
                    EstimatorKind::Oq => table.q_star(alpha)?,
                    EstimatorKind::Median => 0.5,
                    _ => continue,
                };
                for &eps in &plan.epsilons {
                    if eps <= 0.0 {
                        continue;
                    }
                    let g_r = crate::bounds::tail_constant_right(q, alpha, eps)?;
                    let bound = (-(k as f64) * eps * eps / g_r).exp();
                    with_bounds.push(MetricRecord {
                        alpha,
                        k,
                        estimator: kind,
                        metric: format!("tail_bound[eps={eps}]"),
                        value: bound,
                        stderr: 0.0,
                    });
                }
            }
        }
    }
    Ok(with_bounds)
}

/// Minimum estimates per timing cell; fewer would leave the per-call
/// overhead visible in the ratios.
pub const MIN_TIMING_BATCH: u64 = 100_000;

/// Wall-clock cost per estimate and the cost ratios against the geometric
/// mean estimator (`gm_time_ratio` on the oqc and fp rows).
///
/// Runs single-threaded on purpose; warms up once and reports the median of
/// five timed passes per cell. Timing rows are inherently not reproducible
/// byte-for-byte, unlike the statistical experiments.
pub fn run_timing_benchmark(
    alphas: &[f64],
    ks: &[u32],
    batch: u64,
    seed: u64,
    table: &CalibrationTable,
) -> Result<Vec<MetricRecord>> {
    if batch < MIN_TIMING_BATCH {
        return Err(Error::Domain(format!(
            "timing batch {batch} too small; need >= {MIN_TIMING_BATCH} estimates per cell"
        )));
    }
    let kinds = [EstimatorKind::Gm, EstimatorKind::Fp, EstimatorKind::Oqc];
    let mut records = Vec::new();
    for &alpha in alphas {
        crate::stable::check_alpha(alpha)?;
        for &k in ks {
            let k_us = k as usize;
            // One shared pool of pristine replicate buffers per cell, kept
            // around 1 MB so timings measure compute, not memory traffic.
            let pool_rows = ((batch as usize).min(131_072 / k_us.max(1))).clamp(16, 20_000);
            let mut rng = RngStream::new(seed, (k as u64) << 32).rng();
            let mut pool = vec![0.0f64; pool_rows * k_us];
            for v in pool.iter_mut() {
                *v = sample_standard_unchecked(alpha, &mut rng).abs();
            }
            let mut scratch = vec![0.0f64; k_us];
            let mut per_kind_ns = Vec::new();
            for kind in kinds {
                let spec = EstimatorSpec::new(kind, alpha, k_us, Some(table))?;
                let mut timed = |n_est: u64| {
                    let start = Instant::now();
                    let mut sink = 0.0f64;
                    for e in 0..n_est {
                        let row = (e as usize % pool_rows) * k_us;
                        scratch.copy_from_slice(&pool[row..row + k_us]);
                        sink += spec.estimate_slice(&mut scratch).d_hat;
                    }
                    let ns = start.elapsed().as_nanos() as f64 / n_est as f64;
                    (ns, sink)
                };
                timed(batch / 10 + 1); // warm-up
                let mut runs: Vec<f64> = (0..5).map(|_| timed(batch / 5 + 1).0).collect();
                runs.sort_unstable_by(f64::total_cmp);
                let median = runs[2];
                per_kind_ns.push((kind, median));
                records.push(MetricRecord {
                    alpha,
                    k,
                    estimator: kind,
                    metric: "ns_per_estimate".into(),
                    value: median,
                    stderr: f64::NAN,
                });
            }
            let gm_ns = per_kind_ns
                .iter()
                .find(|(kind, _)| *kind == EstimatorKind::Gm)
                .map(|(_, ns)| *ns)
                .expect("gm is always timed");
            for (kind, ns) in &per_kind_ns {
                if *kind != EstimatorKind::Gm {
                    records.push(MetricRecord {
                        alpha,
                        k,
                        estimator: *kind,
                        metric: "gm_time_ratio".into(),
                        value: gm_ns / ns,
                        stderr: f64::NAN,
                    });
                }
            }
        }
    }
    Ok(records)
}
