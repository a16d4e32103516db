//! Optimal quantile calibration: the variance-minimizing quantile q*(alpha),
//! the constants W^alpha(q*), and the Monte-Carlo bias table B_(alpha, k)
//! that unbiases the optimal quantile estimator at finite k.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::select::interpolated_quantile;
use crate::stable::{abs_quantile_w, check_alpha, sample_standard_unchecked, stable_pdf};
use rayon::prelude::*;
use std::sync::OnceLock;

/// Default calibration grid in alpha: 0.05, 0.10, ..., 2.00.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=40).map(|i| i as f64 * 0.05).collect()
}

/// Default calibration grid in k.
pub const DEFAULT_K_GRID: [u32; 12] = [5, 10, 15, 20, 30, 50, 75, 100, 150, 200, 300, 400];

/// Beyond the largest calibrated k the correction is treated as exactly 1.
const BIAS_UNITY_BEYOND_K: u32 = 400;

/// Asymptotic variance factor of the quantile estimator: the limit of
/// k Var(d_hat) / d^2, i.e.
///
/// ```text
/// (q - q^2) alpha^2 / 4
/// ---------------------    with W = abs_quantile_w(q, alpha).
///  f_X(W; alpha, 1)^2 W^2
/// ```
///
/// At alpha = 1 this reduces to the closed form (q - q^2) pi^2 / sin^2(pi q).
pub fn variance_factor(q: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile level q must be in (0, 1), got {q}")));
    }
    let w = abs_quantile_w(q, alpha)?;
    let f = stable_pdf(w, alpha)?;
    Ok((q - q * q) * alpha * alpha / 4.0 / (f * f * w * w))
}

/// The alpha -> 0+ limit of the variance factor: (1 - q) / (q ln^2 q),
/// from the exponential limit law of |S(alpha, 1)|^alpha.
pub fn variance_factor_zero_limit(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile level q must be in (0, 1), got {q}")));
    }
    let ln_q = q.ln();
    Ok((1.0 - q) / (q * ln_q * ln_q))
}

/// q*(0+): the root of -ln q + 2q - 2 = 0, about 0.2032.
pub fn q_star_zero_limit() -> f64 {
    let mut q = 0.2_f64;
    for _ in 0..64 {
        let f = -q.ln() + 2.0 * q - 2.0;
        let df = -1.0 / q + 2.0;
        let next = q - f / df;
        if (next - q).abs() < 1e-15 {
            return next;
        }
        q = next;
    }
    q
}

/// The variance-minimizing quantile level for a given alpha.
///
/// alpha = 1 short-circuits to the analytic optimum 1/2; elsewhere a coarse
/// scan brackets the minimum (guarding the graphical unimodality assumption)
/// and golden-section refines it.
pub fn solve_q_star(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha == 1.0 {
        return Ok(0.5);
    }
    solve_q_star_numeric(alpha)
}

/// Same minimization without the alpha = 1 analytic shortcut.
pub fn solve_q_star_numeric(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let (lo, hi) = (0.05, 0.95);
    let scan_points = 50;
    let mut best = (f64::INFINITY, 0.5);
    for i in 0..=scan_points {
        let q = lo + (hi - lo) * i as f64 / scan_points as f64;
        let v = variance_factor(q, alpha)?;
        if v < best.0 {
            best = (v, q);
        }
    }
    let step = (hi - lo) / scan_points as f64;
    let mut a = (best.1 - step).max(lo);
    let mut b = (best.1 + step).min(hi);
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = variance_factor(c, alpha)?;
    let mut fd = variance_factor(d, alpha)?;
    while (b - a).abs() > 1e-7 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = variance_factor(c, alpha)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = variance_factor(d, alpha)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// One bias cell: B_(alpha, k) with its Monte-Carlo standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasCell {
    pub b: f64,
    pub stderr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationMeta {
    pub seed: u64,
    pub replicates: u64,
    /// Unix seconds of the build; not persisted in the CSV interchange form.
    pub built_unix: Option<u64>,
}

/// Grid of q*(alpha), W^alpha(q*), and bias factors B_(alpha, k).
#[derive(Clone, Debug)]
pub struct CalibrationTable {
    alpha_grid: Vec<f64>,
    q_star: Vec<f64>,
    w_alpha: Vec<f64>,
    k_grid: Vec<u32>,
    cells: Vec<BiasCell>, // row-major [alpha][k]
    meta: CalibrationMeta,
}

/// Replicate counts below this would push cell standard errors past 0.5%.
const MIN_REPLICATES: u64 = 100_000;

/// Fixed number of replicate blocks per cell; results are identical for any
/// thread count because each block owns stream id `cell * BLOCKS + block`.
const BLOCKS_PER_CELL: u64 = 64;

/// Builds the bias table B_(alpha, k) = E(d_oq at d = 1) by Monte Carlo.
///
/// Each (alpha, k) cell simulates `replicates` estimates with the optimal
/// quantile estimator and records the mean and its standard error. Cells are
/// embarrassingly parallel; the result is bitwise reproducible for a given
/// seed.
pub fn build_bias_table(
    alpha_grid: &[f64],
    k_grid: &[u32],
    replicates: u64,
    seed: u64,
) -> Result<CalibrationTable> {
    if alpha_grid.is_empty() || k_grid.is_empty() {
        return Err(Error::Empty("calibration grids must be non-empty".into()));
    }
    if replicates < MIN_REPLICATES {
        return Err(Error::Domain(format!(
            "refusing to calibrate with {replicates} replicates (< {MIN_REPLICATES}); \
             cell standard errors would exceed 0.5%"
        )));
    }
    let mut k_sorted = k_grid.to_vec();
    k_sorted.sort_unstable();
    k_sorted.dedup();
    if k_sorted.iter().any(|&k| k == 0) {
        return Err(Error::Domain("k grid entries must be >= 1".into()));
    }
    let mut alphas = alpha_grid.to_vec();
    alphas.sort_unstable_by(f64::total_cmp);
    alphas.dedup();
    for &a in &alphas {
        check_alpha(a)?;
    }

    let mut q_star = Vec::with_capacity(alphas.len());
    let mut w_alpha = Vec::with_capacity(alphas.len());
    let mut w_plain = Vec::with_capacity(alphas.len());
    for &a in &alphas {
        let q = solve_q_star(a)?;
        let w = abs_quantile_w(q, a)?;
        q_star.push(q);
        w_alpha.push(w.powf(a));
        w_plain.push(w);
    }

    let cell_jobs: Vec<(usize, usize)> = (0..alphas.len())
        .flat_map(|i| (0..k_sorted.len()).map(move |j| (i, j)))
        .collect();
    let cells: Vec<BiasCell> = cell_jobs
        .par_iter()
        .map(|&(i, j)| {
            simulate_bias_cell(
                alphas[i],
                q_star[i],
                w_plain[i],
                k_sorted[j] as usize,
                replicates,
                seed,
                ((i * k_sorted.len() + j) as u64) * BLOCKS_PER_CELL,
            )
        })
        .collect();

    let table = CalibrationTable {
        alpha_grid: alphas,
        q_star,
        w_alpha,
        k_grid: k_sorted,
        cells,
        meta: CalibrationMeta {
            seed,
            replicates,
            built_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .ok()
                .map(|d| d.as_secs()),
        },
    };
    table.check_k_monotonicity()?;
    Ok(table)
}

fn simulate_bias_cell(
    alpha: f64,
    q: f64,
    w: f64,
    k: usize,
    replicates: u64,
    seed: u64,
    stream_base: u64,
) -> BiasCell {
    let block_results: Vec<(f64, f64)> = (0..BLOCKS_PER_CELL)
        .into_par_iter()
        .map(|block| {
            let lo = replicates * block / BLOCKS_PER_CELL;
            let hi = replicates * (block + 1) / BLOCKS_PER_CELL;
            let mut rng = RngStream::new(seed, stream_base + block).rng();
            let mut buf = vec![0.0f64; k];
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in lo..hi {
                for v in buf.iter_mut() {
                    *v = sample_standard_unchecked(alpha, &mut rng).abs();
                }
                let d_hat = (interpolated_quantile(&mut buf, q) / w).powf(alpha);
                sum += d_hat;
                sum_sq += d_hat * d_hat;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = block_results
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let n = replicates as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    BiasCell { b: mean, stderr: (var / n).sqrt() }
}

impl CalibrationTable {
    /// The table shipped with the crate (alpha 0.05..2.00 step 0.05, the
    /// default k grid, 2e5 replicates per cell). Rebuild with the
    /// `calibrate` subcommand for tighter standard errors.
    pub fn builtin() -> &'static CalibrationTable {
        static TABLE: OnceLock<CalibrationTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            CalibrationTable::from_csv(
                include_str!("../data/default_calibration.csv"),
                include_str!("../data/default_qstar.csv"),
            )
            .expect("embedded calibration data is well-formed")
        })
    }

    pub fn alpha_grid(&self) -> &[f64] {
        &self.alpha_grid
    }

    pub fn k_grid(&self) -> &[u32] {
        &self.k_grid
    }

    pub fn meta(&self) -> CalibrationMeta {
        self.meta
    }

    fn alpha_bracket(&self, alpha: f64) -> Result<(usize, usize, f64)> {
        let grid = &self.alpha_grid;
        let lo = grid[0];
        let hi = grid[grid.len() - 1];
        if alpha < lo - 1e-12 || alpha > hi + 1e-12 {
            return Err(Error::CalibrationMiss(format!(
                "alpha {alpha} outside calibrated range [{lo}, {hi}]"
            )));
        }
        let mut idx = grid.partition_point(|&a| a < alpha);
        if idx == grid.len() {
            idx -= 1;
        }
        if (grid[idx] - alpha).abs() < 1e-9 {
            return Ok((idx, idx, 0.0));
        }
        if idx == 0 {
            return Ok((0, 0, 0.0));
        }
        let (i0, i1) = (idx - 1, idx);
        let t = (alpha - grid[i0]) / (grid[i1] - grid[i0]);
        Ok((i0, i1, t))
    }

    /// q*(alpha), linearly interpolated between grid nodes.
    pub fn q_star(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        let (i0, i1, t) = self.alpha_bracket(alpha)?;
        Ok(self.q_star[i0] * (1.0 - t) + self.q_star[i1] * t)
    }

    /// W^alpha(q*) at a grid node (interpolated off-grid).
    pub fn w_alpha(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        let (i0, i1, t) = self.alpha_bracket(alpha)?;
        Ok(self.w_alpha[i0] * (1.0 - t) + self.w_alpha[i1] * t)
    }

    /// Bias factor B_(alpha, k).
    ///
    /// With `interpolate` the factor is bilinear in (alpha, 1/k), B = 1
    /// beyond the largest calibrated k, and a calibration miss outside the
    /// covered rectangle. Without it, only exact grid cells are served.
    pub fn bias(&self, alpha: f64, k: usize, interpolate: bool) -> Result<f64> {
        check_alpha(alpha)?;
        if k == 0 {
            return Err(Error::Domain("k must be >= 1".into()));
        }
        let nk = self.k_grid.len();
        let exact_alpha = self
            .alpha_grid
            .iter()
            .position(|&a| (a - alpha).abs() < 1e-9);
        let exact_k = self.k_grid.iter().position(|&g| g as usize == k);
        if let (Some(i), Some(j)) = (exact_alpha, exact_k) {
            return Ok(self.cells[i * nk + j].b);
        }
        if !interpolate {
            return Err(Error::CalibrationMiss(format!(
                "no exact calibration cell for (alpha = {alpha}, k = {k}) and interpolation is disabled"
            )));
        }
        if k as u32 > BIAS_UNITY_BEYOND_K {
            return Ok(1.0);
        }
        let k_min = self.k_grid[0] as usize;
        let k_max = self.k_grid[nk - 1] as usize;
        if k < k_min {
            return Err(Error::CalibrationMiss(format!(
                "k = {k} below calibrated minimum {k_min}"
            )));
        }
        let (i0, i1, t) = self.alpha_bracket(alpha)?;
        let (j0, j1, u) = if let Some(j) = exact_k {
            (j, j, 0.0)
        } else if k > k_max {
            // Between the largest grid k and BIAS_UNITY_BEYOND_K.
            let inv0 = 1.0 / k_max as f64;
            let u = (inv0 - 1.0 / k as f64) / inv0;
            let b0 = self.cells[i0 * nk + (nk - 1)].b * (1.0 - t) + self.cells[i1 * nk + (nk - 1)].b * t;
            return Ok(b0 * (1.0 - u) + u);
        } else {
            let j1 = self.k_grid.partition_point(|&g| (g as usize) < k);
            let j0 = j1 - 1;
            let inv0 = 1.0 / self.k_grid[j0] as f64;
            let inv1 = 1.0 / self.k_grid[j1] as f64;
            (j0, j1, (1.0 / k as f64 - inv0) / (inv1 - inv0))
        };
        let b00 = self.cells[i0 * nk + j0].b;
        let b01 = self.cells[i0 * nk + j1].b;
        let b10 = self.cells[i1 * nk + j0].b;
        let b11 = self.cells[i1 * nk + j1].b;
        let b0 = b00 * (1.0 - u) + b01 * u;
        let b1 = b10 * (1.0 - u) + b11 * u;
        Ok(b0 * (1.0 - t) + b1 * t)
    }

    /// Standard error of an exact grid cell.
    pub fn bias_stderr(&self, alpha: f64, k: usize) -> Result<f64> {
        let i = self
            .alpha_grid
            .iter()
            .position(|&a| (a - alpha).abs() < 1e-9)
            .ok_or_else(|| Error::CalibrationMiss(format!("alpha {alpha} not a grid node")))?;
        let j = self
            .k_grid
            .iter()
            .position(|&g| g as usize == k)
            .ok_or_else(|| Error::CalibrationMiss(format!("k {k} not a grid node")))?;
        Ok(self.cells[i * self.k_grid.len() + j].stderr)
    }

    /// B must not increase with k beyond Monte-Carlo noise (3 sigma).
    fn check_k_monotonicity(&self) -> Result<()> {
        let nk = self.k_grid.len();
        for i in 0..self.alpha_grid.len() {
            for j in 1..nk {
                let prev = &self.cells[i * nk + j - 1];
                let cur = &self.cells[i * nk + j];
                if cur.b > prev.b + 3.0 * (prev.stderr + cur.stderr) {
                    return Err(Error::Degenerate(format!(
                        "bias table not decreasing in k at alpha = {}: B({}) = {} vs B({}) = {}",
                        self.alpha_grid[i],
                        self.k_grid[j - 1],
                        prev.b,
                        self.k_grid[j],
                        cur.b
                    )));
                }
            }
        }
        Ok(())
    }

    /// Bias cells as CSV (`alpha,k,B,stderr,replicates,seed`); floats use
    /// the shortest representation that round-trips exactly.
    pub fn bias_csv(&self) -> String {
        let mut out = String::from("alpha,k,B,stderr,replicates,seed\n");
        let nk = self.k_grid.len();
        for (i, &a) in self.alpha_grid.iter().enumerate() {
            for (j, &k) in self.k_grid.iter().enumerate() {
                let cell = &self.cells[i * nk + j];
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    a, k, cell.b, cell.stderr, self.meta.replicates, self.meta.seed
                ));
            }
        }
        out
    }

    /// q*/W^alpha rows as CSV (`alpha,q_star,W_alpha`).
    pub fn q_star_csv(&self) -> String {
        let mut out = String::from("alpha,q_star,W_alpha\n");
        for (i, &a) in self.alpha_grid.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", a, self.q_star[i], self.w_alpha[i]));
        }
        out
    }

    /// Parses the two CSV files produced by [`Self::bias_csv`] and
    /// [`Self::q_star_csv`].
    pub fn from_csv(bias_csv: &str, q_star_csv: &str) -> Result<Self> {
        fn split_header(text: &str, expect: &str) -> Result<Vec<String>> {
            let mut lines = text.lines();
            match lines.next() {
                Some(h) if h.trim() == expect => {}
                other => {
                    return Err(Error::Format(format!(
                        "expected header `{expect}`, got {other:?}"
                    )))
                }
            }
            Ok(lines
                .filter(|l| !l.trim().is_empty())
                .map(str::to_owned)
                .collect())
        }
        fn field<T: std::str::FromStr>(raw: &str, what: &str) -> Result<T> {
            raw.trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad {what}: `{raw}`")))
        }

        let mut alpha_grid: Vec<f64> = Vec::new();
        let mut q_star = Vec::new();
        let mut w_alpha = Vec::new();
        for line in split_header(q_star_csv, "alpha,q_star,W_alpha")? {
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::Format(format!("bad q* row `{line}`")));
            }
            alpha_grid.push(field(parts[0], "alpha")?);
            q_star.push(field(parts[1], "q_star")?);
            w_alpha.push(field(parts[2], "W_alpha")?);
        }
        if alpha_grid.is_empty() {
            return Err(Error::Format("q* table has no rows".into()));
        }

        let mut rows: Vec<(f64, u32, BiasCell)> = Vec::new();
        let mut meta = CalibrationMeta { seed: 0, replicates: 0, built_unix: None };
        for line in split_header(bias_csv, "alpha,k,B,stderr,replicates,seed")? {
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 6 {
                return Err(Error::Format(format!("bad bias row `{line}`")));
            }
            let alpha: f64 = field(parts[0], "alpha")?;
            let k: u32 = field(parts[1], "k")?;
            let b: f64 = field(parts[2], "B")?;
            let stderr: f64 = field(parts[3], "stderr")?;
            meta.replicates = field(parts[4], "replicates")?;
            meta.seed = field(parts[5], "seed")?;
            rows.push((alpha, k, BiasCell { b, stderr }));
        }
        let mut k_grid: Vec<u32> = rows.iter().map(|r| r.1).collect();
        k_grid.sort_unstable();
        k_grid.dedup();
        if rows.len() != alpha_grid.len() * k_grid.len() {
            return Err(Error::Format(format!(
                "bias table is not a complete grid: {} rows for {} alphas x {} ks",
                rows.len(),
                alpha_grid.len(),
                k_grid.len()
            )));
        }
        let nk = k_grid.len();
        let mut cells = vec![BiasCell { b: f64::NAN, stderr: f64::NAN }; rows.len()];
        for (alpha, k, cell) in rows {
            let i = alpha_grid
                .iter()
                .position(|&a| (a - alpha).abs() < 1e-12)
                .ok_or_else(|| Error::Format(format!("bias alpha {alpha} missing from q* table")))?;
            let j = k_grid.iter().position(|&g| g == k).unwrap();
            cells[i * nk + j] = cell;
        }
        Ok(Self { alpha_grid, q_star, w_alpha, k_grid, cells, meta })
    }

    pub fn write_files(&self, bias_path: &std::path::Path, q_star_path: &std::path::Path) -> Result<()> {
        std::fs::write(bias_path, self.bias_csv())?;
        std::fs::write(q_star_path, self.q_star_csv())?;
        Ok(())
    }
}
