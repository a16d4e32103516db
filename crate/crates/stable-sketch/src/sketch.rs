//! Stable random projection sketches.
//!
//! A sketch stores B = A x R (n x k) where R has i.i.d. S(alpha, 1) entries.
//! R itself is never materialized: entry r_(d, j) is regenerated on demand
//! from the counter-based stream `(seed, column j)` at draw counter `d`.
//! That keeps memory at O(nk) for any dimension D and makes incremental
//! updates exact — adding `delta` at coordinate d reproduces, up to float
//! rounding, the sketch of the updated data.
//!
//! Projected row differences are stable samples whose scale parameter is
//! the l_alpha distance between the original rows, which is what
//! [`Sketch::estimate_distance`] feeds to the estimators.

use crate::error::{Error, Result};
use crate::estimators::{DistanceEstimate, EstimatorSpec};
use crate::rng::RngStream;
use crate::select::SampleBuffer;
use crate::stable::{check_alpha, sample_standard_unchecked};
use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;

/// One input vector: dense values or sorted (index, value) pairs.
#[derive(Clone, Debug, PartialEq)]
pub enum RowData {
    Dense(Vec<f64>),
    Sparse(Vec<(usize, f64)>),
}

/// An n x D data matrix with a fixed dimension D per matrix.
#[derive(Clone, Debug)]
pub struct DataMatrix {
    dim: usize,
    rows: Vec<RowData>,
}

impl DataMatrix {
    /// Dense rows; every row must have the same length and finite entries.
    pub fn from_dense(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Format(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Format(format!("row {i} contains non-finite value {bad}")));
            }
        }
        Ok(Self { dim, rows: rows.into_iter().map(RowData::Dense).collect() })
    }

    /// Sparse rows with strictly increasing indices below `dim`.
    pub fn from_sparse(dim: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            let mut prev: Option<usize> = None;
            for &(idx, v) in row {
                if idx >= dim {
                    return Err(Error::Index(format!(
                        "row {i}: index {idx} out of range for dimension {dim}"
                    )));
                }
                if prev.is_some_and(|p| p >= idx) {
                    return Err(Error::Format(format!(
                        "row {i}: sparse indices must be strictly increasing"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::Format(format!("row {i} contains non-finite value {v}")));
                }
                prev = Some(idx);
            }
        }
        Ok(Self { dim, rows: rows.into_iter().map(RowData::Sparse).collect() })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[RowData] {
        &self.rows
    }
}

/// n x k matrix of projected values plus the provenance needed to
/// regenerate projection columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Sketch {
    n: usize,
    k: usize,
    alpha: f64,
    seed: u64,
    /// Projection dimension, when known. A sketch loaded from disk has no
    /// recorded dimension (the file format does not carry it) and then
    /// accepts updates at any coordinate.
    dim: Option<usize>,
    values: Vec<f64>, // row-major n x k
}

/// Stable projection entry r_(d, j) for column stream `(seed, j)`.
#[inline]
fn projection_entry(rng: &mut rand_chacha::ChaCha8Rng, alpha: f64) -> f64 {
    sample_standard_unchecked(alpha, rng)
}

/// Builds the sketch of `data` with `k` projections of stable index `alpha`.
///
/// Work is parallelized over columns; output is bitwise independent of the
/// scheduling because every column regenerates its own stream.
pub fn build_sketch(data: &DataMatrix, alpha: f64, k: usize, seed: u64) -> Result<Sketch> {
    check_alpha(alpha)?;
    if k == 0 {
        return Err(Error::Domain("sketch requires k >= 1 projections".into()));
    }
    let n = data.n();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k);
    (0..k)
        .into_par_iter()
        .map(|j| {
            let mut rng = RngStream::new(seed, j as u64).rng();
            let mut col = vec![0.0f64; n];
            let mut dense_r: Vec<f64> = Vec::new();
            let any_dense = data.rows.iter().any(|r| matches!(r, RowData::Dense(_)));
            if any_dense {
                // One sequential pass over the column stream, shared by all
                // dense rows.
                dense_r = Vec::with_capacity(data.dim);
                for _ in 0..data.dim {
                    dense_r.push(projection_entry(&mut rng, alpha));
                }
            }
            for (i, row) in data.rows.iter().enumerate() {
                col[i] = match row {
                    RowData::Dense(u) => u.iter().zip(dense_r.iter()).map(|(a, r)| a * r).sum(),
                    RowData::Sparse(entries) => {
                        let stream = RngStream::new(seed, j as u64);
                        let mut acc = 0.0;
                        for &(d, v) in entries {
                            let mut r = stream.rng_at_draw(d as u64);
                            acc += v * projection_entry(&mut r, alpha);
                        }
                        acc
                    }
                };
            }
            col
        })
        .collect_into_vec(&mut columns);

    let mut values = vec![0.0f64; n * k];
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            values[i * k + j] = v;
        }
    }
    Ok(Sketch { n, k, alpha, seed, dim: Some(data.dim), values })
}

impl Sketch {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn row(&self, i: usize) -> Result<&[f64]> {
        if i >= self.n {
            return Err(Error::Index(format!("row {i} out of range for n = {}", self.n)));
        }
        Ok(&self.values[i * self.k..(i + 1) * self.k])
    }

    /// Applies a turnstile-style increment: coordinate `position` of row `i`
    /// changes by `delta`. Equivalent (within float rounding) to rebuilding
    /// the sketch from the updated data.
    pub fn update_row(&mut self, i: usize, position: usize, delta: f64) -> Result<()> {
        if i >= self.n {
            return Err(Error::Index(format!("row {i} out of range for n = {}", self.n)));
        }
        if let Some(dim) = self.dim {
            if position >= dim {
                return Err(Error::Index(format!(
                    "position {position} out of range for dimension {dim}"
                )));
            }
        }
        if !delta.is_finite() {
            return Err(Error::Format(format!("update delta must be finite, got {delta}")));
        }
        for j in 0..self.k {
            let mut rng = RngStream::new(self.seed, j as u64).rng_at_draw(position as u64);
            let r = projection_entry(&mut rng, self.alpha);
            self.values[i * self.k + j] += delta * r;
        }
        Ok(())
    }

    /// Estimates the l_alpha distance d_(alpha) between rows i and j using a
    /// prebuilt estimator spec (whose alpha and k must match the sketch).
    pub fn estimate_distance(
        &self,
        i: usize,
        j: usize,
        spec: &EstimatorSpec,
    ) -> Result<DistanceEstimate> {
        let mut buffer = self.difference_buffer(i, j, spec)?;
        spec.estimate(&mut buffer)
    }

    /// Metric-form variant: d_(alpha)^(1/alpha).
    pub fn estimate_distance_root(&self, i: usize, j: usize, spec: &EstimatorSpec) -> Result<f64> {
        let mut buffer = self.difference_buffer(i, j, spec)?;
        spec.estimate_root(&mut buffer)
    }

    fn difference_buffer(&self, i: usize, j: usize, spec: &EstimatorSpec) -> Result<SampleBuffer> {
        if spec.alpha() != self.alpha {
            return Err(Error::Config(format!(
                "estimator alpha {} does not match sketch alpha {}",
                spec.alpha(),
                self.alpha
            )));
        }
        if spec.k() != self.k {
            return Err(Error::Config(format!(
                "estimator k {} does not match sketch k {}",
                spec.k(),
                self.k
            )));
        }
        let (ri, rj) = (self.row(i)?, self.row(j)?);
        SampleBuffer::from_samples(ri.iter().zip(rj.iter()).map(|(a, b)| a - b))
    }

    // --- SSKP wire format -------------------------------------------------
    //
    // Little-endian: magic "SSKP" (4), version u16 = 1, reserved u16,
    // alpha f64, n u64, k u32, reserved u32, seed u64, then n*k f64 values
    // row-major. Header is 40 bytes.

    const MAGIC: &'static [u8; 4] = b"SSKP";
    const VERSION: u16 = 1;
    pub const HEADER_BYTES: usize = 40;

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::HEADER_BYTES + self.values.len() * 8);
        out.extend_from_slice(Self::MAGIC);
        out.extend_from_slice(&Self::VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&self.alpha.to_le_bytes());
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < Self::HEADER_BYTES {
            return Err(Error::Format(format!(
                "sketch file truncated: {} bytes < {}-byte header",
                bytes.len(),
                Self::HEADER_BYTES
            )));
        }
        if &bytes[0..4] != Self::MAGIC {
            return Err(Error::Format("bad magic; not an SSKP sketch file".into()));
        }
        let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
        if version != Self::VERSION {
            return Err(Error::Format(format!(
                "unsupported sketch version {version} (expected {})",
                Self::VERSION
            )));
        }
        let alpha = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let n = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
        let k = u32::from_le_bytes(bytes[24..28].try_into().unwrap()) as usize;
        let seed = u64::from_le_bytes(bytes[32..40].try_into().unwrap());
        check_alpha(alpha).map_err(|_| Error::Format(format!("corrupt alpha field {alpha}")))?;
        let expected = n
            .checked_mul(k)
            .and_then(|c| c.checked_mul(8))
            .and_then(|c| c.checked_add(Self::HEADER_BYTES))
            .ok_or_else(|| Error::Format("sketch dimensions overflow".into()))?;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "sketch payload is {} bytes, expected {expected} for n = {n}, k = {k}",
                bytes.len()
            )));
        }
        let mut values = Vec::with_capacity(n * k);
        for chunk in bytes[Self::HEADER_BYTES..].chunks_exact(8) {
            let v = f64::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::Format(format!("non-finite sketch value {v}")));
            }
            values.push(v);
        }
        Ok(Self { n, k, alpha, seed, dim: None, values })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

/// Central-difference entropy proxy from a pair of sketches at
/// alpha = 1.05 and alpha = 0.95: `(d_(1.05) - d_(0.95)) / 0.1`
/// approximates `sum_i |z_i| ln |z_i|` of the difference vector z.
///
/// Build both sketches with the same seed. The two estimates then share
/// their underlying uniforms, and the strong correlation cancels most of
/// the estimator noise out of the difference; with independent seeds the
/// proxy is unbiased but an order of magnitude noisier.
pub fn estimate_entropy_proxy(
    sketch_hi: &Sketch,
    sketch_lo: &Sketch,
    i: usize,
    j: usize,
    spec_hi: &EstimatorSpec,
    spec_lo: &EstimatorSpec,
) -> Result<f64> {
    const ALPHA_HI: f64 = 1.05;
    const ALPHA_LO: f64 = 0.95;
    if sketch_hi.alpha != ALPHA_HI || sketch_lo.alpha != ALPHA_LO {
        return Err(Error::Config(format!(
            "entropy proxy requires sketches at alpha = {ALPHA_HI} and {ALPHA_LO}; \
             got {} and {}",
            sketch_hi.alpha, sketch_lo.alpha
        )));
    }
    let d_hi = sketch_hi.estimate_distance(i, j, spec_hi)?.d_hat;
    let d_lo = sketch_lo.estimate_distance(i, j, spec_lo)?.d_hat;
    Ok((d_hi - d_lo) / (ALPHA_HI - ALPHA_LO))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimatorKind;
    use crate::rng::RngStream;
    use rand_chacha::rand_core::RngCore;

    fn random_dense(n: usize, dim: usize, seed: u64) -> DataMatrix {
        let mut rng = RngStream::new(seed, 7777).rng();
        let rows = (0..n)
            .map(|_| (0..dim).map(|_| crate::rng::u01_open(&mut rng) * 2.0 - 1.0).collect())
            .collect();
        DataMatrix::from_dense(rows).unwrap()
    }

    #[test]
    fn zero_row_gives_zero_sketch_row() {
        let data = DataMatrix::from_dense(vec![vec![0.0; 64], vec![1.0; 64]]).unwrap();
        let s = build_sketch(&data, 1.0, 8, 42).unwrap();
        assert!(s.row(0).unwrap().iter().all(|&v| v == 0.0));
        assert!(s.row(1).unwrap().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn ingestion_rejects_bad_rows() {
        assert!(DataMatrix::from_dense(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(DataMatrix::from_dense(vec![vec![f64::NAN]]).is_err());
        assert!(DataMatrix::from_sparse(4, vec![vec![(0, 1.0), (0, 2.0)]]).is_err());
        assert!(DataMatrix::from_sparse(4, vec![vec![(5, 1.0)]]).is_err());
    }

    #[test]
    fn projection_is_linear() {
        let dim = 50;
        let (seed, alpha, k) = (9, 1.5, 16);
        let mut rng = RngStream::new(3, 0).rng();
        let u: Vec<f64> = (0..dim).map(|_| crate::rng::u01_open(&mut rng) - 0.5).collect();
        let w: Vec<f64> = (0..dim).map(|_| crate::rng::u01_open(&mut rng) - 0.5).collect();
        let sum: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a + b).collect();
        let scaled: Vec<f64> = u.iter().map(|a| 3.0 * a).collect();
        let s = build_sketch(
            &DataMatrix::from_dense(vec![u, w, sum, scaled]).unwrap(),
            alpha,
            k,
            seed,
        )
        .unwrap();
        for j in 0..k {
            let (a, b, c, d) = (
                s.row(0).unwrap()[j],
                s.row(1).unwrap()[j],
                s.row(2).unwrap()[j],
                s.row(3).unwrap()[j],
            );
            assert!((a + b - c).abs() <= 1e-12 * c.abs().max(1.0));
            assert!((3.0 * a - d).abs() <= 1e-12 * d.abs().max(1.0));
        }
    }

    #[test]
    fn difference_of_sketches_is_sketch_of_difference() {
        let dim = 40;
        let mut rng = RngStream::new(4, 0).rng();
        let u1: Vec<f64> = (0..dim).map(|_| crate::rng::u01_open(&mut rng)).collect();
        let u2: Vec<f64> = (0..dim).map(|_| crate::rng::u01_open(&mut rng)).collect();
        let diff: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a - b).collect();
        let s = build_sketch(
            &DataMatrix::from_dense(vec![u1, u2, diff]).unwrap(),
            0.8,
            12,
            100,
        )
        .unwrap();
        for j in 0..12 {
            let lhs = s.row(0).unwrap()[j] - s.row(1).unwrap()[j];
            let rhs = s.row(2).unwrap()[j];
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn sparse_and_dense_rows_project_identically() {
        let dim = 30;
        let dense = vec![0.0, 2.5, 0.0, -1.0, 0.0, 0.75]
            .into_iter()
            .chain(std::iter::repeat(0.0))
            .take(dim)
            .collect::<Vec<_>>();
        let sparse = vec![(1, 2.5), (3, -1.0), (5, 0.75)];
        let d1 = DataMatrix::from_dense(vec![dense]).unwrap();
        let mut d2rows = Vec::new();
        d2rows.push(sparse);
        let d2 = DataMatrix::from_sparse(dim, d2rows).unwrap();
        let s1 = build_sketch(&d1, 1.2, 10, 55).unwrap();
        let s2 = build_sketch(&d2, 1.2, 10, 55).unwrap();
        for j in 0..10 {
            let (a, b) = (s1.row(0).unwrap()[j], s2.row(0).unwrap()[j]);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "col {j}: {a} vs {b}");
        }
    }

    #[test]
    fn seed_determinism_is_bitwise() {
        let data = random_dense(5, 64, 1);
        let a = build_sketch(&data, 1.0, 13, 999).unwrap();
        let b = build_sketch(&data, 1.0, 13, 999).unwrap();
        assert_eq!(a.values, b.values);
        let c = build_sketch(&data, 1.0, 13, 1000).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn update_row_semantics() {
        let dim = 32;
        let mut base_rows = Vec::new();
        let mut rng = RngStream::new(6, 0).rng();
        for _ in 0..3 {
            base_rows.push((0..dim).map(|_| crate::rng::u01_open(&mut rng)).collect::<Vec<_>>());
        }
        let mut updated_rows = base_rows.clone();
        updated_rows[1][17] += 0.625;
        let mut sketch = build_sketch(&DataMatrix::from_dense(base_rows).unwrap(), 1.5, 9, 3).unwrap();
        let reference =
            build_sketch(&DataMatrix::from_dense(updated_rows).unwrap(), 1.5, 9, 3).unwrap();

        // delta = 0 is a bitwise no-op.
        let before = sketch.values.clone();
        sketch.update_row(1, 17, 0.0).unwrap();
        assert_eq!(sketch.values, before);

        sketch.update_row(1, 17, 0.625).unwrap();
        for (a, b) in sketch.values.iter().zip(reference.values.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }

        // Two cancelling updates return to the original within rounding.
        sketch.update_row(1, 17, 4.0).unwrap();
        sketch.update_row(1, 17, -4.0).unwrap();
        for (a, b) in sketch.values.iter().zip(reference.values.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }

        assert!(sketch.update_row(1, dim, 1.0).is_err());
        assert!(sketch.update_row(9, 0, 1.0).is_err());
    }

    #[test]
    fn identical_rows_estimate_zero() {
        let row: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let data = DataMatrix::from_dense(vec![row.clone(), row]).unwrap();
        let s = build_sketch(&data, 1.0, 10, 77).unwrap();
        for kind in [EstimatorKind::Gm, EstimatorKind::Oq, EstimatorKind::Median] {
            let spec = EstimatorSpec::new(kind, 1.0, 10, None).unwrap();
            assert_eq!(s.estimate_distance(0, 1, &spec).unwrap().d_hat, 0.0);
        }
        let am_data = DataMatrix::from_dense(vec![
            (0..20).map(|i| i as f64).collect::<Vec<_>>(),
            (0..20).map(|i| i as f64).collect::<Vec<_>>(),
        ])
        .unwrap();
        let s2 = build_sketch(&am_data, 2.0, 10, 78).unwrap();
        let am = EstimatorSpec::new(EstimatorKind::Am, 2.0, 10, None).unwrap();
        assert_eq!(s2.estimate_distance(0, 1, &am).unwrap().d_hat, 0.0);
    }

    #[test]
    fn alpha_mismatch_is_a_config_error() {
        let data = random_dense(2, 16, 2);
        let s = build_sketch(&data, 1.0, 8, 1).unwrap();
        let spec = EstimatorSpec::new(EstimatorKind::Gm, 1.5, 8, None).unwrap();
        assert!(matches!(s.estimate_distance(0, 1, &spec), Err(Error::Config(_))));
    }

    #[test]
    fn l1_distance_recovery() {
        // Two fixed rows with known l1 distance 10; oq at k = 500 should land
        // within ~2 asymptotic standard deviations (~1.5).
        let dim = 100;
        let mut rng = RngStream::new(8, 0).rng();
        let u1: Vec<f64> = (0..dim).map(|_| crate::rng::u01_open(&mut rng)).collect();
        let mut u2 = u1.clone();
        for d in 0..dim {
            u2[d] += 0.1; // l1 distance = 100 * 0.1 = 10
        }
        let data = DataMatrix::from_dense(vec![u1, u2]).unwrap();
        let s = build_sketch(&data, 1.0, 500, 17).unwrap();
        let spec = EstimatorSpec::new(EstimatorKind::Oq, 1.0, 500, None).unwrap();
        let est = s.estimate_distance(0, 1, &spec).unwrap().d_hat;
        assert!((est - 10.0).abs() < 1.5, "estimated {est}");
        // Projected differences scaled by d^(-1/alpha) follow S(alpha, 1):
        // spot-check the central mass for the Cauchy case.
        let diffs: Vec<f64> = s
            .row(0)
            .unwrap()
            .iter()
            .zip(s.row(1).unwrap())
            .map(|(a, b)| (a - b) / 10.0)
            .collect();
        let inside = diffs.iter().filter(|x| x.abs() <= 1.0).count() as f64 / 500.0;
        assert!((inside - 0.5).abs() < 0.08, "central mass {inside}");
    }

    #[test]
    fn sskp_round_trip_and_errors() {
        let data = random_dense(3, 10, 5);
        let s = build_sketch(&data, 1.3, 4, 2024).unwrap();
        let bytes = s.to_bytes();
        assert_eq!(bytes.len(), Sketch::HEADER_BYTES + 3 * 4 * 8);
        let back = Sketch::from_bytes(&bytes).unwrap();
        assert_eq!(back.values, s.values);
        assert_eq!(back.alpha(), 1.3);
        assert_eq!(back.seed(), 2024);
        assert_eq!(back.dim(), None);

        let mut corrupt = bytes.clone();
        corrupt[0] = b'X';
        assert!(matches!(Sketch::from_bytes(&corrupt), Err(Error::Format(_))));
        assert!(matches!(Sketch::from_bytes(&bytes[..30]), Err(Error::Format(_))));
        let mut padded = bytes.clone();
        padded.push(0);
        assert!(matches!(Sketch::from_bytes(&padded), Err(Error::Format(_))));
        let mut bad_version = bytes;
        bad_version[4] = 9;
        assert!(matches!(Sketch::from_bytes(&bad_version), Err(Error::Format(_))));
    }

    #[test]
    fn empty_sketch_is_header_only() {
        let data = DataMatrix::from_dense(Vec::new()).unwrap();
        let s = build_sketch(&data, 1.0, 3, 0).unwrap();
        let bytes = s.to_bytes();
        assert_eq!(bytes.len(), Sketch::HEADER_BYTES);
        let back = Sketch::from_bytes(&bytes).unwrap();
        assert_eq!(back.n(), 0);
        assert_eq!(back.k(), 3);
    }

    #[test]
    fn save_load_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.sskp");
        let s = build_sketch(&random_dense(4, 12, 6), 0.7, 6, 31).unwrap();
        s.save(&path).unwrap();
        let back = Sketch::load(&path).unwrap();
        assert_eq!(back.values, s.values);
    }

    fn entropy_specs(k: usize) -> (EstimatorSpec, EstimatorSpec) {
        (
            EstimatorSpec::new(EstimatorKind::Oq, 1.05, k, None).unwrap(),
            EstimatorSpec::new(EstimatorKind::Oq, 0.95, k, None).unwrap(),
        )
    }

    #[test]
    fn entropy_proxy_zero_on_unit_entries() {
        // Difference vector entries in {0, +-1}: sum |z| ln |z| = 0.
        // Same-seed sketches so the two estimates share their randomness.
        let dim = 400;
        let mut rng = RngStream::new(11, 0).rng();
        let u1: Vec<f64> = (0..dim).map(|_| (rng.next_u64() % 5) as f64).collect();
        let mut u2 = u1.clone();
        let mut nonzero = 0.0;
        for d in 0..dim {
            match rng.next_u64() % 6 {
                0 => {
                    u2[d] += 1.0;
                    nonzero += 1.0;
                }
                1 => {
                    u2[d] -= 1.0;
                    nonzero += 1.0;
                }
                _ => {}
            }
        }
        let data = DataMatrix::from_dense(vec![u1, u2]).unwrap();
        let k = 4000;
        let hi = build_sketch(&data, 1.05, k, 1).unwrap();
        let lo = build_sketch(&data, 0.95, k, 1).unwrap();
        let (spec_hi, spec_lo) = entropy_specs(k);
        let proxy = estimate_entropy_proxy(&hi, &lo, 0, 1, &spec_hi, &spec_lo).unwrap();
        // Coupled estimates leave a residual well under the independent-seed
        // noise scale sqrt(2 g / k) * d / 0.1 (~30 here for d = nonzero).
        assert!(proxy.abs() < 0.12 * nonzero, "proxy = {proxy}, d ~ {nonzero}");
        // Mismatched pair is rejected.
        assert!(estimate_entropy_proxy(&lo, &hi, 0, 1, &spec_lo, &spec_hi).is_err());
    }

    #[test]
    fn entropy_proxy_single_spike_and_scaling() {
        // Difference vector (e, 0, ..., 0): the functional is e * ln e = e.
        let dim = 64;
        let e = std::f64::consts::E;
        let mut u2 = vec![0.0; dim];
        u2[0] = e;
        let data = DataMatrix::from_dense(vec![vec![0.0; dim], u2.clone()]).unwrap();
        let k = 10_000;
        let hi = build_sketch(&data, 1.05, k, 9).unwrap();
        let lo = build_sketch(&data, 0.95, k, 9).unwrap();
        let (spec_hi, spec_lo) = entropy_specs(k);
        let proxy = estimate_entropy_proxy(&hi, &lo, 0, 1, &spec_hi, &spec_lo).unwrap();
        assert!((proxy - e).abs() < 0.3, "proxy = {proxy}, expected ~{e}");

        // Scaling the difference vector by c: exact functional becomes
        // c (sum |z| ln |z|) + c ln c (sum |z|) = c e + c ln(c) e for the spike.
        let c = 3.0f64;
        let mut u2c = vec![0.0; dim];
        u2c[0] = c * e;
        let datac = DataMatrix::from_dense(vec![vec![0.0; dim], u2c]).unwrap();
        let hic = build_sketch(&datac, 1.05, k, 9).unwrap();
        let loc = build_sketch(&datac, 0.95, k, 9).unwrap();
        let proxyc = estimate_entropy_proxy(&hic, &loc, 0, 1, &spec_hi, &spec_lo).unwrap();
        let exact = c * e * (1.0 + c.ln());
        assert!(
            (proxyc - exact).abs() < 0.05 * exact + 0.5,
            "proxy = {proxyc}, exact = {exact}"
        );
    }
}
