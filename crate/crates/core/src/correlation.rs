//! Pearson correlation, the spanning-tree metric `d = sqrt(2 (1 - rho))`,
//! symmetric spectra and identity-target shrinkage.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::data::{is_constant, ReturnsPanel};
use crate::error::{Error, Result};

/// Default lower bound on the spectrum after shrinkage.
pub const DEFAULT_SPECTRAL_FLOOR: f64 = 1e-10;

const ENTRY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    n: usize,
    values: Vec<f64>,
    min_eigenvalue: Option<f64>,
}

impl CorrelationMatrix {
    /// Wraps a row-major `n × n` buffer after checking symmetry, unit
    /// diagonal and range.
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "buffer of length {} is not {n} x {n}",
                values.len()
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 1.0 {
                return Err(Error::InvalidMatrix(format!("diagonal entry {i} is not 1")));
            }
            for j in i + 1..n {
                let v = values[i * n + j];
                if !v.is_finite() || v.abs() > 1.0 + ENTRY_TOLERANCE {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i}, {j}) = {v} outside [-1, 1]"
                    )));
                }
                if v != values[j * n + i] {
                    return Err(Error::InvalidMatrix(format!("not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(CorrelationMatrix {
            n,
            values,
            min_eigenvalue: None,
        })
    }

    /// Builds a matrix from the strict upper triangle, row by row.
    pub(crate) fn from_upper(n: usize, upper: impl IntoIterator<Item = f64>) -> Self {
        let mut values = vec![0.0; n * n];
        let mut it = upper.into_iter();
        for i in 0..n {
            values[i * n + i] = 1.0;
            for j in i + 1..n {
                let v = it
                    .next()
                    .expect("upper triangle too short")
                    .clamp(-1.0, 1.0);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        CorrelationMatrix {
            n,
            values,
            min_eigenvalue: None,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_upper(n, std::iter::repeat(0.0))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Smallest eigenvalue, when a PSD check has been run on this matrix.
    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.min_eigenvalue
    }

    /// Runs the spectrum and records its minimum.
    pub fn check_psd(&mut self) -> f64 {
        let lo = spectrum(self).min();
        self.min_eigenvalue = Some(lo);
        lo
    }
}

/// Sample Pearson matrix of the panel rows.
pub fn pearson(panel: &ReturnsPanel) -> Result<CorrelationMatrix> {
    pearson_rows(panel.values(), panel.n_elements(), panel.n_times())
        .map_err(|i| Error::ZeroVariance(panel.elements()[i].clone()))
}

/// Pearson matrix of a row-major `n × t_len` buffer. On a constant row
/// returns its index.
pub(crate) fn pearson_rows(
    values: &[f64],
    n: usize,
    t_len: usize,
) -> std::result::Result<CorrelationMatrix, usize> {
    let mut z = values.to_vec();
    standardize_rows(&mut z, n, t_len)?;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        out[i * n + i] = 1.0;
        let zi = &z[i * t_len..(i + 1) * t_len];
        for j in i + 1..n {
            let zj = &z[j * t_len..(j + 1) * t_len];
            let r = dot(zi, zj).clamp(-1.0, 1.0);
            out[i * n + j] = r;
            out[j * n + i] = r;
        }
    }
    Ok(CorrelationMatrix {
        n,
        values: out,
        min_eigenvalue: None,
    })
}

/// Centers each row and scales it to unit Euclidean norm in place.
fn standardize_rows(z: &mut [f64], n: usize, t_len: usize) -> std::result::Result<(), usize> {
    for i in 0..n {
        let row = &mut z[i * t_len..(i + 1) * t_len];
        if is_constant(row) {
            return Err(i);
        }
        let mean = row.iter().sum::<f64>() / t_len as f64;
        row.iter_mut().for_each(|v| *v -= mean);
        let norm = dot(row, row).sqrt();
        row.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler vectorise the reduction
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * k + l] * b[4 * k + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Pearson coefficient of `x[idx]` against `y[idx]`, or `None` when either
/// resampled series is constant.
pub(crate) fn pearson_resampled(
    x: &[f64],
    y: &[f64],
    idx: &[u32],
    xs: &mut Vec<f64>,
    ys: &mut Vec<f64>,
) -> Option<f64> {
    xs.clear();
    ys.clear();
    for &k in idx {
        xs.push(x[k as usize]);
        ys.push(y[k as usize]);
    }
    if is_constant(xs) || is_constant(ys) {
        return None;
    }
    let len = idx.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in xs.iter().zip(ys.iter()) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Accepts any symmetric, zero-diagonal, finite matrix.
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "buffer of length {} is not {n} x {n}",
                values.len()
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidMatrix(format!("diagonal entry {i} is not 0")));
            }
            for j in i + 1..n {
                let v = values[i * n + j];
                if !v.is_finite() {
                    return Err(Error::InvalidMatrix(format!("non-finite entry ({i}, {j})")));
                }
                if v != values[j * n + i] {
                    return Err(Error::InvalidMatrix(format!("not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(DistanceMatrix { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Applies `f` to every off-diagonal entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let n = self.n;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| if k / n == k % n { 0.0 } else { f(v) })
            .collect();
        Self::from_values(n, values)
    }
}

pub fn correlation_distance(rho: f64) -> f64 {
    (2.0 * (1.0 - rho)).max(0.0).sqrt()
}

pub fn to_distance(corr: &CorrelationMatrix) -> DistanceMatrix {
    let n = corr.n;
    let values = corr
        .values
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            if k / n == k % n {
                0.0
            } else {
                correlation_distance(r)
            }
        })
        .collect();
    DistanceMatrix { n, values }
}

/// Eigenvalues in ascending order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }

    pub fn negative_count(&self) -> usize {
        self.eigenvalues.iter().take_while(|&&l| l < 0.0).count()
    }

    pub fn sum(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

pub fn spectrum(corr: &CorrelationMatrix) -> Spectrum {
    symmetric_spectrum(corr.n, &corr.values)
}

/// Spectrum of any symmetric row-major matrix.
pub fn symmetric_spectrum(n: usize, values: &[f64]) -> Spectrum {
    let m = DMatrix::from_row_slice(n, n, values);
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Spectrum { eigenvalues }
}

/// Shrinks towards the identity, `(1 - alpha) C + alpha I`, with the
/// smallest `alpha` that lifts the spectrum to at least `floor`.
pub fn shrink_to_psd(corr: &CorrelationMatrix, floor: f64) -> Result<(CorrelationMatrix, f64)> {
    if !(0.0..1.0).contains(&floor) {
        return Err(Error::InvalidArgument(format!(
            "floor {floor} outside [0, 1)"
        )));
    }
    let lambda_min = spectrum(corr).min();
    if lambda_min >= floor {
        let mut out = corr.clone();
        out.min_eigenvalue = Some(lambda_min);
        return Ok((out, 0.0));
    }
    if lambda_min >= 1.0 {
        return Err(Error::InvalidMatrix(format!(
            "smallest eigenvalue {lambda_min} >= 1"
        )));
    }
    let mut alpha = (floor - lambda_min) / (1.0 - lambda_min);
    // rounding can leave the shrunk minimum a few ulps under the floor
    for _ in 0..8 {
        let mut out = shrink_with(corr, alpha);
        let lo = out.check_psd();
        if lo >= floor {
            return Ok((out, alpha));
        }
        alpha += (floor - lo) / (1.0 - lo) + f64::EPSILON;
        alpha = alpha.min(1.0);
    }
    Err(Error::InvalidMatrix(
        "shrinkage did not reach the spectral floor".into(),
    ))
}

fn shrink_with(corr: &CorrelationMatrix, alpha: f64) -> CorrelationMatrix {
    let n = corr.n;
    let values = corr
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            if k / n == k % n {
                1.0
            } else {
                (1.0 - alpha) * v
            }
        })
        .collect();
    CorrelationMatrix {
        n,
        values,
        min_eigenvalue: None,
    }
}

/// Square CSV dump with element labels on both axes, 17 significant digits.
pub fn write_matrix_csv(
    n: usize,
    values: &[f64],
    elements: &[String],
    mut out: impl Write,
) -> std::io::Result<()> {
    let mut line = String::from("element");
    for e in elements {
        line.push(',');
        line.push_str(e);
    }
    writeln!(out, "{line}")?;
    for i in 0..n {
        line.clear();
        line.push_str(&elements[i]);
        for j in 0..n {
            line.push(',');
            line.push_str(&format!("{:.16e}", values[i * n + j]));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(rows: Vec<Vec<f64>>) -> ReturnsPanel {
        let names = (0..rows.len()).map(|i| format!("P{i}")).collect();
        ReturnsPanel::new(names, rows, None).unwrap()
    }

    fn sym(n: usize, upper: &[f64]) -> CorrelationMatrix {
        CorrelationMatrix::from_upper(n, upper.iter().copied())
    }

    #[test]
    fn pearson_examples() {
        let c = pearson(&panel(vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]])).unwrap();
        assert!((c.get(0, 1) - 1.0).abs() < 1e-15);
        let c = pearson(&panel(vec![vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]])).unwrap();
        assert!((c.get(0, 1) + 1.0).abs() < 1e-15);
        // sxy = 4, sxx = syy = 5
        let c = pearson(&panel(vec![
            vec![1.0, 2.0, 3.0, 4.0],
            vec![1.0, 3.0, 2.0, 4.0],
        ]))
        .unwrap();
        assert!((c.get(0, 1) - 0.8).abs() < 1e-12);
        assert_eq!(c.get(0, 1), c.get(1, 0));
        assert_eq!(c.get(0, 0), 1.0);
    }

    #[test]
    fn pearson_rows_reports_constant_row() {
        let v = [1.0, 2.0, 3.0, 5.0, 5.0, 5.0];
        assert_eq!(pearson_rows(&v, 2, 3).unwrap_err(), 1);
    }

    #[test]
    fn from_values_validates() {
        assert!(CorrelationMatrix::from_values(2, vec![1.0, 0.5, 0.5, 1.0]).is_ok());
        assert!(CorrelationMatrix::from_values(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(CorrelationMatrix::from_values(2, vec![0.9, 0.5, 0.5, 1.0]).is_err());
        assert!(CorrelationMatrix::from_values(2, vec![1.0, 1.5, 1.5, 1.0]).is_err());
        assert!(CorrelationMatrix::from_values(2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn distance_examples() {
        assert_eq!(correlation_distance(1.0), 0.0);
        assert_eq!(correlation_distance(-1.0), 2.0);
        assert_eq!(correlation_distance(0.0), 2f64.sqrt());
        let d = to_distance(&sym(3, &[0.5, -1.0, 1.0]));
        assert_eq!(d.get(0, 0), 0.0);
        assert_eq!(d.get(0, 1), 1.0);
        assert_eq!(d.get(2, 0), 2.0);
        assert_eq!(d.get(1, 2), 0.0);
    }

    #[test]
    fn spectrum_examples() {
        let s = spectrum(&CorrelationMatrix::identity(3));
        for l in &s.eigenvalues {
            assert!((l - 1.0).abs() < 1e-14);
        }
        let s = spectrum(&sym(2, &[0.5]));
        assert!((s.eigenvalues[0] - 0.5).abs() < 1e-14);
        assert!((s.eigenvalues[1] - 1.5).abs() < 1e-14);
        let s = spectrum(&sym(3, &[0.9, 0.9, -0.9]));
        let expected = [-0.8, 1.9, 1.9];
        for (l, e) in s.eigenvalues.iter().zip(expected) {
            assert!((l - e).abs() < 1e-12, "{l} vs {e}");
        }
        assert_eq!(s.negative_count(), 1);
        assert!((s.sum() - 3.0).abs() < 3e-8);
    }

    #[test]
    fn shrink_examples() {
        let c = sym(2, &[0.3]);
        let (out, alpha) = shrink_to_psd(&c, 0.0).unwrap();
        assert_eq!(alpha, 0.0);
        assert_eq!(out.values(), c.values());

        let (out, alpha) = shrink_to_psd(&CorrelationMatrix::identity(4), 0.5).unwrap();
        assert_eq!(alpha, 0.0);
        assert_eq!(out.values(), CorrelationMatrix::identity(4).values());

        // lambda_min = -0.8
        let c = sym(3, &[0.9, 0.9, -0.9]);
        let (out, alpha) = shrink_to_psd(&c, 0.0).unwrap();
        assert!((alpha - 0.8 / 1.8).abs() < 1e-12, "alpha = {alpha}");
        let lo = spectrum(&out).min();
        assert!((0.0..=1e-10).contains(&lo), "min eigenvalue {lo}");
        for i in 0..3 {
            assert_eq!(out.get(i, i), 1.0);
        }

        let (out, alpha) = shrink_to_psd(&c, DEFAULT_SPECTRAL_FLOOR).unwrap();
        assert!(alpha > 0.0);
        let lo = spectrum(&out).min();
        assert!((DEFAULT_SPECTRAL_FLOOR..=2.0 * DEFAULT_SPECTRAL_FLOOR).contains(&lo));

        assert!(shrink_to_psd(&c, 1.5).is_err());
    }

    #[test]
    fn matrix_dump_has_17_significant_digits() {
        let c = sym(2, &[1.0 / 3.0]);
        let mut out = Vec::new();
        write_matrix_csv(2, c.values(), &["A".into(), "B".into()], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "element,A,B");
        assert_eq!(lines[1], "A,1.0000000000000000e0,3.3333333333333331e-1");
        let back: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }
}
