//! Dense operator matrices and numerical rank checks for the stacked
//! rotation-augmented forward operator.
//!
//! `vec` is row-major throughout: image pixel `(p, q)` is column `p Q + q`,
//! echo sample `(n, m)` is row `n M_s + m`.

use num_complex::Complex;
use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::{ForwardOperator, ImageGrid};
use crate::tensor::{ComplexTensor, RotationMap};

/// Largest image (in pixels) that dense analysis accepts.
pub const MAX_DENSE_PIXELS: usize = 4096;

pub const DEFAULT_RANK_TOL: f64 = 1e-8;

fn guard(pixels: usize) -> Result<()> {
    if pixels > MAX_DENSE_PIXELS {
        return Err(Error::SizeGuard(pixels));
    }
    Ok(())
}

/// `F_s` with `F_s vec(X) = vec(A_s X B_s)`.
pub fn materialize_fs<T: Scalar>(op: &ForwardOperator<T>) -> Result<ComplexTensor<T>> {
    let (p, q) = op.image_shape();
    let (ns, ms) = op.echo_shape();
    guard(p * q)?;
    let (a, b) = (op.a_s(), op.b_s());
    Ok(ComplexTensor::from_fn2(ns * ms, p * q, |r, c| {
        a.at(r / ms, c / q) * b.at(c % q, r % ms)
    }))
}

/// Sparse real matrix stored by rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRows {
    pub cols: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                let mut d = vec![0.0; self.cols];
                for &(j, w) in r {
                    d[j] += w;
                }
                d
            })
            .collect()
    }
}

/// `T_g` with `T_g vec(X) = vec(rotate_image(X, angle))`.
pub fn materialize_tg(angle_deg: f64, grid: &ImageGrid) -> Result<SparseRows> {
    if grid.p != grid.q {
        return Err(Error::InvalidArgument(format!(
            "rotation operators need a square grid, got {}x{}",
            grid.p, grid.q
        )));
    }
    guard(grid.p * grid.q)?;
    let map = RotationMap::<f64>::new(grid.p, grid.q, angle_deg);
    Ok(SparseRows {
        cols: grid.p * grid.q,
        rows: (0..grid.p * grid.q).map(|i| map.row(i).collect()).collect(),
    })
}

/// Vertical stack of `F_s T_g` blocks.
#[derive(Clone, Debug)]
pub struct DenseOperatorMatrix<T: Scalar = f64> {
    pub matrix: ComplexTensor<T>,
    pub block_angles: Vec<f64>,
    pub source: String,
}

pub fn build_fg<T: Scalar>(op: &ForwardOperator<T>, angles: &[f64]) -> Result<DenseOperatorMatrix<T>> {
    if angles.is_empty() {
        return Err(Error::InvalidArgument("at least one angle is required".into()));
    }
    let fs = materialize_fs(op)?;
    let (rows, cols) = (fs.rows(), fs.cols());
    let mut out = ComplexTensor::zeros(&[angles.len() * rows, cols]);
    for (b, &angle) in angles.iter().enumerate() {
        let tg = materialize_tg(angle, op.grid())?;
        for (i, row) in tg.rows.iter().enumerate() {
            for &(j, w) in row {
                let w = T::lit(w);
                for r in 0..rows {
                    let f = fs.at(r, i);
                    let idx = (b * rows + r) * cols + j;
                    out.re.data_mut()[idx] += w * f.re;
                    out.im.data_mut()[idx] += w * f.im;
                }
            }
        }
    }
    Ok(DenseOperatorMatrix {
        matrix: out,
        block_angles: angles.to_vec(),
        source: format!("F_s T_g stack over {} angle(s)", angles.len()),
    })
}

/// Singular values (one per column, descending) and right singular vectors.
#[derive(Clone, Debug)]
pub struct Svd {
    pub singular_values: Vec<f64>,
    /// Column `k` pairs with `singular_values[k]`.
    pub v: ComplexTensor<f64>,
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD of a complex matrix.
///
/// Columns are rotated pairwise until mutually orthogonal; the column norms
/// are then the singular values. A wide matrix yields `cols - rows` values
/// at rounding level.
pub fn jacobi_svd<T: Scalar>(m: &ComplexTensor<T>) -> Result<Svd> {
    let (rows, cols) = (m.rows(), m.cols());
    // column-major working copies
    let mut a: Vec<Vec<Complex<f64>>> = (0..cols)
        .map(|j| {
            (0..rows)
                .map(|i| {
                    let z = m.at(i, j);
                    Complex::new(z.re.to_f64_lossy(), z.im.to_f64_lossy())
                })
                .collect()
        })
        .collect();
    if a.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite { op: "svd" });
    }
    let mut v: Vec<Vec<Complex<f64>>> = (0..cols)
        .map(|j| (0..cols).map(|i| Complex::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect())
        .collect();
    let eps = f64::EPSILON;
    let frob_sq: f64 = a.iter().flatten().map(|z| z.norm_sqr()).sum();
    // columns this small are rounding noise; rotating them never settles
    let negligible = (eps * eps) * frob_sq;
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..cols {
            for j in i + 1..cols {
                let alpha: f64 = a[i].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = a[j].iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex<f64> = a[i].iter().zip(&a[j]).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g == 0.0 || g <= eps * (alpha * beta).sqrt() || alpha.min(beta) <= negligible {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let conj_phase = phase.conj();
                for cols_of in [&mut a, &mut v] {
                    let (left, right) = cols_of.split_at_mut(j);
                    let (ci, cj) = (&mut left[i], &mut right[0]);
                    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
                        let yj = *y * conj_phase;
                        let xi = *x;
                        *x = xi * c - yj * s;
                        *y = xi * s + yj * c;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence(JACOBI_MAX_SWEEPS));
    }
    let norms: Vec<f64> = a.iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let vt = ComplexTensor::from_fn2(cols, cols, |r, k| {
        let z = v[order[k]][r];
        Complex::new(z.re, z.im)
    });
    Ok(Svd {
        singular_values: order.iter().map(|&k| norms[k]).collect(),
        v: vt,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub numerical_rank: usize,
    pub singular_values: Vec<f64>,
    /// Absolute cut-off `tol_factor * sigma_max`.
    pub tolerance: f64,
    pub full_column_rank: bool,
}

impl RankReport {
    /// `sigma_min / sigma_max` over all columns.
    pub fn sigma_min_ratio(&self) -> f64 {
        let max = self.singular_values.first().copied().unwrap_or(0.0);
        let min = self.singular_values.last().copied().unwrap_or(0.0);
        if max > 0.0 {
            min / max
        } else {
            0.0
        }
    }
}

/// Counts singular values above `tol_factor * sigma_max`.
pub fn numerical_rank<T: Scalar>(m: &ComplexTensor<T>, tol_factor: f64) -> Result<RankReport> {
    let svd = jacobi_svd(m)?;
    Ok(rank_from_values(svd.singular_values, tol_factor, m.rows(), m.cols()))
}

pub fn rank_from_values(singular_values: Vec<f64>, tol_factor: f64, rows: usize, cols: usize) -> RankReport {
    let smax = singular_values.first().copied().unwrap_or(0.0);
    let tolerance = tol_factor * smax;
    let numerical_rank = singular_values
        .iter()
        .filter(|&&s| s > tolerance)
        .count()
        .min(rows.min(cols));
    RankReport {
        numerical_rank,
        singular_values,
        tolerance,
        full_column_rank: numerical_rank == cols,
    }
}

/// `num_angles * gamma > 1`, exactly.
pub fn check_necessary_condition(num_angles: usize, gamma: Ratio<u64>) -> bool {
    (num_angles as u64) * gamma.numer() > *gamma.denom()
}

/// Summary written by the rank-check command.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankCheck {
    pub gamma: f64,
    pub angles: Vec<f64>,
    #[serde(rename = "rank_Fs")]
    pub rank_fs: usize,
    #[serde(rename = "rank_Fg")]
    pub rank_fg: usize,
    pub dim: usize,
    pub full_column_rank: bool,
    pub sigma_min_ratio: f64,
    pub sigma_min_ratio_fs: f64,
}

pub fn rank_check<T: Scalar>(op: &ForwardOperator<T>, angles: &[f64], tol_factor: f64) -> Result<RankCheck> {
    let fs = numerical_rank(&materialize_fs(op)?, tol_factor)?;
    let fg = numerical_rank(&build_fg(op, angles)?.matrix, tol_factor)?;
    let (p, q) = op.image_shape();
    Ok(RankCheck {
        gamma: op.pattern().gamma_f64(),
        angles: angles.to_vec(),
        rank_fs: fs.numerical_rank,
        rank_fg: fg.numerical_rank,
        dim: p * q,
        full_column_rank: fg.full_column_rank,
        sigma_min_ratio: fg.sigma_min_ratio(),
        sigma_min_ratio_fs: fs.sigma_min_ratio(),
    })
}
