//! Independent straight-line oracles and fixtures shared by the
//! integration tests.
#![allow(dead_code)]

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssisar_core::signal::{
    build_operators, make_sampling, ForwardOperator, ImageGrid, RadarParams, SamplingMode, SamplingPattern,
};
use ssisar_core::{ComplexTensor, Tensor};

pub type C64 = Complex<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rows: usize, cols: usize, seed: u64) -> ComplexTensor<f64> {
    let mut r = rng(seed);
    ComplexTensor::from_fn2(rows, cols, |_, _| C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
}

pub fn random_real(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut r = rng(seed);
    Tensor::from_fn(shape, |_| r.random_range(-1.0..1.0))
}

/// Desk radar, matched grid and a sampling pattern.
pub fn desk_operator(
    n: usize,
    m: usize,
    keep_range: f64,
    keep_az: f64,
    mode: SamplingMode,
    seed: u64,
) -> (RadarParams, ImageGrid, SamplingPattern, ForwardOperator<f64>) {
    let params = RadarParams::desk(n, m);
    let grid = ImageGrid::matched(&params, n, m);
    let pattern = make_sampling(n, m, keep_range, keep_az, mode, seed).unwrap();
    let op = build_operators(&params, &grid, &pattern).unwrap();
    (params, grid, pattern, op)
}

pub fn to_rows(x: &ComplexTensor<f64>) -> Vec<Vec<C64>> {
    (0..x.rows()).map(|i| (0..x.cols()).map(|j| x.at(i, j)).collect()).collect()
}

pub fn from_rows(v: &[Vec<C64>]) -> ComplexTensor<f64> {
    ComplexTensor::from_fn2(v.len(), v[0].len(), |i, j| v[i][j])
}

pub fn max_abs_diff(a: &ComplexTensor<f64>, b: &ComplexTensor<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn frob(a: &ComplexTensor<f64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Triple-loop complex product.
pub fn matmul_naive(a: &[Vec<C64>], b: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let (r, k, c) = (a.len(), b.len(), b[0].len());
    assert_eq!(a[0].len(), k);
    (0..r)
        .map(|i| (0..c).map(|j| (0..k).map(|t| a[i][t] * b[t][j]).sum()).collect())
        .collect()
}

/// Range steering entry for 1-based frequency index `n` at range `x`.
pub fn range_entry(p: &RadarParams, n: usize, x: f64) -> C64 {
    let phase = -4.0 * std::f64::consts::PI / p.c * (p.fc + n as f64 * p.delta_f) * x;
    C64::new(phase.cos(), phase.sin())
}

/// Cross-range steering entry for 1-based pulse index `m` at cross-range `y`.
pub fn azimuth_entry(p: &RadarParams, m: usize, y: f64) -> C64 {
    let t = m as f64 / p.prf;
    let phase = -4.0 * std::f64::consts::PI * p.fc / p.c * y * p.omega * t;
    C64::new(phase.cos(), phase.sin())
}

/// `Y[n, m] = sum_p sum_q A[n, p] X[p, q] B[q, m]` over kept rows/cols.
pub fn forward_triple_sum(
    params: &RadarParams,
    grid: &ImageGrid,
    pattern: &SamplingPattern,
    x: &ComplexTensor<f64>,
) -> ComplexTensor<f64> {
    let rows = pattern.range_rows();
    let cols = pattern.azimuth_cols();
    ComplexTensor::from_fn2(rows.len(), cols.len(), |i, j| {
        let mut acc = C64::new(0.0, 0.0);
        for p in 0..grid.p {
            for q in 0..grid.q {
                acc += range_entry(params, rows[i] + 1, grid.x_coords[p])
                    * x.at(p, q)
                    * azimuth_entry(params, cols[j] + 1, grid.y_coords[q]);
            }
        }
        acc
    })
}

/// Zero-padded cross-correlation, `x [C, H, W]`, `w [F, C, k, k]`.
pub fn conv2d_naive(x: &Tensor<f64>, w: &Tensor<f64>, b: Option<&Tensor<f64>>, pad: usize) -> Tensor<f64> {
    let (c, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (f, k) = (w.shape()[0], w.shape()[2]);
    let (ho, wo) = (h + 2 * pad + 1 - k, wd + 2 * pad + 1 - k);
    let mut out = vec![0.0; f * ho * wo];
    for o in 0..f {
        for i in 0..ho {
            for j in 0..wo {
                let mut acc = b.map(|b| b.data()[o]).unwrap_or(0.0);
                for ci in 0..c {
                    for di in 0..k {
                        for dj in 0..k {
                            let (r, s) = (i + di, j + dj);
                            if r < pad || s < pad || r - pad >= h || s - pad >= wd {
                                continue;
                            }
                            acc += x.data()[(ci * h + r - pad) * wd + s - pad] * w.data()[((o * c + ci) * k + di) * k + dj];
                        }
                    }
                }
                out[(o * ho + i) * wo + j] = acc;
            }
        }
    }
    Tensor::new(vec![f, ho, wo], out).unwrap()
}

/// Bilinear rotation about pixel `(h/2, w/2)` by inverse mapping, zero fill.
pub fn rotate_naive(x: &ComplexTensor<f64>, angle_deg: f64) -> ComplexTensor<f64> {
    let (h, w) = (x.rows(), x.cols());
    let th = angle_deg.to_radians();
    let (r0, c0) = ((h / 2) as f64, (w / 2) as f64);
    let sample = |r: i64, c: i64| -> C64 {
        if r < 0 || c < 0 || r >= h as i64 || c >= w as i64 {
            C64::new(0.0, 0.0)
        } else {
            x.at(r as usize, c as usize)
        }
    };
    ComplexTensor::from_fn2(h, w, |i, j| {
        let (dr, dc) = (i as f64 - r0, j as f64 - c0);
        // Inverse of (dr, dc) -> (dr cos - dc sin, dr sin + dc cos).
        let sr = r0 + dr * th.cos() + dc * th.sin();
        let sc = c0 - dr * th.sin() + dc * th.cos();
        let (sr, sc) = (snap(sr), snap(sc));
        let (rl, cl) = (sr.floor(), sc.floor());
        let (fr, fc) = (sr - rl, sc - cl);
        let (ri, ci) = (rl as i64, cl as i64);
        sample(ri, ci) * ((1.0 - fr) * (1.0 - fc))
            + sample(ri, ci + 1) * ((1.0 - fr) * fc)
            + sample(ri + 1, ci) * (fr * (1.0 - fc))
            + sample(ri + 1, ci + 1) * (fr * fc)
    })
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

/// Largest singular value by power iteration on `M^H M`.
pub fn sigma_max_power(m: &[Vec<C64>], iters: usize) -> f64 {
    let (rows, cols) = (m.len(), m[0].len());
    let mut v: Vec<C64> = (0..cols).map(|j| C64::new(1.0 + j as f64 * 1e-3, 0.5)).collect();
    let mut s = 0.0;
    for _ in 0..iters {
        let mv: Vec<C64> = (0..rows).map(|i| (0..cols).map(|j| m[i][j] * v[j]).sum()).collect();
        let w: Vec<C64> = (0..cols).map(|j| (0..rows).map(|i| m[i][j].conj() * mv[i]).sum()).collect();
        let nrm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        s = nrm.sqrt();
        v = w.iter().map(|z| z / nrm).collect();
    }
    s
}

/// Householder QR with column pivoting; returns `|R_ii|` in pivot order.
pub fn rrqr_diagonal(m: &[Vec<C64>]) -> Vec<f64> {
    let (rows, cols) = (m.len(), m[0].len());
    let mut a: Vec<Vec<C64>> = m.to_vec();
    let mut norms: Vec<f64> = (0..cols).map(|j| (0..rows).map(|i| a[i][j].norm_sqr()).sum()).collect();
    let mut diag = Vec::new();
    for k in 0..rows.min(cols) {
        let (piv, _) = norms
            .iter()
            .enumerate()
            .skip(k)
            .fold((k, -1.0), |best, (j, &n)| if n > best.1 { (j, n) } else { best });
        for row in a.iter_mut() {
            row.swap(k, piv);
        }
        norms.swap(k, piv);
        let alpha: f64 = (k..rows).map(|i| a[i][k].norm_sqr()).sum::<f64>().sqrt();
        if alpha == 0.0 {
            diag.push(0.0);
            continue;
        }
        let phase = if a[k][k].norm() > 0.0 { a[k][k] / a[k][k].norm() } else { C64::new(1.0, 0.0) };
        let mut v: Vec<C64> = (k..rows).map(|i| a[i][k]).collect();
        v[0] += phase * alpha;
        let vn: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        for j in k..cols {
            let dot: C64 = (k..rows).map(|i| v[i - k].conj() * a[i][j]).sum();
            let f = dot * 2.0 / vn;
            for i in k..rows {
                a[i][j] -= v[i - k] * f;
            }
        }
        diag.push(a[k][k].norm());
        for j in k + 1..cols {
            norms[j] = (k + 1..rows).map(|i| a[i][j].norm_sqr()).sum();
        }
    }
    diag
}

/// Rank by pivoted QR: diagonal entries above `tol * sigma_max`.
pub fn rrqr_rank(m: &[Vec<C64>], tol: f64) -> usize {
    let smax = sigma_max_power(m, 300);
    rrqr_diagonal(m).iter().filter(|&&d| d > tol * smax).count()
}

/// Magnitude normalised to unit peak.
pub fn norm_mag(x: &ComplexTensor<f64>) -> Vec<f64> {
    let mags: Vec<f64> = x.iter().map(|z| z.norm()).collect();
    let peak = mags.iter().cloned().fold(0.0, f64::max);
    mags.iter().map(|m| if peak > 0.0 { m / peak } else { 0.0 }).collect()
}

pub fn nmse_oracle(x: &[f64], y: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..x.len() {
        num += (x[i] - y[i]).powi(2);
        den += x[i].powi(2);
    }
    num / den
}

pub fn psnr_oracle(x: &[f64], y: &[f64]) -> f64 {
    let mse: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / x.len() as f64;
    10.0 * (1.0 / mse).log10()
}

pub fn ssim_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let vx = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n;
    let vy = y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n;
    let cxy = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}
