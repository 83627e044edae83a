//! Image-quality metrics on peak-normalised magnitude images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{ComplexTensor, Tensor};

const K1: f64 = 0.01;
const K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub nmse: f64,
    pub psnr: f64,
    pub ssim: f64,
}

impl MetricsRecord {
    pub const CSV_HEADER: &'static str = "nmse,psnr_db,ssim";

    pub fn csv_row(&self) -> String {
        format!("{},{},{}", self.nmse, self.psnr, self.ssim)
    }
}

/// `|X| / max |X|`; an all-zero image stays zero.
pub fn normalized_magnitude<T: Scalar>(x: &ComplexTensor<T>) -> Tensor<f64> {
    let mag = x.abs().cast::<f64>();
    let peak = mag.max();
    if peak > 0.0 {
        mag.map(|v| v / peak)
    } else {
        mag
    }
}

fn check(x: &Tensor<f64>, y: &Tensor<f64>, op: &'static str) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::shape(op, format!("{:?} vs {:?}", x.shape(), y.shape())));
    }
    if x.is_empty() {
        return Err(Error::shape(op, "empty image"));
    }
    Ok(())
}

/// Pairwise sum; keeps uniform inputs exact on power-of-two sizes.
fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

fn sq_err(x: &Tensor<f64>, y: &Tensor<f64>) -> f64 {
    let d: Vec<f64> = x.data().iter().zip(y.data()).map(|(a, b)| (a - b) * (a - b)).collect();
    pairwise_sum(&d)
}

/// `||X - Xhat||^2 / ||X||^2`.
pub fn nmse(x: &Tensor<f64>, xhat: &Tensor<f64>) -> Result<f64> {
    check(x, xhat, "nmse")?;
    let den = pairwise_sum(&x.data().iter().map(|a| a * a).collect::<Vec<_>>());
    if den == 0.0 {
        return Err(Error::InvalidArgument("nmse reference is all zero".into()));
    }
    Ok(sq_err(x, xhat) / den)
}

/// `10 log10(1 / mse)`, peak value 1; identical images give `+inf`.
pub fn psnr(x: &Tensor<f64>, xhat: &Tensor<f64>) -> Result<f64> {
    check(x, xhat, "psnr")?;
    let mse = sq_err(x, xhat) / x.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}

/// Single-window SSIM over the whole image with peak value 1.
pub fn ssim(x: &Tensor<f64>, xhat: &Tensor<f64>) -> Result<f64> {
    check(x, xhat, "ssim")?;
    let n = x.len() as f64;
    let mx = x.sum() / n;
    let my = xhat.sum() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.data().iter().zip(xhat.data()) {
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
        cxy += (a - mx) * (b - my);
    }
    vx /= n;
    vy /= n;
    cxy /= n;
    let c1 = K1 * K1;
    let c2 = K2 * K2;
    let num = (2.0 * mx * my + c1) * (2.0 * cxy + c2);
    let den = (mx * mx + my * my + c1) * (vx + vy + c2);
    Ok(num / den)
}

pub fn evaluate(reference: &Tensor<f64>, estimate: &Tensor<f64>) -> Result<MetricsRecord> {
    Ok(MetricsRecord {
        nmse: nmse(reference, estimate)?,
        psnr: psnr(reference, estimate)?,
        ssim: ssim(reference, estimate)?,
    })
}

/// Metrics between two complex images after magnitude peak-normalisation.
pub fn evaluate_complex<T: Scalar>(reference: &ComplexTensor<T>, estimate: &ComplexTensor<T>) -> Result<MetricsRecord> {
    evaluate(&normalized_magnitude(reference), &normalized_magnitude(estimate))
}

/// Field-wise mean; infinities propagate.
pub fn mean_record(records: &[MetricsRecord]) -> Option<MetricsRecord> {
    if records.is_empty() {
        return None;
    }
    let n = records.len() as f64;
    Some(MetricsRecord {
        nmse: records.iter().map(|r| r.nmse).sum::<f64>() / n,
        psnr: records.iter().map(|r| r.psnr).sum::<f64>() / n,
        ssim: records.iter().map(|r| r.ssim).sum::<f64>() / n,
    })
}
