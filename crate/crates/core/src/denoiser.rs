//! Recorruption pairs and the small U-Net echo denoiser.

use std::collections::BTreeMap;

use num_complex::Complex;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;
use crate::signal::add_complex_gaussian;
use crate::tensor::{ComplexTensor, Tensor};

/// `y1 = Y + N1`, `y2 = Y - N1` with `N1 ~ CN(0, sigma^2 I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RecorruptPair<T: Scalar = f64> {
    pub y1: ComplexTensor<T>,
    pub y2: ComplexTensor<T>,
    pub sigma: f64,
}

pub fn recorrupt<T: Scalar>(y_n: &ComplexTensor<T>, sigma: f64, seed: u64) -> Result<RecorruptPair<T>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("recorruption sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(RecorruptPair { y1: y_n.clone(), y2: y_n.clone(), sigma });
    }
    Ok(RecorruptPair {
        y1: add_complex_gaussian(y_n, sigma, 1.0, seed),
        y2: add_complex_gaussian(y_n, sigma, -1.0, seed),
        sigma,
    })
}

/// Noise level `sigma` (as in `CN(0, sigma^2)`) from the median absolute
/// finest-scale diagonal Haar coefficient of both planes.
pub fn estimate_sigma<T: Scalar>(y: &ComplexTensor<T>) -> Result<f64> {
    let (r, c) = (y.rows(), y.cols());
    if r < 4 || c < 4 {
        return Err(Error::InvalidArgument(format!("sigma estimation needs at least 4x4 samples, got {r}x{c}")));
    }
    let mut d = Vec::with_capacity(r * c / 2);
    for plane in [&y.re, &y.im] {
        let v = plane.data();
        for i in 0..r / 2 {
            for j in 0..c / 2 {
                let at = |a: usize, b: usize| v[(2 * i + a) * c + 2 * j + b].to_f64_lossy();
                d.push(((at(0, 0) - at(0, 1) - at(1, 0) + at(1, 1)) / 2.0).abs());
            }
        }
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    let median = if n % 2 == 1 { d[n / 2] } else { 0.5 * (d[n / 2 - 1] + d[n / 2]) };
    Ok(std::f64::consts::SQRT_2 * median / 0.674_489_750_196_081_7)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DenoiserConfig {
    pub base: usize,
    /// Adds the input to the output.
    pub residual: bool,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self { base: 16, residual: false }
    }
}

/// Named tensors of the two-level encoder-decoder.
///
/// Layers (`base` = 16): `e1` 2->16, `e2` 16->32, `mid` 32->32 at a quarter
/// of the resolution, `d2` (32+32)->16, `d1` (16+16)->16, `out` 16->2, all
/// 3x3, plus a 1x1 `skip` 2->2 from the input added to the output.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserParams<T: Scalar = f64> {
    pub tensors: BTreeMap<String, Tensor<T>>,
    pub residual: bool,
}

pub const DENOISER_PREFIX: &str = "denoiser.";

fn layer_shapes(base: usize) -> Vec<(&'static str, [usize; 4])> {
    let (b, b2) = (base, 2 * base);
    vec![
        ("e1", [b, 2, 3, 3]),
        ("e2", [b2, b, 3, 3]),
        ("mid", [b2, b2, 3, 3]),
        ("d2", [b, 2 * b2, 3, 3]),
        ("d1", [b, 2 * b, 3, 3]),
        ("out", [2, b, 3, 3]),
        ("skip", [2, 2, 1, 1]),
    ]
}

/// He-normal hidden layers, zero `out`, identity `skip`: the fresh
/// denoiser passes its input through unchanged.
pub fn init_denoiser<T: Scalar>(cfg: &DenoiserConfig, seed: u64) -> Result<DenoiserParams<T>> {
    if cfg.base == 0 {
        return Err(Error::InvalidArgument("denoiser base width must be positive".into()));
    }
    let mut r = rng::seeded(seed);
    let mut tensors = BTreeMap::new();
    for (name, s) in layer_shapes(cfg.base) {
        let w = match name {
            "out" => Tensor::zeros(&s),
            "skip" => Tensor::from_fn(&s, |i| if i == 0 || i == 3 { T::one() } else { T::zero() }),
            _ => {
                let fan_in = s[1] * s[2] * s[3];
                let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
                Tensor::from_fn(&s, |_| T::lit(dist.sample(&mut r)))
            }
        };
        tensors.insert(format!("{DENOISER_PREFIX}{name}.w"), w);
        tensors.insert(format!("{DENOISER_PREFIX}{name}.b"), Tensor::zeros(&[s[0]]));
    }
    Ok(DenoiserParams { tensors, residual: cfg.residual })
}

impl<T: Scalar> DenoiserParams<T> {
    pub fn named(&self) -> Vec<(String, Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    /// Picks the `denoiser.` entries of a checkpoint.
    pub fn from_named(map: &BTreeMap<String, Tensor<T>>, residual: bool) -> Result<Self> {
        let base = map
            .get(&format!("{DENOISER_PREFIX}e1.w"))
            .map(|t| t.shape()[0])
            .ok_or_else(|| Error::InvalidArgument("checkpoint holds no denoiser".into()))?;
        let mut tensors = BTreeMap::new();
        for (name, s) in layer_shapes(base) {
            for (suffix, shape) in [("w", s.to_vec()), ("b", vec![s[0]])] {
                let key = format!("{DENOISER_PREFIX}{name}.{suffix}");
                let t = map
                    .get(&key)
                    .ok_or_else(|| Error::InvalidArgument(format!("checkpoint lacks {key}")))?;
                if t.shape() != shape.as_slice() {
                    return Err(Error::InvalidArgument(format!("{key} has shape {:?}, expected {shape:?}", t.shape())));
                }
                tensors.insert(key, t.clone());
            }
        }
        Ok(Self { tensors, residual })
    }

    /// Zeroes every weight and bias.
    pub fn zeroed(&self) -> Self {
        let tensors = self
            .tensors
            .iter()
            .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape())))
            .collect();
        Self { tensors, residual: self.residual }
    }

    pub fn bind(&self, g: &mut Graph<T>, trainable: bool) -> DenoiserVars {
        let vars = self
            .tensors
            .iter()
            .map(|(k, v)| {
                let var = if trainable { g.param(k.clone(), v.clone()) } else { g.constant(v.clone()) };
                (k.trim_start_matches(DENOISER_PREFIX).to_string(), var)
            })
            .collect();
        DenoiserVars { vars, residual: self.residual }
    }
}

#[derive(Clone, Debug)]
pub struct DenoiserVars {
    vars: BTreeMap<String, Var>,
    residual: bool,
}

impl DenoiserVars {
    fn conv<T: Scalar>(&self, g: &mut Graph<T>, x: Var, layer: &str, relu: bool) -> Result<Var> {
        let w = self.vars[&format!("{layer}.w")];
        let b = self.vars[&format!("{layer}.b")];
        let pad = g.shape(w)[2] / 2;
        let y = g.conv2d(x, w, Some(b), pad)?;
        if relu {
            g.relu(y)
        } else {
            Ok(y)
        }
    }
}

/// Denoiser on a planar echo `[2, H, W]`, `H, W >= 4`.
pub fn denoise_graph<T: Scalar>(g: &mut Graph<T>, x: Var, dv: &DenoiserVars) -> Result<Var> {
    let s = g.shape(x).to_vec();
    if s.len() != 3 || s[0] != 2 || s[1] < 4 || s[2] < 4 {
        return Err(Error::shape("denoise", format!("need [2, H>=4, W>=4], got {s:?}")));
    }
    let (h, w) = (s[1], s[2]);
    let (ph, pw) = ((4 - h % 4) % 4, (4 - w % 4) % 4);
    let xp = if ph + pw > 0 { g.pad_reflect(x, ph, pw)? } else { x };
    let e1 = dv.conv(g, xp, "e1", true)?;
    let p1 = g.avg_pool2(e1)?;
    let e2 = dv.conv(g, p1, "e2", true)?;
    let p2 = g.avg_pool2(e2)?;
    let mid = dv.conv(g, p2, "mid", true)?;
    let u2 = g.upsample2(mid)?;
    let c2 = g.concat(&[u2, e2])?;
    let d2 = dv.conv(g, c2, "d2", true)?;
    let u1 = g.upsample2(d2)?;
    let c1 = g.concat(&[u1, e1])?;
    let d1 = dv.conv(g, c1, "d1", true)?;
    let out = dv.conv(g, d1, "out", false)?;
    let skip = dv.conv(g, xp, "skip", false)?;
    let y = g.add(out, skip)?;
    let y = if ph + pw > 0 { g.crop(y, h, w)? } else { y };
    if dv.residual {
        g.add(y, x)
    } else {
        Ok(y)
    }
}

/// `f_d(Y)`, same shape as `Y`.
pub fn denoise_forward<T: Scalar>(y: &ComplexTensor<T>, params: &DenoiserParams<T>) -> Result<ComplexTensor<T>> {
    let mut g = Graph::new();
    let dv = params.bind(&mut g, false);
    let x = g.constant(y.to_planar());
    let out = denoise_graph(&mut g, x, &dv)?;
    ComplexTensor::from_planar(g.value(out))
}

/// Draws `CN(0, sigma^2)` noise of the given shape.
pub fn complex_noise<T: Scalar>(rows: usize, cols: usize, sigma: f64, seed: u64) -> ComplexTensor<T> {
    let mut r = rng::seeded(seed);
    let dist = Normal::new(0.0, sigma / std::f64::consts::SQRT_2).expect("finite sigma");
    ComplexTensor::from_fn2(rows, cols, |_, _| {
        Complex::new(T::lit(dist.sample(&mut r)), T::lit(dist.sample(&mut r)))
    })
}
