//! Range-Doppler imaging and classical ADMM for
//! `min_X 1/2 ||Y_s - A_s X B_s||_F^2 + lambda ||X||_1`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::ForwardOperator;
use crate::tensor::{soft_threshold, ComplexTensor, Threshold};

/// Zero-filled matched-filter image `A_s^H Y_s B_s^H`, scaled to unit peak.
pub fn rd_image<T: Scalar>(y_s: &ComplexTensor<T>, op: &ForwardOperator<T>) -> Result<ComplexTensor<T>> {
    let img = op.adjoint(y_s)?;
    let peak = img.max_abs();
    if peak == T::zero() {
        return Err(Error::InvalidArgument("range-Doppler image of a zero echo".into()));
    }
    Ok(img.scale_real(T::one() / peak))
}

/// Form of the dual ascent step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DualUpdate {
    /// `U += rho (X - Z)`.
    #[default]
    Printed,
    /// `U += X - Z`, the textbook scaled-dual step.
    Scaled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmmHyper {
    pub lambda: f64,
    pub rho: f64,
    /// Absolute gradient step `l_x`. `None` picks `1 / L`.
    #[serde(default)]
    pub step: Option<f64>,
    pub outer_iters: usize,
    pub inner_gd_iters: usize,
    #[serde(default)]
    pub dual_update: DualUpdate,
}

impl Default for AdmmHyper {
    fn default() -> Self {
        Self {
            lambda: 1e-2,
            rho: 1.0,
            step: None,
            outer_iters: 100,
            inner_gd_iters: 5,
            dual_update: DualUpdate::Printed,
        }
    }
}

impl AdmmHyper {
    pub fn validate(&self, lipschitz: f64) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("admm lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("admm rho must be > 0, got {}", self.rho)));
        }
        if self.outer_iters == 0 || self.inner_gd_iters == 0 {
            return Err(Error::InvalidArgument("admm iteration counts must be positive".into()));
        }
        if let Some(step) = self.step {
            if !(step > 0.0 && step < 2.0 / lipschitz) {
                return Err(Error::InvalidArgument(format!(
                    "admm step {step} outside (0, 2/L) with L = {lipschitz}"
                )));
            }
        }
        Ok(())
    }

    pub fn resolved_step(&self, lipschitz: f64) -> f64 {
        self.step.unwrap_or(1.0 / lipschitz)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdmmState<T: Scalar = f64> {
    pub x: ComplexTensor<T>,
    pub z: ComplexTensor<T>,
    pub u: ComplexTensor<T>,
}

impl<T: Scalar> AdmmState<T> {
    /// `X = Z = A_s^H Y_s B_s^H / L`, `U = 0`.
    pub fn init(y_s: &ComplexTensor<T>, op: &ForwardOperator<T>) -> Result<Self> {
        let x = op.adjoint(y_s)?.scale_real(T::one() / op.lipschitz());
        let u = ComplexTensor::zeros(x.shape());
        Ok(Self { z: x.clone(), x, u })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdmmOutput<T: Scalar = f64> {
    pub image: ComplexTensor<T>,
    pub state: AdmmState<T>,
    /// Objective at `Z` after each outer round.
    pub trace: Vec<f64>,
}

/// `1/2 ||Y_s - A_s X B_s||_F^2 + lambda sum |X|`.
pub fn objective<T: Scalar>(
    y_s: &ComplexTensor<T>,
    op: &ForwardOperator<T>,
    x: &ComplexTensor<T>,
    lambda: f64,
) -> Result<f64> {
    let r = y_s.sub(&op.forward(x)?)?;
    let l1: f64 = x.iter().map(|z| z.norm().to_f64_lossy()).sum();
    Ok(0.5 * r.norm_sqr().to_f64_lossy() + lambda * l1)
}

/// One gradient step of the X-subproblem:
/// `mu X + (1 - mu)(Z - U) - step A_s^H (A_s X B_s - Y_s) B_s^H`.
pub fn gd_step<T: Scalar>(
    x: &ComplexTensor<T>,
    z: &ComplexTensor<T>,
    u: &ComplexTensor<T>,
    y_s: &ComplexTensor<T>,
    op: &ForwardOperator<T>,
    mu: T,
    step: T,
) -> Result<ComplexTensor<T>> {
    let grad = op.adjoint(&op.forward(x)?.sub(y_s)?)?;
    x.scale_real(mu)
        .add(&z.sub(u)?.scale_real(T::one() - mu))?
        .sub(&grad.scale_real(step))
}

/// Runs `outer_iters` rounds of {GD on X, shrink Z, dual step on U} and
/// returns the final `Z`.
pub fn admm_reconstruct<T: Scalar>(
    y_s: &ComplexTensor<T>,
    op: &ForwardOperator<T>,
    hyper: &AdmmHyper,
) -> Result<AdmmOutput<T>> {
    let l = op.lipschitz().to_f64_lossy();
    hyper.validate(l)?;
    let step = hyper.resolved_step(l);
    let mu = T::lit(1.0 - step * hyper.rho);
    let step_t = T::lit(step);
    let rho = T::lit(hyper.rho);
    let thresh = T::lit(hyper.lambda / hyper.rho);

    let mut st = AdmmState::init(y_s, op)?;
    let mut trace = Vec::with_capacity(hyper.outer_iters);
    let mut minimum = f64::INFINITY;
    for it in 0..hyper.outer_iters {
        for _ in 0..hyper.inner_gd_iters {
            st.x = gd_step(&st.x, &st.z, &st.u, y_s, op, mu, step_t)?;
        }
        let v = st.x.add(&st.u)?;
        st.z = soft_threshold(&v, Threshold::Scalar(thresh))?;
        let r = st.x.sub(&st.z)?;
        st.u = match hyper.dual_update {
            DualUpdate::Printed => st.u.add(&r.scale_real(rho))?,
            DualUpdate::Scaled => st.u.add(&r)?,
        };
        if !(st.x.is_finite() && st.u.is_finite()) {
            return Err(Error::NonFinite { op: "admm" });
        }
        let obj = objective(y_s, op, &st.z, hyper.lambda)?;
        trace.push(obj);
        minimum = minimum.min(obj);
        if !obj.is_finite() || obj > 10.0 * minimum {
            return Err(Error::Divergence {
                iteration: it,
                objective: obj,
                minimum,
                trace,
            });
        }
    }
    Ok(AdmmOutput {
        image: st.z.clone(),
        state: st,
        trace,
    })
}

/// Grid search over `lambda`: runs ADMM for each value and keeps the result
/// with the lowest `score`. Diverging values are skipped.
pub fn tune_lambda<T: Scalar>(
    y_s: &ComplexTensor<T>,
    op: &ForwardOperator<T>,
    base: &AdmmHyper,
    lambdas: &[f64],
    mut score: impl FnMut(&ComplexTensor<T>) -> f64,
) -> Result<(f64, AdmmOutput<T>)> {
    let mut best: Option<(f64, f64, AdmmOutput<T>)> = None;
    for &lambda in lambdas {
        let hyper = AdmmHyper { lambda, ..base.clone() };
        let out = match admm_reconstruct(y_s, op, &hyper) {
            Ok(o) => o,
            Err(Error::Divergence { .. }) => continue,
            Err(e) => return Err(e),
        };
        let s = score(&out.image);
        if best.as_ref().is_none_or(|b| s < b.1) {
            best = Some((lambda, s, out));
        }
    }
    best.map(|(l, _, o)| (l, o))
        .ok_or_else(|| Error::InvalidArgument("every lambda in the grid diverged".into()))
}

/// Scalar multiple `c` minimising `||c a - b||`.
pub fn best_fit_scale<T: Scalar>(a: &ComplexTensor<T>, b: &ComplexTensor<T>) -> Result<Complex<T>> {
    let num = a.inner(b)?;
    let den = a.norm_sqr();
    if den == T::zero() {
        return Ok(Complex::new(T::zero(), T::zero()));
    }
    Ok(num / den)
}
