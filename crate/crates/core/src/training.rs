//! Self-supervised and supervised training of ISAR-Net.
//!
//! Losses are assembled on an autodiff graph:
//!
//! * `ss-clean`: `||Y_s - A X1 B||^2 + alpha sum_g ||T_g X1 - f_u(A T_g X1 B)||^2`
//!   with `X1 = f_u(Y_s)`.
//! * `ss-noisy`: the echo is recorrupted into `(Y1, Y2)`, `Yd = f_d(Y1)`,
//!   `X1 = f_u(Yd)`, and the loss is `||Yd - Y2||^2 + ||A X1 B - Y2||^2`
//!   plus the same rotation term.
//! * `supervised`: `||f_u(Y_s) - X_true||^2`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::denoiser::{denoise_graph, estimate_sigma, recorrupt, DenoiserParams};
use crate::equivariance::check_necessary_condition;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_complex, mean_record, MetricsRecord};
use crate::net::{net_forward, net_graph, NetParams, OperatorVars};
use crate::rng;
use crate::scalar::Scalar;
use crate::signal::ForwardOperator;
use crate::tensor::{ComplexTensor, RotationMap, Tensor};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    #[default]
    SsClean,
    SsNoisy,
    Supervised,
}

impl TrainMode {
    pub fn is_self_supervised(self) -> bool {
        !matches!(self, TrainMode::Supervised)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub lr_halving_period: usize,
    pub alpha: f64,
    pub num_rotations: usize,
    pub batch: usize,
    pub seed: u64,
    pub mode: TrainMode,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Blocks gradients through the second network pass of the rotation term.
    pub ec_stop_gradient: bool,
    /// Fraction of the dataset held out for per-epoch validation.
    pub val_fraction: f64,
    /// Noise level for recorruption; estimated per echo when absent.
    pub sigma: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 1e-4,
            lr_halving_period: 50,
            alpha: 1.0,
            num_rotations: 3,
            batch: 4,
            seed: 0,
            mode: TrainMode::SsClean,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            ec_stop_gradient: false,
            val_fraction: 0.1,
            sigma: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.epochs == 0 {
            return bad("train.epochs must be at least 1");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("train.lr must be >= 0");
        }
        if self.lr_halving_period == 0 {
            return bad("train.lr_halving_period must be positive");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("train.alpha must be >= 0");
        }
        if self.batch == 0 {
            return bad("train.batch must be positive");
        }
        if self.mode.is_self_supervised() && self.num_rotations == 0 {
            return bad("train.num_rotations must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("train.adam_eps must be positive");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("train.val_fraction must lie in [0, 1)");
        }
        if let Some(s) = self.sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return bad("train.sigma must be >= 0");
            }
        }
        Ok(())
    }

    /// Learning rate of 0-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * 0.5f64.powi((epoch / self.lr_halving_period) as i32)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_n: f64,
    pub l_mc: f64,
    pub l_ec: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn accumulate(&mut self, o: &LossBreakdown, w: f64) {
        self.l_n += w * o.l_n;
        self.l_mc += w * o.l_mc;
        self.l_ec += w * o.l_ec;
        self.total += w * o.total;
    }
}

/// `count` i.i.d. angles, uniform on `[0, 360)` degrees.
pub fn sample_rotations(count: usize, seed: u64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidArgument("at least one rotation is required".into()));
    }
    let mut r = rng::seeded(seed);
    Ok((0..count).map(|_| r.random_range(0.0..360.0)).collect())
}

/// One training example: a sampled echo and, when known, the true image.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainItem<T: Scalar = f64> {
    pub echo: ComplexTensor<T>,
    pub truth: Option<ComplexTensor<T>>,
    /// Known noise level of `echo`, used for recorruption when the config
    /// gives none.
    pub sigma: Option<f64>,
}

/// Everything the loss of one example depends on besides parameters.
#[derive(Clone, Debug)]
pub struct LossSpec<'a, T: Scalar> {
    pub mode: TrainMode,
    pub angles: &'a [f64],
    pub alpha: f64,
    pub ec_stop_gradient: bool,
    pub sigma: f64,
    pub recorrupt_seed: u64,
    pub truth: Option<&'a ComplexTensor<T>>,
}

struct LossVars {
    total: Var,
    l_n: Option<Var>,
    l_mc: Option<Var>,
    l_ec: Option<Var>,
}

fn rotation_term<T: Scalar>(
    g: &mut Graph<T>,
    x1: Var,
    ops: &OperatorVars<T>,
    nv: &crate::net::NetVars,
    angles: &[f64],
    stop: bool,
) -> Result<Var> {
    let s = g.shape(x1).to_vec();
    let mut acc: Option<Var> = None;
    for &a in angles {
        let map = Arc::new(RotationMap::new(s[1], s[2], a));
        let x2 = g.rotate(x1, map)?;
        let y2 = ops.forward(g, x2)?;
        let x3 = net_graph(g, y2, ops, nv)?;
        let x3 = if stop { g.detach(x3) } else { x3 };
        let d = g.sub(x2, x3)?;
        let l = g.sum_squares(d)?;
        acc = Some(match acc {
            Some(prev) => g.add(prev, l)?,
            None => l,
        });
    }
    acc.ok_or_else(|| Error::InvalidArgument("at least one rotation is required".into()))
}

fn build_loss<T: Scalar>(
    g: &mut Graph<T>,
    echo: &ComplexTensor<T>,
    op: &ForwardOperator<T>,
    net: &NetParams<T>,
    den: Option<&DenoiserParams<T>>,
    spec: &LossSpec<'_, T>,
    trainable: bool,
) -> Result<LossVars> {
    let (ns, ms) = op.echo_shape();
    if echo.shape() != [ns, ms] {
        return Err(Error::shape("loss", format!("echo {:?} vs {ns}x{ms}", echo.shape())));
    }
    let nv = net.bind(g, trainable);
    let ops = OperatorVars::bind(g, op);
    let alpha = T::lit(spec.alpha);
    match spec.mode {
        TrainMode::SsClean => {
            let y = g.constant(echo.to_planar());
            let x1 = net_graph(g, y, &ops, &nv)?;
            let ax = ops.forward(g, x1)?;
            let r = g.sub(y, ax)?;
            let l_mc = g.sum_squares(r)?;
            let l_ec = rotation_term(g, x1, &ops, &nv, spec.angles, spec.ec_stop_gradient)?;
            let w = g.scale(l_ec, alpha)?;
            let total = g.add(l_mc, w)?;
            Ok(LossVars { total, l_n: None, l_mc: Some(l_mc), l_ec: Some(l_ec) })
        }
        TrainMode::SsNoisy => {
            let den = den.ok_or_else(|| Error::InvalidArgument("noisy mode needs a denoiser".into()))?;
            let pair = recorrupt(echo, spec.sigma, spec.recorrupt_seed)?;
            let dv = den.bind(g, trainable);
            let y1 = g.constant(pair.y1.to_planar());
            let y2 = g.constant(pair.y2.to_planar());
            let yd = denoise_graph(g, y1, &dv)?;
            let dn = g.sub(yd, y2)?;
            let l_n = g.sum_squares(dn)?;
            let x1 = net_graph(g, yd, &ops, &nv)?;
            let ax = ops.forward(g, x1)?;
            let r = g.sub(ax, y2)?;
            let l_mc = g.sum_squares(r)?;
            let l_ec = rotation_term(g, x1, &ops, &nv, spec.angles, spec.ec_stop_gradient)?;
            let w = g.scale(l_ec, alpha)?;
            let s = g.add(l_n, l_mc)?;
            let total = g.add(s, w)?;
            Ok(LossVars { total, l_n: Some(l_n), l_mc: Some(l_mc), l_ec: Some(l_ec) })
        }
        TrainMode::Supervised => {
            let truth = spec
                .truth
                .ok_or_else(|| Error::InvalidArgument("supervised mode needs a true image".into()))?;
            let (p, q) = op.image_shape();
            if truth.shape() != [p, q] {
                return Err(Error::shape("loss_supervised", format!("truth {:?} vs {p}x{q}", truth.shape())));
            }
            let y = g.constant(echo.to_planar());
            let x1 = net_graph(g, y, &ops, &nv)?;
            let t = g.constant(truth.to_planar());
            let d = g.sub(x1, t)?;
            let total = g.sum_squares(d)?;
            Ok(LossVars { total, l_n: None, l_mc: None, l_ec: None })
        }
    }
}

fn read(g: &Graph<impl Scalar>, v: Option<Var>) -> f64 {
    v.map(|v| g.value(v).item().to_f64_lossy()).unwrap_or(0.0)
}

/// Loss of one example and, when `with_grads`, gradients keyed by
/// checkpoint name.
pub fn loss_and_grads<T: Scalar>(
    echo: &ComplexTensor<T>,
    op: &ForwardOperator<T>,
    net: &NetParams<T>,
    den: Option<&DenoiserParams<T>>,
    spec: &LossSpec<'_, T>,
    with_grads: bool,
) -> Result<(LossBreakdown, Option<BTreeMap<String, Tensor<T>>>)> {
    let mut g = Graph::new();
    let lv = build_loss(&mut g, echo, op, net, den, spec, with_grads)?;
    let breakdown = LossBreakdown {
        l_n: read(&g, lv.l_n),
        l_mc: read(&g, lv.l_mc),
        l_ec: read(&g, lv.l_ec),
        total: read(&g, Some(lv.total)),
    };
    let grads = if with_grads { Some(g.backward(lv.total)?.named()) } else { None };
    Ok((breakdown, grads))
}

/// Clean-echo self-supervised loss.
pub fn loss_ss_clean<T: Scalar>(
    y_s: &ComplexTensor<T>,
    op: &ForwardOperator<T>,
    net: &NetParams<T>,
    angles: &[f64],
    alpha: f64,
) -> Result<LossBreakdown> {
    let spec = LossSpec {
        mode: TrainMode::SsClean,
        angles,
        alpha,
        ec_stop_gradient: false,
        sigma: 0.0,
        recorrupt_seed: 0,
        truth: None,
    };
    Ok(loss_and_grads(y_s, op, net, None, &spec, false)?.0)
}

/// Noisy-echo self-supervised loss with recorruption seed `seed`.
#[allow(clippy::too_many_arguments)]
pub fn loss_ss_noisy<T: Scalar>(
    y_n: &ComplexTensor<T>,
    op: &ForwardOperator<T>,
    net: &NetParams<T>,
    den: &DenoiserParams<T>,
    sigma: f64,
    angles: &[f64],
    alpha: f64,
    seed: u64,
) -> Result<LossBreakdown> {
    let spec = LossSpec {
        mode: TrainMode::SsNoisy,
        angles,
        alpha,
        ec_stop_gradient: false,
        sigma,
        recorrupt_seed: seed,
        truth: None,
    };
    Ok(loss_and_grads(y_n, op, net, Some(den), &spec, false)?.0)
}

/// `||f_u(Y_s) - X_true||^2`.
pub fn loss_supervised<T: Scalar>(
    y_s: &ComplexTensor<T>,
    op: &ForwardOperator<T>,
    net: &NetParams<T>,
    truth: &ComplexTensor<T>,
) -> Result<f64> {
    let spec = LossSpec {
        mode: TrainMode::Supervised,
        angles: &[],
        alpha: 0.0,
        ec_stop_gradient: false,
        sigma: 0.0,
        recorrupt_seed: 0,
        truth: Some(truth),
    };
    Ok(loss_and_grads(y_s, op, net, None, &spec, false)?.0.total)
}

/// Adam with bias correction over named tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T: Scalar = f64> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub steps: u64,
    pub m: BTreeMap<String, Tensor<T>>,
    pub v: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { beta1, beta2, eps, steps: 0, m: BTreeMap::new(), v: BTreeMap::new() }
    }

    pub fn step(&mut self, params: &mut BTreeMap<String, Tensor<T>>, grads: &BTreeMap<String, Tensor<T>>, lr: f64) {
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let (one, lr_t, eps) = (T::one(), T::lit(lr), T::lit(self.eps));
        let (c1, c2) = (T::lit(c1), T::lit(c2));
        for (name, p) in params.iter_mut() {
            let Some(gr) = grads.get(name) else { continue };
            let m = self.m.entry(name.clone()).or_insert_with(|| Tensor::zeros(p.shape()));
            let v = self.v.entry(name.clone()).or_insert_with(|| Tensor::zeros(p.shape()));
            let pd = p.data_mut();
            for i in 0..pd.len() {
                let gi = gr.data()[i];
                let mi = b1 * m.data()[i] + (one - b1) * gi;
                let vi = b2 * v.data()[i] + (one - b2) * gi * gi;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                pd[i] -= lr_t * (mi / c1) / ((vi / c2).sqrt() + eps);
            }
        }
    }

    /// Moments as `adam.m.<name>`, `adam.v.<name>` plus `adam.steps`.
    pub fn named(&self) -> Vec<(String, Tensor<T>)> {
        let mut out = vec![("adam.steps".to_string(), Tensor::scalar(T::lit(self.steps as f64)))];
        out.extend(self.m.iter().map(|(k, t)| (format!("adam.m.{k}"), t.clone())));
        out.extend(self.v.iter().map(|(k, t)| (format!("adam.v.{k}"), t.clone())));
        out
    }

    pub fn from_named(map: &BTreeMap<String, Tensor<T>>, beta1: f64, beta2: f64, eps: f64) -> Self {
        let mut a = Self::new(beta1, beta2, eps);
        for (k, t) in map {
            if k == "adam.steps" {
                a.steps = t.item().to_f64_lossy() as u64;
            } else if let Some(n) = k.strip_prefix("adam.m.") {
                a.m.insert(n.to_string(), t.clone());
            } else if let Some(n) = k.strip_prefix("adam.v.") {
                a.v.insert(n.to_string(), t.clone());
            }
        }
        a
    }
}

/// Parameters and optimiser state carried between epochs.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState<T: Scalar = f64> {
    pub net: NetParams<T>,
    pub denoiser: Option<DenoiserParams<T>>,
    pub adam: Adam<T>,
    /// Completed epochs.
    pub epoch: usize,
}

impl<T: Scalar> TrainState<T> {
    pub fn new(net: NetParams<T>, denoiser: Option<DenoiserParams<T>>, cfg: &TrainConfig) -> Self {
        Self { net, denoiser, adam: Adam::new(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps), epoch: 0 }
    }

    /// All learnable tensors by checkpoint name.
    pub fn params(&self) -> BTreeMap<String, Tensor<T>> {
        let mut out: BTreeMap<_, _> = self.net.named().into_iter().collect();
        if let Some(d) = &self.denoiser {
            out.extend(d.named());
        }
        out
    }

    fn set_params(&mut self, p: &BTreeMap<String, Tensor<T>>) -> Result<()> {
        self.net = NetParams::from_named(p, self.net.inner_gd, self.net.lfat_input)?;
        if let Some(d) = &self.denoiser {
            self.denoiser = Some(DenoiserParams::from_named(p, d.residual)?);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub val: Option<MetricsRecord>,
    pub lr: f64,
}

pub const HISTORY_HEADER: &str = "epoch,l_n,l_mc,l_ec,total,val_nmse,val_psnr_db,val_ssim,lr";

impl EpochRecord {
    pub fn csv_row(&self) -> String {
        let v = self.val.unwrap_or(MetricsRecord { nmse: f64::NAN, psnr: f64::NAN, ssim: f64::NAN });
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.epoch, self.loss.l_n, self.loss.l_mc, self.loss.l_ec, self.loss.total, v.nmse, v.psnr, v.ssim, self.lr
        )
    }
}

/// Number of items held out for validation.
pub fn validation_count(n: usize, fraction: f64) -> usize {
    if n < 2 {
        return 0;
    }
    ((n as f64 * fraction).round() as usize).min(n - 1)
}

/// Mean metrics of `items` (those with a truth) against the network output.
pub fn validate_net<T: Scalar>(
    items: &[TrainItem<T>],
    op: &ForwardOperator<T>,
    net: &NetParams<T>,
    den: Option<&DenoiserParams<T>>,
) -> Result<Option<MetricsRecord>> {
    let recs = items
        .iter()
        .filter_map(|it| it.truth.as_ref().map(|t| (it, t)))
        .map(|(it, truth)| {
            let y = match den {
                Some(d) => crate::denoiser::denoise_forward(&it.echo, d)?,
                None => it.echo.clone(),
            };
            evaluate_complex(truth, &net_forward(&y, op, net)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_record(&recs))
}

const TAG_SHUFFLE: u64 = 1;
const TAG_ROTATION: u64 = 2;
const TAG_RECORRUPT: u64 = 3;

fn item_seed(seed: u64, tag: u64, epoch: usize, index: usize) -> u64 {
    rng::derive_seed(rng::derive_seed(rng::derive_seed(seed, tag), epoch as u64), index as u64)
}

/// Trains for `cfg.epochs` further epochs starting from `state`. The last
/// `val_fraction` of `dataset` is held out for validation. `on_epoch` sees
/// every finished epoch.
pub fn train_from<T: Scalar>(
    mut state: TrainState<T>,
    dataset: &[TrainItem<T>],
    op: &ForwardOperator<T>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord, &TrainState<T>),
) -> Result<(TrainState<T>, Vec<EpochRecord>)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("training dataset is empty".into()));
    }
    if cfg.mode.is_self_supervised() && !check_necessary_condition(cfg.num_rotations, op.pattern().gamma()) {
        return Err(Error::RankCondition {
            rotations: cfg.num_rotations,
            gamma: op.pattern().gamma_f64(),
            product: cfg.num_rotations as f64 * op.pattern().gamma_f64(),
        });
    }
    if cfg.mode == TrainMode::Supervised && dataset.iter().any(|d| d.truth.is_none()) {
        return Err(Error::InvalidArgument("supervised training needs a truth for every echo".into()));
    }
    if cfg.mode == TrainMode::SsNoisy && state.denoiser.is_none() {
        return Err(Error::InvalidArgument("noisy mode needs a denoiser".into()));
    }
    let n_val = validation_count(dataset.len(), cfg.val_fraction);
    let (train_set, val_set) = dataset.split_at(dataset.len() - n_val);
    let sigmas: Vec<f64> = match (cfg.mode, cfg.sigma) {
        (TrainMode::SsNoisy, None) => train_set
            .iter()
            .map(|it| it.sigma.map_or_else(|| estimate_sigma(&it.echo), Ok))
            .collect::<Result<_>>()?,
        (_, s) => vec![s.unwrap_or(0.0); train_set.len()],
    };

    let mut params = state.params();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let epoch = state.epoch;
        let lr = cfg.lr_at(epoch);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng::seeded(rng::derive_seed(rng::derive_seed(cfg.seed, TAG_SHUFFLE), epoch as u64)));
        let mut epoch_loss = LossBreakdown::default();
        for (bi, batch) in order.chunks(cfg.batch).enumerate() {
            let results: Vec<Result<(LossBreakdown, BTreeMap<String, Tensor<T>>)>> = batch
                .par_iter()
                .map(|&i| {
                    let angles = if cfg.mode.is_self_supervised() {
                        sample_rotations(cfg.num_rotations, item_seed(cfg.seed, TAG_ROTATION, epoch, i))?
                    } else {
                        Vec::new()
                    };
                    let spec = LossSpec {
                        mode: cfg.mode,
                        angles: &angles,
                        alpha: cfg.alpha,
                        ec_stop_gradient: cfg.ec_stop_gradient,
                        sigma: sigmas[i],
                        recorrupt_seed: item_seed(cfg.seed, TAG_RECORRUPT, epoch, i),
                        truth: train_set[i].truth.as_ref(),
                    };
                    let (l, g) =
                        loss_and_grads(&train_set[i].echo, op, &state.net, state.denoiser.as_ref(), &spec, true)?;
                    Ok((l, g.unwrap_or_default()))
                })
                .collect();
            let w = 1.0 / batch.len() as f64;
            let mut grad_sum: BTreeMap<String, Tensor<T>> = BTreeMap::new();
            for r in results {
                let (l, g) = r.map_err(|e| match e {
                    e if e.is_numerical() => Error::TrainingNonFinite { epoch: epoch + 1, batch: bi },
                    other => other,
                })?;
                if !l.total.is_finite() {
                    return Err(Error::TrainingNonFinite { epoch: epoch + 1, batch: bi });
                }
                epoch_loss.accumulate(&l, 1.0 / train_set.len() as f64);
                for (k, t) in g {
                    match grad_sum.get_mut(&k) {
                        Some(acc) => acc.add_assign_slice(t.data()),
                        None => {
                            grad_sum.insert(k, t);
                        }
                    }
                }
            }
            let wt = T::lit(w);
            for t in grad_sum.values_mut() {
                t.data_mut().iter_mut().for_each(|v| *v *= wt);
            }
            state.adam.step(&mut params, &grad_sum, lr);
            if params.values().any(|t| !t.is_finite()) {
                return Err(Error::TrainingNonFinite { epoch: epoch + 1, batch: bi });
            }
            state.set_params(&params)?;
        }
        state.epoch += 1;
        let val = if val_set.is_empty() {
            None
        } else {
            validate_net(val_set, op, &state.net, state.denoiser.as_ref())?
        };
        let rec = EpochRecord { epoch: state.epoch, loss: epoch_loss, val, lr };
        on_epoch(&rec, &state);
        history.push(rec);
    }
    Ok((state, history))
}

/// Trains fresh parameters from epoch 0.
pub fn train<T: Scalar>(
    net: NetParams<T>,
    denoiser: Option<DenoiserParams<T>>,
    dataset: &[TrainItem<T>],
    op: &ForwardOperator<T>,
    cfg: &TrainConfig,
) -> Result<(TrainState<T>, Vec<EpochRecord>)> {
    train_from(TrainState::new(net, denoiser, cfg), dataset, op, cfg, |_, _| {})
}
