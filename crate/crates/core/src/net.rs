//! ISAR-Net: unrolled ADMM with learnable per-stage step sizes and a
//! convolutional local threshold.
//!
//! Each stage runs `inner_gd` gradient steps on X, shrinks `X + U` by a
//! per-pixel threshold predicted from `X + U` itself, and takes a dual step.
//! The network is evaluated on an [`autodiff::Graph`](crate::autodiff::Graph)
//! so the same code path serves inference and training.

use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;
use crate::signal::ForwardOperator;
use crate::solvers::AdmmState;
use crate::tensor::{ComplexTensor, Tensor};

/// What the threshold block sees of `X + U`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LfatInput {
    /// Real and imaginary planes as two channels.
    #[default]
    TwoChannel,
    /// Modulus as one channel.
    Magnitude,
}

impl LfatInput {
    pub fn channels(self) -> usize {
        match self {
            LfatInput::TwoChannel => 2,
            LfatInput::Magnitude => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub stages: usize,
    pub kernel: usize,
    pub features: usize,
    pub inner_gd: usize,
    pub lfat_input: LfatInput,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            stages: 12,
            kernel: 7,
            features: 16,
            inner_gd: 5,
            lfat_input: LfatInput::TwoChannel,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 {
            return Err(Error::InvalidArgument("net.stages must be at least 1".into()));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("net.kernel must be odd, got {}", self.kernel)));
        }
        if self.features == 0 || self.inner_gd == 0 {
            return Err(Error::InvalidArgument("net.features and net.inner_gd must be positive".into()));
        }
        Ok(())
    }
}

/// Learnable parameters of one stage.
///
/// `lx` multiplies `1 / L` with `L` the operator's Lipschitz constant, so
/// the gradient step actually taken is `lx / L`.
#[derive(Clone, Debug, PartialEq)]
pub struct StageParams<T: Scalar = f64> {
    pub mu: T,
    pub lx: T,
    pub rho: T,
    /// `[F, C, k, k]`.
    pub c1: Tensor<T>,
    /// `[F]`.
    pub b1: Tensor<T>,
    /// `[1, F, k, k]`.
    pub c2: Tensor<T>,
    /// `[1]`.
    pub b2: Tensor<T>,
}

impl<T: Scalar> StageParams<T> {
    pub fn kernel(&self) -> usize {
        self.c1.shape()[2]
    }

    pub fn features(&self) -> usize {
        self.c1.shape()[0]
    }

    /// Zeroes every threshold weight and bias.
    pub fn zero_threshold(&mut self) {
        for t in [&mut self.c1, &mut self.b1, &mut self.c2, &mut self.b2] {
            t.data_mut().iter_mut().for_each(|v| *v = T::zero());
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetParams<T: Scalar = f64> {
    pub stages: Vec<StageParams<T>>,
    pub inner_gd: usize,
    pub lfat_input: LfatInput,
}

pub type NetState<T = f64> = AdmmState<T>;

fn he_normal<T: Scalar>(shape: &[usize], fan_in: usize, r: &mut rng::Rng) -> Tensor<T> {
    let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
    Tensor::from_fn(shape, |_| T::lit(dist.sample(r)))
}

/// Fresh parameters: `mu = 0.9`, `lx = 1`, `rho = 1`, He-normal kernels,
/// zero biases.
pub fn init_net<T: Scalar>(cfg: &NetConfig, seed: u64) -> Result<NetParams<T>> {
    cfg.validate()?;
    let mut r = rng::seeded(seed);
    let (k, f, c) = (cfg.kernel, cfg.features, cfg.lfat_input.channels());
    let stages = (0..cfg.stages)
        .map(|_| StageParams {
            mu: T::lit(0.9),
            lx: T::one(),
            rho: T::one(),
            c1: he_normal(&[f, c, k, k], c * k * k, &mut r),
            b1: Tensor::zeros(&[f]),
            c2: he_normal(&[1, f, k, k], f * k * k, &mut r),
            b2: Tensor::zeros(&[1]),
        })
        .collect();
    Ok(NetParams {
        stages,
        inner_gd: cfg.inner_gd,
        lfat_input: cfg.lfat_input,
    })
}

const STAGE_FIELDS: [&str; 7] = ["mu", "lx", "rho", "c1", "b1", "c2", "b2"];

impl<T: Scalar> NetParams<T> {
    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn config(&self) -> NetConfig {
        let s = &self.stages[0];
        NetConfig {
            stages: self.stages.len(),
            kernel: s.kernel(),
            features: s.features(),
            inner_gd: self.inner_gd,
            lfat_input: self.lfat_input,
        }
    }

    /// Checkpoint tensors `stage{k}.{mu,lx,rho,c1,b1,c2,b2}`, `k` from 0.
    pub fn named(&self) -> Vec<(String, Tensor<T>)> {
        let mut out = Vec::with_capacity(7 * self.stages.len());
        for (k, s) in self.stages.iter().enumerate() {
            let tensors = [
                Tensor::scalar(s.mu),
                Tensor::scalar(s.lx),
                Tensor::scalar(s.rho),
                s.c1.clone(),
                s.b1.clone(),
                s.c2.clone(),
                s.b2.clone(),
            ];
            for (field, t) in STAGE_FIELDS.iter().zip(tensors) {
                out.push((format!("stage{k}.{field}"), t));
            }
        }
        out
    }

    /// Inverse of [`NetParams::named`]; other keys are ignored.
    pub fn from_named(
        map: &BTreeMap<String, Tensor<T>>,
        inner_gd: usize,
        lfat_input: LfatInput,
    ) -> Result<Self> {
        let mut stages = Vec::new();
        while map.contains_key(&format!("stage{}.mu", stages.len())) {
            let k = stages.len();
            let get = |f: &str| -> Result<Tensor<T>> {
                map.get(&format!("stage{k}.{f}"))
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("checkpoint lacks stage{k}.{f}")))
            };
            let scalar = |f: &str| -> Result<T> {
                let t = get(f)?;
                if t.len() != 1 {
                    return Err(Error::InvalidArgument(format!("stage{k}.{f} must hold one value")));
                }
                Ok(t.item())
            };
            let s = StageParams {
                mu: scalar("mu")?,
                lx: scalar("lx")?,
                rho: scalar("rho")?,
                c1: get("c1")?,
                b1: get("b1")?,
                c2: get("c2")?,
                b2: get("b2")?,
            };
            let (c1, c2) = (s.c1.shape(), s.c2.shape());
            let ok = c1.len() == 4
                && c2.len() == 4
                && c1[1] == lfat_input.channels()
                && c1[2] == c1[3]
                && c1[2] % 2 == 1
                && c2 == [1, c1[0], c1[2], c1[3]]
                && s.b1.shape() == [c1[0]]
                && s.b2.len() == 1;
            if !ok {
                return Err(Error::InvalidArgument(format!("stage{k} tensors have inconsistent shapes")));
            }
            stages.push(s);
        }
        if stages.is_empty() {
            return Err(Error::InvalidArgument("checkpoint holds no network stages".into()));
        }
        let p = Self { stages, inner_gd, lfat_input };
        if !p.is_finite() {
            return Err(Error::NonFinite { op: "checkpoint" });
        }
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.is_finite())
    }

    /// Places the parameters on a graph, as trainable leaves or constants.
    pub fn bind(&self, g: &mut Graph<T>, trainable: bool) -> NetVars {
        let mut leaf = |name: String, t: Tensor<T>| {
            if trainable {
                g.param(name, t)
            } else {
                g.constant(t)
            }
        };
        let stages = self
            .stages
            .iter()
            .enumerate()
            .map(|(k, s)| StageVars {
                mu: leaf(format!("stage{k}.mu"), Tensor::scalar(s.mu)),
                lx: leaf(format!("stage{k}.lx"), Tensor::scalar(s.lx)),
                rho: leaf(format!("stage{k}.rho"), Tensor::scalar(s.rho)),
                c1: leaf(format!("stage{k}.c1"), s.c1.clone()),
                b1: leaf(format!("stage{k}.b1"), s.b1.clone()),
                c2: leaf(format!("stage{k}.c2"), s.c2.clone()),
                b2: leaf(format!("stage{k}.b2"), s.b2.clone()),
                pad: s.kernel() / 2,
            })
            .collect();
        NetVars {
            stages,
            inner_gd: self.inner_gd,
            lfat_input: self.lfat_input,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StageVars {
    pub mu: Var,
    pub lx: Var,
    pub rho: Var,
    pub c1: Var,
    pub b1: Var,
    pub c2: Var,
    pub b2: Var,
    pad: usize,
}

#[derive(Clone, Debug)]
pub struct NetVars {
    pub stages: Vec<StageVars>,
    pub inner_gd: usize,
    pub lfat_input: LfatInput,
}

/// Forward-operator factors as planar graph constants.
#[derive(Clone, Copy, Debug)]
pub struct OperatorVars<T> {
    pub a: Var,
    pub a_h: Var,
    pub b: Var,
    pub b_h: Var,
    pub inv_lipschitz: T,
}

impl<T: Scalar> OperatorVars<T> {
    pub fn bind(g: &mut Graph<T>, op: &ForwardOperator<T>) -> Self {
        Self {
            a: g.constant(op.a_s().to_planar()),
            a_h: g.constant(op.a_s_h().to_planar()),
            b: g.constant(op.b_s().to_planar()),
            b_h: g.constant(op.b_s_h().to_planar()),
            inv_lipschitz: T::one() / op.lipschitz(),
        }
    }

    /// `A_s X B_s` for planar `x`.
    pub fn forward(&self, g: &mut Graph<T>, x: Var) -> Result<Var> {
        let ax = g.cmatmul(self.a, x)?;
        g.cmatmul(ax, self.b)
    }

    /// `A_s^H Y B_s^H` for planar `y`.
    pub fn adjoint(&self, g: &mut Graph<T>, y: Var) -> Result<Var> {
        let ay = g.cmatmul(self.a_h, y)?;
        g.cmatmul(ay, self.b_h)
    }
}

/// Planar iterates on a graph.
#[derive(Clone, Copy, Debug)]
pub struct StateVars {
    pub x: Var,
    pub z: Var,
    pub u: Var,
}

/// Threshold map `relu(C2 relu(C1 v + b1) + b2)` of planar `v`, `[1, P, Q]`.
pub fn lfat_graph<T: Scalar>(g: &mut Graph<T>, v: Var, sv: &StageVars, input: LfatInput) -> Result<Var> {
    let inp = match input {
        LfatInput::TwoChannel => v,
        LfatInput::Magnitude => {
            let m = g.magnitude(v)?;
            let s = g.shape(m).to_vec();
            g.reshape(m, &[1, s[0], s[1]])?
        }
    };
    let h = g.conv2d(inp, sv.c1, Some(sv.b1), sv.pad)?;
    let h = g.relu(h)?;
    let t = g.conv2d(h, sv.c2, Some(sv.b2), sv.pad)?;
    g.relu(t)
}

/// One unrolled stage.
pub fn stage_graph<T: Scalar>(
    g: &mut Graph<T>,
    st: StateVars,
    sv: &StageVars,
    ops: &OperatorVars<T>,
    y: Var,
    inner_gd: usize,
    input: LfatInput,
) -> Result<StateVars> {
    let StateVars { mut x, z, u } = st;
    let one_minus_mu = g.affine(sv.mu, -T::one(), T::one())?;
    let step = g.scale(sv.lx, ops.inv_lipschitz)?;
    let z_minus_u = g.sub(z, u)?;
    let pull = g.scale_by(z_minus_u, one_minus_mu)?;
    for _ in 0..inner_gd {
        let axb = ops.forward(g, x)?;
        let r = g.sub(axb, y)?;
        let grad = ops.adjoint(g, r)?;
        let keep = g.scale_by(x, sv.mu)?;
        let descent = g.scale_by(grad, step)?;
        let sum = g.add(keep, pull)?;
        x = g.sub(sum, descent)?;
    }
    let v = g.add(x, u)?;
    let t = lfat_graph(g, v, sv, input)?;
    let z = g.soft_threshold(v, t)?;
    let diff = g.sub(x, z)?;
    let dual = g.scale_by(diff, sv.rho)?;
    let u = g.add(u, dual)?;
    Ok(StateVars { x, z, u })
}

fn tag_stage(stage: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite { op } => Error::StageNonFinite { stage, op },
        other => other,
    }
}

/// `X = Z = A_s^H Y B_s^H / L`, `U = 0`.
pub fn init_state_graph<T: Scalar>(g: &mut Graph<T>, ops: &OperatorVars<T>, y: Var) -> Result<StateVars> {
    let adj = ops.adjoint(g, y)?;
    let x = g.scale(adj, ops.inv_lipschitz)?;
    let u = g.constant(Tensor::zeros(g.shape(x)));
    Ok(StateVars { x, z: x, u })
}

/// Full network on planar echo `y`; returns the final planar `Z`.
pub fn net_graph<T: Scalar>(g: &mut Graph<T>, y: Var, ops: &OperatorVars<T>, nv: &NetVars) -> Result<Var> {
    if nv.stages.is_empty() {
        return Err(Error::InvalidArgument("network has no stages".into()));
    }
    let mut st = init_state_graph(g, ops, y)?;
    for (k, sv) in nv.stages.iter().enumerate() {
        st = stage_graph(g, st, sv, ops, y, nv.inner_gd, nv.lfat_input).map_err(tag_stage(k))?;
    }
    Ok(st.z)
}

fn planar_image<T: Scalar>(g: &Graph<T>, v: Var) -> Result<ComplexTensor<T>> {
    ComplexTensor::from_planar(g.value(v))
}

fn single_stage<T: Scalar>(stage: &StageParams<T>, input: LfatInput, inner_gd: usize) -> NetParams<T> {
    NetParams {
        stages: vec![stage.clone()],
        inner_gd,
        lfat_input: input,
    }
}

/// Threshold map of one stage for image `v`, `[P, Q]`, nonnegative.
pub fn lfat_threshold<T: Scalar>(
    v: &ComplexTensor<T>,
    stage: &StageParams<T>,
    input: LfatInput,
) -> Result<Tensor<T>> {
    let mut g = Graph::new();
    let nv = single_stage(stage, input, 1).bind(&mut g, false);
    let vv = g.constant(v.to_planar());
    let t = lfat_graph(&mut g, vv, &nv.stages[0], input)?;
    g.value(t).clone().reshape(v.shape())
}

/// One stage applied to `state`.
pub fn stage_forward<T: Scalar>(
    state: &NetState<T>,
    stage: &StageParams<T>,
    inner_gd: usize,
    input: LfatInput,
    op: &ForwardOperator<T>,
    y_s: &ComplexTensor<T>,
) -> Result<NetState<T>> {
    let mut g = Graph::new();
    let nv = single_stage(stage, input, inner_gd).bind(&mut g, false);
    let ops = OperatorVars::bind(&mut g, op);
    let y = g.constant(y_s.to_planar());
    let st = StateVars {
        x: g.constant(state.x.to_planar()),
        z: g.constant(state.z.to_planar()),
        u: g.constant(state.u.to_planar()),
    };
    let out = stage_graph(&mut g, st, &nv.stages[0], &ops, y, inner_gd, input).map_err(tag_stage(0))?;
    Ok(NetState {
        x: planar_image(&g, out.x)?,
        z: planar_image(&g, out.z)?,
        u: planar_image(&g, out.u)?,
    })
}

/// Reconstruction `f_u(Y_s)`.
pub fn net_forward<T: Scalar>(
    y_s: &ComplexTensor<T>,
    op: &ForwardOperator<T>,
    params: &NetParams<T>,
) -> Result<ComplexTensor<T>> {
    let mut g = Graph::new();
    let nv = params.bind(&mut g, false);
    let ops = OperatorVars::bind(&mut g, op);
    let (ns, ms) = op.echo_shape();
    if y_s.shape() != [ns, ms] {
        return Err(Error::shape("net_forward", format!("echo {:?} vs {ns}x{ms}", y_s.shape())));
    }
    let y = g.constant(y_s.to_planar());
    let z = net_graph(&mut g, y, &ops, &nv)?;
    planar_image(&g, z)
}
