mod common;

use common::*;
use ssisar_core::denoiser::{init_denoiser, DenoiserConfig};
use ssisar_core::error::Error;
use ssisar_core::net::{init_net, NetConfig, NetParams};
use ssisar_core::signal::{ForwardOperator, SamplingMode};
use ssisar_core::training::{
    loss_and_grads, loss_ss_clean, loss_ss_noisy, sample_rotations, train, LossSpec, TrainConfig, TrainItem, TrainMode,
};

fn setup(keep: f64) -> (ForwardOperator<f64>, Vec<TrainItem<f64>>, NetParams<f64>) {
    setup2(keep, keep)
}

fn setup2(kr: f64, ka: f64) -> (ForwardOperator<f64>, Vec<TrainItem<f64>>, NetParams<f64>) {
    let (_, _, _, op) = desk_operator(12, 12, kr, ka, SamplingMode::UniformRandom, 1);
    let items = (0..5)
        .map(|i| {
            let truth = random_complex(12, 12, 50 + i).map_sparse();
            let echo = op.forward(&truth).unwrap();
            TrainItem { echo, truth: Some(truth), sigma: None }
        })
        .collect();
    let net = init_net(&NetConfig { stages: 2, kernel: 3, features: 4, inner_gd: 2, ..NetConfig::default() }, 2).unwrap();
    (op, items, net)
}

trait Sparse {
    fn map_sparse(self) -> Self;
}

impl Sparse for ssisar_core::ComplexTensor<f64> {
    /// Keeps roughly one entry in eight.
    fn map_sparse(mut self) -> Self {
        let n = self.len();
        for i in 0..n {
            if i % 8 != 3 {
                self.set_flat(i, C64::new(0.0, 0.0));
            }
        }
        self
    }
}

fn small_cfg(mode: TrainMode) -> TrainConfig {
    TrainConfig { epochs: 2, lr: 1e-3, batch: 2, seed: 9, mode, val_fraction: 0.2, ..TrainConfig::default() }
}

#[test]
fn total_is_affine_in_alpha() {
    let (op, items, net) = setup(0.75);
    let angles = [40.0, 200.0];
    let y = &items[0].echo;
    let total = |a: f64| loss_ss_clean(y, &op, &net, &angles, a).unwrap().total;
    let (t0, t1, t2) = (total(0.0), total(0.7), total(1.4));
    assert!(((t2 - t0) - 2.0 * (t1 - t0)).abs() < 1e-10 * (1.0 + t2.abs()));

    let den = init_denoiser(&DenoiserConfig { base: 2, residual: false }, 3).unwrap();
    let noisy = |a: f64| loss_ss_noisy(y, &op, &net, &den, 0.1, &angles, a, 4).unwrap().total;
    let (n0, n1, n2) = (noisy(0.0), noisy(0.7), noisy(1.4));
    assert!(((n2 - n0) - 2.0 * (n1 - n0)).abs() < 1e-10 * (1.0 + n2.abs()));
}

#[test]
fn total_is_the_weighted_sum_of_terms() {
    let (op, items, net) = setup(0.75);
    let den = init_denoiser(&DenoiserConfig { base: 2, residual: false }, 3).unwrap();
    let angles = [15.0, 95.0, 300.0];
    for (mode, d) in [(TrainMode::SsClean, None), (TrainMode::SsNoisy, Some(&den))] {
        let spec = LossSpec {
            mode,
            angles: &angles,
            alpha: 0.6,
            ec_stop_gradient: false,
            sigma: 0.05,
            recorrupt_seed: 8,
            truth: None,
        };
        let (l, _) = loss_and_grads(&items[1].echo, &op, &net, d, &spec, false).unwrap();
        assert!((l.total - (l.l_n + l.l_mc + 0.6 * l.l_ec)).abs() < 1e-12 * (1.0 + l.total));
        if mode == TrainMode::SsClean {
            assert_eq!(l.l_n, 0.0);
        }
    }
}

#[test]
fn identical_seeds_give_identical_history() {
    let (op, items, net) = setup(0.75);
    for mode in [TrainMode::SsClean, TrainMode::Supervised] {
        let cfg = small_cfg(mode);
        let (s1, h1) = train(net.clone(), None, &items, &op, &cfg).unwrap();
        let (s2, h2) = train(net.clone(), None, &items, &op, &cfg).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(s1, s2);
    }
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let (op, items, net) = setup(0.75);
    let cfg = TrainConfig { lr: 0.0, ..small_cfg(TrainMode::SsClean) };
    let (state, _) = train(net.clone(), None, &items, &op, &cfg).unwrap();
    assert_eq!(state.net, net);
    let cfg = TrainConfig { epochs: 1, ..small_cfg(TrainMode::SsClean) };
    let (state, hist) = train(net.clone(), None, &items, &op, &cfg).unwrap();
    assert_ne!(state.net, net);
    assert_eq!(hist.len(), 1);
    assert!(hist[0].val.is_some());
}

#[test]
fn known_sigma_matches_configured_sigma() {
    let (op, mut items, net) = setup(0.75);
    let den = init_denoiser(&DenoiserConfig { base: 2, residual: false }, 3).unwrap();
    let cfg = TrainConfig { epochs: 1, sigma: Some(0.02), ..small_cfg(TrainMode::SsNoisy) };
    let (a, ha) = train(net.clone(), Some(den.clone()), &items, &op, &cfg).unwrap();
    for it in &mut items {
        it.sigma = Some(0.02);
    }
    let cfg = TrainConfig { sigma: None, ..cfg };
    let (b, hb) = train(net.clone(), Some(den), &items, &op, &cfg).unwrap();
    assert_eq!(ha, hb);
    assert_eq!(a, b);
}

#[test]
fn too_few_rotations_are_refused() {
    // gamma 1/4 with three rotations, and gamma 1/2 with two (product exactly 1).
    for (kr, ka, rotations, enough) in [(0.5, 0.5, 3, 5), (1.0, 0.5, 2, 3)] {
        let (op, items, net) = setup2(kr, ka);
        let cfg = TrainConfig { num_rotations: rotations, ..small_cfg(TrainMode::SsClean) };
        match train(net.clone(), None, &items, &op, &cfg) {
            Err(Error::RankCondition { .. }) => {}
            other => panic!("expected refusal, got {:?}", other.map(|r| r.1)),
        }
        let cfg = TrainConfig { num_rotations: enough, epochs: 1, ..cfg };
        assert!(train(net, None, &items, &op, &cfg).is_ok());
    }
}

#[test]
fn rotation_angles_are_uniform() {
    let angles = sample_rotations(20_000, 77).unwrap();
    let mut sorted: Vec<f64> = angles.iter().map(|a| a / 360.0).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &u)| (u - i as f64 / n).abs().max(((i + 1) as f64 / n - u).abs()))
        .fold(0.0, f64::max);
    // Kolmogorov-Smirnov critical value at the 1% level.
    assert!(d < 1.63 / n.sqrt(), "D = {d}");
}
