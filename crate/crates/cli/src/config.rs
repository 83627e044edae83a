//! Experiment configuration: one strict JSON file per experiment.
//!
//! Every section is optional and falls back to the desk defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ssisar_core::denoiser::DenoiserConfig;
use ssisar_core::net::NetConfig;
use ssisar_core::signal::{
    build_operators, make_sampling, ForwardOperator, ImageGrid, RadarParams, SamplingMode, SamplingPattern,
    SceneSpec,
};
use ssisar_core::solvers::{AdmmHyper, DualUpdate};
use ssisar_core::training::TrainConfig;

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub radar: RadarSection,
    pub grid: GridSection,
    pub sampling: SamplingSection,
    pub noise: NoiseSection,
    pub scene: SceneSection,
    pub net: NetConfig,
    pub denoiser: DenoiserConfig,
    pub train: TrainConfig,
    pub admm: AdmmSection,
    pub paths: PathsSection,
    pub seed: u64,
}

/// Desk radar of `n x m` samples; any listed field overrides the desk value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarSection {
    pub n: usize,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

impl Default for RadarSection {
    fn default() -> Self {
        Self { n: 64, m: 64, fc: None, delta_f: None, bandwidth: None, prf: None, omega: None, c: None }
    }
}

/// Image size; absent sizes follow the radar sample counts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSection {
    pub mode: SamplingMode,
    pub keep_range: f64,
    pub keep_azimuth: f64,
    /// Falls back to the experiment seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for SamplingSection {
    fn default() -> Self {
        Self { mode: SamplingMode::UniformRandom, keep_range: 0.64, keep_azimuth: 0.64, seed: None }
    }
}

/// SNR against mean echo power; `null` means noiseless.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub snr_db: Option<f64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { snr_db: Some(30.0) }
    }
}

/// Random scenes drawn by `simulate --random`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    pub min_scatterers: usize,
    pub max_scatterers: usize,
    pub jitter_px: f64,
    pub margin_px: usize,
    pub amp_min: f64,
    pub amp_max: f64,
}

impl Default for SceneSection {
    fn default() -> Self {
        let s = SceneSpec::default();
        Self {
            min_scatterers: s.min_scatterers,
            max_scatterers: s.max_scatterers,
            jitter_px: s.jitter_px,
            margin_px: s.margin_px,
            amp_min: s.amp_min,
            amp_max: s.amp_max,
        }
    }
}

impl SceneSection {
    pub fn spec(&self) -> SceneSpec {
        SceneSpec {
            min_scatterers: self.min_scatterers,
            max_scatterers: self.max_scatterers,
            jitter_px: self.jitter_px,
            margin_px: self.margin_px,
            amp_min: self.amp_min,
            amp_max: self.amp_max,
        }
    }
}

/// ADMM settings. With `lambda_grid` set and a truth available, the
/// reconstruction keeps the grid value with the lowest NMSE. Grid values
/// are fractions of `max |A_s^H Y_s B_s^H|` when `lambda_relative` holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmSection {
    pub lambda: f64,
    pub rho: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    pub outer_iters: usize,
    pub inner_gd_iters: usize,
    pub dual_update: DualUpdate,
    pub lambda_grid: Vec<f64>,
    pub lambda_relative: bool,
}

impl Default for AdmmSection {
    fn default() -> Self {
        let h = AdmmHyper::default();
        Self {
            lambda: h.lambda,
            rho: h.rho,
            step: h.step,
            outer_iters: h.outer_iters,
            inner_gd_iters: h.inner_gd_iters,
            dual_update: h.dual_update,
            lambda_grid: Vec::new(),
            lambda_relative: true,
        }
    }
}

impl AdmmSection {
    pub fn hyper(&self) -> AdmmHyper {
        AdmmHyper {
            lambda: self.lambda,
            rho: self.rho,
            step: self.step,
            outer_iters: self.outer_iters,
            inner_gd_iters: self.inner_gd_iters,
            dual_update: self.dual_update,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses and validates; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Validation(format!("config: {}: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn radar_params(&self) -> RadarParams {
        let r = &self.radar;
        let mut p = RadarParams::desk(r.n, r.m);
        if let Some(b) = r.bandwidth {
            p.bandwidth = b;
            p.delta_f = b / r.n as f64;
        }
        if let Some(d) = r.delta_f {
            p.delta_f = d;
            if r.bandwidth.is_none() {
                p.bandwidth = d * r.n as f64;
            }
        }
        if let Some(v) = r.fc {
            p.fc = v;
        }
        if let Some(v) = r.prf {
            p.prf = v;
        }
        if let Some(v) = r.omega {
            p.omega = v;
        }
        if let Some(v) = r.c {
            p.c = v;
        }
        p
    }

    pub fn image_size(&self) -> (usize, usize) {
        (self.grid.p.unwrap_or(self.radar.n), self.grid.q.unwrap_or(self.radar.m))
    }

    pub fn image_grid(&self) -> ImageGrid {
        let (p, q) = self.image_size();
        ImageGrid::matched(&self.radar_params(), p, q)
    }

    pub fn sampling_seed(&self) -> u64 {
        self.sampling.seed.unwrap_or(self.seed)
    }

    pub fn sampling_pattern(&self) -> Result<SamplingPattern, CliError> {
        let s = &self.sampling;
        make_sampling(self.radar.n, self.radar.m, s.keep_range, s.keep_azimuth, s.mode, self.sampling_seed())
            .map_err(|e| CliError::Validation(format!("sampling: {e}")))
    }

    pub fn operator(&self) -> Result<ForwardOperator<f64>, CliError> {
        Ok(build_operators(&self.radar_params(), &self.image_grid(), &self.sampling_pattern()?)?)
    }

    /// Cross-field checks of every section.
    pub fn validate(&self) -> Result<(), CliError> {
        let v = |section: &str, r: ssisar_core::Result<()>| {
            r.map_err(|e| CliError::Validation(format!("config: {section}: {e}")))
        };
        v("radar", self.radar_params().validate())?;
        let (p, q) = self.image_size();
        if p == 0 || q == 0 {
            return Err(CliError::Validation("config: grid: p and q must be positive".into()));
        }
        self.sampling_pattern()?;
        if let Some(snr) = self.noise.snr_db {
            if !snr.is_finite() {
                return Err(CliError::Validation("config: noise.snr_db must be finite".into()));
            }
        }
        let sc = &self.scene;
        if sc.min_scatterers == 0 || sc.min_scatterers > sc.max_scatterers {
            return Err(CliError::Validation(
                "config: scene: need 1 <= min_scatterers <= max_scatterers".into(),
            ));
        }
        if !(sc.amp_min > 0.0 && sc.amp_min <= sc.amp_max && sc.amp_max.is_finite()) {
            return Err(CliError::Validation("config: scene: need 0 < amp_min <= amp_max".into()));
        }
        if !(0.0..0.5).contains(&sc.jitter_px) {
            return Err(CliError::Validation("config: scene.jitter_px must lie in [0, 0.5)".into()));
        }
        v("net", self.net.validate())?;
        if self.denoiser.base == 0 {
            return Err(CliError::Validation("config: denoiser.base must be positive".into()));
        }
        v("train", self.train.validate())?;
        // The step bound needs the operator and is rechecked at solve time.
        v("admm", AdmmHyper { step: None, ..self.admm.hyper() }.validate(1.0))?;
        if self.admm.step.is_some_and(|s| !(s > 0.0 && s.is_finite())) {
            return Err(CliError::Validation("config: admm.step must be positive".into()));
        }
        if self.admm.lambda_grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(CliError::Validation("config: admm.lambda_grid values must be >= 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.net.stages, 12);
        assert_eq!(cfg.train.epochs, 200);
    }

    #[test]
    fn unknown_key_names_its_path() {
        let err = ExperimentConfig::from_json(r#"{"train": {"epoch": 3}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("train.epoch"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn inconsistent_radar_rejected() {
        let err = ExperimentConfig::from_json(r#"{"radar": {"n": 64, "m": 64, "bandwidth": 1e9, "delta_f": 1e6}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("radar"), "{err}");
    }

    #[test]
    fn round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.radar.fc = Some(9e9);
        cfg.noise.snr_db = None;
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }
}
