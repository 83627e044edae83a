//! Subcommand bodies. Each writes its artifacts below the output directory
//! and its CSV or JSON report to `stdout`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use ssisar_core::denoiser::{denoise_forward, estimate_sigma, init_denoiser, DenoiserParams};
use ssisar_core::equivariance::{rank_check, DEFAULT_RANK_TOL};
use ssisar_core::metrics::{evaluate_complex, mean_record, nmse, normalized_magnitude, MetricsRecord};
use ssisar_core::net::{init_net, net_forward, LfatInput, NetParams};
use ssisar_core::rng::derive_seed;
use ssisar_core::signal::{
    add_noise, build_operators, random_scene, scene_to_image, synthesize_echo_points, ForwardOperator,
    SamplingPattern, Scene,
};
use ssisar_core::solvers::{admm_reconstruct, rd_image, tune_lambda};
use ssisar_core::training::{train_from, Adam, EpochRecord, TrainItem, TrainMode, TrainState, HISTORY_HEADER};
use ssisar_core::{ComplexTensor, Tensor};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::pgm;
use crate::tensorfile::TensorFile;

const TAG_SCENE: u64 = 11;
const TAG_NOISE: u64 = 12;
const TAG_NET_INIT: u64 = 13;
const TAG_DENOISER_INIT: u64 = 14;

fn write_out(out: &mut dyn Write, line: &str) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(CliError::Io)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn index_tensor(v: &[usize]) -> Tensor<f64> {
    Tensor::new(vec![v.len()], v.iter().map(|&i| i as f64).collect()).expect("1-D")
}

fn tensor_indices(t: &Tensor<f64>, name: &str) -> Result<Vec<usize>, CliError> {
    t.data()
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(CliError::Format(format!("entry `{name}` holds a non-index value {v}")))
            }
        })
        .collect()
}

/// Contents of an echo file.
#[derive(Clone, Debug, PartialEq)]
pub struct EchoRecord {
    /// Noiseless echo on the full lattice, when known.
    pub echo_full: Option<ComplexTensor<f64>>,
    /// Sampled (and possibly noisy) echo.
    pub echo: ComplexTensor<f64>,
    pub pattern: SamplingPattern,
    pub noise_sigma: f64,
}

impl EchoRecord {
    pub fn to_file(&self) -> TensorFile {
        let mut f = TensorFile::new();
        if let Some(full) = &self.echo_full {
            f.push_complex("echo_full", full.clone());
        }
        f.push_complex("echo", self.echo.clone());
        f.push_real("range_rows", index_tensor(self.pattern.range_rows()));
        f.push_real("azimuth_cols", index_tensor(self.pattern.azimuth_cols()));
        f.push_real("noise_sigma", Tensor::scalar(self.noise_sigma));
        f
    }

    /// Reads an echo file taken on an `n x m` lattice.
    pub fn from_file(f: &TensorFile, n: usize, m: usize) -> Result<Self, CliError> {
        let echo = f.complex("echo")?.clone();
        let rows = tensor_indices(f.real("range_rows")?, "range_rows")?;
        let cols = tensor_indices(f.real("azimuth_cols")?, "azimuth_cols")?;
        let pattern = SamplingPattern::new(n, m, rows, cols)
            .map_err(|e| CliError::Validation(format!("echo sampling pattern does not fit the radar: {e}")))?;
        if echo.shape() != [pattern.kept_rows(), pattern.kept_cols()] {
            return Err(CliError::Format(format!(
                "echo shape {:?} does not match its sampling pattern",
                echo.shape()
            )));
        }
        let echo_full = match f.get("echo_full") {
            Some(_) => {
                let full = f.complex("echo_full")?.clone();
                if full.shape() != [n, m] {
                    return Err(CliError::Validation(format!(
                        "full echo shape {:?} differs from the configured {n}x{m} radar",
                        full.shape()
                    )));
                }
                Some(full)
            }
            None => None,
        };
        let noise_sigma = match f.get("noise_sigma") {
            Some(_) => f.real("noise_sigma")?.data().first().copied().unwrap_or(0.0),
            None => 0.0,
        };
        Ok(Self { echo_full, echo, pattern, noise_sigma })
    }

    pub fn load(path: &Path, cfg: &ExperimentConfig) -> Result<Self, CliError> {
        Self::from_file(&TensorFile::load(path)?, cfg.radar.n, cfg.radar.m)
    }
}

/// Contents of a truth file.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthRecord {
    /// Scene rasterised onto the image grid, unit peak.
    pub truth: ComplexTensor<f64>,
    /// Range-Doppler image of the noiseless full echo.
    pub rd_full: ComplexTensor<f64>,
}

impl TruthRecord {
    pub fn to_file(&self) -> TensorFile {
        let mut f = TensorFile::new();
        f.push_complex("truth", self.truth.clone());
        f.push_complex("rd_full", self.rd_full.clone());
        f
    }

    pub fn from_file(f: &TensorFile) -> Result<Self, CliError> {
        Ok(Self { truth: f.complex("truth")?.clone(), rd_full: f.complex("rd_full")?.clone() })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_file(&TensorFile::load(path)?)
    }
}

/// Operator of `cfg`'s radar and grid under an explicit sampling pattern.
pub fn operator_for(cfg: &ExperimentConfig, pattern: &SamplingPattern) -> Result<ForwardOperator<f64>, CliError> {
    Ok(build_operators(&cfg.radar_params(), &cfg.image_grid(), pattern)?)
}

/// Echo and truth of `scene` under `cfg`, with noise drawn from `noise_seed`.
pub fn simulate_scene(
    cfg: &ExperimentConfig,
    scene: &Scene,
    noise_seed: u64,
) -> Result<(EchoRecord, TruthRecord), CliError> {
    let params = cfg.radar_params();
    let pattern = cfg.sampling_pattern()?;
    let full = synthesize_echo_points::<f64>(scene, &params)?;
    let (echo, noise_sigma) = add_noise(&pattern.apply(&full)?, cfg.noise.snr_db, noise_seed)?;
    let truth = scene_to_image(scene, &cfg.image_grid())?;
    let full_op = operator_for(cfg, &SamplingPattern::full(cfg.radar.n, cfg.radar.m))?;
    let rd_full = rd_image(&full, &full_op)?;
    Ok((EchoRecord { echo_full: Some(full), echo, pattern, noise_sigma }, TruthRecord { truth, rd_full }))
}

/// Writes `<stem>.ssin` echo and `<stem>_truth.ssin` files for one scene.
pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    scene_path: &Path,
    out_dir: &Path,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(scene_path).map_err(|e| CliError::io(scene_path, e))?;
    let scene = Scene::from_json(&text).map_err(|e| CliError::Validation(format!("{}: {e}", scene_path.display())))?;
    let stem = scene_path.file_stem().and_then(|s| s.to_str()).unwrap_or("scene");
    create_dir(out_dir)?;
    let (echo, truth) = simulate_scene(cfg, &scene, derive_seed(cfg.seed, TAG_NOISE))?;
    echo.to_file().save(&out_dir.join(format!("{stem}.ssin")))?;
    truth.to_file().save(&out_dir.join(format!("{stem}_truth.ssin")))?;
    write_out(stdout, &format!("gamma,{}", echo.pattern.gamma_f64()))
}

/// Draws `count` random scenes into `scenes/`, `echoes/` and `truths/`.
pub fn cmd_simulate_random(
    cfg: &ExperimentConfig,
    count: usize,
    out_dir: &Path,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    if count == 0 {
        return Err(CliError::Validation("--random needs a positive count".into()));
    }
    let dirs = ["scenes", "echoes", "truths"].map(|d| out_dir.join(d));
    for d in &dirs {
        create_dir(d)?;
    }
    let grid = cfg.image_grid();
    let spec = cfg.scene.spec();
    let mut gamma = 0.0;
    for i in 0..count {
        let name = format!("scene_{i:04}");
        let scene = random_scene(&grid, &spec, derive_seed(derive_seed(cfg.seed, TAG_SCENE), i as u64))?;
        let (echo, truth) = simulate_scene(cfg, &scene, derive_seed(derive_seed(cfg.seed, TAG_NOISE), i as u64))?;
        let scene_path = dirs[0].join(format!("{name}.json"));
        std::fs::write(&scene_path, scene.to_json()).map_err(|e| CliError::io(&scene_path, e))?;
        echo.to_file().save(&dirs[1].join(format!("{name}.ssin")))?;
        truth.to_file().save(&dirs[2].join(format!("{name}.ssin")))?;
        gamma = echo.pattern.gamma_f64();
    }
    write_out(stdout, &format!("gamma,{gamma}"))?;
    write_out(stdout, &format!("scenes,{count}"))
}

/// One dataset entry discovered on disk.
#[derive(Clone, Debug)]
pub struct DatasetItem {
    pub name: String,
    pub echo: EchoRecord,
    pub truth: Option<TruthRecord>,
}

fn files_with_extension(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Loads `echoes/*.ssin` with the matching `truths/*.ssin` where present.
pub fn load_dataset(dir: &Path, cfg: &ExperimentConfig) -> Result<Vec<DatasetItem>, CliError> {
    let echoes = files_with_extension(&dir.join("echoes"), "ssin")?;
    if echoes.is_empty() {
        return Err(CliError::Validation(format!("no echo files under {}", dir.join("echoes").display())));
    }
    echoes
        .iter()
        .map(|path| {
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let truth_path = dir.join("truths").join(format!("{name}.ssin"));
            let truth = if truth_path.exists() { Some(TruthRecord::load(&truth_path)?) } else { None };
            Ok(DatasetItem { echo: EchoRecord::load(path, cfg)?, truth, name })
        })
        .collect()
}

/// Operator shared by every echo of a dataset.
pub fn dataset_operator(items: &[DatasetItem], cfg: &ExperimentConfig) -> Result<ForwardOperator<f64>, CliError> {
    let pattern = &items[0].echo.pattern;
    if let Some(bad) = items.iter().find(|it| &it.echo.pattern != pattern) {
        return Err(CliError::Validation(format!(
            "{} uses a different sampling pattern from {}",
            bad.name, items[0].name
        )));
    }
    operator_for(cfg, pattern)
}

/// Trained parameters plus optimiser state.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub state: TrainState<f64>,
}

impl Checkpoint {
    pub fn to_file(&self) -> TensorFile {
        let st = &self.state;
        let mut f = TensorFile::new();
        for (k, t) in st.params() {
            f.push_real(k, t);
        }
        for (k, t) in st.adam.named() {
            f.push_real(k, t);
        }
        let lfat = match st.net.lfat_input {
            LfatInput::TwoChannel => 0.0,
            LfatInput::Magnitude => 1.0,
        };
        f.push_real("meta.epoch", Tensor::scalar(st.epoch as f64));
        f.push_real("meta.inner_gd", Tensor::scalar(st.net.inner_gd as f64));
        f.push_real("meta.lfat_magnitude", Tensor::scalar(lfat));
        if let Some(d) = &st.denoiser {
            f.push_real("meta.denoiser_residual", Tensor::scalar(if d.residual { 1.0 } else { 0.0 }));
        }
        f
    }

    pub fn from_file(f: &TensorFile, cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let map: BTreeMap<String, Tensor<f64>> = f
            .entries
            .iter()
            .filter_map(|(k, e)| match e {
                crate::tensorfile::Entry::Real(t) => Some((k.clone(), t.clone())),
                crate::tensorfile::Entry::Complex(_) => None,
            })
            .collect();
        let meta = |k: &str| map.get(k).and_then(|t| t.data().first().copied());
        let inner_gd = meta("meta.inner_gd").map(|v| v as usize).unwrap_or(cfg.net.inner_gd);
        let lfat_input = match meta("meta.lfat_magnitude") {
            Some(v) if v != 0.0 => LfatInput::Magnitude,
            Some(_) => LfatInput::TwoChannel,
            None => cfg.net.lfat_input,
        };
        let net = NetParams::from_named(&map, inner_gd, lfat_input)?;
        let denoiser = match meta("meta.denoiser_residual") {
            Some(r) => Some(DenoiserParams::from_named(&map, r != 0.0)?),
            None if map.keys().any(|k| k.starts_with("denoiser.")) => {
                Some(DenoiserParams::from_named(&map, cfg.denoiser.residual)?)
            }
            None => None,
        };
        let t = &cfg.train;
        let adam = Adam::from_named(&map, t.adam_beta1, t.adam_beta2, t.adam_eps);
        let epoch = meta("meta.epoch").map(|v| v as usize).unwrap_or(0);
        Ok(Self { state: TrainState { net, denoiser, adam, epoch } })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        self.to_file().save(path)
    }

    pub fn load(path: &Path, cfg: &ExperimentConfig) -> Result<Self, CliError> {
        Self::from_file(&TensorFile::load(path)?, cfg)
    }

    /// Denoised echo (when a denoiser is present) fed through the network.
    pub fn reconstruct(&self, echo: &ComplexTensor<f64>, op: &ForwardOperator<f64>) -> Result<ComplexTensor<f64>, CliError> {
        let y = match &self.state.denoiser {
            Some(d) => denoise_forward(echo, d)?,
            None => echo.clone(),
        };
        Ok(net_forward(&y, op, &self.state.net)?)
    }
}

/// Fresh training state for `cfg`.
pub fn fresh_state(cfg: &ExperimentConfig) -> Result<TrainState<f64>, CliError> {
    let net = init_net(&cfg.net, derive_seed(cfg.train.seed, TAG_NET_INIT))?;
    let denoiser = if cfg.train.mode == TrainMode::SsNoisy {
        Some(init_denoiser(&cfg.denoiser, derive_seed(cfg.train.seed, TAG_DENOISER_INIT))?)
    } else {
        None
    };
    Ok(TrainState::new(net, denoiser, &cfg.train))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Rd,
    Admm,
    Net,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rd => "rd",
            Method::Admm => "admm",
            Method::Net => "net",
        }
    }
}

/// ADMM with the configured `lambda`, or the best value of the configured
/// grid when a truth is given.
pub fn admm_image(
    cfg: &ExperimentConfig,
    echo: &ComplexTensor<f64>,
    op: &ForwardOperator<f64>,
    truth: Option<&ComplexTensor<f64>>,
) -> Result<(f64, ComplexTensor<f64>), CliError> {
    let hyper = cfg.admm.hyper();
    hyper.validate(op.lipschitz()).map_err(|e| CliError::Validation(format!("config: admm: {e}")))?;
    match truth {
        Some(truth) if !cfg.admm.lambda_grid.is_empty() => {
            let scale = if cfg.admm.lambda_relative { op.adjoint(echo)?.max_abs() } else { 1.0 };
            let grid: Vec<f64> = cfg.admm.lambda_grid.iter().map(|l| l * scale).collect();
            let reference = normalized_magnitude(truth);
            let (lambda, out) = tune_lambda(echo, op, &hyper, &grid, |img| {
                nmse(&reference, &normalized_magnitude(img)).unwrap_or(f64::INFINITY)
            })?;
            Ok((lambda, out.image))
        }
        _ => Ok((hyper.lambda, admm_reconstruct(echo, op, &hyper)?.image)),
    }
}

pub fn reconstruct_with(
    method: Method,
    cfg: &ExperimentConfig,
    echo: &ComplexTensor<f64>,
    op: &ForwardOperator<f64>,
    checkpoint: Option<&Checkpoint>,
    truth: Option<&ComplexTensor<f64>>,
) -> Result<ComplexTensor<f64>, CliError> {
    match method {
        Method::Rd => Ok(rd_image(echo, op)?),
        Method::Admm => Ok(admm_image(cfg, echo, op, truth)?.1),
        Method::Net => {
            let ck = checkpoint.ok_or_else(|| CliError::Validation("method `net` needs --checkpoint".into()))?;
            ck.reconstruct(echo, op)
        }
    }
}

pub const RECONSTRUCT_HEADER: &str = "method,nmse,psnr_db,ssim";

pub struct ReconstructArgs<'a> {
    pub methods: &'a [Method],
    pub echo: &'a Path,
    pub truth: Option<&'a Path>,
    pub checkpoint: Option<&'a Path>,
    pub db_floor: Option<f64>,
}

/// Writes `<stem>_<method>.pgm` and `<stem>_<method>.ssin` per method and,
/// with a truth, prints one metrics row per method.
pub fn cmd_reconstruct(
    cfg: &ExperimentConfig,
    args: &ReconstructArgs,
    out_dir: &Path,
    stdout: &mut dyn Write,
) -> Result<Vec<(Method, Option<MetricsRecord>)>, CliError> {
    if args.methods.is_empty() {
        return Err(CliError::Validation("no reconstruction method given".into()));
    }
    let record = EchoRecord::load(args.echo, cfg)?;
    let op = operator_for(cfg, &record.pattern)?;
    let truth = args.truth.map(TruthRecord::load).transpose()?;
    if let Some(t) = &truth {
        if t.truth.shape() != [op.image_shape().0, op.image_shape().1] {
            return Err(CliError::Validation("truth raster does not match the image grid".into()));
        }
    }
    let checkpoint = match args.checkpoint {
        Some(p) => Some(Checkpoint::load(p, cfg)?),
        None if args.methods.contains(&Method::Net) => {
            return Err(CliError::Validation("method `net` needs --checkpoint".into()))
        }
        None => None,
    };
    create_dir(out_dir)?;
    let stem = args.echo.file_stem().and_then(|s| s.to_str()).unwrap_or("echo");
    let mut rows = Vec::new();
    let mut csv = Vec::new();
    if truth.is_some() {
        csv.push(RECONSTRUCT_HEADER.to_string());
    }
    for &method in args.methods {
        let reference = truth.as_ref().map(|t| &t.truth);
        let img = reconstruct_with(method, cfg, &record.echo, &op, checkpoint.as_ref(), reference)?;
        let base = out_dir.join(format!("{stem}_{}", method.name()));
        pgm::write(&base.with_extension("pgm"), &img, args.db_floor)?;
        let mut f = TensorFile::new();
        f.push_complex("image", img.clone());
        f.save(&base.with_extension("ssin"))?;
        let metrics = reference.map(|t| evaluate_complex(t, &img)).transpose()?;
        if let Some(m) = &metrics {
            csv.push(format!("{},{}", method.name(), m.csv_row()));
        }
        rows.push((method, metrics));
    }
    if !csv.is_empty() {
        let text = csv.join("\n") + "\n";
        let path = out_dir.join(format!("{stem}_metrics.csv"));
        std::fs::write(&path, &text).map_err(|e| CliError::io(&path, e))?;
        for line in &csv {
            write_out(stdout, line)?;
        }
    }
    Ok(rows)
}

pub struct TrainArgs<'a> {
    pub data: &'a Path,
    pub checkpoint: Option<&'a Path>,
    pub resume: Option<&'a Path>,
}

/// Trains on a dataset directory, writing the checkpoint after every epoch
/// and the history CSV at the end.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    args: &TrainArgs,
    out_dir: &Path,
    stdout: &mut dyn Write,
) -> Result<(TrainState<f64>, Vec<EpochRecord>), CliError> {
    let items = load_dataset(args.data, cfg)?;
    let op = dataset_operator(&items, cfg)?;
    let dataset: Vec<TrainItem<f64>> = items
        .iter()
        .map(|it| TrainItem {
            echo: it.echo.echo.clone(),
            truth: it.truth.as_ref().map(|t| t.truth.clone()),
            sigma: (it.echo.noise_sigma > 0.0).then_some(it.echo.noise_sigma),
        })
        .collect();
    let state = match args.resume {
        Some(p) => {
            let mut st = Checkpoint::load(p, cfg)?.state;
            if cfg.train.mode == TrainMode::SsNoisy && st.denoiser.is_none() {
                st.denoiser = fresh_state(cfg)?.denoiser;
            }
            st
        }
        None => fresh_state(cfg)?,
    };
    create_dir(out_dir)?;
    let ck_path = args.checkpoint.map(Path::to_path_buf).unwrap_or_else(|| out_dir.join("checkpoint.ssin"));
    write_out(stdout, HISTORY_HEADER)?;
    let mut io_err = None;
    let (state, history) = train_from(state, &dataset, &op, &cfg.train, |rec, st| {
        if io_err.is_some() {
            return;
        }
        let res = Checkpoint { state: st.clone() }.save(&ck_path).and_then(|_| write_out(stdout, &rec.csv_row()));
        if let Err(e) = res {
            io_err = Some(e);
        }
    })?;
    if let Some(e) = io_err {
        return Err(e);
    }
    let mut text = String::from(HISTORY_HEADER);
    text.push('\n');
    for r in &history {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    let hist_path = out_dir.join("history.csv");
    std::fs::write(&hist_path, text).map_err(|e| CliError::io(&hist_path, e))?;
    Ok((state, history))
}

pub const EVAL_HEADER: &str = "method,scene,nmse,psnr_db,ssim";

/// Per-scene metrics of each method against the truth rasters of a
/// dataset, followed by one `mean` row per method.
pub fn cmd_eval(
    cfg: &ExperimentConfig,
    data: &Path,
    checkpoint: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<Vec<(Method, MetricsRecord)>, CliError> {
    let items = load_dataset(data, cfg)?;
    let op = dataset_operator(&items, cfg)?;
    let ck = checkpoint.map(|p| Checkpoint::load(p, cfg)).transpose()?;
    let mut methods = vec![Method::Rd, Method::Admm];
    if ck.is_some() {
        methods.push(Method::Net);
    }
    write_out(stdout, EVAL_HEADER)?;
    let mut means = Vec::new();
    for method in methods {
        let mut recs = Vec::new();
        for it in items.iter() {
            let Some(t) = &it.truth else { continue };
            let img = reconstruct_with(method, cfg, &it.echo.echo, &op, ck.as_ref(), Some(&t.truth))?;
            let m = evaluate_complex(&t.truth, &img)?;
            write_out(stdout, &format!("{},{},{}", method.name(), it.name, m.csv_row()))?;
            recs.push(m);
        }
        let mean = mean_record(&recs)
            .ok_or_else(|| CliError::Validation(format!("no truth files under {}", data.join("truths").display())))?;
        write_out(stdout, &format!("{},mean,{}", method.name(), mean.csv_row()))?;
        means.push((method, mean));
    }
    Ok(means)
}

/// Prints the rank report of the configured operator as JSON and saves it
/// as `rank_check.json`.
pub fn cmd_rank_check(
    cfg: &ExperimentConfig,
    angles: &[f64],
    tol: Option<f64>,
    out_dir: &Path,
    stdout: &mut dyn Write,
) -> Result<ssisar_core::equivariance::RankCheck, CliError> {
    if angles.is_empty() {
        return Err(CliError::Validation("rank-check needs at least one angle".into()));
    }
    let op = cfg.operator()?;
    let report = rank_check(&op, angles, tol.unwrap_or(DEFAULT_RANK_TOL))?;
    let json = serde_json::to_string_pretty(&report).expect("report serialises");
    create_dir(out_dir)?;
    let path = out_dir.join("rank_check.json");
    std::fs::write(&path, format!("{json}\n")).map_err(|e| CliError::io(&path, e))?;
    write_out(stdout, &json)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct DenoiseReport {
    pub sigma_file: f64,
    pub sigma_estimated: f64,
    /// `||Y - Y_clean||^2 / ||Y_clean||^2` before and after denoising.
    pub error_before: Option<f64>,
    pub error_after: Option<f64>,
}

/// Runs the echo denoiser of a checkpoint (or a fresh one) on an echo file
/// and writes the result to `<stem>_denoised.ssin`.
pub fn cmd_denoise_test(
    cfg: &ExperimentConfig,
    echo_path: &Path,
    checkpoint: Option<&Path>,
    out_dir: &Path,
    stdout: &mut dyn Write,
) -> Result<DenoiseReport, CliError> {
    let record = EchoRecord::load(echo_path, cfg)?;
    let den = match checkpoint {
        Some(p) => Checkpoint::load(p, cfg)?
            .state
            .denoiser
            .ok_or_else(|| CliError::Validation(format!("{} holds no denoiser", p.display())))?,
        None => init_denoiser(&cfg.denoiser, derive_seed(cfg.train.seed, TAG_DENOISER_INIT))?,
    };
    let out = denoise_forward(&record.echo, &den)?;
    let rel = |y: &ComplexTensor<f64>, clean: &ComplexTensor<f64>| -> Result<f64, CliError> {
        Ok(y.sub(clean)?.norm_sqr() / clean.norm_sqr())
    };
    let clean = record.echo_full.as_ref().map(|f| record.pattern.apply(f)).transpose()?;
    let report = DenoiseReport {
        sigma_file: record.noise_sigma,
        sigma_estimated: estimate_sigma(&record.echo)?,
        error_before: clean.as_ref().map(|c| rel(&record.echo, c)).transpose()?,
        error_after: clean.as_ref().map(|c| rel(&out, c)).transpose()?,
    };
    create_dir(out_dir)?;
    let stem = echo_path.file_stem().and_then(|s| s.to_str()).unwrap_or("echo");
    let mut f = TensorFile::new();
    f.push_complex("echo", out);
    f.save(&out_dir.join(format!("{stem}_denoised.ssin")))?;
    write_out(stdout, &serde_json::to_string_pretty(&report).expect("report serialises"))?;
    Ok(report)
}
