//! ISAR signal model: radar geometry, scenes, forward operators, echo
//! synthesis, sparse sampling and noise.
//!
//! After translational compensation the echo of a point scatterer at range
//! `x` and cross-range `y` is separable in range frequency `n` and slow
//! time `m`:
//!
//! ```text
//! Y[n, m] = sum_k A_k exp(-j 4 pi / c (f_c + n df) x_k) exp(-j 4 pi f_c / c  y_k w m / PRF)
//! ```
//!
//! On a pixel grid this becomes `Y = A X B` with unit-modulus `A` (`N x P`)
//! and `B` (`Q x M`). Sparse sampling keeps a subset of rows of `A` and
//! columns of `B`. Indices `n` and `m` run from 1, so row `i` of `A`
//! corresponds to `n = i + 1`.

use std::f64::consts::PI;

use num_complex::Complex;
use num_rational::Ratio;
use rand::seq::index;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::ComplexTensor;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Radar and motion parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarParams {
    /// Carrier (centre) frequency, Hz.
    pub fc: f64,
    /// Range-frequency step, Hz.
    pub delta_f: f64,
    /// Bandwidth, Hz; equals `n * delta_f`.
    pub bandwidth: f64,
    /// Pulse repetition frequency, Hz.
    pub prf: f64,
    /// Relative rotation rate, rad/s.
    pub omega: f64,
    /// Propagation speed, m/s.
    #[serde(default = "default_c")]
    pub c: f64,
    /// Range-frequency samples.
    pub n: usize,
    /// Slow-time samples.
    pub m: usize,
}

fn default_c() -> f64 {
    SPEED_OF_LIGHT
}

impl RadarParams {
    /// X-band desk configuration: 10 GHz carrier, 1 GHz bandwidth, 100 Hz
    /// PRF, rotation rate chosen so the cross-range pixel pitch of an
    /// `m`-column grid equals the range pitch. The synthetic aperture is
    /// then 0.1 rad whatever `m` is.
    pub fn desk(n: usize, m: usize) -> Self {
        let fc = 10e9;
        let bandwidth = 1e9;
        let prf = 100.0;
        Self {
            fc,
            delta_f: bandwidth / n as f64,
            bandwidth,
            prf,
            omega: prf * bandwidth / (fc * m as f64),
            c: SPEED_OF_LIGHT,
            n,
            m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("fc", self.fc),
            ("delta_f", self.delta_f),
            ("bandwidth", self.bandwidth),
            ("prf", self.prf),
            ("omega", self.omega),
            ("c", self.c),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("radar.{name} must be positive, got {v}")));
            }
        }
        if self.n == 0 || self.m == 0 {
            return Err(Error::InvalidArgument("radar.n and radar.m must be positive".into()));
        }
        let b = self.n as f64 * self.delta_f;
        if ((b - self.bandwidth) / self.bandwidth).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "radar.bandwidth {} differs from n * delta_f = {b}",
                self.bandwidth
            )));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        self.c / self.fc
    }

    /// Range resolution `c / 2B`.
    pub fn range_pitch(&self) -> f64 {
        self.c / (2.0 * self.bandwidth)
    }

    /// Cross-range resolution `lambda PRF / (2 w M)`.
    pub fn azimuth_pitch(&self) -> f64 {
        self.wavelength() * self.prf / (2.0 * self.omega * self.m as f64)
    }

    /// Range phase `4 pi / c (f_c + n df) x` for 0-based row `row`.
    #[inline]
    pub fn range_phase(&self, row: usize, x: f64) -> f64 {
        let n = (row + 1) as f64;
        4.0 * PI / self.c * (self.fc + n * self.delta_f) * x
    }

    /// Cross-range phase `4 pi f_c / c  y w m / PRF` for 0-based column `col`.
    #[inline]
    pub fn azimuth_phase(&self, col: usize, y: f64) -> f64 {
        let m = (col + 1) as f64;
        4.0 * PI * self.fc / self.c * y * self.omega * m / self.prf
    }
}

/// Pixel centres of the reconstructed image.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    pub p: usize,
    pub q: usize,
    /// Range position of each row, metres.
    pub x_coords: Vec<f64>,
    /// Cross-range position of each column, metres.
    pub y_coords: Vec<f64>,
}

impl ImageGrid {
    pub fn new(x_coords: Vec<f64>, y_coords: Vec<f64>) -> Result<Self> {
        for (name, c) in [("x", &x_coords), ("y", &y_coords)] {
            if c.is_empty() {
                return Err(Error::InvalidArgument(format!("grid {name} coordinates empty")));
            }
            if c.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidArgument(format!(
                    "grid {name} coordinates must be strictly increasing"
                )));
            }
        }
        Ok(Self {
            p: x_coords.len(),
            q: y_coords.len(),
            x_coords,
            y_coords,
        })
    }

    /// Grid whose pitch matches the radar resolution in both dimensions.
    ///
    /// Pixel `(p / 2, q / 2)` sits at the origin, which makes the grid
    /// exactly centred for odd sizes and half a pixel off for even ones.
    /// With `p == n` and `q == m` the operators become scaled DFT matrices.
    pub fn matched(params: &RadarParams, p: usize, q: usize) -> Self {
        let dx = params.range_pitch();
        let dy = params.azimuth_pitch();
        let x = (0..p).map(|i| (i as f64 - (p / 2) as f64) * dx).collect();
        let y = (0..q).map(|j| (j as f64 - (q / 2) as f64) * dy).collect();
        Self::new(x, y).expect("matched grid is strictly increasing")
    }

    pub fn range_pitch(&self) -> f64 {
        if self.p > 1 {
            self.x_coords[1] - self.x_coords[0]
        } else {
            1.0
        }
    }

    pub fn azimuth_pitch(&self) -> f64 {
        if self.q > 1 {
            self.y_coords[1] - self.y_coords[0]
        } else {
            1.0
        }
    }

    /// Nearest pixel to `(x, y)`, or `None` beyond half a pitch outside the grid.
    pub fn nearest_pixel(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let near = |coords: &[f64], v: f64, pitch: f64| -> Option<usize> {
            let lo = coords[0] - 0.5 * pitch;
            let hi = coords[coords.len() - 1] + 0.5 * pitch;
            if !(v >= lo && v <= hi) {
                return None;
            }
            let mut best = 0;
            for (i, &c) in coords.iter().enumerate() {
                if (c - v).abs() < (coords[best] - v).abs() {
                    best = i;
                }
            }
            Some(best)
        };
        Some((
            near(&self.x_coords, x, self.range_pitch())?,
            near(&self.y_coords, y, self.azimuth_pitch())?,
        ))
    }
}

/// One point scatterer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scatterer {
    pub x: f64,
    pub y: f64,
    pub amp_re: f64,
    pub amp_im: f64,
}

impl Scatterer {
    pub fn amplitude(&self) -> Complex<f64> {
        Complex::new(self.amp_re, self.amp_im)
    }
}

/// A set of point scatterers. JSON form:
/// `{"scatterers": [{"x": .., "y": .., "amp_re": .., "amp_im": ..}, ..]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub scatterers: Vec<Scatterer>,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if self.scatterers.is_empty() {
            return Err(Error::InvalidArgument("scene has no scatterers".into()));
        }
        for (i, s) in self.scatterers.iter().enumerate() {
            let a = s.amplitude().norm();
            if !(a > 0.0 && a.is_finite() && s.x.is_finite() && s.y.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "scatterer {i} needs finite position and nonzero amplitude"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let scene: Scene =
            serde_json::from_str(s).map_err(|e| Error::InvalidArgument(format!("scene JSON: {e}")))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serialises")
    }
}

/// Parameters of [`random_scene`].
#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub min_scatterers: usize,
    pub max_scatterers: usize,
    /// Uniform position jitter around pixel centres, in pixels.
    pub jitter_px: f64,
    /// Pixels kept free at each border.
    pub margin_px: usize,
    /// Amplitude magnitudes are drawn uniformly from this range.
    pub amp_min: f64,
    pub amp_max: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            min_scatterers: 5,
            max_scatterers: 15,
            jitter_px: 0.3,
            margin_px: 8,
            amp_min: 0.2,
            amp_max: 1.0,
        }
    }
}

/// Random scene of distinct-pixel scatterers with random phases.
pub fn random_scene(grid: &ImageGrid, spec: &SceneSpec, seed: u64) -> Result<Scene> {
    if spec.min_scatterers == 0 || spec.max_scatterers < spec.min_scatterers {
        return Err(Error::InvalidArgument("scene scatterer count range is empty".into()));
    }
    let rows = grid.p.saturating_sub(2 * spec.margin_px);
    let cols = grid.q.saturating_sub(2 * spec.margin_px);
    if rows * cols < spec.max_scatterers {
        return Err(Error::InvalidArgument("grid too small for the requested scene".into()));
    }
    let mut r = rng::seeded(seed);
    let count = r.random_range(spec.min_scatterers..=spec.max_scatterers);
    let cells = index::sample(&mut r, rows * cols, count);
    let (dx, dy) = (grid.range_pitch(), grid.azimuth_pitch());
    let scatterers = cells
        .into_iter()
        .map(|cell| {
            let pi = spec.margin_px + cell / cols;
            let qi = spec.margin_px + cell % cols;
            let jx: f64 = r.random_range(-1.0..=1.0) * spec.jitter_px;
            let jy: f64 = r.random_range(-1.0..=1.0) * spec.jitter_px;
            let mag = r.random_range(spec.amp_min..=spec.amp_max);
            let phase = r.random_range(0.0..2.0 * PI);
            let a = Complex::from_polar(mag, phase);
            Scatterer {
                x: grid.x_coords[pi] + jx * dx,
                y: grid.y_coords[qi] + jy * dy,
                amp_re: a.re,
                amp_im: a.im,
            }
        })
        .collect();
    Ok(Scene { scatterers })
}

/// Spatial layout of kept samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    UniformRandom,
    Periodic,
    Block,
}

/// Kept range-frequency rows and slow-time columns (0-based, sorted).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingPattern {
    n: usize,
    m: usize,
    range_rows: Vec<usize>,
    azimuth_cols: Vec<usize>,
}

impl SamplingPattern {
    pub fn new(n: usize, m: usize, range_rows: Vec<usize>, azimuth_cols: Vec<usize>) -> Result<Self> {
        for (name, idx, bound) in [("range", &range_rows, n), ("azimuth", &azimuth_cols, m)] {
            if idx.is_empty() {
                return Err(Error::InvalidArgument(format!("{name} sampling keeps no samples")));
            }
            if idx.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidArgument(format!(
                    "{name} indices must be sorted and unique"
                )));
            }
            if *idx.last().unwrap() >= bound {
                return Err(Error::InvalidArgument(format!(
                    "{name} index {} out of bounds for {bound} samples",
                    idx.last().unwrap()
                )));
            }
        }
        Ok(Self {
            n,
            m,
            range_rows,
            azimuth_cols,
        })
    }

    pub fn full(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            range_rows: (0..n).collect(),
            azimuth_cols: (0..m).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn range_rows(&self) -> &[usize] {
        &self.range_rows
    }

    pub fn azimuth_cols(&self) -> &[usize] {
        &self.azimuth_cols
    }

    pub fn kept_rows(&self) -> usize {
        self.range_rows.len()
    }

    pub fn kept_cols(&self) -> usize {
        self.azimuth_cols.len()
    }

    /// Down-sampling rate `N_s M_s / (N M)`, exact.
    pub fn gamma(&self) -> Ratio<u64> {
        Ratio::new(
            (self.kept_rows() * self.kept_cols()) as u64,
            (self.n * self.m) as u64,
        )
    }

    pub fn gamma_f64(&self) -> f64 {
        (self.kept_rows() * self.kept_cols()) as f64 / (self.n * self.m) as f64
    }

    /// Selects the kept entries of a full `N x M` echo.
    pub fn apply<T: Scalar>(&self, full: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
        if full.shape() != [self.n, self.m] {
            return Err(Error::shape(
                "SamplingPattern::apply",
                format!("echo {:?} vs pattern {}x{}", full.shape(), self.n, self.m),
            ));
        }
        Ok(ComplexTensor::from_fn2(self.kept_rows(), self.kept_cols(), |r, c| {
            full.at(self.range_rows[r], self.azimuth_cols[c])
        }))
    }
}

fn kept_count(total: usize, ratio: f64, name: &str) -> Result<usize> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "{name} keep ratio must lie in (0, 1], got {ratio}"
        )));
    }
    let k = (ratio * total as f64).round() as usize;
    if k == 0 {
        return Err(Error::InvalidArgument(format!(
            "{name} keep ratio {ratio} keeps no samples of {total}"
        )));
    }
    Ok(k.min(total))
}

fn pick(total: usize, keep: usize, mode: SamplingMode, r: &mut rng::Rng) -> Vec<usize> {
    if keep == total {
        return (0..total).collect();
    }
    let mut idx = match mode {
        SamplingMode::UniformRandom => index::sample(r, total, keep).into_vec(),
        SamplingMode::Periodic => (0..keep).map(|i| i * total / keep).collect(),
        SamplingMode::Block => {
            let start = r.random_range(0..=total - keep);
            (start..start + keep).collect()
        }
    };
    idx.sort_unstable();
    idx
}

/// Builds a deterministic sampling pattern keeping `round(ratio * size)`
/// samples along each axis.
pub fn make_sampling(
    n: usize,
    m: usize,
    keep_range: f64,
    keep_azimuth: f64,
    mode: SamplingMode,
    seed: u64,
) -> Result<SamplingPattern> {
    let kn = kept_count(n, keep_range, "range")?;
    let km = kept_count(m, keep_azimuth, "azimuth")?;
    let rows = pick(n, kn, mode, &mut rng::substream(seed, 0));
    let cols = pick(m, km, mode, &mut rng::substream(seed, 1));
    SamplingPattern::new(n, m, rows, cols)
}

/// Sampled forward model `Y_s = A_s X B_s`.
#[derive(Clone, Debug)]
pub struct ForwardOperator<T: Scalar = f64> {
    a_s: ComplexTensor<T>,
    b_s: ComplexTensor<T>,
    a_s_h: ComplexTensor<T>,
    b_s_h: ComplexTensor<T>,
    grid: ImageGrid,
    pattern: SamplingPattern,
    lipschitz: T,
}

/// Builds `A_s` (`N_s x P`) and `B_s` (`Q x M_s`) for the kept samples.
pub fn build_operators<T: Scalar>(
    params: &RadarParams,
    grid: &ImageGrid,
    pattern: &SamplingPattern,
) -> Result<ForwardOperator<T>> {
    params.validate()?;
    if pattern.n() != params.n || pattern.m() != params.m {
        return Err(Error::InvalidArgument(format!(
            "sampling pattern is {}x{} but radar has {}x{} samples",
            pattern.n(),
            pattern.m(),
            params.n,
            params.m
        )));
    }
    let a_s = ComplexTensor::from_fn2(pattern.kept_rows(), grid.p, |r, p| {
        let ph = -params.range_phase(pattern.range_rows()[r], grid.x_coords[p]);
        Complex::new(T::lit(ph.cos()), T::lit(ph.sin()))
    });
    let b_s = ComplexTensor::from_fn2(grid.q, pattern.kept_cols(), |q, c| {
        let ph = -params.azimuth_phase(pattern.azimuth_cols()[c], grid.y_coords[q]);
        Complex::new(T::lit(ph.cos()), T::lit(ph.sin()))
    });
    Ok(ForwardOperator::from_matrices(a_s, b_s, grid.clone(), pattern.clone()))
}

impl<T: Scalar> ForwardOperator<T> {
    /// Wraps explicit factor matrices.
    pub fn from_matrices(
        a_s: ComplexTensor<T>,
        b_s: ComplexTensor<T>,
        grid: ImageGrid,
        pattern: SamplingPattern,
    ) -> Self {
        let a_s_h = a_s.conj_transpose();
        let b_s_h = b_s.conj_transpose();
        let sa = spectral_norm_sq(&a_s);
        let sb = spectral_norm_sq(&b_s);
        Self {
            a_s,
            b_s,
            a_s_h,
            b_s_h,
            grid,
            pattern,
            lipschitz: sa * sb,
        }
    }

    pub fn a_s(&self) -> &ComplexTensor<T> {
        &self.a_s
    }

    pub fn b_s(&self) -> &ComplexTensor<T> {
        &self.b_s
    }

    pub fn a_s_h(&self) -> &ComplexTensor<T> {
        &self.a_s_h
    }

    pub fn b_s_h(&self) -> &ComplexTensor<T> {
        &self.b_s_h
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn pattern(&self) -> &SamplingPattern {
        &self.pattern
    }

    /// Image shape `(P, Q)`.
    pub fn image_shape(&self) -> (usize, usize) {
        (self.a_s.cols(), self.b_s.rows())
    }

    /// Echo shape `(N_s, M_s)`.
    pub fn echo_shape(&self) -> (usize, usize) {
        (self.a_s.rows(), self.b_s.cols())
    }

    /// `sigma_max(A_s)^2 sigma_max(B_s)^2`, the Lipschitz constant of the
    /// data-fit gradient.
    pub fn lipschitz(&self) -> T {
        self.lipschitz
    }

    /// `A_s X B_s`.
    pub fn forward(&self, x: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
        let (p, q) = self.image_shape();
        if x.shape() != [p, q] {
            return Err(Error::shape(
                "forward",
                format!("image {:?} vs grid {p}x{q}", x.shape()),
            ));
        }
        self.a_s.matmul(x)?.matmul(&self.b_s)
    }

    /// `A_s^H Y B_s^H`.
    pub fn adjoint(&self, y: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
        let (ns, ms) = self.echo_shape();
        if y.shape() != [ns, ms] {
            return Err(Error::shape(
                "adjoint",
                format!("echo {:?} vs sampled {ns}x{ms}", y.shape()),
            ));
        }
        self.a_s_h.matmul(y)?.matmul(&self.b_s_h)
    }
}

/// Largest squared singular value by 50 steps of power iteration on `M^H M`.
pub fn spectral_norm_sq<T: Scalar>(m: &ComplexTensor<T>) -> T {
    let cols = m.cols();
    let mh = m.conj_transpose();
    // fixed, generic start vector
    let mut v = ComplexTensor::from_fn2(cols, 1, |i, _| {
        let t = (i as f64 + 1.0) * 0.618_033_988_749_895;
        Complex::new(T::lit(1.0 + (t - t.floor())), T::lit(0.5 - (t * 3.0).fract()))
    });
    let mut est = T::zero();
    for _ in 0..50 {
        let nv = v.norm_sqr().sqrt();
        if nv == T::zero() {
            return T::zero();
        }
        v = v.scale_real(T::one() / nv);
        let w = mh.matmul(&m.matmul(&v).expect("power iteration shapes")).expect("power iteration shapes");
        let next = v.inner(&w).expect("same shape").re;
        v = w;
        let done = (next - est).abs() <= T::lit(1e-6) * next.abs();
        est = next;
        if done {
            break;
        }
    }
    est
}

/// Echo of a point scene on the full `N x M` sampling lattice, evaluated
/// directly from scatterer positions (no pixel grid involved).
pub fn synthesize_echo_points<T: Scalar>(scene: &Scene, params: &RadarParams) -> Result<ComplexTensor<T>> {
    scene.validate()?;
    params.validate()?;
    let (n, m) = (params.n, params.m);
    let mut re = vec![0.0f64; n * m];
    let mut im = vec![0.0f64; n * m];
    for s in &scene.scatterers {
        let a = s.amplitude();
        let rng_v: Vec<Complex<f64>> = (0..n)
            .map(|i| a * Complex::from_polar(1.0, -params.range_phase(i, s.x)))
            .collect();
        let az_v: Vec<Complex<f64>> = (0..m)
            .map(|j| Complex::from_polar(1.0, -params.azimuth_phase(j, s.y)))
            .collect();
        for i in 0..n {
            for j in 0..m {
                let z = rng_v[i] * az_v[j];
                re[i * m + j] += z.re;
                im[i * m + j] += z.im;
            }
        }
    }
    Ok(ComplexTensor::from_fn2(n, m, |i, j| {
        Complex::new(T::lit(re[i * m + j]), T::lit(im[i * m + j]))
    }))
}

/// Adds circular complex Gaussian noise at `snr_db` relative to the mean
/// echo power: `sigma^2 = mean |Y|^2 / 10^(snr/10)`, variance `sigma^2 / 2`
/// per real component. `None` means noiseless and returns `sigma = 0`.
pub fn add_noise<T: Scalar>(
    y: &ComplexTensor<T>,
    snr_db: Option<f64>,
    seed: u64,
) -> Result<(ComplexTensor<T>, f64)> {
    let Some(snr_db) = snr_db else {
        return Ok((y.clone(), 0.0));
    };
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!("snr_db must be finite, got {snr_db}")));
    }
    let power = y.norm_sqr().to_f64_lossy() / y.len() as f64;
    if power == 0.0 {
        return Err(Error::InvalidArgument("SNR undefined for an all-zero echo".into()));
    }
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    Ok((add_complex_gaussian(y, sigma, 1.0, seed), sigma))
}

/// `y + sign * N`, `N ~ CN(0, sigma^2 I)`.
pub(crate) fn add_complex_gaussian<T: Scalar>(
    y: &ComplexTensor<T>,
    sigma: f64,
    sign: f64,
    seed: u64,
) -> ComplexTensor<T> {
    let mut r = rng::seeded(seed);
    let s = sigma / 2f64.sqrt();
    let mut out = y.clone();
    for i in 0..y.len() {
        let nr: f64 = r.sample(StandardNormal);
        let ni: f64 = r.sample(StandardNormal);
        out.re.data_mut()[i] += T::lit(sign * s * nr);
        out.im.data_mut()[i] += T::lit(sign * s * ni);
    }
    out
}

/// Rasterises a scene onto the grid for use as a metric reference: each
/// amplitude lands on its nearest pixel, the result is scaled to unit peak
/// magnitude and entries below 0.01 are cleared.
pub fn scene_to_image<T: Scalar>(scene: &Scene, grid: &ImageGrid) -> Result<ComplexTensor<T>> {
    scene.validate()?;
    let mut acc = vec![Complex::new(0.0f64, 0.0); grid.p * grid.q];
    for (i, s) in scene.scatterers.iter().enumerate() {
        let (p, q) = grid.nearest_pixel(s.x, s.y).ok_or_else(|| {
            Error::InvalidArgument(format!("scatterer {i} at ({}, {}) lies outside the grid", s.x, s.y))
        })?;
        acc[p * grid.q + q] += s.amplitude();
    }
    let peak = acc.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::InvalidArgument("scene amplitudes cancel everywhere".into()));
    }
    Ok(ComplexTensor::from_fn2(grid.p, grid.q, |p, q| {
        let z = acc[p * grid.q + q] / peak;
        if z.norm() < 0.01 {
            Complex::new(T::zero(), T::zero())
        } else {
            Complex::new(T::lit(z.re), T::lit(z.im))
        }
    }))
}
