//! Eager tensor operations and the slice-level kernels they share with the
//! autodiff graph.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{ComplexTensor, RotationMap, Tensor};

/// Complex matrix product `A B`.
pub fn complex_matmul<T: Scalar>(a: &ComplexTensor<T>, b: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
    if a.shape().len() != 2 || b.shape().len() != 2 {
        return Err(Error::shape(
            "complex_matmul",
            format!("expected matrices, got {:?} and {:?}", a.shape(), b.shape()),
        ));
    }
    let (n, k) = (a.rows(), a.cols());
    let (k2, m) = (b.rows(), b.cols());
    if k != k2 {
        return Err(Error::shape(
            "complex_matmul",
            format!("inner dimensions {k} and {k2} differ"),
        ));
    }
    let mut out = ComplexTensor::zeros(&[n, m]);
    kernels::cmatmul_acc(
        a.re.data(),
        a.im.data(),
        b.re.data(),
        b.im.data(),
        n,
        k,
        m,
        &mut out.re.data,
        &mut out.im.data,
    );
    Ok(out)
}

/// Zero-padded 2-D cross-correlation of a `[C_in, H, W]` input with a
/// `[C_out, C_in, k, k]` kernel, plus an optional per-output-channel bias.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    padding: usize,
) -> Result<Tensor<T>> {
    let geom = ConvGeom::infer(input.shape(), kernel.shape(), padding)?;
    if let Some(b) = bias {
        if b.len() != geom.cout {
            return Err(Error::shape(
                "conv2d",
                format!("bias has {} entries for {} output channels", b.len(), geom.cout),
            ));
        }
    }
    let mut out = Tensor::zeros(&[geom.cout, geom.ho, geom.wo]);
    kernels::conv2d_forward(&geom, input.data(), kernel.data(), bias.map(|b| b.data()), &mut out.data);
    Ok(out)
}

/// Threshold argument of [`soft_threshold`].
#[derive(Clone, Copy, Debug)]
pub enum Threshold<'a, T> {
    Scalar(T),
    Map(&'a Tensor<T>),
}

/// Complex soft threshold `x / |x| * max(|x| - t, 0)`, zero where `x = 0`.
pub fn soft_threshold<T: Scalar>(x: &ComplexTensor<T>, t: Threshold<'_, T>) -> Result<ComplexTensor<T>> {
    let n = x.len();
    let tvals: Vec<T> = match t {
        Threshold::Scalar(v) => vec![v; n],
        Threshold::Map(m) => {
            if m.len() != n {
                return Err(Error::shape(
                    "soft_threshold",
                    format!("threshold {:?} vs input {:?}", m.shape(), x.shape()),
                ));
            }
            m.data().to_vec()
        }
    };
    if tvals.iter().any(|&v| v < T::zero() || v.is_nan()) {
        return Err(Error::InvalidArgument(
            "soft_threshold: threshold must be nonnegative".into(),
        ));
    }
    let mut out = x.clone();
    for i in 0..n {
        let f = kernels::shrink_factor(x.re.data[i], x.im.data[i], tvals[i]);
        out.re.data[i] = x.re.data[i] * f;
        out.im.data[i] = x.im.data[i] * f;
    }
    Ok(out)
}

/// Rotates a complex image about its centre pixel by `angle_deg` with
/// bilinear interpolation, applied to both planes.
pub fn rotate_image<T: Scalar>(x: &ComplexTensor<T>, angle_deg: f64) -> ComplexTensor<T> {
    let (h, w) = (x.rows(), x.cols());
    let map = RotationMap::new(h, w, angle_deg);
    let mut out = ComplexTensor::zeros(&[h, w]);
    map.apply_plane(x.re.data(), &mut out.re.data);
    map.apply_plane(x.im.data(), &mut out.im.data);
    out
}

/// Shape bookkeeping for a single convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub k: usize,
    pub pad: usize,
    pub ho: usize,
    pub wo: usize,
}

impl ConvGeom {
    pub fn infer(input: &[usize], kernel: &[usize], pad: usize) -> Result<Self> {
        if input.len() != 3 || kernel.len() != 4 {
            return Err(Error::shape(
                "conv2d",
                format!("input {input:?} must be [C,H,W] and kernel {kernel:?} [O,C,k,k]"),
            ));
        }
        let (cin, h, w) = (input[0], input[1], input[2]);
        let (cout, kc, kh, kw) = (kernel[0], kernel[1], kernel[2], kernel[3]);
        if kh != kw || kh % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "conv2d: kernel must be square with odd size, got {kh}x{kw}"
            )));
        }
        if kc != cin {
            return Err(Error::shape(
                "conv2d",
                format!("kernel expects {kc} input channels, input has {cin}"),
            ));
        }
        if h + 2 * pad < kh || w + 2 * pad < kw {
            return Err(Error::shape("conv2d", "kernel larger than padded input"));
        }
        Ok(Self {
            cin,
            h,
            w,
            cout,
            k: kh,
            pad,
            ho: h + 2 * pad + 1 - kh,
            wo: w + 2 * pad + 1 - kw,
        })
    }

    /// Output columns `[lo, hi)` that read a valid input column at kernel offset `kx`.
    #[inline]
    fn ox_range(&self, kx: usize) -> (usize, usize) {
        let lo = self.pad.saturating_sub(kx);
        let hi = (self.w + self.pad).saturating_sub(kx).min(self.wo);
        (lo, hi.max(lo))
    }
}

pub(crate) mod kernels {
    use super::ConvGeom;
    use crate::scalar::Scalar;

    /// `C += A B` for planar complex matrices `A: n x k`, `B: k x m`.
    #[allow(clippy::too_many_arguments)]
    pub fn cmatmul_acc<T: Scalar>(
        ar: &[T],
        ai: &[T],
        br: &[T],
        bi: &[T],
        n: usize,
        k: usize,
        m: usize,
        cr: &mut [T],
        ci: &mut [T],
    ) {
        for i in 0..n {
            let cr_row = &mut cr[i * m..(i + 1) * m];
            let ci_row = &mut ci[i * m..(i + 1) * m];
            for p in 0..k {
                let (xr, xi) = (ar[i * k + p], ai[i * k + p]);
                if xr == T::zero() && xi == T::zero() {
                    continue;
                }
                let br_row = &br[p * m..(p + 1) * m];
                let bi_row = &bi[p * m..(p + 1) * m];
                for j in 0..m {
                    cr_row[j] += xr * br_row[j] - xi * bi_row[j];
                    ci_row[j] += xr * bi_row[j] + xi * br_row[j];
                }
            }
        }
    }

    /// Planar conjugate transpose of an `r x c` complex matrix.
    pub fn conj_transpose<T: Scalar>(re: &[T], im: &[T], r: usize, c: usize) -> (Vec<T>, Vec<T>) {
        let mut tr = vec![T::zero(); r * c];
        let mut ti = vec![T::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                tr[j * r + i] = re[i * c + j];
                ti[j * r + i] = -im[i * c + j];
            }
        }
        (tr, ti)
    }

    pub fn conv2d_forward<T: Scalar>(g: &ConvGeom, x: &[T], wgt: &[T], bias: Option<&[T]>, out: &mut [T]) {
        let plane = g.ho * g.wo;
        for o in 0..g.cout {
            let out_o = &mut out[o * plane..(o + 1) * plane];
            if let Some(b) = bias {
                out_o.iter_mut().for_each(|v| *v = b[o]);
            }
            for c in 0..g.cin {
                let x_c = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
                for ky in 0..g.k {
                    for kx in 0..g.k {
                        let wv = wgt[((o * g.cin + c) * g.k + ky) * g.k + kx];
                        if wv == T::zero() {
                            continue;
                        }
                        let (lo, hi) = g.ox_range(kx);
                        if lo >= hi {
                            continue;
                        }
                        let ix0 = lo + kx - g.pad;
                        for oy in 0..g.ho {
                            let iy = oy + ky;
                            if iy < g.pad || iy - g.pad >= g.h {
                                continue;
                            }
                            let iy = iy - g.pad;
                            let src = &x_c[iy * g.w + ix0..iy * g.w + ix0 + (hi - lo)];
                            let dst = &mut out_o[oy * g.wo + lo..oy * g.wo + hi];
                            for (d, &s) in dst.iter_mut().zip(src) {
                                *d += wv * s;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Accumulates the input gradient of a convolution.
    pub fn conv2d_grad_input<T: Scalar>(g: &ConvGeom, gout: &[T], wgt: &[T], gx: &mut [T]) {
        let plane = g.ho * g.wo;
        for o in 0..g.cout {
            let g_o = &gout[o * plane..(o + 1) * plane];
            for c in 0..g.cin {
                let gx_c = &mut gx[c * g.h * g.w..(c + 1) * g.h * g.w];
                for ky in 0..g.k {
                    for kx in 0..g.k {
                        let wv = wgt[((o * g.cin + c) * g.k + ky) * g.k + kx];
                        if wv == T::zero() {
                            continue;
                        }
                        let (lo, hi) = g.ox_range(kx);
                        if lo >= hi {
                            continue;
                        }
                        let ix0 = lo + kx - g.pad;
                        for oy in 0..g.ho {
                            let iy = oy + ky;
                            if iy < g.pad || iy - g.pad >= g.h {
                                continue;
                            }
                            let iy = iy - g.pad;
                            let src = &g_o[oy * g.wo + lo..oy * g.wo + hi];
                            let dst = &mut gx_c[iy * g.w + ix0..iy * g.w + ix0 + (hi - lo)];
                            for (d, &s) in dst.iter_mut().zip(src) {
                                *d += wv * s;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Accumulates kernel and bias gradients of a convolution.
    pub fn conv2d_grad_params<T: Scalar>(
        g: &ConvGeom,
        gout: &[T],
        x: &[T],
        gw: Option<&mut [T]>,
        gb: Option<&mut [T]>,
    ) {
        let plane = g.ho * g.wo;
        if let Some(gb) = gb {
            for o in 0..g.cout {
                gb[o] += gout[o * plane..(o + 1) * plane].iter().copied().sum::<T>();
            }
        }
        let Some(gw) = gw else { return };
        for o in 0..g.cout {
            let g_o = &gout[o * plane..(o + 1) * plane];
            for c in 0..g.cin {
                let x_c = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
                for ky in 0..g.k {
                    for kx in 0..g.k {
                        let (lo, hi) = g.ox_range(kx);
                        if lo >= hi {
                            continue;
                        }
                        let ix0 = lo + kx - g.pad;
                        let mut acc = T::zero();
                        for oy in 0..g.ho {
                            let iy = oy + ky;
                            if iy < g.pad || iy - g.pad >= g.h {
                                continue;
                            }
                            let iy = iy - g.pad;
                            let a = &g_o[oy * g.wo + lo..oy * g.wo + hi];
                            let b = &x_c[iy * g.w + ix0..iy * g.w + ix0 + (hi - lo)];
                            acc += a.iter().zip(b).map(|(&p, &q)| p * q).sum::<T>();
                        }
                        gw[((o * g.cin + c) * g.k + ky) * g.k + kx] += acc;
                    }
                }
            }
        }
    }

    /// Multiplier `max(|x| - t, 0) / |x|` applied to both planes; 0 when `|x| <= t`.
    #[inline]
    pub fn shrink_factor<T: Scalar>(re: T, im: T, t: T) -> T {
        let mag = re.hypot(im);
        if mag > t && mag > T::zero() {
            (mag - t) / mag
        } else {
            T::zero()
        }
    }
}
