use crate::scalar::Scalar;

/// Bilinear image rotation stored as a sparse linear map.
///
/// Row `i` (an output pixel) holds at most four `(source pixel, weight)`
/// pairs obtained by inverse-mapping the output pixel into the source image.
/// Source positions that fall outside the image contribute nothing (zero
/// fill). The rotation pivot is the pixel `(h / 2, w / 2)`, which is the
/// scene origin of an [`ImageGrid`](crate::signal::ImageGrid) and the exact
/// geometric centre for odd sizes.
///
/// Positive angles turn content from the row axis toward the column axis:
/// a pixel at offset `(dr, dc)` from the pivot moves to
/// `(dr cos t - dc sin t, dr sin t + dc cos t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationMap<T = f64> {
    h: usize,
    w: usize,
    angle_deg: f64,
    row_ptr: Vec<usize>,
    src: Vec<u32>,
    weight: Vec<T>,
}

// Source coordinates this close to an integer are snapped onto it so that
// multiples of 90 degrees give exact permutations.
const SNAP: f64 = 1e-9;

impl<T: Scalar> RotationMap<T> {
    pub fn new(h: usize, w: usize, angle_deg: f64) -> Self {
        let (s, c) = angle_deg.to_radians().sin_cos();
        let r0 = (h / 2) as f64;
        let c0 = (w / 2) as f64;
        let mut row_ptr = Vec::with_capacity(h * w + 1);
        let mut src = Vec::with_capacity(4 * h * w);
        let mut weight = Vec::with_capacity(4 * h * w);
        row_ptr.push(0);
        for r in 0..h {
            for col in 0..w {
                let dr = r as f64 - r0;
                let dc = col as f64 - c0;
                let sr = snap(r0 + dr * c + dc * s);
                let sc = snap(c0 - dr * s + dc * c);
                let rl = sr.floor();
                let cl = sc.floor();
                let fr = sr - rl;
                let fc = sc - cl;
                let corners = [
                    (rl, cl, (1.0 - fr) * (1.0 - fc)),
                    (rl, cl + 1.0, (1.0 - fr) * fc),
                    (rl + 1.0, cl, fr * (1.0 - fc)),
                    (rl + 1.0, cl + 1.0, fr * fc),
                ];
                for (rr, cc, wgt) in corners {
                    if wgt == 0.0 || rr < 0.0 || cc < 0.0 {
                        continue;
                    }
                    let (ri, ci) = (rr as usize, cc as usize);
                    if ri >= h || ci >= w {
                        continue;
                    }
                    src.push((ri * w + ci) as u32);
                    weight.push(T::lit(wgt));
                }
                row_ptr.push(src.len());
            }
        }
        Self {
            h,
            w,
            angle_deg,
            row_ptr,
            src,
            weight,
        }
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn angle_deg(&self) -> f64 {
        self.angle_deg
    }

    /// `(source index, weight)` pairs of output pixel `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.src[span.clone()]
            .iter()
            .zip(&self.weight[span])
            .map(|(&s, &w)| (s as usize, w))
    }

    /// Rotates one `h x w` plane: `dst = T src`.
    pub fn apply_plane(&self, src: &[T], dst: &mut [T]) {
        debug_assert_eq!(src.len(), self.h * self.w);
        for (i, d) in dst.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.weight[k] * src[self.src[k] as usize];
            }
            *d = acc;
        }
    }

    /// Adjoint (splat): `dst += T^t g`.
    pub fn apply_transpose_plane_acc(&self, g: &[T], dst: &mut [T]) {
        for (i, &gi) in g.iter().enumerate() {
            if gi == T::zero() {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                dst[self.src[k] as usize] += self.weight[k] * gi;
            }
        }
    }
}

#[inline]
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP {
        r
    } else {
        v
    }
}
