//! Dense row-major tensors and their complex counterpart.
//!
//! A [`ComplexTensor`] keeps its real and imaginary planes as two
//! [`Tensor`]s of identical shape. Inside the autodiff graph the same data
//! is carried "planar", as one real tensor with a leading axis of length 2
//! (see [`ComplexTensor::to_planar`]); this is also the layout the
//! convolutional layers see, so the two planes become two input channels.

pub(crate) mod ops;
mod rotation;

pub use ops::{complex_matmul, conv2d, rotate_image, soft_threshold, Threshold};
pub use rotation::RotationMap;

pub(crate) use ops::kernels;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Real tensor, row-major.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Tensor<T = f64> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(
                "Tensor::new",
                format!("shape {shape:?} holds {n} values, got {}", data.len()),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, T::one())
    }

    pub fn full(shape: &[usize], v: T) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![v; n],
        }
    }

    pub fn scalar(v: T) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> T {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} -> {shape:?}", self.shape),
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Element of a 2-D tensor.
    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.shape[1] + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        let w = self.shape[1];
        self.data[r * w + c] = v;
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::shape(
                "zip_map",
                format!("{:?} vs {:?}", self.shape, other.shape),
            ));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn sum_sq(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn max(&self) -> T {
        self.data
            .iter()
            .copied()
            .fold(T::neg_infinity(), |a, b| a.max(b))
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        best
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn add_assign_slice(&mut self, other: &[T]) {
        for (a, &b) in self.data.iter_mut().zip(other) {
            *a += b;
        }
    }
}

/// Complex tensor as a pair of same-shaped real planes.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ComplexTensor<T = f64> {
    pub re: Tensor<T>,
    pub im: Tensor<T>,
}

impl<T: Scalar> ComplexTensor<T> {
    pub fn new(re: Tensor<T>, im: Tensor<T>) -> Result<Self> {
        if re.shape != im.shape {
            return Err(Error::shape(
                "ComplexTensor::new",
                format!("re {:?} vs im {:?}", re.shape, im.shape),
            ));
        }
        Ok(Self { re, im })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            re: Tensor::zeros(shape),
            im: Tensor::zeros(shape),
        }
    }

    pub fn from_real(re: Tensor<T>) -> Self {
        let im = Tensor::zeros(re.shape());
        Self { re, im }
    }

    /// Builds a 2-D complex tensor from a per-entry closure.
    pub fn from_fn2(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let z = f(r, c);
                re.push(z.re);
                im.push(z.im);
            }
        }
        Self {
            re: Tensor {
                shape: vec![rows, cols],
                data: re,
            },
            im: Tensor {
                shape: vec![rows, cols],
                data: im,
            },
        }
    }

    pub fn shape(&self) -> &[usize] {
        self.re.shape()
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.re.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.re.shape[1]
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex<T> {
        Complex::new(self.re.at(r, c), self.im.at(r, c))
    }

    #[inline]
    pub fn get(&self, i: usize) -> Complex<T> {
        Complex::new(self.re.data[i], self.im.data[i])
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex<T>) {
        self.re.set(r, c, v.re);
        self.im.set(r, c, v.im);
    }

    #[inline]
    pub fn set_flat(&mut self, i: usize, v: Complex<T>) {
        self.re.data[i] = v.re;
        self.im.data[i] = v.im;
    }

    pub fn iter(&self) -> impl Iterator<Item = Complex<T>> + '_ {
        self.re
            .data
            .iter()
            .zip(&self.im.data)
            .map(|(&r, &i)| Complex::new(r, i))
    }

    /// Conjugate transpose of a 2-D tensor.
    pub fn conj_transpose(&self) -> Self {
        let (r, c) = (self.rows(), self.cols());
        Self::from_fn2(c, r, |i, j| self.at(j, i).conj())
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        complex_matmul(self, rhs)
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        Ok(Self {
            re: self.re.zip_map(&rhs.re, |a, b| a + b)?,
            im: self.im.zip_map(&rhs.im, |a, b| a + b)?,
        })
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        Ok(Self {
            re: self.re.zip_map(&rhs.re, |a, b| a - b)?,
            im: self.im.zip_map(&rhs.im, |a, b| a - b)?,
        })
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        let mut out = self.clone();
        for i in 0..self.len() {
            out.set_flat(i, self.get(i) * s);
        }
        out
    }

    pub fn scale_real(&self, s: T) -> Self {
        Self {
            re: self.re.map(|v| v * s),
            im: self.im.map(|v| v * s),
        }
    }

    /// Squared Frobenius norm.
    pub fn norm_sqr(&self) -> T {
        self.re.sum_sq() + self.im.sum_sq()
    }

    /// Elementwise magnitude.
    pub fn abs(&self) -> Tensor<T> {
        Tensor {
            shape: self.re.shape.clone(),
            data: self
                .re
                .data
                .iter()
                .zip(&self.im.data)
                .map(|(&r, &i)| r.hypot(i))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.iter().map(|z| z.norm()).fold(T::zero(), |a, b| a.max(b))
    }

    /// Inner product `<self, rhs> = sum conj(self) * rhs`.
    pub fn inner(&self, rhs: &Self) -> Result<Complex<T>> {
        if self.shape() != rhs.shape() {
            return Err(Error::shape(
                "inner",
                format!("{:?} vs {:?}", self.shape(), rhs.shape()),
            ));
        }
        Ok(self
            .iter()
            .zip(rhs.iter())
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| {
                acc + a.conj() * b
            }))
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    /// Stacks the planes into one real tensor of shape `[2, ..shape]`.
    pub fn to_planar(&self) -> Tensor<T> {
        let mut shape = vec![2];
        shape.extend_from_slice(&self.re.shape);
        let mut data = Vec::with_capacity(2 * self.len());
        data.extend_from_slice(&self.re.data);
        data.extend_from_slice(&self.im.data);
        Tensor { shape, data }
    }

    /// Inverse of [`to_planar`](Self::to_planar).
    pub fn from_planar(t: &Tensor<T>) -> Result<Self> {
        if t.shape.first() != Some(&2) {
            return Err(Error::shape(
                "from_planar",
                format!("leading axis must be 2, got {:?}", t.shape),
            ));
        }
        let shape = t.shape[1..].to_vec();
        let half = t.len() / 2;
        Ok(Self {
            re: Tensor {
                shape: shape.clone(),
                data: t.data[..half].to_vec(),
            },
            im: Tensor {
                shape,
                data: t.data[half..].to_vec(),
            },
        })
    }

    /// Casts to another scalar precision.
    pub fn cast<U: Scalar>(&self) -> ComplexTensor<U> {
        ComplexTensor {
            re: self.re.cast(),
            im: self.im.cast(),
        }
    }
}

impl<T: Scalar> Tensor<T> {
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|&v| U::lit(v.to_f64_lossy()))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_round_trip() {
        let z = ComplexTensor::<f64>::from_fn2(3, 2, |r, c| Complex::new(r as f64, -(c as f64)));
        let p = z.to_planar();
        assert_eq!(p.shape(), &[2, 3, 2]);
        assert_eq!(ComplexTensor::from_planar(&p).unwrap(), z);
    }

    #[test]
    fn new_rejects_bad_length() {
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 5]).is_err());
        let re = Tensor::<f64>::zeros(&[2, 2]);
        let im = Tensor::<f64>::zeros(&[2, 3]);
        assert!(ComplexTensor::new(re, im).is_err());
    }

    #[test]
    fn inner_is_conjugate_linear_in_first_argument() {
        let a = ComplexTensor::<f64>::from_fn2(2, 2, |r, c| Complex::new(r as f64 + 1.0, c as f64));
        let b = ComplexTensor::<f64>::from_fn2(2, 2, |r, c| Complex::new(c as f64, 1.0 - r as f64));
        let s = Complex::new(0.3, -1.2);
        let lhs = a.scale(s).inner(&b).unwrap();
        let rhs = s.conj() * a.inner(&b).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }
}
