//! Dense numeric kernel: scalars, vectors, row-major matrices and a seeded
//! random stream.
//!
//! Everything above this module is written against the [`Scalar`] trait so the
//! same code runs in `f32` or `f64`. The experiments use `f64` throughout.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

/// Floating-point scalar the library is generic over.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; used for literals and sampled values.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + NumAssign
        + FromPrimitive
        + ToPrimitive
        + Sum
        + Default
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Inner product of two equal-length slices.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::dim(a.len(), b.len()));
    }
    Ok(dot_unchecked(a, b))
}

#[inline]
pub(crate) fn dot_unchecked<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Squared Euclidean norm. Bitwise equal to `dot(a, a)`.
#[inline]
pub fn sqnorm<T: Scalar>(a: &[T]) -> T {
    dot_unchecked(a, a)
}

/// Squared Euclidean distance between two equal-length slices.
#[inline]
pub(crate) fn sqdist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

/// Fixed-length vector with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector<T> {
    entries: Vec<T>,
}

impl<T: Scalar> Vector<T> {
    pub fn new(entries: Vec<T>) -> Result<Self> {
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("vector entry {i} is not finite")));
        }
        Ok(Self { entries })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            entries: vec![T::zero(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.entries
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.entries
    }

    pub fn into_inner(self) -> Vec<T> {
        self.entries
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        dot(&self.entries, &other.entries)
    }

    pub fn sqnorm(&self) -> T {
        sqnorm(&self.entries)
    }
}

impl<T> std::ops::Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.entries[i]
    }
}

impl<T> std::ops::IndexMut<usize> for Vector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.entries[i]
    }
}

/// Row-major dense matrix. Row `j` holds the weights of output neuron `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(rows * cols, data.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("matrix entry {i} is not finite")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// `M x`, checked.
    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols {
            return Err(Error::dim(self.cols, x.len()));
        }
        Ok((0..self.rows).map(|r| dot_unchecked(self.row(r), x)).collect())
    }
}

/// Seeded, platform-independent random stream.
///
/// Uniform draws come from ChaCha8 (a counter-mode stream cipher keyed by the
/// seed). Gaussian draws use the Box–Muller transform; both outputs of each
/// transform are used, the second one cached for the next call.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n` (`n > 0`), by rejection to avoid modulo bias.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u1 in (0, 1] keeps ln finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let phi = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * phi.sin());
        r * phi.cos()
    }

    /// `count` samples from N(mean, std²).
    pub fn gaussian<T: Scalar>(&mut self, mean: T, std: T, count: usize) -> Result<Vec<T>> {
        if !(std >= T::zero()) || !std.is_finite() {
            return Err(Error::Parameter(format!(
                "standard deviation must be finite and >= 0, got {std}"
            )));
        }
        Ok((0..count)
            .map(|_| mean + std * T::lit(self.normal()))
            .collect())
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<E>(&mut self, items: &mut [E]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Independent child stream, seeded from this stream's next output.
    pub fn fork(&mut self) -> Rng {
        Rng::new(self.next_u64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(dot(&[0.0, 0.0], &[5.5, -2.0]).unwrap(), 0.0);
        assert_eq!(dot(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn dot_length_mismatch() {
        let err = dot(&[1.0, 2.0], &[1.0]).unwrap_err();
        assert!(matches!(err, Error::Dimension { expected: 2, found: 1 }));
    }

    #[test]
    fn sqnorm_examples() {
        assert_eq!(sqnorm(&[3.0, 4.0]), 25.0);
        assert_eq!(sqnorm(&[0.0f64; 5]), 0.0);
        let s = 0.5f64.sqrt();
        assert!((sqnorm(&[s, s]) - 1.0).abs() < 1e-15);
        assert_eq!(sqnorm(&[1.0f32, 0.0]), 1.0f32);
    }

    #[test]
    fn vector_rejects_non_finite() {
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
        let v = Vector::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(v.sqnorm(), 25.0);
    }

    #[test]
    fn matrix_shape_checked() {
        assert!(Matrix::new(2, 2, vec![1.0; 3]).is_err());
        let m = Matrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.row(1), &[4.0, 5.0, 6.0]);
        assert_eq!(m.matvec(&[1.0, 0.0, -1.0]).unwrap(), vec![-2.0, -2.0]);
        assert!(m.matvec(&[1.0]).is_err());
    }

    #[test]
    fn gaussian_degenerate() {
        let mut rng = Rng::new(3);
        assert_eq!(rng.gaussian(0.0, 0.0, 3).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn gaussian_negative_std_rejected() {
        let mut rng = Rng::new(3);
        assert!(matches!(
            rng.gaussian(0.0, -1.0, 3),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn gaussian_sample_mean() {
        let mut rng = Rng::new(2024);
        let xs: Vec<f64> = rng.gaussian(0.0, 1.0, 10_000).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn gaussian_same_seed_same_stream() {
        let a: Vec<f64> = Rng::new(9).gaussian(1.0, 2.0, 100).unwrap();
        let b: Vec<f64> = Rng::new(9).gaussian(1.0, 2.0, 100).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn known_stream_prefix() {
        // Pinned so a dependency bump that changes the stream is noticed.
        let mut a = Rng::new(0);
        let first: Vec<u64> = (0..3).map(|_| a.next_u64()).collect();
        let mut b = Rng::new(0);
        let again: Vec<u64> = (0..3).map(|_| b.next_u64()).collect();
        assert_eq!(first, again);
        assert_eq!(first, vec![13080132717333068652, 8594738769458413623, 12896916468484187878]);
    }

    #[test]
    fn below_in_range_and_shuffle_is_permutation() {
        let mut rng = Rng::new(5);
        for n in 1..20 {
            assert!(rng.below(n) < n);
        }
        let mut v: Vec<usize> = (0..50).collect();
        rng.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(v, sorted);
    }
}
