//! Orthonormal radix-2 transforms: the bit-reversed FFT (`fftbr`), its
//! inverse (`ifftbr`), the fast Walsh-Hadamard transform (`fwht`) and the
//! one-level doubling update shared by all three.
//!
//! Every butterfly carries a `1/sqrt(2)` factor, so each transform is unitary.
//! `fftbr(y)[k] = n^-1/2 sum_i y[R(i)] exp(-2 pi i k / n)` where `R` reverses
//! the `m` index bits: a decimation-in-time FFT that skips the input reorder.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{QmcError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    /// Walsh-Hadamard, paired with digital nets and DSI kernels.
    Fwht,
    /// Bit-reversed FFT, paired with lattices and SI kernels.
    Fftbr,
}

impl TransformKind {
    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Fwht => "fwht",
            TransformKind::Fftbr => "fftbr",
        }
    }
}

/// `log2(n)` when `n` is a positive power of two.
pub fn log2_exact(n: usize) -> Result<u32> {
    if n.is_power_of_two() {
        Ok(n.trailing_zeros())
    } else {
        Err(QmcError::NotPowerOfTwo(n))
    }
}

/// Sub-transforms at most this many bytes long run stage by stage; larger
/// ones recurse on quarters and merge two stages per pass, so most of the
/// work happens in cache.
const LEAF_BYTES: usize = 32 << 10;

fn leaf_len<T>() -> usize {
    (LEAF_BYTES / std::mem::size_of::<T>()).max(4)
}

fn fwht_generic<T>(y: &mut [T]) -> Result<()>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    log2_exact(y.len())?;
    fwht_rec(y, leaf_len::<T>());
    Ok(())
}

fn fwht_rec<T>(y: &mut [T], leaf: usize)
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let n = y.len();
    if n <= leaf {
        let mut h = 1;
        while h < n {
            for block in y.chunks_exact_mut(2 * h) {
                let (lo, hi) = block.split_at_mut(h);
                for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (u, v) = (*a, *b);
                    *a = (u + v) * FRAC_1_SQRT_2;
                    *b = (u - v) * FRAC_1_SQRT_2;
                }
            }
            h *= 2;
        }
        return;
    }
    let q = n / 4;
    let (q0, rest) = y.split_at_mut(q);
    let (q1, rest) = rest.split_at_mut(q);
    let (q2, q3) = rest.split_at_mut(q);
    for part in [&mut *q0, &mut *q1, &mut *q2, &mut *q3] {
        fwht_rec(part, leaf);
    }
    for k in 0..q {
        let (a, b, c, d) = (q0[k], q1[k], q2[k], q3[k]);
        let (s0, d0, s1, d1) = (a + b, a - b, c + d, c - d);
        q0[k] = (s0 + s1) * 0.5;
        q2[k] = (s0 - s1) * 0.5;
        q1[k] = (d0 + d1) * 0.5;
        q3[k] = (d0 - d1) * 0.5;
    }
}

/// In-place orthonormal Walsh-Hadamard transform (an involution).
pub fn fwht_inplace(y: &mut [f64]) -> Result<()> {
    fwht_generic(y)
}

pub fn fwht(y: &[f64]) -> Result<Vec<f64>> {
    let mut out = y.to_vec();
    fwht_inplace(&mut out)?;
    Ok(out)
}

/// Walsh-Hadamard transform applied to complex data componentwise.
pub fn fwht_complex_inplace(y: &mut [Complex64]) -> Result<()> {
    fwht_generic(y)
}

/// `exp(-2 pi i k / n)` for `k < n / 2`.
fn twiddles(n: usize) -> Vec<Complex64> {
    (0..n / 2)
        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
        .collect()
}

/// Decimation-in-time stages on `y`, a block of a length-`2 * tw.len()`
/// transform (the twiddle for stage `h` depends only on `h`).
fn fftbr_with(y: &mut [Complex64], tw: &[Complex64]) {
    let big = 2 * tw.len();
    let n = y.len();
    if n <= leaf_len::<Complex64>() {
        let mut h = 1;
        while h < n {
            let stride = big / (2 * h);
            for block in y.chunks_exact_mut(2 * h) {
                let (lo, hi) = block.split_at_mut(h);
                for (k, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    let u = *a;
                    let v = *b * tw[k * stride];
                    *a = (u + v) * FRAC_1_SQRT_2;
                    *b = (u - v) * FRAC_1_SQRT_2;
                }
            }
            h *= 2;
        }
        return;
    }
    let q = n / 4;
    let (q0, rest) = y.split_at_mut(q);
    let (q1, rest) = rest.split_at_mut(q);
    let (q2, q3) = rest.split_at_mut(q);
    for part in [&mut *q0, &mut *q1, &mut *q2, &mut *q3] {
        fftbr_with(part, tw);
    }
    let (s1, s2) = (big / (2 * q), big / (4 * q));
    for k in 0..q {
        let w1 = tw[k * s1];
        let (a, b) = (q0[k], q1[k] * w1);
        let (c, d) = (q2[k], q3[k] * w1);
        let (a, b, c, d) = (a + b, a - b, c + d, c - d);
        let (c, d) = (c * tw[k * s2], d * tw[(k + q) * s2]);
        q0[k] = (a + c) * 0.5;
        q2[k] = (a - c) * 0.5;
        q1[k] = (b + d) * 0.5;
        q3[k] = (b - d) * 0.5;
    }
}

/// Exact reverse of [`fftbr_with`]: decimation-in-frequency stages.
fn ifftbr_with(y: &mut [Complex64], tw: &[Complex64]) {
    let big = 2 * tw.len();
    let n = y.len();
    if n <= leaf_len::<Complex64>() {
        let mut h = n / 2;
        while h >= 1 {
            let stride = big / (2 * h);
            for block in y.chunks_exact_mut(2 * h) {
                let (lo, hi) = block.split_at_mut(h);
                for (k, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    let (s, d) = (*a, *b);
                    *a = (s + d) * FRAC_1_SQRT_2;
                    *b = (s - d) * tw[k * stride].conj() * FRAC_1_SQRT_2;
                }
            }
            h /= 2;
        }
        return;
    }
    let q = n / 4;
    let (q0, rest) = y.split_at_mut(q);
    let (q1, rest) = rest.split_at_mut(q);
    let (q2, q3) = rest.split_at_mut(q);
    let (s1, s2) = (big / (2 * q), big / (4 * q));
    for k in 0..q {
        let (a, c) = (q0[k], q2[k]);
        let (b, d) = (q1[k], q3[k]);
        let (a, c) = (a + c, (a - c) * tw[k * s2].conj());
        let (b, d) = (b + d, (b - d) * tw[(k + q) * s2].conj());
        let w1 = tw[k * s1].conj();
        q0[k] = (a + b) * 0.5;
        q1[k] = (a - b) * w1 * 0.5;
        q2[k] = (c + d) * 0.5;
        q3[k] = (c - d) * w1 * 0.5;
    }
    for part in [q0, q1, q2, q3] {
        ifftbr_with(part, tw);
    }
}

pub fn fftbr_inplace(y: &mut [Complex64]) -> Result<()> {
    log2_exact(y.len())?;
    fftbr_with(y, &twiddles(y.len()));
    Ok(())
}

pub fn ifftbr_inplace(y: &mut [Complex64]) -> Result<()> {
    log2_exact(y.len())?;
    ifftbr_with(y, &twiddles(y.len()));
    Ok(())
}

pub fn fftbr(y: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut out = y.to_vec();
    fftbr_inplace(&mut out)?;
    Ok(out)
}

pub fn ifftbr(y: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut out = y.to_vec();
    ifftbr_inplace(&mut out)?;
    Ok(out)
}

/// `fftbr` of real input.
pub fn fftbr_real(y: &[f64]) -> Result<Vec<Complex64>> {
    let mut out: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fftbr_inplace(&mut out)?;
    Ok(out)
}

/// Transforms `data.len() / n` stacked sequences of length `n` in parallel.
pub fn fwht_many(data: &mut [f64], n: usize) -> Result<()> {
    check_stack(data.len(), n)?;
    data.par_chunks_mut(n).for_each(|s| fwht_generic(s).expect("length checked"));
    Ok(())
}

pub fn fftbr_many(data: &mut [Complex64], n: usize) -> Result<()> {
    check_stack(data.len(), n)?;
    let tw = twiddles(n);
    data.par_chunks_mut(n).for_each(|s| fftbr_with(s, &tw));
    Ok(())
}

pub fn ifftbr_many(data: &mut [Complex64], n: usize) -> Result<()> {
    check_stack(data.len(), n)?;
    let tw = twiddles(n);
    data.par_chunks_mut(n).for_each(|s| ifftbr_with(s, &tw));
    Ok(())
}

fn check_stack(len: usize, n: usize) -> Result<()> {
    log2_exact(n)?;
    if len % n != 0 {
        return Err(QmcError::Length {
            expected: (len / n + 1) * n,
            got: len,
        });
    }
    Ok(())
}

/// `w_m[i] = exp(-pi i sqrt(-1) / 2^m)` for the FFT kind, all ones for FWHT.
pub fn omega_vector(kind: TransformKind, m: u32) -> Vec<Complex64> {
    let n = 1usize << m;
    match kind {
        TransformKind::Fwht => vec![Complex64::new(1.0, 0.0); n],
        TransformKind::Fftbr => (0..n)
            .map(|i| Complex64::from_polar(1.0, -PI * i as f64 / n as f64))
            .collect(),
    }
}

/// Transformed values of a length-`2^m` sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVector {
    pub kind: TransformKind,
    pub values: Vec<Complex64>,
}

impl SpectralVector {
    /// Forward transform of real samples.
    pub fn forward(kind: TransformKind, y: &[f64]) -> Result<Self> {
        let mut values: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        forward_inplace(kind, &mut values)?;
        Ok(Self { kind, values })
    }

    pub fn forward_complex(kind: TransformKind, y: &[Complex64]) -> Result<Self> {
        let mut values = y.to_vec();
        forward_inplace(kind, &mut values)?;
        Ok(Self { kind, values })
    }

    pub fn m(&self) -> u32 {
        self.values.len().trailing_zeros()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Real parts; exact for FWHT of real data.
    pub fn real(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.re).collect()
    }
}

pub fn forward_inplace(kind: TransformKind, y: &mut [Complex64]) -> Result<()> {
    match kind {
        TransformKind::Fwht => fwht_complex_inplace(y),
        TransformKind::Fftbr => fftbr_inplace(y),
    }
}

pub fn inverse_inplace(kind: TransformKind, y: &mut [Complex64]) -> Result<()> {
    match kind {
        TransformKind::Fwht => fwht_complex_inplace(y),
        TransformKind::Fftbr => ifftbr_inplace(y),
    }
}

/// Combines the transform of the first `2^m` samples with the transform of
/// the next `2^m` into the level-`m + 1` transform of their concatenation.
pub fn merge_double(old: &SpectralVector, new: &SpectralVector) -> Result<SpectralVector> {
    if old.kind != new.kind {
        return Err(QmcError::KindMismatch(format!(
            "cannot merge {} with {} values",
            old.kind.name(),
            new.kind.name()
        )));
    }
    if old.len() != new.len() {
        return Err(QmcError::Length {
            expected: old.len(),
            got: new.len(),
        });
    }
    let n = old.len();
    let w = omega_vector(old.kind, old.m());
    let mut values = vec![Complex64::new(0.0, 0.0); 2 * n];
    let (lo, hi) = values.split_at_mut(n);
    for i in 0..n {
        let t = new.values[i] * w[i];
        lo[i] = (old.values[i] + t) * FRAC_1_SQRT_2;
        hi[i] = (old.values[i] - t) * FRAC_1_SQRT_2;
    }
    Ok(SpectralVector {
        kind: old.kind,
        values,
    })
}

/// Transforms only `y_new` and merges it with `old` (see [`merge_double`]).
pub fn transform_update_double(old: &SpectralVector, kind: TransformKind, y_new: &[Complex64]) -> Result<SpectralVector> {
    if old.kind != kind {
        return Err(QmcError::KindMismatch(format!(
            "spectral values are {}, update requested {}",
            old.kind.name(),
            kind.name()
        )));
    }
    let new = SpectralVector::forward_complex(kind, y_new)?;
    merge_double(old, &new)
}
