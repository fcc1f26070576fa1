//! Base-`b` digit manipulation shared by every generator and transform.
//!
//! Base-2 paths operate on packed `u64` words; general bases use one `u32`
//! per digit, least significant digit first.

use crate::error::{QmcError, Result};

/// Largest number of base-2 digits that fit a machine word.
pub const MAX_BITS: u32 = 64;

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut k = 3;
    while k * k <= n {
        if n % k == 0 {
            return false;
        }
        k += 2;
    }
    true
}

/// The first `count` primes in increasing order.
pub fn first_primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut k = 2;
    while out.len() < count {
        if is_prime(k) {
            out.push(k);
        }
        k += 1;
    }
    out
}

pub(crate) fn check_base(base: u64) -> Result<()> {
    if is_prime(base) {
        Ok(())
    } else {
        Err(QmcError::InvalidBase(base))
    }
}

/// `base^m` as `u128`, or `None` when it overflows.
pub fn checked_pow(base: u64, m: u32) -> Option<u128> {
    (base as u128).checked_pow(m)
}

/// Largest `m` such that `base^m` still fits in a `u64` index space.
pub fn max_digits(base: u64) -> u32 {
    if base == 2 {
        return MAX_BITS;
    }
    let mut m = 0;
    let mut p: u128 = 1;
    while p * base as u128 <= u64::MAX as u128 + 1 {
        p *= base as u128;
        m += 1;
    }
    m
}

fn check_index(i: u64, base: u64, m: u32) -> Result<()> {
    check_base(base)?;
    if m > max_digits(base) {
        return Err(QmcError::TooManyDigits { base, m });
    }
    let bound = checked_pow(base, m).expect("bounded by max_digits");
    if (i as u128) >= bound {
        return Err(QmcError::Range { value: i, bound });
    }
    Ok(())
}

/// An index together with the number of digits considered significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitIndex {
    value: u64,
    width: u32,
}

impl BitIndex {
    pub fn new(value: u64, width: u32) -> Result<Self> {
        check_index(value, 2, width)?;
        Ok(Self { value, width })
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn width(self) -> u32 {
        self.width
    }

    pub fn reversed(self) -> Self {
        Self {
            value: reverse_bits(self.value, self.width),
            width: self.width,
        }
    }
}

/// Base-`b` digits of an integer, least significant first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitVector {
    base: u64,
    digits: Vec<u32>,
}

impl DigitVector {
    pub fn from_digits(base: u64, digits: Vec<u32>) -> Result<Self> {
        check_base(base)?;
        if digits.is_empty() {
            return Err(QmcError::InvalidArgument("digit vector must be non-empty".into()));
        }
        if let Some(&bad) = digits.iter().find(|&&d| d as u64 >= base) {
            return Err(QmcError::Range {
                value: bad as u64,
                bound: base as u128,
            });
        }
        Ok(Self { base, digits })
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// Reconstructs `sum_t digit_t * base^t`.
    pub fn value(&self) -> u128 {
        self.digits
            .iter()
            .rev()
            .fold(0u128, |acc, &d| acc * self.base as u128 + d as u128)
    }
}

/// First `m` base-`base` digits of `i`.
pub fn digit_vector(i: u64, base: u64, m: u32) -> Result<DigitVector> {
    check_index(i, base, m)?;
    if m == 0 {
        return Err(QmcError::InvalidArgument("digit count must be positive".into()));
    }
    let mut digits = Vec::with_capacity(m as usize);
    let mut rest = i;
    for _ in 0..m {
        digits.push((rest % base) as u32);
        rest /= base;
    }
    Ok(DigitVector { base, digits })
}

/// Digits of `i` written into `out` (least significant first); no validation.
pub(crate) fn fill_digits(mut i: u64, base: u64, out: &mut [u32]) {
    for d in out.iter_mut() {
        *d = (i % base) as u32;
        i /= base;
    }
}

/// Converts a packed word with `t_max` significant bits (MSB = first digit)
/// to a coordinate in `[0, 1)`, truncating to the 53-bit mantissa.
#[inline]
pub fn word_to_unit(word: u64, t_max: u32) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    if t_max > 53 {
        (word >> (t_max - 53)) as f64 * SCALE
    } else {
        (word << (53 - t_max)) as f64 * SCALE
    }
}

/// `sum_t digits[t] * base^-(t+1)` computed by Horner's rule, kept below 1.
pub fn digits_to_unit(digits: &[u32], base: u64) -> f64 {
    let b = base as f64;
    let x = digits.iter().rev().fold(0.0, |acc, &d| (acc + d as f64) / b);
    clamp_unit(x)
}

/// Maps values that rounded up to 1.0 back into the half-open unit interval.
#[inline]
pub(crate) fn clamp_unit(x: f64) -> f64 {
    if x >= 1.0 {
        1.0 - f64::EPSILON / 2.0
    } else {
        x
    }
}

/// Radical inverse of `i` in `base` using its first `m` digits.
pub fn radical_inverse(i: u64, base: u64, m: u32) -> Result<f64> {
    check_index(i, base, m)?;
    if base == 2 {
        return Ok(word_to_unit(i.reverse_bits(), 64));
    }
    let mut digits = vec![0u32; m as usize];
    fill_digits(i, base, &mut digits);
    Ok(digits_to_unit(&digits, base))
}

/// Reflected base-`base` Gray code of `i`.
pub fn gray_code(i: u64, base: u64) -> Result<u64> {
    check_base(base)?;
    if base == 2 {
        return Ok(i ^ (i >> 1));
    }
    let mut digits = Vec::new();
    let mut rest = i;
    while rest > 0 {
        digits.push(rest % base);
        rest /= base;
    }
    // Walking from the most significant digit, every odd output digit
    // reflects all digits below it.
    let mut reflect = false;
    let mut out: u64 = 0;
    for &d in digits.iter().rev() {
        let g = if reflect { base - 1 - d } else { d };
        if g % 2 == 1 {
            reflect = !reflect;
        }
        out = out * base + g;
    }
    Ok(out)
}

#[inline]
pub(crate) fn reverse_bits(i: u64, m: u32) -> u64 {
    if m == 0 {
        0
    } else {
        i.reverse_bits() >> (64 - m)
    }
}

/// Reverses the lowest `m` bits of `i`.
pub fn bit_reverse(i: u64, m: u32) -> Result<u64> {
    check_index(i, 2, m)?;
    Ok(reverse_bits(i, m))
}
