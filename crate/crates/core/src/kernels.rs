//! Shift-invariant Bernoulli kernels, digitally-shift-invariant Walsh kernels
//! in base 2, and their weighted `d`-dimensional compositions.
//!
//! Every one-dimensional kernel here integrates to zero in either argument,
//! so the composite kernel integrates to `gamma * eta_{}` (the empty-set
//! weight, 1 for product weights).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QmcError, Result};

/// Default truncation of Walsh series (`k <= 2^20`).
pub const DEFAULT_K_MAX: u64 = 1 << 20;

/// Digit precision used when converting `f64` inputs for DSI kernels.
pub const DYADIC_BITS: u32 = 53;

/// Largest dimension accepted with explicit subset weights.
pub const MAX_SUBSET_DIM: usize = 10;

/// Even Bernoulli polynomial `B_l(x)` for `l` in `{2, 4, 6}`.
pub fn bernoulli_even(l: u32, x: f64) -> Result<f64> {
    let x2 = x * x;
    Ok(match l {
        2 => x2 - x + 1.0 / 6.0,
        4 => x2 * x2 - 2.0 * x2 * x + x2 - 1.0 / 30.0,
        6 => {
            let x4 = x2 * x2;
            x4 * x2 - 3.0 * x4 * x + 2.5 * x4 - 0.5 * x2 + 1.0 / 42.0
        }
        _ => return Err(QmcError::Unsupported(format!("Bernoulli polynomial of degree {l}"))),
    })
}

/// `(2 pi)^{2a} / ((-1)^{a+1} (2a)!)`.
fn si_scale(alpha: u32) -> f64 {
    let fact: f64 = (1..=2 * alpha).map(f64::from).product();
    let sign = if alpha % 2 == 1 { 1.0 } else { -1.0 };
    sign * (2.0 * PI).powi(2 * alpha as i32) / fact
}

/// One-dimensional SI kernel as a function of `delta = (x - x') mod 1`.
pub fn si_kernel_delta(alpha: u32, delta: f64) -> Result<f64> {
    if !(1..=3).contains(&alpha) {
        return Err(QmcError::Unsupported(format!("SI smoothness {alpha} (supported: 1..=3)")));
    }
    Ok(si_scale(alpha) * bernoulli_even(2 * alpha, delta)?)
}

pub fn si_kernel_1d(alpha: u32, x: f64, xp: f64) -> Result<f64> {
    si_kernel_delta(alpha, symmetric_delta(x, xp))
}

/// `(x - x') mod 1` folded onto `[0, 1/2]`; even Bernoulli polynomials are
/// symmetric about 1/2, and the fold makes the kernel exactly symmetric.
#[inline]
fn symmetric_delta(x: f64, xp: f64) -> f64 {
    let d = (x - xp).abs().rem_euclid(1.0);
    d.min(1.0 - d)
}

/// A point of `[0, 1)` with an exact `t_max`-digit binary expansion; digit 1
/// (weight 1/2) is the most significant of the `t_max` low bits of `word`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicPoint {
    word: u64,
    t_max: u32,
}

impl DyadicPoint {
    pub fn new(word: u64, t_max: u32) -> Result<Self> {
        if t_max == 0 || t_max > 64 {
            return Err(QmcError::Precision(format!("t_max must be in 1..=64, got {t_max}")));
        }
        if t_max < 64 && word >> t_max != 0 {
            return Err(QmcError::Range {
                value: word,
                bound: 1u128 << t_max,
            });
        }
        Ok(Self { word, t_max })
    }

    /// Exact conversion; fails unless `x * 2^t_max` is an integer in range.
    pub fn from_f64(x: f64, t_max: u32) -> Result<Self> {
        if !(0.0..1.0).contains(&x) {
            return Err(QmcError::Precision(format!("{x} is not in [0, 1)")));
        }
        let scaled = x * 2f64.powi(t_max as i32);
        if scaled.fract() != 0.0 {
            return Err(QmcError::Precision(format!("{x} has no exact {t_max}-digit binary expansion")));
        }
        Self::new(scaled as u64, t_max)
    }

    pub fn word(self) -> u64 {
        self.word
    }

    pub fn t_max(self) -> u32 {
        self.t_max
    }

    pub fn value(self) -> f64 {
        self.word as f64 * 0.5f64.powi(self.t_max as i32)
    }

    /// Digit `t >= 1` of the expansion (0 beyond `t_max`).
    #[inline]
    pub fn digit(self, t: u32) -> u8 {
        if t == 0 || t > self.t_max {
            0
        } else {
            ((self.word >> (self.t_max - t)) & 1) as u8
        }
    }

    /// Digital difference (XOR of digits); the result uses the finer precision.
    pub fn digital_sub(self, other: Self) -> Self {
        let t = self.t_max.max(other.t_max);
        let a = self.word << (t - self.t_max);
        let b = other.word << (t - other.t_max);
        Self { word: a ^ b, t_max: t }
    }

    /// `-floor(log2 x)`, the position of the first nonzero digit; 0 for `x = 0`.
    #[inline]
    pub fn beta(self) -> u32 {
        if self.word == 0 {
            0
        } else {
            self.word.leading_zeros() - (64 - self.t_max) + 1
        }
    }

    /// Bit `a` holds digit `a + 1`, so `wal_k = (-1)^popcount(k & mask)`.
    #[inline]
    fn walsh_mask(self) -> u64 {
        self.word.reverse_bits() >> (64 - self.t_max)
    }
}

/// Base-2 Walsh function `wal_k(x)`.
#[inline]
pub fn walsh2(k: u64, x: DyadicPoint) -> f64 {
    if (k & x.walsh_mask()).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Base-`b` Walsh function from the digits `x_1, x_2, ...` of `x`.
pub fn walsh(k: u64, x_digits: &[u32], base: u64) -> Complex64 {
    let mut phase = 0u64;
    let mut rest = k;
    let mut a = 0usize;
    while rest > 0 {
        let kd = rest % base;
        let xd = x_digits.get(a).copied().unwrap_or(0) as u64;
        phase = (phase + kd * xd) % base;
        rest /= base;
        a += 1;
    }
    Complex64::from_polar(1.0, 2.0 * PI * phase as f64 / base as f64)
}

/// Sum of `a + 1` over the `alpha` most significant set bits `a` of `k`.
pub fn mu_alpha(k: u64, alpha: u32) -> u32 {
    let mut rest = k;
    let mut total = 0;
    for _ in 0..alpha {
        if rest == 0 {
            break;
        }
        let a = 63 - rest.leading_zeros();
        total += a + 1;
        rest &= !(1u64 << a);
    }
    total
}

/// Truncated Walsh series `sum_{1 <= k <= k_max} wal_k(x) 2^{-mu_alpha(k)}`.
pub fn dsi_kernel_series(alpha: u32, x: DyadicPoint, k_max: u64) -> f64 {
    let mask = x.walsh_mask();
    let mut sum = 0.0;
    for k in 1..=k_max {
        let w = 0.5f64.powi(mu_alpha(k, alpha) as i32);
        if (k & mask).count_ones() % 2 == 0 {
            sum += w;
        } else {
            sum -= w;
        }
    }
    sum
}

/// `sum_{0 <= j < r} wal_j(x)` in `O(log r)`.
fn walsh_prefix_sum(r: u64, x: DyadicPoint) -> f64 {
    let beta = x.beta();
    let mut total = 0.0;
    let mut high = 0u64;
    let mut rest = r;
    while rest != 0 {
        let b = 63 - rest.leading_zeros();
        // Block {high + j : j < 2^b}; the inner sum is 2^b while b <= beta - 1.
        if x.word == 0 || b < beta {
            total += walsh2(high, x) * 2f64.powi(b as i32);
        }
        high |= 1 << b;
        rest &= !(1u64 << b);
    }
    total
}

/// Order-1 DSI kernel, defined only through its truncated Walsh series (it
/// diverges at `x = 0`). Evaluates exactly the same finite sum as
/// `dsi_kernel_series(1, x, k_max)` by grouping `k` by its leading bit.
pub fn dsi_kernel_order1(x: DyadicPoint, k_max: u64) -> f64 {
    let mut sum = 0.0;
    let mut a = 0u32;
    while a < 64 && (1u64 << a) <= k_max {
        let lead = 1u64 << a;
        let count = (k_max - lead + 1).min(lead);
        sum += walsh2(lead, x) * walsh_prefix_sum(count, x) * 0.5f64.powi(a as i32 + 1);
        a += 1;
    }
    sum
}

/// Closed-form DSI kernels of order 2, 3 and 4 in base 2.
pub fn dsi_kernel_1d(alpha: u32, x: DyadicPoint) -> Result<f64> {
    let beta = x.beta() as f64;
    let xv = x.value();
    let t = |nu: i32| -> f64 {
        if x.word == 0 {
            0.0
        } else {
            2f64.powi(-nu * x.beta() as i32)
        }
    };
    Ok(match alpha {
        2 => -1.0 - beta * xv + 2.5 * (1.0 - t(1)),
        3 => -1.0 + beta * xv * xv - 5.0 * (1.0 - t(1)) * xv + 43.0 / 18.0 * (1.0 - t(2)),
        4 => {
            let x2 = xv * xv;
            -1.0 - 2.0 / 3.0 * beta * x2 * xv + 5.0 * (1.0 - t(1)) * x2 - 43.0 / 9.0 * (1.0 - t(2)) * xv
                + 701.0 / 294.0 * (1.0 - t(3))
                + beta * (walsh_cubic_sum(x) / 48.0 - 1.0 / 42.0)
        }
        _ => {
            return Err(QmcError::Unsupported(format!(
                "closed-form DSI kernel of order {alpha} (supported: 2..=4; order 1 is series-only)"
            )))
        }
    })
}

/// `sum_{a >= 0} wal_{2^a}(x) 8^-a`: exact over digits `a < t_max`, then the
/// geometric tail `8/7 * 8^-t_max` where every digit is 0.
fn walsh_cubic_sum(x: DyadicPoint) -> f64 {
    let mut sum = 0.0;
    let mut scale = 1.0;
    for a in 0..x.t_max {
        sum += if x.digit(a + 1) == 0 { scale } else { -scale };
        scale /= 8.0;
    }
    sum + scale * 8.0 / 7.0
}

/// One-dimensional DSI kernel of any supported order evaluated at `x ⊖ x'`.
pub fn dsi_kernel_any(alpha: u32, x: DyadicPoint) -> Result<f64> {
    match alpha {
        1 => Ok(dsi_kernel_order1(x, DEFAULT_K_MAX)),
        _ => dsi_kernel_1d(alpha, x),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// Shift-invariant Bernoulli kernels; pair with lattices.
    SiBernoulli,
    /// Digitally-shift-invariant Walsh kernels; pair with base-2 nets.
    DsiWalsh,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::SiBernoulli => "si-bernoulli",
            KernelFamily::DsiWalsh => "dsi-walsh",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "si" | "si-bernoulli" => Ok(Self::SiBernoulli),
            "dsi" | "dsi-walsh" => Ok(Self::DsiWalsh),
            _ => Err(QmcError::InvalidArgument(format!("unknown kernel family '{s}'"))),
        }
    }
}

/// `gamma * prod_j (1 + eta_j K_{alpha_j})`, or with subset weights
/// `gamma * sum_u eta_u prod_{j in u} K_{alpha_j}` where `u` is a bitmask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub alpha: Vec<u32>,
    pub gamma: f64,
    pub eta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset_weights: Option<Vec<f64>>,
}

impl KernelSpec {
    /// Product-weight kernel with the same order and weight in every dimension.
    pub fn uniform(family: KernelFamily, d: usize, alpha: u32, gamma: f64, eta: f64) -> Result<Self> {
        Self::product(family, vec![alpha; d], gamma, vec![eta; d])
    }

    pub fn product(family: KernelFamily, alpha: Vec<u32>, gamma: f64, eta: Vec<f64>) -> Result<Self> {
        let spec = Self {
            family,
            alpha,
            gamma,
            eta,
            subset_weights: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_subset_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self.subset_weights = Some(weights);
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.alpha.len();
        if d == 0 {
            return Err(QmcError::Shape("kernel needs at least one dimension".into()));
        }
        if self.eta.len() != d {
            return Err(QmcError::Length {
                expected: d,
                got: self.eta.len(),
            });
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(QmcError::InvalidArgument(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.eta.iter().any(|&e| !(e >= 0.0 && e.is_finite())) {
            return Err(QmcError::InvalidArgument("weights must be nonnegative".into()));
        }
        let range = match self.family {
            KernelFamily::SiBernoulli => 1..=3,
            KernelFamily::DsiWalsh => 1..=4,
        };
        if let Some(&a) = self.alpha.iter().find(|&&a| !range.contains(&a)) {
            return Err(QmcError::Unsupported(format!(
                "{} smoothness {a} (supported: {}..={})",
                self.family.name(),
                range.start(),
                range.end()
            )));
        }
        if let Some(w) = &self.subset_weights {
            if d > MAX_SUBSET_DIM {
                return Err(QmcError::Shape(format!(
                    "subset weights need d <= {MAX_SUBSET_DIM}, got {d}"
                )));
            }
            if w.len() != 1 << d {
                return Err(QmcError::Length {
                    expected: 1 << d,
                    got: w.len(),
                });
            }
            if w.iter().any(|&e| !(e >= 0.0 && e.is_finite())) {
                return Err(QmcError::InvalidArgument("subset weights must be nonnegative".into()));
            }
        }
        Ok(())
    }

    /// `int int K = int K(x, .) = gamma * eta_{}`.
    pub fn integral(&self) -> f64 {
        self.gamma * self.subset_weights.as_ref().map_or(1.0, |w| w[0])
    }

    /// Per-dimension one-dimensional kernel values at the invariant difference.
    fn components(&self, x: &[f64], xp: &[f64], out: &mut [f64]) -> Result<()> {
        for (j, o) in out.iter_mut().enumerate() {
            *o = match self.family {
                KernelFamily::SiBernoulli => si_kernel_delta(self.alpha[j], symmetric_delta(x[j], xp[j]))?,
                KernelFamily::DsiWalsh => {
                    let a = DyadicPoint::from_f64(x[j], DYADIC_BITS)?;
                    let b = DyadicPoint::from_f64(xp[j], DYADIC_BITS)?;
                    dsi_kernel_any(self.alpha[j], a.digital_sub(b))?
                }
            };
        }
        Ok(())
    }

    /// Composite kernel from one-dimensional values `k_j`.
    pub fn combine(&self, k: &[f64]) -> f64 {
        match &self.subset_weights {
            None => self.gamma * k.iter().zip(&self.eta).map(|(&kj, &e)| 1.0 + e * kj).product::<f64>(),
            Some(w) => {
                let mut total = 0.0;
                for (u, &eta_u) in w.iter().enumerate() {
                    if eta_u == 0.0 {
                        continue;
                    }
                    let mut prod = eta_u;
                    let mut bits = u;
                    while bits != 0 {
                        let j = bits.trailing_zeros() as usize;
                        prod *= k[j];
                        bits &= bits - 1;
                    }
                    total += prod;
                }
                self.gamma * total
            }
        }
    }

    pub fn eval(&self, x: &[f64], xp: &[f64]) -> Result<f64> {
        let d = self.dim();
        if x.len() != d || xp.len() != d {
            return Err(QmcError::Length {
                expected: d,
                got: if x.len() != d { x.len() } else { xp.len() },
            });
        }
        let mut k = vec![0.0; d];
        self.components(x, xp, &mut k)?;
        Ok(self.combine(&k))
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], xp: &[f64]) -> Result<f64> {
    spec.eval(x, xp)
}
