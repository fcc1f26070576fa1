//! Halton point sets (identity generating matrices in the first `d` prime
//! bases) with general-base digital shift, digital permutation, LMS and NUS.
//!
//! Digit `k` of a coordinate is the coefficient of `b^-(k+1)`; the unscrambled
//! digit `k` of point `i` is the `k`-th least significant base-`b` digit of `i`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::digits::{self, digits_to_unit, fill_digits};
use crate::error::{QmcError, Result};
use crate::points::{BatchMeta, PointBatch, PointGenerator};
use crate::rng;

/// Largest supported dimension (one prime base per dimension).
pub const MAX_DIM: usize = 1000;

/// Largest `t` with `base^t <= 2^53`, so every digit string is exact in `f64`.
pub fn t_max_for_base(base: u64) -> u32 {
    let mut t = 0;
    let mut p: u128 = 1;
    while p * base as u128 <= 1u128 << 53 {
        p *= base as u128;
        t += 1;
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HaltonRandomization {
    None,
    DigitalShift,
    Permutation,
    Lms,
    #[default]
    LmsShift,
    LmsPermutation,
    Nus,
    /// Fixed generalized-Halton digit permutations followed by a random
    /// digital shift; tables exist for `d <= 4`.
    Qrng,
}

impl HaltonRandomization {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::DigitalShift => "shift",
            Self::Permutation => "permutation",
            Self::Lms => "lms",
            Self::LmsShift => "lms-shift",
            Self::LmsPermutation => "lms-permutation",
            Self::Nus => "nus",
            Self::Qrng => "qrng",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => Self::None,
            "shift" | "ds" | "digital-shift" => Self::DigitalShift,
            "permutation" | "perm" | "dp" => Self::Permutation,
            "lms" => Self::Lms,
            "lms-shift" | "lms-ds" => Self::LmsShift,
            "lms-permutation" | "lms-perm" | "lms-dp" => Self::LmsPermutation,
            "nus" => Self::Nus,
            "qrng" => Self::Qrng,
            _ => return Err(QmcError::InvalidArgument(format!("unknown Halton randomization '{s}'"))),
        })
    }
}

/// Multipliers `f_j` of the fixed permutations `k -> f_j k mod b_j` used by
/// the QRNG mode. Each is a primitive root of its base (1 for base 2).
const QRNG_MULTIPLIERS: [u32; 4] = [1, 2, 2, 3];

#[derive(Debug, Clone)]
pub struct HaltonConfig {
    pub d: usize,
    pub randomization: HaltonRandomization,
    pub reps: usize,
    pub seed: u64,
    /// Interlacing order; anything but 1 is rejected.
    pub alpha: usize,
}

impl HaltonConfig {
    pub fn new(d: usize, randomization: HaltonRandomization, reps: usize, seed: u64) -> Self {
        Self {
            d,
            randomization,
            reps,
            seed,
            alpha: 1,
        }
    }
}

/// Per-dimension randomization state of one replication.
#[derive(Debug, Clone, Default)]
struct DimState {
    /// Lower-triangular `t x t` matrix, row-major.
    lms: Option<Vec<u32>>,
    /// One permutation per digit position.
    perms: Option<Vec<Vec<u32>>>,
    shift: Option<Vec<u32>>,
}

#[derive(Debug, Clone)]
pub struct Halton {
    cfg: HaltonConfig,
    bases: Vec<u64>,
    t_max: Vec<u32>,
    reps: Vec<Vec<DimState>>,
}

impl Halton {
    pub fn new(cfg: HaltonConfig) -> Result<Self> {
        if cfg.alpha != 1 {
            return Err(QmcError::Interlacing(cfg.alpha));
        }
        if cfg.d == 0 || cfg.d > MAX_DIM {
            return Err(QmcError::Shape(format!("Halton dimension must be in 1..={MAX_DIM}, got {}", cfg.d)));
        }
        if cfg.randomization == HaltonRandomization::Qrng && cfg.d > QRNG_MULTIPLIERS.len() {
            return Err(QmcError::Unsupported(format!(
                "QRNG permutation tables cover d <= {}, requested {}",
                QRNG_MULTIPLIERS.len(),
                cfg.d
            )));
        }
        let bases = digits::first_primes(cfg.d);
        let t_max: Vec<u32> = bases.iter().map(|&b| t_max_for_base(b)).collect();
        let reps = (0..cfg.reps as u64)
            .map(|r| {
                bases
                    .iter()
                    .zip(&t_max)
                    .enumerate()
                    .map(|(j, (&b, &t))| dim_state(&cfg, r, j, b, t))
                    .collect()
            })
            .collect();
        Ok(Self {
            cfg,
            bases,
            t_max,
            reps,
        })
    }

    pub fn bases(&self) -> &[u64] {
        &self.bases
    }

    pub fn t_max(&self) -> &[u32] {
        &self.t_max
    }

    /// Coordinate `j` of point `i` in replication `rep`.
    pub fn coordinate(&self, rep: usize, i: u64, j: usize, scratch: &mut Vec<u32>) -> f64 {
        let b = self.bases[j];
        let t = self.t_max[j] as usize;
        scratch.clear();
        scratch.resize(t, 0);
        fill_digits(i, b, scratch);
        let st = &self.reps[rep][j];
        if let Some(s) = &st.lms {
            let x: Vec<u32> = scratch.clone();
            for (r, y) in scratch.iter_mut().enumerate() {
                let row = &s[r * t..r * t + r + 1];
                let acc: u64 = row.iter().zip(&x).map(|(&a, &v)| a as u64 * v as u64).sum();
                *y = (acc % b) as u32;
            }
        }
        if self.cfg.randomization == HaltonRandomization::Nus {
            nus_digits(self.cfg.seed, rep as u64, j, b, scratch);
        }
        if let Some(p) = &st.perms {
            for (y, perm) in scratch.iter_mut().zip(p) {
                *y = perm[*y as usize];
            }
        }
        if let Some(s) = &st.shift {
            for (y, &sk) in scratch.iter_mut().zip(s) {
                *y = ((*y as u64 + sk as u64) % b) as u32;
            }
        }
        digits_to_unit(scratch, b)
    }
}

fn dim_state(cfg: &HaltonConfig, rep: u64, j: usize, b: u64, t: u32) -> DimState {
    use HaltonRandomization as H;
    let t = t as usize;
    let mut st = DimState::default();
    if matches!(cfg.randomization, H::Lms | H::LmsShift | H::LmsPermutation) {
        let mut g = rng::stream(cfg.seed, rng::TAG_LMS, &[rep, j as u64]);
        let mut s = vec![0u32; t * t];
        for r in 0..t {
            for k in 0..r {
                s[r * t + k] = g.random_range(0..b as u32);
            }
            s[r * t + r] = g.random_range(1..b as u32);
        }
        st.lms = Some(s);
    }
    if matches!(cfg.randomization, H::Permutation | H::LmsPermutation) {
        st.perms = Some(random_digit_permutations(b, t, rng::key_hash(&[cfg.seed, rep, j as u64])));
    }
    if cfg.randomization == H::Qrng {
        let f = QRNG_MULTIPLIERS[j] as u64;
        let perm: Vec<u32> = (0..b).map(|k| (f * k % b) as u32).collect();
        st.perms = Some(vec![perm; t]);
    }
    if matches!(cfg.randomization, H::DigitalShift | H::LmsShift | H::Qrng) {
        let mut g = rng::stream(cfg.seed, rng::TAG_DIGITAL_SHIFT, &[rep, j as u64]);
        st.shift = Some((0..t).map(|_| g.random_range(0..b as u32)).collect());
    }
    st
}

/// Nested uniform scrambling in base `b`: the permutation applied to digit
/// `k` is keyed by the input digits `0..k`.
fn nus_digits(seed: u64, rep: u64, j: usize, b: u64, digits: &mut [u32]) {
    let mut state = rng::key_hash(&[seed, rng::TAG_NUS, rep, j as u64, b]);
    let mut perm: Vec<u32> = Vec::with_capacity(b as usize);
    for y in digits.iter_mut() {
        let x = *y;
        *y = if b == 2 {
            x ^ (rng::mix64(state) >> 63) as u32
        } else {
            node_permutation(state, b, &mut perm);
            perm[x as usize]
        };
        state = rng::mix64(state ^ (0x5851_f42d_4c95_7f2d + x as u64));
    }
}

/// Uniform permutation of `0..b` determined by `key` (Fisher-Yates).
fn node_permutation(key: u64, b: u64, out: &mut Vec<u32>) {
    out.clear();
    out.extend(0..b as u32);
    let mut counter = key;
    for i in (1..b as usize).rev() {
        counter = rng::mix64(counter);
        let k = ((counter as u128 * (i as u128 + 1)) >> 64) as usize;
        out.swap(i, k);
    }
}

/// `count` independent uniform permutations of `{0, .., base - 1}`.
pub fn random_digit_permutations(base: u64, count: usize, seed: u64) -> Vec<Vec<u32>> {
    let mut g = rng::stream(seed, rng::TAG_PERMUTATION, &[base]);
    (0..count)
        .map(|_| {
            let mut p: Vec<u32> = (0..base as u32).collect();
            p.shuffle(&mut g);
            p
        })
        .collect()
}

impl PointGenerator for Halton {
    fn dim(&self) -> usize {
        self.cfg.d
    }

    fn replications(&self) -> usize {
        self.reps.len()
    }

    fn capacity(&self) -> u128 {
        self.bases
            .iter()
            .zip(&self.t_max)
            .map(|(&b, &t)| digits::checked_pow(b, t).unwrap_or(u128::MAX))
            .min()
            .unwrap_or(0)
    }

    fn meta(&self) -> BatchMeta {
        BatchMeta {
            generator: "halton".into(),
            order: "natural".into(),
            randomization: self.cfg.randomization.name().into(),
            seed: Some(self.cfg.seed),
        }
    }

    fn fill(&self, rep: usize, start: u64, out: &mut [f64]) -> Result<()> {
        let d = self.cfg.d;
        self.check_range(start, out.len() / d)?;
        let mut scratch = Vec::new();
        for (i, row) in out.chunks_exact_mut(d).enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = self.coordinate(rep, start + i as u64, j, &mut scratch);
            }
        }
        Ok(())
    }
}

pub fn halton_points(cfg: HaltonConfig, n: usize) -> Result<PointBatch> {
    Halton::new(cfg)?.batch(n)
}
