//! Rank-1 lattices in linear or radical-inverse order with random shifts.

use rand::Rng;

use crate::digits::{self, clamp_unit};
use crate::error::{QmcError, Result};
use crate::points::{BatchMeta, PointBatch, PointGenerator};
use crate::rng;

/// First eight components of the embedded base-2 rank-1 lattice of
/// Cools, Kuo and Nuyens (2006), constructed for `n` up to `2^20`
/// (Korobov-type search over product weights).
pub const DEFAULT_GENERATING_VECTOR: [u64; 8] =
    [1, 182667, 469891, 498753, 110745, 446247, 250185, 118627];

/// `log2` of the largest `n` the default vector was built for.
pub const DEFAULT_M_MAX: u32 = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeGeneratingVector {
    g: Vec<u64>,
    m_max: u32,
}

impl LatticeGeneratingVector {
    pub fn new(g: Vec<u64>, m_max: u32) -> Result<Self> {
        if g.is_empty() {
            return Err(QmcError::Shape("generating vector must have d >= 1".into()));
        }
        if g.contains(&0) {
            return Err(QmcError::InvalidArgument(
                "generating vector entries must be positive".into(),
            ));
        }
        Ok(Self { g, m_max })
    }

    /// The built-in vector truncated to `d` components.
    pub fn default_for(d: usize) -> Result<Self> {
        if d == 0 || d > DEFAULT_GENERATING_VECTOR.len() {
            return Err(QmcError::Unsupported(format!(
                "built-in lattice vector supports 1..={} dimensions, requested {d}; load a vector file instead",
                DEFAULT_GENERATING_VECTOR.len()
            )));
        }
        Self::new(DEFAULT_GENERATING_VECTOR[..d].to_vec(), DEFAULT_M_MAX)
    }

    pub fn components(&self) -> &[u64] {
        &self.g
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn m_max(&self) -> u32 {
        self.m_max
    }

    /// Keeps the first `d` components.
    pub fn truncated(&self, d: usize) -> Result<Self> {
        if d == 0 || d > self.g.len() {
            return Err(QmcError::Shape(format!(
                "cannot take {d} dimensions from a {}-dimensional vector",
                self.g.len()
            )));
        }
        Self::new(self.g[..d].to_vec(), self.m_max)
    }
}

/// `R` shift vectors in `[0, 1)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSet {
    d: usize,
    shifts: Vec<f64>,
}

impl ShiftSet {
    pub fn new(d: usize, shifts: Vec<Vec<f64>>) -> Result<Self> {
        let mut flat = Vec::with_capacity(shifts.len() * d);
        for s in &shifts {
            if s.len() != d {
                return Err(QmcError::Shape(format!(
                    "shift of length {} for dimension {d}",
                    s.len()
                )));
            }
            if s.iter().any(|&x| !(0.0..1.0).contains(&x)) {
                return Err(QmcError::InvalidArgument("shift coordinates must lie in [0,1)".into()));
            }
            flat.extend_from_slice(s);
        }
        Ok(Self { d, shifts: flat })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        if self.d == 0 {
            0
        } else {
            self.shifts.len() / self.d
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shift(&self, r: usize) -> &[f64] {
        &self.shifts[r * self.d..(r + 1) * self.d]
    }
}

/// `R` independent uniform shifts; shift `r` depends only on `(seed, r)`.
pub fn random_shifts(d: usize, reps: usize, seed: u64) -> ShiftSet {
    let mut shifts = Vec::with_capacity(d * reps);
    for r in 0..reps {
        let mut g = rng::stream(seed, rng::TAG_LATTICE_SHIFT, &[r as u64]);
        shifts.extend((0..d).map(|_| rng::unit_f64(g.random())));
    }
    ShiftSet { d, shifts }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeOrder {
    Linear,
    RadicalInverse,
}

impl LatticeOrder {
    pub fn name(self) -> &'static str {
        match self {
            LatticeOrder::Linear => "linear",
            LatticeOrder::RadicalInverse => "radical-inverse",
        }
    }
}

/// `(x + shift) mod 1`, with results that round to 1.0 mapped to 0.0.
#[inline]
pub(crate) fn add_mod1(x: f64, shift: f64) -> f64 {
    let y = x + shift;
    let f = y - y.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// A (possibly shifted) rank-1 lattice.
#[derive(Debug, Clone)]
pub struct Lattice {
    g: LatticeGeneratingVector,
    base: u64,
    order: LatticeOrder,
    shifts: Option<ShiftSet>,
    /// Point count for linear order; the sequence is not extensible there.
    n_linear: Option<u64>,
    seed: Option<u64>,
}

impl Lattice {
    pub fn new(
        g: LatticeGeneratingVector,
        base: u64,
        order: LatticeOrder,
        shifts: Option<ShiftSet>,
    ) -> Result<Self> {
        digits::check_base(base)?;
        if let Some(s) = &shifts {
            if s.dim() != g.dim() {
                return Err(QmcError::Shape(format!(
                    "shift dimension {} does not match generating vector dimension {}",
                    s.dim(),
                    g.dim()
                )));
            }
        }
        Ok(Self {
            g,
            base,
            order,
            shifts,
            n_linear: None,
            seed: None,
        })
    }

    /// Randomly shifted lattice with `reps` replications.
    pub fn shifted(g: LatticeGeneratingVector, order: LatticeOrder, reps: usize, seed: u64) -> Result<Self> {
        let shifts = random_shifts(g.dim(), reps, seed);
        let mut lat = Self::new(g, 2, order, Some(shifts))?;
        lat.seed = Some(seed);
        Ok(lat)
    }

    /// Fixes the point count; required for linear order.
    pub fn with_size(mut self, n: u64) -> Result<Self> {
        if self.order == LatticeOrder::Linear {
            if !is_power_of(n, self.base) {
                return Err(QmcError::Order(format!(
                    "linear order needs n to be a power of {}, got {n}",
                    self.base
                )));
            }
            self.n_linear = Some(n);
        }
        Ok(self)
    }

    pub fn generating_vector(&self) -> &LatticeGeneratingVector {
        &self.g
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn order(&self) -> LatticeOrder {
        self.order
    }

    /// Unshifted point `i` written into `out`.
    pub fn unshifted_point(&self, i: u64, out: &mut [f64]) -> Result<()> {
        match self.order {
            LatticeOrder::Linear => {
                let n = self.n_linear.ok_or_else(|| {
                    QmcError::Order("linear order requires a fixed n (use with_size)".into())
                })?;
                let n128 = n as u128;
                for (x, &g) in out.iter_mut().zip(self.g.components()) {
                    let k = (i as u128 * g as u128) % n128;
                    *x = clamp_unit(k as f64 / n as f64);
                }
            }
            LatticeOrder::RadicalInverse if self.base == 2 => {
                // v(i) = reverse(i) / 2^64 exactly, so v(i) g mod 1 is a
                // wrapping product.
                let rev = i.reverse_bits();
                for (x, &g) in out.iter_mut().zip(self.g.components()) {
                    *x = digits::word_to_unit(rev.wrapping_mul(g), 64);
                }
            }
            LatticeOrder::RadicalInverse => {
                let b = self.base as u128;
                let mut numer: u128 = 0;
                let mut denom: u128 = 1;
                let mut rest = i;
                while rest > 0 {
                    numer = numer * b + (rest % self.base) as u128;
                    denom *= b;
                    rest /= self.base;
                }
                for (x, &g) in out.iter_mut().zip(self.g.components()) {
                    let k = (numer * g as u128) % denom;
                    *x = clamp_unit(k as f64 / denom as f64);
                }
            }
        }
        Ok(())
    }
}

fn is_power_of(n: u64, base: u64) -> bool {
    if n == 0 {
        return false;
    }
    let mut k = n;
    while k % base == 0 {
        k /= base;
    }
    k == 1
}

impl PointGenerator for Lattice {
    fn dim(&self) -> usize {
        self.g.dim()
    }

    fn replications(&self) -> usize {
        self.shifts.as_ref().map_or(1, |s| s.len())
    }

    fn capacity(&self) -> u128 {
        match (self.order, self.n_linear) {
            (LatticeOrder::Linear, Some(n)) => n as u128,
            (LatticeOrder::Linear, None) => 0,
            (LatticeOrder::RadicalInverse, _) => {
                digits::checked_pow(self.base, digits::max_digits(self.base)).unwrap_or(u128::MAX)
            }
        }
    }

    fn meta(&self) -> BatchMeta {
        BatchMeta {
            generator: "lattice".into(),
            order: self.order.name().into(),
            randomization: if self.shifts.is_some() { "shift" } else { "none" }.into(),
            seed: self.seed,
        }
    }

    fn fill(&self, rep: usize, start: u64, out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        self.check_range(start, out.len() / d)?;
        let shift = self.shifts.as_ref().map(|s| s.shift(rep));
        for (k, point) in out.chunks_exact_mut(d).enumerate() {
            self.unshifted_point(start + k as u64, point)?;
            if let Some(shift) = shift {
                for (x, &s) in point.iter_mut().zip(shift) {
                    *x = add_mod1(*x, s);
                }
            }
        }
        Ok(())
    }
}

/// First `n` lattice points for every shift (or one unshifted replication).
pub fn lattice_points(
    g: &LatticeGeneratingVector,
    n: usize,
    order: LatticeOrder,
    shifts: Option<&ShiftSet>,
    base: u64,
) -> Result<PointBatch> {
    let lat = Lattice::new(g.clone(), base, order, shifts.cloned())?.with_size(n as u64)?;
    if shifts.is_some_and(|s| s.is_empty()) {
        return PointBatch::new(0, n, g.dim(), Vec::new(), lat.meta());
    }
    lat.batch(n)
}
