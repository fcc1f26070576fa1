//! Randomized QMC estimation: test integrands, Student's-t intervals,
//! fixed-size and adaptive estimators and the convergence-study harness.

use std::sync::Arc;

use num_complex::Complex64;
use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::dnet::{DigitalNet, DnetConfig, DnetRandomization, GeneratingMatrixSet, LmsFamily};
use crate::error::{QmcError, Result};
use crate::expr::Expr;
use crate::halton::{Halton, HaltonConfig, HaltonRandomization};
use crate::lattice::{Lattice, LatticeGeneratingVector, LatticeOrder};
use crate::points::{BatchMeta, PointGenerator};
use crate::rng::{self, TAG_IID};

/// Names accepted by [`integrand_library`].
pub const CATALOG: [&str; 6] = ["simple-d1", "simple-d2", "oakley", "g-function", "oscillatory", "corner-peak"];

/// Points evaluated per block inside one replication.
const BLOCK: usize = 1024;

/// Largest dimension for which the corner-peak mean is computed by
/// inclusion-exclusion; cancellation makes larger `d` unreliable.
const CORNER_PEAK_EXACT_MAX_D: usize = 8;

#[derive(Debug, Clone)]
enum Kind {
    SimpleD1,
    SimpleD2,
    Oakley,
    GFunction,
    Oscillatory,
    CornerPeak,
    Constant(f64),
    Expression(Arc<Expr>),
}

/// A test function on the closed cube `[0,1]^d`.
#[derive(Debug, Clone)]
pub struct Integrand {
    name: String,
    d: usize,
    kind: Kind,
    /// `a_j` for the G-function, `c_j` for the Genz families.
    params: Vec<f64>,
    exact_mean: Option<f64>,
}

impl Integrand {
    pub fn constant(d: usize, c: f64) -> Self {
        Self {
            name: format!("constant({c})"),
            d,
            kind: Kind::Constant(c),
            params: vec![c],
            exact_mean: Some(c),
        }
    }

    /// User expression in `x1..xd`.
    pub fn expression(src: &str, d: usize, exact_mean: Option<f64>) -> Result<Self> {
        let e = Expr::parse(src)?;
        if e.arity() > d {
            return Err(QmcError::Shape(format!(
                "expression uses x{} but the dimension is {d}",
                e.arity()
            )));
        }
        Ok(Self {
            name: src.to_string(),
            d,
            kind: Kind::Expression(Arc::new(e)),
            params: Vec::new(),
            exact_mean,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn exact_mean(&self) -> Option<f64> {
        self.exact_mean
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::SimpleD1 => x[0] * x[0].exp() - 1.0,
            Kind::SimpleD2 => x[1] * (x[0] * x[1]).exp() / (std::f64::consts::E - 2.0) - 1.0,
            Kind::Oakley => {
                let t1 = (x[0] - 0.5) / 50.0;
                let t2 = (x[1] - 0.5) / 50.0;
                5.0 + t1 + t2 + 2.0 * t1.cos() + 2.0 * t2.cos()
            }
            Kind::GFunction => x
                .iter()
                .zip(&self.params)
                .map(|(&xj, &a)| ((4.0 * xj - 2.0).abs() - a) / (1.0 + a))
                .product(),
            Kind::Oscillatory => {
                let s: f64 = x.iter().zip(&self.params).map(|(&xj, &c)| c * xj).sum();
                (-s).cos()
            }
            Kind::CornerPeak => {
                let s: f64 = x.iter().zip(&self.params).map(|(&xj, &c)| c * xj).sum();
                (1.0 + s).powi(-(self.d as i32 + 1))
            }
            Kind::Constant(c) => *c,
            Kind::Expression(e) => e.eval(x),
        }
    }
}

/// Default dimension of a catalog entry.
pub fn default_dim(name: &str) -> Result<usize> {
    Ok(match name {
        "simple-d1" => 1,
        "simple-d2" | "oakley" => 2,
        "g-function" | "oscillatory" | "corner-peak" => 3,
        _ => return Err(QmcError::UnknownIntegrand(name.to_string())),
    })
}

/// Builds catalog entry `name` in dimension `d`.
pub fn integrand_library(name: &str, d: usize) -> Result<Integrand> {
    let fixed = match name {
        "simple-d1" => Some(1),
        "simple-d2" | "oakley" => Some(2),
        "g-function" | "oscillatory" | "corner-peak" => None,
        _ => return Err(QmcError::UnknownIntegrand(name.to_string())),
    };
    if let Some(fd) = fixed {
        if d != fd {
            return Err(QmcError::Shape(format!("{name} is only defined for d = {fd}, got {d}")));
        }
    }
    if d == 0 {
        return Err(QmcError::Shape("integrand dimension must be >= 1".into()));
    }
    let (kind, params, exact_mean) = match name {
        "simple-d1" => (Kind::SimpleD1, vec![], Some(0.0)),
        "simple-d2" => (Kind::SimpleD2, vec![], Some(0.0)),
        "oakley" => (Kind::Oakley, vec![], Some(5.0 + 400.0 * 0.01f64.sin())),
        "g-function" => {
            let a: Vec<f64> = (1..=d).map(|j| (j as f64 - 2.0) / 2.0).collect();
            let mean = a.iter().map(|&a| (1.0 - a) / (1.0 + a)).product();
            (Kind::GFunction, a, Some(mean))
        }
        "oscillatory" => {
            let raw: Vec<f64> = (1..=d).map(|j| (j as f64 * 1e-8f64.ln() / d as f64).exp()).collect();
            let c = normalized(&raw, 4.5);
            let mean = oscillatory_mean(&c);
            (Kind::Oscillatory, c, Some(mean))
        }
        _ => {
            let raw: Vec<f64> = (1..=d).map(|j| 1.0 / (j * j) as f64).collect();
            let c = normalized(&raw, 0.25);
            let mean = (d <= CORNER_PEAK_EXACT_MAX_D).then(|| corner_peak_mean(&c));
            (Kind::CornerPeak, c, mean)
        }
    };
    Ok(Integrand {
        name: name.to_string(),
        d,
        kind,
        params,
        exact_mean,
    })
}

fn normalized(raw: &[f64], total: f64) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|&r| total * r / s).collect()
}

/// `E cos(c.x) = Re prod_j (e^{i c_j} - 1) / (i c_j)`.
fn oscillatory_mean(c: &[f64]) -> f64 {
    c.iter()
        .map(|&cj| (Complex64::new(0.0, cj).exp() - 1.0) / Complex64::new(0.0, cj))
        .product::<Complex64>()
        .re
}

/// Inclusion-exclusion over the cube's vertices.
pub fn corner_peak_mean(c: &[f64]) -> f64 {
    let d = c.len();
    let mut acc = 0.0;
    for v in 0u64..1 << d {
        let dot: f64 = (0..d).filter(|&j| v >> j & 1 == 1).map(|j| c[j]).sum();
        let sign = if v.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign / (1.0 + dot);
    }
    let fact: f64 = (1..=d).map(|k| k as f64).product();
    acc / (fact * c.iter().product::<f64>())
}

/// Tent map `1 - 2|x - 1/2|` applied componentwise; maps `1/2` to exactly 1.
pub fn baker_transform(x: &mut [f64]) {
    for v in x {
        *v = 1.0 - 2.0 * (*v - 0.5).abs();
    }
}

/// `p`-quantile of Student's t with `nu` degrees of freedom.
///
/// Bisection on the tail `q(t) = I_{nu/(nu+t^2)}(nu/2, 1/2) / 2`, which is
/// monotone in `t`, so the answer is accurate to a few ulps of `t`.
pub fn student_t_quantile(nu: f64, p: f64) -> Result<f64> {
    if !(nu.is_finite() && nu >= 1.0) {
        return Err(QmcError::InvalidArgument(format!("degrees of freedom must be >= 1, got {nu}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(QmcError::InvalidArgument(format!("probability must lie in (0, 1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let q = if p > 0.5 { 1.0 - p } else { p };
    let tail = |t: f64| 0.5 * beta_reg(nu / 2.0, 0.5, nu / (nu + t * t));
    let mut lo = 0.0;
    let mut hi = 1.0;
    while tail(hi) > q {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(QmcError::InvalidArgument(format!("quantile {p} out of range")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if tail(mid) > q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok(if p > 0.5 { t } else { -t })
}

/// Independent uniform points from a counter-addressed ChaCha stream.
#[derive(Debug, Clone)]
pub struct IidSampler {
    d: usize,
    reps: usize,
    seed: u64,
}

impl IidSampler {
    pub fn new(d: usize, reps: usize, seed: u64) -> Self {
        Self { d, reps, seed }
    }
}

impl PointGenerator for IidSampler {
    fn dim(&self) -> usize {
        self.d
    }

    fn replications(&self) -> usize {
        self.reps
    }

    fn capacity(&self) -> u128 {
        1 << 64
    }

    fn meta(&self) -> BatchMeta {
        BatchMeta {
            generator: "iid".into(),
            order: "natural".into(),
            randomization: "iid".into(),
            seed: Some(self.seed),
        }
    }

    fn fill(&self, rep: usize, start: u64, out: &mut [f64]) -> Result<()> {
        self.check_range(start, out.len() / self.d.max(1))?;
        let mut rng = rng::stream(self.seed, TAG_IID, &[rep as u64]);
        // two 32-bit words per double
        rng.set_word_pos(start as u128 * self.d as u128 * 2);
        for v in out {
            *v = rng::unit_f64(rng.next_u64());
        }
        Ok(())
    }
}

/// A named point-set family used by the estimators.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplerSpec {
    Iid,
    /// Randomly shifted lattice in radical-inverse order, optionally with
    /// the integrand periodized by the Baker transform.
    Lattice { periodize: bool },
    Dnet {
        alpha: usize,
        randomization: DnetRandomization,
        family: LmsFamily,
    },
    Halton { randomization: HaltonRandomization },
}

impl SamplerSpec {
    /// Accepts `iid`, `lattice`, `lattice-raw`, `dnet[-<rand>][-alpha<k>]`
    /// and `halton[-<rand>]`. `dnet-lms` denotes LMS followed by a digital
    /// shift, since LMS alone pins the first point at the origin.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || QmcError::InvalidArgument(format!("unknown sampler '{s}'"));
        match s {
            "iid" => return Ok(Self::Iid),
            "lattice" => return Ok(Self::Lattice { periodize: true }),
            "lattice-raw" => return Ok(Self::Lattice { periodize: false }),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("dnet") {
            let (rand, alpha) = match rest.rfind("-alpha") {
                Some(k) => (&rest[..k], rest[k + 6..].parse::<usize>().map_err(|_| bad())?),
                None => (rest, 1),
            };
            if alpha == 0 {
                return Err(bad());
            }
            let randomization = match rand.strip_prefix('-') {
                None if rand.is_empty() => DnetRandomization::LmsShift,
                Some("lms") => DnetRandomization::LmsShift,
                Some("lms-only") => DnetRandomization::Lms,
                Some(r) => DnetRandomization::parse(r)?,
                None => return Err(bad()),
            };
            return Ok(Self::Dnet {
                alpha,
                randomization,
                family: LmsFamily::Matousek,
            });
        }
        if let Some(rest) = s.strip_prefix("halton") {
            let randomization = match rest.strip_prefix('-') {
                None if rest.is_empty() => HaltonRandomization::LmsShift,
                Some(r) => HaltonRandomization::parse(r)?,
                None => return Err(bad()),
            };
            return Ok(Self::Halton { randomization });
        }
        Err(bad())
    }

    pub fn name(&self) -> String {
        match self {
            Self::Iid => "iid".into(),
            Self::Lattice { periodize: true } => "lattice".into(),
            Self::Lattice { periodize: false } => "lattice-raw".into(),
            Self::Dnet { alpha, randomization, .. } => {
                let r = match randomization {
                    DnetRandomization::LmsShift => "lms",
                    DnetRandomization::Lms => "lms-only",
                    other => other.name(),
                };
                if *alpha == 1 {
                    format!("dnet-{r}")
                } else {
                    format!("dnet-{r}-alpha{alpha}")
                }
            }
            Self::Halton { randomization } => format!("halton-{}", randomization.name()),
        }
    }

    pub fn periodize(&self) -> bool {
        matches!(self, Self::Lattice { periodize: true })
    }

    /// Generator of `reps` independent replications in dimension `d`.
    pub fn build(&self, d: usize, reps: usize, seed: u64) -> Result<Box<dyn PointGenerator + Send>> {
        Ok(match self {
            Self::Iid => Box::new(IidSampler::new(d, reps, seed)),
            Self::Lattice { .. } => Box::new(Lattice::shifted(
                LatticeGeneratingVector::default_for(d)?,
                LatticeOrder::RadicalInverse,
                reps,
                seed,
            )?),
            Self::Dnet {
                alpha,
                randomization,
                family,
            } => {
                let c = GeneratingMatrixSet::sobol(alpha * d)?;
                let cfg = DnetConfig {
                    alpha: *alpha,
                    randomization: *randomization,
                    lms_family: *family,
                    reps,
                    seed,
                    ..DnetConfig::default()
                };
                Box::new(DigitalNet::new(&c, cfg)?)
            }
            Self::Halton { randomization } => {
                Box::new(Halton::new(HaltonConfig::new(d, *randomization, reps, seed))?)
            }
        })
    }
}

/// Outcome of an RQMC estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RqmcResult {
    pub mean: f64,
    pub rep_means: Vec<f64>,
    pub sigma: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Confidence level `1 - tau`.
    pub level: f64,
    pub n: usize,
    pub reps: usize,
    /// Always true in fixed mode; in adaptive mode, whether the half-width
    /// reached the tolerance before `n_max`.
    pub tolerance_met: bool,
}

impl RqmcResult {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_hi - self.ci_lo)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(QmcError::InvalidArgument(format!("tau must lie in (0, 1), got {tau}")));
    }
    Ok(())
}

fn check_dims(f: &Integrand, gen: &dyn PointGenerator) -> Result<()> {
    if f.dim() != gen.dim() {
        return Err(QmcError::Shape(format!(
            "integrand has d = {} but the sampler has d = {}",
            f.dim(),
            gen.dim()
        )));
    }
    Ok(())
}

/// Per-replication sums of `f` over points `start..start + count`.
///
/// Each replication is summed sequentially in index order, so the result
/// does not depend on how rayon schedules replications.
pub fn replication_sums(
    f: &Integrand,
    gen: &dyn PointGenerator,
    periodize: bool,
    start: u64,
    count: usize,
) -> Result<Vec<f64>> {
    gen.check_range(start, count)?;
    let d = gen.dim();
    (0..gen.replications())
        .into_par_iter()
        .map(|r| {
            let mut buf = vec![0.0; BLOCK.min(count.max(1)) * d];
            let mut sum = 0.0;
            let mut done = 0;
            while done < count {
                let k = BLOCK.min(count - done);
                let pts = &mut buf[..k * d];
                gen.fill(r, start + done as u64, pts)?;
                for x in pts.chunks_exact_mut(d) {
                    if periodize {
                        baker_transform(x);
                    }
                    sum += f.eval(x);
                }
                done += k;
            }
            Ok(sum)
        })
        .collect()
}

/// Mean, spread and Student's-t interval from per-replication means.
pub fn summarize(rep_means: Vec<f64>, n: usize, tau: f64, tolerance_met: bool) -> Result<RqmcResult> {
    let reps = rep_means.len();
    if reps < 2 {
        return Err(QmcError::Dof(reps));
    }
    check_tau(tau)?;
    let mean = rep_means.iter().sum::<f64>() / reps as f64;
    let var = rep_means.iter().map(|&m| (m - mean) * (m - mean)).sum::<f64>() / (reps - 1) as f64;
    let sigma = var.sqrt();
    let t = student_t_quantile((reps - 1) as f64, 1.0 - tau / 2.0)?;
    let half = t * sigma / (reps as f64).sqrt();
    Ok(RqmcResult {
        mean,
        rep_means,
        sigma,
        ci_lo: mean - half,
        ci_hi: mean + half,
        level: 1.0 - tau,
        n,
        reps,
        tolerance_met,
    })
}

/// Fixed-`n` estimate over every replication of `gen`.
pub fn rqmc_fixed_with(
    f: &Integrand,
    gen: &dyn PointGenerator,
    periodize: bool,
    n: usize,
    tau: f64,
) -> Result<RqmcResult> {
    if gen.replications() < 2 {
        return Err(QmcError::Dof(gen.replications()));
    }
    check_tau(tau)?;
    check_dims(f, gen)?;
    if n == 0 {
        return Err(QmcError::InvalidArgument("n must be positive".into()));
    }
    let sums = replication_sums(f, gen, periodize, 0, n)?;
    summarize(sums.into_iter().map(|s| s / n as f64).collect(), n, tau, true)
}

pub fn rqmc_fixed(
    f: &Integrand,
    sampler: &SamplerSpec,
    n: usize,
    reps: usize,
    tau: f64,
    seed: u64,
) -> Result<RqmcResult> {
    if reps < 2 {
        return Err(QmcError::Dof(reps));
    }
    let gen = sampler.build(f.dim(), reps, seed)?;
    rqmc_fixed_with(f, gen.as_ref(), sampler.periodize(), n, tau)
}

/// Settings of the adaptive doubling estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdaptiveOptions {
    pub tau: f64,
    pub abs_tol: f64,
    pub n0: usize,
    pub n_max: usize,
}

/// Doubles `n` from `n0`, reusing each replication's earlier points, until
/// the interval half-width is at most `abs_tol` or doubling would pass
/// `n_max` (or the sequence capacity).
pub fn rqmc_adaptive_with(
    f: &Integrand,
    gen: &dyn PointGenerator,
    periodize: bool,
    opts: AdaptiveOptions,
) -> Result<RqmcResult> {
    if gen.replications() < 2 {
        return Err(QmcError::Dof(gen.replications()));
    }
    check_tau(opts.tau)?;
    check_dims(f, gen)?;
    if !opts.n0.is_power_of_two() {
        return Err(QmcError::NotPowerOfTwo(opts.n0));
    }
    if opts.n_max < opts.n0 {
        return Err(QmcError::InvalidArgument(format!(
            "n_max = {} is below n0 = {}",
            opts.n_max, opts.n0
        )));
    }
    if opts.abs_tol.is_nan() || opts.abs_tol < 0.0 {
        return Err(QmcError::InvalidArgument(format!("invalid tolerance {}", opts.abs_tol)));
    }
    let mut sums = vec![0.0; gen.replications()];
    let mut n = 0usize;
    let mut next = opts.n0;
    loop {
        let add = replication_sums(f, gen, periodize, n as u64, next - n)?;
        for (s, a) in sums.iter_mut().zip(add) {
            *s += a;
        }
        n = next;
        let means = sums.iter().map(|s| s / n as f64).collect();
        let mut res = summarize(means, n, opts.tau, false)?;
        if res.half_width() <= opts.abs_tol {
            res.tolerance_met = true;
            return Ok(res);
        }
        next = 2 * n;
        if next > opts.n_max || next as u128 > gen.capacity() {
            return Ok(res);
        }
    }
}

pub fn rqmc_adaptive(
    f: &Integrand,
    sampler: &SamplerSpec,
    reps: usize,
    opts: AdaptiveOptions,
    seed: u64,
) -> Result<RqmcResult> {
    if reps < 2 {
        return Err(QmcError::Dof(reps));
    }
    let gen = sampler.build(f.dim(), reps, seed)?;
    rqmc_adaptive_with(f, gen.as_ref(), sampler.periodize(), opts)
}

/// One cell of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub integrand: String,
    pub sampler: String,
    pub n: usize,
    pub rmse: f64,
}

/// RMSE of the per-replication estimate against the exact mean for every
/// integrand, sampler and `n` in the increasing grid. Points are reused
/// across the grid.
pub fn convergence_study(
    integrands: &[Integrand],
    samplers: &[SamplerSpec],
    n_grid: &[usize],
    randomizations: usize,
    seed: u64,
) -> Result<Vec<StudyRow>> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(QmcError::InvalidArgument("n grid must be positive and strictly increasing".into()));
    }
    if randomizations == 0 {
        return Err(QmcError::InvalidArgument("need at least one randomization".into()));
    }
    let mut rows = Vec::with_capacity(integrands.len() * samplers.len() * n_grid.len());
    for f in integrands {
        let mu = f.exact_mean().ok_or_else(|| {
            QmcError::InvalidArgument(format!("integrand {} has no known mean", f.name()))
        })?;
        for s in samplers {
            let gen = s.build(f.dim(), randomizations, seed)?;
            let mut sums = vec![0.0; randomizations];
            let mut n = 0;
            for &next in n_grid {
                let add = replication_sums(f, gen.as_ref(), s.periodize(), n as u64, next - n)?;
                for (a, b) in sums.iter_mut().zip(add) {
                    *a += b;
                }
                n = next;
                let mse = sums.iter().map(|&t| (t / n as f64 - mu).powi(2)).sum::<f64>() / randomizations as f64;
                rows.push(StudyRow {
                    integrand: f.name().to_string(),
                    sampler: s.name(),
                    n,
                    rmse: mse.sqrt(),
                });
            }
        }
    }
    Ok(rows)
}

/// Least-squares slope of `log rmse` against `log n`.
pub fn fit_slope(ns: &[usize], rmse: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = rmse.iter().map(|r| r.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
