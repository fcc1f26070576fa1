//! `O(n log n)` algebra for Gram matrices of structured point/kernel pairs.
//!
//! For `n = 2^m` points the Gram matrix factors as `K = V diag(lambda) V^*`
//! with `V` the orthonormal bit-reversed Fourier matrix (rank-1 lattice in
//! radical-inverse order with an SI kernel) or the scaled Hadamard matrix
//! (base-2 digital net in radical-inverse order with a DSI kernel). The first
//! column of `V` is the constant `n^-1/2`, so `lambda = sqrt(n) V^* k_1`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{QmcError, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::points::{BatchMeta, PointBatch};
use crate::transforms::{self, log2_exact, SpectralVector, TransformKind};

/// Eigenvalues with `|lambda_i| <= SINGULAR_TOL * max |lambda|` are singular.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramKind {
    SiLattice,
    DsiDnet,
}

impl GramKind {
    pub fn name(self) -> &'static str {
        match self {
            GramKind::SiLattice => "si-lattice",
            GramKind::DsiDnet => "dsi-dnet",
        }
    }

    pub fn transform(self) -> TransformKind {
        match self {
            GramKind::SiLattice => TransformKind::Fftbr,
            GramKind::DsiDnet => TransformKind::Fwht,
        }
    }

    pub fn kernel_family(self) -> KernelFamily {
        match self {
            GramKind::SiLattice => KernelFamily::SiBernoulli,
            GramKind::DsiDnet => KernelFamily::DsiWalsh,
        }
    }

    /// The structured kind a batch supports, or a structure error.
    pub fn for_batch(meta: &BatchMeta) -> Result<Self> {
        if meta.order != "radical-inverse" {
            return Err(QmcError::Structure(format!(
                "fast Gram algebra needs radical-inverse order, batch is in {} order",
                meta.order
            )));
        }
        if meta.generator == "lattice" {
            Ok(GramKind::SiLattice)
        } else if meta.generator.starts_with("dnet") {
            if meta.randomization == "nus" {
                return Err(QmcError::Structure(
                    "nested uniform scrambling destroys the block-Toeplitz Gram structure".into(),
                ));
            }
            Ok(GramKind::DsiDnet)
        } else {
            Err(QmcError::Structure(format!(
                "no fast Gram structure for {} points",
                meta.generator
            )))
        }
    }
}

/// Eigen-decomposed Gram matrix; immutable once built.
#[derive(Debug, Clone)]
pub struct SpectralGram {
    kind: GramKind,
    kernel: KernelSpec,
    /// First Gram column `K(x_i, x_0)`.
    k1: Vec<f64>,
    lambda: Vec<Complex64>,
    fingerprint: String,
}

/// First Gram column, evaluated in parallel over points.
pub fn gram_column(kernel: &KernelSpec, points: &[f64], d: usize) -> Result<Vec<f64>> {
    if d == 0 || points.len() % d != 0 || d != kernel.dim() {
        return Err(QmcError::Shape(format!(
            "{} coordinates do not form points of the kernel dimension {}",
            points.len(),
            kernel.dim()
        )));
    }
    let x0 = &points[..d.min(points.len())];
    points.par_chunks(d).map(|x| kernel.eval(x, x0)).collect()
}

impl SpectralGram {
    /// Builds from the points `x_0, .., x_{n-1}` (row-major `n x d`).
    pub fn build(kind: GramKind, kernel: &KernelSpec, points: &[f64], d: usize) -> Result<Self> {
        if kernel.family != kind.kernel_family() {
            return Err(QmcError::KindMismatch(format!(
                "{} Gram requires a {} kernel, got {}",
                kind.name(),
                kind.kernel_family().name(),
                kernel.family.name()
            )));
        }
        if points.is_empty() {
            return Err(QmcError::NotPowerOfTwo(0));
        }
        let k1 = gram_column(kernel, points, d)?;
        Self::from_column(kind, kernel.clone(), k1, String::new())
    }

    /// Builds from the first replication of a batch whose metadata is checked
    /// against the required structure.
    pub fn from_batch(kernel: &KernelSpec, batch: &PointBatch) -> Result<Self> {
        let kind = GramKind::for_batch(&batch.meta)?;
        let mut g = Self::build(kind, kernel, batch.replication(0), batch.dim())?;
        g.fingerprint = format!(
            "{}/{}/{}/seed={:?}/n={}",
            batch.meta.generator,
            batch.meta.order,
            batch.meta.randomization,
            batch.meta.seed,
            batch.n()
        );
        Ok(g)
    }

    /// Builds directly from a first Gram column.
    pub fn from_column(kind: GramKind, kernel: KernelSpec, k1: Vec<f64>, fingerprint: String) -> Result<Self> {
        let n = k1.len();
        log2_exact(n)?;
        let spec = SpectralVector::forward(kind.transform(), &k1)?;
        let scale = (n as f64).sqrt();
        let lambda = spec.values.into_iter().map(|v| v * scale).collect();
        Ok(Self {
            kind,
            kernel,
            k1,
            lambda,
            fingerprint,
        })
    }

    pub fn kind(&self) -> GramKind {
        self.kind
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn n(&self) -> usize {
        self.k1.len()
    }

    pub fn m(&self) -> u32 {
        self.k1.len().trailing_zeros()
    }

    pub fn first_column(&self) -> &[f64] {
        &self.k1
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.lambda
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.n() {
            return Err(QmcError::Length {
                expected: self.n(),
                got: y.len(),
            });
        }
        Ok(())
    }

    /// `V (lambda-op (V^* y))` for a diagonal operation on the spectrum.
    fn apply(&self, y: &[f64], op: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Vec<f64>> {
        self.check_len(y)?;
        match self.kind {
            GramKind::DsiDnet => {
                let mut t = transforms::fwht(y)?;
                for (v, l) in t.iter_mut().zip(&self.lambda) {
                    *v = op(Complex64::new(*v, 0.0), *l).re;
                }
                transforms::fwht_inplace(&mut t)?;
                Ok(t)
            }
            GramKind::SiLattice => {
                let mut t = transforms::fftbr_real(y)?;
                for (v, l) in t.iter_mut().zip(&self.lambda) {
                    *v = op(*v, *l);
                }
                transforms::ifftbr_inplace(&mut t)?;
                Ok(t.into_iter().map(|c| c.re).collect())
            }
        }
    }

    /// `K y`.
    pub fn matvec(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.apply(y, |v, l| v * l)
    }

    /// Checks every eigenvalue against the singularity tolerance.
    pub fn check_nonsingular(&self) -> Result<()> {
        let max = self.lambda.iter().map(|l| l.norm()).fold(0.0, f64::max);
        for (index, l) in self.lambda.iter().enumerate() {
            if l.norm() <= SINGULAR_TOL * max || max == 0.0 {
                return Err(QmcError::SingularGram {
                    index,
                    magnitude: l.norm(),
                });
            }
        }
        Ok(())
    }

    /// `K^-1 y`.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        self.check_nonsingular()?;
        self.apply(y, |v, l| v / l)
    }

    /// Extends to `2n` points given `K(x_i, x_0)` for the next `n` points,
    /// reusing the current spectrum.
    pub fn update_double(&self, new_k: &[f64]) -> Result<Self> {
        self.check_len(new_k)?;
        let n = self.n() as f64;
        let tkind = self.kind.transform();
        let old = SpectralVector {
            kind: tkind,
            values: self.lambda.iter().map(|l| l / n.sqrt()).collect(),
        };
        let new = SpectralVector::forward(tkind, new_k)?;
        let merged = transforms::merge_double(&old, &new)?;
        let scale = (2.0 * n).sqrt();
        let mut k1 = self.k1.clone();
        k1.extend_from_slice(new_k);
        Ok(Self {
            kind: self.kind,
            kernel: self.kernel.clone(),
            k1,
            lambda: merged.values.into_iter().map(|v| v * scale).collect(),
            fingerprint: self.fingerprint.clone(),
        })
    }

    /// Kernel integrals `kappa_i = int K(x, x_i) dx` (all equal for the
    /// built-in mean-zero kernels).
    pub fn kappa(&self) -> Vec<f64> {
        vec![self.kernel.integral(); self.n()]
    }

    /// `I_2 - 2 w^T kappa + w^T K w`.
    pub fn discrepancy_with(&self, w: &[f64], i2: f64, kappa: &[f64]) -> Result<f64> {
        self.check_len(w)?;
        self.check_len(kappa)?;
        let kw = self.matvec(w)?;
        let wk: f64 = w.iter().zip(kappa).map(|(a, b)| a * b).sum();
        let wkw: f64 = w.iter().zip(&kw).map(|(a, b)| a * b).sum();
        Ok(i2 - 2.0 * wk + wkw)
    }

    /// Discrepancy with the analytic kernel integrals.
    pub fn discrepancy(&self, w: &[f64]) -> Result<f64> {
        self.discrepancy_with(w, self.kernel.integral(), &self.kappa())
    }

    /// `K^-1 kappa`, the weights minimizing the discrepancy.
    pub fn optimal_weights_for(&self, kappa: &[f64]) -> Result<Vec<f64>> {
        self.solve(kappa)
    }

    pub fn optimal_weights(&self) -> Result<Vec<f64>> {
        self.solve(&self.kappa())
    }
}

pub fn gram_build(kernel: &KernelSpec, batch: &PointBatch) -> Result<SpectralGram> {
    SpectralGram::from_batch(kernel, batch)
}

/// 4-point Gauss-Legendre nodes and weights on `[-1, 1]`.
const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// `int_{[0,1]^d} K(x, xp) dx` by tensor Gauss-Legendre on `panels` equal
/// panels per axis (`d <= 3`). Nodes are rounded to 53-bit dyadics so DSI
/// kernels can be evaluated.
pub fn kappa_quadrature(kernel: &KernelSpec, xp: &[f64], panels: usize) -> Result<f64> {
    let d = kernel.dim();
    if d > 3 || xp.len() != d {
        return Err(QmcError::Shape(format!("quadrature fallback supports d <= 3, got {d}")));
    }
    let scale = (1u64 << 53) as f64;
    let nodes: Vec<(f64, f64)> = (0..panels)
        .flat_map(|p| {
            GAUSS4.iter().map(move |&(t, w)| {
                let x = (p as f64 + 0.5 * (t + 1.0)) / panels as f64;
                ((x * scale).round() / scale, w * 0.5 / panels as f64)
            })
        })
        .collect();
    let total = nodes.len().pow(d as u32);
    (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut x = [0.0; 3];
            let mut w = 1.0;
            for xj in x.iter_mut().take(d) {
                let (node, weight) = nodes[idx % nodes.len()];
                *xj = node;
                w *= weight;
                idx /= nodes.len();
            }
            kernel.eval(&x[..d], xp).map(|k| k * w)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnet::{DigitalNet, DnetConfig, GeneratingMatrixSet};
    use crate::lattice::{Lattice, LatticeGeneratingVector, LatticeOrder};
    use crate::points::PointGenerator;

    fn dsi(d: usize, alpha: u32) -> KernelSpec {
        KernelSpec::uniform(KernelFamily::DsiWalsh, d, alpha, 1.0, 1.0).unwrap()
    }

    fn net_batch(d: usize, n: usize, seed: u64) -> PointBatch {
        let c = GeneratingMatrixSet::sobol(d).unwrap();
        DigitalNet::new(
            &c,
            DnetConfig {
                seed,
                ..DnetConfig::default()
            },
        )
        .unwrap()
        .batch(n)
        .unwrap()
    }

    fn lattice_batch(d: usize, n: usize, seed: u64) -> PointBatch {
        let g = LatticeGeneratingVector::default_for(d).unwrap();
        Lattice::shifted(g, LatticeOrder::RadicalInverse, 1, seed).unwrap().batch(n).unwrap()
    }

    #[test]
    fn two_point_net_example() {
        let g = SpectralGram::build(GramKind::DsiDnet, &dsi(1, 2), &[0.0, 0.5], 1).unwrap();
        assert_eq!(g.first_column(), &[2.5, 0.75]);
        let l = g.eigenvalues();
        assert!((l[0].re - 3.25).abs() < 1e-14 && (l[1].re - 1.75).abs() < 1e-14);
    }

    #[test]
    fn single_point() {
        let g = SpectralGram::build(GramKind::DsiDnet, &dsi(1, 2), &[0.0], 1).unwrap();
        assert_eq!(g.eigenvalues()[0].re, 2.5);
        assert!((g.discrepancy(&[1.0]).unwrap() - 1.5).abs() < 1e-15);
        assert!((g.optimal_weights().unwrap()[0] - 0.4).abs() < 1e-15);
        assert_eq!(g.discrepancy(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn matvec_solve_identities() {
        for (kind, batch, kernel) in [
            (GramKind::DsiDnet, net_batch(2, 64, 1), dsi(2, 3)),
            (
                GramKind::SiLattice,
                lattice_batch(2, 64, 1),
                KernelSpec::uniform(KernelFamily::SiBernoulli, 2, 2, 1.0, 1.0).unwrap(),
            ),
        ] {
            let g = SpectralGram::from_batch(&kernel, &batch).unwrap();
            assert_eq!(g.kind(), kind);
            let mut e0 = vec![0.0; 64];
            e0[0] = 1.0;
            let col = g.matvec(&e0).unwrap();
            assert!(col.iter().zip(g.first_column()).all(|(a, b)| (a - b).abs() < 1e-10));
            assert!(g.matvec(&[0.0; 64]).unwrap().iter().all(|&v| v == 0.0));
            let back = g.solve(g.first_column()).unwrap();
            assert!(back.iter().zip(&e0).all(|(a, b)| (a - b).abs() < 1e-8));
            let trace: f64 = g.eigenvalues().iter().map(|l| l.re).sum();
            assert!((trace - 64.0 * g.first_column()[0]).abs() < 1e-9 * trace);
            let sum: f64 = g.first_column().iter().sum();
            assert!((g.eigenvalues()[0].re - sum).abs() < 1e-10 * sum.abs());
            assert!(g.eigenvalues().iter().all(|l| l.im.abs() < 1e-10));
        }
    }

    #[test]
    fn structure_errors() {
        let c = GeneratingMatrixSet::sobol(2).unwrap();
        let nus = DigitalNet::new(
            &c,
            DnetConfig {
                randomization: crate::dnet::DnetRandomization::Nus,
                ..DnetConfig::default()
            },
        )
        .unwrap()
        .batch(8)
        .unwrap();
        assert!(matches!(SpectralGram::from_batch(&dsi(2, 2), &nus), Err(QmcError::Structure(_))));
        let lat = lattice_batch(2, 8, 0);
        assert!(matches!(SpectralGram::from_batch(&dsi(2, 2), &lat), Err(QmcError::KindMismatch(_))));
        assert!(matches!(
            SpectralGram::build(GramKind::DsiDnet, &dsi(1, 2), &[0.0, 0.5, 0.25], 1),
            Err(QmcError::NotPowerOfTwo(3))
        ));
        let g = SpectralGram::build(GramKind::DsiDnet, &dsi(1, 2), &[0.0, 0.5], 1).unwrap();
        assert!(matches!(g.matvec(&[1.0]), Err(QmcError::Length { .. })));
    }

    #[test]
    fn singular_gram_reported() {
        // Duplicated points make the Gram matrix rank deficient.
        let g = SpectralGram::build(GramKind::DsiDnet, &dsi(1, 2), &[0.5, 0.5], 1).unwrap();
        assert!(matches!(g.solve(&[1.0, 0.0]), Err(QmcError::SingularGram { index: 1, .. })));
    }

    #[test]
    fn update_double_matches_rebuild() {
        for m in 0..=8u32 {
            let n = 1usize << m;
            let batch = net_batch(2, 2 * n, 4);
            let kernel = dsi(2, 2);
            let half = SpectralGram::build(GramKind::DsiDnet, &kernel, &batch.replication(0)[..2 * n], 2).unwrap();
            let full = SpectralGram::from_batch(&kernel, &batch).unwrap();
            let new_k = &full.first_column()[n..];
            let up = half.update_double(new_k).unwrap();
            let err: f64 = up.eigenvalues().iter().zip(full.eigenvalues()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let scale = full.eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max);
            assert!(err <= 1e-10 * scale, "m = {m}");

            let lb = lattice_batch(2, 2 * n, 4);
            let sk = KernelSpec::uniform(KernelFamily::SiBernoulli, 2, 1, 1.0, 1.0).unwrap();
            let half = SpectralGram::build(GramKind::SiLattice, &sk, &lb.replication(0)[..2 * n], 2).unwrap();
            let full = SpectralGram::from_batch(&sk, &lb).unwrap();
            let up = half.update_double(&full.first_column()[n..]).unwrap();
            let err: f64 = up.eigenvalues().iter().zip(full.eigenvalues()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let scale = full.eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max);
            assert!(err <= 1e-10 * scale, "lattice m = {m}");
        }
    }

    #[test]
    fn update_double_duplicated_points() {
        let kernel = dsi(1, 2);
        let g = SpectralGram::build(GramKind::DsiDnet, &kernel, &[0.0, 0.5], 1).unwrap();
        let up = g.update_double(g.first_column()).unwrap();
        let l = up.eigenvalues();
        assert!((l[0].re - 2.0 * 3.25).abs() < 1e-13 && (l[1].re - 2.0 * 1.75).abs() < 1e-13);
        assert!(l[2].norm() < 1e-13 && l[3].norm() < 1e-13);
    }

    #[test]
    fn optimal_weights_beat_equal_weights() {
        for seed in 0..5 {
            let batch = net_batch(2, 128, seed);
            let g = SpectralGram::from_batch(&dsi(2, 2), &batch).unwrap();
            let w = g.optimal_weights().unwrap();
            let equal = vec![1.0 / 128.0; 128];
            assert!(g.discrepancy(&w).unwrap() <= g.discrepancy(&equal).unwrap() + 1e-12);
        }
        let g = SpectralGram::build(GramKind::DsiDnet, &dsi(1, 2), &[0.0, 0.5], 1).unwrap();
        let w = g.optimal_weights_for(&g.first_column().to_vec()).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12 && w[1].abs() < 1e-12);
    }

    #[test]
    fn analytic_kappa_matches_quadrature() {
        let si = KernelSpec::product(KernelFamily::SiBernoulli, vec![1, 2], 1.5, vec![0.7, 1.2]).unwrap();
        let q = kappa_quadrature(&si, &[0.3125, 0.8125], 64).unwrap();
        assert!((q - 1.5).abs() < 1e-9, "{q}");
        let ds = KernelSpec::product(KernelFamily::DsiWalsh, vec![2, 3], 2.0, vec![1.0, 0.5]).unwrap();
        let q = kappa_quadrature(&ds, &[0.375, 0.0], 256).unwrap();
        assert!((q - 2.0).abs() < 1e-6, "{q}");
    }
}
