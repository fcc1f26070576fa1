//! Seeded statistical checks of the randomizations and the estimator.

use qmckit::dnet::{DigitalNet, DnetConfig, DnetRandomization, GeneratingMatrixSet};
use qmckit::halton::{Halton, HaltonConfig, HaltonRandomization};
use qmckit::lattice::{Lattice, LatticeGeneratingVector, LatticeOrder};
use qmckit::rqmc::{self, SamplerSpec};
use qmckit::PointGenerator;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn chi_square_p(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

fn bin(x: f64, bins: usize) -> usize {
    ((x * bins as f64) as usize).min(bins - 1)
}

#[test]
fn shifted_lattice_is_unbiased() {
    let spec = SamplerSpec::parse("lattice-raw").unwrap();
    for name in rqmc::CATALOG {
        let d = rqmc::default_dim(name).unwrap();
        let f = rqmc::integrand_library(name, d).unwrap();
        let Some(mu) = f.exact_mean() else { continue };
        let r = rqmc::rqmc_fixed(&f, &spec, 64, 1000, 0.05, 17).unwrap();
        let m = r.rep_means.iter().sum::<f64>() / 1000.0;
        let var = r.rep_means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 999.0;
        let se = (var / 1000.0).sqrt();
        assert!((m - mu).abs() <= 4.0 * se + 1e-14, "{name}: mean {m} vs {mu}, se {se}");
    }
}

#[test]
fn shifted_lattice_marginals_are_uniform() {
    let d = 3;
    let g = LatticeGeneratingVector::default_for(d).unwrap();
    let lat = Lattice::shifted(g, LatticeOrder::RadicalInverse, 10_000, 4).unwrap();
    let batch = lat.batch(8).unwrap();
    for i in [0, 5] {
        for j in 0..d {
            let mut counts = vec![0usize; 32];
            for r in 0..batch.reps() {
                counts[bin(batch.get(r, i, j), 32)] += 1;
            }
            assert!(chi_square_p(&counts) > 0.001, "point {i} dim {j}");
        }
    }
}

#[test]
fn net_randomizations_have_uniform_digit_histograms() {
    let d = 4;
    let c = GeneratingMatrixSet::sobol(d).unwrap();
    for rand in [DnetRandomization::LmsShift, DnetRandomization::Nus] {
        let cfg = DnetConfig {
            randomization: rand,
            reps: 100,
            seed: 31,
            ..DnetConfig::default()
        };
        let batch = DigitalNet::new(&c, cfg).unwrap().batch(1 << 12).unwrap();
        for j in 0..d {
            for k in 1..=6u32 {
                let bins = 1usize << k;
                // pooled over the whole batch, and for single points across
                // replications
                let mut pooled = vec![0usize; bins];
                let mut single = vec![0usize; bins];
                for r in 0..batch.reps() {
                    for i in 0..batch.n() {
                        pooled[bin(batch.get(r, i, j), bins)] += 1;
                    }
                    single[bin(batch.get(r, 1234, j), bins)] += 1;
                }
                assert!(chi_square_p(&pooled) > 0.001, "{} dim {j} k {k}", rand.name());
                assert!(chi_square_p(&single) > 0.001, "{} dim {j} k {k} single", rand.name());
            }
        }
    }
}

#[test]
fn halton_randomizations_have_uniform_marginals() {
    for rand in [
        HaltonRandomization::DigitalShift,
        HaltonRandomization::Permutation,
        HaltonRandomization::LmsShift,
        HaltonRandomization::LmsPermutation,
        HaltonRandomization::Nus,
        HaltonRandomization::Qrng,
    ] {
        let h = Halton::new(HaltonConfig::new(4, rand, 2000, 8)).unwrap();
        let batch = h.batch(4).unwrap();
        for j in 0..4 {
            let mut counts = vec![0usize; 20];
            for r in 0..batch.reps() {
                counts[bin(batch.get(r, 3, j), 20)] += 1;
            }
            assert!(chi_square_p(&counts) > 0.001, "{} dim {j}", rand.name());
        }
    }
}
