//! Property tests for the library-wide invariants.

use num_complex::Complex64;
use proptest::prelude::*;
use qmckit::digits::{digit_vector, gray_code, radical_inverse};
use qmckit::dnet::{DigitalNet, DnetConfig, DnetRandomization, GeneratingMatrixSet};
use qmckit::fastgram::gram_build;
use qmckit::kernels::{DyadicPoint, KernelFamily, KernelSpec};
use qmckit::lattice::{Lattice, LatticeGeneratingVector, LatticeOrder};
use qmckit::lddata;
use qmckit::transforms::{self, SpectralVector, TransformKind};
use qmckit::{BatchMeta, PointBatch, PointGenerator};

/// Dyadic rationals with 53 binary digits, exact as both `f64` and words.
fn unit() -> impl Strategy<Value = f64> {
    (0u64..1 << 53).prop_map(|w| w as f64 / (1u64 << 53) as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn digit_vector_reconstructs(base in prop::sample::select(vec![2u64, 3, 5, 7, 11]), i in 0u64..1_000_000) {
        let v = digit_vector(i, base, qmckit::digits::max_digits(base).min(20)).unwrap();
        prop_assert_eq!(v.value(), i as u128);
    }

    #[test]
    fn gray_code_changes_one_digit(base in prop::sample::select(vec![2u64, 3, 5]), i in 0u64..100_000) {
        let a = digit_vector(gray_code(i, base).unwrap(), base, 24).unwrap();
        let b = digit_vector(gray_code(i + 1, base).unwrap(), base, 24).unwrap();
        let changed = a.digits().iter().zip(b.digits()).filter(|(x, y)| x != y).count();
        prop_assert_eq!(changed, 1);
    }

    #[test]
    fn radical_inverse_in_unit_interval(base in prop::sample::select(vec![2u64, 3, 5, 13]), m in 1u32..12, i in 0u64..4096) {
        let n = base.pow(m);
        let x = radical_inverse(i % n, base, m).unwrap();
        prop_assert!((0.0..1.0).contains(&x));
    }

    #[test]
    fn lattice_shift_preserves_differences(seed in any::<u64>(), d in 1usize..5, m in 1u32..8) {
        let n = 1usize << m;
        let g = LatticeGeneratingVector::default_for(d).unwrap();
        let z = Lattice::new(g.clone(), 2, LatticeOrder::Linear, None).unwrap().with_size(n as u64).unwrap().batch(n).unwrap();
        let x = Lattice::shifted(g, LatticeOrder::Linear, 1, seed).unwrap().with_size(n as u64).unwrap().batch(n).unwrap();
        for i in 0..n {
            for j in 0..d {
                let dx = (x.get(0, i, j) - x.get(0, 0, j)).rem_euclid(1.0);
                let dz = (z.get(0, i, j) - z.get(0, 0, j)).rem_euclid(1.0);
                let diff = (dx - dz).abs();
                prop_assert!(diff.min(1.0 - diff) < 1e-12);
            }
        }
    }

    #[test]
    fn transforms_are_unitary(values in prop::collection::vec(-10.0..10.0f64, 1..=64), m in 0u32..7) {
        let n = 1usize << m;
        let y: Vec<Complex64> = (0..n).map(|i| Complex64::new(values[i % values.len()], values[(3 * i + 1) % values.len()])).collect();
        let e: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        for kind in [TransformKind::Fwht, TransformKind::Fftbr] {
            let s = SpectralVector::forward_complex(kind, &y).unwrap();
            let es: f64 = s.values.iter().map(|v| v.norm_sqr()).sum();
            prop_assert!((es - e).abs() <= 1e-12 * e.max(1.0));
        }
        let back = transforms::ifftbr(&transforms::fftbr(&y).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&y) {
            prop_assert!((a - b).norm() < 1e-12 * e.max(1.0).sqrt());
        }
        let re: Vec<f64> = y.iter().map(|v| v.re).collect();
        let twice = transforms::fwht(&transforms::fwht(&re).unwrap()).unwrap();
        for (a, b) in twice.iter().zip(&re) {
            prop_assert!((a - b).abs() < 1e-12 * e.max(1.0).sqrt());
        }
    }

    #[test]
    fn kernels_symmetric_and_invariant(x in prop::collection::vec(unit(), 3), xp in prop::collection::vec(unit(), 3), s in prop::collection::vec(unit(), 3), alpha in 1u32..4) {
        let si = KernelSpec::uniform(KernelFamily::SiBernoulli, 3, alpha, 1.0, 0.7).unwrap();
        prop_assert_eq!(si.eval(&x, &xp).unwrap(), si.eval(&xp, &x).unwrap());
        let shift = |v: &[f64]| v.iter().zip(&s).map(|(a, b)| (a + b).fract()).collect::<Vec<f64>>();
        let k0 = si.eval(&x, &xp).unwrap();
        let k1 = si.eval(&shift(&x), &shift(&xp)).unwrap();
        prop_assert!((k0 - k1).abs() < 1e-9);

        let dsi = KernelSpec::uniform(KernelFamily::DsiWalsh, 3, alpha + 1, 1.0, 0.7).unwrap();
        prop_assert_eq!(dsi.eval(&x, &xp).unwrap(), dsi.eval(&xp, &x).unwrap());
        let xor = |v: &[f64]| {
            v.iter()
                .zip(&s)
                .map(|(a, b)| {
                    let pa = DyadicPoint::from_f64(*a, 53).unwrap();
                    let pb = DyadicPoint::from_f64(*b, 53).unwrap();
                    DyadicPoint::new(pa.word() ^ pb.word(), 53).unwrap().value()
                })
                .collect::<Vec<f64>>()
        };
        let d0 = dsi.eval(&x, &xp).unwrap();
        let d1 = dsi.eval(&xor(&x), &xor(&xp)).unwrap();
        prop_assert!((d0 - d1).abs() < 1e-9 * d0.abs().max(1.0));
    }

    #[test]
    fn gram_eigenvalue_identities(seed in any::<u64>(), m in 0u32..8, d in 1usize..4, alpha in 1u32..4) {
        let n = 1usize << m;
        let c = GeneratingMatrixSet::sobol(d).unwrap();
        let cfg = DnetConfig { randomization: DnetRandomization::DigitalShift, seed, ..DnetConfig::default() };
        let batch = DigitalNet::new(&c, cfg).unwrap().batch(n).unwrap();
        let spec = KernelSpec::uniform(KernelFamily::DsiWalsh, d, alpha, 1.0, 0.9).unwrap();
        let gram = gram_build(&spec, &batch).unwrap();
        let lam = gram.eigenvalues();
        let trace: f64 = lam.iter().map(|l| l.re).sum();
        let x0 = batch.point(0, 0);
        let k00 = spec.eval(x0, x0).unwrap();
        prop_assert!((trace - n as f64 * k00).abs() < 1e-9 * trace.abs().max(1.0));
        let col_sum: f64 = gram.first_column().iter().sum();
        prop_assert!((lam[0].re - col_sum).abs() < 1e-9 * col_sum.abs().max(1.0));
        let max = lam.iter().map(|l| l.norm()).fold(0.0, f64::max);
        for l in lam {
            prop_assert!(l.im.abs() <= 1e-12 * max.max(1.0));
            prop_assert!(l.re >= -1e-8 * max);
        }

        let g = LatticeGeneratingVector::default_for(d).unwrap();
        let lat = Lattice::shifted(g, LatticeOrder::RadicalInverse, 1, seed).unwrap().with_size(n as u64).unwrap().batch(n).unwrap();
        let spec = KernelSpec::uniform(KernelFamily::SiBernoulli, d, alpha, 1.0, 0.9).unwrap();
        let gram = gram_build(&spec, &lat).unwrap();
        let trace: f64 = gram.eigenvalues().iter().map(|l| l.re).sum();
        let x0 = lat.point(0, 0);
        prop_assert!((trace - n as f64 * spec.eval(x0, x0).unwrap()).abs() < 1e-9 * trace.abs().max(1.0));
        let col_sum: f64 = gram.first_column().iter().sum();
        prop_assert!((gram.eigenvalues()[0].re - col_sum).abs() < 1e-9 * col_sum.abs().max(1.0));
    }

    #[test]
    fn batch_files_round_trip_bit_exactly(reps in 1usize..4, n in 0usize..6, d in 1usize..4, raw in prop::collection::vec(any::<f64>(), 72)) {
        let data: Vec<f64> = (0..reps * n * d).map(|i| {
            let v = raw[i % raw.len()];
            if v.is_finite() { v.abs().fract() } else { 0.25 }
        }).collect();
        let batch = PointBatch::new(reps, n, d, data, BatchMeta::default()).unwrap();
        let bin = lddata::decode_batch_binary(&lddata::encode_batch_binary(&batch), "mem").unwrap();
        prop_assert_eq!(bin.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), batch.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        if n > 0 {
            let csv = lddata::parse_batch_csv(&lddata::format_batch_csv(&batch), "mem").unwrap();
            prop_assert_eq!(csv.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), batch.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
        let mut bytes = lddata::encode_batch_binary(&batch);
        bytes.push(0);
        prop_assert!(lddata::decode_batch_binary(&bytes, "mem").is_err());
    }

    #[test]
    fn generator_artifacts_round_trip(g in prop::collection::vec(1u64..(1 << 20), 1..6), cols in prop::collection::vec(any::<u64>(), 16)) {
        let lv = LatticeGeneratingVector::new(g, 20).unwrap();
        let text = lddata::format_lattice_vector(&lv, "proptest");
        prop_assert_eq!(lddata::parse_lattice_vector(&text, "mem").unwrap(), lv);

        let (d, m, t) = (2usize, 8u32, 40u32);
        let cols: Vec<u64> = cols.iter().map(|c| c & ((1u64 << t) - 1)).collect();
        let c = GeneratingMatrixSet::new(d, m, t, cols).unwrap();
        let text = lddata::format_dnet_matrices(&c, "proptest");
        prop_assert_eq!(lddata::parse_dnet_matrices(&text, "mem").unwrap(), c);
        let garbage = format!("{text}junk\n");
        prop_assert!(lddata::parse_dnet_matrices(&garbage, "mem").is_err());
    }
}
