use majorize::linalg::{eig_hermitian, max_abs, random_gaussian, random_isometry, random_unitary};
use majorize::sequence::shannon_entropy;
use majorize::state::{
    ky_fan_sum, l1_equivalent, random_density, random_full_rank_density, spectrum, trace_distance,
    von_neumann_entropy, DensityMatrix,
};
use majorize::{Complex64, ComplexMatrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_hermitian(d: usize, r: &mut ChaCha8Rng) -> ComplexMatrix {
    let g = random_gaussian(d, d, r);
    (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn entropy_is_spectral(d in 1usize..=16, seed in any::<u64>()) {
        let rho = random_density(d, &mut rng(seed), None).unwrap();
        let s = von_neumann_entropy(&rho).unwrap();
        let lambda = spectrum(&rho).unwrap();
        prop_assert!((lambda.total() - 1.0).abs() <= 1e-8);
        prop_assert!((s - shannon_entropy(&lambda).unwrap()).abs() <= 1e-9);
        prop_assert!(s >= -1e-12);
        prop_assert!(s <= (d as f64).log2() + 1e-9);
    }

    #[test]
    fn eigensolver_contract(d in 1usize..=24, seed in any::<u64>()) {
        let h = random_hermitian(d, &mut rng(seed));
        let dec = eig_hermitian(&h).unwrap();
        prop_assert!(dec.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(max_abs(&(dec.reconstruct() - &h)) <= 1e-8);
        let v = &dec.eigenvectors;
        prop_assert!(max_abs(&(v.adjoint() * v - ComplexMatrix::identity(d, d))) <= 1e-9);
    }

    #[test]
    fn requested_spectrum_is_honoured(d in 1usize..=16, seed in any::<u64>()) {
        let mut r = rng(seed);
        let target = spectrum(&random_density(d, &mut r, None).unwrap()).unwrap();
        let rho = random_density(d, &mut r, Some(&target)).unwrap();
        let got = spectrum(&rho).unwrap();
        let err = got.entries().iter().zip(target.entries()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-8);
    }

    #[test]
    fn trace_distance_is_a_metric(d in 1usize..=10, seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = random_density(d, &mut r, None).unwrap();
        let y = random_density(d, &mut r, None).unwrap();
        let z = random_density(d, &mut r, None).unwrap();
        let (xy, yx) = (trace_distance(&x, &y).unwrap(), trace_distance(&y, &x).unwrap());
        prop_assert!(xy >= 0.0);
        prop_assert!((xy - yx).abs() <= 1e-9);
        prop_assert!(trace_distance(&x, &x).unwrap() <= 1e-9);
        let via = trace_distance(&x, &z).unwrap() + trace_distance(&z, &y).unwrap();
        prop_assert!(xy <= via + 1e-9);
        prop_assert!(xy <= 2.0 + 1e-9);
    }

    #[test]
    fn ky_fan_is_concave_increasing(d in 1usize..=12, seed in any::<u64>()) {
        let rho = random_density(d, &mut rng(seed), None).unwrap();
        let sums: Vec<f64> = (1..=d).map(|k| ky_fan_sum(rho.matrix(), k).unwrap()).collect();
        prop_assert!((sums[d - 1] - 1.0).abs() <= 1e-9);
        let increments: Vec<f64> = std::iter::once(sums[0]).chain(sums.windows(2).map(|w| w[1] - w[0])).collect();
        prop_assert!(increments.iter().all(|&x| x >= -1e-12));
        prop_assert!(increments.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn ky_fan_bounds_projections(d in 1usize..=12, k_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = 1 + ((d - 1) as f64 * k_frac) as usize;
        let a = random_hermitian(d, &mut r);
        let bound = ky_fan_sum(&a, k).unwrap();
        let w = random_isometry(d, k, &mut r).unwrap();
        let p = &w * w.adjoint();
        prop_assert!((&a * &p).trace().re <= bound + 1e-9);

        let dec = eig_hermitian(&a).unwrap();
        let top = dec.eigenvectors.columns(0, k).into_owned();
        let p_top = &top * top.adjoint();
        prop_assert!(((&a * p_top).trace().re - bound).abs() <= 1e-9);
    }

    #[test]
    fn unitary_orbits_are_l1_equivalent(d in 1usize..=10, seed in any::<u64>()) {
        let mut r = rng(seed);
        let rho = random_full_rank_density(d, &mut r, 6.0).unwrap();
        let u = random_unitary(d, &mut r);
        let moved = rho.conjugate(&u).unwrap();
        prop_assert!(l1_equivalent(&rho, &moved, 1e-8).unwrap());
        prop_assert!(rho.is_full_rank().unwrap());
    }

    #[test]
    fn density_json_round_trip(d in 1usize..=6, seed in any::<u64>()) {
        let rho = random_density(d, &mut rng(seed), None).unwrap();
        let text = serde_json::to_string(&rho).unwrap();
        prop_assert!(text.contains(r#""kind":"density""#));
        let back: DensityMatrix = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.matrix(), rho.matrix());
    }
}

#[test]
fn purity_criterion_roots() {
    // ½(xx* + yy*) has eigenvalues (1 ± |⟨y,x⟩|)/2.
    let mut r = rng(11);
    for step in 0..10 {
        let alpha = step as f64 / 10.0;
        let u = random_unitary(4, &mut r);
        let x: Vec<Complex64> = u.column(0).iter().copied().collect();
        let y: Vec<Complex64> = u
            .column(0)
            .iter()
            .zip(u.column(2).iter())
            .map(|(p, q)| p * alpha + q * (1.0 - alpha * alpha).sqrt())
            .collect();
        let m = (majorize::linalg::outer(&x, &x) + majorize::linalg::outer(&y, &y))
            * Complex64::new(0.5, 0.0);
        let rho = DensityMatrix::new(m).unwrap();
        let lambda = spectrum(&rho).unwrap();
        assert!((lambda.entries()[0] - (1.0 + alpha) / 2.0).abs() <= 1e-9);
        assert!((lambda.entries()[1] - (1.0 - alpha) / 2.0).abs() <= 1e-9);
        let s = von_neumann_entropy(&rho).unwrap();
        assert_eq!((s - 1.0).abs() <= 1e-9, alpha <= 1e-5);
    }
}

#[test]
fn invalid_states_are_rejected() {
    let not_hermitian = ComplexMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.5, 0.0),
            Complex64::new(0.1, 0.0),
            Complex64::new(0.2, 0.0),
            Complex64::new(0.5, 0.0),
        ],
    );
    assert!(matches!(
        DensityMatrix::new(not_hermitian),
        Err(majorize::Error::NotHermitian { row: 0, col: 1, .. }
            | majorize::Error::NotHermitian { row: 1, col: 0, .. })
    ));
    let bad_trace = ComplexMatrix::identity(2, 2);
    assert!(matches!(
        DensityMatrix::new(bad_trace),
        Err(majorize::Error::InvalidTrace { .. })
    ));
    let negative = majorize::linalg::diagonal(&[1.5, -0.5]);
    assert!(matches!(
        DensityMatrix::new(negative),
        Err(majorize::Error::NotPositive { .. })
    ));
}
