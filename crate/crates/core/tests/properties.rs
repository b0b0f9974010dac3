use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use spectral_nns::algorithms::{estimated_sq_distances, knn, naive_nns, svd_split_nns};
use spectral_nns::linalg::{self, DataMatrix};
use spectral_nns::lowerbounds::{kl_isotropic_gaussians, swap_kl};
use spectral_nns::model::{check_invariants, generate_synthetic, perturb, SyntheticParams};
use spectral_nns::thresholds::theorem_sigma_cap;

fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    gaussian_matrix(d, d, seed).qr().q()
}

/// Kolmogorov–Smirnov statistic of `xs` against `N(0, σ²)`.
fn ks_statistic(mut xs: Vec<f64>, sigma: f64) -> f64 {
    let normal = Normal::new(0.0, sigma).unwrap();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = normal.cdf(x);
            (c - i as f64 / m).abs().max(((i + 1) as f64 / m - c).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn noise_entries_are_gaussian_with_the_requested_scale() {
    let inst = generate_synthetic(&SyntheticParams::flat(100, 50, 5, 1.0, 0.05), 2).unwrap();
    let sigma = 0.3;
    let noisy = perturb(&inst, sigma, 17).unwrap();
    let noise: Vec<f64> = (noisy.a().as_matrix() - inst.b().as_matrix()).iter().copied().collect();
    let m = noise.len() as f64;
    let mean = noise.iter().sum::<f64>() / m;
    let var = noise.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    assert!(mean.abs() < 4.0 * sigma / m.sqrt(), "mean {mean}");
    assert!((var / (sigma * sigma) - 1.0).abs() < 4.0 * (2.0 / m).sqrt(), "var {var}");
    // 1.63/√m is the 1% critical value
    assert!(ks_statistic(noise, sigma) < 1.63 / m.sqrt());
}

#[test]
fn noise_is_isotropic_across_directions() {
    let inst = generate_synthetic(&SyntheticParams::flat(400, 20, 3, 1.0, 0.05), 6).unwrap();
    let sigma = 0.5;
    let noisy = perturb(&inst, sigma, 99).unwrap();
    let c = noisy.a().as_matrix() - inst.b().as_matrix();
    let q = random_orthogonal(20, 4);
    // second moment along each of 20 orthonormal directions is σ² within
    // Monte-Carlo error, and cross moments vanish
    let cov = (q.transpose() * &c) * (q.transpose() * &c).transpose() / c.ncols() as f64;
    let tol = 5.0 * sigma * sigma * (2.0 / c.ncols() as f64).sqrt();
    for i in 0..20 {
        assert!((cov[(i, i)] - sigma * sigma).abs() < tol, "diag {i}: {}", cov[(i, i)]);
        for j in 0..i {
            assert!(cov[(i, j)].abs() < tol, "off-diagonal {i},{j}: {}", cov[(i, j)]);
        }
    }
}

#[test]
fn common_random_numbers_across_sigma() {
    let inst = generate_synthetic(&SyntheticParams::flat(20, 10, 2, 1.0, 0.1), 1).unwrap();
    let a1 = perturb(&inst, 0.1, 5).unwrap();
    let a2 = perturb(&inst, 0.2, 5).unwrap();
    let b = inst.b().as_matrix();
    let diff = (a2.a().as_matrix() - b) - 2.0 * (a1.a().as_matrix() - b);
    assert!(diff.amax() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn synthetic_instances_satisfy_invariants(
        half in 3usize..12,
        k in 1usize..4,
        extra in 0usize..6,
        eps in 0.01f64..0.5,
        seed in any::<u64>(),
    ) {
        let n = 2 * half;
        let d = k + extra + 1;
        let inst = generate_synthetic(&SyntheticParams::flat(n, d, k, 1.0, eps), seed).unwrap();
        prop_assert!(check_invariants(&inst).is_ok());
        let noisy = perturb(&inst, 0.0, seed).unwrap();
        prop_assert_eq!(svd_split_nns(noisy.a(), k).unwrap().index, inst.nn_index());
        prop_assert_eq!(naive_nns(noisy.a()).unwrap().index, inst.nn_index());
    }

    #[test]
    fn answers_are_invariant_under_scaling_and_rotation(
        d in 3usize..8,
        half in 2usize..6,
        scale in 0.1f64..10.0,
        seed in any::<u64>(),
    ) {
        let n = 2 * half;
        let k = 2.min(d).min(half);
        let a = gaussian_matrix(d, n + 1, seed);
        let base = svd_split_nns(&DataMatrix::new(a.clone()).unwrap(), k).unwrap().index;
        let scaled = svd_split_nns(&DataMatrix::new(&a * scale).unwrap(), k).unwrap().index;
        let q = random_orthogonal(d, seed ^ 1);
        let rotated = svd_split_nns(&DataMatrix::new(&q * &a).unwrap(), k).unwrap().index;
        prop_assert_eq!(base, scaled);
        prop_assert_eq!(base, rotated);
    }

    #[test]
    fn swapping_within_a_half_relabels_the_answer(
        half in 2usize..6,
        i in 0usize..6,
        j in 0usize..6,
        seed in any::<u64>(),
    ) {
        let (i, j) = (i % half, j % half);
        let n = 2 * half;
        let a = gaussian_matrix(4, n + 1, seed);
        let mut b = a.clone();
        b.swap_columns(i, j);
        let before = svd_split_nns(&DataMatrix::new(a).unwrap(), 2).unwrap().index;
        let after = svd_split_nns(&DataMatrix::new(b).unwrap(), 2).unwrap().index;
        let expected = if before == i { j } else if before == j { i } else { before };
        prop_assert_eq!(after, expected);
    }

    #[test]
    fn knn_orders_by_estimate(seed in any::<u64>(), sigma in 0.0f64..1.0) {
        let a = DataMatrix::new(gaussian_matrix(6, 11, seed)).unwrap();
        let est = estimated_sq_distances(&a, 2, sigma).unwrap();
        let all = knn(&a, 2, sigma, 10).unwrap();
        let mut sorted = all.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..10).collect::<Vec<_>>());
        for w in all.windows(2) {
            prop_assert!(est[w[0]] <= est[w[1]]);
        }
        prop_assert_eq!(all[0], svd_split_nns(&a, 2).unwrap().index);
    }

    #[test]
    fn projection_is_idempotent_and_contractive(rows in 3usize..12, seed in any::<u64>()) {
        let m = DataMatrix::new(gaussian_matrix(rows, 8, seed)).unwrap();
        let k = 1 + (seed as usize % rows.min(8));
        let u = linalg::top_k_left_singular_subspace(&m, k).unwrap();
        prop_assert!(u.orthonormality_error() < 1e-8);
        let x = m.column(0);
        let px = u.project(&x).unwrap();
        prop_assert!((u.project(&px).unwrap() - &px).norm() < 1e-10 * (1.0 + x.norm()));
        prop_assert!(px.norm() <= x.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn swap_kl_never_exceeds_its_bound(k in 1usize..5000, sigma in 0.05f64..20.0) {
        let kl = swap_kl(k, sigma).unwrap();
        prop_assert!(kl.exact >= 0.0);
        prop_assert!(kl.exact <= kl.bound * (1.0 + 1e-12));
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_identical(
        mu in proptest::collection::vec(-5.0f64..5.0, 1..6),
        v1 in 0.1f64..4.0,
        v2 in 0.1f64..4.0,
    ) {
        let shifted: Vec<f64> = mu.iter().map(|m| m + 0.5).collect();
        prop_assert!(kl_isotropic_gaussians(&mu, v1, &shifted, v2).unwrap() >= 0.0);
        prop_assert!(kl_isotropic_gaussians(&mu, v1, &mu, v1).unwrap().abs() < 1e-12);
    }

    #[test]
    fn cap_spectral_term_scales_with_the_spectrum(mult in 1.5f64..8.0, seed in 0u64..50) {
        let base = SyntheticParams::flat(40, 20, 4, 1.0, 0.05);
        let a = theorem_sigma_cap(&generate_synthetic(&base, seed).unwrap()).unwrap();
        let b = theorem_sigma_cap(&generate_synthetic(&base.with_spectrum_scaled(mult), seed).unwrap()).unwrap();
        // the query column is not scaled, so the ratio is only approximately `mult`
        prop_assert!(b.term_spectral > a.term_spectral);
        prop_assert!(b.term_spectral / a.term_spectral < mult * 1.5);
    }
}
