//! Values checked against independent references: quadrature, brute-force
//! Monte-Carlo and closed-form Gaussian tails.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{Continuous, ContinuousCDF, Normal, StudentsT};

use robustmean::adaptive::{adaptive_estimate, robust_sigma, AdaptiveConfig};
use robustmean::datagen::{derive_seed, half_t_mean, rng_from_seed, sample, DistributionSpec};
use robustmean::diagnostics::tail_quantile_check;
use robustmean::estimators::Sample;
use robustmean::stats::Moments;

/// Composite Simpson rule for `E|T| = 2 ∫_0^∞ t f(t) dt` after `t = u / (1 - u)`.
fn half_t_mean_by_quadrature(df: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, df).unwrap();
    let g = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let x = u / (1.0 - u);
        2.0 * x * t.pdf(x) / ((1.0 - u) * (1.0 - u))
    };
    let steps = 200_000;
    let h = 1.0 / steps as f64;
    let mut acc = g(0.0) + g(1.0);
    for i in 1..steps {
        acc += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn half_t_mean_matches_quadrature() {
    for df in [3.0, 4.0, 5.5, 10.0, 30.0] {
        let closed = half_t_mean(df);
        let numeric = half_t_mean_by_quadrature(df);
        assert!((closed - numeric).abs() < 2e-4, "df {df}: {closed} vs {numeric}");
    }
    assert!((half_t_mean_by_quadrature(4.0) - 1.0).abs() < 2e-4);
}

#[test]
fn half_t_standardized_moments_at_one_million() {
    let d = DistributionSpec::half_t_standardized(4.0).unwrap();
    let m = Moments::of(sample(&d, 1_000_000, 2024).unwrap().values());
    assert!(m.mean.abs() <= 0.005, "mean {}", m.mean);
    assert!((m.variance - 1.0).abs() <= 0.02, "variance {}", m.variance);
}

#[test]
fn every_distribution_is_centered_and_scaled() {
    let n = 1_000_000;
    let dists = [
        DistributionSpec::normal(3.0, 2.0).unwrap(),
        DistributionSpec::student_t(5.0).unwrap(),
        DistributionSpec::half_t_standardized(6.0).unwrap(),
        DistributionSpec::pareto(4.5, 1.0).unwrap(),
    ];
    for (i, d) in dists.iter().enumerate() {
        let m = Moments::of(sample(d, n, 77 + i as u64).unwrap().values());
        let var = d.true_sd() * d.true_sd();
        let root_n = (n as f64).sqrt();
        assert!((m.mean - d.true_mean()).abs() <= 5.0 * d.true_sd() / root_n, "{d:?} mean {}", m.mean);
        assert!((m.variance - var).abs() <= 10.0 * var / root_n, "{d:?} variance {}", m.variance);
    }
}

#[test]
fn robust_sigma_tracks_mean_absolute_pair_difference() {
    // Brute force: E|X1 - X2| for independent standard normals.
    let mut rng = rng_from_seed(1);
    let pairs = 1_000_000;
    let total: f64 = (0..pairs)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            (a - b).abs()
        })
        .sum();
    let brute = total / pairs as f64;
    let closed = 2.0 / std::f64::consts::PI.sqrt();
    assert!((brute - closed).abs() < 0.005, "{brute} vs {closed}");

    let s = sample(&DistributionSpec::standard_normal(), 10_000, 3).unwrap();
    let est = robust_sigma(&s).unwrap();
    assert_eq!(est.groups_used, 100);
    assert!((1.0..=1.3).contains(&est.sigma_tilde), "{}", est.sigma_tilde);
}

#[test]
fn robust_sigma_bracket_holds_across_distributions() {
    // Each has E|X - mu| >= sigma / 2.
    let dists = [
        DistributionSpec::standard_normal(),
        DistributionSpec::student_t(5.0).unwrap(),
        DistributionSpec::half_t_standardized(6.0).unwrap(),
    ];
    for d in dists {
        for r in 0..200 {
            let s = sample(&d, 1000, derive_seed(9, 0, r)).unwrap();
            let ratio = robust_sigma(&s).unwrap().sigma_tilde / d.true_sd();
            assert!((1.0 / 20.0..=4.0).contains(&ratio), "{d:?} rep {r}: {ratio}");
        }
    }
}

#[test]
fn tail_frequency_matches_gaussian_tail() {
    let reps = 20_000;
    let n = 100;
    let mut rng = rng_from_seed(5);
    let errors: Vec<f64> = (0..reps)
        .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).sum::<f64>() / n as f64)
        .collect();
    let got = tail_quantile_check(&errors, 1.0, n, &[2.0], 1.0).unwrap()[0];
    // The sample mean is N(0, 1/n), so P(|mean| > sqrt(2/n)) = 2 (1 - Φ(sqrt 2)).
    let oracle = 2.0 * (1.0 - Normal::new(0.0, 1.0).unwrap().cdf(2f64.sqrt()));
    assert!((got.frequency - oracle).abs() < 0.012, "{} vs {oracle}", got.frequency);
    assert!(got.frequency <= got.reference);
}

#[test]
fn adaptive_on_clean_normal_data() {
    let config = AdaptiveConfig::new(2.0, 0.5).unwrap();
    let d = DistributionSpec::standard_normal();
    let reps = 1000;
    let close = (0..reps)
        .filter(|&r| {
            let s: Sample = sample(&d, 2500, derive_seed(17, 0, r)).unwrap();
            adaptive_estimate(&s, &config).unwrap().estimate.abs() <= 0.1
        })
        .count();
    assert!(close as f64 / reps as f64 >= 0.99, "{close} of {reps}");
}
