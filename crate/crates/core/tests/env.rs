//! Random prior generation.

use ipp_core::{Bounds, EnvDistribution, EnvSpec};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn cluster_count_is_uniform() {
    let dist = EnvDistribution::full_scale();
    let bounds = Bounds::new(0.0, 0.0, 5000.0, 5000.0);
    let mut counts = [0usize; 17];
    for seed in 0..1000 {
        let env = EnvSpec::generate(&dist, bounds, 30.0, seed).unwrap();
        let n = env.clusters.len();
        assert!((4..=20).contains(&n));
        counts[n - 4] += 1;
        for c in &env.clusters {
            assert!(bounds.contains(c.center.0, c.center.1));
            assert!((60.0..=450.0).contains(&c.sigma));
            assert!((0.05..=0.5).contains(&c.peak));
        }
    }
    let expected = 1000.0 / 17.0;
    let chi2: f64 = counts.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(16.0).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 {chi2}, p {p}");
}

#[test]
fn rejects_bad_ranges() {
    let mut d = EnvDistribution::full_scale();
    d.peak = (0.5, 1.2);
    assert!(EnvSpec::generate(&d, Bounds::new(0.0, 0.0, 100.0, 100.0), 10.0, 0).is_err());
}
