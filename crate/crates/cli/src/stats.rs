//! Sample statistics for trial aggregates.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for fewer than two samples.
    pub sd: f64,
    /// Half-width of the normal 95% interval, 1.96 s / sqrt(n).
    pub ci95: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    if n == 0 {
        return Summary { n, mean: f64::NAN, sd: f64::NAN, ci95: f64::NAN };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Summary { n, mean, sd, ci95: 1.96 * sd / (n as f64).sqrt() }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub n: usize,
    /// Mean of `a - b`.
    pub mean_diff: f64,
    pub t: f64,
    /// Two-sided p-value.
    pub p_two_sided: f64,
    /// One-sided p-value for the alternative `a > b`.
    pub p_greater: f64,
}

/// Paired t-test of `a` against `b`. `None` without at least two pairs or
/// when every difference is identical.
pub fn paired_t(a: &[f64], b: &[f64]) -> Option<PairedTest> {
    assert_eq!(a.len(), b.len(), "paired samples differ in length");
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let s = summarize(&d);
    if s.n < 2 || s.sd == 0.0 {
        return None;
    }
    let t = s.mean / (s.sd / (s.n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (s.n - 1) as f64).ok()?;
    let upper = dist.sf(t);
    Some(PairedTest {
        n: s.n,
        mean_diff: s.mean,
        t,
        p_two_sided: (2.0 * upper.min(dist.cdf(t))).min(1.0),
        p_greater: upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_known_sample() {
        let s = summarize(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(s.mean, 5.0);
        assert!((s.sd - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert!((s.ci95 - 1.96 * s.sd / 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn paired_t_matches_hand_computation() {
        // Differences 1, 2, 3, 4, 5: mean 3, sd sqrt(2.5), t = 3 / (sqrt(2.5) / sqrt(5)) = 4.2426.
        let a = [11.0, 12.0, 13.0, 14.0, 15.0];
        let b = [10.0; 5];
        let t = paired_t(&a, &b).unwrap();
        assert!((t.t - 18f64.sqrt()).abs() < 1e-12);
        // Student t with 4 dof: P(T > 4.2426) = 0.00661.
        assert!((t.p_greater - 0.00661).abs() < 5e-5, "{}", t.p_greater);
        assert!((t.p_two_sided - 2.0 * t.p_greater).abs() < 1e-12);
        let r = paired_t(&b, &a).unwrap();
        assert!((r.p_greater - (1.0 - t.p_greater)).abs() < 1e-12);
    }

    #[test]
    fn constant_differences_have_no_test() {
        assert!(paired_t(&[1.0, 2.0], &[0.0, 1.0]).is_none());
        assert!(paired_t(&[1.0], &[0.0]).is_none());
    }
}
