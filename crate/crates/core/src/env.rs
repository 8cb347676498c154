//! Random prior environments: sums of Gaussian blobs rasterized onto a grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::grid::{BeliefMap, Bounds};

/// Largest prior probability produced by the generator.
pub const PRIOR_CAP: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub center: (f64, f64),
    pub sigma: f64,
    pub peak: f64,
}

/// Ranges the generator draws from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvDistribution {
    /// Inclusive cluster count range.
    pub count: (usize, usize),
    pub sigma: (f64, f64),
    pub peak: (f64, f64),
}

impl EnvDistribution {
    /// Ranges used on 5 km maps.
    pub fn full_scale() -> Self {
        Self {
            count: (4, 20),
            sigma: (60.0, 450.0),
            peak: (0.05, 0.5),
        }
    }

    /// Sigmas multiplied by `scale`; counts and peaks unchanged.
    pub fn scaled(scale: f64) -> Self {
        let f = Self::full_scale();
        Self {
            sigma: (f.sigma.0 * scale, f.sigma.1 * scale),
            ..f
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.count.0 <= self.count.1
            && self.sigma.0 > 0.0
            && self.sigma.0 <= self.sigma.1
            && self.peak.0 > 0.0
            && self.peak.0 <= self.peak.1
            && self.peak.1 < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid environment distribution {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub bounds: Bounds,
    pub cell_size: f64,
    pub clusters: Vec<Cluster>,
    pub seed: u64,
}

impl EnvSpec {
    /// Draws clusters uniformly inside `bounds`.
    pub fn generate(dist: &EnvDistribution, bounds: Bounds, cell_size: f64, seed: u64) -> Result<Self> {
        dist.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(dist.count.0..=dist.count.1);
        let clusters = (0..n)
            .map(|_| Cluster {
                center: (
                    rng.gen_range(bounds.x_min..=bounds.x_max),
                    rng.gen_range(bounds.y_min..=bounds.y_max),
                ),
                sigma: rng.gen_range(dist.sigma.0..=dist.sigma.1),
                peak: rng.gen_range(dist.peak.0..=dist.peak.1),
            })
            .collect();
        Ok(Self {
            bounds,
            cell_size,
            clusters,
            seed,
        })
    }

    /// Grid covering the bounds with `p = min(sum of blobs, 0.5)`.
    pub fn belief_map(&self) -> Result<BeliefMap> {
        let b = &self.bounds;
        let n_cols = (b.width() / self.cell_size).ceil().max(1.0) as usize;
        let n_rows = (b.height() / self.cell_size).ceil().max(1.0) as usize;
        let mut map = BeliefMap::new((b.x_min, b.y_min), self.cell_size, n_rows, n_cols, 0.0)?;
        for i in 0..map.len() as u32 {
            let (x, y) = map.cell_center(i);
            let p: f64 = self
                .clusters
                .iter()
                .map(|c| {
                    let d2 = (x - c.center.0).powi(2) + (y - c.center.1).powi(2);
                    c.peak * (-d2 / (2.0 * c.sigma * c.sigma)).exp()
                })
                .sum();
            map.set_prob(i, p.clamp(0.0, PRIOR_CAP))?;
        }
        Ok(map)
    }
}

/// Reduced-size mission used by tests, benchmarks and the default harness
/// configuration: 1 km square, 15 m cells, 3 km budget, 1500 information
/// evaluations per planning cycle in deterministic runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeskScenario {
    pub bounds: Bounds,
    pub cell_size: f64,
    pub budget: f64,
    pub start: Pose,
    pub distribution: EnvDistribution,
    pub evaluations: usize,
}

impl Default for DeskScenario {
    fn default() -> Self {
        Self {
            bounds: Bounds::new(0.0, 0.0, 1000.0, 1000.0),
            cell_size: 15.0,
            budget: 3000.0,
            start: Pose::new(100.0, 100.0, 50.0, std::f64::consts::FRAC_PI_4),
            distribution: EnvDistribution::scaled(0.2),
            evaluations: 1500,
        }
    }
}

impl DeskScenario {
    pub fn env(&self, seed: u64) -> Result<EnvSpec> {
        EnvSpec::generate(&self.distribution, self.bounds, self.cell_size, seed)
    }
}
