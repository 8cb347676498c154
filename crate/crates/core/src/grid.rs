//! Occupancy belief grid, range-dependent detector model and the
//! Bayesian/entropy primitives used by every planner.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stored probabilities are kept away from 0 and 1 so that no cell becomes
/// an absorbing state after a run of measurements.
pub const PROB_FLOOR: f64 = 1e-6;

/// Single-integer cell key, `row * n_cols + col`.
pub type CellIndex = u32;

/// Shannon entropy of a binary variable, in bits.
pub fn entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Probability(p));
    }
    Ok(entropy_unchecked(p))
}

#[inline]
pub(crate) fn entropy_unchecked(p: f64) -> f64 {
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.log2();
    }
    let q = 1.0 - p;
    if q > 0.0 {
        h -= q * q.log2();
    }
    h
}

/// Binary detector outcome at a given range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub positive: bool,
    pub range: f64,
}

/// One row of the detector lookup table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub range: f64,
    pub tpr: f64,
    pub tnr: f64,
}

/// Piecewise-linear range to (TPR, TNR) table. Beyond `max_range` the
/// detector is uninformative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    breakpoints: Vec<Breakpoint>,
    max_range: f64,
}

impl SensorModel {
    pub fn new(breakpoints: Vec<Breakpoint>, max_range: f64) -> Result<Self> {
        let first = breakpoints
            .first()
            .ok_or_else(|| Error::Config("sensor table is empty".into()))?;
        if first.range != 0.0 {
            return Err(Error::Config("sensor table must start at range 0".into()));
        }
        if breakpoints.windows(2).any(|w| w[1].range <= w[0].range) {
            return Err(Error::Config(
                "sensor breakpoints must be strictly increasing".into(),
            ));
        }
        if breakpoints
            .iter()
            .any(|b| !(0.5..=1.0).contains(&b.tpr) || !(0.5..=1.0).contains(&b.tnr))
        {
            return Err(Error::Config("sensor rates must lie in [0.5, 1]".into()));
        }
        if !(max_range > 0.0) {
            return Err(Error::Config("sensor max_range must be positive".into()));
        }
        Ok(Self {
            breakpoints,
            max_range,
        })
    }

    /// 0.9/0.9 out to 200 m, falling linearly to 0.5/0.5 at 600 m.
    pub fn standard() -> Self {
        Self::new(
            vec![
                Breakpoint { range: 0.0, tpr: 0.9, tnr: 0.9 },
                Breakpoint { range: 200.0, tpr: 0.9, tnr: 0.9 },
                Breakpoint { range: 600.0, tpr: 0.5, tnr: 0.5 },
            ],
            600.0,
        )
        .expect("standard sensor table is valid")
    }

    /// Range-independent rates, handy for tests and perfect-sensor runs.
    pub fn constant(tpr: f64, tnr: f64, max_range: f64) -> Result<Self> {
        Self::new(vec![Breakpoint { range: 0.0, tpr, tnr }], max_range)
    }

    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.breakpoints
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    pub fn lookup_rates(&self, range: f64) -> (f64, f64) {
        if range > self.max_range || range.is_nan() {
            return (0.5, 0.5);
        }
        let bps = &self.breakpoints;
        // Tables are a handful of rows; a linear scan beats binary search here.
        let mut i = 0;
        while i + 1 < bps.len() && bps[i + 1].range <= range {
            i += 1;
        }
        if i + 1 == bps.len() {
            let b = bps[i];
            return (b.tpr, b.tnr);
        }
        let (a, b) = (bps[i], bps[i + 1]);
        let w = (range - a.range) / (b.range - a.range);
        (a.tpr + w * (b.tpr - a.tpr), a.tnr + w * (b.tnr - a.tnr))
    }

    pub fn bayes_update(&self, p: f64, z: Measurement) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Probability(p));
        }
        let (tpr, tnr) = self.lookup_rates(z.range);
        Ok(posterior(p, z.positive, tpr, tnr))
    }
}

/// Posterior of a binary cell after one detector reading with the given rates.
#[inline]
pub fn posterior(p: f64, positive: bool, tpr: f64, tnr: f64) -> f64 {
    let (num, den) = if positive {
        let num = tpr * p;
        (num, num + (1.0 - tnr) * (1.0 - p))
    } else {
        let num = (1.0 - tpr) * p;
        (num, num + tnr * (1.0 - p))
    };
    if den <= 0.0 {
        p
    } else {
        num / den
    }
}

/// Axis-aligned search rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }

    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Grown by `margin` on every side.
    pub fn expanded(&self, margin: f64) -> Self {
        Self::new(self.x_min - margin, self.y_min - margin, self.x_max + margin, self.y_max + margin)
    }
}

/// Uniform grid of occupancy probabilities with per-cell priority weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefMap {
    origin_x: f64,
    origin_y: f64,
    cell_size: f64,
    n_rows: usize,
    n_cols: usize,
    prob: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    priority: Option<Vec<f64>>,
}

impl BeliefMap {
    /// Map filled with a constant prior.
    pub fn new(
        origin: (f64, f64),
        cell_size: f64,
        n_rows: usize,
        n_cols: usize,
        prior: f64,
    ) -> Result<Self> {
        Self::from_probabilities(origin, cell_size, n_rows, n_cols, vec![prior; n_rows * n_cols])
    }

    pub fn from_probabilities(
        origin: (f64, f64),
        cell_size: f64,
        n_rows: usize,
        n_cols: usize,
        prob: Vec<f64>,
    ) -> Result<Self> {
        let map = Self {
            origin_x: origin.0,
            origin_y: origin.1,
            cell_size,
            n_rows,
            n_cols,
            prob,
            priority: None,
        };
        map.validate()?;
        Ok(map)
    }

    fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0) {
            return Err(Error::Config("cell_size must be positive".into()));
        }
        if self.n_rows == 0 || self.n_cols == 0 {
            return Err(Error::Config("map needs at least one row and column".into()));
        }
        if self.prob.len() != self.n_rows * self.n_cols {
            return Err(Error::Config(format!(
                "expected {} probabilities, got {}",
                self.n_rows * self.n_cols,
                self.prob.len()
            )));
        }
        if self.n_rows * self.n_cols > CellIndex::MAX as usize {
            return Err(Error::Config("map too large for 32-bit cell keys".into()));
        }
        if let Some(&p) = self.prob.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Probability(p));
        }
        if let Some(pr) = &self.priority {
            if pr.len() != self.prob.len() {
                return Err(Error::Config("priority array has the wrong length".into()));
            }
            if pr.iter().any(|w| !(*w >= 0.0)) {
                return Err(Error::Config("priorities must be non-negative".into()));
            }
        }
        Ok(())
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.origin_x, self.origin_y)
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    /// Rectangle covered by the grid.
    pub fn bounds(&self) -> Bounds {
        Bounds::new(
            self.origin_x,
            self.origin_y,
            self.origin_x + self.n_cols as f64 * self.cell_size,
            self.origin_y + self.n_rows as f64 * self.cell_size,
        )
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> CellIndex {
        (row * self.n_cols + col) as CellIndex
    }

    #[inline]
    pub fn row_col(&self, idx: CellIndex) -> (usize, usize) {
        let i = idx as usize;
        (i / self.n_cols, i % self.n_cols)
    }

    #[inline]
    pub fn cell_center(&self, idx: CellIndex) -> (f64, f64) {
        let (r, c) = self.row_col(idx);
        (
            self.origin_x + (c as f64 + 0.5) * self.cell_size,
            self.origin_y + (r as f64 + 0.5) * self.cell_size,
        )
    }

    /// Cell containing a world point, if any.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<CellIndex> {
        let c = ((x - self.origin_x) / self.cell_size).floor();
        let r = ((y - self.origin_y) / self.cell_size).floor();
        if c < 0.0 || r < 0.0 || c >= self.n_cols as f64 || r >= self.n_rows as f64 {
            return None;
        }
        Some(self.index(r as usize, c as usize))
    }

    #[inline]
    pub fn prob(&self, idx: CellIndex) -> f64 {
        self.prob[idx as usize]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.prob
    }

    #[inline]
    pub fn priority(&self, idx: CellIndex) -> f64 {
        match &self.priority {
            Some(p) => p[idx as usize],
            None => 1.0,
        }
    }

    pub fn priorities(&self) -> Option<&[f64]> {
        self.priority.as_deref()
    }

    /// Raw store, no clamping. Use [`BeliefMap::apply_measurement`] for
    /// sensor updates.
    pub fn set_prob(&mut self, idx: CellIndex, p: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Probability(p));
        }
        self.prob[idx as usize] = p;
        Ok(())
    }

    pub fn set_priority(&mut self, idx: CellIndex, w: f64) -> Result<()> {
        if !(w >= 0.0) {
            return Err(Error::Config(format!("negative priority {w}")));
        }
        let n = self.prob.len();
        self.priority.get_or_insert_with(|| vec![1.0; n])[idx as usize] = w;
        Ok(())
    }

    pub fn set_priorities(&mut self, weights: Vec<f64>) -> Result<()> {
        let old = self.priority.replace(weights);
        if let Err(e) = self.validate() {
            self.priority = old;
            return Err(e);
        }
        Ok(())
    }

    /// Bayesian update from one detector reading, clamped to
    /// `[PROB_FLOOR, 1 - PROB_FLOOR]`.
    pub fn apply_measurement(&mut self, idx: CellIndex, z: Measurement, model: &SensorModel) {
        let p = self.prob[idx as usize];
        let (tpr, tnr) = model.lookup_rates(z.range);
        let post = posterior(p, z.positive, tpr, tnr);
        self.prob[idx as usize] = post.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    }

    /// Unweighted sum of cell entropies in bits.
    pub fn total_entropy(&self) -> f64 {
        self.prob.iter().map(|&p| entropy_unchecked(p)).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let map: Self = serde_json::from_str(text)?;
        map.validate()?;
        Ok(map)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
