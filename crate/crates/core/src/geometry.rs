//! Camera frustum geometry: ground-plane footprints of poses and edges and
//! the per-cell viewing ranges that drive the detector model.

use std::cell::RefCell;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BeliefMap, CellIndex};
use crate::path::EdgeGeometry;

/// Rays this close to the horizon count as max-range hits.
const HORIZON_GUARD: f64 = PI / 180.0;

/// Wraps an angle to (-pi, pi].
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Vehicle pose `(x, y, z, psi)`; heading is wrapped on construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub psi: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, z: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            z,
            psi: wrap_angle(psi),
        }
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }

    pub fn planar_distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Same place and heading within the given tolerances.
    pub fn matches(&self, other: &Pose, pos_tol: f64, heading_tol: f64) -> bool {
        self.distance(other) <= pos_tol && wrap_angle(self.psi - other.psi).abs() <= heading_tol
    }
}

/// Forward-looking camera rigidly mounted on the vehicle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    /// Angle of the optical axis below the horizon.
    pub pitch_down: f64,
    pub hfov: f64,
    pub vfov: f64,
    pub max_range: f64,
}

impl CameraModel {
    pub fn new(pitch_down: f64, hfov: f64, vfov: f64, max_range: f64) -> Result<Self> {
        let cam = Self {
            pitch_down,
            hfov,
            vfov,
            max_range,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// 30 degrees pitch, 36.9 degree field of view on both axes, 600 m range.
    pub fn standard() -> Self {
        Self {
            pitch_down: 30f64.to_radians(),
            hfov: 36.9f64.to_radians(),
            vfov: 36.9f64.to_radians(),
            max_range: 600.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hfov > 0.0 && self.hfov < PI && self.vfov > 0.0 && self.vfov < PI) {
            return Err(Error::Config("field of view must lie in (0, pi)".into()));
        }
        if !(0.0..=PI / 2.0).contains(&self.pitch_down) {
            return Err(Error::Config("pitch must lie in [0, pi/2]".into()));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::Config("camera max_range must be positive".into()));
        }
        Ok(())
    }

    /// Slant range along the optical axis to the ground.
    pub fn nominal_range(&self, altitude: f64) -> f64 {
        if self.pitch_down > HORIZON_GUARD {
            (altitude / self.pitch_down.sin()).min(self.max_range)
        } else {
            self.max_range
        }
    }

    /// Horizontal distance ahead of the vehicle where the optical axis meets
    /// the ground.
    pub fn axis_ground_distance(&self, altitude: f64) -> f64 {
        if self.pitch_down > HORIZON_GUARD {
            altitude / self.pitch_down.tan()
        } else {
            (self.max_range.powi(2) - altitude.powi(2)).max(0.0).sqrt()
        }
    }
}

/// Ground-plane projection of the view frustum.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundPolygon {
    pub vertices: Vec<(f64, f64)>,
    /// Sensor position.
    pub apex: (f64, f64, f64),
    pub max_range: f64,
}

impl GroundPolygon {
    /// Point-in-polygon (crossing rule) plus the range limit.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let v = &self.vertices;
        let mut inside = false;
        let mut j = v.len() - 1;
        for i in 0..v.len() {
            let (xi, yi) = v[i];
            let (xj, yj) = v[j];
            if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside && self.range_to(x, y) <= self.max_range
    }

    #[inline]
    pub fn range_to(&self, x: f64, y: f64) -> f64 {
        let (ax, ay, az) = self.apex;
        ((x - ax).powi(2) + (y - ay).powi(2) + az * az).sqrt()
    }

    /// Polygon width perpendicular to `heading` on the line at `forward`
    /// metres ahead of the apex.
    pub fn width_at(&self, heading: f64, forward: f64) -> f64 {
        let (s, c) = heading.sin_cos();
        let (ax, ay, _) = self.apex;
        let local: Vec<(f64, f64)> = self
            .vertices
            .iter()
            .map(|&(x, y)| {
                let (dx, dy) = (x - ax, y - ay);
                (dx * c + dy * s, -dx * s + dy * c)
            })
            .collect();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let n = local.len();
        for i in 0..n {
            let (f0, l0) = local[i];
            let (f1, l1) = local[(i + 1) % n];
            if (f0 - forward) * (f1 - forward) <= 0.0 && f0 != f1 {
                let l = l0 + (l1 - l0) * (forward - f0) / (f1 - f0);
                lo = lo.min(l);
                hi = hi.max(l);
            }
        }
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }

    /// Forward extent (near, far) relative to the apex along `heading`.
    pub fn forward_extent(&self, heading: f64) -> (f64, f64) {
        let (s, c) = heading.sin_cos();
        let (ax, ay, _) = self.apex;
        self.vertices
            .iter()
            .map(|&(x, y)| (x - ax) * c + (y - ay) * s)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| {
                (lo.min(f), hi.max(f))
            })
    }

    /// Sorted crossings of the polygon boundary with the horizontal line `y`.
    fn spans(&self, y: f64, out: &mut Vec<f64>) {
        out.clear();
        let v = &self.vertices;
        let mut j = v.len() - 1;
        for i in 0..v.len() {
            let (xi, yi) = v[i];
            let (xj, yj) = v[j];
            if (yi > y) != (yj > y) {
                out.push((xj - xi) * (y - yi) / (yj - yi) + xi);
            }
            j = i;
        }
        out.sort_by(f64::total_cmp);
    }
}

/// Projects the four frustum corner rays onto z = 0. Returns `None` when the
/// sensor is on the ground or the whole frustum is out of range.
pub fn ground_polygon(pose: &Pose, cam: &CameraModel) -> Option<GroundPolygon> {
    if pose.z <= 0.0 || pose.z >= cam.max_range {
        return None;
    }
    let (sp, cp) = pose.psi.sin_cos();
    let (st, ct) = cam.pitch_down.sin_cos();
    let forward = [cp * ct, sp * ct, -st];
    let right = [sp, -cp, 0.0];
    let up = [cp * st, sp * st, ct];
    let a = (cam.hfov / 2.0).tan();
    let b = (cam.vfov / 2.0).tan();
    let ground_reach = (cam.max_range.powi(2) - pose.z.powi(2)).sqrt();
    let corners = [(-a, -b), (a, -b), (a, b), (-a, b)];
    let vertices = corners
        .iter()
        .map(|&(u, v)| {
            let d = [
                forward[0] + u * right[0] + v * up[0],
                forward[1] + u * right[1] + v * up[1],
                forward[2] + u * right[2] + v * up[2],
            ];
            let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            let horiz = d[0].hypot(d[1]);
            if d[2] < -HORIZON_GUARD.sin() * norm {
                let t = pose.z / -d[2];
                let (gx, gy) = (d[0] * t, d[1] * t);
                let g = gx.hypot(gy);
                // Long shallow rays are cut at the range limit.
                if g > ground_reach {
                    let k = ground_reach / g;
                    (pose.x + gx * k, pose.y + gy * k)
                } else {
                    (pose.x + gx, pose.y + gy)
                }
            } else {
                let k = ground_reach / horiz;
                (pose.x + d[0] * k, pose.y + d[1] * k)
            }
        })
        .collect();
    Some(GroundPolygon {
        vertices,
        apex: (pose.x, pose.y, pose.z),
        max_range: cam.max_range,
    })
}

/// Map cells seen from one pose or along one edge, each with the viewing
/// range used for its single (optimistic) measurement. Sorted by cell index.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub cells: Vec<(CellIndex, f64)>,
}

impl Footprint {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn range_of(&self, idx: CellIndex) -> Option<f64> {
        self.cells
            .binary_search_by_key(&idx, |c| c.0)
            .ok()
            .map(|i| self.cells[i].1)
    }
}

fn rasterize(
    poly: &GroundPolygon,
    map: &BeliefMap,
    scratch: &mut Vec<f64>,
    mut visit: impl FnMut(CellIndex, f64),
) {
    let (ox, oy) = map.origin();
    let cs = map.cell_size();
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(_, y) in &poly.vertices {
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    let r_lo = (((y_lo - oy) / cs) - 0.5).ceil().max(0.0) as usize;
    let r_hi_f = ((y_hi - oy) / cs - 0.5).floor();
    if r_hi_f < 0.0 {
        return;
    }
    let r_hi = (r_hi_f as usize).min(map.n_rows().saturating_sub(1));
    let n_cols = map.n_cols();
    for row in r_lo..=r_hi {
        let yc = oy + (row as f64 + 0.5) * cs;
        poly.spans(yc, scratch);
        for pair in scratch.chunks_exact(2) {
            let c_lo = ((pair[0] - ox) / cs - 0.5).ceil().max(0.0) as usize;
            let c_hi_f = ((pair[1] - ox) / cs - 0.5).ceil() - 1.0;
            if c_hi_f < 0.0 {
                continue;
            }
            let c_hi = (c_hi_f as usize).min(n_cols - 1);
            for col in c_lo..=c_hi {
                let xc = ox + (col as f64 + 0.5) * cs;
                let r = poly.range_to(xc, yc);
                if r <= poly.max_range {
                    visit(map.index(row, col), r);
                }
            }
        }
    }
}

/// Cells whose centres fall inside the ground projection of the frustum,
/// paired with the slant range from the sensor.
pub fn project_footprint(pose: &Pose, cam: &CameraModel, map: &BeliefMap) -> Result<Footprint> {
    if pose.z < 0.0 {
        return Err(Error::BelowGround(pose.z));
    }
    let mut cells = Vec::new();
    if let Some(poly) = ground_polygon(pose, cam) {
        let mut scratch = Vec::with_capacity(8);
        rasterize(&poly, map, &mut scratch, |idx, r| cells.push((idx, r)));
        cells.sort_unstable_by_key(|c: &(CellIndex, f64)| c.0);
    }
    Ok(Footprint { cells })
}

/// Samples needed to place one footprint every half cell along `length`.
pub fn edge_samples(length: f64, cell_size: f64) -> usize {
    ((length / (cell_size / 2.0)).ceil() as usize + 1).max(2)
}

/// Union of the footprints of `samples` evenly spaced poses along the edge
/// (endpoints included); every cell keeps its closest viewing range.
pub fn edge_footprint(
    edge: &EdgeGeometry,
    cam: &CameraModel,
    map: &BeliefMap,
    samples: usize,
) -> Result<Footprint> {
    edge_footprint_level(edge, cam, map, samples, f64::INFINITY)
}

/// As [`edge_footprint`], skipping samples on stretches whose curvature
/// magnitude exceeds `max_curvature` (the camera sees sky while banking).
pub fn edge_footprint_level(
    edge: &EdgeGeometry,
    cam: &CameraModel,
    map: &BeliefMap,
    samples: usize,
    max_curvature: f64,
) -> Result<Footprint> {
    if edge.length <= 0.0 {
        return project_footprint(&edge.start, cam, map);
    }
    let samples = samples.max(2);
    EDGE_SCRATCH.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (best, touched) = &mut *guard;
        if best.len() < map.len() {
            best.resize(map.len(), f64::INFINITY);
        }
        touched.clear();
        let mut spans = Vec::with_capacity(8);
        let mut result = Ok(());
        for i in 0..samples {
            let u = i as f64 / (samples - 1) as f64;
            if edge.curvature_at_fraction(u).abs() > max_curvature {
                continue;
            }
            let pose = edge.sample_fraction(u);
            if pose.z < 0.0 {
                result = Err(Error::BelowGround(pose.z));
                break;
            }
            if let Some(poly) = ground_polygon(&pose, cam) {
                rasterize(&poly, map, &mut spans, |idx, r| {
                    let slot = &mut best[idx as usize];
                    if slot.is_infinite() {
                        touched.push(idx);
                    }
                    if r < *slot {
                        *slot = r;
                    }
                });
            }
        }
        touched.sort_unstable();
        let cells = touched
            .iter()
            .map(|&idx| (idx, std::mem::replace(&mut best[idx as usize], f64::INFINITY)))
            .collect();
        result.map(|_| Footprint { cells })
    })
}

thread_local! {
    // Dense per-cell minimum range plus the list of touched cells, reset after
    // every call.
    static EDGE_SCRATCH: RefCell<(Vec<f64>, Vec<CellIndex>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}
