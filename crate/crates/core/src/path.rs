//! Curvature-bounded planar paths: Dubins shortest paths and the piecewise
//! arc/straight edge geometry stored on tree edges.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Pose};
use crate::grid::Bounds;

#[inline]
fn mod2pi(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DubinsWord {
    Lsl,
    Rsr,
    Lsr,
    Rsl,
    Rlr,
    Lrl,
}

impl DubinsWord {
    pub const ALL: [DubinsWord; 6] = [
        DubinsWord::Lsl,
        DubinsWord::Rsr,
        DubinsWord::Lsr,
        DubinsWord::Rsl,
        DubinsWord::Rlr,
        DubinsWord::Lrl,
    ];

    /// Turn direction of each of the three segments: +1 left, -1 right, 0 straight.
    fn turns(self) -> [i8; 3] {
        match self {
            DubinsWord::Lsl => [1, 0, 1],
            DubinsWord::Rsr => [-1, 0, -1],
            DubinsWord::Lsr => [1, 0, -1],
            DubinsWord::Rsl => [-1, 0, 1],
            DubinsWord::Rlr => [-1, 1, -1],
            DubinsWord::Lrl => [1, -1, 1],
        }
    }
}

/// Segment lengths of one Dubins word between two planar configurations, in
/// units of the turning radius. `None` if the word has no solution.
pub fn dubins_word_params(
    from: (f64, f64, f64),
    to: (f64, f64, f64),
    rho: f64,
    word: DubinsWord,
) -> Option<[f64; 3]> {
    let dx = to.0 - from.0;
    let dy = to.1 - from.1;
    let d = dx.hypot(dy) / rho;
    let theta = if d > 0.0 { mod2pi(dy.atan2(dx)) } else { 0.0 };
    let alpha = mod2pi(from.2 - theta);
    let beta = mod2pi(to.2 - theta);
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let c_ab = (alpha - beta).cos();

    match word {
        DubinsWord::Lsl => {
            let p_sq = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sa - sb);
            if p_sq < 0.0 {
                return None;
            }
            let tmp = (cb - ca).atan2(d + sa - sb);
            Some([mod2pi(tmp - alpha), p_sq.sqrt(), mod2pi(beta - tmp)])
        }
        DubinsWord::Rsr => {
            let p_sq = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sb - sa);
            if p_sq < 0.0 {
                return None;
            }
            let tmp = (ca - cb).atan2(d - sa + sb);
            Some([mod2pi(alpha - tmp), p_sq.sqrt(), mod2pi(tmp - beta)])
        }
        DubinsWord::Lsr => {
            let p_sq = -2.0 + d * d + 2.0 * c_ab + 2.0 * d * (sa + sb);
            if p_sq < 0.0 {
                return None;
            }
            let p = p_sq.sqrt();
            let tmp = (-ca - cb).atan2(d + sa + sb) - (-2.0f64).atan2(p);
            Some([mod2pi(tmp - alpha), p, mod2pi(tmp - beta)])
        }
        DubinsWord::Rsl => {
            let p_sq = -2.0 + d * d + 2.0 * c_ab - 2.0 * d * (sa + sb);
            if p_sq < 0.0 {
                return None;
            }
            let p = p_sq.sqrt();
            let tmp = (ca + cb).atan2(d - sa - sb) - 2.0f64.atan2(p);
            Some([mod2pi(alpha - tmp), p, mod2pi(beta - tmp)])
        }
        DubinsWord::Rlr => {
            let tmp = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sa - sb)) / 8.0;
            if tmp.abs() > 1.0 {
                return None;
            }
            let p = mod2pi(TAU - tmp.acos());
            let t = mod2pi(alpha - (ca - cb).atan2(d - sa + sb) + p / 2.0);
            Some([t, p, mod2pi(alpha - beta - t + p)])
        }
        DubinsWord::Lrl => {
            let tmp = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sb - sa)) / 8.0;
            if tmp.abs() > 1.0 {
                return None;
            }
            let p = mod2pi(TAU - tmp.acos());
            let t = mod2pi(-alpha - (ca - cb).atan2(d + sa - sb) + p / 2.0);
            Some([t, p, mod2pi(beta - alpha - t + p)])
        }
    }
}

/// Shortest Dubins path as a list of segments, or `None` for coincident
/// configurations.
pub fn dubins_shortest(
    from: (f64, f64, f64),
    to: (f64, f64, f64),
    rho: f64,
) -> Option<(DubinsWord, Vec<Segment>)> {
    let mut best: Option<(f64, DubinsWord, [f64; 3])> = None;
    for word in DubinsWord::ALL {
        if let Some(params) = dubins_word_params(from, to, rho, word) {
            let len = params.iter().sum::<f64>();
            if best.map_or(true, |(b, _, _)| len < b) {
                best = Some((len, word, params));
            }
        }
    }
    let (_, word, params) = best?;
    let segments = word
        .turns()
        .iter()
        .zip(params)
        .filter(|(_, p)| *p > 0.0)
        .map(|(&turn, p)| Segment {
            curvature: turn as f64 / rho,
            length: p * rho,
        })
        .collect();
    Some((word, segments))
}

/// Constant-curvature piece of a planar path. Positive curvature turns left.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub curvature: f64,
    pub length: f64,
}

impl Segment {
    /// Planar configuration after travelling `s` along this segment.
    #[inline]
    fn advance(&self, x: f64, y: f64, psi: f64, s: f64) -> (f64, f64, f64) {
        let k = self.curvature;
        if k.abs() < 1e-12 {
            let (sn, cs) = psi.sin_cos();
            (x + s * cs, y + s * sn, psi)
        } else {
            let psi1 = psi + k * s;
            (
                x + (psi1.sin() - psi.sin()) / k,
                y - (psi1.cos() - psi.cos()) / k,
                psi1,
            )
        }
    }
}

/// Geometry of one tree edge: arc/straight segments in the plane plus a
/// linear altitude blend. `length` is the 3D arc length used as edge cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeGeometry {
    pub start: Pose,
    pub end_z: f64,
    pub segments: Vec<Segment>,
    pub planar_length: f64,
    pub length: f64,
}

impl EdgeGeometry {
    pub fn new(start: Pose, end_z: f64, segments: Vec<Segment>) -> Self {
        let planar_length: f64 = segments.iter().map(|s| s.length).sum();
        let length = planar_length.hypot(end_z - start.z);
        Self {
            start,
            end_z,
            segments,
            planar_length,
            length,
        }
    }

    /// Degenerate edge that stays at `pose`.
    pub fn stationary(pose: Pose) -> Self {
        Self::new(pose, pose.z, Vec::new())
    }

    /// Pose after travelling a fraction `u` in [0, 1] of the edge.
    pub fn sample_fraction(&self, u: f64) -> Pose {
        let u = u.clamp(0.0, 1.0);
        self.sample_planar(u * self.planar_length, u)
    }

    /// Signed curvature of the segment containing fraction `u` of the edge.
    pub fn curvature_at_fraction(&self, u: f64) -> f64 {
        let s = u.clamp(0.0, 1.0) * self.planar_length;
        let mut end = 0.0;
        for seg in &self.segments {
            end += seg.length;
            if s <= end {
                return seg.curvature;
            }
        }
        self.segments.last().map_or(0.0, |seg| seg.curvature)
    }

    /// Pose after a 3D arc length `s` along the edge.
    pub fn sample(&self, s: f64) -> Pose {
        if self.length <= 0.0 {
            return self.start;
        }
        self.sample_fraction(s / self.length)
    }

    fn sample_planar(&self, s: f64, u: f64) -> Pose {
        let (mut x, mut y, mut psi) = (self.start.x, self.start.y, self.start.psi);
        let mut rest = s;
        for seg in &self.segments {
            let step = rest.min(seg.length);
            (x, y, psi) = seg.advance(x, y, psi, step);
            rest -= step;
            if rest <= 0.0 {
                break;
            }
        }
        Pose::new(x, y, self.start.z + u * (self.end_z - self.start.z), psi)
    }

    pub fn end(&self) -> Pose {
        self.sample_planar(self.planar_length, 1.0)
    }

    /// Prefix of this edge with 3D length `max_len`.
    pub fn truncated(&self, max_len: f64) -> Self {
        if max_len >= self.length {
            return self.clone();
        }
        let u = (max_len / self.length).max(0.0);
        let keep = u * self.planar_length;
        let mut segments = Vec::new();
        let mut rest = keep;
        for seg in &self.segments {
            if rest <= 0.0 {
                break;
            }
            let l = rest.min(seg.length);
            segments.push(Segment {
                curvature: seg.curvature,
                length: l,
            });
            rest -= l;
        }
        Self::new(
            self.start,
            self.start.z + u * (self.end_z - self.start.z),
            segments,
        )
    }

    /// Largest absolute curvature over the edge.
    pub fn max_curvature(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.curvature.abs())
            .fold(0.0, f64::max)
    }

    /// Checks planar points at most `spacing` apart against `bounds`.
    pub fn within_bounds(&self, bounds: &Bounds, spacing: f64) -> bool {
        let n = (self.planar_length / spacing).ceil().max(1.0) as usize;
        let (mut x, mut y, mut psi) = (self.start.x, self.start.y, self.start.psi);
        if !bounds.contains(x, y) {
            return false;
        }
        for seg in &self.segments {
            let steps = ((seg.length / self.planar_length.max(1e-12)) * n as f64)
                .ceil()
                .max(1.0) as usize;
            let ds = seg.length / steps as f64;
            let (x0, y0, psi0) = (x, y, psi);
            for i in 1..=steps {
                let (xi, yi, _) = seg.advance(x0, y0, psi0, ds * i as f64);
                if !bounds.contains(xi, yi) {
                    return false;
                }
            }
            (x, y, psi) = seg.advance(x0, y0, psi0, seg.length);
        }
        true
    }

    /// Poses spaced at most `spacing` apart along the edge, excluding the
    /// start and including the end.
    pub fn waypoints(&self, spacing: f64) -> Vec<(f64, Pose)> {
        let n = (self.length / spacing).ceil().max(1.0) as usize;
        (1..=n)
            .map(|i| {
                let s = self.length * i as f64 / n as f64;
                (s, self.sample(s))
            })
            .collect()
    }
}

/// Minimal-length curvature-bounded connection from `from` to `to`
/// (Dubins in the plane, linear altitude blend).
pub fn connect(from: &Pose, to: &Pose, turn_radius: f64) -> Option<EdgeGeometry> {
    let (_, segments) = dubins_shortest(
        (from.x, from.y, from.psi),
        (to.x, to.y, to.psi),
        turn_radius,
    )?;
    Some(EdgeGeometry::new(*from, to.z, segments))
}

/// Heading difference wrapped to (-pi, pi].
pub fn heading_error(from: f64, to: f64) -> f64 {
    wrap_angle(to - from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sampled_endpoint_matches_target() {
        let rho = 100.0;
        let cases = [
            ((0.0, 0.0, 0.0), (500.0, 200.0, 1.0)),
            ((0.0, 0.0, 0.0), (0.0, 50.0, PI / 2.0)),
            ((10.0, -5.0, 2.0), (-300.0, 40.0, -2.5)),
            ((0.0, 0.0, 0.0), (20.0, 0.0, PI)),
        ];
        for (a, b) in cases {
            for word in DubinsWord::ALL {
                let Some(p) = dubins_word_params(a, b, rho, word) else {
                    continue;
                };
                let segs: Vec<Segment> = word
                    .turns()
                    .iter()
                    .zip(p)
                    .map(|(&t, l)| Segment {
                        curvature: t as f64 / rho,
                        length: l * rho,
                    })
                    .collect();
                let e = EdgeGeometry::new(Pose::new(a.0, a.1, 50.0, a.2), 50.0, segs);
                let end = e.end();
                assert!((end.x - b.0).abs() < 1e-6, "{word:?} x {}", end.x);
                assert!((end.y - b.1).abs() < 1e-6, "{word:?} y {}", end.y);
                assert!(heading_error(end.psi, b.2).abs() < 1e-6, "{word:?} psi");
            }
        }
    }

    #[test]
    fn truncation_keeps_prefix() {
        let from = Pose::new(0.0, 0.0, 50.0, 0.0);
        let e = connect(&from, &Pose::new(900.0, 0.0, 50.0, 0.0), 100.0).unwrap();
        assert!((e.length - 900.0).abs() < 1e-9);
        let t = e.truncated(300.0);
        assert!((t.length - 300.0).abs() < 1e-9);
        let end = t.end();
        assert!((end.x - 300.0).abs() < 1e-9 && end.y.abs() < 1e-9);
    }

    #[test]
    fn altitude_blend() {
        let from = Pose::new(0.0, 0.0, 50.0, 0.0);
        let e = connect(&from, &Pose::new(400.0, 0.0, 80.0, 0.0), 100.0).unwrap();
        assert!((e.length - 400.0f64.hypot(30.0)).abs() < 1e-9);
        assert!((e.sample_fraction(0.5).z - 65.0).abs() < 1e-9);
    }

    #[test]
    fn bounds_check_catches_excursions() {
        let b = Bounds::new(0.0, 0.0, 1000.0, 1000.0);
        let from = Pose::new(500.0, 50.0, 50.0, 0.0);
        // A U-turn to the right dips below y = 0.
        let e = connect(&from, &Pose::new(500.0, 30.0, 50.0, PI), 100.0).unwrap();
        assert!(!e.within_bounds(&b, 1.0));
        let ok = connect(&from, &Pose::new(800.0, 50.0, 50.0, 0.0), 100.0).unwrap();
        assert!(ok.within_bounds(&b, 1.0));
    }
}
