//! Uniform hash grid over node positions for radius and nearest queries.

use rustc_hash::FxHashMap;

#[derive(Clone, Debug)]
pub struct SpatialHash {
    bucket: f64,
    buckets: FxHashMap<(i64, i64), Vec<(usize, [f64; 3])>>,
    // Occupied key range, bounds the nearest-neighbour ring search.
    lo: (i64, i64),
    hi: (i64, i64),
    len: usize,
}

impl SpatialHash {
    pub fn new(bucket: f64) -> Self {
        assert!(bucket > 0.0, "bucket size must be positive");
        Self {
            bucket,
            buckets: FxHashMap::default(),
            lo: (i64::MAX, i64::MAX),
            hi: (i64::MIN, i64::MIN),
            len: 0,
        }
    }

    #[inline]
    fn key(&self, x: f64, y: f64) -> (i64, i64) {
        ((x / self.bucket).floor() as i64, (y / self.bucket).floor() as i64)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, id: usize, p: [f64; 3]) {
        let k = self.key(p[0], p[1]);
        self.lo = (self.lo.0.min(k.0), self.lo.1.min(k.1));
        self.hi = (self.hi.0.max(k.0), self.hi.1.max(k.1));
        self.buckets.entry(k).or_default().push((id, p));
        self.len += 1;
    }

    pub fn remove(&mut self, id: usize, p: [f64; 3]) -> bool {
        let k = self.key(p[0], p[1]);
        if let Some(v) = self.buckets.get_mut(&k) {
            if let Some(i) = v.iter().position(|e| e.0 == id) {
                v.swap_remove(i);
                if v.is_empty() {
                    self.buckets.remove(&k);
                }
                self.len -= 1;
                return true;
            }
        }
        false
    }

    pub fn clear(&mut self) {
        self.buckets.clear();
        self.lo = (i64::MAX, i64::MAX);
        self.hi = (i64::MIN, i64::MIN);
        self.len = 0;
    }

    /// Ids within Euclidean distance `r` of `p`, in ascending id order.
    pub fn within(&self, p: [f64; 3], r: f64, mut keep: impl FnMut(usize) -> bool) -> Vec<usize> {
        let (k0, k1) = (self.key(p[0] - r, p[1] - r), self.key(p[0] + r, p[1] + r));
        let r2 = r * r;
        let mut out = Vec::new();
        for kx in k0.0.max(self.lo.0)..=k1.0.min(self.hi.0) {
            for ky in k0.1.max(self.lo.1)..=k1.1.min(self.hi.1) {
                if let Some(v) = self.buckets.get(&(kx, ky)) {
                    for &(id, q) in v {
                        if dist2(p, q) <= r2 && keep(id) {
                            out.push(id);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Closest accepted id; ties go to the lower id.
    pub fn nearest(&self, p: [f64; 3], mut keep: impl FnMut(usize) -> bool) -> Option<usize> {
        if self.len == 0 {
            return None;
        }
        let c = self.key(p[0], p[1]);
        let max_ring = (c.0 - self.lo.0)
            .abs()
            .max((self.hi.0 - c.0).abs())
            .max((c.1 - self.lo.1).abs())
            .max((self.hi.1 - c.1).abs());
        let mut best: Option<(f64, usize)> = None;
        for ring in 0..=max_ring {
            // Anything in this ring is at least (ring - 1) buckets away.
            if let Some((d2, _)) = best {
                let gap = (ring - 1).max(0) as f64 * self.bucket;
                if gap * gap > d2 {
                    break;
                }
            }
            for kx in c.0 - ring..=c.0 + ring {
                for ky in c.1 - ring..=c.1 + ring {
                    if (kx - c.0).abs() != ring && (ky - c.1).abs() != ring {
                        continue;
                    }
                    let Some(v) = self.buckets.get(&(kx, ky)) else {
                        continue;
                    };
                    for &(id, q) in v {
                        let d2 = dist2(p, q);
                        let better = match best {
                            None => true,
                            Some((bd, bid)) => d2 < bd || (d2 == bd && id < bid),
                        };
                        if better && keep(id) {
                            best = Some((d2, id));
                        }
                    }
                }
            }
        }
        best.map(|b| b.1)
    }
}

#[inline]
fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matches_brute_force(
            pts in proptest::collection::vec((-500.0..500.0f64, -500.0..500.0f64, 0.0..100.0f64), 1..60),
            q in (-700.0..700.0f64, -700.0..700.0f64, 0.0..100.0f64),
            r in 1.0..400.0f64,
            bucket in 10.0..300.0f64,
        ) {
            let mut h = SpatialHash::new(bucket);
            for (i, p) in pts.iter().enumerate() {
                h.insert(i, [p.0, p.1, p.2]);
            }
            let q = [q.0, q.1, q.2];
            let mut brute: Vec<usize> = pts.iter().enumerate()
                .filter(|(_, p)| dist2(q, [p.0, p.1, p.2]) <= r * r)
                .map(|(i, _)| i).collect();
            brute.sort();
            prop_assert_eq!(h.within(q, r, |_| true), brute);

            let odd = |i: usize| i % 2 == 1;
            let want = pts.iter().enumerate().filter(|(i, _)| odd(*i))
                .map(|(i, p)| (dist2(q, [p.0, p.1, p.2]), i))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|x| x.1);
            prop_assert_eq!(h.nearest(q, odd), want);
        }
    }

    #[test]
    fn remove_updates_queries() {
        let mut h = SpatialHash::new(50.0);
        h.insert(0, [0.0, 0.0, 0.0]);
        h.insert(1, [10.0, 0.0, 0.0]);
        assert!(h.remove(0, [0.0, 0.0, 0.0]));
        assert!(!h.remove(0, [0.0, 0.0, 0.0]));
        assert_eq!(h.nearest([0.0, 0.0, 0.0], |_| true), Some(1));
        assert_eq!(h.len(), 1);
    }
}
