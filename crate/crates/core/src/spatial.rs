//! Uniform-grid spatial index for nearest-neighbour queries in the plane.

use std::collections::HashMap;

use crate::C64;

pub struct GridIndex {
    cell: f64,
    points: Vec<C64>,
    buckets: HashMap<(i64, i64), Vec<u32>>,
    lo: C64,
    hi: C64,
}

impl GridIndex {
    /// Index over `points` with square cells of side `cell` (> 0).
    pub fn new(points: &[C64], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        let (mut lo, mut hi) = (C64::new(f64::MAX, f64::MAX), C64::new(f64::MIN, f64::MIN));
        for (i, z) in points.iter().enumerate() {
            buckets.entry(key(*z, cell)).or_default().push(i as u32);
            lo = C64::new(lo.re.min(z.re), lo.im.min(z.im));
            hi = C64::new(hi.re.max(z.re), hi.im.max(z.im));
        }
        GridIndex { cell, points: points.to_vec(), buckets, lo, hi }
    }

    /// Cell side of about extent/√n.
    pub fn auto(points: &[C64]) -> Self {
        let n = points.len().max(1) as f64;
        let (mut lo, mut hi) = (C64::new(f64::MAX, f64::MAX), C64::new(f64::MIN, f64::MIN));
        for z in points {
            lo = C64::new(lo.re.min(z.re), lo.im.min(z.im));
            hi = C64::new(hi.re.max(z.re), hi.im.max(z.im));
        }
        let extent = if points.is_empty() { 1.0 } else { (hi.re - lo.re).max(hi.im - lo.im) };
        let cell = extent / n.sqrt();
        Self::new(points, if cell > 1e-12 { cell } else { 1.0 })
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    /// The `k` nearest points to `z`, skipping indices for which `skip` is true,
    /// sorted by (distance, index).
    pub fn k_nearest(&self, z: C64, k: usize, skip: impl Fn(usize) -> bool) -> Vec<(usize, f64)> {
        if k == 0 || self.points.is_empty() {
            return vec![];
        }
        let (cx, cy) = key(z, self.cell);
        let mut best: Vec<(usize, f64)> = Vec::new();
        // every indexed point lies within this many rings of the query cell
        let dx = (self.lo.re - z.re).abs().max((self.hi.re - z.re).abs());
        let dy = (self.lo.im - z.im).abs().max((self.hi.im - z.im).abs());
        let max_ring = (dx.max(dy) / self.cell).ceil() as i64 + 1;
        for ring in 0..=max_ring {
            for (ix, iy) in ring_cells(cx, cy, ring) {
                if let Some(b) = self.buckets.get(&(ix, iy)) {
                    for &i in b {
                        let i = i as usize;
                        if skip(i) {
                            continue;
                        }
                        best.push((i, (self.points[i] - z).norm()));
                    }
                }
            }
            if best.len() >= k {
                best.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                best.truncate(k);
                if best[k - 1].1 <= ring as f64 * self.cell {
                    return best;
                }
            }
        }
        best.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        best.truncate(k);
        best
    }
}

fn key(z: C64, cell: f64) -> (i64, i64) {
    ((z.re / cell).floor() as i64, (z.im / cell).floor() as i64)
}

fn ring_cells(cx: i64, cy: i64, r: i64) -> Vec<(i64, i64)> {
    if r == 0 {
        return vec![(cx, cy)];
    }
    let mut v = Vec::with_capacity(8 * r as usize);
    for dx in -r..=r {
        v.push((cx + dx, cy - r));
        v.push((cx + dx, cy + r));
    }
    for dy in (-r + 1)..r {
        v.push((cx - r, cy + dy));
        v.push((cx + r, cy + dy));
    }
    v
}

/// Keeps the first point (in input order) of every grid cell of side `spacing`.
pub fn thin(points: &[C64], spacing: f64) -> Vec<usize> {
    let mut seen = std::collections::HashSet::new();
    let mut keep = Vec::new();
    for (i, z) in points.iter().enumerate() {
        if seen.insert(key(*z, spacing)) {
            keep.push(i);
        }
    }
    keep
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matches_brute_force(pts in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..200),
                               q in (-5.0f64..5.0, -5.0f64..5.0), k in 1usize..5, cell in 0.05f64..2.0) {
            let pts: Vec<C64> = pts.into_iter().map(|(a, b)| C64::new(a, b)).collect();
            let z = C64::new(q.0, q.1);
            let idx = GridIndex::new(&pts, cell);
            let got = idx.k_nearest(z, k, |_| false);
            let mut all: Vec<(usize, f64)> = pts.iter().enumerate().map(|(i, p)| (i, (p - z).norm())).collect();
            all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            all.truncate(k);
            prop_assert_eq!(got.len(), all.len());
            for (g, a) in got.iter().zip(&all) {
                prop_assert!((g.1 - a.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_point_index() {
        let idx = GridIndex::auto(&[C64::new(1.5, -0.5)]);
        let got = idx.k_nearest(C64::new(-3.0, 2.0), 2, |_| false);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].0, 0);
    }

    #[test]
    fn thinning_keeps_one_per_cell() {
        let pts: Vec<C64> = (0..100).map(|i| C64::new(i as f64 * 0.01, 0.0)).collect();
        let keep = thin(&pts, 0.1);
        assert_eq!(keep.len(), 10);
        assert_eq!(keep[0], 0);
    }
}
