//! Planar primitives: points, the square observation window, disc
//! intersection areas and a uniform-grid index for fixed-radius queries.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn dist(&self, other: &Point) -> f64 {
        self.dist2(other).sqrt()
    }
}

/// Square window `[0, L]^2`. Estimators only look at the centred
/// evaluation square `[L/3, 2L/3]^2` (area `L^2/9`) so that every
/// interaction range up to `L/3` is fully observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    side: f64,
}

impl Window {
    pub fn new(side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return domain(format!("window side must be positive, got {side}"));
        }
        Ok(Self { side })
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.side).contains(&p.x) && (0.0..=self.side).contains(&p.y)
    }

    /// Lower-left and upper-right corner of the evaluation square.
    pub fn eval_bounds(&self) -> (f64, f64) {
        (self.side / 3.0, 2.0 * self.side / 3.0)
    }

    pub fn eval_side(&self) -> f64 {
        self.side / 3.0
    }

    pub fn eval_area(&self) -> f64 {
        self.area() / 9.0
    }

    pub fn in_eval(&self, p: &Point) -> bool {
        let (lo, hi) = self.eval_bounds();
        p.x >= lo && p.x < hi && p.y >= lo && p.y < hi
    }

    /// Distance from any evaluation-window point to the outer boundary.
    pub fn eval_margin(&self) -> f64 {
        self.side / 3.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPattern {
    pub points: Vec<Point>,
    pub window: Window,
}

impl PointPattern {
    pub fn new(points: Vec<Point>, window: Window) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !window.contains(p)) {
            return domain(format!("point ({}, {}) outside window", p.x, p.y));
        }
        Ok(Self { points, window })
    }

    pub fn empty(window: Window) -> Self {
        Self { points: Vec::new(), window }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of points inside the evaluation square.
    pub fn eval_indices(&self) -> Vec<usize> {
        (0..self.points.len())
            .filter(|&i| self.window.in_eval(&self.points[i]))
            .collect()
    }

    /// Sub-pattern made of the given indices (same window).
    pub fn subset(&self, idx: &[usize]) -> PointPattern {
        PointPattern {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            window: self.window,
        }
    }
}

/// Area of `B_{x0}(r) ∩ B_x(delta)` for two discs whose centres are `r` apart.
///
/// For `r < delta/2` the small disc sits inside the big one. The closed
/// interval `r >= delta/2` uses the circular-segment branch; both branches
/// give `π r²` at the seam.
pub fn lens_area(r: f64, delta: f64) -> Result<f64> {
    if !(r > 0.0) || !(delta > 0.0) {
        return domain(format!("lens_area needs r > 0 and delta > 0, got ({r}, {delta})"));
    }
    Ok(lens_area_unchecked(r, delta))
}

#[inline]
pub(crate) fn lens_area_unchecked(r: f64, delta: f64) -> f64 {
    if r <= 0.0 || delta <= 0.0 {
        return 0.0;
    }
    if r < 0.5 * delta {
        return PI * r * r;
    }
    let a = (1.0 - delta * delta / (2.0 * r * r)).clamp(-1.0, 1.0).acos();
    let b = (delta / (2.0 * r)).clamp(-1.0, 1.0).acos();
    let s = (4.0 * r * r - delta * delta).max(0.0).sqrt();
    r * r * a + delta * delta * b - 0.5 * delta * s
}

/// Area of the union of two discs of equal `radius` with centres
/// `separation` apart (equals `2π radius²` once they are disjoint).
pub fn union_area_equal_discs(radius: f64, separation: f64) -> f64 {
    if radius <= 0.0 {
        return 0.0;
    }
    let d = separation.abs();
    if d >= 2.0 * radius {
        return 2.0 * PI * radius * radius;
    }
    let r2 = radius * radius;
    2.0 * PI * r2 - 2.0 * r2 * (d / (2.0 * radius)).acos() + d * (r2 - d * d / 4.0).max(0.0).sqrt()
}

/// Uniform grid over a pattern's window. Buckets are stored in CSR form:
/// `order[start[c]..start[c + 1]]` lists the points of cell `c`.
#[derive(Debug, Clone)]
pub struct GridIndex {
    cell_size: f64,
    cells_per_side: usize,
    start: Vec<u32>,
    order: Vec<u32>,
    points: Vec<Point>,
}

/// Upper bound on cells per side, keeps the offset table small when the
/// requested interaction radius is tiny.
const MAX_CELLS_PER_SIDE: usize = 256;

impl GridIndex {
    /// Builds an index whose cells are at least `cell_size` wide.
    pub fn new(pattern: &PointPattern, cell_size: f64) -> Self {
        Self::from_points(&pattern.points, pattern.window, cell_size)
    }

    pub fn from_points(points: &[Point], window: Window, cell_size: f64) -> Self {
        let side = window.side();
        let min_cell = side / MAX_CELLS_PER_SIDE as f64;
        let cell = if cell_size.is_finite() { cell_size.max(min_cell) } else { side };
        let cells_per_side = ((side / cell).floor() as usize).clamp(1, MAX_CELLS_PER_SIDE);
        let cell = side / cells_per_side as f64;
        let n_cells = cells_per_side * cells_per_side;

        let mut counts = vec![0u32; n_cells + 1];
        let cell_of: Vec<usize> = points
            .iter()
            .map(|p| {
                let cx = ((p.x / cell) as usize).min(cells_per_side - 1);
                let cy = ((p.y / cell) as usize).min(cells_per_side - 1);
                cy * cells_per_side + cx
            })
            .collect();
        for &c in &cell_of {
            counts[c + 1] += 1;
        }
        for c in 0..n_cells {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut order = vec![0u32; points.len()];
        for (i, &c) in cell_of.iter().enumerate() {
            order[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        Self { cell_size: cell, cells_per_side, start: counts, order, points: points.to_vec() }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> Point {
        self.points[i]
    }

    fn cell_range(&self, v: f64, rho: f64) -> (usize, usize) {
        let last = self.cells_per_side as isize - 1;
        let lo = (((v - rho) / self.cell_size).floor() as isize).clamp(0, last);
        let hi = (((v + rho) / self.cell_size).floor() as isize).clamp(0, last);
        (lo as usize, hi as usize)
    }

    /// Calls `visit(index, distance)` for every indexed point within `rho` of `x`,
    /// including a point located exactly at `x`.
    #[inline]
    pub fn for_each_within(&self, x: Point, rho: f64, mut visit: impl FnMut(usize, f64)) {
        if self.points.is_empty() || !(rho >= 0.0) {
            return;
        }
        let (x0, x1) = self.cell_range(x.x, rho);
        let (y0, y1) = self.cell_range(x.y, rho);
        let rho2 = rho * rho;
        for cy in y0..=y1 {
            let row = cy * self.cells_per_side;
            for cx in x0..=x1 {
                let c = row + cx;
                for &j in &self.order[self.start[c] as usize..self.start[c + 1] as usize] {
                    let d2 = self.points[j as usize].dist2(&x);
                    if d2 <= rho2 {
                        visit(j as usize, d2.sqrt());
                    }
                }
            }
        }
    }

    /// Points `y != x` with `|x - y| <= rho`, with their distances.
    pub fn neighbors_within(&self, x: Point, rho: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.for_each_within(x, rho, |j, d| {
            if self.points[j] != x {
                out.push((j, d));
            }
        });
        out
    }

    /// Neighbours of the indexed point `i`, excluding `i` itself.
    pub fn neighbors_of(&self, i: usize, rho: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.for_each_within(self.points[i], rho, |j, d| {
            if j != i {
                out.push((j, d));
            }
        });
        out
    }

    /// True when some indexed point lies within `rho` of `x`.
    pub fn any_within(&self, x: Point, rho: f64) -> bool {
        if self.points.is_empty() || !(rho >= 0.0) {
            return false;
        }
        let (x0, x1) = self.cell_range(x.x, rho);
        let (y0, y1) = self.cell_range(x.y, rho);
        let rho2 = rho * rho;
        for cy in y0..=y1 {
            let row = cy * self.cells_per_side;
            for cx in x0..=x1 {
                let c = row + cx;
                let hit = self.order[self.start[c] as usize..self.start[c + 1] as usize]
                    .iter()
                    .any(|&j| self.points[j as usize].dist2(&x) <= rho2);
                if hit {
                    return true;
                }
            }
        }
        false
    }

    /// Number of indexed points within `rho` of `x`.
    pub fn count_within(&self, x: Point, rho: f64) -> usize {
        let mut n = 0;
        self.for_each_within(x, rho, |_, _| n += 1);
        n
    }

    /// Nearest indexed point to `x` within `max_radius`, searching outward
    /// ring by ring.
    pub fn nearest(&self, x: Point, max_radius: f64) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut rho = self.cell_size;
        loop {
            let r = rho.min(max_radius);
            let mut best: Option<(usize, f64)> = None;
            self.for_each_within(x, r, |j, d| {
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            });
            if best.is_some() || r >= max_radius {
                return best;
            }
            rho *= 2.0;
        }
    }

    /// The `k` nearest indexed points as `(index, distance)`, closest first
    /// (fewer if the window does not hold `k` points within `max_radius`).
    pub fn k_nearest(&self, x: Point, k: usize, max_radius: f64) -> Vec<(usize, f64)> {
        let mut rho = self.cell_size;
        loop {
            let r = rho.min(max_radius);
            let mut found = Vec::new();
            self.for_each_within(x, r, |j, d| found.push((j, d)));
            if found.len() >= k || r >= max_radius {
                found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                found.truncate(k);
                return found;
            }
            rho *= 2.0;
        }
    }

    /// Sorted distances of the `k` nearest indexed points.
    pub fn k_nearest_distances(&self, x: Point, k: usize, max_radius: f64) -> Vec<f64> {
        self.k_nearest(x, k, max_radius).into_iter().map(|(_, d)| d).collect()
    }
}

/// Reference O(n) scan used to cross-check the grid.
pub fn naive_neighbors_within(points: &[Point], x: Point, rho: f64) -> Vec<(usize, f64)> {
    points
        .iter()
        .enumerate()
        .filter_map(|(j, p)| {
            let d = p.dist(&x);
            (d <= rho && *p != x).then_some((j, d))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sorted(mut v: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
        v.sort_by_key(|a| a.0);
        v
    }

    #[test]
    fn lens_small_disc_branch() {
        let a = lens_area(0.5, 2.0).unwrap();
        assert!((a - PI * 0.25).abs() < 1e-15);
    }

    #[test]
    fn lens_rejects_nonpositive() {
        assert!(lens_area(0.0, 1.0).is_err());
        assert!(lens_area(1.0, -1.0).is_err());
    }

    #[test]
    fn lens_seam_is_continuous() {
        for &delta in &[0.1, 1.0, 2.0, 7.5] {
            let seam = delta / 2.0;
            let left = lens_area(seam * (1.0 - 1e-13), delta).unwrap();
            let right = lens_area(seam, delta).unwrap();
            assert!((left - right).abs() <= 1e-12 * right, "{left} vs {right}");
        }
    }

    #[test]
    fn lens_equal_radii_closed_form() {
        let expect = 4.0 * (2.0 * PI / 3.0 - 3f64.sqrt() / 2.0);
        assert!((lens_area(2.0, 2.0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn lens_far_limit_is_half_disc() {
        let a = lens_area(1e3, 2.0).unwrap();
        assert!((a - 2.0 * PI).abs() < 1e-2);
    }

    #[test]
    fn union_area_limits() {
        assert!((union_area_equal_discs(2.0, 0.0) - PI * 4.0).abs() < 1e-12);
        assert!((union_area_equal_discs(2.0, 5.0) - 8.0 * PI).abs() < 1e-12);
        // union = 2πr² − intersection; intersection of equal discs at d=r
        let d = 2.0;
        let inter = 2.0 * 4.0 * (d / 4.0f64).acos() - 0.5 * d * (16.0 - d * d).sqrt();
        assert!((union_area_equal_discs(2.0, d) - (8.0 * PI - inter)).abs() < 1e-12);
    }

    #[test]
    fn window_eval_region() {
        let w = Window::new(90.0).unwrap();
        assert_eq!(w.eval_bounds(), (30.0, 60.0));
        assert!((w.eval_area() - 900.0).abs() < 1e-12);
        assert!(w.in_eval(&Point::new(45.0, 45.0)));
        assert!(!w.in_eval(&Point::new(10.0, 45.0)));
        assert!(Window::new(0.0).is_err());
    }

    #[test]
    fn empty_pattern_has_no_neighbors() {
        let w = Window::new(10.0).unwrap();
        let g = GridIndex::new(&PointPattern::empty(w), 1.0);
        assert!(g.neighbors_within(Point::new(5.0, 5.0), 3.0).is_empty());
        assert!(g.nearest(Point::new(5.0, 5.0), 10.0).is_none());
    }

    #[test]
    fn collinear_query() {
        let w = Window::new(10.0).unwrap();
        let pts = vec![Point::new(1.0, 5.0), Point::new(2.0, 5.0), Point::new(4.0, 5.0)];
        let pat = PointPattern::new(pts, w).unwrap();
        let g = GridIndex::new(&pat, 1.5);
        let got = g.neighbors_within(Point::new(1.0, 5.0), 1.5);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].0, 1);
        assert!((got[0].1 - 1.0).abs() < 1e-15);
        assert_eq!(g.neighbors_of(0, 1.5), got);
    }

    #[test]
    fn grid_matches_naive_scan_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = Window::new(30.0).unwrap();
        for _ in 0..1000 {
            let n = rng.random_range(0..60);
            let pts: Vec<Point> = (0..n)
                .map(|_| Point::new(rng.random_range(0.0..30.0), rng.random_range(0.0..30.0)))
                .collect();
            let cell = rng.random_range(0.05..8.0);
            let g = GridIndex::from_points(&pts, w, cell);
            let x = Point::new(rng.random_range(-2.0..32.0), rng.random_range(-2.0..32.0));
            let rho = rng.random_range(0.0..12.0);
            assert_eq!(sorted(g.neighbors_within(x, rho)), naive_neighbors_within(&pts, x, rho));
            assert_eq!(g.any_within(x, rho), !naive_neighbors_within(&pts, x, rho).is_empty() || pts.contains(&x));
            let nn = pts.iter().map(|p| p.dist(&x)).fold(f64::INFINITY, f64::min);
            match g.nearest(x, 100.0) {
                Some((_, d)) => assert_eq!(d, nn),
                None => assert!(pts.is_empty()),
            }
        }
    }

    #[test]
    fn nearest_respects_max_radius() {
        let w = Window::new(10.0).unwrap();
        let pat = PointPattern::new(vec![Point::new(9.0, 9.0)], w).unwrap();
        let g = GridIndex::new(&pat, 0.5);
        assert!(g.nearest(Point::new(1.0, 1.0), 2.0).is_none());
        assert!(g.nearest(Point::new(1.0, 1.0), 20.0).is_some());
        let ks = g.k_nearest_distances(Point::new(9.0, 8.0), 3, 20.0);
        assert_eq!(ks, vec![1.0]);
    }
}
