//! Mother PPP sampling, per-item bivariate marks and the three placement
//! thinnings: independent, Matérn II hard exclusion and gamma-exclusion
//! (GEC) soft exclusion.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::{GridIndex, Point, PointPattern, Window};
use crate::rng::{self, Purpose};

/// Pairs whose deletion kernel falls below this are skipped in the GEC product.
pub const GEC_PAIR_EPS: f64 = 1e-12;

/// Law of the exclusion-radius mark. Gamma is parameterised by shape and
/// scale (mean `shape * scale`); `Fixed` is the zero-scale limit.
///
/// An infinite fixed radius is accepted and means the item is never cached
/// (the zero-intensity limit of an ever-growing exclusion).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkDistribution {
    Fixed { radius: f64 },
    Gamma { shape: f64, scale: f64 },
}

impl MarkDistribution {
    pub fn fixed(radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return domain(format!("fixed mark radius must be >= 0, got {radius}"));
        }
        Ok(Self::Fixed { radius })
    }

    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
            return domain(format!("gamma marks need shape > 0 and scale > 0, got ({shape}, {scale})"));
        }
        Ok(Self::Gamma { shape, scale })
    }

    /// Gamma law with the given mean and scale; a zero scale or zero mean
    /// collapses to the fixed radius `mean`.
    pub fn from_mean_scale(mean: f64, scale: f64) -> Result<Self> {
        if !(mean >= 0.0) || !(scale >= 0.0) {
            return domain(format!("mark mean and scale must be >= 0, got ({mean}, {scale})"));
        }
        if scale == 0.0 || mean == 0.0 || mean.is_infinite() {
            return Self::fixed(mean);
        }
        Self::gamma(mean / scale, scale)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Fixed { radius } => radius,
            Self::Gamma { shape, scale } => shape * scale,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Fixed { .. } => 0.0,
            Self::Gamma { shape, scale } => shape * scale * scale,
        }
    }

    pub fn second_moment(&self) -> f64 {
        let m = self.mean();
        self.variance() + m * m
    }

    pub fn scale(&self) -> f64 {
        match *self {
            Self::Fixed { .. } => 0.0,
            Self::Gamma { scale, .. } => scale,
        }
    }

    pub fn is_never(&self) -> bool {
        matches!(*self, Self::Fixed { radius } if radius.is_infinite())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Fixed { radius } => radius,
            Self::Gamma { shape, scale } => Gamma::new(shape, scale).expect("validated gamma").sample(rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateMark {
    pub radius: f64,
    pub weight: f64,
}

/// Mother pattern with one bivariate mark per (item, point), item-major.
#[derive(Debug, Clone)]
pub struct MarkedPattern {
    pub base: PointPattern,
    pub marks: Vec<Vec<BivariateMark>>,
}

impl MarkedPattern {
    pub fn n_items(&self) -> usize {
        self.marks.len()
    }

    pub fn item_marks(&self, item: usize) -> Result<&[BivariateMark]> {
        self.marks
            .get(item)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Config(format!("item {item} out of range (have {})", self.marks.len())))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndependentMode {
    /// One Bernoulli draw per (node, item).
    #[default]
    Bernoulli,
    /// Systematic sampling per node: inclusion probabilities `p_c(i)` and a
    /// cache holding exactly `floor(N)` or `ceil(N)` items.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlacementPolicy {
    Independent { probs: Vec<f64>, mode: IndependentMode },
    HardExclusion { radii: Vec<f64> },
    GammaExclusion { marks: Vec<MarkDistribution>, p0: Vec<f64>, c: f64 },
}

impl PlacementPolicy {
    pub fn n_items(&self) -> usize {
        match self {
            Self::Independent { probs, .. } => probs.len(),
            Self::HardExclusion { radii } => radii.len(),
            Self::GammaExclusion { marks, .. } => marks.len(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Independent { .. } => "independent",
            Self::HardExclusion { .. } => "matII",
            Self::GammaExclusion { .. } => "gec",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Independent { probs, .. } => {
                if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return Err(Error::Config(format!("independent probability {p} outside [0,1]")));
                }
            }
            Self::HardExclusion { radii } => {
                if let Some(r) = radii.iter().find(|r| !(**r >= 0.0)) {
                    return Err(Error::Config(format!("exclusion radius {r} must be >= 0")));
                }
            }
            Self::GammaExclusion { marks, p0, c } => {
                if p0.len() != marks.len() {
                    return Err(Error::Config(format!("{} p0 values for {} items", p0.len(), marks.len())));
                }
                if let Some(p) = p0.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
                    return Err(Error::Config(format!("p0 {p} outside (0,1]")));
                }
                if !(*c > 0.0) {
                    return Err(Error::Config(format!("decay rate c must be > 0, got {c}")));
                }
            }
        }
        Ok(())
    }

    /// Mark laws used by the policy when attaching marks. Policies without
    /// radius marks get a zero fixed radius (only the weights matter).
    pub fn mark_laws(&self) -> Vec<MarkDistribution> {
        match self {
            Self::GammaExclusion { marks, .. } => marks.clone(),
            other => vec![MarkDistribution::Fixed { radius: 0.0 }; other.n_items()],
        }
    }
}

/// Per-item retained sets plus the node × item cache indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementResult {
    pub retained: Vec<Vec<usize>>,
    n_nodes: usize,
    z: Vec<bool>,
    occupancy: Vec<u32>,
}

impl PlacementResult {
    pub fn from_retained(n_nodes: usize, retained: Vec<Vec<usize>>) -> Self {
        let m = retained.len();
        let mut z = vec![false; n_nodes * m];
        let mut occupancy = vec![0u32; n_nodes];
        for (i, set) in retained.iter().enumerate() {
            for &x in set {
                z[x * m + i] = true;
                occupancy[x] += 1;
            }
        }
        Self { retained, n_nodes, z, occupancy }
    }

    pub fn n_items(&self) -> usize {
        self.retained.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// `z_{x,i}`: whether node `x` caches item `i`.
    pub fn z(&self, node: usize, item: usize) -> bool {
        self.z[node * self.retained.len() + item]
    }

    /// `C(x) = Σ_i z_{x,i}`.
    pub fn occupancy(&self, node: usize) -> u32 {
        self.occupancy[node]
    }

    pub fn occupancies(&self) -> &[u32] {
        &self.occupancy
    }
}

/// Homogeneous PPP of intensity `lambda` on the window.
pub fn sample_ppp(lambda: f64, window: Window, seed: u64) -> Result<PointPattern> {
    sample_ppp_with(lambda, window, &mut rng::stream(seed, Purpose::Mother, &[]))
}

pub fn sample_ppp_with<R: Rng + ?Sized>(lambda: f64, window: Window, rng: &mut R) -> Result<PointPattern> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return domain(format!("intensity must be positive, got {lambda}"));
    }
    let side = window.side();
    let mean = lambda * window.area();
    let n = Poisson::new(mean).map_err(|e| Error::Domain(e.to_string()))?.sample(rng) as usize;
    let points = (0..n).map(|_| Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side)).collect();
    Ok(PointPattern { points, window })
}

/// Draws radii i.i.d. from each item's law and weights i.i.d. `U[0,1]`,
/// independent of the radii. With `shared_weights` every item reuses the
/// weights of item 0.
pub fn attach_marks(
    pattern: &PointPattern,
    mus: &[MarkDistribution],
    seed: u64,
    shared_weights: bool,
) -> Result<MarkedPattern> {
    if mus.is_empty() {
        return domain("attach_marks needs at least one item");
    }
    let n = pattern.len();
    let marks = mus
        .iter()
        .enumerate()
        .map(|(i, mu)| {
            let mut radii_rng = rng::stream(seed, Purpose::Radii, &[i as u64]);
            let w_tag = if shared_weights { 0 } else { i as u64 };
            let mut w_rng = rng::stream(seed, Purpose::Weights, &[w_tag]);
            (0..n)
                .map(|_| BivariateMark { radius: mu.sample(&mut radii_rng), weight: w_rng.random::<f64>() })
                .collect()
        })
        .collect();
    Ok(MarkedPattern { base: pattern.clone(), marks })
}

/// Independent Bernoulli(`p`) thinning.
pub fn thin_independent(pattern: &PointPattern, p: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("retention probability {p} outside [0,1]"));
    }
    let mut rng = rng::stream(seed, Purpose::Thinning, &[]);
    Ok(bernoulli_thin(pattern.len(), p, &mut rng))
}

fn bernoulli_thin<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Vec<usize> {
    (0..n).filter(|_| rng.random::<f64>() < p).collect()
}

#[inline]
fn beats(a_weight: f64, a_idx: usize, b_weight: f64, b_idx: usize) -> bool {
    a_weight < b_weight || (a_weight == b_weight && a_idx < b_idx)
}

/// Matérn II thinning of one item: a point survives iff its weight is the
/// strict minimum among all mother points within `r_excl` (ties to the
/// lower index). An infinite radius retains nothing.
pub fn thin_matii(marked: &MarkedPattern, item: usize, r_excl: f64) -> Result<Vec<usize>> {
    let all: Vec<usize> = (0..marked.base.len()).collect();
    thin_matii_among(marked, item, r_excl, &all)
}

/// [`thin_matii`] deciding only `candidates`; neighbours still range over
/// the whole pattern.
pub fn thin_matii_among(marked: &MarkedPattern, item: usize, r_excl: f64, candidates: &[usize]) -> Result<Vec<usize>> {
    if !(r_excl >= 0.0) {
        return domain(format!("exclusion radius must be >= 0, got {r_excl}"));
    }
    let marks = marked.item_marks(item)?;
    if r_excl.is_infinite() {
        return Ok(Vec::new());
    }
    let grid = GridIndex::new(&marked.base, r_excl.max(0.5));
    Ok(candidates
        .iter()
        .copied()
        .filter(|&i| {
            let wi = marks[i].weight;
            let mut keep = true;
            grid.for_each_within(grid.point(i), r_excl, |j, _| {
                if j != i && !beats(wi, i, marks[j].weight, j) {
                    keep = false;
                }
            });
            keep
        })
        .collect())
}

/// Pairwise deletion kernel `exp(-c (r - m - n)_+)`.
#[inline]
pub fn deletion_kernel(r: f64, m: f64, n: f64, c: f64) -> f64 {
    let excess = r - m - n;
    if excess <= 0.0 {
        1.0
    } else {
        (-c * excess).exp()
    }
}

/// Distance beyond `m + n` past which the kernel drops under [`GEC_PAIR_EPS`].
pub fn gec_truncation_slack(c: f64) -> f64 {
    (1.0 / GEC_PAIR_EPS).ln() / c
}

/// Retention probability of every point under GEC for one item.
pub fn gec_retention_probabilities(marked: &MarkedPattern, item: usize, p0: f64, c: f64) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..marked.base.len()).collect();
    gec_retention_among(marked, item, p0, c, &all)
}

/// Retention probabilities for `candidates`; other entries stay zero.
pub fn gec_retention_among(marked: &MarkedPattern, item: usize, p0: f64, c: f64, candidates: &[usize]) -> Result<Vec<f64>> {
    if !(p0 > 0.0 && p0 <= 1.0) {
        return domain(format!("p0 must lie in (0,1], got {p0}"));
    }
    if !(c > 0.0) {
        return domain(format!("decay rate c must be > 0, got {c}"));
    }
    let marks = marked.item_marks(item)?;
    let mut probs = vec![0.0; marks.len()];
    if marks.iter().any(|m| m.radius.is_infinite()) {
        return Ok(probs);
    }
    let max_mark = marks.iter().map(|m| m.radius).fold(0.0, f64::max);
    let slack = gec_truncation_slack(c);
    let grid = GridIndex::new(&marked.base, (0.5 * (max_mark + slack)).max(1.0));
    for &i in candidates {
        let BivariateMark { radius: m, weight: v } = marks[i];
        let reach = m + max_mark + slack;
        let mut log_keep = 0.0f64;
        let mut killed = false;
        grid.for_each_within(grid.point(i), reach, |j, d| {
            if killed || j == i {
                return;
            }
            let yn = marks[j];
            if yn.weight > v || d > m + yn.radius + slack {
                return;
            }
            let f = deletion_kernel(d, m, yn.radius, c);
            if f >= 1.0 {
                killed = true;
            } else {
                log_keep += (-f).ln_1p();
            }
        });
        probs[i] = if killed { 0.0 } else { p0 * log_keep.exp() };
    }
    Ok(probs)
}

/// GEC thinning of one item: each point is kept by an independent
/// Bernoulli draw with its retention probability.
pub fn thin_gec(marked: &MarkedPattern, item: usize, p0: f64, c: f64, seed: u64) -> Result<Vec<usize>> {
    let all: Vec<usize> = (0..marked.base.len()).collect();
    thin_gec_among(marked, item, p0, c, seed, &all)
}

/// [`thin_gec`] deciding only `candidates`. One uniform is drawn per
/// mother point in index order, so a candidate's fate does not depend on
/// which other points are candidates.
pub fn thin_gec_among(
    marked: &MarkedPattern,
    item: usize,
    p0: f64,
    c: f64,
    seed: u64,
    candidates: &[usize],
) -> Result<Vec<usize>> {
    let probs = gec_retention_among(marked, item, p0, c, candidates)?;
    let mut rng = rng::stream(seed, Purpose::Thinning, &[item as u64]);
    let u: Vec<f64> = (0..probs.len()).map(|_| rng.random::<f64>()).collect();
    Ok(candidates.iter().copied().filter(|&i| u[i] < probs[i]).collect())
}

/// Systematic sampling on `[0, Σp)`: item `i` is selected iff one of the
/// points `u, u+1, ...` falls in its cumulative interval.
fn systematic_sample<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Vec<usize> {
    let u: f64 = rng.random();
    let mut out = Vec::new();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        let lo = acc;
        acc += p;
        // first integer k with u + k >= lo
        let k = (lo - u).ceil();
        if u + k < acc {
            out.push(i);
        }
    }
    out
}

/// Applies the policy to every item with independent randomness streams.
pub fn place_all(marked: &MarkedPattern, policy: &PlacementPolicy, seed: u64) -> Result<PlacementResult> {
    let all: Vec<usize> = (0..marked.base.len()).collect();
    place_among(marked, policy, seed, &all)
}

/// [`place_all`] deciding only the ascending node list `candidates`; the
/// remaining nodes cache nothing. A candidate gets the same decision it
/// would get under [`place_all`].
pub fn place_among(marked: &MarkedPattern, policy: &PlacementPolicy, seed: u64, candidates: &[usize]) -> Result<PlacementResult> {
    policy.validate()?;
    let m = marked.n_items();
    if policy.n_items() != m {
        return Err(Error::Config(format!("policy has {} items, marked pattern has {m}", policy.n_items())));
    }
    let n = marked.base.len();
    if candidates.windows(2).any(|w| w[0] >= w[1]) || candidates.last().is_some_and(|&c| c >= n) {
        return domain("candidates must be ascending node indices");
    }
    let mut is_cand = vec![false; n];
    for &x in candidates {
        is_cand[x] = true;
    }
    let retained: Vec<Vec<usize>> = match policy {
        PlacementPolicy::Independent { probs, mode: IndependentMode::Bernoulli } => probs
            .par_iter()
            .enumerate()
            .map(|(i, &p)| {
                let mut rng = rng::stream(seed, Purpose::Placement, &[i as u64]);
                bernoulli_thin(n, p, &mut rng).into_iter().filter(|&x| is_cand[x]).collect()
            })
            .collect(),
        PlacementPolicy::Independent { probs, mode: IndependentMode::Exact } => {
            let mut sets = vec![Vec::new(); m];
            for &x in candidates {
                let mut rng = rng::stream(seed, Purpose::Placement, &[u64::MAX, x as u64]);
                for i in systematic_sample(probs, &mut rng) {
                    sets[i].push(x);
                }
            }
            sets
        }
        PlacementPolicy::HardExclusion { radii } => radii
            .par_iter()
            .enumerate()
            .map(|(i, &r)| thin_matii_among(marked, i, r, candidates))
            .collect::<Result<_>>()?,
        PlacementPolicy::GammaExclusion { p0, c, .. } => p0
            .par_iter()
            .enumerate()
            .map(|(i, &p)| thin_gec_among(marked, i, p, *c, seed, candidates))
            .collect::<Result<_>>()?,
    };
    Ok(PlacementResult::from_retained(n, retained))
}

/// Writes one realization as CSV rows
/// `replication,item,x,y,mark_radius,weight,retained`. The header is
/// written when `header` is set.
pub fn write_realization_csv<W: Write>(
    out: &mut W,
    replication: usize,
    marked: &MarkedPattern,
    placement: &PlacementResult,
    header: bool,
) -> Result<()> {
    if header {
        writeln!(out, "replication,item,x,y,mark_radius,weight,retained")?;
    }
    for (i, marks) in marked.marks.iter().enumerate() {
        for (x, (p, mk)) in marked.base.points.iter().zip(marks).enumerate() {
            writeln!(
                out,
                "{replication},{i},{:?},{:?},{:?},{:?},{}",
                p.x,
                p.y,
                mk.radius,
                mk.weight,
                u8::from(placement.z(x, i))
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_points(d: f64, w: (f64, f64)) -> MarkedPattern {
        let win = Window::new(10.0).unwrap();
        let base = PointPattern::new(vec![Point::new(5.0, 5.0), Point::new(5.0 + d, 5.0)], win).unwrap();
        MarkedPattern {
            base,
            marks: vec![vec![BivariateMark { radius: 1.0, weight: w.0 }, BivariateMark { radius: 1.0, weight: w.1 }]],
        }
    }

    #[test]
    fn ppp_rejects_bad_intensity() {
        let w = Window::new(10.0).unwrap();
        assert!(sample_ppp(0.0, w, 1).is_err());
        assert!(sample_ppp(-1.0, w, 1).is_err());
    }

    #[test]
    fn ppp_is_deterministic() {
        let w = Window::new(100.0).unwrap();
        let a = sample_ppp(0.1, w, 42).unwrap();
        let b = sample_ppp(0.1, w, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.points.iter().all(|p| w.contains(p)));
    }

    #[test]
    fn degenerate_marks_are_exact() {
        let w = Window::new(100.0).unwrap();
        let pat = sample_ppp(0.1, w, 3).unwrap();
        let mu = MarkDistribution::from_mean_scale(2.0, 0.0).unwrap();
        let mk = attach_marks(&pat, &[mu], 9, false).unwrap();
        assert!(mk.marks[0].iter().all(|m| m.radius == 2.0));
    }

    #[test]
    fn attach_marks_requires_items() {
        let w = Window::new(10.0).unwrap();
        assert!(attach_marks(&PointPattern::empty(w), &[], 1, false).is_err());
    }

    #[test]
    fn shared_weights_switch() {
        let w = Window::new(50.0).unwrap();
        let pat = sample_ppp(0.1, w, 3).unwrap();
        let mus = [MarkDistribution::Fixed { radius: 0.0 }; 2];
        let own = attach_marks(&pat, &mus, 9, false).unwrap();
        let shared = attach_marks(&pat, &mus, 9, true).unwrap();
        assert_ne!(own.marks[0], own.marks[1]);
        assert_eq!(shared.marks[0], shared.marks[1]);
    }

    #[test]
    fn independent_extremes() {
        let w = Window::new(50.0).unwrap();
        let pat = sample_ppp(0.1, w, 5).unwrap();
        assert!(thin_independent(&pat, 0.0, 1).unwrap().is_empty());
        assert_eq!(thin_independent(&pat, 1.0, 1).unwrap().len(), pat.len());
        assert!(thin_independent(&pat, 1.5, 1).is_err());
    }

    #[test]
    fn matii_pairwise_rule() {
        let mk = two_points(0.5, (0.7, 0.2));
        assert_eq!(thin_matii(&mk, 0, 1.0).unwrap(), vec![1]);
        assert_eq!(thin_matii(&mk, 0, 0.0).unwrap(), vec![0, 1]);
        assert_eq!(thin_matii(&mk, 0, 0.4).unwrap(), vec![0, 1]);
        assert!(thin_matii(&mk, 0, f64::INFINITY).unwrap().is_empty());
        assert!(thin_matii(&mk, 3, 1.0).is_err());
    }

    #[test]
    fn matii_ties_go_to_lower_index() {
        let mk = two_points(0.5, (0.4, 0.4));
        assert_eq!(thin_matii(&mk, 0, 1.0).unwrap(), vec![0]);
    }

    #[test]
    fn gec_isolated_point_kept() {
        let win = Window::new(10.0).unwrap();
        let base = PointPattern::new(vec![Point::new(5.0, 5.0)], win).unwrap();
        let mk = MarkedPattern { base, marks: vec![vec![BivariateMark { radius: 3.0, weight: 0.9 }]] };
        assert_eq!(gec_retention_probabilities(&mk, 0, 1.0, 10.0).unwrap(), vec![1.0]);
        assert_eq!(thin_gec(&mk, 0, 1.0, 10.0, 4).unwrap(), vec![0]);
    }

    #[test]
    fn gec_inside_exclusion_deletes_heavier_point() {
        // distance 1.5 <= m + n = 2: f = 1 for the heavier point
        let mk = two_points(1.5, (0.8, 0.3));
        let p = gec_retention_probabilities(&mk, 0, 1.0, 10.0).unwrap();
        assert_eq!(p, vec![0.0, 1.0]);
    }

    #[test]
    fn gec_soft_tail() {
        // distance 2.1, m + n = 2: f = exp(-c * 0.1)
        let mk = two_points(2.1, (0.8, 0.3));
        let p = gec_retention_probabilities(&mk, 0, 0.5, 10.0).unwrap();
        assert!((p[0] - 0.5 * (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert_eq!(p[1], 0.5);
        assert!(gec_retention_probabilities(&mk, 0, 0.0, 10.0).is_err());
        assert!(gec_retention_probabilities(&mk, 0, 1.0, 0.0).is_err());
    }

    #[test]
    fn systematic_sampling_hits_exact_sizes() {
        let mut r = rng::stream(1, Purpose::Placement, &[]);
        let probs = [0.5, 0.25, 0.75, 1.0, 0.0, 0.5];
        let mut freq = [0usize; 6];
        for _ in 0..20000 {
            let s = systematic_sample(&probs, &mut r);
            assert_eq!(s.len(), 3);
            for i in s {
                freq[i] += 1;
            }
        }
        for (f, p) in freq.iter().zip(probs) {
            assert!((*f as f64 / 20000.0 - p).abs() < 0.015, "{f} vs {p}");
        }
    }

    #[test]
    fn place_all_checks_item_count() {
        let mk = two_points(1.0, (0.1, 0.2));
        let pol = PlacementPolicy::HardExclusion { radii: vec![1.0, 2.0] };
        assert!(matches!(place_all(&mk, &pol, 1), Err(Error::Config(_))));
    }

    #[test]
    fn placement_result_indicators() {
        let res = PlacementResult::from_retained(3, vec![vec![0, 2], vec![2]]);
        assert!(res.z(0, 0) && !res.z(0, 1) && res.z(2, 1));
        assert_eq!(res.occupancies(), &[1, 0, 2]);
    }

    #[test]
    fn realization_csv_rows() {
        let mk = two_points(1.5, (0.8, 0.3));
        let res = PlacementResult::from_retained(2, vec![vec![1]]);
        let mut buf = Vec::new();
        write_realization_csv(&mut buf, 0, &mk, &res, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "replication,item,x,y,mark_radius,weight,retained");
        assert_eq!(lines[1], "0,0,5.0,5.0,1.0,0.8,0");
        assert_eq!(lines[2], "0,0,6.5,5.0,1.0,0.3,1");
    }
    #[test]
    fn place_among_matches_place_all_on_candidates() {
        let w = Window::new(40.0).unwrap();
        let pat = sample_ppp(0.1, w, 5).unwrap();
        let mus = vec![MarkDistribution::from_mean_scale(1.5, 1.0).unwrap(); 3];
        let marked = attach_marks(&pat, &mus, 5, false).unwrap();
        let cand: Vec<usize> = pat.eval_indices();
        let policies = [
            PlacementPolicy::Independent { probs: vec![0.2, 0.5, 0.9], mode: IndependentMode::Bernoulli },
            PlacementPolicy::Independent { probs: vec![0.2, 0.5, 0.9], mode: IndependentMode::Exact },
            PlacementPolicy::HardExclusion { radii: vec![1.0, 2.0, 4.0] },
            PlacementPolicy::GammaExclusion { marks: mus.clone(), p0: vec![1.0, 0.8, 1.0], c: 10.0 },
        ];
        for pol in &policies {
            let full = place_all(&marked, pol, 9).unwrap();
            let part = place_among(&marked, pol, 9, &cand).unwrap();
            for x in 0..pat.len() {
                for i in 0..3 {
                    let expect = cand.binary_search(&x).is_ok() && full.z(x, i);
                    assert_eq!(part.z(x, i), expect, "{} node {x} item {i}", pol.name());
                }
            }
        }
        assert!(place_among(&marked, &policies[0], 9, &[3, 1]).is_err());
    }
}
