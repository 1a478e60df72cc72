//! Configurations, the scan order, the neighbour relation and clusters.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MarkSpec, Point, Window, MAX_DIM};

/// Default hard cap on configuration size.
pub const DEFAULT_CONFIG_CAP: usize = 1_000_000;

/// A finite simple configuration of marked points.
///
/// Points are kept in the canonical coordinate order, which makes equality
/// and hashing independent of how the configuration was assembled. Samplers
/// that need the window-dependent scan order sort by [`KeyMap`] themselves.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PointConfig {
    points: Vec<Point>,
}

impl PointConfig {
    pub fn empty() -> Self {
        PointConfig { points: Vec::new() }
    }

    pub fn new(points: Vec<Point>) -> Result<Self> {
        Self::with_cap(points, DEFAULT_CONFIG_CAP)
    }

    pub fn with_cap(mut points: Vec<Point>, cap: usize) -> Result<Self> {
        if points.len() > cap {
            return Err(Error::ConfigTooLarge { count: points.len(), cap });
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite point {p:?}")));
        }
        points.sort_by(|a, b| a.total_cmp(b));
        if let Some(w) = points.windows(2).find(|w| w[0].total_cmp(&w[1]) == Ordering::Equal) {
            return Err(Error::DuplicatePoint(format!("{:?}", w[0])));
        }
        Ok(PointConfig { points })
    }

    /// Builds from points known to be distinct (e.g. drawn from a diffuse law).
    pub(crate) fn from_distinct(mut points: Vec<Point>) -> Self {
        points.sort_by(|a, b| a.total_cmp(b));
        points.dedup_by(|a, b| a.total_cmp(b) == Ordering::Equal);
        PointConfig { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.points.iter()
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.points.binary_search_by(|q| q.total_cmp(p)).is_ok()
    }

    /// Sum of two configurations; shared points appear once.
    pub fn union(&self, other: &PointConfig) -> PointConfig {
        let mut v = self.points.clone();
        v.extend_from_slice(&other.points);
        PointConfig::from_distinct(v)
    }

    pub fn restrict<F: Fn(&Point) -> bool>(&self, keep: F) -> PointConfig {
        PointConfig { points: self.points.iter().filter(|p| keep(p)).copied().collect() }
    }

    pub fn restrict_to_window(&self, w: &Window) -> PointConfig {
        self.restrict(|p| w.contains(p.loc()))
    }

    /// Points of `self` not in `other`.
    pub fn difference(&self, other: &PointConfig) -> PointConfig {
        self.restrict(|p| !other.contains(p))
    }

    /// Support of `|self - other|`.
    pub fn symmetric_difference(&self, other: &PointConfig) -> PointConfig {
        self.difference(other).union(&other.difference(self))
    }

    pub fn count_in(&self, w: &Window) -> usize {
        self.points.iter().filter(|p| w.contains(p.loc())).count()
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }
}

impl<'de> Deserialize<'de> for PointConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pts = Vec::<Point>::deserialize(d)?;
        PointConfig::new(pts).map_err(serde::de::Error::custom)
    }
}

impl<'a> IntoIterator for &'a PointConfig {
    type Item = &'a Point;
    type IntoIter = std::slice::Iter<'a, Point>;
    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

/// The symmetric relation `~` on the state space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Relation {
    /// `|x - y| <= r + s`.
    BallsOverlap,
    /// `|x - y| <= r + s` and different labels.
    BallsOverlapDistinctLabels,
    /// `|x - y| < r0`; with `r0 = 0` nothing is related.
    Range { r0: f64 },
}

impl Relation {
    #[inline]
    pub fn related(&self, p: &Point, q: &Point) -> bool {
        match *self {
            Relation::BallsOverlap => {
                let s = p.radius + q.radius;
                p.dist2(q) <= s * s
            }
            Relation::BallsOverlapDistinctLabels => {
                let s = p.radius + q.radius;
                p.label != q.label && p.dist2(q) <= s * s
            }
            Relation::Range { r0 } => p.dist2(q) < r0 * r0,
        }
    }

    /// Largest location distance at which two points can be related.
    pub fn reach(&self, marks: &MarkSpec) -> f64 {
        match *self {
            Relation::BallsOverlap | Relation::BallsOverlapDistinctLabels => 2.0 * marks.max_radius(),
            Relation::Range { r0 } => r0,
        }
    }

    /// `p ~ A`: related to some point of `set`.
    pub fn related_to_any(&self, p: &Point, set: &[Point]) -> bool {
        set.iter().any(|q| self.related(p, q))
    }
}

/// `mu` restricted to the neighbourhood `N_p`; `p` itself is excluded.
pub fn neighbors(p: &Point, cfg: &PointConfig, rel: &Relation) -> PointConfig {
    cfg.restrict(|q| q != p && rel.related(p, q))
}

/// The cluster `C(p, cfg)`: points of `cfg` connected to `p` via `cfg`.
pub fn cluster(p: &Point, cfg: &PointConfig, rel: &Relation) -> PointConfig {
    let pts = cfg.points();
    let idx = cluster_indices(p, pts, rel);
    PointConfig { points: idx.into_iter().map(|i| pts[i]).collect::<Vec<_>>() }
        .sorted()
}

impl PointConfig {
    fn sorted(mut self) -> Self {
        self.points.sort_by(|a, b| a.total_cmp(b));
        self
    }
}

/// Indices of points in `pts` connected to `p` (breadth-first search).
pub fn cluster_indices(p: &Point, pts: &[Point], rel: &Relation) -> Vec<usize> {
    let mut seen = vec![false; pts.len()];
    let mut queue: Vec<usize> = Vec::new();
    for (i, q) in pts.iter().enumerate() {
        if q != p && rel.related(p, q) {
            seen[i] = true;
            queue.push(i);
        }
    }
    let mut head = 0;
    while head < queue.len() {
        let cur = pts[queue[head]];
        head += 1;
        for (j, q) in pts.iter().enumerate() {
            if !seen[j] && *q != *p && rel.related(&cur, q) {
                seen[j] = true;
                queue.push(j);
            }
        }
    }
    queue
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Union-find labels of the relation graph on `pts`; equal labels mean the
/// same component. Labels are the smallest index in each component.
pub fn component_labels(pts: &[Point], rel: &Relation, reach: f64) -> Vec<usize> {
    let n = pts.len();
    let mut uf = UnionFind::new(n);
    if n <= 64 || reach <= 0.0 {
        if reach > 0.0 || matches!(rel, Relation::BallsOverlap | Relation::BallsOverlapDistinctLabels) {
            for i in 0..n {
                for j in i + 1..n {
                    if rel.related(&pts[i], &pts[j]) {
                        uf.union(i, j);
                    }
                }
            }
        }
    } else {
        // cell grid with cell side = reach: related pairs sit in adjacent cells
        let d = pts[0].dim();
        let cell_of = |p: &Point| -> [i64; MAX_DIM] {
            let mut c = [0i64; MAX_DIM];
            for (i, &x) in p.loc().iter().enumerate() {
                c[i] = (x / reach).floor() as i64;
            }
            c
        };
        let mut grid: HashMap<[i64; MAX_DIM], Vec<usize>> = HashMap::new();
        for (i, p) in pts.iter().enumerate() {
            grid.entry(cell_of(p)).or_default().push(i);
        }
        let offsets = neighbor_offsets(d);
        for (i, p) in pts.iter().enumerate() {
            let c = cell_of(p);
            for off in &offsets {
                let mut key = c;
                for k in 0..d {
                    key[k] += off[k];
                }
                if let Some(list) = grid.get(&key) {
                    for &j in list {
                        if j > i && rel.related(p, &pts[j]) {
                            uf.union(i, j);
                        }
                    }
                }
            }
        }
    }
    let mut min_of_root: HashMap<usize, usize> = HashMap::new();
    let roots: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
    for (i, &r) in roots.iter().enumerate() {
        min_of_root.entry(r).or_insert(i);
    }
    roots.iter().map(|r| min_of_root[r]).collect()
}

fn neighbor_offsets(d: usize) -> Vec<[i64; MAX_DIM]> {
    let mut out = vec![[0i64; MAX_DIM]];
    for k in 0..d {
        let mut next = Vec::with_capacity(out.len() * 3);
        for o in &out {
            for delta in -1..=1 {
                let mut n = *o;
                n[k] = delta;
                next.push(n);
            }
        }
        out = next;
    }
    out
}

/// Partition of `cfg` into connected components of the relation graph.
pub fn components(cfg: &PointConfig, rel: &Relation, reach: f64) -> Vec<PointConfig> {
    let pts = cfg.points();
    let labels = component_labels(pts, rel, reach);
    let mut blocks: Vec<Vec<Point>> = Vec::new();
    let mut index_of: HashMap<usize, usize> = HashMap::new();
    for (i, &l) in labels.iter().enumerate() {
        let b = *index_of.entry(l).or_insert_with(|| {
            blocks.push(Vec::new());
            blocks.len() - 1
        });
        blocks[b].push(pts[i]);
    }
    blocks.into_iter().map(|b| PointConfig { points: b }).collect()
}

/// Position in the scan order: layer first, then the window key.
#[derive(Debug, Clone, Copy)]
pub struct OrderKey {
    pub layer: u32,
    pub code: u64,
    point: Point,
}

impl OrderKey {
    /// The base value in `(0, 1]`.
    pub fn base(&self) -> f64 {
        (self.code as f64 + 1.0) / 18_446_744_073_709_551_616.0
    }

    pub fn point(&self) -> &Point {
        &self.point
    }
}

impl PartialEq for OrderKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OrderKey {}

impl PartialOrd for OrderKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.layer
            .cmp(&other.layer)
            .then(self.code.cmp(&other.code))
            .then_with(|| self.point.total_cmp(&other.point))
    }
}

/// Builds order keys for points of a window.
///
/// The base key maps the window to the unit cube and interleaves the bits of
/// the normalized coordinates (and of the radius quantile when the radius law
/// is continuous). Uniform points therefore have uniformly distributed keys,
/// so the measure of `{y : key(y) > key(x)}` is `λ(W)(1 - base(x))`.
#[derive(Debug, Clone)]
pub struct KeyMap {
    window: Window,
    marks: MarkSpec,
}

impl KeyMap {
    pub fn new(window: Window, marks: MarkSpec) -> Self {
        KeyMap { window, marks }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn marks(&self) -> &MarkSpec {
        &self.marks
    }

    /// Number of coordinates feeding the key.
    pub fn key_dims(&self) -> usize {
        let continuous = self.marks.kind != crate::geometry::MarkKind::None
            && self.marks.law.cdf_if_continuous(self.marks.law.min()).is_some();
        self.window.dim() + continuous as usize
    }

    pub fn code(&self, p: &Point) -> u64 {
        let d = self.window.dim();
        let mut u = [0.0; MAX_DIM + 1];
        for i in 0..d {
            let lo = self.window.lower()[i];
            u[i] = ((p.loc()[i] - lo) / self.window.side(i)).clamp(0.0, 1.0);
        }
        let mut k = d;
        if let Some(q) = self.marks.law.cdf_if_continuous(p.radius) {
            if self.marks.kind != crate::geometry::MarkKind::None {
                u[k] = q;
                k += 1;
            }
        }
        interleave(&u[..k])
    }

    pub fn key(&self, p: &Point, layer: u32) -> OrderKey {
        OrderKey { layer, code: self.code(p), point: *p }
    }

    /// Fraction of `λ(W)` lying strictly above `key` in the unlayered order.
    pub fn mass_above(&self, key: &OrderKey) -> f64 {
        1.0 - key.base()
    }
}

fn interleave(u: &[f64]) -> u64 {
    let k = u.len();
    let bits = (64 / k).min(53) as u32;
    let scale = (1u64 << bits) as f64;
    if k == 1 {
        let q = ((u[0] * scale) as u64).min((1u64 << bits) - 1);
        return q << (64 - bits);
    }
    let mut q = [0u64; MAX_DIM + 1];
    for (qi, &x) in q.iter_mut().zip(u) {
        *qi = ((x * scale) as u64).min((1u64 << bits) - 1);
    }
    let mut code = 0u64;
    for b in (0..bits).rev() {
        for qi in &q[..k] {
            code = (code << 1) | ((qi >> b) & 1);
        }
    }
    // left-align so that codes spread over the full range
    let used = bits * k as u32;
    if used < 64 {
        code <<= 64 - used;
    }
    code
}

/// Assigns each point a scan layer, or `None` when the point lies outside
/// the active region.
pub trait Layering: Sync {
    fn layer(&self, p: &Point) -> Option<u32>;

    /// True when every point of the window sits in layer 0.
    fn is_whole(&self) -> bool {
        false
    }
}

/// Every point of the window in layer 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct WholeWindow;

impl Layering for WholeWindow {
    fn layer(&self, _p: &Point) -> Option<u32> {
        Some(0)
    }

    fn is_whole(&self) -> bool {
        true
    }
}

impl<F: Fn(&Point) -> Option<u32> + Sync> Layering for F {
    fn layer(&self, p: &Point) -> Option<u32> {
        self(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RadiusLaw;

    fn ball(x: f64, r: f64) -> Point {
        Point::new(&[x]).with_radius(r)
    }

    #[test]
    fn neighbors_examples() {
        let rel = Relation::BallsOverlap;
        let p = ball(0.0, 1.0);
        assert!(neighbors(&p, &PointConfig::empty(), &rel).is_empty());
        let cfg = PointConfig::new(vec![ball(1.5, 1.0)]).unwrap();
        assert_eq!(neighbors(&p, &cfg, &rel).len(), 1);
        let wr = Relation::BallsOverlapDistinctLabels;
        let a = Point::new(&[0.0, 0.0]).with_radius(0.5).with_label(1);
        let b = Point::new(&[0.0, 0.0]).with_radius(0.5).with_label(2);
        let same = PointConfig::new(vec![Point::new(&[0.1, 0.0]).with_radius(0.5).with_label(1)]).unwrap();
        assert!(neighbors(&a, &same, &wr).is_empty());
        assert!(wr.related(&a, &b));
    }

    #[test]
    fn cluster_follows_chains() {
        let rel = Relation::BallsOverlap;
        let x = ball(0.0, 0.5);
        let cfg = PointConfig::new(vec![ball(0.9, 0.5), ball(1.8, 0.5), ball(5.0, 0.5)]).unwrap();
        assert!(!rel.related(&x, &ball(1.8, 0.5)));
        let c = cluster(&x, &cfg, &rel);
        assert_eq!(c.len(), 2);
        assert!(c.contains(&ball(1.8, 0.5)));
    }

    #[test]
    fn components_pair_and_singleton() {
        let rel = Relation::BallsOverlap;
        let cfg = PointConfig::new(vec![ball(0.0, 0.5), ball(0.8, 0.5), ball(4.0, 0.5)]).unwrap();
        let mut sizes: Vec<usize> = components(&cfg, &rel, 1.0).iter().map(|b| b.len()).collect();
        sizes.sort();
        assert_eq!(sizes, vec![1, 2]);
    }

    #[test]
    fn duplicate_points_rejected() {
        let p = Point::new(&[0.3, 0.4]);
        assert!(matches!(PointConfig::new(vec![p, p]), Err(Error::DuplicatePoint(_))));
        assert!(matches!(
            PointConfig::with_cap(vec![p, Point::new(&[0.1, 0.1])], 1),
            Err(Error::ConfigTooLarge { .. })
        ));
    }

    #[test]
    fn layers_dominate_base() {
        let km = KeyMap::new(Window::unit(2), MarkSpec::none());
        let p = Point::new(&[0.9, 0.9]);
        let q = Point::new(&[0.1, 0.1]);
        assert!(km.key(&p, 0) < km.key(&q, 1));
        assert!(km.key(&q, 0) < km.key(&p, 0));
        assert_eq!(km.key(&p, 0), km.key(&p, 0));
        let b = km.key(&p, 0).base();
        assert!(b > 0.0 && b <= 1.0);
    }

    #[test]
    fn one_dimensional_order_is_monotone() {
        let marks = MarkSpec::radius(RadiusLaw::PointMass { r: 0.05 }).unwrap();
        let km = KeyMap::new(Window::unit(1), marks);
        let mut last = km.key(&ball(0.0, 0.05), 0);
        for i in 1..1000 {
            let k = km.key(&ball(i as f64 / 1000.0, 0.05), 0);
            assert!(k > last);
            assert!((km.mass_above(&k) - (1.0 - i as f64 / 1000.0)).abs() < 1e-9);
            last = k;
        }
    }
}
