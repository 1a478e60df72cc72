//! Points, windows, mark laws and the few exact volume formulas the bounds
//! need.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::qmc;

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 6;

/// A marked point: location, optional radius, optional label.
///
/// Unmarked points carry radius 0 and label 0; labels are 1-based when used.
#[derive(Clone, Copy, PartialEq)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: u8,
    pub radius: f64,
    pub label: u16,
}

impl Point {
    pub fn new(loc: &[f64]) -> Self {
        assert!(!loc.is_empty() && loc.len() <= MAX_DIM, "dimension out of range");
        let mut coords = [0.0; MAX_DIM];
        coords[..loc.len()].copy_from_slice(loc);
        Point { coords, dim: loc.len() as u8, radius: 0.0, label: 0 }
    }

    pub fn with_radius(mut self, r: f64) -> Self {
        self.radius = r;
        self
    }

    pub fn with_label(mut self, label: u16) -> Self {
        self.label = label;
        self
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn loc(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn loc_mut(&mut self) -> &mut [f64] {
        &mut self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn dist2(&self, other: &Point) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim as usize {
            let d = self.coords[i] - other.coords[i];
            s += d * d;
        }
        s
    }

    #[inline]
    pub fn dist(&self, other: &Point) -> f64 {
        self.dist2(other).sqrt()
    }

    /// Squared distance from this location to an arbitrary location.
    #[inline]
    pub fn dist2_to(&self, loc: &[f64]) -> f64 {
        self.loc().iter().zip(loc).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.loc().iter().all(|c| c.is_finite()) && self.radius.is_finite()
    }

    /// Canonical total order: coordinates, then radius, then label.
    pub fn total_cmp(&self, other: &Point) -> Ordering {
        for i in 0..self.dim.max(other.dim) as usize {
            match self.coords[i].total_cmp(&other.coords[i]) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        self.radius
            .total_cmp(&other.radius)
            .then(self.label.cmp(&other.label))
            .then(self.dim.cmp(&other.dim))
    }

    pub fn translated(&self, shift: &[f64]) -> Point {
        let mut p = *self;
        for (c, s) in p.loc_mut().iter_mut().zip(shift) {
            *c += s;
        }
        p
    }
}

impl std::fmt::Debug for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Point({:?}", self.loc())?;
        if self.radius != 0.0 {
            write!(f, ", r={}", self.radius)?;
        }
        if self.label != 0 {
            write!(f, ", l={}", self.label)?;
        }
        write!(f, ")")
    }
}

#[derive(Serialize, Deserialize)]
struct PointRecord {
    loc: Vec<f64>,
    #[serde(default, skip_serializing_if = "is_zero_f64")]
    radius: f64,
    #[serde(default, skip_serializing_if = "is_zero_u16")]
    label: u16,
}

fn is_zero_f64(x: &f64) -> bool {
    *x == 0.0
}

fn is_zero_u16(x: &u16) -> bool {
    *x == 0
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PointRecord { loc: self.loc().to_vec(), radius: self.radius, label: self.label }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = PointRecord::deserialize(d)?;
        if rec.loc.is_empty() || rec.loc.len() > MAX_DIM {
            return Err(serde::de::Error::custom(format!(
                "point dimension must be in 1..={MAX_DIM}"
            )));
        }
        Ok(Point::new(&rec.loc).with_radius(rec.radius).with_label(rec.label))
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    lower: [f64; MAX_DIM],
    upper: [f64; MAX_DIM],
    dim: u8,
}

impl Window {
    pub fn new(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() || lower.len() > MAX_DIM {
            return Err(invalid("window corners must have equal dimension in 1..=6"));
        }
        if lower.iter().zip(upper).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(invalid("window requires finite lower < upper in every coordinate"));
        }
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        lo[..lower.len()].copy_from_slice(lower);
        hi[..upper.len()].copy_from_slice(upper);
        Ok(Window { lower: lo, upper: hi, dim: lower.len() as u8 })
    }

    /// The cube `[0, side]^d`.
    pub fn cube(dim: usize, side: f64) -> Result<Self> {
        Window::new(&vec![0.0; dim], &vec![side; dim])
    }

    pub fn unit(dim: usize) -> Self {
        Window::cube(dim, 1.0).expect("unit cube is valid")
    }

    /// Cube of half-side `h` centred at `center`.
    pub fn centered(center: &[f64], h: f64) -> Result<Self> {
        let lo: Vec<f64> = center.iter().map(|c| c - h).collect();
        let hi: Vec<f64> = center.iter().map(|c| c + h).collect();
        Window::new(&lo, &hi)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower[..self.dim()]
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper[..self.dim()]
    }

    pub fn side(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.side(i)).product()
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim()).map(|i| self.side(i).powi(2)).sum::<f64>().sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| 0.5 * (self.lower[i] + self.upper[i])).collect()
    }

    #[inline]
    pub fn contains(&self, loc: &[f64]) -> bool {
        loc.iter().enumerate().all(|(i, &c)| c >= self.lower[i] && c <= self.upper[i])
    }

    pub fn contains_window(&self, other: &Window) -> bool {
        (0..self.dim()).all(|i| other.lower[i] >= self.lower[i] && other.upper[i] <= self.upper[i])
    }

    /// Box grown by `margin` on every side.
    pub fn expanded(&self, margin: f64) -> Result<Window> {
        let lo: Vec<f64> = self.lower().iter().map(|c| c - margin).collect();
        let hi: Vec<f64> = self.upper().iter().map(|c| c + margin).collect();
        Window::new(&lo, &hi)
    }

    pub fn intersection(&self, other: &Window) -> Option<Window> {
        let lo: Vec<f64> = (0..self.dim()).map(|i| self.lower[i].max(other.lower[i])).collect();
        let hi: Vec<f64> = (0..self.dim()).map(|i| self.upper[i].min(other.upper[i])).collect();
        Window::new(&lo, &hi).ok()
    }

    /// Maps `u ∈ [0,1)^d` affinely onto the box.
    #[inline]
    pub fn map_unit(&self, u: &[f64], out: &mut [f64]) {
        for i in 0..self.dim() {
            out[i] = self.lower[i] + u[i] * self.side(i);
        }
    }

    /// Euclidean distance from `loc` to the box (0 inside).
    pub fn distance_to(&self, loc: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, &c) in loc.iter().enumerate() {
            let d = (self.lower[i] - c).max(c - self.upper[i]).max(0.0);
            s += d * d;
        }
        s.sqrt()
    }

    pub fn sample_loc<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for i in 0..self.dim() {
            out[i] = self.lower[i] + rng.random::<f64>() * self.side(i);
        }
    }

    /// Splits the box into `2^d` congruent cells, indexed by bit pattern.
    pub fn dyadic_cells(&self) -> Vec<Window> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                let mut lo = vec![0.0; d];
                let mut hi = vec![0.0; d];
                for i in 0..d {
                    let mid = 0.5 * (self.lower[i] + self.upper[i]);
                    if mask >> i & 1 == 0 {
                        lo[i] = self.lower[i];
                        hi[i] = mid;
                    } else {
                        lo[i] = mid;
                        hi[i] = self.upper[i];
                    }
                }
                Window::new(&lo, &hi).expect("cells of a valid box are valid")
            })
            .collect()
    }

    /// Index of the dyadic cell containing `loc` (ties go to the upper cell).
    pub fn dyadic_cell_of(&self, loc: &[f64]) -> usize {
        let mut idx = 0;
        for (i, &c) in loc.iter().enumerate() {
            if c >= 0.5 * (self.lower[i] + self.upper[i]) {
                idx |= 1 << i;
            }
        }
        idx
    }
}

impl Serialize for Window {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Rec<'a> {
            lower: &'a [f64],
            upper: &'a [f64],
        }
        Rec { lower: self.lower(), upper: self.upper() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Window {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Rec {
            lower: Vec<f64>,
            upper: Vec<f64>,
        }
        let rec = Rec::deserialize(d)?;
        Window::new(&rec.lower, &rec.upper).map_err(serde::de::Error::custom)
    }
}

/// Law of the radius mark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum RadiusLaw {
    PointMass { r: f64 },
    Uniform { a: f64, b: f64 },
    Discrete { atoms: Vec<(f64, f64)> },
}

impl RadiusLaw {
    pub fn zero() -> Self {
        RadiusLaw::PointMass { r: 0.0 }
    }

    pub fn max(&self) -> f64 {
        match self {
            RadiusLaw::PointMass { r } => *r,
            RadiusLaw::Uniform { b, .. } => *b,
            RadiusLaw::Discrete { atoms } => atoms.iter().map(|a| a.0).fold(0.0, f64::max),
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            RadiusLaw::PointMass { r } => *r,
            RadiusLaw::Uniform { a, .. } => *a,
            RadiusLaw::Discrete { atoms } => {
                atoms.iter().filter(|a| a.1 > 0.0).map(|a| a.0).fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Quantile function.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            RadiusLaw::PointMass { r } => *r,
            RadiusLaw::Uniform { a, b } => a + u * (b - a),
            RadiusLaw::Discrete { atoms } => {
                let mut acc = 0.0;
                for &(r, w) in atoms {
                    acc += w;
                    if u < acc {
                        return r;
                    }
                }
                atoms.last().map(|a| a.0).unwrap_or(0.0)
            }
        }
    }

    /// Continuous laws feed the mark into the order key; atoms only break ties.
    pub fn cdf_if_continuous(&self, r: f64) -> Option<f64> {
        match self {
            RadiusLaw::Uniform { a, b } if b > a => Some(((r - a) / (b - a)).clamp(0.0, 1.0)),
            _ => None,
        }
    }

    /// Quadrature rule `(nodes, weights)` for integrals against the law.
    pub fn quadrature(&self, n: usize) -> Vec<(f64, f64)> {
        match self {
            RadiusLaw::PointMass { r } => vec![(*r, 1.0)],
            RadiusLaw::Discrete { atoms } => atoms.clone(),
            RadiusLaw::Uniform { a, b } => {
                if b <= a {
                    return vec![(*a, 1.0)];
                }
                let (x, w) = qmc::gauss_legendre(n.max(1));
                x.iter().zip(&w).map(|(x, w)| (a + (x + 1.0) * 0.5 * (b - a), 0.5 * w)).collect()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            RadiusLaw::PointMass { r } if !(r.is_finite() && *r >= 0.0) => {
                Err(invalid("point-mass radius must be finite and non-negative"))
            }
            RadiusLaw::Uniform { a, b } if !(a.is_finite() && b.is_finite() && 0.0 <= *a && a <= b) => {
                Err(invalid("uniform radius law needs 0 <= a <= b < inf"))
            }
            RadiusLaw::Discrete { atoms } => {
                if atoms.is_empty() {
                    return Err(invalid("discrete radius law needs at least one atom"));
                }
                if atoms.iter().any(|&(r, w)| !(r.is_finite() && r >= 0.0 && w >= 0.0)) {
                    return Err(invalid("discrete radius atoms must be finite, non-negative"));
                }
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(invalid(format!("discrete radius weights sum to {total}, not 1")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkKind {
    None,
    Radius,
    RadiusAndLabel,
}

/// Mark space and its probability law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkSpec {
    pub kind: MarkKind,
    #[serde(default = "RadiusLaw::zero")]
    pub law: RadiusLaw,
    #[serde(default)]
    pub labels: u16,
}

impl MarkSpec {
    pub fn none() -> Self {
        MarkSpec { kind: MarkKind::None, law: RadiusLaw::PointMass { r: 0.0 }, labels: 0 }
    }

    pub fn radius(law: RadiusLaw) -> Result<Self> {
        let m = MarkSpec { kind: MarkKind::Radius, law, labels: 0 };
        m.validate()?;
        Ok(m)
    }

    pub fn radius_and_label(law: RadiusLaw, labels: u16) -> Result<Self> {
        let m = MarkSpec { kind: MarkKind::RadiusAndLabel, law, labels };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != MarkKind::None {
            self.law.validate()?;
        }
        if self.kind == MarkKind::RadiusAndLabel && self.labels < 2 {
            return Err(invalid("labelled marks need at least two labels"));
        }
        Ok(())
    }

    /// Largest radius `R` (0 when unmarked).
    pub fn max_radius(&self) -> f64 {
        match self.kind {
            MarkKind::None => 0.0,
            _ => self.law.max(),
        }
    }

    /// Number of uniform coordinates consumed by [`MarkSpec::apply_unit`].
    pub fn mark_dims(&self) -> usize {
        match self.kind {
            MarkKind::None => 0,
            MarkKind::Radius => 1,
            MarkKind::RadiusAndLabel => 2,
        }
    }

    /// Writes the mark obtained from uniform coordinates into `p`.
    #[inline]
    pub fn apply_unit(&self, u: &[f64], p: &mut Point) {
        match self.kind {
            MarkKind::None => {}
            MarkKind::Radius => p.radius = self.law.quantile(u[0]),
            MarkKind::RadiusAndLabel => {
                p.radius = self.law.quantile(u[0]);
                p.label = 1 + ((u[1] * self.labels as f64) as u16).min(self.labels - 1);
            }
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, p: &mut Point) {
        let u = [rng.random::<f64>(), rng.random::<f64>()];
        self.apply_unit(&u[..self.mark_dims()], p);
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            MarkKind::None => "none",
            MarkKind::Radius => "radius",
            MarkKind::RadiusAndLabel => "radius_and_label",
        }
    }

    /// Checks that a point carries a mark of this kind and within range.
    pub fn admits(&self, p: &Point) -> bool {
        match self.kind {
            MarkKind::None => p.radius == 0.0 && p.label == 0,
            MarkKind::Radius => p.radius >= 0.0 && p.radius <= self.max_radius() && p.label == 0,
            MarkKind::RadiusAndLabel => {
                p.radius >= 0.0 && p.radius <= self.max_radius() && p.label >= 1 && p.label <= self.labels
            }
        }
    }
}

/// Uniform point in `window` with a mark drawn from `marks`.
pub fn sample_point<R: Rng + ?Sized>(rng: &mut R, window: &Window, marks: &MarkSpec) -> Point {
    let mut loc = [0.0; MAX_DIM];
    window.sample_loc(rng, &mut loc);
    let mut p = Point::new(&loc[..window.dim()]);
    marks.sample_into(rng, &mut p);
    p
}

/// Point built from uniform coordinates: `d` location coordinates then the
/// mark coordinates.
pub fn point_from_unit(u: &[f64], window: &Window, marks: &MarkSpec) -> Point {
    let d = window.dim();
    let mut loc = [0.0; MAX_DIM];
    window.map_unit(&u[..d], &mut loc);
    let mut p = Point::new(&loc[..d]);
    marks.apply_unit(&u[d..], &mut p);
    p
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    PI.powf(h) / statrs::function::gamma::gamma(h + 1.0)
}

pub fn ball_volume(d: usize, r: f64) -> f64 {
    unit_ball_volume(d) * r.max(0.0).powi(d as i32)
}

/// Volume of `B(center, r) ∩ window`.
///
/// Exact in one and two dimensions, composite Gauss-Legendre over slices in
/// three, randomized QMC beyond.
pub fn ball_box_volume(center: &[f64], r: f64, window: &Window) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let d = window.dim();
    match d {
        1 => {
            let lo = (center[0] - r).max(window.lower()[0]);
            let hi = (center[0] + r).min(window.upper()[0]);
            (hi - lo).max(0.0)
        }
        2 => disk_rect_area(
            center[0],
            center[1],
            r,
            [window.lower()[0], window.upper()[0]],
            [window.lower()[1], window.upper()[1]],
        ),
        3 => {
            let zlo = (center[2] - r).max(window.lower()[2]);
            let zhi = (center[2] + r).min(window.upper()[2]);
            if zhi <= zlo {
                return 0.0;
            }
            let (x, w) = qmc::gauss_legendre(8);
            let panels = 48;
            let h = (zhi - zlo) / panels as f64;
            let mut total = 0.0;
            for k in 0..panels {
                let a = zlo + k as f64 * h;
                for (xi, wi) in x.iter().zip(&w) {
                    let z = a + (xi + 1.0) * 0.5 * h;
                    let rz = (r * r - (z - center[2]).powi(2)).max(0.0).sqrt();
                    let area = disk_rect_area(
                        center[0],
                        center[1],
                        rz,
                        [window.lower()[0], window.upper()[0]],
                        [window.lower()[1], window.upper()[1]],
                    );
                    total += wi * 0.5 * h * area;
                }
            }
            total
        }
        _ => {
            let bb = Window::centered(center, r).ok().and_then(|b| b.intersection(window));
            let Some(bb) = bb else { return 0.0 };
            let vol = bb.volume();
            let mut loc = [0.0; MAX_DIM];
            let r2 = r * r;
            let est = qmc::integrate(d, 1 << 14, 4, crate::rng::StreamSeed::new(d as u64), |u| {
                bb.map_unit(u, &mut loc);
                let s: f64 = (0..d).map(|i| (loc[i] - center[i]).powi(2)).sum();
                (s <= r2) as u8 as f64
            });
            vol * est.value
        }
    }
}

/// Area of the disk `B((cx,cy), r)` intersected with a rectangle.
pub fn disk_rect_area(cx: f64, cy: f64, r: f64, xs: [f64; 2], ys: [f64; 2]) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let f = |a: f64, b: f64| disk_quadrant(a - cx, b - cy, r);
    (f(xs[1], ys[1]) - f(xs[0], ys[1]) - f(xs[1], ys[0]) + f(xs[0], ys[0])).max(0.0)
}

/// Area of `{(x,y): x^2+y^2 <= r^2, x <= a, y <= b}`.
fn disk_quadrant(a: f64, b: f64, r: f64) -> f64 {
    let prim = |x: f64| {
        let x = x.clamp(-r, r);
        let s = (r * r - x * x).max(0.0).sqrt();
        0.5 * (x * s + r * r * (x / r).asin())
    };
    // integral over [lo, hi] of the vertical chord clipped at height b
    let chord = |lo: f64, hi: f64, kind: u8| -> f64 {
        if hi <= lo {
            return 0.0;
        }
        match kind {
            // full chord 2 s(x)
            0 => 2.0 * (prim(hi) - prim(lo)),
            // b + s(x)
            1 => b * (hi - lo) + (prim(hi) - prim(lo)),
            _ => 0.0,
        }
    };
    let top = a.min(r);
    if top <= -r {
        return 0.0;
    }
    if b >= r {
        return chord(-r, top, 0);
    }
    if b <= -r {
        return 0.0;
    }
    let w = (r * r - b * b).sqrt();
    if b >= 0.0 {
        // |x| > w: chord below b entirely; |x| <= w: clipped
        chord(-r, top.min(-w), 0) + chord(-w, top.min(w), 1) + chord(w, top, 0)
    } else {
        chord(-w, top.min(w), 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamSeed;

    #[test]
    fn disk_inside_rectangle_is_full_area() {
        let a = disk_rect_area(0.0, 0.0, 1.0, [-2.0, 2.0], [-2.0, 2.0]);
        assert!((a - PI).abs() < 1e-12);
        let half = disk_rect_area(0.0, 0.0, 1.0, [0.0, 2.0], [-2.0, 2.0]);
        assert!((half - PI / 2.0).abs() < 1e-12);
        let quarter = disk_rect_area(0.0, 0.0, 1.0, [0.0, 2.0], [0.0, 2.0]);
        assert!((quarter - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn disk_rectangle_matches_monte_carlo() {
        let mut rng = StreamSeed::new(11).rng();
        for _ in 0..20 {
            let cx: f64 = rng.random_range(-0.5..1.5);
            let cy: f64 = rng.random_range(-0.5..1.5);
            let r: f64 = rng.random_range(0.05..0.9);
            let exact = disk_rect_area(cx, cy, r, [0.0, 1.0], [0.0, 0.7]);
            // independent oracle: fine midpoint grid
            let n = 1200;
            let mut hits = 0u64;
            for i in 0..n {
                for j in 0..n {
                    let x = (i as f64 + 0.5) / n as f64;
                    let y = 0.7 * (j as f64 + 0.5) / n as f64;
                    if (x - cx).powi(2) + (y - cy).powi(2) <= r * r {
                        hits += 1;
                    }
                }
            }
            let grid = hits as f64 * 0.7 / (n * n) as f64;
            assert!((exact - grid).abs() < 2e-3, "{exact} vs {grid}");
        }
    }

    #[test]
    fn ball_box_volume_three_dims() {
        let w = Window::cube(3, 4.0).unwrap();
        let v = ball_box_volume(&[2.0, 2.0, 2.0], 1.0, &w);
        assert!((v - 4.0 / 3.0 * PI).abs() < 1e-9);
        let half = ball_box_volume(&[2.0, 2.0, 0.0], 1.0, &w);
        assert!((half - 2.0 / 3.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-12);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn discrete_law_quantile_and_validation() {
        let law = RadiusLaw::Discrete { atoms: vec![(0.1, 0.25), (0.2, 0.75)] };
        assert_eq!(law.quantile(0.1), 0.1);
        assert_eq!(law.quantile(0.5), 0.2);
        assert!(MarkSpec::radius(law).is_ok());
        let bad = RadiusLaw::Discrete { atoms: vec![(0.1, 0.5), (0.2, 0.4)] };
        assert!(MarkSpec::radius(bad).is_err());
    }

    #[test]
    fn point_serde_roundtrip() {
        let p = Point::new(&[0.5, 0.25]).with_radius(0.1).with_label(2);
        let s = serde_json::to_string(&p).unwrap();
        let q: Point = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
