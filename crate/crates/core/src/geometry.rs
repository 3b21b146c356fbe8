//! Planar circle geometry used by the detection stage.
//!
//! Each anchor `a_i` with measured range `d_i` defines a circle. Pairs of
//! circles are intersected in closed form and classified by how they relate,
//! which drives the honest-point clustering and the "enclosing circle" test.

use std::ops::{Add, Mul, Sub};

use crate::{Error, Result};

/// A point (or vector) in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Rotation by +90 degrees, i.e. `[0 -1; 1 0] * self`.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// A range circle: centered on an anchor, radius equal to the measured distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "circle center must be finite, got {center:?}"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "circle radius must be positive and finite, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }
}

/// How two circles sit relative to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CircleRelation {
    Intersecting,
    Tangent,
    ExternallyDisjoint,
    FirstContainsSecond,
    SecondContainsFirst,
}

impl CircleRelation {
    /// True when the two circles share no point.
    pub fn is_disjoint(self) -> bool {
        matches!(
            self,
            CircleRelation::ExternallyDisjoint
                | CircleRelation::FirstContainsSecond
                | CircleRelation::SecondContainsFirst
        )
    }

    /// The same relation seen with the circles swapped.
    pub fn swapped(self) -> Self {
        match self {
            CircleRelation::FirstContainsSecond => CircleRelation::SecondContainsFirst,
            CircleRelation::SecondContainsFirst => CircleRelation::FirstContainsSecond,
            other => other,
        }
    }
}

/// Discriminant of the pair and the squared center separation.
///
/// `k = ((d_i + d_j)^2 - D^2) (D^2 - (d_j - d_i)^2)` with `D = |a_j - a_i|`.
/// Values within `1e-12 (d_i + d_j)^4` of zero are snapped to zero.
fn discriminant(ci: &Circle, cj: &Circle) -> Result<(f64, f64)> {
    let sep_sq = (cj.center - ci.center).norm_sq();
    if sep_sq == 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "coincident circle centers at {:?}",
            ci.center
        )));
    }
    let sum = ci.radius + cj.radius;
    let diff = cj.radius - ci.radius;
    let k = (sum * sum - sep_sq) * (sep_sq - diff * diff);
    let tol = 1e-12 * sum.powi(4);
    let k = if k.abs() <= tol { 0.0 } else { k };
    Ok((k, sep_sq))
}

/// Intersection points of two circles, `p0 + t` and `p0 - t`.
///
/// A tangent pair returns the touching point twice. Returns `Ok(None)` when
/// the circles do not meet.
pub fn intersect_circles(ci: &Circle, cj: &Circle) -> Result<Option<(Point, Point)>> {
    let (k, sep_sq) = discriminant(ci, cj)?;
    if k < 0.0 {
        return Ok(None);
    }
    let axis = cj.center - ci.center;
    let along = (ci.radius * ci.radius - cj.radius * cj.radius) / (2.0 * sep_sq);
    let p0 = (ci.center + cj.center) * 0.5 + axis * along;
    let t = axis.perp() * (k.sqrt() / (2.0 * sep_sq));
    Ok(Some((p0 + t, p0 - t)))
}

/// Classifies the pair using the same snapped discriminant as
/// [`intersect_circles`], so the two always agree on whether points exist.
pub fn classify_pair(ci: &Circle, cj: &Circle) -> Result<CircleRelation> {
    let (k, sep_sq) = discriminant(ci, cj)?;
    if k == 0.0 {
        return Ok(CircleRelation::Tangent);
    }
    if k > 0.0 {
        return Ok(CircleRelation::Intersecting);
    }
    let sep = sep_sq.sqrt();
    let relation = if sep > ci.radius + cj.radius {
        CircleRelation::ExternallyDisjoint
    } else if ci.radius > cj.radius {
        CircleRelation::FirstContainsSecond
    } else {
        CircleRelation::SecondContainsFirst
    };
    Ok(relation)
}

/// Sum of all pairwise distances; smaller means a tighter cluster.
pub fn cluster_compactness(points: &[Point]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "compactness needs at least two points, got {}",
            points.len()
        )));
    }
    let mut total = 0.0;
    for (idx, p) in points.iter().enumerate() {
        for q in &points[idx + 1..] {
            total += p.distance(*q);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(x: f64, y: f64, r: f64) -> Circle {
        Circle::new(Point::new(x, y), r).unwrap()
    }

    fn on_circle(p: Point, c: &Circle) -> bool {
        (p.distance(c.center) - c.radius).abs() < 1e-9 * c.radius.max(1.0)
    }

    #[test]
    fn three_four_five() {
        let (p, q) = intersect_circles(&circle(0.0, 0.0, 5.0), &circle(6.0, 0.0, 5.0))
            .unwrap()
            .unwrap();
        let mut pts = [p, q];
        pts.sort_by(|a, b| a.y.total_cmp(&b.y));
        assert!((pts[0].x - 3.0).abs() < 1e-12 && (pts[0].y + 4.0).abs() < 1e-12);
        assert!((pts[1].x - 3.0).abs() < 1e-12 && (pts[1].y - 4.0).abs() < 1e-12);
    }

    #[test]
    fn tangent_returns_single_point_twice() {
        let (p, q) = intersect_circles(&circle(0.0, 0.0, 1.0), &circle(2.0, 0.0, 1.0))
            .unwrap()
            .unwrap();
        assert_eq!(p, q);
        assert!((p.x - 1.0).abs() < 1e-12 && p.y.abs() < 1e-12);
        assert_eq!(
            classify_pair(&circle(0.0, 0.0, 1.0), &circle(2.0, 0.0, 1.0)).unwrap(),
            CircleRelation::Tangent
        );
    }

    #[test]
    fn separated_circles_do_not_meet() {
        let a = circle(0.0, 0.0, 1.0);
        let b = circle(5.0, 0.0, 1.0);
        assert!(intersect_circles(&a, &b).unwrap().is_none());
        assert_eq!(classify_pair(&a, &b).unwrap(), CircleRelation::ExternallyDisjoint);
    }

    #[test]
    fn generic_pair_points_lie_on_both_circles() {
        let a = circle(0.0, 0.0, 2.5);
        let b = circle(1.2, 0.7, 1.9);
        let (p, q) = intersect_circles(&a, &b).unwrap().unwrap();
        for pt in [p, q] {
            assert!(on_circle(pt, &a));
            assert!(on_circle(pt, &b));
        }
        assert!(p.distance(q) > 1e-3);
    }

    #[test]
    fn containment_variants() {
        let big = circle(0.0, 0.0, 10.0);
        let small = circle(2.0, 0.0, 1.0);
        assert_eq!(classify_pair(&big, &small).unwrap(), CircleRelation::FirstContainsSecond);
        assert_eq!(classify_pair(&small, &big).unwrap(), CircleRelation::SecondContainsFirst);
        assert!(intersect_circles(&big, &small).unwrap().is_none());
        assert_eq!(
            classify_pair(&circle(0.0, 0.0, 5.0), &circle(6.0, 0.0, 5.0)).unwrap(),
            CircleRelation::Intersecting
        );
    }

    #[test]
    fn coincident_centers_are_rejected() {
        let a = circle(1.0, 1.0, 1.0);
        let b = circle(1.0, 1.0, 2.0);
        assert!(matches!(intersect_circles(&a, &b), Err(Error::DegenerateGeometry(_))));
        assert!(matches!(classify_pair(&a, &b), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn invalid_radius_is_rejected() {
        assert!(Circle::new(Point::new(0.0, 0.0), 0.0).is_err());
        assert!(Circle::new(Point::new(0.0, 0.0), -1.0).is_err());
        assert!(Circle::new(Point::new(f64::NAN, 0.0), 1.0).is_err());
    }

    #[test]
    fn compactness_examples() {
        let origin = Point::new(0.0, 0.0);
        assert_eq!(cluster_compactness(&[origin, origin, origin]).unwrap(), 0.0);
        assert_eq!(cluster_compactness(&[origin, Point::new(3.0, 4.0)]).unwrap(), 5.0);
        let tri = [origin, Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        // 1 + 1 + sqrt(2), summed by hand
        let expected = 2.0 + std::f64::consts::SQRT_2;
        assert!((cluster_compactness(&tri).unwrap() - expected).abs() < 1e-15);
        assert!(cluster_compactness(&[origin]).is_err());
        assert!(cluster_compactness(&[]).is_err());
    }
}
