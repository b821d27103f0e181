//! Point processes and circle-covering bounds.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Seed, Vec2};

/// Axis-aligned rectangle. `origin` is the lower-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub width: f64,
    pub height: f64,
    #[serde(default = "zero2")]
    pub origin: Vec2,
}

fn zero2() -> Vec2 {
    Vec2::zeros()
}

impl Region {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        let r = Region {
            width,
            height,
            origin: Vec2::zeros(),
        };
        r.validate()?;
        Ok(r)
    }

    pub fn square(side: f64) -> Result<Self> {
        Self::new(side, side)
    }

    pub fn with_origin(mut self, origin: Vec2) -> Self {
        self.origin = origin;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::param(
                "width",
                format!("must be positive, got {}", self.width),
            ));
        }
        if !(self.height > 0.0 && self.height.is_finite()) {
            return Err(Error::param(
                "height",
                format!("must be positive, got {}", self.height),
            ));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.width + self.height)
    }

    pub fn center(&self) -> Vec2 {
        self.origin + Vec2::new(self.width / 2.0, self.height / 2.0)
    }

    pub fn max_corner(&self) -> Vec2 {
        self.origin + Vec2::new(self.width, self.height)
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        let hi = self.max_corner();
        p.x >= self.origin.x && p.x <= hi.x && p.y >= self.origin.y && p.y <= hi.y
    }

    /// Grows the rectangle by `margin` on every side.
    pub fn expanded(&self, margin: f64) -> Region {
        Region {
            width: self.width + 2.0 * margin,
            height: self.height + 2.0 * margin,
            origin: self.origin - Vec2::new(margin, margin),
        }
    }

    fn uniform_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        self.origin
            + Vec2::new(
                rng.random::<f64>() * self.width,
                rng.random::<f64>() * self.height,
            )
    }
}

/// Sampled point pattern together with the intensity it was drawn at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub points: Vec<Vec2>,
    /// Points per square metre.
    pub density: f64,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest pairwise distance, `None` for fewer than two points.
    pub fn min_pairwise_distance(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                let d = (a - b).norm();
                best = Some(best.map_or(d, |m| m.min(d)));
            }
        }
        best
    }
}

/// Homogeneous Poisson field with `density` points per square metre.
pub fn sample_ppp(region: &Region, density: f64, seed: Seed) -> Result<PointSet> {
    sample_ppp_with(region, density, &mut seed.rng())
}

pub fn sample_ppp_with<R: Rng + ?Sized>(
    region: &Region,
    density: f64,
    rng: &mut R,
) -> Result<PointSet> {
    if !(density >= 0.0) || !density.is_finite() {
        return Err(Error::param(
            "density",
            format!("must be non-negative, got {density}"),
        ));
    }
    let mean = density * region.area();
    let n = if mean > 0.0 {
        let pois = Poisson::new(mean).map_err(|e| Error::param("density", e.to_string()))?;
        pois.sample(rng) as usize
    } else {
        0
    };
    let points = (0..n).map(|_| region.uniform_point(rng)).collect();
    Ok(PointSet { points, density })
}

/// Hard-core thinning rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaternKind {
    /// Delete every point with a neighbour closer than D.
    #[default]
    TypeI,
    /// Random marks; delete a point when a closer-than-D neighbour carries a
    /// smaller mark.
    TypeII,
}

/// Type-I hard-core thinning: a point survives iff its nearest neighbour in
/// the original set is at least `d` away.
pub fn matern_thin(points: &PointSet, d: f64) -> PointSet {
    let pts = &points.points;
    let d2 = d * d;
    let kept: Vec<Vec2> = pts
        .iter()
        .enumerate()
        .filter(|(i, p)| {
            pts.iter()
                .enumerate()
                .all(|(j, q)| j == *i || (*p - q).norm_squared() >= d2)
        })
        .map(|(_, p)| *p)
        .collect();
    PointSet {
        points: kept,
        density: points.density * (-points.density * PI * d2).exp(),
    }
}

/// Type-II hard-core thinning with uniform marks drawn from `rng`.
pub fn matern_thin_type2<R: Rng + ?Sized>(points: &PointSet, d: f64, rng: &mut R) -> PointSet {
    let pts = &points.points;
    let marks: Vec<f64> = pts.iter().map(|_| rng.random::<f64>()).collect();
    let d2 = d * d;
    let kept: Vec<Vec2> = pts
        .iter()
        .enumerate()
        .filter(|(i, p)| {
            pts.iter()
                .enumerate()
                .all(|(j, q)| j == *i || (*p - q).norm_squared() >= d2 || marks[j] > marks[*i])
        })
        .map(|(_, p)| *p)
        .collect();
    let a = points.density * PI * d2;
    let density = if a > 0.0 {
        (1.0 - (-a).exp()) / (PI * d2)
    } else {
        points.density
    };
    PointSet {
        points: kept,
        density,
    }
}

/// Area of the rectangle dilated by a disk of radius `r`.
pub fn minkowski_area_rect_disk(region: &Region, r: f64) -> f64 {
    region.area() + region.perimeter() * r + PI * r * r
}

/// Volumetric bounds on the number of radius-`R` disks needed to cover a
/// region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveringBounds {
    pub lower: f64,
    pub upper: f64,
    /// `ceil(lower)`.
    pub lower_int: u64,
    /// `floor(upper)`.
    pub upper_int: u64,
}

pub fn covering_bounds(region: &Region, r: f64) -> Result<CoveringBounds> {
    if !(r > 0.0) {
        return Err(Error::param("R", format!("must be positive, got {r}")));
    }
    let lower = region.area() / (PI * r * r);
    let half = r / 2.0;
    let upper = minkowski_area_rect_disk(region, half) / (PI * half * half);
    Ok(CoveringBounds {
        lower,
        upper,
        lower_int: lower.ceil() as u64,
        upper_int: upper.floor() as u64,
    })
}

/// Disk centres on a hexagonal lattice of pitch √3·R covering the region.
pub fn hex_cover(region: &Region, r: f64) -> Result<PointSet> {
    if !(r > 0.0) {
        return Err(Error::param("R", format!("must be positive, got {r}")));
    }
    let half_diag = 0.5 * region.width.hypot(region.height);
    if half_diag <= r {
        return Ok(PointSet {
            points: vec![region.center()],
            density: 1.0 / region.area(),
        });
    }
    // Rows 1.5R apart, centres √3R apart, odd rows shifted by half a pitch.
    // The Voronoi cells are hexagons of circumradius R; a centre is kept when
    // its cell's bounding box overlaps the region.
    let pitch = 3f64.sqrt() * r;
    let row_step = 1.5 * r;
    let lo = region.origin;
    let hi = region.max_corner();
    let mut points = Vec::new();
    let rows = ((region.height + r) / row_step).ceil() as i64 + 1;
    for k in 0..=rows {
        let y = lo.y + k as f64 * row_step;
        if y - r >= hi.y {
            break;
        }
        let shift = if k % 2 == 0 { 0.0 } else { pitch / 2.0 };
        let mut j = -1i64;
        loop {
            let x = lo.x + shift + j as f64 * pitch;
            if x - pitch / 2.0 >= hi.x {
                break;
            }
            if x + pitch / 2.0 > lo.x && y + r > lo.y {
                points.push(Vec2::new(x, y));
            }
            j += 1;
        }
    }
    let density = points.len() as f64 / region.area();
    Ok(PointSet { points, density })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_density_is_empty() {
        let r = Region::square(100.0).unwrap();
        assert!(sample_ppp(&r, 0.0, Seed(1)).unwrap().is_empty());
        assert!(sample_ppp(&r, -1.0, Seed(1)).is_err());
    }

    #[test]
    fn thinning_with_zero_distance_keeps_everything() {
        let ps = PointSet {
            points: vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)],
            density: 1.0,
        };
        assert_eq!(matern_thin(&ps, 0.0).points, ps.points);
    }

    #[test]
    fn rejects_bad_radius() {
        let r = Region::square(10.0).unwrap();
        assert!(covering_bounds(&r, 0.0).is_err());
        assert!(hex_cover(&r, -1.0).is_err());
    }
}
